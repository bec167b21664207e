//! Brute-force reference solvers for small instances: explicit enumeration of
//! metric constraints and the classical cyclic Bregman method, which visits
//! every constraint in a fixed order every sweep and never forgets.

use std::collections::HashSet;

use crate::bregman::{corrected_projection_step, BregmanFunction, DualMap, Hyperplane};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::oracle::cycle_constraint;

/// Largest `n` accepted by [`enumerate_triangles`].
pub const MAX_TRIANGLE_NODES: usize = 12;

/// Movement tolerance of the reference solve.
pub const REFERENCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Default)]
pub struct FullConstraintSet {
    pub constraints: Vec<Hyperplane>,
}

impl FullConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Appends constraints whose ids are not already present.
    pub fn extend(&mut self, extra: impl IntoIterator<Item = Hyperplane>) {
        let mut seen: HashSet<_> = self.constraints.iter().map(|h| h.id().clone()).collect();
        for h in extra {
            if seen.insert(h.id().clone()) {
                self.constraints.push(h);
            }
        }
    }
}

/// Every triangle inequality `x_ij <= x_ik + x_kj` of `K_n` in the
/// lexicographic edge order of `K_n`.
pub fn enumerate_triangles(n: usize) -> Result<FullConstraintSet> {
    if !(3..=MAX_TRIANGLE_NODES).contains(&n) {
        return Err(Error::invalid(format!(
            "triangle enumeration needs 3 <= n <= {MAX_TRIANGLE_NODES}, got {n}"
        )));
    }
    let g = Graph::complete(n);
    let idx = |a: usize, b: usize| g.edge_index(a, b).expect("complete graph");
    let mut constraints = Vec::with_capacity(n * (n - 1) * (n - 2) / 2);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (ij, ik, jk) = (idx(i, j), idx(i, k), idx(j, k));
                constraints.push(cycle_constraint(ij, &[ik, jk])?);
                constraints.push(cycle_constraint(ik, &[ij, jk])?);
                constraints.push(cycle_constraint(jk, &[ij, ik])?);
            }
        }
    }
    Ok(FullConstraintSet { constraints })
}

/// Every cycle inequality of `MET(G)`: for each simple cycle and each of its
/// edges, that edge is at most the sum of the others. Exponential; meant for
/// graphs with a handful of nodes.
pub fn enumerate_cycles(graph: &Graph) -> Result<FullConstraintSet> {
    if graph.node_count() > MAX_TRIANGLE_NODES {
        return Err(Error::invalid(
            "cycle enumeration is limited to small graphs",
        ));
    }
    let mut cycles: HashSet<Vec<usize>> = HashSet::new();
    let n = graph.node_count();
    for start in 0..n {
        let mut on_path = vec![false; n];
        let mut edges = Vec::new();
        on_path[start] = true;
        walk(graph, start, start, &mut on_path, &mut edges, &mut cycles);
    }
    let mut cycles: Vec<Vec<usize>> = cycles.into_iter().collect();
    cycles.sort();
    let mut set = FullConstraintSet::default();
    for cyc in cycles {
        let planes = cyc.iter().map(|&long| {
            let rest: Vec<usize> = cyc.iter().copied().filter(|&e| e != long).collect();
            cycle_constraint(long, &rest)
        });
        set.extend(planes.collect::<Result<Vec<_>>>()?);
    }
    Ok(set)
}

fn walk(
    graph: &Graph,
    start: usize,
    at: usize,
    on_path: &mut [bool],
    edges: &mut Vec<usize>,
    out: &mut HashSet<Vec<usize>>,
) {
    for &(v, e) in graph.neighbors(at) {
        if v == start && edges.len() >= 2 && edges.first() != Some(&e) {
            let mut cyc = edges.clone();
            cyc.push(e);
            cyc.sort_unstable();
            out.insert(cyc);
        } else if v > start && !on_path[v] {
            on_path[v] = true;
            edges.push(e);
            walk(graph, start, v, on_path, edges, out);
            edges.pop();
            on_path[v] = false;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub duals: DualMap,
    pub sweeps: usize,
    pub converged: bool,
}

/// Classical cyclic Bregman projections with dual correction over the full
/// list, until one sweep moves no coordinate by more than `tol`.
pub fn cyclic_bregman_solve<F: BregmanFunction + ?Sized>(
    f: &F,
    constraints: &FullConstraintSet,
    max_sweeps: usize,
    tol: f64,
) -> Result<ReferenceSolution> {
    let mut x = f.zero_gradient_point()?;
    let mut duals = DualMap::new();
    let mut prev = x.clone();
    for sweep in 1..=max_sweeps {
        for h in &constraints.constraints {
            corrected_projection_step(f, &mut x, &mut duals, h)?;
        }
        let moved = x
            .iter()
            .zip(&prev)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if moved <= tol {
            return Ok(ReferenceSolution {
                x,
                duals,
                sweeps: sweep,
                converged: true,
            });
        }
        prev.copy_from_slice(&x);
    }
    Ok(ReferenceSolution {
        x,
        duals,
        sweeps: max_sweeps,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::QuadraticObjective;
    use approx::assert_relative_eq;

    #[test]
    fn triangle_counts() {
        assert_eq!(enumerate_triangles(3).unwrap().len(), 3);
        assert_eq!(enumerate_triangles(4).unwrap().len(), 12);
        assert_eq!(enumerate_triangles(5).unwrap().len(), 30);
        for n in 3..=8 {
            let set = enumerate_triangles(n).unwrap();
            assert_eq!(set.len(), 3 * n * (n - 1) * (n - 2) / 6);
            let ids: HashSet<_> = set.constraints.iter().map(|h| h.id().clone()).collect();
            assert_eq!(ids.len(), set.len());
        }
        assert!(enumerate_triangles(2).is_err());
        assert!(enumerate_triangles(13).is_err());
    }

    #[test]
    fn cycle_counts() {
        // K4: four triangles and three 4-cycles
        let set = enumerate_cycles(&Graph::complete(4)).unwrap();
        assert_eq!(set.len(), 4 * 3 + 3 * 4);
        let (tree, _) = Graph::new(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
        assert!(enumerate_cycles(&tree).unwrap().is_empty());
        let (square, _) = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(enumerate_cycles(&square).unwrap().len(), 4);
    }

    #[test]
    fn k3_reference() {
        let f = QuadraticObjective::squared_distance_to(&[1.0, 3.0, 1.0]);
        let sol = cyclic_bregman_solve(&f, &enumerate_triangles(3).unwrap(), 1000, REFERENCE_TOL)
            .unwrap();
        assert!(sol.converged);
        for (a, b) in sol.x.iter().zip([4.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn feasible_start_is_returned() {
        let start = [1.0, 1.5, 1.0, 2.0, 1.0, 1.0];
        let f = QuadraticObjective::squared_distance_to(&start);
        let sol =
            cyclic_bregman_solve(&f, &enumerate_triangles(4).unwrap(), 10, REFERENCE_TOL).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.sweeps, 1);
        assert_eq!(sol.x, start.to_vec());
    }
}
