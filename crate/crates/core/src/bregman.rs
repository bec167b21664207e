//! Bregman distances, single-hyperplane projections with dual correction, and
//! the forget pass.
//!
//! Every constraint is a half-space `<a, x> <= b`. Projections use the sign
//! convention `theta = (b - <a, x>) / (a^T Q^-1 a)` for quadratic objectives, so
//! `theta < 0` exactly when the constraint is violated at `x`. The corrected
//! step moves by `c = min(z, theta)` and keeps the dual `z - c` nonnegative.

use std::collections::HashMap;
use std::fmt;
use std::hash::{BuildHasherDefault, DefaultHasher};
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Duals with `|z| <= DUAL_ZERO_TOL` are treated as zero.
pub const DUAL_ZERO_TOL: f64 = 1e-12;

/// Tolerance for "lies on the hyperplane" and "strictly violated".
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Stable, hashable key of a constraint. Applications build it from whatever
/// identifies the constraint combinatorially (edge indices, example index).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(Box<[u32]>);

impl ConstraintId {
    pub fn new(parts: impl Into<Box<[u32]>>) -> Self {
        ConstraintId(parts.into())
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Debug for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:?}", self.0)
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Sparse coefficient vector with strictly increasing indices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVec {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVec {
    /// Builds from `(index, value)` pairs in any order. Repeated indices are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        SparseVec { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] += v;
        }
        out
    }
}

#[derive(Debug)]
struct HyperplaneInner {
    id: ConstraintId,
    coeffs: SparseVec,
    offset: f64,
}

/// The half-space `<a, x> <= b`. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Hyperplane(Arc<HyperplaneInner>);

impl Hyperplane {
    pub fn new(id: ConstraintId, coeffs: SparseVec, offset: f64) -> Result<Self> {
        if !coeffs.values().iter().any(|&v| v != 0.0) {
            return Err(Error::DegenerateConstraint(id.to_string()));
        }
        if !offset.is_finite() || coeffs.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "constraint {id} has non-finite data"
            )));
        }
        Ok(Hyperplane(Arc::new(HyperplaneInner { id, coeffs, offset })))
    }

    pub fn id(&self) -> &ConstraintId {
        &self.0.id
    }

    pub fn coeffs(&self) -> &SparseVec {
        &self.0.coeffs
    }

    pub fn offset(&self) -> f64 {
        self.0.offset
    }

    /// `<a, x> - b`; positive means violated.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.0.coeffs.dot(x) - self.0.offset
    }

    /// Euclidean distance from `x` to the half-space (zero when satisfied).
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.residual(x).max(0.0) / self.0.coeffs.norm_sq().sqrt()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.0.coeffs.max_index() {
            Some(i) if i >= dim => Err(Error::DimensionMismatch {
                expected: dim,
                actual: i + 1,
            }),
            _ => Ok(()),
        }
    }
}

impl PartialEq for Hyperplane {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.id == other.0.id
                && self.0.offset == other.0.offset
                && self.0.coeffs == other.0.coeffs)
    }
}

type FixedState = BuildHasherDefault<DefaultHasher>;

#[derive(Clone, Debug)]
pub struct DualEntry {
    pub value: f64,
    pub plane: Hyperplane,
}

/// Sparse dual vector keyed by constraint id; an absent key means zero.
///
/// The hasher is unseeded so iteration order, and therefore every
/// floating-point sum over the map, is reproducible across processes.
#[derive(Clone, Debug, Default)]
pub struct DualMap {
    entries: HashMap<ConstraintId, DualEntry, FixedState>,
}

impl DualMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &ConstraintId) -> f64 {
        self.entries.get(id).map_or(0.0, |e| e.value)
    }

    /// Stores `value` for `plane`, dropping the entry when it is zero within
    /// [`DUAL_ZERO_TOL`].
    pub fn set(&mut self, plane: &Hyperplane, value: f64) {
        if value.abs() <= DUAL_ZERO_TOL {
            self.entries.remove(plane.id());
        } else if let Some(e) = self.entries.get_mut(plane.id()) {
            e.value = value;
        } else {
            self.entries.insert(
                plane.id().clone(),
                DualEntry {
                    value,
                    plane: plane.clone(),
                },
            );
        }
    }

    pub fn is_zero(&self, id: &ConstraintId) -> bool {
        self.get(id).abs() <= DUAL_ZERO_TOL
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ConstraintId, &DualEntry)> {
        self.entries.iter()
    }

    pub fn min_value(&self) -> f64 {
        self.entries
            .values()
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_i |self_i - other_i|` over the union of keys.
    pub fn max_abs_diff(&self, other: &DualMap) -> f64 {
        let a = self
            .entries
            .iter()
            .map(|(k, e)| (e.value - other.get(k)).abs());
        let b = other
            .entries
            .iter()
            .filter(|(k, _)| !self.entries.contains_key(*k))
            .map(|(_, e)| e.value.abs());
        a.chain(b).fold(0.0, f64::max)
    }
}

/// A strictly convex function usable as the objective of Bregman projections
/// onto half-spaces.
///
/// Implementors promise that every hyperplane handed to them is strongly zone
/// consistent; this is not checked at runtime.
pub trait BregmanFunction {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// A point of the zone with vanishing gradient.
    fn zero_gradient_point(&self) -> Result<Vec<f64>>;

    /// The multiplier `theta` with `grad f(x*) - grad f(x) = theta a` and
    /// `<a, x*> = b`.
    fn projection_multiplier(&self, x: &[f64], plane: &Hyperplane) -> Result<f64>;

    /// Moves `x` to the point `x'` with `grad f(x') - grad f(x) = c a`.
    fn shift(&self, x: &mut [f64], plane: &Hyperplane, c: f64);

    /// `sqrt(y^T H y)` for the Hessian `H` at the optimum.
    fn hessian_norm(&self, y: &[f64]) -> f64;
}

#[derive(Clone, Debug)]
enum Curvature {
    Diagonal(Vec<f64>),
    Dense {
        q: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

/// `f(x) = s + r^T x + 1/2 x^T Q x` with `Q` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    curvature: Curvature,
    linear: Vec<f64>,
    constant: f64,
}

impl QuadraticObjective {
    pub fn diagonal(q: Vec<f64>, r: Vec<f64>, s: f64) -> Result<Self> {
        if q.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: r.len(),
            });
        }
        if let Some((i, v)) = q
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(format!(
                "diagonal entry {i} of Q must be positive, got {v}"
            )));
        }
        Ok(QuadraticObjective {
            curvature: Curvature::Diagonal(q),
            linear: r,
            constant: s,
        })
    }

    pub fn dense(q: DMatrix<f64>, r: Vec<f64>, s: f64) -> Result<Self> {
        if !q.is_square() || q.nrows() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                actual: q.nrows(),
            });
        }
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-12 * q.amax().max(1.0) {
            return Err(Error::invalid("Q must be symmetric"));
        }
        let chol = Cholesky::new(q.clone())
            .ok_or_else(|| Error::invalid("Q must be positive definite"))?;
        Ok(QuadraticObjective {
            curvature: Curvature::Dense { q, chol },
            linear: r,
            constant: s,
        })
    }

    /// `1/2 ||x - center||^2`.
    pub fn squared_distance_to(center: &[f64]) -> Self {
        let s = 0.5 * center.iter().map(|c| c * c).sum::<f64>();
        QuadraticObjective {
            curvature: Curvature::Diagonal(vec![1.0; center.len()]),
            linear: center.iter().map(|c| -c).collect(),
            constant: s,
        }
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn diagonal_entries(&self) -> Option<&[f64]> {
        match &self.curvature {
            Curvature::Diagonal(q) => Some(q),
            Curvature::Dense { .. } => None,
        }
    }

    fn apply_q(&self, v: &[f64]) -> Vec<f64> {
        match &self.curvature {
            Curvature::Diagonal(q) => q.iter().zip(v).map(|(q, v)| q * v).collect(),
            Curvature::Dense { q, .. } => (q * DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }

    fn solve_dense(&self, a: &SparseVec) -> Option<DVector<f64>> {
        match &self.curvature {
            Curvature::Diagonal(_) => None,
            Curvature::Dense { chol, .. } => {
                Some(chol.solve(&DVector::from_vec(a.to_dense(self.linear.len()))))
            }
        }
    }

    /// `a^T Q^-1 a`.
    pub fn inverse_quadratic_form(&self, a: &SparseVec) -> f64 {
        match &self.curvature {
            Curvature::Diagonal(q) => a.iter().map(|(i, v)| v * v / q[i]).sum(),
            Curvature::Dense { .. } => {
                let qa = self.solve_dense(a).unwrap();
                a.iter().map(|(i, v)| v * qa[i]).sum()
            }
        }
    }
}

impl BregmanFunction for QuadraticObjective {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let qx = self.apply_q(x);
        let quad: f64 = x.iter().zip(&qx).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.linear).map(|(a, b)| a * b).sum();
        self.constant + lin + 0.5 * quad
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.apply_q(x);
        for (g, r) in g.iter_mut().zip(&self.linear) {
            *g += r;
        }
        g
    }

    fn zero_gradient_point(&self) -> Result<Vec<f64>> {
        let x: Vec<f64> = match &self.curvature {
            Curvature::Diagonal(q) => self.linear.iter().zip(q).map(|(r, q)| -r / q).collect(),
            Curvature::Dense { chol, .. } => {
                let neg_r =
                    DVector::from_iterator(self.linear.len(), self.linear.iter().map(|r| -r));
                chol.solve(&neg_r).as_slice().to_vec()
            }
        };
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Initialization)
        }
    }

    fn projection_multiplier(&self, x: &[f64], plane: &Hyperplane) -> Result<f64> {
        let denom = self.inverse_quadratic_form(plane.coeffs());
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::DegenerateConstraint(plane.id().to_string()));
        }
        Ok(-plane.residual(x) / denom)
    }

    fn shift(&self, x: &mut [f64], plane: &Hyperplane, c: f64) {
        if c == 0.0 {
            return;
        }
        match &self.curvature {
            Curvature::Diagonal(q) => {
                for (i, a) in plane.coeffs().iter() {
                    x[i] += c * a / q[i];
                }
            }
            Curvature::Dense { .. } => {
                let qa = self.solve_dense(plane.coeffs()).unwrap();
                for (xi, d) in x.iter_mut().zip(qa.iter()) {
                    *xi += c * d;
                }
            }
        }
    }

    fn hessian_norm(&self, y: &[f64]) -> f64 {
        let qy = self.apply_q(y);
        y.iter()
            .zip(&qy)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>`.
pub fn bregman_distance<F: BregmanFunction + ?Sized>(f: &F, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(f.dim(), x.len())?;
    check_len(f.dim(), y.len())?;
    let g = f.gradient(y);
    let inner: f64 = g
        .iter()
        .zip(x.iter().zip(y))
        .map(|(g, (x, y))| g * (x - y))
        .sum();
    Ok(f.value(x) - f.value(y) - inner)
}

/// Projection of `x` onto the boundary of a half-space together with its
/// multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub theta: f64,
}

pub fn solve_projection<F: BregmanFunction + ?Sized>(
    f: &F,
    x: &[f64],
    plane: &Hyperplane,
) -> Result<Projection> {
    check_len(f.dim(), x.len())?;
    plane.check_dim(f.dim())?;
    let theta = f.projection_multiplier(x, plane)?;
    let mut point = x.to_vec();
    f.shift(&mut point, plane, theta);
    Ok(Projection { point, theta })
}

/// Result of one corrected projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub theta: f64,
    /// Applied correction `c = min(z, theta)`.
    pub correction: f64,
    /// Dual value after the step.
    pub dual: f64,
}

/// One corrected Bregman projection, in place: `c = min(z, theta)`,
/// `grad f(x') = grad f(x) + c a`, `z' = z - c`.
pub fn corrected_projection_step<F: BregmanFunction + ?Sized>(
    f: &F,
    x: &mut [f64],
    duals: &mut DualMap,
    plane: &Hyperplane,
) -> Result<StepOutcome> {
    let z = duals.get(plane.id());
    let theta = f.projection_multiplier(x, plane)?;
    let c = z.min(theta);
    if c == 0.0 {
        return Ok(StepOutcome {
            theta,
            correction: 0.0,
            dual: z,
        });
    }
    f.shift(x, plane, c);
    let dual = z - c;
    duals.set(plane, dual);
    Ok(StepOutcome {
        theta,
        correction: c,
        dual: duals.get(plane.id()),
    })
}

/// Removes, in place and order-preserving, every constraint whose dual is zero
/// within [`DUAL_ZERO_TOL`]. Returns the removed constraints.
pub fn forget_pass(duals: &DualMap, list: &mut Vec<Hyperplane>) -> Vec<Hyperplane> {
    let mut forgotten = Vec::new();
    list.retain(|h| {
        if duals.is_zero(h.id()) {
            forgotten.push(h.clone());
            false
        } else {
            true
        }
    });
    forgotten
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plane(id: u32, pairs: &[(usize, f64)], b: f64) -> Hyperplane {
        Hyperplane::new(
            ConstraintId::new(vec![id]),
            SparseVec::from_pairs(pairs.iter().copied()),
            b,
        )
        .unwrap()
    }

    fn unit(dim: usize) -> QuadraticObjective {
        QuadraticObjective::squared_distance_to(&vec![0.0; dim])
    }

    #[test]
    fn distance_examples() {
        let f = unit(2);
        assert_relative_eq!(bregman_distance(&f, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(
            bregman_distance(&f, &[3.0, -2.0], &[3.0, -2.0]).unwrap(),
            0.0
        );
        let g = QuadraticObjective::diagonal(vec![2.0, 4.0], vec![0.0, 0.0], 0.0).unwrap();
        // 1/2 (x-y)^T Q (x-y) = 1/2 (2 + 4)
        assert_relative_eq!(bregman_distance(&g, &[1.0, 1.0], &[0.0, 0.0]).unwrap(), 3.0);
        assert!(matches!(
            bregman_distance(&f, &[1.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let f = unit(3);
        let h = plane(0, &[(0, -1.0), (1, 1.0), (2, -1.0)], 0.0);
        let p = solve_projection(&f, &[1.0, 3.0, 1.0], &h).unwrap();
        assert_relative_eq!(p.theta, -1.0 / 3.0, epsilon = 1e-15);
        for (a, b) in p.point.iter().zip([4.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }

        let f2 = unit(2);
        let h2 = plane(1, &[(0, 1.0)], 1.0);
        let p2 = solve_projection(&f2, &[1.0, 0.0], &h2).unwrap();
        assert_eq!(p2.theta, 0.0);
        assert_eq!(p2.point, vec![1.0, 0.0]);

        let h3 = plane(2, &[(0, 1.0), (1, 1.0), (2, 1.0)], 3.0);
        let p3 = solve_projection(&f, &[2.0, 2.0, 2.0], &h3).unwrap();
        assert_relative_eq!(p3.theta, -1.0);
        assert_eq!(p3.point, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_coefficients_rejected() {
        let err = Hyperplane::new(
            ConstraintId::new(vec![9]),
            SparseVec::from_pairs([(0, 0.0)]),
            1.0,
        );
        assert!(matches!(err, Err(Error::DegenerateConstraint(_))));
    }

    #[test]
    fn dense_matches_diagonal() {
        let diag =
            QuadraticObjective::diagonal(vec![2.0, 5.0, 0.5], vec![0.1, -0.2, 0.3], 1.0).unwrap();
        let dense = QuadraticObjective::dense(
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, 0.5])),
            vec![0.1, -0.2, 0.3],
            1.0,
        )
        .unwrap();
        let h = plane(3, &[(0, 1.0), (2, -2.0)], 0.25);
        let x = [0.7, -0.1, -0.9];
        let a = solve_projection(&diag, &x, &h).unwrap();
        let b = solve_projection(&dense, &x, &h).unwrap();
        assert_relative_eq!(a.theta, b.theta, max_relative = 1e-12);
        for (u, v) in a.point.iter().zip(&b.point) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn dense_nondiagonal_projection_lands() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = QuadraticObjective::dense(q.clone(), vec![0.0, 0.0], 0.0).unwrap();
        let h = plane(4, &[(0, 1.0), (1, 1.0)], -1.0);
        let p = solve_projection(&f, &[1.0, 1.0], &h).unwrap();
        assert!(h.residual(&p.point).abs() < 1e-12);
        // Q (x* - x) is parallel to a
        let d = DVector::from_vec(vec![p.point[0] - 1.0, p.point[1] - 1.0]);
        let g = q * d;
        assert_relative_eq!(g[0], g[1], epsilon = 1e-12);
        assert_relative_eq!(g[0], p.theta, epsilon = 1e-12);
        assert!(QuadraticObjective::dense(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            vec![0.0; 2],
            0.0
        )
        .is_err());
    }

    #[test]
    fn corrected_step_examples() {
        let f = unit(3);
        let h = plane(0, &[(0, -1.0), (1, 1.0), (2, -1.0)], 0.0);
        let mut x = vec![1.0, 3.0, 1.0];
        let mut z = DualMap::new();
        let out = corrected_projection_step(&f, &mut x, &mut z, &h).unwrap();
        assert_relative_eq!(out.correction, -1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(z.get(h.id()), 1.0 / 3.0, epsilon = 1e-15);
        assert!(h.residual(&x).abs() <= FEASIBILITY_TOL);

        // satisfied and never corrected: no-op
        let g = unit(1);
        let h1 = plane(1, &[(0, 1.0)], 0.5);
        let mut x1 = vec![0.0];
        let mut z1 = DualMap::new();
        let out = corrected_projection_step(&g, &mut x1, &mut z1, &h1).unwrap();
        assert_eq!(out.theta, 0.5);
        assert_eq!(out.correction, 0.0);
        assert_eq!(x1, vec![0.0]);
        assert!(z1.is_empty());

        // theta = 0.5 > z = 0.2: partial undo by 0.2
        z1.set(&h1, 0.2);
        let out = corrected_projection_step(&g, &mut x1, &mut z1, &h1).unwrap();
        assert_relative_eq!(out.correction, 0.2);
        assert_relative_eq!(x1[0], 0.2);
        assert_eq!(z1.get(h1.id()), 0.0);
    }

    #[test]
    fn forget_examples() {
        let h1 = plane(1, &[(0, 1.0)], 0.0);
        let h2 = plane(2, &[(0, 1.0)], 0.0);
        let mut z = DualMap::new();
        z.set(&h1, 0.3);
        let mut list = vec![h1.clone(), h2.clone()];
        let gone = forget_pass(&z, &mut list);
        assert_eq!(list, vec![h1.clone()]);
        assert_eq!(gone, vec![h2]);

        let mut empty = Vec::new();
        assert!(forget_pass(&z, &mut empty).is_empty());

        let mut tiny = DualMap::new();
        tiny.set(&h1, 1e-15);
        let mut list = vec![h1];
        forget_pass(&tiny, &mut list);
        assert!(list.is_empty());
    }

    #[test]
    fn lagrangian_increment_identity() {
        // L(x', z') - L(x, z) = D_f(x', x) + c (b - <a, x'>) for one step.
        let f =
            QuadraticObjective::diagonal(vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, -2.0], 0.0).unwrap();
        let h = plane(0, &[(0, 1.0), (1, -1.0), (2, 2.0)], 0.5);
        let lag = |x: &[f64], z: f64| f.value(x) + z * h.residual(x);
        let mut x = f.zero_gradient_point().unwrap();
        let mut z = DualMap::new();
        for _ in 0..3 {
            let before = x.clone();
            let zb = z.get(h.id());
            let out = corrected_projection_step(&f, &mut x, &mut z, &h).unwrap();
            let inc = lag(&x, z.get(h.id())) - lag(&before, zb);
            let predicted = bregman_distance(&f, &x, &before).unwrap()
                + out.correction * (h.offset() - h.coeffs().dot(&x));
            assert_relative_eq!(inc, predicted, epsilon = 1e-12);
            assert!(inc >= -FEASIBILITY_TOL);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn distance_nonnegative(
                q in prop::collection::vec(0.1f64..10.0, 4),
                x in prop::collection::vec(-5.0f64..5.0, 4),
                y in prop::collection::vec(-5.0f64..5.0, 4),
            ) {
                let f = QuadraticObjective::diagonal(q, vec![0.3; 4], 0.0).unwrap();
                prop_assert!(bregman_distance(&f, &x, &y).unwrap() >= -1e-12);
                prop_assert!(bregman_distance(&f, &x, &x).unwrap().abs() <= 1e-12);
            }

            #[test]
            fn closed_form_and_landing(
                q in prop::collection::vec(0.1f64..10.0, 5),
                x in prop::collection::vec(-5.0f64..5.0, 5),
                a in prop::collection::vec(-2.0f64..2.0, 5),
                b in -3.0f64..3.0,
                z0 in 0.0f64..2.0,
            ) {
                prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
                let f = QuadraticObjective::diagonal(q.clone(), vec![0.0; 5], 0.0).unwrap();
                let h = Hyperplane::new(
                    ConstraintId::new(vec![0]),
                    SparseVec::from_pairs(a.iter().copied().enumerate()),
                    b,
                ).unwrap();
                let ax: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
                let aqa: f64 = a.iter().zip(&q).map(|(a, q)| a * a / q).sum();
                let p = solve_projection(&f, &x, &h).unwrap();
                let expected = (b - ax) / aqa;
                prop_assert!((p.theta - expected).abs() <= 1e-10 * expected.abs().max(1e-300));
                prop_assert!(h.residual(&p.point).abs() <= FEASIBILITY_TOL);

                let mut xs = x.clone();
                let mut duals = DualMap::new();
                duals.set(&h, z0);
                let out = corrected_projection_step(&f, &mut xs, &mut duals, &h).unwrap();
                prop_assert!(duals.get(h.id()) >= -DUAL_ZERO_TOL);
                if out.theta < 0.0 {
                    prop_assert!(h.residual(&xs).abs() <= FEASIBILITY_TOL);
                }
            }
        }
    }
}
