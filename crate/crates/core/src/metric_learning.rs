//! Mahalanobis metric learning (ITML) with random pair sampling, and L2 SVM
//! training with the truly stochastic solver.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::bregman::{ConstraintId, Hyperplane, QuadraticObjective, SparseVec};
use crate::error::{Error, Result};
use crate::oracle::{tag, RandomOraclePool};
use crate::reference::{cyclic_bregman_solve, FullConstraintSet, ReferenceSolution};
use crate::solver::{self, ConvergenceCriterion, Monitor, Schedule, Solution};

/// Feature rows with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        let d = features.first().map_or(0, Vec::len);
        if let Some(row) = features.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Seeded shuffle, then the first `train_fraction` of rows for training.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::invalid(format!(
                "train fraction {train_fraction} outside [0, 1]"
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (train_fraction * self.len() as f64).round() as usize;
        Ok((self.subset(&idx[..cut]), self.subset(&idx[cut..])))
    }

    /// Labels as +-1: the smaller of exactly two distinct labels becomes -1.
    pub fn binary_labels(&self) -> Result<Vec<f64>> {
        let mut distinct: Vec<i64> = self.labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        match distinct.as_slice() {
            [neg, _] => Ok(self
                .labels
                .iter()
                .map(|&l| if l == *neg { -1.0 } else { 1.0 })
                .collect()),
            _ => Err(Error::invalid(format!(
                "binary classification needs exactly two labels, found {}",
                distinct.len()
            ))),
        }
    }
}

/// `(x_i - x_j)^T C (x_i - x_j)`.
pub fn mahalanobis_distance(c: &DMatrix<f64>, xi: &[f64], xj: &[f64]) -> Result<f64> {
    if c.nrows() != xi.len() || c.ncols() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: c.nrows(),
            actual: xi.len(),
        });
    }
    if xj.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            actual: xj.len(),
        });
    }
    let v = DVector::from_iterator(xi.len(), xi.iter().zip(xj).map(|(a, b)| a - b));
    Ok(v.dot(&(c * &v)))
}

/// `tr(C) - log det C - d`, the log-det divergence of `C` from the identity.
pub fn logdet_divergence(c: &DMatrix<f64>) -> Result<f64> {
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("matrix is not positive definite"))?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(c.trace() - logdet - c.nrows() as f64)
}

pub fn is_spd(c: &DMatrix<f64>) -> bool {
    c.is_square() && c.clone().cholesky().is_some()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairSets {
    pub similar: Vec<(usize, usize)>,
    pub dissimilar: Vec<(usize, usize)>,
}

impl PairSets {
    pub fn validate(&self, n: usize) -> Result<()> {
        for &(i, j) in self.similar.iter().chain(&self.dissimilar) {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) out of range for {n} points"
                )));
            }
        }
        let norm = |&(i, j): &(usize, usize)| (i.min(j), i.max(j));
        let s: std::collections::HashSet<_> = self.similar.iter().map(norm).collect();
        if let Some(p) = self.dissimilar.iter().map(norm).find(|p| s.contains(p)) {
            return Err(Error::invalid(format!(
                "pair {p:?} is both similar and dissimilar"
            )));
        }
        Ok(())
    }

    /// Up to `per_set` distinct same-label and different-label pairs drawn
    /// uniformly with a seeded generator.
    pub fn from_labels(labels: &[i64], per_set: usize, seed: u64) -> Result<Self> {
        let n = labels.len();
        let mut same = Vec::new();
        let mut diff = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if labels[i] == labels[j] {
                    same.push((i, j));
                } else {
                    diff.push((i, j));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = |mut all: Vec<(usize, usize)>| {
            all.shuffle(&mut rng);
            all.truncate(per_set);
            all.sort_unstable();
            all
        };
        let pairs = PairSets {
            similar: pick(same),
            dissimilar: pick(diff),
        };
        if pairs.similar.is_empty() || pairs.dissimilar.is_empty() {
            return Err(Error::invalid(
                "labels admit no similar or no dissimilar pairs",
            ));
        }
        Ok(pairs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ItmlParams {
    pub gamma: f64,
    /// Upper bound on similar-pair distances.
    pub u: f64,
    /// Lower bound on dissimilar-pair distances.
    pub l: f64,
}

impl Default for ItmlParams {
    fn default() -> Self {
        ItmlParams {
            gamma: 1.0,
            u: 1.0,
            l: 10.0,
        }
    }
}

impl ItmlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.u > 0.0 && self.l > 0.0) {
            return Err(Error::invalid("gamma, u and l must be positive"));
        }
        if self.u > self.l {
            return Err(Error::invalid(format!(
                "need u <= l, got u={} l={}",
                self.u, self.l
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairState {
    pub xi: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct MahalanobisState {
    pub c: DMatrix<f64>,
    /// Slack targets and duals of every pair touched so far.
    pub pairs: HashMap<(usize, usize, i8), PairState>,
    pub params: ItmlParams,
}

impl MahalanobisState {
    pub fn new(dim: usize, params: ItmlParams) -> Result<Self> {
        params.validate()?;
        Ok(MahalanobisState {
            c: DMatrix::identity(dim, dim),
            pairs: HashMap::new(),
            params,
        })
    }

    /// Current slack target and dual of a pair; untouched pairs report their
    /// initial values.
    pub fn pair(&self, i: usize, j: usize, delta: i8) -> PairState {
        self.pairs
            .get(&(i, j, delta))
            .copied()
            .unwrap_or(PairState {
                xi: if delta > 0 {
                    self.params.u
                } else {
                    self.params.l
                },
                lambda: 0.0,
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ItmlStep {
    pub alpha: f64,
    pub beta: f64,
    /// `x_i = x_j` under the current metric; nothing was changed.
    pub skipped: bool,
}

/// One ITML Bregman step for pair `(i, j)`; `delta` is `+1` for a similar
/// pair and `-1` for a dissimilar one.
pub fn itml_projection(
    state: &mut MahalanobisState,
    x: &[Vec<f64>],
    (i, j): (usize, usize),
    delta: i8,
) -> Result<ItmlStep> {
    if delta != 1 && delta != -1 {
        return Err(Error::invalid(format!(
            "delta must be +1 or -1, got {delta}"
        )));
    }
    let (xi, xj) = match (x.get(i), x.get(j)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid(format!("pair ({i}, {j}) out of range"))),
    };
    let dim = state.c.nrows();
    if xi.len() != dim || xj.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: xi.len(),
        });
    }
    let v = DVector::from_iterator(dim, xi.iter().zip(xj).map(|(a, b)| a - b));
    let cv = &state.c * &v;
    let p = v.dot(&cv);
    if !(p > 0.0) {
        log::warn!("skipping degenerate pair ({i}, {j}) with distance {p}");
        return Ok(ItmlStep {
            alpha: 0.0,
            beta: 0.0,
            skipped: true,
        });
    }
    let g = state.params.gamma;
    let d = f64::from(delta);
    let ps = state.pair(i, j, delta);
    let alpha = ps.lambda.min(d / 2.0 * (1.0 / p - g / ps.xi));
    let denom = 1.0 - d * alpha * p;
    if denom == 0.0 {
        return Err(Error::invalid(format!(
            "singular ITML update on pair ({i}, {j})"
        )));
    }
    let beta = d * alpha / denom;
    state.pairs.insert(
        (i, j, delta),
        PairState {
            xi: g * ps.xi / (g + d * alpha * ps.xi),
            lambda: ps.lambda - alpha,
        },
    );
    if beta != 0.0 {
        for c in 0..dim {
            for r in 0..dim {
                state.c[(r, c)] += beta * cv[r] * cv[c];
            }
        }
    }
    Ok(ItmlStep {
        alpha,
        beta,
        skipped: false,
    })
}

/// Alternates one random similar and one random dissimilar projection until
/// `budget` projections have been made.
pub fn itml_fit(
    x: &[Vec<f64>],
    pairs: &PairSets,
    params: ItmlParams,
    budget: usize,
    seed: u64,
) -> Result<MahalanobisState> {
    if pairs.similar.is_empty() || pairs.dissimilar.is_empty() {
        return Err(Error::invalid(
            "ITML needs nonempty similar and dissimilar pair sets",
        ));
    }
    pairs.validate(x.len())?;
    let dim = x.first().map_or(0, Vec::len);
    let mut state = MahalanobisState::new(dim, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < budget {
        let (set, delta) = if done % 2 == 0 {
            (&pairs.similar, 1)
        } else {
            (&pairs.dissimilar, -1)
        };
        let pair = set[rng.random_range(0..set.len())];
        itml_projection(&mut state, x, pair, delta)?;
        done += 1;
    }
    Ok(state)
}

/// Fraction of test rows whose majority label among the `k` nearest training
/// rows (under `C`) is correct. Vote ties go to the label with the nearest
/// member.
pub fn knn_evaluate(c: &DMatrix<f64>, train: &Dataset, test: &Dataset, k: usize) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("kNN needs nonempty training and test sets"));
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "k must be odd and positive, got {k}"
        )));
    }
    let dim = c.nrows();
    if train.dim() != dim || test.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: if train.dim() != dim {
                train.dim()
            } else {
                test.dim()
            },
        });
    }
    // C = L L^T, so the distance is Euclidean after mapping x -> L^T x
    let lt = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("metric matrix is not positive definite"))?
        .l()
        .transpose();
    let map = |rows: &[Vec<f64>]| -> Vec<DVector<f64>> {
        rows.iter()
            .map(|r| &lt * DVector::from_column_slice(r))
            .collect()
    };
    let tr = map(&train.features);
    let te = map(&test.features);
    let k = k.min(tr.len());
    let correct = te
        .par_iter()
        .zip(&test.labels)
        .filter(|(q, &truth)| {
            let mut dist: Vec<(f64, usize)> = tr
                .iter()
                .enumerate()
                .map(|(i, t)| ((*q - t).norm_squared(), i))
                .collect();
            dist.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite"));
            let near = &mut dist[..k];
            near.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
            let mut votes: Vec<(i64, usize, usize)> = Vec::new();
            for (rank, &(_, i)) in near.iter().enumerate() {
                let label = train.labels[i];
                match votes.iter_mut().find(|v| v.0 == label) {
                    Some(v) => v.1 += 1,
                    None => votes.push((label, 1, rank)),
                }
            }
            let best = votes
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
                .expect("k >= 1");
            best.0 == truth
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Noise added to the normalized score in [`generate_svm_data`].
pub const DEFAULT_SVM_NOISE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SvmData {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Fraction of labels the noise flipped relative to the true hyperplane.
    pub flip_rate: f64,
}

impl SvmData {
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: self.labels.iter().map(|&y| y as i64).collect(),
        }
    }
}

/// Entries `N(0, K^2)`, labels from a random hyperplane through the origin
/// with `N(0, noise^2)` added to the score `h^T x / ||h||`.
pub fn generate_svm_data(n: usize, d: usize, k: f64, seed: u64) -> Result<SvmData> {
    generate_svm_data_with_noise(n, d, k, DEFAULT_SVM_NOISE, seed)
}

pub fn generate_svm_data_with_noise(
    n: usize,
    d: usize,
    k: f64,
    noise: f64,
    seed: u64,
) -> Result<SvmData> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be at least 1"));
    }
    if !(k > 0.0 && k.is_finite() && noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!(
            "need K > 0 and noise >= 0, got K={k}, noise={noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        h[0] = 1.0;
    } else {
        h.iter_mut().for_each(|v| *v /= norm);
    }
    let entry = Normal::new(0.0, k).expect("k is positive");
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut flips = 0usize;
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| entry.sample(&mut rng)).collect();
        let score: f64 = x.iter().zip(&h).map(|(a, b)| a * b).sum();
        let eps: f64 = rng.sample::<f64, _>(StandardNormal) * noise;
        let clean = if score >= 0.0 { 1.0 } else { -1.0 };
        let noisy = if score + eps >= 0.0 { 1.0 } else { -1.0 };
        if clean != noisy {
            flips += 1;
        }
        features.push(x);
        labels.push(noisy);
    }
    Ok(SvmData {
        features,
        labels,
        flip_rate: flips as f64 / n as f64,
    })
}

fn check_svm_input(x: &[Vec<f64>], y: &[f64], c_penalty: f64) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("SVM needs at least one example"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid(format!(
            "labels must be +1 or -1, found {bad}"
        )));
    }
    if !(c_penalty > 0.0 && c_penalty.is_finite()) {
        return Err(Error::invalid(format!(
            "penalty must be positive, got {c_penalty}"
        )));
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    Ok(d)
}

/// The L2 SVM objective over `(w, xi)` and its margin constraints
/// `y_j <w, x_j> + xi_j >= 1`.
pub fn svm_problem(
    x: &[Vec<f64>],
    y: &[f64],
    c_penalty: f64,
) -> Result<(QuadraticObjective, Vec<Hyperplane>)> {
    let d = check_svm_input(x, y, c_penalty)?;
    let n = x.len();
    let mut q = vec![1.0; d];
    q.resize(d + n, c_penalty);
    let f = QuadraticObjective::diagonal(q, vec![0.0; d + n], 0.0)?;
    let planes = x
        .iter()
        .zip(y)
        .enumerate()
        .map(|(j, (row, &label))| {
            let coeffs = SparseVec::from_pairs(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, -label * v))
                    .chain(std::iter::once((d + j, -1.0))),
            );
            Hyperplane::new(ConstraintId::new(vec![tag::MARGIN, j as u32]), coeffs, -1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((f, planes))
}

#[derive(Clone, Debug)]
pub struct SvmModel {
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    pub solution: Solution,
}

impl SvmModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        predict(&self.w, x)
    }
}

pub fn predict(w: &[f64], x: &[f64]) -> f64 {
    if w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Share of rows `w` classifies correctly.
pub fn accuracy(w: &[f64], x: &[Vec<f64>], y: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let hits = x.iter().zip(y).filter(|(r, &l)| predict(w, r) == l).count();
    hits as f64 / x.len() as f64
}

pub const DEFAULT_SVM_EPOCHS: usize = 10;

/// Truly stochastic active-set fit: each epoch projects onto every margin
/// constraint once in a seeded random order, keeping all duals.
pub fn svm_fit(
    x: &[Vec<f64>],
    y: &[f64],
    c_penalty: f64,
    epochs: usize,
    seed: u64,
) -> Result<SvmModel> {
    svm_fit_with_monitor(x, y, c_penalty, epochs, seed, &mut ())
}

pub fn svm_fit_with_monitor<M: Monitor + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    c_penalty: f64,
    epochs: usize,
    seed: u64,
    monitor: &mut M,
) -> Result<SvmModel> {
    let (f, planes) = svm_problem(x, y, c_penalty)?;
    let d = x[0].len();
    let n = planes.len();
    let mut oracle = RandomOraclePool::new(planes, n, seed)?;
    let solution = solver::run_with_monitor(
        &f,
        &mut oracle,
        &Schedule::TRULY_STOCHASTIC,
        &ConvergenceCriterion::budget(epochs),
        Vec::new(),
        monitor,
    )?;
    Ok(SvmModel {
        w: solution.x()[..d].to_vec(),
        xi: solution.x()[d..].to_vec(),
        solution,
    })
}

/// Exact solve by cyclic projections over every margin constraint.
pub fn svm_reference(
    x: &[Vec<f64>],
    y: &[f64],
    c_penalty: f64,
    max_sweeps: usize,
    tol: f64,
) -> Result<(Vec<f64>, ReferenceSolution)> {
    let (f, planes) = svm_problem(x, y, c_penalty)?;
    let d = x[0].len();
    let set = FullConstraintSet {
        constraints: planes,
    };
    let sol = cyclic_bregman_solve(&f, &set, max_sweeps, tol)?;
    Ok((sol.x[..d].to_vec(), sol))
}
