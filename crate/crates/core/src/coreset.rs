//! Sparse nonnegative weighting of an interaction pool so that the weighted
//! embedding sum matches the full-pool sum:
//!
//! ```text
//! minimize_{w >= 0}  || sum_i w_i phi_i - sum_i phi_i ||^2   subject to  |supp(w)| <= k
//! ```
//!
//! [`solve_giga`] is the production solver (greedy iterative geodesic ascent),
//! [`solve_uniform`] the random baseline and [`solve_oracle`] an exhaustive
//! reference for tiny instances.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoresetError;
use crate::model::{check_vector_pool, EmbeddingVector};

/// Squared-norm threshold under which an atom counts as zero.
const ZERO_NORM: f64 = 1e-300;

/// Row-major `n x d` matrix of embedding atoms in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Atoms {
    pub fn from_vectors(vectors: &[EmbeddingVector]) -> Result<Self, CoresetError> {
        let d = check_vector_pool(vectors)?;
        let data = vectors
            .iter()
            .flat_map(|v| v.values.iter().map(|&x| x as f64))
            .collect();
        Ok(Self { n: vectors.len(), d, data })
    }

    /// Selects the given rows of `vectors`, in order.
    pub fn from_rows(vectors: &[EmbeddingVector], rows: &[usize]) -> Result<Self, CoresetError> {
        let d = check_vector_pool(vectors)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let v = vectors
                .get(r)
                .ok_or(CoresetError::IndexOutOfRange { index: r, n: vectors.len() })?;
            data.extend(v.values.iter().map(|&x| x as f64));
        }
        Ok(Self { n: rows.len(), d, data })
    }

    pub fn from_rows_f64(rows: &[Vec<f64>]) -> Result<Self, CoresetError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(CoresetError::TooLarge("ragged rows".into()));
        }
        Ok(Self {
            n: rows.len(),
            d,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn total(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.d];
        for i in 0..self.n {
            axpy(1.0, self.row(i), &mut sum);
        }
        sum
    }

    pub fn weighted_sum(&self, weights: &BTreeMap<usize, f64>) -> Vec<f64> {
        let mut sum = vec![0.0; self.d];
        for (&i, &w) in weights {
            axpy(w, self.row(i), &mut sum);
        }
        sum
    }

    /// `|| sum_i w_i phi_i - sum_i phi_i ||^2`.
    pub fn discrepancy(&self, weights: &BTreeMap<usize, f64>) -> Result<f64, CoresetError> {
        for (&index, &weight) in weights {
            if index >= self.n {
                return Err(CoresetError::IndexOutOfRange { index, n: self.n });
            }
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(CoresetError::BadWeight { index, weight });
            }
        }
        let target = self.total();
        let approx = self.weighted_sum(weights);
        Ok(sq_dist(&approx, &target))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared discrepancy between the weighted and the full embedding sum.
pub fn discrepancy(vectors: &[EmbeddingVector], weights: &BTreeMap<usize, f64>) -> Result<f64, CoresetError> {
    Atoms::from_vectors(vectors)?.discrepancy(weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Giga,
    Uniform,
    Oracle,
}

/// Sparse nonnegative weights over a pool of `pool_size` items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetResult {
    pub weights: BTreeMap<usize, f64>,
    pub support: Vec<usize>,
    pub k: usize,
    pub pool_size: usize,
    /// Squared discrepancy at `weights`; `None` when the solver never saw
    /// the vectors (uniform sampling by size only).
    pub objective: Option<f64>,
}

impl CoresetResult {
    /// Builds a result from `(index, weight)` pairs; non-positive weights
    /// are dropped.
    pub fn from_weights(
        weights: impl IntoIterator<Item = (usize, f64)>,
        k: usize,
        pool_size: usize,
        objective: Option<f64>,
    ) -> Self {
        let weights: BTreeMap<usize, f64> = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        let support = weights.keys().copied().collect();
        Self {
            weights,
            support,
            k,
            pool_size,
            objective,
        }
    }

    /// Fills in the objective from the pool the result was computed on.
    pub fn evaluate(mut self, atoms: &Atoms) -> Result<Self, CoresetError> {
        self.objective = Some(atoms.discrepancy(&self.weights)?);
        Ok(self)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Checks the structural invariants (positivity, bounds, sortedness).
    pub fn check(&self) -> Result<(), String> {
        if self.support.len() > self.k {
            return Err(format!("support of {} exceeds budget {}", self.support.len(), self.k));
        }
        if !self.support.windows(2).all(|w| w[0] < w[1]) {
            return Err("support not strictly ascending".into());
        }
        if !self.support.iter().copied().eq(self.weights.keys().copied()) {
            return Err("support and weight keys differ".into());
        }
        for (&i, &w) in &self.weights {
            if i >= self.pool_size {
                return Err(format!("index {i} outside pool of {}", self.pool_size));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(format!("weight {w} at {i} not strictly positive"));
            }
        }
        Ok(())
    }
}

fn check_budget(k: usize, n: usize) -> Result<(), CoresetError> {
    if k == 0 || k > n {
        return Err(CoresetError::BudgetOutOfRange { k, n });
    }
    Ok(())
}

/// Greedy iterative geodesic ascent with budget `k`.
pub fn solve_giga(vectors: &[EmbeddingVector], k: usize) -> Result<CoresetResult, CoresetError> {
    let atoms = Atoms::from_vectors(vectors)?;
    Ok(giga_path(&atoms, &[k])?.pop().expect("one budget requested"))
}

/// Runs GIGA once up to the largest budget and snapshots the solution after
/// each requested number of iterations. Results come back in the order of
/// `ks`.
///
/// Every iteration selects a not yet selected atom by the geodesic alignment
/// rule and takes the closed-form geodesic step, then re-fits the weights of all atoms
/// selected so far by nonnegative least squares. Snapshots are fitted to
/// convergence, so the objective never increases with the budget and the
/// full budget reproduces the target whenever the pool is linearly
/// independent.
pub fn giga_path(atoms: &Atoms, ks: &[usize]) -> Result<Vec<CoresetResult>, CoresetError> {
    let n = atoms.len();
    for &k in ks {
        check_budget(k, n)?;
    }
    let d = atoms.dim();
    let norms: Vec<f64> = (0..n).map(|i| dot(atoms.row(i), atoms.row(i)).sqrt()).collect();
    let candidates: Vec<usize> = (0..n).filter(|&i| norms[i] * norms[i] > ZERO_NORM).collect();
    if candidates.is_empty() {
        return Err(CoresetError::AllZero);
    }
    let target = atoms.total();
    let target_norm = dot(&target, &target).sqrt();

    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by_key(|&i| ks[i]);
    let mut out: Vec<Option<CoresetResult>> = vec![None; ks.len()];

    if target_norm * target_norm <= ZERO_NORM {
        // The empty weighting already reproduces a zero target.
        for &i in &order {
            out[i] = Some(CoresetResult::from_weights([], ks[i], n, Some(0.0)));
        }
        return Ok(out.into_iter().map(Option::unwrap).collect());
    }

    let unit_target: Vec<f64> = target.iter().map(|x| x / target_norm).collect();
    let mut unit = vec![0.0; n * d];
    for &i in &candidates {
        for (u, x) in unit[i * d..(i + 1) * d].iter_mut().zip(atoms.row(i)) {
            *u = x / norms[i];
        }
    }
    let unit_row = |i: usize| &unit[i * d..(i + 1) * d];
    let align: Vec<f64> = (0..n).map(|i| dot(unit_row(i), &unit_target)).collect();

    let mut fit = Refit::new(atoms, &norms, &target);
    let snapshot = |fit: &Refit, k: usize| -> CoresetResult {
        let mut polished = fit.clone();
        polished.sweep(SNAPSHOT_SWEEPS);
        let weights: BTreeMap<usize, f64> = polished.weights().collect();
        let objective = atoms.discrepancy(&weights).expect("weights are in range and positive");
        CoresetResult::from_weights(weights, k, n, Some(objective))
    };

    // Current point on the sphere and the GIGA weights that produce it.
    let mut current = vec![0.0; d];
    let mut w = vec![0.0; n];
    let mut next_snapshot = 0;
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let mut steps_done = 0;
    // The refit already optimizes every selected weight, so only fresh atoms
    // are worth a step.
    let mut open = candidates.clone();

    while steps_done < k_max {
        let progressed = if steps_done == 0 {
            let best = argmax(candidates.iter().map(|&i| (i, align[i])));
            let i = best.expect("non-empty candidate set");
            current.copy_from_slice(unit_row(i));
            w[i] = 1.0;
            true
        } else {
            giga_step(&open, &align, &unit_target, &unit_row, &mut current, &mut w)
                || {
                    // A loosely fitted iterate can hide a useful atom; fit to
                    // convergence before giving up.
                    fit.sweep(SNAPSHOT_SWEEPS);
                    fit.sphere_point(&mut current, &mut w)
                        && giga_step(&open, &align, &unit_target, &unit_row, &mut current, &mut w)
                }
        };
        if !progressed {
            break;
        }
        fit.load_sphere_weights(&w);
        fit.sweep(STEP_SWEEPS);
        open.retain(|&i| !fit.is_selected[i]);
        if !fit.sphere_point(&mut current, &mut w) {
            break;
        }
        steps_done += 1;
        while next_snapshot < order.len() && ks[order[next_snapshot]] == steps_done {
            out[order[next_snapshot]] = Some(snapshot(&fit, steps_done));
            next_snapshot += 1;
        }
    }
    // Converged early: larger budgets share the final iterate.
    if next_snapshot < order.len() {
        let last = snapshot(&fit, 0);
        for &i in &order[next_snapshot..] {
            out[i] = Some(CoresetResult { k: ks[i], ..last.clone() });
        }
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

const STEP_SWEEPS: usize = 10;
const SNAPSHOT_SWEEPS: usize = 100_000;

/// Nonnegative least-squares state over the atoms selected so far, solved by
/// cyclic coordinate descent on an explicitly maintained residual.
#[derive(Clone)]
struct Refit<'a> {
    atoms: &'a Atoms,
    norms: &'a [f64],
    target: &'a [f64],
    target_norm: f64,
    selected: Vec<usize>,
    is_selected: Vec<bool>,
    raw: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> Refit<'a> {
    fn new(atoms: &'a Atoms, norms: &'a [f64], target: &'a [f64]) -> Self {
        Self {
            atoms,
            norms,
            target,
            target_norm: dot(target, target).sqrt(),
            selected: Vec::new(),
            is_selected: vec![false; atoms.len()],
            raw: vec![0.0; atoms.len()],
            residual: target.to_vec(),
        }
    }

    /// Replaces the raw weights by the GIGA sphere weights, mapped back to
    /// the original scale and optimally rescaled.
    fn load_sphere_weights(&mut self, w: &[f64]) {
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 && !self.is_selected[i] {
                self.is_selected[i] = true;
                self.selected.push(i);
            }
        }
        let mut approx = vec![0.0; self.target.len()];
        for &i in &self.selected {
            self.raw[i] = w[i] / self.norms[i];
            axpy(self.raw[i], self.atoms.row(i), &mut approx);
        }
        let ss = dot(&approx, &approx);
        let scale = if ss > 0.0 { (dot(self.target, &approx) / ss).max(0.0) } else { 0.0 };
        for &i in &self.selected {
            self.raw[i] *= scale;
        }
        for ((r, t), a) in self.residual.iter_mut().zip(self.target).zip(&approx) {
            *r = t - scale * a;
        }
    }

    fn sweep(&mut self, max_sweeps: usize) {
        let tol = 1e-13 * self.target_norm;
        for _ in 0..max_sweeps {
            let mut max_change: f64 = 0.0;
            for &i in &self.selected {
                let row = self.atoms.row(i);
                let updated = (self.raw[i] + dot(row, &self.residual) / (self.norms[i] * self.norms[i])).max(0.0);
                let delta = updated - self.raw[i];
                if delta != 0.0 {
                    axpy(-delta, row, &mut self.residual);
                    self.raw[i] = updated;
                    max_change = max_change.max(delta.abs() * self.norms[i]);
                }
            }
            if max_change <= tol {
                break;
            }
        }
    }

    /// Writes the normalized approximation and matching sphere weights.
    /// Returns false when every weight has collapsed to zero.
    fn sphere_point(&self, current: &mut [f64], w: &mut [f64]) -> bool {
        let approx: Vec<f64> = self.target.iter().zip(&self.residual).map(|(t, r)| t - r).collect();
        let norm = dot(&approx, &approx).sqrt();
        if !(norm > 0.0) {
            return false;
        }
        for (c, a) in current.iter_mut().zip(&approx) {
            *c = a / norm;
        }
        for &i in &self.selected {
            w[i] = self.raw[i] * self.norms[i] / norm;
        }
        true
    }

    fn weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let mut picked: Vec<usize> = self.selected.iter().copied().filter(|&i| self.raw[i] > 0.0).collect();
        picked.sort_unstable();
        picked.into_iter().map(|i| (i, self.raw[i]))
    }
}


/// Highest score wins; ties go to the lowest index because candidates are
/// visited in ascending order and only a strictly greater score replaces.
fn argmax(scores: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// One geodesic ascent step. Returns false once no atom can increase the
/// alignment with the target.
fn giga_step<'a>(
    candidates: &[usize],
    align: &[f64],
    unit_target: &[f64],
    unit_row: &impl Fn(usize) -> &'a [f64],
    current: &mut [f64],
    w: &mut [f64],
) -> bool {
    let zeta1 = dot(unit_target, current);
    if 1.0 - zeta1 <= 1e-15 {
        return false;
    }
    let mut proximity = vec![0.0; w.len()];
    let scores = candidates.iter().map(|&i| {
        let b = dot(unit_row(i), current);
        proximity[i] = b;
        let perp = 1.0 - b * b;
        if perp <= 1e-14 {
            return (i, f64::NAN);
        }
        // <geodesic direction to target, geodesic direction to atom i>,
        // up to the common factor 1/sqrt(1 - zeta1^2).
        (i, (align[i] - zeta1 * b) / perp.sqrt())
    });
    let best = argmax(scores.collect::<Vec<_>>().into_iter());
    let Some(i) = best else { return false };

    let zeta0 = align[i];
    let zeta2 = proximity[i];
    let num = zeta0 - zeta1 * zeta2;
    let den = num + (zeta1 - zeta0 * zeta2);
    if !(num > 0.0) || !(den > 0.0) {
        return false;
    }
    let gamma = (num / den).clamp(0.0, 1.0);
    let atom = unit_row(i);
    for (c, a) in current.iter_mut().zip(atom) {
        *c = (1.0 - gamma) * *c + gamma * a;
    }
    let norm = dot(current, current).sqrt();
    if !(norm > 0.0) {
        return false;
    }
    current.iter_mut().for_each(|c| *c /= norm);
    for wi in w.iter_mut() {
        *wi *= (1.0 - gamma) / norm;
    }
    w[i] += gamma / norm;
    true
}

/// Uniform without-replacement sample of exactly `k` of `pool_size` items,
/// each weighted `pool_size / k`.
pub fn solve_uniform(pool_size: usize, k: usize, seed: u64) -> Result<CoresetResult, CoresetError> {
    check_budget(k, pool_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, pool_size, k).into_vec();
    picked.sort_unstable();
    let weight = pool_size as f64 / k as f64;
    Ok(CoresetResult::from_weights(
        picked.into_iter().map(|i| (i, weight)),
        k,
        pool_size,
        None,
    ))
}

pub const ORACLE_MAX_POOL: usize = 12;
pub const ORACLE_MAX_BUDGET: usize = 4;
pub const ORACLE_MAX_DIM: usize = 4;

/// Exhaustive search over every support of size at most `k`, each solved by
/// nonnegative least squares. Ties keep the first support in (size,
/// lexicographic) order.
pub fn solve_oracle(vectors: &[EmbeddingVector], k: usize) -> Result<CoresetResult, CoresetError> {
    let atoms = Atoms::from_vectors(vectors)?;
    solve_oracle_atoms(&atoms, k)
}

pub fn solve_oracle_atoms(atoms: &Atoms, k: usize) -> Result<CoresetResult, CoresetError> {
    let n = atoms.len();
    if n > ORACLE_MAX_POOL || k > ORACLE_MAX_BUDGET || atoms.dim() > ORACLE_MAX_DIM {
        return Err(CoresetError::TooLarge(format!(
            "N={n}, k={k}, d={} (limits {ORACLE_MAX_POOL}, {ORACLE_MAX_BUDGET}, {ORACLE_MAX_DIM})",
            atoms.dim()
        )));
    }
    check_budget(k, n)?;
    let target = atoms.total();
    let tol = 1e-12 * dot(&target, &target).max(1.0);

    let mut best: Option<(f64, BTreeMap<usize, f64>)> = None;
    for size in 0..=k {
        for subset in Combinations::new(n, size) {
            let w = nnls_coordinate_descent(atoms, &subset, &target);
            let weights: BTreeMap<usize, f64> =
                subset.iter().copied().zip(w).filter(|&(_, wi)| wi > 0.0).collect();
            let obj = sq_dist(&atoms.weighted_sum(&weights), &target);
            if best.as_ref().is_none_or(|(b, _)| obj < b - tol) {
                best = Some((obj, weights));
            }
        }
    }
    let (obj, weights) = best.expect("empty support is always enumerated");
    Ok(CoresetResult::from_weights(weights, k, n, Some(obj)))
}

/// Projected coordinate descent for `min_{w >= 0} || A_S^T w - target ||^2`.
fn nnls_coordinate_descent(atoms: &Atoms, subset: &[usize], target: &[f64]) -> Vec<f64> {
    let m = subset.len();
    let gram: Vec<f64> = subset
        .iter()
        .flat_map(|&i| subset.iter().map(move |&j| (i, j)))
        .map(|(i, j)| dot(atoms.row(i), atoms.row(j)))
        .collect();
    let rhs: Vec<f64> = subset.iter().map(|&i| dot(atoms.row(i), target)).collect();
    let mut w = vec![0.0; m];
    for _ in 0..1_000_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..m {
            let gjj = gram[j * m + j];
            if gjj <= ZERO_NORM {
                continue;
            }
            let grad: f64 = (0..m).map(|l| gram[j * m + l] * w[l]).sum::<f64>() - rhs[j];
            let updated = (w[j] - grad / gjj).max(0.0);
            max_change = max_change.max((updated - w[j]).abs() * gjj.sqrt());
            w[j] = updated;
        }
        if max_change <= 1e-10 {
            break;
        }
    }
    w
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut c = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if c[i] < self.n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                self.current = Some(c);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(rows: &[&[f32]]) -> Vec<EmbeddingVector> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| EmbeddingVector::new(format!("i{i}"), r.to_vec()))
            .collect()
    }

    #[test]
    fn discrepancy_examples() {
        let p = pool(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let all: BTreeMap<usize, f64> = [(0, 1.0), (1, 1.0)].into();
        assert_eq!(discrepancy(&p, &all).unwrap(), 0.0);
        assert_eq!(discrepancy(&p, &[(0, 1.0)].into()).unwrap(), 1.0);
        assert_eq!(discrepancy(&pool(&[&[3.0, 4.0]]), &BTreeMap::new()).unwrap(), 25.0);
    }

    #[test]
    fn discrepancy_rejects_bad_weights() {
        let p = pool(&[&[1.0, 0.0]]);
        assert!(matches!(
            discrepancy(&p, &[(3, 1.0)].into()),
            Err(CoresetError::IndexOutOfRange { index: 3, n: 1 })
        ));
        assert!(matches!(discrepancy(&p, &[(0, -0.5)].into()), Err(CoresetError::BadWeight { .. })));
    }

    #[test]
    fn giga_single_atom() {
        let r = solve_giga(&pool(&[&[2.0, 0.0]]), 1).unwrap();
        assert_eq!(r.support, vec![0]);
        assert!((r.weights[&0] - 1.0).abs() < 1e-12);
        assert!(r.objective.unwrap() < 1e-20);
    }

    #[test]
    fn giga_collinear_target() {
        let r = solve_giga(&pool(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]), 1).unwrap();
        assert_eq!(r.support, vec![2]);
        assert!((r.weights[&2] - 2.0).abs() < 1e-12);
        assert!(r.objective.unwrap() < 1e-20);
    }

    #[test]
    fn giga_spans_two_directions() {
        let r = solve_giga(&pool(&[&[1.0, 0.0], &[0.0, 1.0]]), 2).unwrap();
        assert_eq!(r.support, vec![0, 1]);
        assert!(r.objective.unwrap() < 1e-20);
    }

    #[test]
    fn giga_budget_and_zero_errors() {
        let p = pool(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(solve_giga(&p, 0), Err(CoresetError::BudgetOutOfRange { .. })));
        assert!(matches!(solve_giga(&p, 3), Err(CoresetError::BudgetOutOfRange { .. })));
        assert!(matches!(solve_giga(&pool(&[&[0.0, 0.0], &[0.0, 0.0]]), 1), Err(CoresetError::AllZero)));
    }

    #[test]
    fn giga_zero_norm_atoms_are_never_selected() {
        let p = pool(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0]]);
        let r = solve_giga(&p, 3).unwrap();
        assert_eq!(r.support, vec![1]);
        assert!(r.objective.unwrap() < 1e-20);
    }

    #[test]
    fn giga_zero_target_returns_empty_weighting() {
        let r = solve_giga(&pool(&[&[1.0, 0.0], &[-1.0, 0.0]]), 1).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.objective, Some(0.0));
    }

    #[test]
    fn uniform_examples() {
        let r = solve_uniform(5, 5, 99).unwrap();
        assert_eq!(r.support, vec![0, 1, 2, 3, 4]);
        assert!(r.weights.values().all(|&w| w == 1.0));
        let atoms = Atoms::from_vectors(&pool(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0]])).unwrap();
        assert_eq!(r.evaluate(&atoms).unwrap().objective, Some(0.0));

        let a = solve_uniform(100, 10, 1).unwrap();
        assert_eq!(a, solve_uniform(100, 10, 1).unwrap());
        assert_eq!(a.support.len(), 10);
        assert!(a.weights.values().all(|&w| w == 10.0));
        a.check().unwrap();
    }

    #[test]
    fn uniform_seeds_differ() {
        let differing = (0..100u64)
            .filter(|&s| {
                solve_uniform(100, 10, 2 * s).unwrap().support
                    != solve_uniform(100, 10, 2 * s + 1).unwrap().support
            })
            .count();
        assert!(differing >= 99, "{differing}");
    }

    #[test]
    fn oracle_examples() {
        let r = solve_oracle(&pool(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]), 1).unwrap();
        assert_eq!(r.support, vec![2]);
        assert!(r.objective.unwrap() < 1e-18);

        let r = solve_oracle(&pool(&[&[1.0, 0.0], &[0.0, 1.0]]), 1).unwrap();
        assert_eq!(r.support, vec![0]);
        assert!((r.objective.unwrap() - 1.0).abs() < 1e-12);

        let p = pool(&[&[1.0, 2.0], &[-1.0, 0.5], &[0.3, -2.0]]);
        assert!(solve_oracle(&p, 3).unwrap().objective.unwrap() < 1e-16);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let one: &[f32] = &[1.0];
        let big = pool(&[one; 13]);
        assert!(matches!(solve_oracle(&big, 2), Err(CoresetError::TooLarge(_))));
        let wide = pool(&[&[1.0, 1.0, 1.0, 1.0, 1.0]]);
        assert!(matches!(solve_oracle(&wide, 1), Err(CoresetError::TooLarge(_))));
    }

    #[test]
    fn combinations_enumerate_binomially() {
        assert_eq!(Combinations::new(5, 0).count(), 1);
        assert_eq!(Combinations::new(5, 2).count(), 10);
        assert_eq!(Combinations::new(12, 4).count(), 495);
        assert_eq!(Combinations::new(3, 4).count(), 0);
        let first: Vec<_> = Combinations::new(4, 2).take(3).collect();
        assert_eq!(first, vec![vec![0, 1], vec![0, 2], vec![0, 3]]);
    }

    #[test]
    fn path_snapshots_match_individual_solves() {
        let p = pool(&[&[1.0, 0.2, 0.0], &[0.1, 1.0, 0.3], &[0.0, 0.4, 1.0], &[0.5, 0.5, 0.5], &[0.9, 0.0, 0.1]]);
        let atoms = Atoms::from_vectors(&p).unwrap();
        let path = giga_path(&atoms, &[3, 1, 5]).unwrap();
        for (r, k) in path.iter().zip([3, 1, 5]) {
            assert_eq!(r, &solve_giga(&p, k).unwrap());
            assert_eq!(r.k, k);
            r.check().unwrap();
        }
    }
}
