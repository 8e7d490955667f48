//! Weighted severity-proportion estimates and the sampling-efficiency
//! experiment comparing coreset and uniform annotation budgets.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coreset::{giga_path, solve_uniform, Atoms, CoresetResult};
use crate::error::EstimationError;
use crate::model::{EmbeddingVector, EstimatorKind, ProportionEstimate, SeverityLabel};

/// Normalised weighted label proportions over the support of `result`.
pub fn estimate_proportions(
    annotations: &BTreeMap<String, SeverityLabel>,
    result: &CoresetResult,
    id_map: &[String],
    estimator: EstimatorKind,
) -> Result<ProportionEstimate, EstimationError> {
    let mut mass = BTreeMap::new();
    let mut total = 0.0;
    for (&i, &w) in &result.weights {
        let id = id_map.get(i).ok_or(EstimationError::UnmappedIndex(i))?;
        let label = annotations
            .get(id)
            .ok_or_else(|| EstimationError::MissingAnnotation(id.clone()))?;
        *mass.entry(*label).or_insert(0.0) += w;
        total += w;
    }
    if !(total > 0.0) {
        return Err(EstimationError::ZeroWeight);
    }
    Ok(ProportionEstimate::from_masses(&mass, result.support.len(), estimator)?)
}

/// Same estimator over positionally indexed labels, in `SeverityLabel::ALL`
/// order. Used on the hot path of the bootstrap.
pub fn weighted_proportions(labels: &[SeverityLabel], result: &CoresetResult) -> Result<[f64; 4], EstimationError> {
    let mut mass = [0.0; 4];
    for (&i, &w) in &result.weights {
        let label = labels.get(i).ok_or(EstimationError::UnmappedIndex(i))?;
        mass[label.index()] += w;
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(EstimationError::ZeroWeight);
    }
    Ok(mass.map(|m| m / total))
}

/// Exact proportions of a label list.
pub fn label_proportions(labels: &[SeverityLabel]) -> [f64; 4] {
    let mut counts = [0usize; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    let n = labels.len() as f64;
    counts.map(|c| c as f64 / n)
}

/// Root mean squared error between two proportion vectors over the same
/// label set.
pub fn rmse(est: &ProportionEstimate, truth: &ProportionEstimate) -> Result<f64, EstimationError> {
    if !est.category_proportions.keys().eq(truth.category_proportions.keys()) {
        return Err(EstimationError::LabelMismatch);
    }
    let m = est.category_proportions.len();
    if m == 0 {
        return Err(EstimationError::LabelMismatch);
    }
    let sum: f64 = est
        .category_proportions
        .iter()
        .map(|(l, p)| (p - truth.category_proportions[l]).powi(2))
        .sum();
    Ok((sum / m as f64).sqrt())
}

fn rmse_arrays(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (sum / 4.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsePoint {
    pub k: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseCurve {
    pub estimator: EstimatorKind,
    pub points: Vec<RmsePoint>,
    pub bootstrap_iterations: usize,
    pub seed: u64,
}

impl RmseCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.rmse)
    }

    pub fn ks(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.k).collect()
    }
}

/// A pool of items with embeddings and gold labels, index-aligned.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    pub ids: Vec<String>,
    pub vectors: Vec<EmbeddingVector>,
    pub labels: Vec<SeverityLabel>,
}

impl LabeledPool {
    pub fn new(vectors: Vec<EmbeddingVector>, gold: &BTreeMap<String, SeverityLabel>) -> Result<Self, EstimationError> {
        let labels = vectors
            .iter()
            .map(|v| {
                gold.get(&v.interaction_id)
                    .copied()
                    .ok_or_else(|| EstimationError::Unlabeled(v.interaction_id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ids = vectors.iter().map(|v| v.interaction_id.clone()).collect();
        Ok(Self { ids, vectors, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn truth(&self) -> Result<ProportionEstimate, EstimationError> {
        Ok(ProportionEstimate::from_labels(&self.labels, EstimatorKind::Uniform)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Budgets evaluated for both estimators.
    pub ks: Vec<usize>,
    /// Extra budgets evaluated for the uniform estimator only, so the
    /// uniform curve can bracket coreset errors when computing equivalent
    /// sample sizes.
    #[serde(default)]
    pub uniform_extra_ks: Vec<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub subpool_fraction: f64,
    #[serde(default)]
    pub aggregate: Aggregate,
    /// Run iterations on the rayon pool. Results do not depend on it.
    #[serde(default)]
    pub parallel: bool,
}

impl BootstrapConfig {
    pub fn new(ks: Vec<usize>, iterations: usize, seed: u64) -> Self {
        Self {
            ks,
            uniform_extra_ks: Vec::new(),
            iterations,
            seed,
            subpool_fraction: 0.8,
            aggregate: Aggregate::Mean,
            parallel: false,
        }
    }

    pub fn subpool_size(&self, n: usize) -> usize {
        // Guard against 0.8 * 1000 landing a hair above 800.
        ((self.subpool_fraction * n as f64) - 1e-9).ceil().max(1.0) as usize
    }

    fn uniform_ks(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.ks.iter().chain(&self.uniform_extra_ks).copied().collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCurves {
    pub uniform: RmseCurve,
    pub coreset: RmseCurve,
    /// Proportions over the full pool.
    pub truth: ProportionEstimate,
}

struct IterationErrors {
    coreset: Vec<f64>,
    uniform: Vec<f64>,
}

/// Iteration seed: the run seed xor the iteration number.
pub fn iteration_seed(seed: u64, b: usize) -> u64 {
    seed ^ b as u64
}

/// Draws the without-replacement subpool for one iteration, ascending.
pub fn draw_subpool(n: usize, size: usize, iteration_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(iteration_seed);
    // Stream 1 keeps the subpool draw independent of the uniform sampler,
    // which uses stream 0 of the same seed.
    rng.set_stream(1);
    let mut rows = index::sample(&mut rng, n, size).into_vec();
    rows.sort_unstable();
    rows
}

/// Runs the coreset-vs-uniform comparison: each iteration resamples a
/// subpool, estimates label proportions with both samplers at every budget,
/// and scores them against the subpool's exact proportions.
pub fn bootstrap_compare(pool: &LabeledPool, cfg: &BootstrapConfig) -> Result<BootstrapCurves, EstimationError> {
    if cfg.iterations == 0 {
        return Err(EstimationError::Setup("bootstrap needs at least one iteration".into()));
    }
    if !(cfg.subpool_fraction > 0.0 && cfg.subpool_fraction <= 1.0) {
        return Err(EstimationError::Setup(format!("subpool fraction {} outside (0, 1]", cfg.subpool_fraction)));
    }
    if pool.vectors.len() != pool.labels.len() || pool.is_empty() {
        return Err(EstimationError::Setup("pool vectors and labels must be non-empty and aligned".into()));
    }
    let mut ks = cfg.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(EstimationError::Setup("no budgets requested".into()));
    }
    let uniform_ks = cfg.uniform_ks();
    let sub_n = cfg.subpool_size(pool.len());
    for &k in uniform_ks.iter() {
        if k == 0 || k > sub_n {
            return Err(EstimationError::BudgetTooLarge { k, n: sub_n });
        }
    }
    let truth = pool.truth()?;

    let run = |b: usize| -> Result<IterationErrors, EstimationError> {
        let s = iteration_seed(cfg.seed, b);
        let rows = draw_subpool(pool.len(), sub_n, s);
        let labels: Vec<SeverityLabel> = rows.iter().map(|&r| pool.labels[r]).collect();
        let sub_truth = label_proportions(&labels);
        let atoms = Atoms::from_rows(&pool.vectors, &rows)?;
        let coreset = giga_path(&atoms, &ks)?
            .iter()
            .map(|r| Ok(rmse_arrays(&weighted_proportions(&labels, r)?, &sub_truth)))
            .collect::<Result<Vec<_>, EstimationError>>()?;
        let uniform = uniform_ks
            .iter()
            .map(|&k| {
                let r = solve_uniform(sub_n, k, s)?;
                Ok(rmse_arrays(&weighted_proportions(&labels, &r)?, &sub_truth))
            })
            .collect::<Result<Vec<_>, EstimationError>>()?;
        Ok(IterationErrors { coreset, uniform })
    };

    let per_iter: Vec<IterationErrors> = if cfg.parallel {
        (0..cfg.iterations).into_par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        (0..cfg.iterations).map(run).collect::<Result<_, _>>()?
    };

    let aggregate = |pick: &dyn Fn(&IterationErrors) -> f64| -> f64 {
        match cfg.aggregate {
            Aggregate::Mean => {
                // Fixed iteration order keeps the sum bitwise reproducible.
                per_iter.iter().map(pick).sum::<f64>() / per_iter.len() as f64
            }
            Aggregate::Median => {
                let mut v: Vec<f64> = per_iter.iter().map(pick).collect();
                v.sort_by(f64::total_cmp);
                let m = v.len();
                if m % 2 == 1 {
                    v[m / 2]
                } else {
                    0.5 * (v[m / 2 - 1] + v[m / 2])
                }
            }
        }
    };

    let curve = |estimator, ks: &[usize], col: &dyn Fn(&IterationErrors, usize) -> f64| RmseCurve {
        estimator,
        points: ks
            .iter()
            .enumerate()
            .map(|(j, &k)| RmsePoint { k, rmse: aggregate(&|it| col(it, j)) })
            .collect(),
        bootstrap_iterations: cfg.iterations,
        seed: cfg.seed,
    };

    Ok(BootstrapCurves {
        coreset: curve(EstimatorKind::Coreset, &ks, &|it, j| it.coreset[j]),
        uniform: curve(EstimatorKind::Uniform, &uniform_ks, &|it, j| it.uniform[j]),
        truth,
    })
}

/// One row of the equivalent-sample-size table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub coreset_k: usize,
    pub unif_k: usize,
    /// `(unif_k - coreset_k) / unif_k`.
    pub reduction: f64,
}

/// Smallest uniform budget reaching the coreset error at `k`, interpolating
/// linearly between measured uniform points and rounding up.
pub fn equivalent_uniform_size(
    coreset_curve: &RmseCurve,
    uniform_curve: &RmseCurve,
    k: usize,
) -> Result<Equivalence, EstimationError> {
    let target = coreset_curve.at(k).ok_or(EstimationError::UnknownBudget(k))?;
    let pts = &uniform_curve.points;
    let idx = pts
        .iter()
        .position(|p| p.rmse <= target)
        .ok_or(EstimationError::NotReachable(target))?;
    let unif_k = if idx == 0 {
        pts[0].k
    } else {
        let (lo, hi) = (pts[idx - 1], pts[idx]);
        let frac = (lo.rmse - target) / (lo.rmse - hi.rmse);
        let x = lo.k as f64 + frac * (hi.k - lo.k) as f64;
        // Absorb interpolation round-off before rounding up.
        (x - 1e-9).ceil() as usize
    };
    Ok(Equivalence {
        coreset_k: k,
        unif_k,
        reduction: (unif_k as f64 - k as f64) / unif_k as f64,
    })
}

/// Equivalences for every budget of the coreset curve; unreachable budgets
/// are skipped.
pub fn reduction_table(coreset_curve: &RmseCurve, uniform_curve: &RmseCurve) -> Vec<Equivalence> {
    coreset_curve
        .points
        .iter()
        .filter_map(|p| equivalent_uniform_size(coreset_curve, uniform_curve, p.k).ok())
        .collect()
}

/// Writes `coreset_k,unif_k,reduction_pct` rows.
pub fn write_reductions_csv<W: Write>(rows: &[Equivalence], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["coreset_k", "unif_k", "reduction_pct"])?;
    for r in rows {
        out.write_record([
            r.coreset_k.to_string(),
            r.unif_k.to_string(),
            format!("{:.2}", 100.0 * r.reduction),
        ])?;
    }
    out.flush()?;
    Ok(())
}
