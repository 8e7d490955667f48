//! Synthetic interaction pools: Gaussian-mixture embeddings with
//! cluster-correlated severity labels, matching text for the feature-hash
//! embedder, and gold annotation records consistent with the default tree.
//!
//! Within a cluster the label is driven by a latent score that is partly a
//! linear function of the item's embedding offset and partly noise, so the
//! label is predictable from the embedding to a tunable degree.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::model::{AgentRoute, EmbeddingVector, EstimatorKind, Interaction, ProportionEstimate, SeverityLabel};
use crate::severity::{AnnotationRecord, DecisionTree};

/// Label distributions assigned to clusters in turn, in
/// `[Sev0, Sev1, Sev2, NoError]` order.
pub const DEFAULT_LABEL_TABLE: [[f64; 4]; 8] = [
    [0.02, 0.03, 0.05, 0.90],
    [0.10, 0.05, 0.15, 0.70],
    [0.04, 0.30, 0.16, 0.50],
    [0.20, 0.05, 0.10, 0.65],
    [0.01, 0.10, 0.39, 0.50],
    [0.06, 0.44, 0.20, 0.30],
    [0.03, 0.02, 0.05, 0.90],
    [0.15, 0.15, 0.30, 0.40],
];

const TOPICS: [&[&str]; 8] = [
    &["segment", "audience", "qualification", "membership", "evaluation", "streaming", "batch", "rule"],
    &["schema", "field", "xdm", "mixin", "class", "identity", "descriptor", "union"],
    &["dataset", "ingestion", "batch", "upload", "csv", "parquet", "failure", "retry"],
    &["destination", "activation", "export", "connector", "mapping", "cadence", "sftp", "s3"],
    &["profile", "merge", "policy", "namespace", "graph", "stitching", "email", "ecid"],
    &["journey", "event", "trigger", "condition", "wait", "action", "message", "throttle"],
    &["query", "sql", "table", "join", "attribute", "count", "date", "filter"],
    &["governance", "label", "consent", "privacy", "policy", "usage", "contract", "access"],
];

const FILLER: [&str; 12] = ["how", "do", "i", "the", "a", "my", "to", "in", "for", "with", "what", "is"];
const ANSWER_FILLER: [&str; 8] = ["you", "can", "use", "the", "then", "select", "open", "configure"];
const REFUSAL: &str = "sorry i cannot help with that request please try asking differently";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Norm of each cluster mean.
    pub separation: f64,
    /// Per-coordinate standard deviation around the cluster mean.
    pub spread: f64,
    /// Cluster mixing weights; defaults to `1 / (c + 1)^0.5`, normalised.
    #[serde(default)]
    pub mixing: Option<Vec<f64>>,
    /// Per-cluster label distributions; defaults to [`DEFAULT_LABEL_TABLE`]
    /// cycled over clusters.
    #[serde(default)]
    pub label_distributions: Option<Vec<[f64; 4]>>,
    /// Correlation in [0, 1] between the within-cluster latent severity
    /// score and the embedding offset.
    pub label_signal: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 64,
            clusters: 8,
            separation: 4.0,
            spread: 1.0,
            mixing: None,
            label_distributions: None,
            label_signal: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPool {
    pub interactions: Vec<Interaction>,
    pub vectors: Vec<EmbeddingVector>,
    pub labels: Vec<SeverityLabel>,
    pub clusters: Vec<usize>,
    pub gold: Vec<AnnotationRecord>,
}

impl SynthPool {
    pub fn truth(&self) -> ProportionEstimate {
        ProportionEstimate::from_labels(&self.labels, EstimatorKind::Uniform).expect("synthetic pools are non-empty")
    }

    pub fn label_map(&self) -> BTreeMap<String, SeverityLabel> {
        self.interactions.iter().map(|i| i.id.clone()).zip(self.labels.iter().copied()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth configuration: {0}")]
    Config(String),
}

fn normalised(w: &[f64]) -> Result<Vec<f64>, SynthError> {
    let total: f64 = w.iter().sum();
    if w.iter().any(|x| !(*x >= 0.0)) || !(total > 0.0) {
        return Err(SynthError::Config(format!("weights {w:?} must be nonnegative with positive sum")));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

fn pick(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn topic_word(cluster: usize, j: usize) -> String {
    match TOPICS.get(cluster) {
        Some(words) => words[j % words.len()].to_string(),
        None => format!("topic{cluster}w{j}"),
    }
}

/// Generates a pool. Deterministic given the configuration.
pub fn generate(cfg: &SynthConfig) -> Result<SynthPool, SynthError> {
    if cfg.n == 0 || cfg.dim == 0 || cfg.clusters == 0 {
        return Err(SynthError::Config("n, dim and clusters must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.label_signal) {
        return Err(SynthError::Config("label_signal must lie in [0, 1]".into()));
    }
    let mixing = match &cfg.mixing {
        Some(m) if m.len() != cfg.clusters => {
            return Err(SynthError::Config(format!("{} mixing weights for {} clusters", m.len(), cfg.clusters)))
        }
        Some(m) => normalised(m)?,
        None => normalised(&(0..cfg.clusters).map(|c| 1.0 / ((c + 1) as f64).sqrt()).collect::<Vec<_>>())?,
    };
    let label_dists: Vec<Vec<f64>> = match &cfg.label_distributions {
        Some(d) if d.len() != cfg.clusters => {
            return Err(SynthError::Config(format!("{} label distributions for {} clusters", d.len(), cfg.clusters)))
        }
        Some(d) => d.iter().map(|p| normalised(p)).collect::<Result<_, _>>()?,
        None => (0..cfg.clusters)
            .map(|c| normalised(&DEFAULT_LABEL_TABLE[c % DEFAULT_LABEL_TABLE.len()]))
            .collect::<Result<_, _>>()?,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let means: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| {
            let g = gaussian_vec(&mut rng, cfg.dim);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            g.iter().map(|x| x * cfg.separation / norm).collect()
        })
        .collect();
    let directions: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| {
            let g = gaussian_vec(&mut rng, cfg.dim);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            g.iter().map(|x| x / norm).collect()
        })
        .collect();

    // Latent order from benign to severe; cut points follow each cluster's
    // label distribution under a standard normal latent.
    let order = [SeverityLabel::NoError, SeverityLabel::Sev2, SeverityLabel::Sev1, SeverityLabel::Sev0];
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let cuts: Vec<Vec<f64>> = label_dists
        .iter()
        .map(|p| {
            let mut acc = 0.0;
            order[..3]
                .iter()
                .map(|l| {
                    acc += p[l.index()];
                    std_normal.inverse_cdf(acc.clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();

    let tree = DecisionTree::default_tree();
    let base: DateTime<Utc> = Utc.with_ymd_and_hms(2024, 7, 1, 0, 0, 0).unwrap();
    let signal = cfg.label_signal;
    let noise = (1.0 - signal * signal).sqrt();

    let mut pool = SynthPool {
        interactions: Vec::with_capacity(cfg.n),
        vectors: Vec::with_capacity(cfg.n),
        labels: Vec::with_capacity(cfg.n),
        clusters: Vec::with_capacity(cfg.n),
        gold: Vec::with_capacity(cfg.n),
    };
    let width = cfg.n.to_string().len();
    for i in 0..cfg.n {
        let c = pick(&mut rng, &mixing);
        let z = gaussian_vec(&mut rng, cfg.dim);
        let projection: f64 = z.iter().zip(&directions[c]).map(|(a, b)| a * b).sum();
        let eps: f64 = StandardNormal.sample(&mut rng);
        let latent = signal * projection + noise * eps;
        let label = order[cuts[c].iter().take_while(|&&t| latent > t).count()];

        let values: Vec<f32> = means[c].iter().zip(&z).map(|(m, zi)| (m + cfg.spread * zi) as f32).collect();
        let id = format!("syn-{i:0width$}");

        let (answered, judgments) = synth_judgments(&mut rng, label);
        let query = synth_query(&mut rng, c);
        let answer = if answered {
            synth_answer(&mut rng, c)
        } else {
            format!("{REFUSAL} {}", topic_word(c, rng.gen_range(0..8)))
        };
        let route = if c.is_multiple_of(2) { AgentRoute::ConceptualDocs } else { AgentRoute::StructuredData };
        let ts = base + Duration::minutes(i as i64);
        let interaction = Interaction::new(id.clone(), query, answer, ts, route)
            .with_decision("answered", if answered { "yes" } else { "no" });
        let record = AnnotationRecord::derive(&tree, &interaction, "synth-gold", true, &judgments, ts)
            .expect("synthetic judgments follow the default tree");
        debug_assert_eq!(record.derived_label, label);

        pool.vectors.push(EmbeddingVector::new(id, values));
        pool.interactions.push(interaction);
        pool.labels.push(label);
        pool.clusters.push(c);
        pool.gold.push(record);
    }
    Ok(pool)
}

/// Picks a path through the default tree that ends at `label`.
fn synth_judgments(rng: &mut ChaCha8Rng, label: SeverityLabel) -> (bool, BTreeMap<String, String>) {
    let mut j = BTreeMap::new();
    let mut put = |k: &str, v: &str| {
        j.insert(k.to_string(), v.to_string());
    };
    let answered = match label {
        SeverityLabel::Sev0 | SeverityLabel::NoError => true,
        SeverityLabel::Sev1 => rng.gen_bool(0.5),
        SeverityLabel::Sev2 => rng.gen_bool(0.7),
    };
    let recovers = if label == SeverityLabel::Sev2 { "yes" } else { "no" };
    match (label, answered) {
        (SeverityLabel::Sev0, _) => {
            put("looks_correct_to_user", "yes");
            put("factually_correct", "no");
        }
        (SeverityLabel::NoError, _) => {
            put("looks_correct_to_user", "yes");
            put("factually_correct", "yes");
        }
        (_, true) => {
            put("looks_correct_to_user", "no");
            put("rephrase_recovers", recovers);
        }
        (_, false) => put("refusal_rephrase_recovers", recovers),
    }
    (answered, j)
}

fn synth_query(rng: &mut ChaCha8Rng, c: usize) -> String {
    let mut words: Vec<String> = (0..3).map(|_| FILLER[rng.gen_range(0..FILLER.len())].to_string()).collect();
    words.extend((0..3).map(|_| topic_word(c, rng.gen_range(0..8))));
    words.extend((0..2).map(|_| entity(rng)));
    words.join(" ")
}

fn synth_answer(rng: &mut ChaCha8Rng, c: usize) -> String {
    let mut words: Vec<String> = (0..4)
        .map(|_| ANSWER_FILLER[rng.gen_range(0..ANSWER_FILLER.len())].to_string())
        .collect();
    words.extend((0..5).map(|_| topic_word(c, rng.gen_range(0..8))));
    words.extend((0..2).map(|_| entity(rng)));
    words.join(" ")
}

/// Names of the specific datasets, segments or fields a user asks about.
fn entity(rng: &mut ChaCha8Rng) -> String {
    format!("obj{}", rng.gen_range(0..20_000))
}
