use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sevbench::benchmark::{
    adopt_labels, merge_period, partition_delta, read_manifest, replay, write_atomic, write_manifest, write_report,
    DatasetManifest, Delta,
};
use sevbench::coreset::{solve_giga, solve_uniform, Atoms, CoresetResult};
use sevbench::embedding::{embed, read_vectors, write_vectors, EmbedderSpec};
use sevbench::estimation::{
    bootstrap_compare, estimate_proportions, reduction_table, rmse, write_reductions_csv, Aggregate,
    BootstrapConfig, BootstrapCurves, Equivalence, LabeledPool,
};
use sevbench::model::{interactions_to_jsonl, parse_interactions_jsonl, EstimatorKind, Interaction, ProportionEstimate, SeverityLabel};
use sevbench::severity::{final_labels, parse_annotations_jsonl, validate_tree, DecisionTree};
use sevbench::synth::{generate, SynthConfig};
use sevbench_service::{AnnotationService, ServiceConfig, SystemClock};

use crate::args::*;
use crate::error::CliError;

/// `coreset.json`: a sample with its support resolved to interaction ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetFile {
    pub solver: String,
    pub seed: u64,
    pub result: CoresetResult,
    /// Interaction ids aligned with `result.support`.
    pub support_ids: Vec<String>,
}

impl CoresetFile {
    pub fn weight_of(&self, id: &str) -> Option<f64> {
        let pos = self.support_ids.iter().position(|s| s == id)?;
        self.result.weights.get(&self.result.support[pos]).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: ProportionEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ProportionEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    /// Largest absolute per-label error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesFile {
    pub config: BootstrapConfig,
    pub curves: BootstrapCurves,
    pub reductions: Vec<Equivalence>,
    /// Budgets whose coreset error no measured uniform budget reaches.
    pub unreachable: Vec<usize>,
}

pub const REDUCTIONS_CSV: &str = "reductions.csv";

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::domain("io", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(path, bytes)?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn say(out: &mut dyn Write, value: Value) -> Result<(), CliError> {
    writeln!(out, "{value}")?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, SeverityLabel>, CliError> {
    let records = parse_annotations_jsonl(&read_text(path)?)?;
    Ok(final_labels(&records)?)
}

pub fn read_interactions(path: &Path) -> Result<Vec<Interaction>, CliError> {
    Ok(parse_interactions_jsonl(&read_text(path)?)?)
}

pub fn read_coreset(path: &Path) -> Result<CoresetFile, CliError> {
    let file: CoresetFile = serde_json::from_str(&read_text(path)?)?;
    file.result.check().map_err(|e| CliError::domain("coreset", e))?;
    if file.support_ids.len() != file.result.support.len() {
        return Err(CliError::domain("coreset", "support_ids does not match the support"));
    }
    Ok(file)
}

fn parse_label_dists(s: &str) -> Result<Vec<[f64; 4]>, CliError> {
    s.split(';')
        .map(|row| {
            let vals: Vec<f64> = row
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(format!("--label-dists: {e}")))?;
            <[f64; 4]>::try_from(vals).map_err(|v| {
                CliError::Usage(format!("--label-dists rows need 4 values, got {}", v.len()))
            })
        })
        .collect()
}

pub fn synth(a: &SynthArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n: a.n,
        dim: a.dim,
        clusters: a.clusters,
        separation: a.separation,
        spread: a.spread,
        mixing: (!a.mixing.is_empty()).then(|| a.mixing.clone()),
        label_distributions: a.label_dists.as_deref().map(parse_label_dists).transpose()?,
        label_signal: a.label_signal,
        seed,
    };
    let pool = generate(&cfg)?;
    let dir = &a.out_dir;
    write_file(&dir.join("interactions.jsonl"), interactions_to_jsonl(&pool.interactions).as_bytes())?;
    let gold: String = pool.gold.iter().map(|r| r.to_json_line() + "\n").collect();
    write_file(&dir.join("annotations.jsonl"), gold.as_bytes())?;
    write_file(&dir.join("truth.json"), &pretty(&pool.truth())?)?;
    fs::create_dir_all(dir)?;
    write_vectors(&pool.vectors, dir.join("vectors.bin"))?;
    say(out, json!({ "interactions": pool.interactions.len(), "dim": cfg.dim, "out_dir": dir }))
}

pub fn embed_cmd(a: &EmbedArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let pool = read_interactions(&a.interactions)?;
    let spec = match a.embedder {
        EmbedderArg::FeatureHash => EmbedderSpec::feature_hash(a.dim.unwrap_or(256) as usize, seed),
        EmbedderArg::ExternalFile => {
            let path = a
                .vectors_file
                .as_ref()
                .ok_or_else(|| CliError::Usage("--embedder external_file needs --vectors-file".into()))?;
            EmbedderSpec::external_file(path, a.dim.unwrap_or(0) as usize)
        }
    };
    let vectors = embed(&spec, &pool)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_vectors(&vectors, &a.out)?;
    say(out, json!({ "vectors": vectors.len(), "dim": vectors.first().map_or(0, |v| v.dim()), "out": a.out }))
}

pub fn sample(a: &SampleArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let vectors = read_vectors(&a.vectors)?;
    let k = a.k as usize;
    let (solver, result) = match a.solver {
        SolverArg::Giga => ("giga", solve_giga(&vectors, k)?),
        SolverArg::Uniform => {
            let r = solve_uniform(vectors.len(), k, seed)?;
            ("uniform", r.evaluate(&Atoms::from_vectors(&vectors)?)?)
        }
    };
    let support_ids = result.support.iter().map(|&i| vectors[i].interaction_id.clone()).collect();
    let file = CoresetFile {
        solver: solver.into(),
        seed,
        result,
        support_ids,
    };
    write_file(&a.out, &pretty(&file)?)?;
    say(
        out,
        json!({ "solver": solver, "k": k, "support": file.result.support.len(), "objective": file.result.objective, "out": a.out }),
    )
}

pub fn enqueue(a: &EnqueueArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = read_coreset(&a.coreset)?;
    let by_id: BTreeMap<String, Interaction> =
        read_interactions(&a.interactions)?.into_iter().map(|i| (i.id.clone(), i)).collect();
    let mut pool = Vec::with_capacity(file.support_ids.len());
    let mut weights = Vec::with_capacity(file.support_ids.len());
    for (pos, id) in file.support_ids.iter().enumerate() {
        let i = by_id
            .get(id)
            .ok_or_else(|| CliError::domain("model", format!("interaction `{id}` is not in {}", a.interactions.display())))?;
        pool.push(i.clone());
        weights.push((pos, file.result.weights[&file.result.support[pos]]));
    }
    let compact = CoresetResult::from_weights(weights, file.result.k, pool.len(), file.result.objective);
    let body = json!({
        "result": compact,
        "interactions": pool,
        "annotators_per_item": a.annotators_per_item,
    });
    let url = format!("{}/v1/tasks/enqueue", a.service.trim_end_matches('/'));
    let resp = reqwest::blocking::Client::new().post(&url).json(&body).send()?;
    let status = resp.status();
    let reply: Value = resp.json()?;
    if !status.is_success() {
        let msg = reply["error"]["message"].as_str().unwrap_or("request failed").to_string();
        return Err(CliError::domain("service", format!("{status}: {msg}")));
    }
    say(out, reply)
}

pub fn estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = read_coreset(&a.coreset)?;
    let labels = read_labels(&a.labels)?;
    let mut id_map = vec![String::new(); file.result.pool_size];
    for (&i, id) in file.result.support.iter().zip(&file.support_ids) {
        id_map[i] = id.clone();
    }
    let kind = if file.solver == "uniform" { EstimatorKind::Uniform } else { EstimatorKind::Coreset };
    let est = estimate_proportions(&labels, &file.result, &id_map, kind)?;
    let mut report = EstimateReport {
        estimate: est,
        truth: None,
        rmse: None,
        linf: None,
    };
    if let Some(gold) = &a.gold {
        let gold = read_labels(gold)?;
        let truth = ProportionEstimate::from_labels(gold.values(), EstimatorKind::Uniform)?;
        report.rmse = Some(rmse(&report.estimate, &truth)?);
        report.linf = Some(
            SeverityLabel::ALL
                .iter()
                .map(|&l| (report.estimate.proportion(l) - truth.proportion(l)).abs())
                .fold(0.0, f64::max),
        );
        report.truth = Some(truth);
    }
    match &a.out {
        Some(path) => {
            write_file(path, &pretty(&report)?)?;
            say(out, json!({ "out": path, "linf": report.linf }))
        }
        None => {
            out.write_all(&pretty(&report)?)?;
            Ok(())
        }
    }
}

pub fn eval_sampling(a: &EvalArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let vectors = read_vectors(&a.vectors)?;
    let labels = read_labels(&a.labels)?;
    let pool = LabeledPool::new(vectors, &labels)?;
    let mut cfg = BootstrapConfig::new(a.ks.clone(), a.bootstrap as usize, seed);
    cfg.subpool_fraction = a.subpool_fraction;
    cfg.aggregate = match a.aggregate {
        AggregateArg::Mean => Aggregate::Mean,
        AggregateArg::Median => Aggregate::Median,
    };
    cfg.parallel = a.parallel;
    if a.uniform_grid > 0 {
        let cap = cfg.subpool_size(pool.len());
        cfg.uniform_extra_ks = (1..).map(|i| i * a.uniform_grid).take_while(|&k| k <= cap).collect();
    }
    let curves = bootstrap_compare(&pool, &cfg)?;
    let reductions = reduction_table(&curves.coreset, &curves.uniform);
    let unreachable = curves
        .coreset
        .ks()
        .into_iter()
        .filter(|k| !reductions.iter().any(|r| r.coreset_k == *k))
        .collect();
    let file = CurvesFile {
        config: cfg,
        curves,
        reductions,
        unreachable,
    };
    write_file(&a.out, &pretty(&file)?)?;
    let csv_path = a.out.with_file_name(REDUCTIONS_CSV);
    let mut csv = Vec::new();
    write_reductions_csv(&file.reductions, &mut csv).map_err(|e| CliError::domain("io", e))?;
    write_file(&csv_path, &csv)?;
    let points: Vec<Value> = file
        .curves
        .coreset
        .points
        .iter()
        .map(|p| json!({ "k": p.k, "coreset": p.rmse, "uniform": file.curves.uniform.at(p.k) }))
        .collect();
    say(out, json!({ "points": points, "out": a.out, "reductions": csv_path }))
}

fn manifests_in(dir: &Path) -> Result<Vec<(PathBuf, DatasetManifest)>, CliError> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("manifest-") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    for p in paths {
        let m = read_manifest(&p).map_err(|e| CliError::domain("benchmark", format!("{}: {e}", p.display())))?;
        out.push((p, m));
    }
    Ok(out)
}

pub fn delta_file_name(name: &str, delta: &Delta) -> String {
    format!("delta-{name}-{}-{}.json", delta.split, delta.period)
}

pub fn bench_partition(a: &PartitionArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let candidates: Vec<(String, SeverityLabel)> = read_labels(&a.candidates)?.into_iter().collect();
    let existing: Vec<DatasetManifest> = manifests_in(&a.dir)?.into_iter().map(|(_, m)| m).collect();
    let (dev, holdout) = partition_delta(&candidates, &existing, a.holdout_fraction, seed, &a.period)?;
    fs::create_dir_all(&a.dir)?;
    let mut written = Vec::new();
    for d in [&dev, &holdout] {
        let path = a.dir.join(delta_file_name(&a.name, d));
        if path.exists() {
            return Err(CliError::domain("benchmark", format!("{} already exists", path.display())));
        }
        write_file(&path, &pretty(d)?)?;
        written.push(path);
    }
    say(out, json!({ "development": dev.len(), "holdout": holdout.len(), "deltas": written }))
}

pub fn bench_merge(a: &MergeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let delta: Delta = serde_json::from_str(&read_text(&a.delta)?)?;
    let prior = match &a.prior {
        Some(p) => read_manifest(p)?,
        None => manifests_in(&a.dir)?
            .into_iter()
            .map(|(_, m)| m)
            .filter(|m| m.name == a.name && m.split == delta.split && m.period < delta.period)
            .max_by(|x, y| x.period.cmp(&y.period))
            .unwrap_or_else(|| DatasetManifest::empty(a.name.clone(), delta.split, delta.period.clone())),
    };
    let merged = merge_period(&prior, &delta)?;
    fs::create_dir_all(&a.dir)?;
    let path = write_manifest(&a.dir, &merged)?;
    say(out, json!({ "manifest": path, "members": merged.len(), "checksum": merged.checksum }))
}

fn read_responses(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line)?;
        let bad = || CliError::domain("model", format!("{}:{}: need `id` and `response` or `answer`", path.display(), n + 1));
        let id = v["id"].as_str().ok_or_else(bad)?;
        let text = v["response"].as_str().or_else(|| v["answer"].as_str()).ok_or_else(bad)?;
        map.insert(id.to_string(), text.to_string());
    }
    Ok(map)
}

pub fn bench_replay(a: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = read_manifest(&a.manifest)?;
    let report = replay(&manifest, &read_responses(&a.baseline)?, &read_responses(&a.candidate)?)?;
    let at: DateTime<Utc> = match &a.at {
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map_err(|e| CliError::Usage(format!("--at: {e}")))?
            .with_timezone(&Utc),
        None => Utc::now(),
    };
    fs::create_dir_all(&a.out_dir)?;
    let path = write_report(&a.out_dir, &report, at)?;
    say(
        out,
        json!({ "report": path, "unchanged": report.summary.unchanged, "changed": report.summary.changed, "unresolved_mass": report.unresolved_mass }),
    )
}

pub fn bench_adopt(a: &AdoptArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = read_manifest(&a.manifest)?;
    let labels = read_labels(&a.labels)?;
    let adopted = adopt_labels(&manifest, &labels, &a.period)?;
    let dir = match &a.dir {
        Some(d) => d.clone(),
        None => a.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let path = write_manifest(&dir, &adopted)?;
    say(out, json!({ "manifest": path, "adopted": labels.len(), "checksum": adopted.checksum }))
}

fn load_tree(path: Option<&Path>) -> Result<DecisionTree, CliError> {
    Ok(match path {
        Some(p) => DecisionTree::load(p)?,
        None => DecisionTree::default_tree(),
    })
}

pub fn serve(a: &ServeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let tree = load_tree(a.tree.as_deref())?;
    let violations = validate_tree(&tree);
    if !violations.is_empty() {
        return Err(CliError::domain("tree", format!("tree is invalid: {}", violations[0])));
    }
    let config = ServiceConfig {
        data_dir: Some(a.data_dir.clone()),
        lease_ttl: chrono::Duration::minutes(a.lease_ttl_minutes as i64),
        annotators_per_item: a.annotators_per_item as usize,
    };
    let svc = Arc::new(AnnotationService::open(config, tree, Arc::new(SystemClock))?);
    say(out, json!({ "listening": a.listen.to_string(), "data_dir": a.data_dir }))?;
    out.flush()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(sevbench_service::http::serve(svc, a.listen))?;
    Ok(())
}

pub fn tree_validate(path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let tree = load_tree(path)?;
    let violations = validate_tree(&tree);
    let mut labels: Vec<SeverityLabel> = tree.enumerate_paths().into_iter().map(|(_, l)| l).collect();
    labels.sort();
    labels.dedup();
    say(
        out,
        json!({
            "version": tree.version,
            "valid": violations.is_empty(),
            "violations": violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "paths": tree.enumerate_paths().len(),
            "labels": labels,
        }),
    )?;
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(CliError::domain("tree", format!("{} violation(s), first: {v}", violations.len()))),
    }
}

pub fn tree_export(path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let text = DecisionTree::default_tree().to_json_pretty() + "\n";
    match path {
        Some(p) => {
            write_file(p, text.as_bytes())?;
            say(out, json!({ "out": p }))
        }
        None => {
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
