//! Shared development and holdout datasets that grow by quarterly deltas,
//! and regression replay of candidate system outputs against them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::BenchmarkError;
use crate::model::{EstimatorKind, ProportionEstimate, SeverityLabel};

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Development,
    Holdout,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Development => "development",
            Split::Holdout => "holdout",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "development" | "dev" => Ok(Split::Development),
            "holdout" => Ok(Split::Holdout),
            other => Err(BenchmarkError::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineageEvent {
    Merge,
    Adopt,
}

/// One audit entry: a merge of `delta_size` new items, or an adoption that
/// relabeled `delta_size` existing items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub period: String,
    pub delta_size: usize,
    pub event: LineageEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub split: Split,
    pub period: String,
    pub member_ids: Vec<String>,
    pub gold_labels: BTreeMap<String, SeverityLabel>,
    pub lineage: Vec<LineageEntry>,
    pub checksum: String,
}

/// Everything except the checksum, in a fixed field order.
#[derive(Serialize)]
struct Canonical<'a> {
    name: &'a str,
    split: Split,
    period: &'a str,
    member_ids: &'a [String],
    gold_labels: &'a BTreeMap<String, SeverityLabel>,
    lineage: &'a [LineageEntry],
}

impl DatasetManifest {
    /// An empty manifest with no history, to merge the first delta into.
    pub fn empty(name: impl Into<String>, split: Split, period: impl Into<String>) -> Self {
        Self::sealed(name.into(), split, period.into(), Vec::new(), BTreeMap::new(), Vec::new())
    }

    fn sealed(
        name: String,
        split: Split,
        period: String,
        member_ids: Vec<String>,
        gold_labels: BTreeMap<String, SeverityLabel>,
        lineage: Vec<LineageEntry>,
    ) -> Self {
        let mut m = Self {
            name,
            split,
            period,
            member_ids,
            gold_labels,
            lineage,
            checksum: String::new(),
        };
        m.checksum = m.compute_checksum();
        m
    }

    pub fn compute_checksum(&self) -> String {
        let canonical = Canonical {
            name: &self.name,
            split: self.split,
            period: &self.period,
            member_ids: &self.member_ids,
            gold_labels: &self.gold_labels,
            lineage: &self.lineage,
        };
        let bytes = serde_json::to_vec(&canonical).expect("canonical manifest serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks member uniqueness, label coverage and the checksum.
    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let mut seen = BTreeSet::new();
        for id in &self.member_ids {
            if !seen.insert(id.as_str()) {
                return Err(BenchmarkError::Invalid(format!("member `{id}` listed twice")));
            }
        }
        if self.gold_labels.len() != seen.len() || !self.gold_labels.keys().all(|k| seen.contains(k.as_str())) {
            return Err(BenchmarkError::Invalid("gold labels must be keyed exactly by member ids".into()));
        }
        let computed = self.compute_checksum();
        if computed != self.checksum {
            return Err(BenchmarkError::Checksum {
                stored: self.checksum.clone(),
                computed,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.gold_labels.contains_key(id)
    }

    pub fn file_name(&self) -> String {
        manifest_file_name(&self.name, self.split, &self.period)
    }

    pub fn gold_proportions(&self) -> Option<ProportionEstimate> {
        ProportionEstimate::from_labels(self.gold_labels.values(), EstimatorKind::Uniform).ok()
    }

    fn describe(&self) -> String {
        format!("{}/{}/{}", self.name, self.split, self.period)
    }
}

/// New gold-labeled items destined for one split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub split: Split,
    pub period: String,
    pub items: Vec<(String, SeverityLabel)>,
}

impl Delta {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Splits freshly annotated candidates into development and holdout deltas.
/// The holdout receives `round(fraction * n)` items chosen by a seeded
/// draw; both deltas keep the candidates' input order.
pub fn partition_delta(
    candidates: &[(String, SeverityLabel)],
    existing: &[DatasetManifest],
    holdout_fraction: f64,
    seed: u64,
    period: &str,
) -> Result<(Delta, Delta), BenchmarkError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(BenchmarkError::BadFraction(holdout_fraction));
    }
    let mut seen = BTreeSet::new();
    for (id, _) in candidates {
        if !seen.insert(id.as_str()) {
            return Err(BenchmarkError::DuplicateCandidate(id.clone()));
        }
        if let Some(m) = existing.iter().find(|m| m.contains(id)) {
            return Err(BenchmarkError::AlreadyPresent {
                id: id.clone(),
                manifest: m.describe(),
            });
        }
    }
    let n = candidates.len();
    let holdout_n = (holdout_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<usize> = index::sample(&mut rng, n, holdout_n).into_iter().collect();
    let mut dev = Delta {
        split: Split::Development,
        period: period.to_string(),
        items: Vec::with_capacity(n - holdout_n),
    };
    let mut holdout = Delta {
        split: Split::Holdout,
        period: period.to_string(),
        items: Vec::with_capacity(holdout_n),
    };
    for (i, item) in candidates.iter().enumerate() {
        if chosen.contains(&i) {
            holdout.items.push(item.clone());
        } else {
            dev.items.push(item.clone());
        }
    }
    Ok((dev, holdout))
}

/// Appends a delta to the prior manifest of the same split. The result
/// carries the delta's period.
pub fn merge_period(prior: &DatasetManifest, delta: &Delta) -> Result<DatasetManifest, BenchmarkError> {
    if prior.split != delta.split {
        return Err(BenchmarkError::SplitMismatch {
            manifest: prior.split.to_string(),
            delta: delta.split.to_string(),
        });
    }
    let mut overlap: Vec<String> = delta.ids().filter(|id| prior.contains(id)).map(String::from).collect();
    let mut seen = BTreeSet::new();
    for id in delta.ids() {
        if !seen.insert(id) && !overlap.iter().any(|o| o == id) {
            overlap.push(id.to_string());
        }
    }
    if !overlap.is_empty() {
        return Err(BenchmarkError::Overlap(overlap));
    }
    let mut member_ids = prior.member_ids.clone();
    let mut gold_labels = prior.gold_labels.clone();
    for (id, label) in &delta.items {
        member_ids.push(id.clone());
        gold_labels.insert(id.clone(), *label);
    }
    let mut lineage = prior.lineage.clone();
    lineage.push(LineageEntry {
        period: delta.period.clone(),
        delta_size: delta.len(),
        event: LineageEvent::Merge,
    });
    Ok(DatasetManifest::sealed(
        prior.name.clone(),
        prior.split,
        delta.period.clone(),
        member_ids,
        gold_labels,
        lineage,
    ))
}

/// Overwrites gold labels for the supplied members, e.g. after post-launch
/// annotation of changed items.
pub fn adopt_labels(
    manifest: &DatasetManifest,
    new_gold: &BTreeMap<String, SeverityLabel>,
    period: &str,
) -> Result<DatasetManifest, BenchmarkError> {
    if let Some(id) = new_gold.keys().find(|id| !manifest.contains(id)) {
        return Err(BenchmarkError::NotMember(id.clone()));
    }
    let mut gold_labels = manifest.gold_labels.clone();
    gold_labels.extend(new_gold.iter().map(|(k, v)| (k.clone(), *v)));
    let mut lineage = manifest.lineage.clone();
    lineage.push(LineageEntry {
        period: period.to_string(),
        delta_size: new_gold.len(),
        event: LineageEvent::Adopt,
    });
    Ok(DatasetManifest::sealed(
        manifest.name.clone(),
        manifest.split,
        period.to_string(),
        manifest.member_ids.clone(),
        gold_labels,
        lineage,
    ))
}

/// Ids present in both a development and a holdout manifest.
pub fn split_overlap(manifests: &[DatasetManifest]) -> Vec<String> {
    let ids = |split| -> BTreeSet<&str> {
        manifests
            .iter()
            .filter(|m| m.split == split)
            .flat_map(|m| m.member_ids.iter().map(String::as_str))
            .collect()
    };
    let dev = ids(Split::Development);
    ids(Split::Holdout).intersection(&dev).map(|s| s.to_string()).collect()
}

/// SHA-256 of the response with runs of whitespace collapsed and ends
/// trimmed.
pub fn response_digest(text: &str) -> String {
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub name: String,
    pub split: Split,
    pub period: String,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayItem {
    pub id: String,
    pub baseline_response_digest: String,
    pub candidate_response_digest: String,
    pub changed: bool,
    pub needs_annotation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub unchanged: usize,
    pub changed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub dataset: ManifestRef,
    pub per_item: Vec<ReplayItem>,
    pub summary: ReplaySummary,
    /// Gold proportions over unchanged items; `None` when every item
    /// changed.
    pub forecast: Option<ProportionEstimate>,
    /// Fraction of members whose response changed and so awaits annotation.
    pub unresolved_mass: f64,
}

/// Compares baseline and candidate responses for every member. Changed
/// items are routed to annotation and left out of the forecast.
pub fn replay(
    manifest: &DatasetManifest,
    baseline: &BTreeMap<String, String>,
    candidate: &BTreeMap<String, String>,
) -> Result<ReplayReport, BenchmarkError> {
    let mut per_item = Vec::with_capacity(manifest.len());
    let mut kept = Vec::new();
    for id in &manifest.member_ids {
        let b = baseline.get(id).ok_or_else(|| BenchmarkError::MissingResponse {
            side: "baseline",
            id: id.clone(),
        })?;
        let c = candidate.get(id).ok_or_else(|| BenchmarkError::MissingResponse {
            side: "candidate",
            id: id.clone(),
        })?;
        let (bd, cd) = (response_digest(b), response_digest(c));
        let changed = bd != cd;
        if !changed {
            kept.push(manifest.gold_labels[id]);
        }
        per_item.push(ReplayItem {
            id: id.clone(),
            baseline_response_digest: bd,
            candidate_response_digest: cd,
            changed,
            needs_annotation: changed,
        });
    }
    let changed = per_item.iter().filter(|i| i.changed).count();
    let n = per_item.len();
    let forecast = ProportionEstimate::from_labels(&kept, EstimatorKind::Uniform).ok();
    Ok(ReplayReport {
        dataset: ManifestRef {
            name: manifest.name.clone(),
            split: manifest.split,
            period: manifest.period.clone(),
            checksum: manifest.checksum.clone(),
        },
        per_item,
        summary: ReplaySummary {
            unchanged: n - changed,
            changed,
        },
        forecast,
        unresolved_mass: if n == 0 { 0.0 } else { changed as f64 / n as f64 },
    })
}

pub fn manifest_file_name(name: &str, split: Split, period: &str) -> String {
    format!("manifest-{name}-{split}-{period}.json")
}

pub fn report_file_name(at: DateTime<Utc>) -> String {
    format!("replay-report-{}.json", at.format("%Y%m%dT%H%M%SZ"))
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BenchmarkError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes the manifest under its conventional name in `dir`. Existing
/// manifests are never overwritten.
pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<PathBuf, BenchmarkError> {
    manifest.validate()?;
    let path = dir.join(manifest.file_name());
    if path.exists() {
        return Err(BenchmarkError::Invalid(format!("{} already exists", path.display())));
    }
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, BenchmarkError> {
    let m: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    m.validate()?;
    Ok(m)
}

pub fn write_report(dir: &Path, report: &ReplayReport, at: DateTime<Utc>) -> Result<PathBuf, BenchmarkError> {
    let path = dir.join(report_file_name(at));
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SeverityLabel::*;

    fn items(prefix: &str, n: usize) -> Vec<(String, SeverityLabel)> {
        (0..n).map(|i| (format!("{prefix}{i}"), SeverityLabel::ALL[i % 4])).collect()
    }

    fn manifest_of(split: Split, xs: &[(String, SeverityLabel)]) -> DatasetManifest {
        let delta = Delta {
            split,
            period: "2024Q1".into(),
            items: xs.to_vec(),
        };
        merge_period(&DatasetManifest::empty("core", split, "2024Q1"), &delta).unwrap()
    }

    #[test]
    fn partition_sizes_and_determinism() {
        let c = items("c", 10);
        let (dev, hold) = partition_delta(&c, &[], 0.2, 7, "2024Q2").unwrap();
        assert_eq!((dev.len(), hold.len()), (8, 2));
        let d: BTreeSet<&str> = dev.ids().collect();
        assert!(hold.ids().all(|id| !d.contains(id)));
        assert_eq!(partition_delta(&c, &[], 0.2, 7, "2024Q2").unwrap(), (dev, hold));
    }

    #[test]
    fn partition_rejects_known_ids() {
        let prior = manifest_of(Split::Holdout, &items("c", 3));
        let err = partition_delta(&items("c", 5), &[prior], 0.2, 7, "2024Q2").unwrap_err();
        assert!(err.to_string().contains("c0"), "{err}");
        assert!(matches!(
            partition_delta(&items("x", 5), &[], 1.0, 7, "q"),
            Err(BenchmarkError::BadFraction(_))
        ));
    }

    #[test]
    fn merge_grows_members_and_lineage() {
        let prior = manifest_of(Split::Development, &items("p", 100));
        let delta = Delta {
            split: Split::Development,
            period: "2024Q2".into(),
            items: items("d", 25),
        };
        let merged = merge_period(&prior, &delta).unwrap();
        assert_eq!(merged.len(), 125);
        assert_eq!(merged.lineage.len(), prior.lineage.len() + 1);
        merged.validate().unwrap();

        let empty = Delta {
            split: Split::Development,
            period: "2024Q3".into(),
            items: vec![],
        };
        let same = merge_period(&prior, &empty).unwrap();
        assert_eq!(same.member_ids, prior.member_ids);
        assert_eq!(same.gold_labels, prior.gold_labels);
        assert_eq!(
            same.lineage.last().unwrap(),
            &LineageEntry {
                period: "2024Q3".into(),
                delta_size: 0,
                event: LineageEvent::Merge
            }
        );

        let clash = Delta {
            split: Split::Development,
            period: "2024Q2".into(),
            items: vec![("p3".into(), Sev0)],
        };
        assert!(matches!(merge_period(&prior, &clash), Err(BenchmarkError::Overlap(ids)) if ids == ["p3"]));
        let wrong = Delta {
            split: Split::Holdout,
            ..empty
        };
        assert!(matches!(merge_period(&prior, &wrong), Err(BenchmarkError::SplitMismatch { .. })));
    }

    #[test]
    fn replay_counts_changes() {
        let m = manifest_of(Split::Holdout, &items("h", 10));
        let base: BTreeMap<String, String> = m.member_ids.iter().map(|id| (id.clone(), format!("answer {id}"))).collect();
        let same: BTreeMap<String, String> =
            base.iter().map(|(k, v)| (k.clone(), format!("  {}\n", v.replace(' ', "\t ")))).collect();
        let r = replay(&m, &base, &same).unwrap();
        assert_eq!(r.summary.changed, 0);
        assert_eq!(r.forecast.unwrap(), m.gold_proportions().unwrap());

        let mut one = base.clone();
        one.insert("h4".into(), "different".into());
        let r = replay(&m, &base, &one).unwrap();
        assert_eq!((r.summary.changed, r.summary.unchanged), (1, 9));
        assert_eq!(r.per_item.iter().filter(|i| i.needs_annotation).count(), 1);
        assert_eq!(r.forecast.as_ref().unwrap().sample_size, 9);
        assert!((r.unresolved_mass - 0.1).abs() < 1e-12);

        let mut missing = base.clone();
        missing.remove("h2");
        let err = replay(&m, &base, &missing).unwrap_err();
        assert!(err.to_string().contains("h2"));
    }

    #[test]
    fn adopt_overwrites_supplied_labels_only() {
        let m = manifest_of(Split::Holdout, &items("h", 5));
        let new_gold: BTreeMap<String, SeverityLabel> = [("h0".to_string(), NoError), ("h1".to_string(), Sev0)].into();
        let a = adopt_labels(&m, &new_gold, "2024Q2").unwrap();
        let changed = m.member_ids.iter().filter(|id| m.gold_labels[*id] != a.gold_labels[*id]).count();
        assert_eq!(changed, 2);
        a.validate().unwrap();
        let b = adopt_labels(&m, &BTreeMap::new(), "2024Q2").unwrap();
        assert_eq!(b.gold_labels, m.gold_labels);
        assert_eq!(b.lineage.len(), m.lineage.len() + 1);
        let bad: BTreeMap<String, SeverityLabel> = [("zz".to_string(), Sev1)].into();
        assert!(matches!(adopt_labels(&m, &bad, "q"), Err(BenchmarkError::NotMember(id)) if id == "zz"));
    }

    #[test]
    fn files_round_trip_and_detect_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest_of(Split::Development, &items("f", 4));
        let path = write_manifest(dir.path(), &m).unwrap();
        assert!(path.ends_with("manifest-core-development-2024Q1.json"));
        assert_eq!(read_manifest(&path).unwrap(), m);
        assert!(write_manifest(dir.path(), &m).is_err());

        let mut tampered = m.clone();
        tampered.gold_labels.insert("f0".into(), Sev1);
        fs::write(&path, serde_json::to_vec(&tampered).unwrap()).unwrap();
        assert!(matches!(read_manifest(&path), Err(BenchmarkError::Checksum { .. })));
    }
}
