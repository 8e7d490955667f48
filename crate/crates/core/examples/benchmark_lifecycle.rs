//! Grows development and holdout manifests over two periods, replays a
//! candidate model against the holdout and adopts new gold labels.
//!
//!     cargo run -p sevbench --example benchmark_lifecycle

use std::collections::BTreeMap;

use sevbench::benchmark::{
    adopt_labels, merge_period, partition_delta, read_manifest, replay, split_overlap, write_manifest,
    DatasetManifest, Split,
};
use sevbench::model::SeverityLabel;

fn candidates(period: usize, n: usize) -> Vec<(String, SeverityLabel)> {
    (0..n)
        .map(|i| (format!("p{period}-{i}"), SeverityLabel::ALL[(i * 7 + period) % 4]))
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut dev = DatasetManifest::empty("support-bot", Split::Development, "2024-00");
    let mut holdout = DatasetManifest::empty("support-bot", Split::Holdout, "2024-00");

    for (p, period) in ["2024-01", "2024-02"].into_iter().enumerate() {
        let (d, h) = partition_delta(&candidates(p, 50), &[dev.clone(), holdout.clone()], 0.2, p as u64, period)?;
        dev = merge_period(&dev, &d)?;
        holdout = merge_period(&holdout, &h)?;
        println!("{period}: dev {} holdout {}", dev.len(), holdout.len());
    }
    assert!(split_overlap(&[dev.clone(), holdout.clone()]).is_empty());

    let path = write_manifest(dir.path(), &holdout)?;
    let holdout = read_manifest(&path)?;
    println!("wrote {} (checksum {})", path.display(), &holdout.checksum[..12]);

    let baseline: BTreeMap<String, String> =
        holdout.member_ids.iter().map(|id| (id.clone(), format!("answer for {id}"))).collect();
    let mut candidate = baseline.clone();
    let changed: Vec<String> = holdout.member_ids.iter().step_by(5).cloned().collect();
    for id in &changed {
        candidate.insert(id.clone(), format!("new answer for {id}"));
    }
    let report = replay(&holdout, &baseline, &candidate)?;
    println!(
        "replay: {} unchanged, {} changed, unresolved mass {:.2}",
        report.summary.unchanged, report.summary.changed, report.unresolved_mass
    );
    if let Some(f) = &report.forecast {
        println!("forecast over unchanged items: {:?}", f.as_array());
    }

    let relabelled: BTreeMap<String, SeverityLabel> =
        changed.into_iter().map(|id| (id, SeverityLabel::NoError)).collect();
    let adopted = adopt_labels(&holdout, &relabelled, "2024-03")?;
    println!("adopted: {:?}", adopted.gold_proportions().map(|p| p.as_array()));
    Ok(())
}
