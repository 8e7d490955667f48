use std::collections::BTreeMap;

use proptest::prelude::*;
use sevbench::benchmark::{merge_period, partition_delta, replay, split_overlap, DatasetManifest, Delta, Split};
use sevbench::model::SeverityLabel;

fn label(i: usize) -> SeverityLabel {
    SeverityLabel::ALL[(i * 7 + i / 3) % 4]
}

#[test]
fn four_quarters_keep_splits_disjoint() {
    let periods = ["2024Q1", "2024Q2", "2024Q3", "2024Q4"];
    let mut dev = DatasetManifest::empty("shared", Split::Development, "2023Q4");
    let mut hold = DatasetManifest::empty("shared", Split::Holdout, "2023Q4");
    let mut history = Vec::new();
    for (p, period) in periods.iter().enumerate() {
        let candidates: Vec<(String, SeverityLabel)> =
            (0..50 + 10 * p).map(|i| (format!("{period}-{i}"), label(i))).collect();
        let (d, h) = partition_delta(&candidates, &[dev.clone(), hold.clone()], 0.2, p as u64, period).unwrap();
        assert_eq!(h.len(), (0.2 * candidates.len() as f64).round() as usize);
        dev = merge_period(&dev, &d).unwrap();
        hold = merge_period(&hold, &h).unwrap();
        history.push(dev.clone());
        history.push(hold.clone());
        assert!(split_overlap(&history).is_empty());
    }
    assert_eq!(dev.lineage.len(), 4);
    assert_eq!(dev.len() + hold.len(), 50 + 60 + 70 + 80);

    let responses: BTreeMap<String, String> = hold.member_ids.iter().map(|id| (id.clone(), format!("reply to {id}"))).collect();
    let report = replay(&hold, &responses, &responses).unwrap();
    assert_eq!(report.summary.changed, 0);
    assert_eq!(report.forecast, hold.gold_proportions());
}

proptest! {
    #[test]
    fn merging_one_by_one_equals_merging_the_union(sizes in prop::collection::vec(0usize..20, 1..5)) {
        let base = DatasetManifest::empty("m", Split::Holdout, "p0");
        let mut next = 0;
        let deltas: Vec<Delta> = sizes
            .iter()
            .enumerate()
            .map(|(p, &n)| {
                let items = (next..next + n).map(|i| (format!("id{i}"), label(i))).collect();
                next += n;
                Delta { split: Split::Holdout, period: format!("p{}", p + 1), items }
            })
            .collect();
        let stepwise = deltas.iter().try_fold(base.clone(), |m, d| merge_period(&m, d)).unwrap();
        let union = Delta {
            split: Split::Holdout,
            period: "all".into(),
            items: deltas.iter().flat_map(|d| d.items.clone()).collect(),
        };
        let at_once = merge_period(&base, &union).unwrap();
        prop_assert_eq!(&stepwise.member_ids, &at_once.member_ids);
        prop_assert_eq!(&stepwise.gold_labels, &at_once.gold_labels);
    }
}
