use std::collections::BTreeMap;

use proptest::prelude::*;
use sevbench::coreset::CoresetResult;
use sevbench::estimation::{rmse, weighted_proportions};
use sevbench::model::{EstimatorKind, ProportionEstimate, SeverityLabel};

fn simplex() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.0f64..1.0).prop_filter_map("non-degenerate", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-9).then(|| v.map(|x| x / s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rmse_matches_direct_formula(a in simplex(), b in simplex()) {
        let est = |p: [f64; 4]| {
            let mass = SeverityLabel::ALL.iter().map(|&l| (l, p[l.index()])).collect();
            ProportionEstimate::from_masses(&mass, 1, EstimatorKind::Coreset).unwrap()
        };
        let (ea, eb) = (est(a), est(b));
        let (a, b) = (ea.as_array(), eb.as_array());
        let mut acc = 0.0;
        for j in 0..4 {
            acc += (a[j] - b[j]) * (a[j] - b[j]);
        }
        let direct = (acc / 4.0).sqrt();
        prop_assert!((rmse(&ea, &eb).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn weighted_proportions_form_a_distribution(
        labels in prop::collection::vec(prop::sample::select(SeverityLabel::ALL.to_vec()), 1..50),
        raw in prop::collection::vec(0.0f64..10.0, 50),
    ) {
        let weights: BTreeMap<usize, f64> = (0..labels.len()).map(|i| (i, raw[i] + 0.01)).collect();
        let result = CoresetResult::from_weights(weights.clone(), labels.len(), labels.len(), None);
        let p = weighted_proportions(&labels, &result).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let total: f64 = weights.values().sum();
        for l in SeverityLabel::ALL {
            let mass: f64 = weights.iter().filter(|(&i, _)| labels[i] == l).map(|(_, w)| w).sum();
            prop_assert!((p[l.index()] - mass / total).abs() < 1e-12);
        }
    }
}
