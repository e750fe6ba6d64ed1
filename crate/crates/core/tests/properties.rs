mod common;

use chrono::NaiveDate;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use relmlr::design::{qq_normalize, RelationalSeries};
use relmlr::diagnostics::ParameterSummary;
use relmlr::estimation::{normalize_identifiability, CoefficientSet};
use relmlr::ingest::{aggregate, AggregationConfig, EventRecord, QuadClass, YearMonth};
use relmlr::tensor::{dematricize, matricize, mode_product, tucker_apply, Matrix, Mode, Tensor4};

fn tensor(dims: [usize; 4], seed: u64) -> Tensor4 {
    common::random_tensor(&mut common::rng(seed), dims)
}

fn matrix(r: usize, c: usize, seed: u64) -> Matrix {
    common::random_matrix(&mut common::rng(seed), r, c)
}

fn dims_strategy() -> impl Strategy<Value = [usize; 4]> {
    (1..5usize, 1..5usize, 1..4usize, 1..4usize).prop_map(|(a, b, c, d)| [a, b, c, d])
}

const ACTORS: [&str; 4] = ["AAA", "BBB", "CCC", "XXX"];

fn record_strategy() -> impl Strategy<Value = EventRecord> {
    (0..4usize, 1..4usize, 0..4usize, 0..14u32, 1..28u32, 1..5u64).prop_map(|(s, d, q, mo, day, count)| {
        let t = (s + d) % 4;
        EventRecord {
            date: NaiveDate::from_ymd_opt(2012 + (mo / 12) as i32, mo % 12 + 1, day).unwrap(),
            source: ACTORS[s].to_string(),
            target: ACTORS[t].to_string(),
            quad: QuadClass::ALL[q],
            count,
        }
    })
}

fn agg_config() -> AggregationConfig {
    AggregationConfig {
        actors: ACTORS[..3].iter().map(|s| s.to_string()).collect(),
        variables: vec![QuadClass::VerbalConf, QuadClass::MaterialConf, QuadClass::VerbalCoop],
        start: YearMonth::new(2012, 1).unwrap(),
        end: YearMonth::new(2012, 12).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_on_distinct_modes_commute(dims in dims_strategy(), r1 in 1..5usize, r3 in 1..4usize, seed in any::<u64>()) {
        let x = tensor(dims, seed);
        let a = matrix(r1, dims[0], seed ^ 1);
        let c = matrix(r3, dims[2], seed ^ 3);
        let ac = mode_product(&mode_product(&x, &a, Mode::One).unwrap(), &c, Mode::Three).unwrap();
        let ca = mode_product(&mode_product(&x, &c, Mode::Three).unwrap(), &a, Mode::One).unwrap();
        prop_assert!(ac.max_abs_diff(&ca) < 1e-12);
    }

    #[test]
    fn matricize_roundtrips(dims in dims_strategy(), k in 0..4usize, seed in any::<u64>()) {
        let x = tensor(dims, seed);
        let mode = Mode::ALL[k];
        let back = dematricize(&matricize(&x, mode), dims, mode).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn normalization_is_idempotent_and_keeps_fit(m in 3..6usize, v in 1..3usize, seed in any::<u64>()) {
        let c = CoefficientSet::new(matrix(m, m, seed), matrix(m, m, seed ^ 1), matrix(v, 3 * v, seed ^ 2), 1.0).unwrap();
        let once = normalize_identifiability(&c).unwrap();
        let twice = normalize_identifiability(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.b1.trace() >= 0.0 && once.b2.trace() >= 0.0);
        let x = tensor([m, m, 3 * v, 2], seed ^ 4);
        let before = tucker_apply(&x, &c.b1, &c.b2, &c.b3).unwrap();
        let after = tucker_apply(&x, &once.b1, &once.b2, &once.b3).unwrap();
        let scale = before.values().iter().fold(1.0f64, |s, y| s.max(y.abs()));
        prop_assert!(before.max_abs_diff(&after) < 1e-12 * scale);
    }

    #[test]
    fn aggregation_is_additive(a in prop::collection::vec(record_strategy(), 0..40), b in prop::collection::vec(record_strategy(), 0..40)) {
        let cfg = agg_config();
        // only keep record sets the aggregator accepts on their own
        prop_assume!(a.iter().any(|r| r.source != "XXX" || r.target != "XXX"));
        prop_assume!(b.iter().any(|r| r.source != "XXX" || r.target != "XXX"));
        let both: Vec<EventRecord> = a.iter().chain(&b).cloned().collect();
        let sa = aggregate(&a, &cfg).unwrap();
        let sb = aggregate(&b, &cfg).unwrap();
        let sab = aggregate(&both, &cfg).unwrap();
        let sum: Vec<f64> = sa.series.data().values().iter().zip(sb.series.data().values()).map(|(x, y)| x + y).collect();
        prop_assert_eq!(sab.series.data().values(), sum.as_slice());
        prop_assert_eq!(sab.dropped.unknown_actor, sa.dropped.unknown_actor + sb.dropped.unknown_actor);
    }

    #[test]
    fn aggregation_ignores_record_order(recs in prop::collection::vec(record_strategy(), 1..60), seed in any::<u64>()) {
        let cfg = agg_config();
        prop_assume!(recs.iter().any(|r| r.source != "XXX" || r.target != "XXX"));
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut common::rng(seed));
        prop_assert_eq!(aggregate(&recs, &cfg).unwrap(), aggregate(&shuffled, &cfg).unwrap());
    }

    #[test]
    fn summaries_ignore_draw_order(xs in prop::collection::vec(-1e3..1e3f64, 1..200), seed in any::<u64>()) {
        let mut ys = xs.clone();
        ys.shuffle(&mut common::rng(seed));
        prop_assert_eq!(ParameterSummary::from_values("x", &xs).unwrap(), ParameterSummary::from_values("x", &ys).unwrap());
    }

    #[test]
    fn qq_normalize_depends_only_on_ranks(seed in any::<u64>()) {
        let s = common::random_series(&mut common::rng(seed), 3, 1, 20);
        let warped = Tensor4::from_fn(s.data().dims(), |i, j, w, t| {
            let x = s.data().get(i, j, w, t);
            if i == j { 0.0 } else { x.powi(3) + 2.0 * x }
        });
        let a = qq_normalize(&s);
        let b = qq_normalize(&RelationalSeries::unlabeled(warped).unwrap());
        prop_assert_eq!(a.data(), b.data());
    }
}
