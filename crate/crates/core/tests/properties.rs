//! Invariants checked over generated inputs.

use std::collections::BTreeMap;

use motionseg::activity::Interval;
use motionseg::config::PipelineConfig;
use motionseg::evaluation::{
    dtw, frame_accuracy, keypoint_consistency, AccuracyMode, GroundTruth, KeyPoint, LabeledInterval, TRANSITION,
    UNCERTAIN,
};
use motionseg::features::{
    bundle_features, mirror_features, stack_features, BundleConfig, FeatureSequence, MirrorMap,
};
use motionseg::ingest::TimeSeries;
use motionseg::neighborhood::compute_neighborhoods;
use motionseg::pipeline::{run_pipeline, SegmentationResult};
use motionseg::synth::periodic;
use proptest::prelude::*;

fn series_strategy(max_frames: usize, max_channels: usize) -> impl Strategy<Value = TimeSeries> {
    (5..=max_frames, 1..=max_channels).prop_flat_map(|(m, n)| {
        prop::collection::vec(-3.0..3.0f64, m * n).prop_map(move |data| {
            TimeSeries::new(data, (0..n).map(|c| format!("c{c}")).collect(), 30.0).unwrap()
        })
    })
}

fn check_result(r: &SegmentationResult) -> Result<(), TestCaseError> {
    let m = r.meta.frames;
    // activities and transitions tile the trial
    let mut spans: Vec<Interval> = r
        .activities
        .iter()
        .map(|a| a.interval())
        .chain(r.transition_intervals())
        .collect();
    spans.sort();
    let mut next = 0;
    for s in &spans {
        prop_assert_eq!(s.start, next);
        prop_assert!(s.end >= s.start);
        next = s.end + 1;
    }
    prop_assert_eq!(next, m);

    // primitives tile each activity and never overlap
    for (k, act) in r.activities.iter().enumerate() {
        let act = act.interval();
        let mut prims: Vec<Interval> = r
            .primitives
            .iter()
            .filter(|p| p.activity == k)
            .map(|p| Interval::new(p.start - 1, p.end - 1))
            .collect();
        prims.sort();
        if prims.is_empty() {
            continue;
        }
        let mut at = act.start;
        for p in prims {
            prop_assert_eq!(p.start, at);
            at = p.end + 1;
        }
        prop_assert_eq!(at, act.end + 1);
    }

    // clusters partition the primitives
    let mut seen = vec![0usize; r.primitives.len()];
    for (id, c) in r.clusters.iter().enumerate() {
        for &p in &c.primitives {
            seen[p] += 1;
            prop_assert_eq!(r.primitives[p].cluster, id);
        }
    }
    prop_assert!(seen.iter().all(|&s| s == 1));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn segmentation_covers_trial_without_overlap(
        m in 120usize..360,
        period in 16usize..48,
        noise in 0.0..0.15f64,
        seed in 0u64..1000,
        radius in 0.1..0.6f64,
    ) {
        let fx = periodic(m, period, noise, seed).unwrap();
        let cfg = PipelineConfig { radius, ..PipelineConfig::default() };
        let out = run_pipeline(&cfg, &fx.series, None).unwrap();
        prop_assert!(out.segmentation.is_partition());
        check_result(&out.result)?;
    }

    #[test]
    fn segmentation_of_noise_is_a_partition(series in series_strategy(150, 4), radius in 0.05..1.0f64) {
        let cfg = PipelineConfig { radius, ..PipelineConfig::default() };
        let out = run_pipeline(&cfg, &series, None).unwrap();
        check_result(&out.result)?;
    }

    #[test]
    fn neighborhoods_are_symmetric(series in series_strategy(200, 5), radius in 0.05..1.5f64) {
        let feats = stack_features(&series, &[0]).unwrap();
        let nbrs = compute_neighborhoods(&feats, radius).unwrap();
        prop_assert!(nbrs.is_symmetric());
        for i in 0..nbrs.len() {
            for &(j, d) in nbrs.set(i) {
                prop_assert!(j != i);
                prop_assert_eq!(nbrs.distance(j, i), Some(d));
            }
        }
    }

    #[test]
    fn bundling_moves_orthogonally_and_uphill(
        period in 20usize..40,
        noise in 0.02..0.12f64,
        seed in 0u64..1000,
        k in 12usize..48,
    ) {
        let fx = periodic(160, period, noise, seed).unwrap();
        let feats = stack_features(&fx.series, &[-3, 0, 3]).unwrap();
        let (bundled, stats) = bundle_features(&feats, &BundleConfig { k, seed, ..BundleConfig::default() }).unwrap();
        for (i, info) in stats.frames.iter().enumerate() {
            let offset: Vec<f64> = bundled.vector(i).iter().zip(feats.vector(i)).map(|(a, b)| a - b).collect();
            let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
            if info.stationary {
                prop_assert_eq!(norm, 0.0);
                continue;
            }
            let dot: f64 = offset.iter().zip(&info.direction).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-6 * norm, "frame {}: <O,d> = {} with |O| = {}", i, dot, norm);
            prop_assert!(
                info.density_after >= info.density_before * (1.0 - 1e-12),
                "frame {}: density {} -> {}", i, info.density_before, info.density_after
            );
        }
    }

    #[test]
    fn tolerant_accuracy_bounds_strict(
        clusters in prop::collection::vec(prop::option::weighted(0.8, 0usize..4), 20..120),
        cuts in prop::collection::vec(0usize..6, 1..8),
    ) {
        let m = clusters.len();
        let labels = ["a", "b", TRANSITION, UNCERTAIN, "c", "a"];
        let mut intervals = Vec::new();
        let mut start = 0;
        for (n, &c) in cuts.iter().enumerate() {
            let len = (m / cuts.len()).max(1);
            if start >= m {
                break;
            }
            let end = if n + 1 == cuts.len() { m - 1 } else { (start + len - 1).min(m - 1) };
            intervals.push(LabeledInterval { interval: Interval::new(start, end), label: labels[c].into() });
            start = end + 1;
        }
        let gt = GroundTruth::Intervals(intervals);
        let none = BTreeMap::new();
        let strict = frame_accuracy(&clusters, &gt, AccuracyMode::Strict, &none).unwrap();
        let tolerant = frame_accuracy(&clusters, &gt, AccuracyMode::Tolerant, &none).unwrap();
        prop_assert!((0.0..=1.0).contains(&strict));
        prop_assert!((0.0..=1.0).contains(&tolerant));
        prop_assert!(tolerant >= strict);
    }

    #[test]
    fn dtw_is_symmetric(
        a in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 1..12),
        b in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 1..12),
    ) {
        let ra: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
        let rb: Vec<&[f64]> = b.iter().map(Vec::as_slice).collect();
        prop_assert!((dtw(&ra, &rb) - dtw(&rb, &ra)).abs() <= 1e-12);
        prop_assert!(dtw(&ra, &ra).abs() <= 1e-12);
    }

    #[test]
    fn keypoint_positions_are_relative(
        lengths in prop::collection::vec(1usize..30, 1..10),
        keys in prop::collection::vec(0usize..400, 0..40),
    ) {
        let mut prims = Vec::new();
        let mut at = 0;
        for len in lengths {
            prims.push(Interval::new(at, at + len - 1));
            at += len + 2;
        }
        let keys: Vec<KeyPoint> = keys.into_iter().map(|frame| KeyPoint { frame, label: "k".into() }).collect();
        let report = keypoint_consistency(&prims, &[], &keys);
        prop_assert!(report.positions.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert_eq!(report.histogram.iter().sum::<usize>(), report.positions.len());
        prop_assert_eq!(report.positions.len() + report.in_transitions + report.unassigned, keys.len());
    }

    #[test]
    fn mirroring_twice_is_identity(series in series_strategy(40, 6), negate in any::<bool>(), flip in any::<bool>()) {
        let n = series.channels();
        let mut swaps = Vec::new();
        for c in (0..n.saturating_sub(1)).step_by(2) {
            swaps.push((c, c + 1, negate));
        }
        if flip && n % 2 == 1 {
            swaps.push((n - 1, n - 1, true));
        }
        let map = MirrorMap::from_swaps(n, &swaps).unwrap();
        let twice = mirror_features(&mirror_features(&series, &map).unwrap(), &map).unwrap();
        prop_assert_eq!(twice.as_slice(), series.as_slice());
    }

    #[test]
    fn stacking_zero_offset_is_identity(series in series_strategy(60, 5)) {
        let feats: FeatureSequence = stack_features(&series, &[0]).unwrap();
        prop_assert_eq!(feats.as_slice(), series.as_slice());
        prop_assert_eq!(feats.dim(), series.channels());
    }
}

fn run_with_threads(threads: usize, cfg: &PipelineConfig, series: &TimeSeries) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run_pipeline(cfg, series, None).unwrap().result.to_json())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn results_do_not_depend_on_thread_count(seed in 0u64..1000, bundling in any::<bool>()) {
        let fx = periodic(240, 30, 0.08, seed).unwrap();
        let cfg = PipelineConfig { bundling, bundling_k: 32, seed, ..PipelineConfig::default() };
        let one = run_with_threads(1, &cfg, &fx.series);
        prop_assert_eq!(&one, &run_with_threads(4, &cfg, &fx.series));
        prop_assert_eq!(&one, &run_with_threads(3, &cfg, &fx.series));
    }
}
