//! The engine is generic over the sample scalar; exercise the f32 path end
//! to end so the f64 aliases stay a choice, not a constraint.

use anacov_core::bayes::{expected_improvement, gp_fit, gp_predict, GpHyperParams};
use anacov_core::bins::{parse_bin, Bin, BinGrid, BinSet};
use anacov_core::coverage::{deglitched_range_coverage, range_coverage};
use anacov_core::sim::{ac_analysis, LtiModel};
use anacov_core::trace::Trace;

#[test]
fn f32_bins_and_sets() {
    let a: BinSet<f32> = BinSet::single(parse_bin("[0:1)").unwrap());
    let b: BinSet<f32> = BinSet::single(parse_bin("[1:2)").unwrap());
    assert_eq!(a.union(&b), BinSet::single(parse_bin("[0:2)").unwrap()));
    let grid = BinGrid::new(0.0f32, 0.5, Bin::closed(0.0, 10.0).unwrap()).unwrap();
    assert_eq!(grid.quantize(1.2).unwrap(), parse_bin("[1.0:1.5)").unwrap());
}

#[test]
fn f32_trace_and_artifacts() {
    let trace: Trace<f32> = Trace::of_signal(
        "v",
        (0..200)
            .map(|i| {
                let t = i as f32 * 0.01;
                (t, if (0.5..0.52).contains(&t) { 5.0 } else { 1.0 })
            })
            .collect(),
    )
    .unwrap();
    assert_eq!(range_coverage(&trace, "v").unwrap().upper(), 5.0);
    let dg = deglitched_range_coverage(&trace, "v", 0.1).unwrap();
    assert_eq!((dg.lower(), dg.upper()), (1.0, 1.0));
}

#[test]
fn f32_models_and_surrogate() {
    let model: LtiModel<f32> = LtiModel::new(vec![1.0], vec![1.0, 1.0], None).unwrap();
    let plot = ac_analysis(&model, 1e-3f32, 10.0, 30).unwrap();
    assert!(plot.gain_db[0] > -0.1);

    let post = gp_fit(
        &[vec![0.0f32], vec![1.0]],
        &[0.0, 1.0],
        Some(GpHyperParams { length_scales: vec![1.0], signal_variance: 1.0, jitter: 1e-6 }),
    )
    .unwrap();
    let (m, s) = gp_predict(&post, &[0.0]);
    assert!((m - 0.0).abs() < 1e-3 && s < 0.1);
    let ei: f32 = expected_improvement(1.0f32, 1.0, 1.0).unwrap();
    assert!((ei - 0.39894).abs() < 1e-3);
}
