//! Frequency-domain exploration: locate Bode-plot maxima and drive
//! transients at those frequencies to extend range coverage.
//!
//! Gain peaks mark resonances where a fixed-amplitude input yields the
//! largest output swing, so simulating at the peak frequency pushes the
//! output signal's observed range furthest for a single transient run.

use crate::bins::Bin;
use crate::coverage::{range_coverage, CoverageError};
use crate::scalar::{c, Real};
use crate::sim::{ac_analysis, transient, BodePlot, LtiModel, SimError, Waveform};
use crate::trace::Trace;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("peak detection needs at least 3 grid points, got {0}")]
    InsufficientGrid(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

/// One gain maximum of a Bode plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    /// Peak frequency in hertz (quadratically refined in log-frequency).
    pub frequency: T,
    pub gain_db: T,
    /// Index of the grid point the peak was detected at.
    pub grid_index: usize,
    /// True when the plot has no interior maximum and the max-gain endpoint
    /// was reported instead.
    pub endpoint: bool,
}

/// Detected peaks sorted by gain descending (ties toward lower frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet<T> {
    peaks: Vec<Peak<T>>,
}

impl<T: Real> PeakSet<T> {
    pub fn peaks(&self) -> &[Peak<T>] {
        &self.peaks
    }

    /// The peak attaining maximum gain.
    pub fn global_peak(&self) -> &Peak<T> {
        &self.peaks[0]
    }
}

/// Find strict local maxima of the gain plot, refining each by a quadratic
/// fit through the neighboring grid points in log-frequency. Monotone plots
/// with no interior peak return the max-gain endpoint, flagged `endpoint`.
pub fn find_peaks<T: Real>(plot: &BodePlot<T>) -> Result<PeakSet<T>, ExploreError> {
    let n = plot.gain_db.len();
    if n < 3 {
        return Err(ExploreError::InsufficientGrid(n));
    }
    let g = &plot.gain_db;
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if g[i] > g[i - 1] && g[i] > g[i + 1] {
            let (frequency, gain_db) = refine_quadratic(plot, i);
            peaks.push(Peak { frequency, gain_db, grid_index: i, endpoint: false });
        }
    }
    if peaks.is_empty() {
        let mut best = 0usize;
        for i in 1..n {
            if g[i] > g[best] {
                best = i;
            }
        }
        peaks.push(Peak {
            frequency: plot.frequencies[best],
            gain_db: g[best],
            grid_index: best,
            endpoint: true,
        });
    }
    // Rank by the raw grid gain so ordering matches an exhaustive scan of
    // the plot; quadratic refinement only sharpens the reported location.
    peaks.sort_by(|a, b| {
        g[b.grid_index]
            .partial_cmp(&g[a.grid_index])
            .unwrap()
            .then(a.frequency.partial_cmp(&b.frequency).unwrap())
    });
    Ok(PeakSet { peaks })
}

/// Vertex of the parabola through the three grid points around index `i`,
/// fit in (log10 f, gain) coordinates. Falls back to the grid point when the
/// fit degenerates.
fn refine_quadratic<T: Real>(plot: &BodePlot<T>, i: usize) -> (T, T) {
    let x1 = plot.frequencies[i - 1].log10();
    let x2 = plot.frequencies[i].log10();
    let x3 = plot.frequencies[i + 1].log10();
    let (y1, y2, y3) = (plot.gain_db[i - 1], plot.gain_db[i], plot.gain_db[i + 1]);
    let denom = (x1 - x2) * (x1 - x3) * (x2 - x3);
    if denom == T::zero() {
        return (plot.frequencies[i], y2);
    }
    let a = (x3 * (y2 - y1) + x2 * (y1 - y3) + x1 * (y3 - y2)) / denom;
    let b = (x3 * x3 * (y1 - y2) + x2 * x2 * (y3 - y1) + x1 * x1 * (y2 - y3)) / denom;
    if !(a < T::zero()) {
        return (plot.frequencies[i], y2);
    }
    let xv = (-b / (c::<T>(2.0) * a)).max(x1).min(x3);
    let lagrange = |x: T| {
        y1 * ((x - x2) * (x - x3)) / ((x1 - x2) * (x1 - x3))
            + y2 * ((x - x1) * (x - x3)) / ((x2 - x1) * (x2 - x3))
            + y3 * ((x - x1) * (x - x2)) / ((x3 - x1) * (x3 - x2))
    };
    (T::from_f64(10.0).unwrap().powf(xv), lagrange(xv))
}

/// One transient run of the exploration comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationRow<T> {
    pub frequency: T,
    /// Output range over the settled portion of the trace.
    pub range: Bin<T>,
    pub width: T,
    pub is_peak: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationReport<T> {
    /// Rows in ascending frequency order.
    pub rows: Vec<ExplorationRow<T>>,
    pub peak: Peak<T>,
    pub plot: BodePlot<T>,
    /// Initial span excluded from range coverage as startup transient.
    pub settle_time: T,
    /// Transient traces per run, parallel to `rows`.
    pub traces: Vec<Trace<T>>,
}

impl<T: Real> ExplorationReport<T> {
    /// Emit the comparison table as CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frequency_hz,range_lo,range_hi,width,is_peak\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.frequency,
                row.range.lower(),
                row.range.upper(),
                row.width,
                row.is_peak
            ));
        }
        out
    }
}

/// Settling horizon: ten time constants of the slowest stable pole, capped
/// at half the run duration so a settled portion always remains.
fn settle_horizon<T: Real>(model: &LtiModel<T>, duration: T) -> T {
    let slowest = model
        .poles()
        .iter()
        .filter(|p| p.re < T::zero())
        .map(|p| -p.re)
        .fold(T::infinity(), T::min);
    if !slowest.is_finite() || slowest == T::zero() {
        return T::zero();
    }
    (c::<T>(10.0) / slowest).min(duration / c(2.0))
}

/// Strategy 1: AC analysis, peak detection, then a sinusoidal transient at
/// the global peak frequency and at each comparison frequency. Every run's
/// settled output range is reported with the peak row marked.
#[allow(clippy::too_many_arguments)]
pub fn explore<T: Real>(
    model: &LtiModel<T>,
    amplitude: T,
    comparison_freqs: &[T],
    f_lo: T,
    f_hi: T,
    points_per_decade: usize,
    dt: T,
    duration: T,
) -> Result<ExplorationReport<T>, ExploreError> {
    let plot = ac_analysis(model, f_lo, f_hi, points_per_decade)?;
    let peaks = find_peaks(&plot)?;
    let peak = *peaks.global_peak();
    let settle = settle_horizon(model, duration);

    let mut freqs: Vec<(T, bool)> = vec![(peak.frequency, true)];
    freqs.extend(comparison_freqs.iter().map(|&f| (f, false)));
    freqs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut rows = Vec::with_capacity(freqs.len());
    let mut traces = Vec::with_capacity(freqs.len());
    for (f, is_peak) in freqs {
        let trace = transient(model, &Waveform::sine(amplitude, f), dt, duration)?;
        let range = settled_range(&trace, settle)?;
        rows.push(ExplorationRow { frequency: f, range, width: range.width(), is_peak });
        traces.push(trace);
    }
    Ok(ExplorationReport { rows, peak, plot, settle_time: settle, traces })
}

fn settled_range<T: Real>(trace: &Trace<T>, settle: T) -> Result<Bin<T>, ExploreError> {
    let col = trace.signal_index("output").map_err(CoverageError::from)?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    let mut seen = 0usize;
    for (i, &t) in trace.times().iter().enumerate() {
        if t >= settle {
            let v = trace.value(i, col);
            lo = lo.min(v);
            hi = hi.max(v);
            seen += 1;
        }
    }
    if seen < 2 {
        return Ok(range_coverage(trace, "output")?);
    }
    Ok(Bin::closed(lo, hi).map_err(CoverageError::from)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn second_order(f0: f64, q: f64) -> LtiModel<f64> {
        let w0 = 2.0 * PI * f0;
        LtiModel::new(vec![w0 * w0], vec![w0 * w0, w0 / q, 1.0], None).unwrap()
    }

    #[test]
    fn peak_of_resonant_lowpass() {
        let q = 2.0;
        let ppd = 100;
        let plot = ac_analysis(&second_order(1000.0, q), 10.0, 1e5, ppd).unwrap();
        let peaks = find_peaks(&plot).unwrap();
        let found = peaks.global_peak();
        assert!(!found.endpoint);
        let expect = 1000.0 * (1.0 - 1.0 / (2.0 * q * q)).sqrt();
        let grid_step = 4.0 / (plot.frequencies.len() - 1) as f64; // decades per step
        assert!(
            (found.frequency.log10() - expect.log10()).abs() <= 0.5 * grid_step,
            "found {} expected {expect}",
            found.frequency
        );
    }

    #[test]
    fn monotone_plot_reports_endpoint() {
        let first_order = LtiModel::new(vec![1.0], vec![1.0, 1.0], None).unwrap();
        let plot = ac_analysis(&first_order, 1e-3, 1e2, 20).unwrap();
        let peaks = find_peaks(&plot).unwrap();
        let p = peaks.global_peak();
        assert!(p.endpoint);
        assert_abs_diff_eq!(p.frequency, 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn flat_plot_ties_toward_lower_frequency() {
        let plot = ac_analysis(&LtiModel::unity(), 1.0, 1e3, 10).unwrap();
        let peaks = find_peaks(&plot).unwrap();
        assert!(peaks.global_peak().endpoint);
        assert_abs_diff_eq!(peaks.global_peak().frequency, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn explore_peak_width_dominates() {
        let model = second_order(50.0, 2.0);
        let fr = 50.0 * (1.0 - 1.0 / 8.0_f64).sqrt();
        let report = explore(
            &model,
            1.0,
            &[0.1 * fr, 10.0 * fr],
            1.0,
            5e3,
            60,
            2e-5,
            0.45,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.windows(2).all(|w| w[0].frequency < w[1].frequency));
        let peak_row = report.rows.iter().find(|r| r.is_peak).unwrap();
        for row in &report.rows {
            if !row.is_peak {
                assert!(peak_row.width > row.width, "{report:?}");
            }
            // Settled width tracks 2 * amplitude * |H|.
            let expect = 2.0 * model.gain_at(row.frequency);
            assert_abs_diff_eq!(row.width, expect, epsilon = 0.02 * expect);
        }
        assert_abs_diff_eq!(peak_row.frequency, fr, epsilon = fr * 0.01);
    }

    #[test]
    fn explore_unity_is_flat() {
        // Duration covers full periods of every tested frequency.
        let report =
            explore(&LtiModel::unity(), 1.0, &[10.0, 100.0], 1.0, 1e4, 10, 1e-4, 2.0).unwrap();
        let widths: Vec<f64> = report.rows.iter().map(|r| r.width).collect();
        for w in &widths {
            assert_abs_diff_eq!(*w, widths[0], epsilon = 1e-6);
        }
    }

    #[test]
    fn explore_without_comparisons_has_single_row() {
        let model = second_order(50.0, 2.0);
        let report = explore(&model, 1.0, &[], 1.0, 5e3, 40, 2e-5, 0.45).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].is_peak);
    }

    proptest! {
        #[test]
        fn find_peaks_matches_exhaustive_scan(gains in proptest::collection::vec(-40i32..40, 3..100)) {
            let n = gains.len();
            let plot = BodePlot {
                frequencies: (0..n).map(|i| 10.0_f64.powf(i as f64 * 0.05)).collect(),
                gain_db: gains.iter().map(|&g| g as f64 * 0.5).collect(),
                phase_deg: vec![0.0; n],
                unstable: false,
            };
            let peaks = find_peaks(&plot).unwrap();
            // Exhaustive-scan oracle over the raw array.
            let mut oracle: Vec<usize> = Vec::new();
            for i in 1..n - 1 {
                if plot.gain_db[i] > plot.gain_db[i - 1] && plot.gain_db[i] > plot.gain_db[i + 1] {
                    oracle.push(i);
                }
            }
            if oracle.is_empty() {
                prop_assert_eq!(peaks.peaks().len(), 1);
                prop_assert!(peaks.global_peak().endpoint);
                let mut best = 0usize;
                for i in 1..n {
                    if plot.gain_db[i] > plot.gain_db[best] {
                        best = i;
                    }
                }
                prop_assert_eq!(peaks.global_peak().grid_index, best);
            } else {
                let mut found: Vec<usize> = peaks.peaks().iter().map(|p| p.grid_index).collect();
                found.sort_unstable();
                prop_assert_eq!(found, oracle.clone());
                let best_gain = oracle
                    .iter()
                    .map(|&i| plot.gain_db[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(plot.gain_db[peaks.global_peak().grid_index] >= best_gain - 1e-12);
            }
        }
    }
}
