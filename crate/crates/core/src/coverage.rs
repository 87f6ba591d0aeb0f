//! The six analog coverage artifacts, computed from a trace.
//!
//! | kind               | output                                    |
//! |--------------------|-------------------------------------------|
//! | `range`            | `[min sample : max sample]`               |
//! | `deglitched_range` | range after discarding excursions narrower than the de-glitching time |
//! | `level`            | values where the signal dwells within a band of width `k` for at least the level time |
//! | `ddt`              | `[min slope : max slope]` of forward differences at periodic points |
//! | `delay`            | `[min : max]` delay between paired occurrences of two events |
//! | `frequency`        | `[min : max]` threshold crossings per unit time over tumbling windows |
//!
//! De-glitching is realized as sliding-window erosion/dilation: the upper
//! bound is the highest level the signal sustains for a full window, the
//! lower bound the lowest level it stays under for a full window. Any
//! excursion narrower than the window cannot sustain a level and therefore
//! drops out.

use crate::bins::{Bin, BinError, BinGrid, BinSet};
use crate::scalar::{c, Real};
use crate::trace::{Event, Trace, TraceError};
use std::collections::VecDeque;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Bin(#[from] BinError),
    #[error("trace spans {duration} s, shorter than {param} = {required} s")]
    TraceTooShort { param: &'static str, required: String, duration: String },
    #[error("no E1->E2 pair exists for delay coverage")]
    NoPairs,
    #[error("parameter {name} must be strictly positive, got {value}")]
    NonPositiveParam { name: &'static str, value: String },
    #[error("coverpoint {id}: {reason}")]
    BadCoverPoint { id: String, reason: String },
}

/// Which artifact a coverpoint computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverKind {
    Range,
    DeglitchedRange,
    Level,
    Ddt,
    Delay,
    Frequency,
}

impl CoverKind {
    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "range" => CoverKind::Range,
            "deglitched_range" => CoverKind::DeglitchedRange,
            "level" => CoverKind::Level,
            "ddt" => CoverKind::Ddt,
            "delay" => CoverKind::Delay,
            "frequency" => CoverKind::Frequency,
            _ => return None,
        })
    }
}

impl fmt::Display for CoverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CoverKind::Range => "range",
            CoverKind::DeglitchedRange => "deglitched_range",
            CoverKind::Level => "level",
            CoverKind::Ddt => "ddt",
            CoverKind::Delay => "delay",
            CoverKind::Frequency => "frequency",
        };
        write!(f, "{name}")
    }
}

/// Artifact parameters; which fields must be present depends on the kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactParams<T> {
    /// De-glitching time, seconds (`deglitched_range`, `level`).
    pub deglitching_time: Option<T>,
    /// Minimum dwell duration for a level, seconds (`level`).
    pub level_time: Option<T>,
    /// Dwell band width in signal units (`level`).
    pub bin_granularity: Option<T>,
    /// Spacing of slope evaluation points, seconds (`ddt`).
    pub time_granularity: Option<T>,
    /// Crossing reference level in signal units (`frequency`).
    pub reference: Option<T>,
    /// Tumbling window length, seconds (`frequency`).
    pub window: Option<T>,
    /// Report crossings/2 per window instead of raw crossings per unit time.
    pub halve_crossings: bool,
    /// Event pair for `delay`.
    pub events: Option<(Event<T>, Event<T>)>,
}

impl<T> Default for ArtifactParams<T> {
    fn default() -> Self {
        ArtifactParams {
            deglitching_time: None,
            level_time: None,
            bin_granularity: None,
            time_granularity: None,
            reference: None,
            window: None,
            halve_crossings: false,
            events: None,
        }
    }
}

/// One coverage artifact instance: kind + signal (or event pair) + parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverPoint<T> {
    pub id: String,
    pub kind: CoverKind,
    /// Observed signal; `None` only for `delay`, whose events carry signals.
    pub signal: Option<String>,
    pub params: ArtifactParams<T>,
}

impl<T: Real> CoverPoint<T> {
    pub fn new(
        id: impl Into<String>,
        kind: CoverKind,
        signal: Option<String>,
        params: ArtifactParams<T>,
    ) -> Result<Self, CoverageError> {
        let cp = CoverPoint { id: id.into(), kind, signal, params };
        cp.validate()?;
        Ok(cp)
    }

    /// Check that exactly the parameters required by the kind are present
    /// and strictly positive where required.
    pub fn validate(&self) -> Result<(), CoverageError> {
        let fail = |reason: String| {
            Err(CoverageError::BadCoverPoint { id: self.id.clone(), reason })
        };
        let p = &self.params;
        let need = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(CoverageError::BadCoverPoint {
                    id: self.id.clone(),
                    reason: format!("{} coverage requires {name}", self.kind),
                })
            }
        };
        let positive = |v: Option<T>, name: &'static str| match v {
            Some(x) if x > T::zero() && x.is_finite() => Ok(()),
            Some(x) => Err(CoverageError::NonPositiveParam { name, value: x.to_string() }),
            None => Ok(()),
        };
        positive(p.deglitching_time, "deglitching_time")?;
        positive(p.level_time, "level_time")?;
        positive(p.bin_granularity, "bin_granularity")?;
        positive(p.time_granularity, "time_granularity")?;
        positive(p.window, "window")?;

        if self.kind == CoverKind::Delay {
            if self.signal.is_some() {
                return fail("delay coverage takes an event pair, not a signal".into());
            }
            need(p.events.is_some(), "an event pair")?;
        } else {
            if self.signal.is_none() {
                return fail(format!("{} coverage requires a signal", self.kind));
            }
            if p.events.is_some() {
                return fail(format!("{} coverage does not take events", self.kind));
            }
        }

        let allowed: &[&str] = match self.kind {
            CoverKind::Range => &[],
            CoverKind::DeglitchedRange => &["deglitching_time"],
            CoverKind::Level => &["deglitching_time", "level_time", "bin_granularity"],
            CoverKind::Ddt => &["time_granularity"],
            CoverKind::Delay => &[],
            CoverKind::Frequency => &["reference", "window"],
        };
        let set: [(&str, bool); 6] = [
            ("deglitching_time", p.deglitching_time.is_some()),
            ("level_time", p.level_time.is_some()),
            ("bin_granularity", p.bin_granularity.is_some()),
            ("time_granularity", p.time_granularity.is_some()),
            ("reference", p.reference.is_some()),
            ("window", p.window.is_some()),
        ];
        for (name, present) in set {
            let wanted = allowed.contains(&name);
            if wanted && !present {
                need(false, name)?;
            }
            if !wanted && present {
                return fail(format!("{} coverage does not take {name}", self.kind));
            }
        }
        Ok(())
    }

    fn signal(&self) -> &str {
        self.signal.as_deref().expect("validated coverpoint has a signal")
    }
}

/// Result of evaluating one coverpoint on one trace, quantized to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult<T> {
    pub coverpoint_id: String,
    /// Grid cells touched by the artifact output.
    pub covered: BinSet<T>,
    /// Artifact output falling outside the grid domain.
    pub untargeted: BinSet<T>,
    /// Number of trace samples examined.
    pub sample_count: usize,
    /// Set when an empty outcome (no pairs, no levels) was downgraded to
    /// empty coverage instead of an error.
    pub empty_reason: Option<String>,
}

fn positive_param<T: Real>(value: T, name: &'static str) -> Result<(), CoverageError> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(CoverageError::NonPositiveParam { name, value: value.to_string() })
    }
}

fn too_short<T: Real>(param: &'static str, required: T, trace_duration: T) -> CoverageError {
    CoverageError::TraceTooShort {
        param,
        required: required.to_string(),
        duration: trace_duration.to_string(),
    }
}

/// Coverage 1: the closed interval spanned by the signal's samples.
pub fn range_coverage<T: Real>(trace: &Trace<T>, signal: &str) -> Result<Bin<T>, CoverageError> {
    let col = trace.signal_index(signal)?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for v in trace.column(col) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(Bin::closed(lo, hi)?)
}

/// Coverage 2: the range after discarding excursions narrower than `deglitch_time`.
///
/// Upper bound: max over window positions of the window minimum (highest
/// sustained level). Lower bound: min over window positions of the window
/// maximum. Windows are anchored at sample times, evaluated on the
/// interpolated signal, and truncated windows at the trace end are excluded.
/// If no single level is sustained at all (the two bounds cross), the result
/// collapses to a degenerate bin at their midpoint.
pub fn deglitched_range_coverage<T: Real>(
    trace: &Trace<T>,
    signal: &str,
    deglitch_time: T,
) -> Result<Bin<T>, CoverageError> {
    positive_param(deglitch_time, "deglitching_time")?;
    let col = trace.signal_index(signal)?;
    let (low, high) = erosion_bounds(trace, col, deglitch_time)?;
    if low <= high {
        Ok(Bin::closed(low, high)?)
    } else {
        Ok(Bin::point((low + high) / c(2.0))?)
    }
}

/// Shared erosion/dilation sweep: returns (min window-max, max window-min).
fn erosion_bounds<T: Real>(
    trace: &Trace<T>,
    col: usize,
    window: T,
) -> Result<(T, T), CoverageError> {
    let times = trace.times();
    let t_end = trace.end_time();
    let tol = window * c(1e-9);
    if times[0] + window > t_end + tol {
        return Err(too_short("deglitching_time", window, trace.duration()));
    }

    // Monotonic deques over sample indices inside the active window.
    let mut min_q: VecDeque<usize> = VecDeque::new();
    let mut max_q: VecDeque<usize> = VecDeque::new();
    let mut right = 0usize; // next sample not yet admitted
    let mut best_min = T::neg_infinity(); // max over windows of window-min
    let mut best_max = T::infinity(); // min over windows of window-max

    for i in 0..times.len() {
        if times[i] + window > t_end + tol {
            break;
        }
        let w_end = (times[i] + window).min(t_end);
        while right < times.len() && times[right] <= w_end {
            let v = trace.value(right, col);
            while min_q.back().is_some_and(|&j| trace.value(j, col) >= v) {
                min_q.pop_back();
            }
            min_q.push_back(right);
            while max_q.back().is_some_and(|&j| trace.value(j, col) <= v) {
                max_q.pop_back();
            }
            max_q.push_back(right);
            right += 1;
        }
        while min_q.front().is_some_and(|&j| j < i) {
            min_q.pop_front();
        }
        while max_q.front().is_some_and(|&j| j < i) {
            max_q.pop_front();
        }
        let edge = trace.sample_col_at(col, w_end)?;
        let w_min = min_q.front().map_or(edge, |&j| trace.value(j, col)).min(edge);
        let w_max = max_q.front().map_or(edge, |&j| trace.value(j, col)).max(edge);
        best_min = best_min.max(w_min);
        best_max = best_max.min(w_max);
    }
    Ok((best_max, best_min))
}

/// One detected level: the band midpoint and the total dwell duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDwell<T> {
    pub level: T,
    pub duration: T,
}

/// Coverage 3: values where the de-glitched signal settles within a band of
/// width `band` for at least `level_time`.
pub fn level_coverage<T: Real>(
    trace: &Trace<T>,
    signal: &str,
    deglitch_time: T,
    level_time: T,
    band: T,
) -> Result<Vec<T>, CoverageError> {
    Ok(level_dwells(trace, signal, deglitch_time, level_time, band)?
        .into_iter()
        .map(|d| d.level)
        .collect())
}

/// Level detection with dwell durations retained.
///
/// The signal is first de-glitched by clamping to the de-glitched range,
/// then scanned greedily for maximal dwells: a dwell grows while the running
/// max - min of its samples stays within the band, and restarts at the first
/// violating sample. Each dwell lasting at least `level_time` emits the band
/// midpoint; emitted levels within band/2 of an earlier one merge to their
/// mean (durations add).
pub fn level_dwells<T: Real>(
    trace: &Trace<T>,
    signal: &str,
    deglitch_time: T,
    level_time: T,
    band: T,
) -> Result<Vec<LevelDwell<T>>, CoverageError> {
    positive_param(level_time, "level_time")?;
    positive_param(band, "bin_granularity")?;
    let col = trace.signal_index(signal)?;
    let (low, high) = erosion_bounds(trace, col, deglitch_time)?;
    if low > high {
        // Nothing is sustained for the de-glitching time: no levels.
        return Ok(Vec::new());
    }

    let times = trace.times();
    let clamped: Vec<T> = trace.column(col).map(|v| v.max(low).min(high)).collect();

    let mut raw: Vec<LevelDwell<T>> = Vec::new();
    let mut start = 0usize;
    let mut dwell_min = clamped[0];
    let mut dwell_max = clamped[0];
    let close = |from: usize, to: usize, lo: T, hi: T, raw: &mut Vec<LevelDwell<T>>| {
        let duration = times[to] - times[from];
        if duration >= level_time {
            raw.push(LevelDwell { level: (lo + hi) / c(2.0), duration });
        }
    };
    for j in 1..clamped.len() {
        let v = clamped[j];
        let lo = dwell_min.min(v);
        let hi = dwell_max.max(v);
        if hi - lo <= band {
            dwell_min = lo;
            dwell_max = hi;
        } else {
            close(start, j - 1, dwell_min, dwell_max, &mut raw);
            start = j;
            dwell_min = v;
            dwell_max = v;
        }
    }
    close(start, clamped.len() - 1, dwell_min, dwell_max, &mut raw);

    // Merge duplicates: a level within band/2 of an earlier one folds into it.
    let half = band / c(2.0);
    let mut merged: Vec<LevelDwell<T>> = Vec::new();
    for dwell in raw {
        match merged.iter_mut().find(|m| (m.level - dwell.level).abs() <= half) {
            Some(m) => {
                m.level = (m.level + dwell.level) / c(2.0);
                m.duration = m.duration + dwell.duration;
            }
            None => merged.push(dwell),
        }
    }
    Ok(merged)
}

/// Coverage 4: `[min : max]` of forward-difference slopes evaluated at
/// periodic points `t0, t0 + dm, t0 + 2 dm, ...` on the interpolated signal.
pub fn ddt_coverage<T: Real>(
    trace: &Trace<T>,
    signal: &str,
    time_granularity: T,
) -> Result<Bin<T>, CoverageError> {
    positive_param(time_granularity, "time_granularity")?;
    let col = trace.signal_index(signal)?;
    let slopes = ddt_slopes(trace, col, time_granularity)?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for s in slopes {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok(Bin::closed(lo, hi)?)
}

fn ddt_slopes<T: Real>(
    trace: &Trace<T>,
    col: usize,
    dm: T,
) -> Result<Vec<T>, CoverageError> {
    let t0 = trace.start_time();
    let t_end = trace.end_time();
    let tol = dm * c(1e-9);
    let mut slopes = Vec::new();
    let mut j = 0usize;
    loop {
        let t_hat = t0 + T::from_usize(j).unwrap() * dm;
        let t_next = t_hat + dm;
        if t_next > t_end + tol {
            break;
        }
        let a = trace.sample_col_at(col, t_hat.min(t_end))?;
        let b = trace.sample_col_at(col, t_next.min(t_end))?;
        slopes.push((b - a) / dm);
        j += 1;
    }
    if slopes.is_empty() {
        return Err(too_short("time_granularity", dm, trace.duration()));
    }
    Ok(slopes)
}

/// Delays between FIFO-paired occurrences of two events: each E1 occurrence
/// is matched to the first E2 occurrence strictly later that no earlier E1
/// has consumed.
pub fn delay_values<T: Real>(
    trace: &Trace<T>,
    e1: &Event<T>,
    e2: &Event<T>,
) -> Result<Vec<T>, CoverageError> {
    let t1 = trace.event_times(e1)?;
    let t2 = trace.event_times(e2)?;
    let mut delays = Vec::new();
    let mut j = 0usize;
    for &a in &t1 {
        while j < t2.len() && t2[j] <= a {
            j += 1;
        }
        if j == t2.len() {
            break;
        }
        delays.push(t2[j] - a);
        j += 1;
    }
    Ok(delays)
}

/// Coverage 5: `[min : max]` over all paired E1->E2 delays.
pub fn delay_coverage<T: Real>(
    trace: &Trace<T>,
    e1: &Event<T>,
    e2: &Event<T>,
) -> Result<Bin<T>, CoverageError> {
    let delays = delay_values(trace, e1, e2)?;
    if delays.is_empty() {
        return Err(CoverageError::NoPairs);
    }
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for d in delays {
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(Bin::closed(lo, hi)?)
}

/// Per-window crossing frequencies: the trace is cut into consecutive
/// tumbling windows of length `window` (final partial window dropped) and
/// each window reports crossings of `reference` per unit time.
pub fn frequency_values<T: Real>(
    trace: &Trace<T>,
    signal: &str,
    reference: T,
    window: T,
    halve_crossings: bool,
) -> Result<Vec<T>, CoverageError> {
    positive_param(window, "window")?;
    let col = trace.signal_index(signal)?;
    let duration = trace.duration();
    let tol = window * c(1e-9);
    let n_windows = ((duration + tol) / window).floor().to_usize().unwrap_or(0);
    if n_windows == 0 {
        return Err(too_short("window", window, duration));
    }
    let mut counts = vec![0usize; n_windows];
    let t0 = trace.start_time();
    for tc in trace.crossings_either(col, reference) {
        let idx = ((tc - t0) / window).floor().to_usize().unwrap_or(usize::MAX);
        if idx < n_windows {
            counts[idx] += 1;
        }
    }
    let divisor = if halve_crossings { window * c(2.0) } else { window };
    Ok(counts.into_iter().map(|n| T::from_usize(n).unwrap() / divisor).collect())
}

/// Coverage 6: `[min : max]` of per-window crossing frequencies.
pub fn frequency_coverage<T: Real>(
    trace: &Trace<T>,
    signal: &str,
    reference: T,
    window: T,
    halve_crossings: bool,
) -> Result<Bin<T>, CoverageError> {
    let freqs = frequency_values(trace, signal, reference, window, halve_crossings)?;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for f in freqs {
        lo = lo.min(f);
        hi = hi.max(f);
    }
    Ok(Bin::closed(lo, hi)?)
}

/// Run the coverpoint's artifact on a trace and quantize its output onto the
/// target grid.
///
/// Interval-valued artifacts (range, de-glitched range, ddt) cover every
/// grid cell their interval intersects; value-listing artifacts (level,
/// delay, frequency) cover the cell containing each value. Output falling
/// outside the grid domain is collected in `untargeted`. Empty outcomes
/// (no delay pairs, no levels) degrade to empty coverage with a note instead
/// of an error, so multi-coverpoint runs never abort.
pub fn evaluate<T: Real>(
    cp: &CoverPoint<T>,
    trace: &Trace<T>,
    grid: &BinGrid<T>,
) -> Result<CoverageResult<T>, CoverageError> {
    cp.validate()?;
    let p = &cp.params;
    let mut empty_reason = None;

    enum Output<T> {
        Interval(Bin<T>),
        Values(Vec<T>),
    }

    let output = match cp.kind {
        CoverKind::Range => Output::Interval(range_coverage(trace, cp.signal())?),
        CoverKind::DeglitchedRange => Output::Interval(deglitched_range_coverage(
            trace,
            cp.signal(),
            p.deglitching_time.unwrap(),
        )?),
        CoverKind::Level => {
            let levels = level_coverage(
                trace,
                cp.signal(),
                p.deglitching_time.unwrap(),
                p.level_time.unwrap(),
                p.bin_granularity.unwrap(),
            )?;
            if levels.is_empty() {
                empty_reason = Some("no levels detected".to_string());
            }
            Output::Values(levels)
        }
        CoverKind::Ddt => {
            Output::Interval(ddt_coverage(trace, cp.signal(), p.time_granularity.unwrap())?)
        }
        CoverKind::Delay => {
            let (e1, e2) = p.events.as_ref().unwrap();
            let delays = delay_values(trace, e1, e2)?;
            if delays.is_empty() {
                empty_reason = Some("no event pairs".to_string());
            }
            Output::Values(delays)
        }
        CoverKind::Frequency => Output::Values(frequency_values(
            trace,
            cp.signal(),
            p.reference.unwrap(),
            p.window.unwrap(),
            p.halve_crossings,
        )?),
    };

    let mut cells = Vec::new();
    let mut untargeted = Vec::new();
    match output {
        Output::Interval(interval) => {
            for i in grid.cells_intersecting(&interval) {
                cells.push(grid.cell(i));
            }
            let domain_set = BinSet::single(grid.domain());
            let outside = BinSet::single(interval).difference(&domain_set);
            untargeted.extend(outside.bins().iter().copied());
        }
        Output::Values(values) => {
            for v in values {
                match grid.quantize(v) {
                    Ok(cell) => cells.push(cell),
                    Err(_) => untargeted.push(Bin::point(v)?),
                }
            }
        }
    }

    Ok(CoverageResult {
        coverpoint_id: cp.id.clone(),
        covered: BinSet::from_bins(cells),
        untargeted: BinSet::from_bins(untargeted),
        sample_count: trace.len(),
        empty_reason,
    })
}
