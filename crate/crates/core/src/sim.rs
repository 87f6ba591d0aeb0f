//! Behavioral circuit models: rational-transfer-function LTI blocks with AC
//! (Bode) and transient analyses, and static-map models (LDO droop curves,
//! oscillator tuning curves) that settle first-order to a configured value.
//!
//! LTI models are proper rational functions `H(s) = num(s)/den(s)` given as
//! ascending-power coefficient lists. Transients integrate the controllable
//! canonical state-space realization with fixed-step 4th-order Runge-Kutta
//! from zero initial state; AC analysis evaluates `H(j2πf)` directly, so its
//! output is pure arithmetic with no integration error.

use crate::scalar::{c, Real};
use crate::trace::{Trace, TraceError};
use num_complex::Complex;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("denominator leading coefficient must be nonzero")]
    ZeroDenominator,
    #[error("improper transfer function: numerator degree {m} exceeds denominator degree {n}")]
    Improper { m: usize, n: usize },
    #[error("invalid frequency range: {0}")]
    BadFrequencyRange(String),
    #[error("time step {dt} exceeds stability guard {limit} for the fastest mode")]
    StepTooLarge { dt: String, limit: String },
    #[error("invalid time grid: {0}")]
    BadTimeGrid(String),
    #[error("input {x} outside declared domain [{lo}:{hi}]")]
    OutOfDomain { x: String, lo: String, hi: String },
    #[error("invalid waveform spec {spec:?}: {reason}")]
    BadWaveform { spec: String, reason: String },
    #[error("model config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Proper rational transfer function `H(s)` with its controllable canonical
/// state-space realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel<T> {
    /// Numerator coefficients, ascending powers of s.
    num: Vec<T>,
    /// Denominator coefficients, ascending powers of s; leading (highest
    /// power) coefficient nonzero.
    den: Vec<T>,
    /// Monic denominator a0..a_{n-1} (the companion-matrix bottom row, negated).
    monic_den: Vec<T>,
    /// Output row C of the canonical realization.
    c_row: Vec<T>,
    /// Feedthrough D.
    d: T,
    pub label: Option<String>,
}

impl<T: Real> LtiModel<T> {
    pub fn new(num: Vec<T>, den: Vec<T>, label: Option<String>) -> Result<Self, SimError> {
        let trim = |mut v: Vec<T>| {
            while v.len() > 1 && *v.last().unwrap() == T::zero() {
                v.pop();
            }
            v
        };
        let num = trim(num);
        let den = trim(den);
        let lead = *den.last().ok_or(SimError::ZeroDenominator)?;
        if lead == T::zero() || !lead.is_finite() {
            return Err(SimError::ZeroDenominator);
        }
        let n = den.len() - 1;
        let m = num.len() - 1;
        if m > n {
            return Err(SimError::Improper { m, n });
        }
        // Monic denominator and padded, scaled numerator.
        let monic_den: Vec<T> = den[..n].iter().map(|&a| a / lead).collect();
        let mut beta: Vec<T> = num.iter().map(|&b| b / lead).collect();
        beta.resize(n + 1, T::zero());
        let d = beta[n];
        let c_row: Vec<T> = (0..n).map(|i| beta[i] - d * monic_den[i]).collect();
        Ok(LtiModel { num, den, monic_den, c_row, d, label })
    }

    /// Unity passthrough `H(s) = 1`.
    pub fn unity() -> Self {
        Self::new(vec![T::one()], vec![T::one()], None).unwrap()
    }

    pub fn numerator(&self) -> &[T] {
        &self.num
    }

    pub fn denominator(&self) -> &[T] {
        &self.den
    }

    /// Number of states of the canonical realization.
    pub fn order(&self) -> usize {
        self.monic_den.len()
    }

    /// Evaluate `H(s)` at a complex frequency.
    pub fn eval(&self, s: Complex<T>) -> Complex<T> {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    /// Gain magnitude `|H(j2πf)|` at a frequency in hertz.
    pub fn gain_at(&self, f_hz: T) -> T {
        let two_pi = c::<T>(std::f64::consts::TAU);
        self.eval(Complex::new(T::zero(), two_pi * f_hz)).norm()
    }

    /// Poles of the transfer function (denominator roots, equal to the
    /// eigenvalues of the companion matrix A).
    pub fn poles(&self) -> Vec<Complex<T>> {
        let lead = *self.den.last().unwrap();
        let monic: Vec<T> = self.den.iter().map(|&a| a / lead).collect();
        polynomial_roots(&monic)
    }

    /// True when every pole has strictly negative real part.
    pub fn is_stable(&self) -> bool {
        let tol = c::<T>(1e-9);
        self.poles().iter().all(|p| p.re < -tol * (T::one() + p.norm()))
    }
}

fn poly_eval<T: Real>(coeffs_ascending: &[T], s: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &coeff in coeffs_ascending.iter().rev() {
        acc = acc * s + Complex::new(coeff, T::zero());
    }
    acc
}

/// Roots of a monic polynomial (ascending coefficients, implicit leading 1)
/// by Durand-Kerner iteration. Degrees here are small (circuit models), so
/// plain simultaneous iteration converges comfortably.
pub fn polynomial_roots<T: Real>(monic_ascending: &[T]) -> Vec<Complex<T>> {
    let n = monic_ascending.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let coeffs: Vec<Complex<T>> = monic_ascending
        .iter()
        .map(|&a| Complex::new(a, T::zero()))
        .collect();
    let eval = |z: Complex<T>| {
        let mut acc = Complex::new(T::one(), T::zero());
        for &a in coeffs[..n].iter().rev() {
            acc = acc * z + a;
        }
        acc
    };
    // Standard starting points: powers of 0.4 + 0.9i scaled by a root bound.
    let bound = monic_ascending
        .iter()
        .fold(T::one(), |m, &a| m.max(a.abs() + T::one()));
    let seed = Complex::new(c::<T>(0.4), c::<T>(0.9));
    let mut roots: Vec<Complex<T>> = (0..n)
        .map(|k| {
            let mut z = Complex::new(bound, T::zero());
            for _ in 0..k {
                z = z * seed;
            }
            z * seed
        })
        .collect();
    let tol = c::<T>(1e-13) * bound;
    for _ in 0..600 {
        let mut moved = T::zero();
        for i in 0..n {
            let mut denom = Complex::new(T::one(), T::zero());
            for j in 0..n {
                if j != i {
                    denom = denom * (roots[i] - roots[j]);
                }
            }
            if denom.norm() == T::zero() {
                continue;
            }
            let delta = eval(roots[i]) / denom;
            roots[i] = roots[i] - delta;
            moved = moved.max(delta.norm());
        }
        if moved < tol {
            break;
        }
    }
    roots
}

/// Gain/phase frequency response on a log-spaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BodePlot<T> {
    pub frequencies: Vec<T>,
    pub gain_db: Vec<T>,
    pub phase_deg: Vec<T>,
    /// Set when some pole has nonnegative real part; the plot is still valid
    /// as pure arithmetic but transient conclusions do not apply.
    pub unstable: bool,
}

/// AC analysis: evaluate the Bode plot of `H(j2πf)` between `f_lo` and
/// `f_hi` hertz on a log-spaced grid with roughly `points_per_decade` points
/// per decade (endpoints included exactly).
pub fn ac_analysis<T: Real>(
    model: &LtiModel<T>,
    f_lo: T,
    f_hi: T,
    points_per_decade: usize,
) -> Result<BodePlot<T>, SimError> {
    if !(f_lo > T::zero()) || !(f_hi > f_lo) || !f_hi.is_finite() {
        return Err(SimError::BadFrequencyRange(format!("[{f_lo}, {f_hi}]")));
    }
    if points_per_decade == 0 {
        return Err(SimError::BadFrequencyRange("points_per_decade must be >= 1".into()));
    }
    let lg_lo = f_lo.log10();
    let lg_hi = f_hi.log10();
    let decades = lg_hi - lg_lo;
    let n = ((decades * T::from_usize(points_per_decade).unwrap())
        .round()
        .to_usize()
        .unwrap_or(1))
    .max(1)
        + 1;
    let two_pi = c::<T>(std::f64::consts::TAU);
    let rad_per_deg = c::<T>(std::f64::consts::PI / 180.0);
    let mut frequencies = Vec::with_capacity(n);
    let mut gain_db = Vec::with_capacity(n);
    let mut phase_deg = Vec::with_capacity(n);
    for i in 0..n {
        let frac = T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap();
        let f = T::from_f64(10.0).unwrap().powf(lg_lo + frac * decades);
        let h = model.eval(Complex::new(T::zero(), two_pi * f));
        let mag = h.norm().max(c(1e-300));
        frequencies.push(f);
        gain_db.push(c::<T>(20.0) * mag.log10());
        phase_deg.push(h.arg() / rad_per_deg);
    }
    Ok(BodePlot { frequencies, gain_db, phase_deg, unstable: !model.is_stable() })
}

impl<T: Real> BodePlot<T> {
    /// Emit as CSV: `frequency_hz,gain_db,phase_deg`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frequency_hz,gain_db,phase_deg\n");
        for i in 0..self.frequencies.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.frequencies[i], self.gain_db[i], self.phase_deg[i]
            ));
        }
        out
    }
}

/// Input stimulus for transient analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform<T> {
    Sine { amplitude: T, frequency: T, phase: T },
    Step { amplitude: T, at: T },
    Ramp { slope: T, start: T },
    Pwl { points: Vec<(T, T)> },
}

impl<T: Real> Waveform<T> {
    pub fn sine(amplitude: T, frequency: T) -> Self {
        Waveform::Sine { amplitude, frequency, phase: T::zero() }
    }

    pub fn step(amplitude: T) -> Self {
        Waveform::Step { amplitude, at: T::zero() }
    }

    pub fn value_at(&self, t: T) -> T {
        match self {
            Waveform::Sine { amplitude, frequency, phase } => {
                *amplitude * (c::<T>(std::f64::consts::TAU) * *frequency * t + *phase).sin()
            }
            Waveform::Step { amplitude, at } => {
                if t >= *at {
                    *amplitude
                } else {
                    T::zero()
                }
            }
            Waveform::Ramp { slope, start } => {
                if t >= *start {
                    *slope * (t - *start)
                } else {
                    T::zero()
                }
            }
            Waveform::Pwl { points } => {
                if points.is_empty() {
                    return T::zero();
                }
                if t <= points[0].0 {
                    return points[0].1;
                }
                for pair in points.windows(2) {
                    let (t0, v0) = pair[0];
                    let (t1, v1) = pair[1];
                    if t <= t1 {
                        return v0 + (t - t0) / (t1 - t0) * (v1 - v0);
                    }
                }
                points.last().unwrap().1
            }
        }
    }

    /// Parse a compact spec: `sine:amp,freq_hz[,phase_rad]`, `step:amp[,at]`,
    /// `ramp:slope[,start]`, `pwl:t0:v0,t1:v1,...`.
    pub fn parse(spec: &str) -> Result<Self, SimError> {
        let err = |reason: &str| SimError::BadWaveform { spec: spec.into(), reason: reason.into() };
        let (kind, rest) = spec.split_once(':').ok_or_else(|| err("missing ':'"))?;
        let nums = |text: &str| -> Result<Vec<T>, SimError> {
            text.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .and_then(T::from_f64)
                        .ok_or_else(|| err(&format!("bad number {s:?}")))
                })
                .collect()
        };
        match kind {
            "sine" => {
                let v = nums(rest)?;
                match v.len() {
                    2 => Ok(Waveform::Sine { amplitude: v[0], frequency: v[1], phase: T::zero() }),
                    3 => Ok(Waveform::Sine { amplitude: v[0], frequency: v[1], phase: v[2] }),
                    _ => Err(err("sine takes amp,freq[,phase]")),
                }
            }
            "step" => {
                let v = nums(rest)?;
                match v.len() {
                    1 => Ok(Waveform::Step { amplitude: v[0], at: T::zero() }),
                    2 => Ok(Waveform::Step { amplitude: v[0], at: v[1] }),
                    _ => Err(err("step takes amp[,at]")),
                }
            }
            "ramp" => {
                let v = nums(rest)?;
                match v.len() {
                    1 => Ok(Waveform::Ramp { slope: v[0], start: T::zero() }),
                    2 => Ok(Waveform::Ramp { slope: v[0], start: v[1] }),
                    _ => Err(err("ramp takes slope[,start]")),
                }
            }
            "pwl" => {
                let mut points = Vec::new();
                for part in rest.split(',') {
                    let (ts, vs) = part.split_once(':').ok_or_else(|| err("pwl points are t:v"))?;
                    let pt = nums(ts)?[0];
                    let pv = nums(vs)?[0];
                    if let Some(&(prev, _)) = points.last() {
                        if pt <= prev {
                            return Err(err("pwl times must increase"));
                        }
                    }
                    points.push((pt, pv));
                }
                if points.len() < 2 {
                    return Err(err("pwl needs at least 2 points"));
                }
                Ok(Waveform::Pwl { points })
            }
            _ => Err(err("kind must be sine, step, ramp or pwl")),
        }
    }
}

/// Fixed-step RK4 transient of an LTI model from zero initial state.
///
/// The returned trace has signals `input` and `output`. The step is guarded
/// against the fastest mode: `dt` must not exceed `0.1 / max |pole|`.
pub fn transient<T: Real>(
    model: &LtiModel<T>,
    input: &Waveform<T>,
    dt: T,
    duration: T,
) -> Result<Trace<T>, SimError> {
    if !(dt > T::zero()) || !(duration > c::<T>(10.0) * dt) {
        return Err(SimError::BadTimeGrid(format!(
            "need dt > 0 and duration > 10*dt, got dt={dt} duration={duration}"
        )));
    }
    let n = model.order();
    if n > 0 {
        let max_eig = model.poles().iter().fold(T::zero(), |m, p| m.max(p.norm()));
        if max_eig > T::zero() {
            let limit = c::<T>(0.1) / max_eig;
            if dt > limit {
                return Err(SimError::StepTooLarge {
                    dt: dt.to_string(),
                    limit: limit.to_string(),
                });
            }
        }
    }

    let steps = ((duration / dt) + c(1e-9)).floor().to_usize().unwrap_or(0);
    let mut x = vec![T::zero(); n];
    let mut samples = Vec::with_capacity(steps + 1);
    let half = dt / c(2.0);
    let sixth = dt / c(6.0);
    let two = c::<T>(2.0);

    let deriv = |x: &[T], u: T, out: &mut [T]| {
        for i in 0..n.saturating_sub(1) {
            out[i] = x[i + 1];
        }
        if n > 0 {
            let mut acc = u;
            for (a, xi) in model.monic_den.iter().zip(x) {
                acc = acc - *a * *xi;
            }
            out[n - 1] = acc;
        }
    };
    let output = |x: &[T], u: T| {
        let mut y = model.d * u;
        for (ci, xi) in model.c_row.iter().zip(x) {
            y = y + *ci * *xi;
        }
        y
    };

    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut xt = vec![T::zero(); n];

    for step in 0..=steps {
        let t = T::from_usize(step).unwrap() * dt;
        let u = input.value_at(t);
        samples.push((t, vec![u, output(&x, u)]));
        if step == steps {
            break;
        }
        let u_mid = input.value_at(t + half);
        let u_end = input.value_at(t + dt);
        deriv(&x, u, &mut k1);
        for i in 0..n {
            xt[i] = x[i] + half * k1[i];
        }
        deriv(&xt, u_mid, &mut k2);
        for i in 0..n {
            xt[i] = x[i] + half * k2[i];
        }
        deriv(&xt, u_mid, &mut k3);
        for i in 0..n {
            xt[i] = x[i] + dt * k3[i];
        }
        deriv(&xt, u_end, &mut k4);
        for i in 0..n {
            x[i] = x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
    }
    Ok(Trace::new(vec!["input".into(), "output".into()], samples)?)
}

/// Static input-to-output map shapes for behavioral case-study models.
#[derive(Debug, Clone, PartialEq)]
pub enum StaticMap<T> {
    /// Piecewise-linear through the given (x, y) points.
    Pwl { points: Vec<(T, T)> },
    /// Polynomial with ascending coefficients.
    Polynomial { coeffs: Vec<T> },
    /// The classic 1-D optimization test map `(6x-2)^2 sin(12x-4)`.
    Forrester,
    /// Regulator droop curve `v_nominal - r_linear*x - droop*x/(x+knee)`.
    LdoDroop { v_nominal: T, r_linear: T, droop: T, knee: T },
}

impl<T: Real> StaticMap<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            StaticMap::Pwl { points } => {
                if x <= points[0].0 {
                    return points[0].1;
                }
                for pair in points.windows(2) {
                    let (x0, y0) = pair[0];
                    let (x1, y1) = pair[1];
                    if x <= x1 {
                        return y0 + (x - x0) / (x1 - x0) * (y1 - y0);
                    }
                }
                points.last().unwrap().1
            }
            StaticMap::Polynomial { coeffs } => {
                let mut acc = T::zero();
                for &a in coeffs.iter().rev() {
                    acc = acc * x + a;
                }
                acc
            }
            StaticMap::Forrester => {
                let six_x = c::<T>(6.0) * x - c(2.0);
                six_x * six_x * (c::<T>(12.0) * x - c(4.0)).sin()
            }
            StaticMap::LdoDroop { v_nominal, r_linear, droop, knee } => {
                *v_nominal - *r_linear * x - *droop * x / (x + *knee)
            }
        }
    }
}

/// How a static-map model's output manifests in a transient trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SettleBehavior {
    /// Output settles first-order to `map(x)` (a voltage level, say).
    #[default]
    Level,
    /// Output is a unit sinusoid at `map(x)` hertz, with a first-order
    /// startup envelope; the mapped value manifests as a frequency.
    Oscillate,
}

/// A black-box behavioral model: a static map over a declared input domain,
/// with a first-order smoothing time constant so transient traces settle to
/// the mapped value (making level coverage applicable).
#[derive(Debug, Clone, PartialEq)]
pub struct StaticMapModel<T> {
    pub map: StaticMap<T>,
    pub domain: (T, T),
    /// Smoothing time constant in seconds; zero means the trace is constant.
    pub tau: T,
    pub behavior: SettleBehavior,
    pub label: Option<String>,
}

impl<T: Real> StaticMapModel<T> {
    pub fn new(map: StaticMap<T>, domain: (T, T), tau: T, label: Option<String>) -> Result<Self, SimError> {
        if !(domain.1 > domain.0) {
            return Err(SimError::Config(format!(
                "domain must have positive width, got [{}:{}]",
                domain.0, domain.1
            )));
        }
        if tau < T::zero() || !tau.is_finite() {
            return Err(SimError::Config(format!("tau must be >= 0, got {tau}")));
        }
        Ok(StaticMapModel { map, domain, tau, behavior: SettleBehavior::Level, label })
    }

    pub fn oscillating(mut self) -> Self {
        self.behavior = SettleBehavior::Oscillate;
        self
    }

    /// Evaluate the map at an input value inside the declared domain.
    pub fn eval_static(&self, x: T) -> Result<T, SimError> {
        if x < self.domain.0 || x > self.domain.1 {
            return Err(SimError::OutOfDomain {
                x: x.to_string(),
                lo: self.domain.0.to_string(),
                hi: self.domain.1.to_string(),
            });
        }
        Ok(self.map.eval(x))
    }

    /// Trace realizing the model's behavior at input `x`: either settling
    /// first-order from zero to `map(x)` with time constant `tau`, or (for
    /// oscillating models) a unit sinusoid at `map(x)` hertz under a
    /// first-order startup envelope. Signals are `input` (constant x) and
    /// `output`.
    pub fn transient_static(&self, x: T, dt: T, duration: T) -> Result<Trace<T>, SimError> {
        if !(dt > T::zero()) || !(duration > c::<T>(10.0) * dt) {
            return Err(SimError::BadTimeGrid(format!(
                "need dt > 0 and duration > 10*dt, got dt={dt} duration={duration}"
            )));
        }
        let target = self.eval_static(x)?;
        let steps = ((duration / dt) + c(1e-9)).floor().to_usize().unwrap_or(0);
        let envelope = |t: T| {
            if self.tau == T::zero() {
                T::one()
            } else {
                T::one() - (-t / self.tau).exp()
            }
        };
        let samples = (0..=steps)
            .map(|k| {
                let t = T::from_usize(k).unwrap() * dt;
                let y = match self.behavior {
                    SettleBehavior::Level => target * envelope(t),
                    SettleBehavior::Oscillate => {
                        envelope(t) * (c::<T>(std::f64::consts::TAU) * target * t).sin()
                    }
                };
                (t, vec![x, y])
            })
            .collect();
        Ok(Trace::new(vec!["input".into(), "output".into()], samples)?)
    }
}

/// A configured model of either kind, plus display units for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub kind: ModelKind<T>,
    pub input_unit: String,
    pub output_unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind<T> {
    Lti(LtiModel<T>),
    Static(StaticMapModel<T>),
}

impl<T: Real> Model<T> {
    pub fn label(&self) -> &str {
        let label = match &self.kind {
            ModelKind::Lti(m) => &m.label,
            ModelKind::Static(m) => &m.label,
        };
        label.as_deref().unwrap_or("unnamed")
    }
}

// --- model config file ------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    label: Option<String>,
    #[serde(default)]
    input_unit: Option<String>,
    #[serde(default)]
    output_unit: Option<String>,
    // LTI fields.
    num: Option<Vec<f64>>,
    den: Option<Vec<f64>>,
    // Static-map fields.
    domain: Option<[f64; 2]>,
    tau: Option<f64>,
    behavior: Option<String>,
    map: Option<RawMap>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    kind: String,
    points: Option<Vec<[f64; 2]>>,
    coeffs: Option<Vec<f64>>,
    v_nominal: Option<f64>,
    r_linear: Option<f64>,
    droop: Option<f64>,
    knee: Option<f64>,
}

fn lift<T: Real>(v: f64) -> Result<T, SimError> {
    if !v.is_finite() {
        return Err(SimError::Config(format!("non-finite value {v}")));
    }
    T::from_f64(v).ok_or_else(|| SimError::Config(format!("value {v} not representable")))
}

fn lift_vec<T: Real>(v: &[f64]) -> Result<Vec<T>, SimError> {
    v.iter().map(|&x| lift(x)).collect()
}

/// Parse a model config in TOML form. Unknown keys are rejected.
pub fn parse_model<T: Real>(text: &str) -> Result<Model<T>, SimError> {
    let raw: RawModel = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    let missing = |field: &str| SimError::Config(format!("{} model requires {field}", raw.kind));
    let kind = match raw.kind.as_str() {
        "lti" => {
            let num = lift_vec(raw.num.as_deref().ok_or_else(|| missing("num"))?)?;
            let den = lift_vec(raw.den.as_deref().ok_or_else(|| missing("den"))?)?;
            if raw.map.is_some() || raw.domain.is_some() || raw.tau.is_some() || raw.behavior.is_some() {
                return Err(SimError::Config("lti model does not take map/domain/tau/behavior".into()));
            }
            ModelKind::Lti(LtiModel::new(num, den, raw.label)?)
        }
        "static" => {
            let domain = raw.domain.ok_or_else(|| missing("domain"))?;
            let raw_map = raw.map.ok_or_else(|| missing("map"))?;
            if raw.num.is_some() || raw.den.is_some() {
                return Err(SimError::Config("static model does not take num/den".into()));
            }
            let map = match raw_map.kind.as_str() {
                "pwl" => {
                    let pts = raw_map.points.ok_or_else(|| missing("map.points"))?;
                    if pts.len() < 2 {
                        return Err(SimError::Config("pwl map needs at least 2 points".into()));
                    }
                    let mut points = Vec::with_capacity(pts.len());
                    for p in pts {
                        if let Some(&(prev, _)) = points.last() {
                            let x: T = lift(p[0])?;
                            if x <= prev {
                                return Err(SimError::Config("pwl x values must increase".into()));
                            }
                        }
                        points.push((lift(p[0])?, lift(p[1])?));
                    }
                    StaticMap::Pwl { points }
                }
                "polynomial" => StaticMap::Polynomial {
                    coeffs: lift_vec(raw_map.coeffs.as_deref().ok_or_else(|| missing("map.coeffs"))?)?,
                },
                "forrester" => StaticMap::Forrester,
                "ldo_droop" => StaticMap::LdoDroop {
                    v_nominal: lift(raw_map.v_nominal.ok_or_else(|| missing("map.v_nominal"))?)?,
                    r_linear: lift(raw_map.r_linear.ok_or_else(|| missing("map.r_linear"))?)?,
                    droop: lift(raw_map.droop.ok_or_else(|| missing("map.droop"))?)?,
                    knee: lift(raw_map.knee.ok_or_else(|| missing("map.knee"))?)?,
                },
                other => return Err(SimError::Config(format!("unknown map kind {other:?}"))),
            };
            let model = StaticMapModel::new(
                map,
                (lift(domain[0])?, lift(domain[1])?),
                lift(raw.tau.unwrap_or(0.0))?,
                raw.label,
            )?;
            let model = match raw.behavior.as_deref() {
                None | Some("level") => model,
                Some("oscillate") => model.oscillating(),
                Some(other) => {
                    return Err(SimError::Config(format!(
                        "behavior must be level or oscillate, got {other:?}"
                    )));
                }
            };
            ModelKind::Static(model)
        }
        other => return Err(SimError::Config(format!("unknown model kind {other:?}"))),
    };
    Ok(Model {
        kind,
        input_unit: raw.input_unit.unwrap_or_default(),
        output_unit: raw.output_unit.unwrap_or_default(),
    })
}

pub fn load_model<T: Real>(path: &Path) -> Result<Model<T>, SimError> {
    parse_model(&std::fs::read_to_string(path)?)
}
