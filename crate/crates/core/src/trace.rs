//! Time-stamped simulation traces, CSV ingestion, interpolation and
//! threshold-event extraction.
//!
//! A [`Trace`] is an ordered sequence of samples `(time, values)` over a
//! fixed set of named signals. Between samples the signal is treated as
//! piecewise linear, which is how every downstream artifact realizes the
//! continuous view of a sampled waveform.

use crate::scalar::Real;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid trace: {0}")]
    Invalid(String),
    #[error("unknown signal {0:?}")]
    UnknownSignal(String),
    #[error("time {time} outside trace span [{start}, {end}]")]
    OutOfRange { time: String, start: String, end: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Supported trace file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
}

/// Direction of a threshold crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Rising => write!(f, "rising"),
            Direction::Falling => write!(f, "falling"),
        }
    }
}

/// A directed threshold crossing of a named signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    pub signal: String,
    pub threshold: T,
    pub direction: Direction,
}

/// Time-stamped multi-signal record of a simulation run.
///
/// Invariants: times strictly increasing, at least two samples, every value
/// row as long as the signal-name list. Traces are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    signal_names: Vec<String>,
    times: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Real> Trace<T> {
    pub fn new(signal_names: Vec<String>, samples: Vec<(T, Vec<T>)>) -> Result<Self, TraceError> {
        if samples.len() < 2 {
            return Err(TraceError::Invalid("a trace needs at least 2 samples".into()));
        }
        let mut times = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for (t, row) in samples {
            if !t.is_finite() {
                return Err(TraceError::Invalid(format!("non-finite time {t}")));
            }
            if row.len() != signal_names.len() {
                return Err(TraceError::Invalid(format!(
                    "row at t={t} has {} values for {} signals",
                    row.len(),
                    signal_names.len()
                )));
            }
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(TraceError::Invalid(format!(
                        "times must be strictly increasing ({t} after {prev})"
                    )));
                }
            }
            times.push(t);
            values.push(row);
        }
        Ok(Trace { signal_names, times, values })
    }

    /// Single-signal convenience constructor.
    pub fn of_signal(name: &str, samples: Vec<(T, T)>) -> Result<Self, TraceError> {
        Self::new(
            vec![name.to_string()],
            samples.into_iter().map(|(t, v)| (t, vec![v])).collect(),
        )
    }

    pub fn signal_names(&self) -> &[String] {
        &self.signal_names
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start_time(&self) -> T {
        self.times[0]
    }

    pub fn end_time(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn duration(&self) -> T {
        self.end_time() - self.start_time()
    }

    pub fn signal_index(&self, name: &str) -> Result<usize, TraceError> {
        self.signal_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| TraceError::UnknownSignal(name.to_string()))
    }

    pub fn value(&self, sample: usize, signal: usize) -> T {
        self.values[sample][signal]
    }

    /// All samples of one signal column.
    pub fn column(&self, signal: usize) -> impl Iterator<Item = T> + '_ {
        self.values.iter().map(move |row| row[signal])
    }

    /// Linear interpolation of `signal` at `time`; exact at sample times.
    pub fn sample_at(&self, signal: &str, time: T) -> Result<T, TraceError> {
        let col = self.signal_index(signal)?;
        self.sample_col_at(col, time)
    }

    pub(crate) fn sample_col_at(&self, col: usize, time: T) -> Result<T, TraceError> {
        if time < self.start_time() || time > self.end_time() {
            return Err(TraceError::OutOfRange {
                time: time.to_string(),
                start: self.start_time().to_string(),
                end: self.end_time().to_string(),
            });
        }
        let i = self.times.partition_point(|&t| t < time);
        if i < self.times.len() && self.times[i] == time {
            return Ok(self.values[i][col]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1][col], self.values[i][col]);
        let w = (time - t0) / (t1 - t0);
        Ok(v0 + w * (v1 - v0))
    }

    /// Times of directed threshold crossings of `event.signal`, linearly
    /// interpolated between the bracketing samples. Rising means the value
    /// passes from below the threshold to at-or-above it.
    pub fn event_times(&self, event: &Event<T>) -> Result<Vec<T>, TraceError> {
        let col = self.signal_index(&event.signal)?;
        Ok(self.scan_crossings(col, event.threshold, Some(event.direction)))
    }

    /// Crossing times in either direction, used by frequency coverage.
    pub(crate) fn crossings_either(&self, col: usize, threshold: T) -> Vec<T> {
        self.scan_crossings(col, threshold, None)
    }

    fn scan_crossings(&self, col: usize, th: T, dir: Option<Direction>) -> Vec<T> {
        let mut out = Vec::new();
        for i in 1..self.times.len() {
            let (v0, v1) = (self.values[i - 1][col], self.values[i][col]);
            let crossing = match dir {
                Some(Direction::Rising) => v0 < th && v1 >= th,
                Some(Direction::Falling) => v0 > th && v1 <= th,
                None => (v0 < th && v1 >= th) || (v0 > th && v1 <= th),
            };
            if crossing {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                out.push(t0 + (th - v0) / (v1 - v0) * (t1 - t0));
            }
        }
        out
    }

    /// Serialize in the trace CSV format: header `time,<names...>` then one
    /// comma-separated row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        write!(w, "time")?;
        for name in &self.signal_names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            write!(w, "{t}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), TraceError> {
        let mut file = std::fs::File::create(path)?;
        self.write_csv(&mut file)
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let parse_err = |line: usize, reason: String| TraceError::Parse { line, reason };
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let header = header?;
        let mut cols = header.trim_end().split(',');
        match cols.next() {
            Some("time") => {}
            other => {
                return Err(parse_err(1, format!("first column must be 'time', got {other:?}")));
            }
        }
        let signal_names: Vec<String> = cols.map(|s| s.trim().to_string()).collect();
        if signal_names.is_empty() || signal_names.iter().any(|s| s.is_empty()) {
            return Err(parse_err(1, "header must name at least one signal".into()));
        }

        let mut times: Vec<T> = Vec::new();
        let mut values: Vec<Vec<T>> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            let text = line.trim_end();
            if text.is_empty() {
                continue;
            }
            let mut fields = text.split(',');
            let t_text = fields.next().unwrap();
            let t = parse_real::<T>(t_text)
                .ok_or_else(|| parse_err(line_no, format!("malformed time {t_text:?}")))?;
            let mut row = Vec::with_capacity(signal_names.len());
            for f in fields {
                row.push(
                    parse_real::<T>(f)
                        .ok_or_else(|| parse_err(line_no, format!("malformed value {f:?}")))?,
                );
            }
            if row.len() != signal_names.len() {
                return Err(parse_err(
                    line_no,
                    format!("ragged row: {} values for {} signals", row.len(), signal_names.len()),
                ));
            }
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(parse_err(
                        line_no,
                        format!("non-increasing time ({t} after {prev})"),
                    ));
                }
            }
            times.push(t);
            values.push(row);
        }
        if times.len() < 2 {
            return Err(TraceError::Invalid("a trace needs at least 2 samples".into()));
        }
        Ok(Trace { signal_names, times, values })
    }
}

fn parse_real<T: Real>(text: &str) -> Option<T> {
    let v: f64 = text.trim().parse().ok()?;
    if !v.is_finite() {
        return None;
    }
    T::from_f64(v)
}

/// Load a trace from a file in the given format.
pub fn load_trace<T: Real>(path: &Path, format: TraceFormat) -> Result<Trace<T>, TraceError> {
    match format {
        TraceFormat::Csv => {
            let file = std::fs::File::open(path)?;
            Trace::read_csv(BufReader::new(file))
        }
    }
}
