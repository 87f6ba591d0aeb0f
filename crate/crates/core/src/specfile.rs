//! Coverpoint specification files: one TOML document per verification
//! target, listing each coverpoint's id, kind, signal, parameters, grid and
//! target bins (legal and illegal) in the textual bin syntax.
//!
//! ```toml
//! [[coverpoint]]
//! id = "vout_range"
//! kind = "range"
//! signal = "output"
//! units = "V"
//! grid = { origin = -2.5, granularity = 0.1, domain = "[-2.5:2.5]" }
//! legal = ["[-2.1:2.1]"]
//! illegal = ["(2.1:2.5]"]
//! ```
//!
//! Unknown keys are rejected, as are parameters that do not belong to the
//! coverpoint's kind.

use crate::bins::{parse_bin, BinError, BinGrid, BinSet};
use crate::coverage::{ArtifactParams, CoverKind, CoverPoint, CoverageError};
use crate::scalar::Real;
use crate::space::{SpaceError, TargetEntry, TargetSpec};
use crate::trace::{Direction, Event};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("coverpoint spec: {0}")]
    Syntax(String),
    #[error(transparent)]
    Bin(#[from] BinError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed coverpoint spec: the coverpoints to evaluate, their targets, and
/// display units per coverpoint id.
#[derive(Debug, Clone)]
pub struct CoverageSpec<T> {
    pub coverpoints: Vec<CoverPoint<T>>,
    pub targets: TargetSpec<T>,
    pub units: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    coverpoint: Vec<RawCoverPoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoverPoint {
    id: String,
    kind: String,
    signal: Option<String>,
    units: Option<String>,
    grid: RawGrid,
    #[serde(default)]
    legal: Vec<String>,
    #[serde(default)]
    illegal: Vec<String>,
    deglitching_time: Option<f64>,
    level_time: Option<f64>,
    bin_granularity: Option<f64>,
    time_granularity: Option<f64>,
    reference: Option<f64>,
    window: Option<f64>,
    halve_crossings: Option<bool>,
    event1: Option<RawEvent>,
    event2: Option<RawEvent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    origin: f64,
    granularity: f64,
    domain: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    signal: String,
    threshold: f64,
    direction: String,
}

fn lift<T: Real>(v: f64, what: &str) -> Result<T, SpecFileError> {
    if !v.is_finite() {
        return Err(SpecFileError::Syntax(format!("{what} must be finite, got {v}")));
    }
    T::from_f64(v).ok_or_else(|| SpecFileError::Syntax(format!("{what} not representable")))
}

fn event<T: Real>(raw: &RawEvent, what: &str) -> Result<Event<T>, SpecFileError> {
    let direction = match raw.direction.as_str() {
        "rising" => Direction::Rising,
        "falling" => Direction::Falling,
        other => {
            return Err(SpecFileError::Syntax(format!(
                "{what}.direction must be rising or falling, got {other:?}"
            )));
        }
    };
    Ok(Event {
        signal: raw.signal.clone(),
        threshold: lift(raw.threshold, &format!("{what}.threshold"))?,
        direction,
    })
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parse a coverpoint specification document.
pub fn parse_spec<T: Real>(text: &str) -> Result<CoverageSpec<T>, SpecFileError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| SpecFileError::Syntax(e.to_string()))?;
    if raw.coverpoint.is_empty() {
        return Err(SpecFileError::Syntax("spec declares no coverpoints".into()));
    }
    let mut coverpoints = Vec::with_capacity(raw.coverpoint.len());
    let mut targets = Vec::with_capacity(raw.coverpoint.len());
    let mut units = BTreeMap::new();

    for rcp in &raw.coverpoint {
        if !valid_id(&rcp.id) {
            return Err(SpecFileError::Syntax(format!(
                "coverpoint id {:?} must be alphanumeric with _-. only",
                rcp.id
            )));
        }
        if coverpoints.iter().any(|cp: &CoverPoint<T>| cp.id == rcp.id) {
            return Err(SpecFileError::Syntax(format!("duplicate coverpoint id {:?}", rcp.id)));
        }
        let kind = CoverKind::parse(&rcp.kind)
            .ok_or_else(|| SpecFileError::Syntax(format!("unknown kind {:?}", rcp.kind)))?;

        let opt = |v: Option<f64>, what: &str| -> Result<Option<T>, SpecFileError> {
            v.map(|x| lift(x, what)).transpose()
        };
        let events = match (&rcp.event1, &rcp.event2) {
            (Some(e1), Some(e2)) => Some((event(e1, "event1")?, event(e2, "event2")?)),
            (None, None) => None,
            _ => {
                return Err(SpecFileError::Syntax(format!(
                    "coverpoint {:?} needs both event1 and event2 or neither",
                    rcp.id
                )));
            }
        };
        let params = ArtifactParams {
            deglitching_time: opt(rcp.deglitching_time, "deglitching_time")?,
            level_time: opt(rcp.level_time, "level_time")?,
            bin_granularity: opt(rcp.bin_granularity, "bin_granularity")?,
            time_granularity: opt(rcp.time_granularity, "time_granularity")?,
            reference: opt(rcp.reference, "reference")?,
            window: opt(rcp.window, "window")?,
            halve_crossings: rcp.halve_crossings.unwrap_or(false),
            events,
        };
        let cp = CoverPoint::new(rcp.id.clone(), kind, rcp.signal.clone(), params)?;

        let domain = parse_bin::<T>(&rcp.grid.domain)?;
        let grid = BinGrid::new(
            lift(rcp.grid.origin, "grid.origin")?,
            lift(rcp.grid.granularity, "grid.granularity")?,
            domain,
        )?;
        let parse_set = |texts: &[String]| -> Result<BinSet<T>, SpecFileError> {
            let bins: Result<Vec<_>, _> = texts.iter().map(|s| parse_bin(s)).collect();
            Ok(BinSet::from_bins(bins?))
        };
        let entry = TargetEntry {
            grid,
            legal: parse_set(&rcp.legal)?,
            illegal: parse_set(&rcp.illegal)?,
        };
        if let Some(u) = &rcp.units {
            units.insert(rcp.id.clone(), u.clone());
        }
        targets.push((rcp.id.clone(), entry));
        coverpoints.push(cp);
    }
    Ok(CoverageSpec { coverpoints, targets: TargetSpec::new(targets)?, units })
}

/// Load a coverpoint specification from a file.
pub fn load_spec<T: Real>(path: &Path) -> Result<CoverageSpec<T>, SpecFileError> {
    parse_spec(&std::fs::read_to_string(path)?)
}
