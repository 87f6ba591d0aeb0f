//! Coverage-space accounting: targets, accumulated covered space, coverage
//! gap and bug reporting, persisted across test runs.
//!
//! The target of a coverpoint is a grid plus two disjoint bin sets: `legal`
//! (bins the design is expected to visit) and `illegal` (forbidden bins whose
//! coverage signals a bug). Every test accumulates the grid cells it covered
//! into a [`CoverageDatabase`]; a [`GapReport`] then derives
//!
//! * the coverage gap `legal \ covered`,
//! * bug hits `covered ∩ illegal` with the contributing test ids.
//!
//! The database file is line-oriented text with a trailing SHA-256 checksum
//! so it stays human-diffable while corruption is detected on restore.

use crate::bins::{Bin, BinGrid, BinSet, parse_bin};
use crate::coverage::CoverageResult;
use crate::scalar::Real;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("unknown coverpoint {0:?}")]
    UnknownCoverPoint(String),
    #[error("invalid target for coverpoint {id:?}: {reason}")]
    InvalidTarget { id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt database: {0}")]
    Corrupt(String),
    #[error("database {0} is locked by another run")]
    Locked(PathBuf),
}

/// Per-coverpoint coverage target: the quantization grid, the legal bins the
/// design should visit, and the illegal bins it must not.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEntry<T> {
    pub grid: BinGrid<T>,
    pub legal: BinSet<T>,
    pub illegal: BinSet<T>,
}

/// Targets for a set of coverpoints, keyed by coverpoint id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetSpec<T> {
    entries: BTreeMap<String, TargetEntry<T>>,
}

impl<T: Real> TargetSpec<T> {
    pub fn new(
        entries: impl IntoIterator<Item = (String, TargetEntry<T>)>,
    ) -> Result<Self, SpaceError> {
        let mut map = BTreeMap::new();
        for (id, entry) in entries {
            let domain = BinSet::single(entry.grid.domain());
            if !entry.legal.intersect(&entry.illegal).is_empty() {
                return Err(SpaceError::InvalidTarget {
                    id,
                    reason: "legal and illegal bins overlap".into(),
                });
            }
            for (name, set) in [("legal", &entry.legal), ("illegal", &entry.illegal)] {
                if !set.difference(&domain).is_empty() {
                    return Err(SpaceError::InvalidTarget {
                        id,
                        reason: format!("{name} bins extend outside the grid domain"),
                    });
                }
            }
            map.insert(id, entry);
        }
        Ok(TargetSpec { entries: map })
    }

    pub fn get(&self, id: &str) -> Option<&TargetEntry<T>> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &TargetEntry<T>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Identity and provenance of one accumulated test.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestMeta {
    pub id: String,
    pub timestamp: String,
    /// Input parameters applied during the test, logged verbatim.
    pub inputs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub meta: TestMeta,
    /// Grid cells hit per coverpoint during this test.
    pub cells: BTreeMap<String, Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
struct CoverageRecord<T> {
    grid: BinGrid<T>,
    hit_counts: BTreeMap<i64, u64>,
    untargeted: BinSet<T>,
}

/// Accumulated coverage per coverpoint plus the log of contributing tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageDatabase<T> {
    records: BTreeMap<String, CoverageRecord<T>>,
    tests: Vec<TestRecord>,
}

impl<T: Real> CoverageDatabase<T> {
    pub fn new(spec: &TargetSpec<T>) -> Self {
        CoverageDatabase {
            records: spec
                .iter()
                .map(|(id, entry)| {
                    (
                        id.clone(),
                        CoverageRecord {
                            grid: entry.grid,
                            hit_counts: BTreeMap::new(),
                            untargeted: BinSet::empty(),
                        },
                    )
                })
                .collect(),
            tests: Vec::new(),
        }
    }

    pub fn coverpoint_ids(&self) -> impl Iterator<Item = &String> {
        self.records.keys()
    }

    pub fn tests(&self) -> &[TestRecord] {
        &self.tests
    }

    /// Union of all cells with a hit count of at least one.
    pub fn covered(&self, coverpoint: &str) -> Result<BinSet<T>, SpaceError> {
        let rec = self
            .records
            .get(coverpoint)
            .ok_or_else(|| SpaceError::UnknownCoverPoint(coverpoint.to_string()))?;
        Ok(BinSet::from_bins(rec.hit_counts.keys().map(|&i| rec.grid.cell(i))))
    }

    pub fn hit_count(&self, coverpoint: &str, cell: i64) -> u64 {
        self.records
            .get(coverpoint)
            .and_then(|r| r.hit_counts.get(&cell).copied())
            .unwrap_or(0)
    }

    pub fn untargeted(&self, coverpoint: &str) -> Option<&BinSet<T>> {
        self.records.get(coverpoint).map(|r| &r.untargeted)
    }

    /// Quantization grid of a coverpoint, as recorded at database creation.
    pub fn grid(&self, coverpoint: &str) -> Option<&BinGrid<T>> {
        self.records.get(coverpoint).map(|r| &r.grid)
    }

    /// Add empty records for any spec coverpoints the database does not know
    /// yet (a spec may grow between runs against the same database).
    pub fn ensure_targets(&mut self, spec: &TargetSpec<T>) {
        for (id, entry) in spec.iter() {
            self.records.entry(id.clone()).or_insert_with(|| CoverageRecord {
                grid: entry.grid,
                hit_counts: BTreeMap::new(),
                untargeted: BinSet::empty(),
            });
        }
    }

    /// Fold one test's results into the database.
    ///
    /// Atomic per test: either all results are applied and the test is
    /// logged, or (on an unknown coverpoint) nothing changes. Accumulating
    /// again under an id already in the log merges into that test's record,
    /// so a multi-evaluation run can keep pushing results while appearing as
    /// one test.
    pub fn accumulate(
        &mut self,
        meta: TestMeta,
        results: &[CoverageResult<T>],
    ) -> Result<(), SpaceError> {
        for r in results {
            if !self.records.contains_key(&r.coverpoint_id) {
                return Err(SpaceError::UnknownCoverPoint(r.coverpoint_id.clone()));
            }
        }
        let mut cells_by_cp: BTreeMap<String, Vec<i64>> = BTreeMap::new();
        for r in results {
            let rec = self.records.get_mut(&r.coverpoint_id).unwrap();
            let mut cells = Vec::new();
            for bin in r.covered.bins() {
                cells.extend(rec.grid.cells_intersecting(bin));
            }
            cells.sort_unstable();
            cells.dedup();
            for &i in &cells {
                *rec.hit_counts.entry(i).or_insert(0) += 1;
            }
            rec.untargeted = rec.untargeted.union(&r.untargeted);
            cells_by_cp.entry(r.coverpoint_id.clone()).or_default().extend(cells);
        }
        match self.tests.iter_mut().find(|t| t.meta.id == meta.id) {
            Some(existing) => {
                existing.meta.inputs.extend(meta.inputs);
                for (cp, cells) in cells_by_cp {
                    let slot = existing.cells.entry(cp).or_default();
                    slot.extend(cells);
                    slot.sort_unstable();
                    slot.dedup();
                }
            }
            None => self.tests.push(TestRecord { meta, cells: cells_by_cp }),
        }
        Ok(())
    }
}

/// Per-coverpoint gap/bug summary derived from a database and a target spec.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEntry<T> {
    pub gap: BinSet<T>,
    /// measure(gap) / measure(legal); zero when nothing is targeted.
    pub gap_fraction: T,
    pub covered: BinSet<T>,
    pub bug_hits: BinSet<T>,
    pub bug_tests: Vec<String>,
    pub untargeted: BinSet<T>,
    pub legal_measure: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport<T> {
    pub entries: BTreeMap<String, GapEntry<T>>,
}

impl<T: Real> GapReport<T> {
    pub fn has_bugs(&self) -> bool {
        self.entries.values().any(|e| !e.bug_hits.is_empty())
    }

    /// Human-readable rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (id, e) in &self.entries {
            let covered_pct = (T::one() - e.gap_fraction) * crate::scalar::c(100.0);
            let _ = writeln!(out, "coverpoint {id}");
            let _ = writeln!(out, "  covered        {} ({covered_pct:.1}% of legal)", e.covered);
            let _ = writeln!(out, "  gap            {} (fraction {:.4})", e.gap, e.gap_fraction);
            if !e.bug_hits.is_empty() {
                let _ = writeln!(out, "  BUG hits       {} by tests {:?}", e.bug_hits, e.bug_tests);
            }
            if !e.untargeted.is_empty() {
                let _ = writeln!(out, "  untargeted     {}", e.untargeted);
            }
        }
        out
    }

    /// Machine-readable key-value rendering, one record per line.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        for (id, e) in &self.entries {
            let _ = writeln!(out, "coverpoint={id} gap_fraction={}", e.gap_fraction);
            let _ = writeln!(out, "coverpoint={id} gap={}", e.gap);
            let _ = writeln!(out, "coverpoint={id} covered={}", e.covered);
            let _ = writeln!(out, "coverpoint={id} bug_hits={}", e.bug_hits);
            let _ = writeln!(out, "coverpoint={id} bug_tests={}", e.bug_tests.join(","));
            if !e.untargeted.is_empty() {
                let _ = writeln!(out, "coverpoint={id} untargeted={}", e.untargeted);
            }
        }
        out
    }
}

/// Derive the gap report: `gap = legal \ covered`, `bugs = covered ∩ illegal`.
pub fn gap_report<T: Real>(
    db: &CoverageDatabase<T>,
    spec: &TargetSpec<T>,
) -> Result<GapReport<T>, SpaceError> {
    let mut entries = BTreeMap::new();
    for (id, target) in spec.iter() {
        let covered = db.covered(id)?;
        let gap = target.legal.difference(&covered);
        let legal_measure = target.legal.measure();
        let gap_fraction = if legal_measure > T::zero() {
            gap.measure() / legal_measure
        } else {
            T::zero()
        };
        let bug_hits = covered.intersect(&target.illegal);
        let mut bug_tests = Vec::new();
        if !bug_hits.is_empty() {
            for test in db.tests() {
                let hit = test.cells.get(id).is_some_and(|cells| {
                    cells.iter().any(|&i| {
                        let cell = target.grid.cell(i);
                        target.illegal.bins().iter().any(|b| b.intersect(&cell).is_some())
                    })
                });
                if hit {
                    bug_tests.push(test.meta.id.clone());
                }
            }
        }
        entries.insert(
            id.clone(),
            GapEntry {
                gap,
                gap_fraction,
                covered,
                bug_hits,
                bug_tests,
                untargeted: db.untargeted(id).cloned().unwrap_or_default(),
                legal_measure,
            },
        );
    }
    Ok(GapReport { entries })
}

const DB_HEADER: &str = "anacov-db v1";

/// Serialize the database to its line-oriented text form (checksum included).
pub fn database_to_string<T: Real>(db: &CoverageDatabase<T>) -> String {
    let mut body = String::new();
    let _ = writeln!(body, "{DB_HEADER}");
    for (id, rec) in &db.records {
        let _ = writeln!(body, "coverpoint {id}");
        let d = rec.grid.domain();
        let _ = writeln!(body, "grid {} {} {}", rec.grid.origin(), rec.grid.granularity(), d);
        for (cell, count) in &rec.hit_counts {
            let _ = writeln!(body, "cell {cell} {count}");
        }
        if !rec.untargeted.is_empty() {
            let _ = write!(body, "untargeted");
            for b in rec.untargeted.bins() {
                let _ = write!(body, " {b}");
            }
            let _ = writeln!(body);
        }
        let _ = writeln!(body, "end");
    }
    for test in &db.tests {
        let _ = writeln!(body, "test {}", test.meta.id);
        let _ = writeln!(body, "time {}", test.meta.timestamp);
        for (k, v) in &test.meta.inputs {
            let _ = writeln!(body, "input {k} {v}");
        }
        for (cp, cells) in &test.cells {
            let _ = write!(body, "hits {cp}");
            for i in cells {
                let _ = write!(body, " {i}");
            }
            let _ = writeln!(body);
        }
        let _ = writeln!(body, "end");
    }
    let digest = Sha256::digest(body.as_bytes());
    let _ = writeln!(body, "checksum sha256 {digest:x}");
    body
}

/// Write the database to `path` atomically (temp file + rename).
pub fn persist<T: Real>(db: &CoverageDatabase<T>, path: &Path) -> Result<(), SpaceError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, database_to_string(db))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse a database from its text form, verifying the trailing checksum.
pub fn database_from_str<T: Real>(text: &str) -> Result<CoverageDatabase<T>, SpaceError> {
    let corrupt = |reason: String| SpaceError::Corrupt(reason);
    let checksum_start = text
        .trim_end_matches('\n')
        .rfind("checksum sha256 ")
        .ok_or_else(|| corrupt("missing checksum line".into()))?;
    let body = &text[..checksum_start];
    let stated = text[checksum_start..]
        .trim_end()
        .strip_prefix("checksum sha256 ")
        .ok_or_else(|| corrupt("malformed checksum line".into()))?;
    let digest = format!("{:x}", Sha256::digest(body.as_bytes()));
    if digest != stated {
        return Err(corrupt("checksum mismatch".into()));
    }

    let mut lines = body.lines().enumerate();
    let bad = |line: usize, reason: &str| corrupt(format!("line {}: {reason}", line + 1));
    match lines.next() {
        Some((_, DB_HEADER)) => {}
        other => return Err(corrupt(format!("unsupported header {other:?}"))),
    }

    let mut db = CoverageDatabase { records: BTreeMap::new(), tests: Vec::new() };
    let mut current_cp: Option<(String, Option<BinGrid<T>>, BTreeMap<i64, u64>, BinSet<T>)> = None;
    let mut current_test: Option<TestRecord> = None;

    for (ln, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let (word, rest) = line.split_once(' ').unwrap_or((line, ""));
        match word {
            "coverpoint" => current_cp = Some((rest.to_string(), None, BTreeMap::new(), BinSet::empty())),
            "grid" => {
                let cp = current_cp.as_mut().ok_or_else(|| bad(ln, "grid outside coverpoint"))?;
                let mut parts = rest.split_whitespace();
                let origin: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(ln, "bad grid origin"))?;
                let gran: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(ln, "bad grid granularity"))?;
                let domain = parts
                    .next()
                    .and_then(|s| parse_bin::<T>(s).ok())
                    .ok_or_else(|| bad(ln, "bad grid domain"))?;
                let grid = BinGrid::new(
                    T::from_f64(origin).unwrap(),
                    T::from_f64(gran).unwrap(),
                    domain,
                )
                .map_err(|e| bad(ln, &e.to_string()))?;
                cp.1 = Some(grid);
            }
            "cell" => {
                let cp = current_cp.as_mut().ok_or_else(|| bad(ln, "cell outside coverpoint"))?;
                let mut parts = rest.split_whitespace();
                let idx: i64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(ln, "bad cell index"))?;
                let count: u64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(ln, "bad cell count"))?;
                cp.2.insert(idx, count);
            }
            "untargeted" => {
                let cp = current_cp.as_mut().ok_or_else(|| bad(ln, "untargeted outside coverpoint"))?;
                let bins: Result<Vec<Bin<T>>, _> = rest.split_whitespace().map(parse_bin).collect();
                cp.3 = BinSet::from_bins(bins.map_err(|e| bad(ln, &e.to_string()))?);
            }
            "test" => current_test = Some(TestRecord {
                meta: TestMeta { id: rest.to_string(), ..TestMeta::default() },
                cells: BTreeMap::new(),
            }),
            "time" => {
                let t = current_test.as_mut().ok_or_else(|| bad(ln, "time outside test"))?;
                t.meta.timestamp = rest.to_string();
            }
            "input" => {
                let t = current_test.as_mut().ok_or_else(|| bad(ln, "input outside test"))?;
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                t.meta.inputs.push((k.to_string(), v.to_string()));
            }
            "hits" => {
                let t = current_test.as_mut().ok_or_else(|| bad(ln, "hits outside test"))?;
                let mut parts = rest.split_whitespace();
                let cp = parts.next().ok_or_else(|| bad(ln, "hits without coverpoint"))?;
                let cells: Result<Vec<i64>, _> = parts.map(|s| s.parse()).collect();
                t.cells.insert(cp.to_string(), cells.map_err(|_| bad(ln, "bad cell index"))?);
            }
            "end" => {
                if let Some(t) = current_test.take() {
                    db.tests.push(t);
                } else if let Some((id, grid, hit_counts, untargeted)) = current_cp.take() {
                    let grid = grid.ok_or_else(|| bad(ln, "coverpoint without grid"))?;
                    db.records.insert(id, CoverageRecord { grid, hit_counts, untargeted });
                } else {
                    return Err(bad(ln, "stray end"));
                }
            }
            other => return Err(bad(ln, &format!("unknown record {other:?}"))),
        }
    }
    if current_cp.is_some() || current_test.is_some() {
        return Err(corrupt("unterminated record".into()));
    }
    Ok(db)
}

/// Read a database back from `path`, verifying its checksum.
pub fn restore<T: Real>(path: &Path) -> Result<CoverageDatabase<T>, SpaceError> {
    let text = std::fs::read_to_string(path)?;
    database_from_str(&text)
}

/// Exclusive lock file guarding a database while a run accumulates into it.
/// The lock is released when the guard drops.
pub struct DbLock {
    path: PathBuf,
}

impl DbLock {
    pub fn acquire(db_path: &Path) -> Result<Self, SpaceError> {
        let path = db_path.with_extension("lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DbLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(SpaceError::Locked(db_path.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DbLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bins::parse_bin;
    use crate::coverage::CoverageResult;

    fn b(s: &str) -> Bin<f64> {
        parse_bin(s).unwrap()
    }

    fn simple_spec() -> TargetSpec<f64> {
        TargetSpec::new([(
            "cp".to_string(),
            TargetEntry {
                grid: BinGrid::new(0.0, 1.0, b("[0:10]")).unwrap(),
                legal: BinSet::single(b("[0:9)")),
                illegal: BinSet::single(b("[9:10)")),
            },
        )])
        .unwrap()
    }

    fn result(covered: &[&str]) -> CoverageResult<f64> {
        CoverageResult {
            coverpoint_id: "cp".into(),
            covered: BinSet::from_bins(covered.iter().map(|s| b(s))),
            untargeted: BinSet::empty(),
            sample_count: 10,
            empty_reason: None,
        }
    }

    fn meta(id: &str) -> TestMeta {
        TestMeta { id: id.into(), timestamp: "2026-01-01T00:00:00Z".into(), inputs: vec![] }
    }

    #[test]
    fn accumulate_counts_and_merges() {
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        db.accumulate(meta("t1"), &[result(&["[1:1.5)"])]).unwrap();
        assert_eq!(db.covered("cp").unwrap(), BinSet::single(b("[1:2)")));
        assert_eq!(db.hit_count("cp", 1), 1);

        db.accumulate(meta("t2"), &[result(&["[1:1.5)"])]).unwrap();
        assert_eq!(db.covered("cp").unwrap(), BinSet::single(b("[1:2)")));
        assert_eq!(db.hit_count("cp", 1), 2);

        db.accumulate(meta("t3"), &[result(&["[4:5)"])]).unwrap();
        assert_eq!(db.covered("cp").unwrap(), BinSet::from_bins([b("[1:2)"), b("[4:5)")]));
        assert_eq!(db.tests().len(), 3);
    }

    #[test]
    fn accumulate_same_test_id_merges_into_one_record() {
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        db.accumulate(meta("run"), &[result(&["[1:2)"])]).unwrap();
        db.accumulate(meta("run"), &[result(&["[3:4)"])]).unwrap();
        assert_eq!(db.tests().len(), 1);
        assert_eq!(db.tests()[0].cells["cp"], vec![1, 3]);
    }

    #[test]
    fn accumulate_unknown_coverpoint_changes_nothing() {
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        let mut bad = result(&["[1:2)"]);
        bad.coverpoint_id = "nope".into();
        let err = db.accumulate(meta("t"), &[result(&["[0:1)"]), bad]).unwrap_err();
        assert!(matches!(err, SpaceError::UnknownCoverPoint(_)));
        assert!(db.covered("cp").unwrap().is_empty());
        assert!(db.tests().is_empty());
    }

    #[test]
    fn gap_report_measures_and_bugs() {
        let spec = TargetSpec::new([(
            "cp".to_string(),
            TargetEntry {
                grid: BinGrid::new(0.0, 1.0, b("[0:10]")).unwrap(),
                legal: BinSet::single(b("[0:10]")),
                illegal: BinSet::empty(),
            },
        )])
        .unwrap();
        let mut db = CoverageDatabase::new(&spec);
        db.accumulate(meta("t1"), &[result(&["[2:3)"])]).unwrap();
        let report = gap_report(&db, &spec).unwrap();
        let e = &report.entries["cp"];
        assert_eq!(e.gap.measure(), 9.0);
        assert_eq!(e.gap_fraction, 0.9);
        assert!(e.bug_hits.is_empty());
    }

    #[test]
    fn gap_report_flags_bug_tests() {
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        db.accumulate(meta("good"), &[result(&["[1:2)"])]).unwrap();
        db.accumulate(meta("bad"), &[result(&["[9:10)"])]).unwrap();
        let report = gap_report(&db, &spec).unwrap();
        let e = &report.entries["cp"];
        assert_eq!(e.bug_hits, BinSet::single(b("[9:10)")));
        assert_eq!(e.bug_tests, vec!["bad".to_string()]);
        assert!(report.has_bugs());
    }

    #[test]
    fn covered_superset_of_legal_gives_zero_gap() {
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        db.accumulate(meta("t"), &[result(&["[0:10]"])]).unwrap();
        let report = gap_report(&db, &spec).unwrap();
        assert!(report.entries["cp"].gap.is_empty());
        assert_eq!(report.entries["cp"].gap_fraction, 0.0);
    }

    #[test]
    fn accumulation_is_order_independent() {
        let spec = simple_spec();
        let runs = [result(&["[0:1)"]), result(&["[3:5)"]), result(&["[1:2)", "[8:9)"])];
        let mut forward = CoverageDatabase::new(&spec);
        let mut backward = CoverageDatabase::new(&spec);
        for (i, r) in runs.iter().enumerate() {
            forward.accumulate(meta(&format!("t{i}")), std::slice::from_ref(r)).unwrap();
        }
        for (i, r) in runs.iter().enumerate().rev() {
            backward.accumulate(meta(&format!("t{i}")), std::slice::from_ref(r)).unwrap();
        }
        assert_eq!(forward.covered("cp").unwrap(), backward.covered("cp").unwrap());
        let fr = gap_report(&forward, &spec).unwrap();
        let br = gap_report(&backward, &spec).unwrap();
        assert_eq!(fr.entries["cp"].gap, br.entries["cp"].gap);
    }

    #[test]
    fn persist_restore_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.db");
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        let mut m = meta("t1");
        m.inputs.push(("load_current".into(), "0.25".into()));
        let mut r = result(&["[1:2)", "[4:6)"]);
        r.untargeted = BinSet::single(b("(10:12]"));
        db.accumulate(m, &[r]).unwrap();

        persist(&db, &path).unwrap();
        let restored: CoverageDatabase<f64> = restore(&path).unwrap();
        assert_eq!(restored, db);
    }

    #[test]
    fn restore_detects_truncation_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.db");
        let spec = simple_spec();
        let mut db = CoverageDatabase::new(&spec);
        db.accumulate(meta("t"), &[result(&["[1:2)"])]).unwrap();
        persist(&db, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(restore::<f64>(&path), Err(SpaceError::Corrupt(_))));

        // Tampered body with intact-looking checksum line.
        let tampered = text.replace("cell 1 1", "cell 1 9");
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(restore::<f64>(&path), Err(SpaceError::Corrupt(_))));

        assert!(matches!(
            restore::<f64>(&dir.path().join("missing.db")),
            Err(SpaceError::Io(_))
        ));
    }

    #[test]
    fn target_spec_rejects_overlap_and_escape() {
        let grid = BinGrid::new(0.0, 1.0, b("[0:10]")).unwrap();
        let overlap = TargetSpec::new([(
            "cp".to_string(),
            TargetEntry {
                grid,
                legal: BinSet::single(b("[0:5]")),
                illegal: BinSet::single(b("[4:6]")),
            },
        )]);
        assert!(matches!(overlap, Err(SpaceError::InvalidTarget { .. })));
        let escape = TargetSpec::new([(
            "cp".to_string(),
            TargetEntry {
                grid,
                legal: BinSet::single(b("[0:11]")),
                illegal: BinSet::empty(),
            },
        )]);
        assert!(matches!(escape, Err(SpaceError::InvalidTarget { .. })));
    }

    #[test]
    fn db_lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.db");
        let lock = DbLock::acquire(&path).unwrap();
        assert!(matches!(DbLock::acquire(&path), Err(SpaceError::Locked(_))));
        drop(lock);
        assert!(DbLock::acquire(&path).is_ok());
    }
}
