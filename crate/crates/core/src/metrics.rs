//! Error functionals, run summaries and the tabular file formats.
//!
//! Every CSV written here starts with a `# schema_version=N` comment line
//! followed by a header row; floats are printed with 17 significant digits so
//! that files re-parse to identical values.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Vec3;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Trapezoidal cable error between a fine-grid configuration `fine`
/// (`N + 1` nodes) and a coarse comparison `coarse` (`M + 1` nodes, every
/// `N / M`-th fine node). Normalised so that a uniform offset `delta` gives
/// `|delta|`.
pub fn cable_error(fine: &[Vec3], coarse: &[Vec3]) -> Result<f64> {
    if coarse.len() < 2 || fine.len() < 2 {
        return Err(Error::GridMismatch("cable error needs at least two nodes".into()));
    }
    let n = fine.len() - 1;
    let m = coarse.len() - 1;
    if n % m != 0 {
        return Err(Error::GridMismatch(format!("{m} coarse intervals do not divide {n} fine intervals")));
    }
    let d = n / m;
    let sq = |j: usize| (fine[j * d] - coarse[j]).norm_squared();
    let sum: f64 = (1..=m).map(|j| sq(j) + sq(j - 1)).sum();
    // h_d / (2 L) with L = M h_d
    Ok((sum / (2.0 * m as f64)).sqrt())
}

/// Root mean square over time samples of per-sample errors.
pub fn time_rms(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Root mean square of vector differences over time.
pub fn vector_rms(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let errs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).norm()).collect();
    Ok(time_rms(&errs))
}

/// Running accumulator of squared errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RmsAccumulator {
    sum_sq: f64,
    count: usize,
}

impl RmsAccumulator {
    pub fn push(&mut self, e: f64) {
        self.sum_sq += e * e;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sum_sq / self.count as f64).sqrt()
        }
    }
}

/// Solver statistics of a closed-loop run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub solves: usize,
    pub failures: usize,
    pub mean_iterations: f64,
    pub mean_wall_ms: f64,
    pub max_wall_ms: f64,
    /// Cost at the end of each solve.
    pub final_costs: Vec<f64>,
    /// Levenberg-Marquardt value at the end of each solve.
    pub lambda_trace: Vec<f64>,
}

/// Time of a hybrid transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: String,
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub name: String,
    pub solver: String,
    pub eps_p_rms: f64,
    pub eps_v_rms: f64,
    pub tip_pos_rms: f64,
    pub tip_vel_rms: f64,
    pub min_obstacle_margin: Option<f64>,
    pub events: Vec<EventRecord>,
    pub stats: SolverStats,
    pub completed: bool,
    pub failure: Option<String>,
}

impl RunSummary {
    pub fn new(name: impl Into<String>, solver: impl Into<String>) -> Self {
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            name: name.into(),
            solver: solver.into(),
            eps_p_rms: 0.0,
            eps_v_rms: 0.0,
            tip_pos_rms: 0.0,
            tip_vel_rms: 0.0,
            min_obstacle_margin: None,
            events: Vec::new(),
            stats: SolverStats::default(),
            completed: false,
            failure: None,
        }
    }

    /// Metrics must be finite whenever the run completed.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SUMMARY_SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported summary schema {}", self.schema_version)));
        }
        let vals = [self.eps_p_rms, self.eps_v_rms, self.tip_pos_rms, self.tip_vel_rms];
        if self.completed && vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("completed run has non-finite metrics".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Self = read_json(path)?;
        s.validate()?;
        Ok(s)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Column-labelled numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::GridMismatch(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# schema_version={CSV_SCHEMA_VERSION}\n");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_float(&mut out, *v);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
        let version = first
            .strip_prefix("# schema_version=")
            .ok_or_else(|| Error::Parse("line 1: missing schema_version comment".into()))?;
        let version: u32 = version.trim().parse().map_err(|_| Error::Parse(format!("line 1: bad schema version `{version}`")))?;
        if version != CSV_SCHEMA_VERSION {
            return Err(Error::Parse(format!("line 1: unsupported schema version {version}")));
        }
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("line 2: missing header".into()))?;
        let mut table = Table::new(header.split(','));
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| parse_float(s).ok_or_else(|| Error::Parse(format!("line {}: bad number `{s}`", ln + 1))))
                .collect::<Result<Vec<f64>>>()?;
            table.push(row).map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn write_float(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else if v.is_infinite() {
        out.push_str(if v > 0.0 { "inf" } else { "-inf" });
    } else {
        let _ = write!(out, "{v:.16e}");
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}
