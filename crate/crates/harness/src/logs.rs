//! Per-run CSV tables. Column sets are pinned here and versioned by [`SCHEMA_VERSION`].

use std::path::Path;

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

pub const MPC_COLUMNS: &[&str] = &[
    "k",
    "model_version",
    "j_task",
    "j_info",
    "beta",
    "sqp_iters",
    "qp_iters",
    "lambda_min_ghat",
    "max_slack",
    "status",
];
pub const ADAPTATION_COLUMNS: &[&str] = &[
    "k",
    "e_pred_norm",
    "lambda_min_g",
    "lambda_max_g",
    "eta",
    "rho",
    "error_envelope",
    "delta_plus",
];
pub const TIGHTENING_COLUMNS: &[&str] = &[
    "k",
    "s_norm",
    "score",
    "delta_warmup",
    "delta_conf",
    "delta_implemented",
    "delta_ana",
];
pub const SAFETY_COLUMNS: &[&str] = &["k", "min_h", "hard_violations", "decay_misses", "substep_collisions"];
pub const TRACKING_COLUMNS: &[&str] = &["k", "t_s", "ref_x", "ref_y", "pos_x", "pos_y", "tracking_error", "e_dyn"];
pub const TIMING_COLUMNS: &[&str] = &["k", "solve_wall_s"];

/// State tables carry `k`, `t_s` and one column per state entry.
pub fn state_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["k".to_string(), "t_s".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols
}

pub fn input_columns(m: usize) -> Vec<String> {
    let mut cols = vec!["k".to_string()];
    cols.extend((0..m).map(|i| format!("u{i}")));
    cols
}

/// An in-memory CSV table of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }
}

/// Shortest round-trip formatting; identical values always print identically.
pub fn cell(v: f64) -> String {
    format!("{v}")
}

/// All tables written for one run, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLogs {
    pub tables: Vec<(String, Table)>,
}

impl RunLogs {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, table) in &self.tables {
            table.write(&dir.join(name))?;
        }
        Ok(())
    }
}

/// Re-emits a plotting table (`t_s`, reference and position columns, errors) from a
/// run directory.
pub fn replay(dir: &Path, out: &Path) -> Result<Table> {
    let tracking = Table::read(&dir.join("tracking.csv"))?;
    let keep = ["t_s", "ref_x", "ref_y", "pos_x", "pos_y", "tracking_error", "e_dyn"];
    let idx: Vec<usize> = keep
        .iter()
        .map(|k| {
            tracking.columns.iter().position(|c| c == k).ok_or_else(|| {
                crate::error::HarnessError::Config(format!("tracking.csv lacks column {k}"))
            })
        })
        .collect::<Result<_>>()?;
    let mut plot = Table::new(&keep);
    for row in &tracking.rows {
        plot.push(idx.iter().map(|&i| row[i].clone()).collect());
    }
    plot.write(out)?;
    Ok(plot)
}
