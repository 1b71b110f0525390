//! Parameter sweeps over a scenario template.

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::logs::{cell, Table};
use crate::metrics::RunMetrics;
use crate::scenario::{run_scenario, summary_table};

/// One swept key (dotted path into the config) and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

impl GridAxis {
    /// Parses `path.to.key=v1,v2,...`; values are TOML literals.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("grid axis `{spec}` needs key=values")))?;
        let values = values
            .split(',')
            .map(|v| {
                let doc: toml::Table = toml::from_str(&format!("v = {}", v.trim()))
                    .map_err(|e| HarnessError::Config(format!("grid value `{v}`: {e}")))?;
                Ok(doc["v"].clone())
            })
            .collect::<Result<Vec<_>>>()?;
        if key.trim().is_empty() || values.is_empty() {
            return Err(HarnessError::Config(format!("grid axis `{spec}` is empty")));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Returns a copy of `cfg` with the dotted `key` set to `value`.
pub fn with_override(cfg: &ScenarioConfig, key: &str, value: &toml::Value) -> Result<ScenarioConfig> {
    let mut doc = toml::Value::try_from(cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut node = &mut doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("`{key}` does not name a table path")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value.clone());
            break;
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let out: ScenarioConfig = doc.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    out.validate()?;
    Ok(out)
}

/// Cartesian product of the axes, in row-major order (last axis fastest).
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(String, toml::Value)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for v in &axis.values {
                let mut q = p.clone();
                q.push((axis.key.clone(), v.clone()));
                next.push(q);
            }
        }
        points = next;
    }
    points
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: Vec<(String, toml::Value)>,
    pub metrics: RunMetrics,
}

/// Runs every grid point, on `jobs` threads when more than one.
pub fn sweep(template: &ScenarioConfig, axes: &[GridAxis], jobs: usize) -> Result<Vec<SweepRow>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    let points = grid_points(axes);
    let configs = points
        .iter()
        .map(|point| {
            point
                .iter()
                .try_fold(template.clone(), |cfg, (k, v)| with_override(&cfg, k, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let run = |cfg: &ScenarioConfig| run_scenario(cfg).map(|o| o.metrics);
    let metrics: Vec<RunMetrics> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| configs.par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        configs.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(points
        .into_iter()
        .zip(metrics)
        .map(|(point, metrics)| SweepRow { point, metrics })
        .collect())
}

/// Aggregate table: one column per swept key followed by the summary columns.
pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let keys: Vec<String> = rows.first().map_or(Vec::new(), |r| r.point.iter().map(|(k, _)| k.clone()).collect());
    let summary_cols = rows.first().map_or(Vec::new(), |r| summary_table(&r.metrics).columns);
    let mut cols = keys.clone();
    cols.extend(summary_cols);
    let mut t = Table::new(&cols);
    for r in rows {
        let mut row: Vec<String> = r
            .point
            .iter()
            .map(|(_, v)| match v {
                toml::Value::Float(f) => cell(*f),
                other => other.to_string(),
            })
            .collect();
        row.extend(summary_table(&r.metrics).rows.remove(0));
        t.push(row);
    }
    t
}
