//! Result serialization, atomic file writes and plot-ready tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use pxaug_core::monte_carlo::SweepRow;
use pxaug_core::survey::SchemeComparison;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("nothing to write: {0}")]
    Empty(&'static str),
}

fn write_err(path: &Path, e: impl ToString) -> OutputError {
    OutputError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes through a temporary file in the target directory, then renames it
/// over `path`, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| write_err(path, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| write_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| write_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| write_err(path, e))?;
    tmp.persist(path).map_err(|e| write_err(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("results serialize to JSON");
    v.push(b'\n');
    v
}

/// Serializes a slice of flat records as CSV with a header row.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| write_err(Path::new("<memory>"), e))?;
    }
    w.into_inner()
        .map_err(|e| write_err(Path::new("<memory>"), e))
}

/// One row of a sweep table, in the fixed column order.
#[derive(Debug, Serialize)]
pub struct SweepCsvRow {
    pub theta1: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub half_width_alpha: f64,
    pub half_width_beta: f64,
    pub bound: f64,
    pub slack: f64,
    pub satisfied: bool,
}

impl From<&SweepRow> for SweepCsvRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            theta1: r.theta1,
            alpha_hat: r.alpha_hat,
            beta_hat: r.beta_hat,
            half_width_alpha: r.half_width_alpha,
            half_width_beta: r.half_width_beta,
            bound: r.bound,
            slack: r.slack,
            satisfied: r.satisfied,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SurveyCsvRow {
    pub scheme: &'static str,
    pub mean_error: f64,
    pub rmse: f64,
    pub replications: usize,
    pub seed: u64,
}

pub fn survey_rows(c: &SchemeComparison) -> Vec<SurveyCsvRow> {
    c.rows
        .iter()
        .map(|r| SurveyCsvRow {
            scheme: r.scheme.name(),
            mean_error: r.mean_error,
            rmse: r.rmse,
            replications: c.replications,
            seed: c.seed,
        })
        .collect()
}

/// Tables that have a plot-ready projection.
#[derive(Debug, Clone, Copy)]
pub enum PlotTable<'a> {
    Sweep(&'a [SweepRow]),
    Survey(&'a SchemeComparison),
}

#[derive(Serialize)]
struct SweepPlotRow {
    theta1: f64,
    error_sum: f64,
    bound: f64,
}

#[derive(Serialize)]
struct SurveyPlotRow {
    scheme: &'static str,
    rmse: f64,
}

pub fn plot_data(table: PlotTable<'_>) -> Result<Vec<u8>, OutputError> {
    match table {
        PlotTable::Sweep(rows) => {
            if rows.is_empty() {
                return Err(OutputError::Empty("sweep table has no rows"));
            }
            let rows: Vec<_> = rows
                .iter()
                .map(|r| SweepPlotRow {
                    theta1: r.theta1,
                    error_sum: r.error_sum(),
                    bound: r.bound,
                })
                .collect();
            to_csv(&rows)
        }
        PlotTable::Survey(c) => {
            if c.rows.is_empty() {
                return Err(OutputError::Empty("survey comparison has no rows"));
            }
            let rows: Vec<_> = c
                .rows
                .iter()
                .map(|r| SurveyPlotRow {
                    scheme: r.scheme.name(),
                    rmse: r.rmse,
                })
                .collect();
            to_csv(&rows)
        }
    }
}

/// Writes the plot projection of `table` to `path`.
pub fn emit_plot_data(table: PlotTable<'_>, path: &Path) -> Result<(), OutputError> {
    atomic_write(path, &plot_data(table)?)
}

/// `results.csv` → `results.<suffix>`, keeping the directory.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pxaug_core::survey::{Scheme, SchemeSummary};

    fn row(theta1: f64) -> SweepRow {
        SweepRow {
            theta1,
            alpha_hat: 0.3,
            beta_hat: 0.2,
            half_width_alpha: 0.01,
            half_width_beta: 0.01,
            bound: 0.9,
            slack: 0.4,
            satisfied: true,
        }
    }

    #[test]
    fn sweep_projection() {
        let out = plot_data(PlotTable::Sweep(&[row(1.0), row(2.0)])).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "theta1,error_sum,bound");
        assert_eq!(text.lines().nth(1).unwrap(), "1.0,0.5,0.9");
        assert!(plot_data(PlotTable::Sweep(&[])).is_err());
    }

    #[test]
    fn survey_projection() {
        let c = SchemeComparison {
            rows: vec![SchemeSummary {
                scheme: Scheme::Augmented,
                mean_error: 0.1,
                rmse: 0.4,
                std_error: 0.01,
                replications_used: 10,
                full_coverage_rate: 1.0,
            }],
            replications: 10,
            seed: 3,
        };
        let text = String::from_utf8(plot_data(PlotTable::Survey(&c)).unwrap()).unwrap();
        assert_eq!(text, "scheme,rmse\naugmented,0.4\n");
        let empty = SchemeComparison { rows: vec![], replications: 10, seed: 3 };
        assert!(plot_data(PlotTable::Survey(&empty)).is_err());
    }

    #[test]
    fn sweep_csv_column_order() {
        let text = String::from_utf8(to_csv(&[SweepCsvRow::from(&row(1.0))]).unwrap()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "theta1,alpha_hat,beta_hat,half_width_alpha,half_width_beta,bound,slack,satisfied"
        );
    }

    #[test]
    fn atomic_write_replaces_and_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("r.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
        // a directory in the way of the target cannot be replaced by a file
        let blocked = dir.path().join("blocked");
        std::fs::create_dir_all(blocked.join("x")).unwrap();
        assert!(atomic_write(&blocked, b"x").is_err());
        assert!(blocked.is_dir());
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("a/b/res.csv"), "plot.csv"), PathBuf::from("a/b/res.plot.csv"));
    }
}
