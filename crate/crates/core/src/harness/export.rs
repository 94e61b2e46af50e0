//! CSV and JSON artifacts of an experiment.
//!
//! All files are first written under temporary names in the output directory
//! and renamed once every one of them is complete.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{Algorithm, RunRecord};
use super::stats::mean_std;
use super::HarnessError;
use crate::score::{Score, NOT_EVALUATED};

/// Divisor applied to S2 for display.
pub const S2_DISPLAY_SCALE: f64 = 10_000.0;

pub const RUNS_CSV: &str = "runs.csv";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";

fn level(v: i64) -> String {
    if v == NOT_EVALUATED {
        String::new()
    } else {
        v.to_string()
    }
}

fn s2_display(s: &Score) -> String {
    if s.s2 == NOT_EVALUATED {
        String::new()
    } else {
        format!("{}", s.s2 as f64 / S2_DISPLAY_SCALE)
    }
}

fn score_cells(s: &Score) -> Vec<String> {
    s.levels().into_iter().map(level).collect()
}

/// One row of `summary.csv`; means and deviations cover successful runs with
/// an evaluated S2.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub instance: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub failed: usize,
    pub s2_mean: Option<f64>,
    pub s2_std: Option<f64>,
    pub s2_display_mean: Option<f64>,
    pub s2_display_std: Option<f64>,
    /// e.g. "19/30".
    pub tw_met: String,
    pub feasible: String,
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Algorithm), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.instance.clone(), r.algorithm)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((instance, algorithm), rs)| {
            let s2: Vec<f64> = rs
                .iter()
                .filter(|r| r.is_ok() && r.final_score.s2 != NOT_EVALUATED)
                .map(|r| r.final_score.s2 as f64)
                .collect();
            let (mean, std) = if s2.is_empty() { (None, None) } else {
                let (m, s) = mean_std(&s2);
                (Some(m), Some(s))
            };
            let n = rs.len();
            let tw = rs.iter().filter(|r| r.is_ok() && r.tw_met).count();
            let feasible = rs.iter().filter(|r| r.is_ok() && r.final_score.is_feasible()).count();
            SummaryRow {
                instance,
                algorithm,
                runs: n,
                failed: rs.iter().filter(|r| !r.is_ok()).count(),
                s2_mean: mean,
                s2_std: std,
                s2_display_mean: mean.map(|m| m / S2_DISPLAY_SCALE),
                s2_display_std: std.map(|s| s / S2_DISPLAY_SCALE),
                tw_met: format!("{tw}/{n}"),
                feasible: format!("{feasible}/{n}"),
            }
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn runs_csv(records: &[RunRecord]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance", "algorithm", "seed", "h1", "h2", "h3", "s1", "s2", "s3", "s2_display", "tw_met", "wall_time", "partial",
        "error",
    ])?;
    for r in records {
        let mut row = vec![r.instance.clone(), r.algorithm.to_string(), r.seed.to_string()];
        row.extend(score_cells(&r.final_score));
        row.extend([
            s2_display(&r.final_score),
            r.tw_met.to_string(),
            format!("{:.3}", r.wall_time),
            r.partial.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn trajectories_csv(records: &[RunRecord]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["instance", "algorithm", "seed", "elapsed", "h1", "h2", "h3", "s1", "s2", "s3", "s2_display"])?;
    for r in records {
        for (t, s) in &r.trajectory {
            let mut row = vec![r.instance.clone(), r.algorithm.to_string(), r.seed.to_string(), format!("{t:.3}")];
            row.extend(score_cells(s));
            row.push(s2_display(s));
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance", "algorithm", "runs", "failed", "s2_mean", "s2_std", "s2_display_mean", "s2_display_std", "tw_met",
        "feasible",
    ])?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.algorithm.to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            opt(r.s2_mean),
            opt(r.s2_std),
            opt(r.s2_display_mean),
            opt(r.s2_display_std),
            r.tw_met.clone(),
            r.feasible.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    note: &'static str,
    s2_display_scale: f64,
    rows: &'a [SummaryRow],
}

/// Writes `runs.csv`, `trajectories.csv`, `summary.csv` and `summary.json`
/// into `out_dir` (created if missing) and returns their paths.
pub fn export_results(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Invalid("no records to export".into()));
    }
    let rows = summarize(records);
    let csv_err = |e: csv::Error| HarnessError::Invalid(format!("csv: {e}"));
    let doc = SummaryDoc {
        note: "instances labeled synthetic are generated, not measured data",
        s2_display_scale: S2_DISPLAY_SCALE,
        rows: &rows,
    };
    let files: Vec<(&str, Vec<u8>)> = vec![
        (RUNS_CSV, runs_csv(records).map_err(csv_err)?),
        (TRAJECTORIES_CSV, trajectories_csv(records).map_err(csv_err)?),
        (SUMMARY_CSV, summary_csv(&rows).map_err(csv_err)?),
        (SUMMARY_JSON, serde_json::to_vec_pretty(&doc).expect("summary serializes")),
    ];
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let tmp = |name: &str| out_dir.join(format!(".{name}.tmp"));
    let cleanup = || {
        for (name, _) in &files {
            let _ = fs::remove_file(tmp(name));
        }
    };
    for (name, bytes) in &files {
        if let Err(e) = fs::write(tmp(name), bytes) {
            cleanup();
            return Err(HarnessError::io(&tmp(name), e));
        }
    }
    let mut out = Vec::new();
    for (name, _) in &files {
        let dest = out_dir.join(name);
        fs::rename(tmp(name), &dest).map_err(|e| HarnessError::io(&dest, e))?;
        out.push(dest);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seed: u64, s2: i64, s1: i64) -> RunRecord {
        let score = Score::new([0, 0, 0, s1, s2, 3]);
        RunRecord {
            instance: "synthetic TSP-I seed 1".into(),
            algorithm: Algorithm::Ga,
            seed,
            final_score: score,
            trajectory: vec![(0.1, Score::new([0, 0, 0, s1, s2 + 5, 3])), (0.4, score)],
            tw_met: s1 == 0,
            wall_time: 0.5,
            partial: false,
            error: None,
        }
    }

    #[test]
    fn thirty_of_thirty() {
        let recs: Vec<_> = (0..30).map(|s| rec(s, 100 + s as i64, 0)).collect();
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].tw_met, "30/30");
        assert_eq!(rows[0].s2_mean, Some(114.5));
    }

    #[test]
    fn display_scaling() {
        let dir = tempfile::tempdir().unwrap();
        export_results(&[rec(1, 2_919_200, 7)], dir.path()).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join(RUNS_CSV)).unwrap();
        let row = rdr.records().next().unwrap().unwrap();
        assert_eq!(&row[9], "291.92");
        assert_eq!(&row[10], "false");
    }

    #[test]
    fn empty_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_results(&[], dir.path()).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn unwritable_dir_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(export_results(&[rec(1, 5, 0)], &blocker.join("sub")), Err(HarnessError::Io { .. })));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unevaluated_levels_blank() {
        let mut r = rec(1, 5, 0);
        r.final_score = Score::new([3, 0, NOT_EVALUATED, NOT_EVALUATED, NOT_EVALUATED, NOT_EVALUATED]);
        let text = String::from_utf8(runs_csv(&[r]).unwrap()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",3,0,,,,,"));
    }
}
