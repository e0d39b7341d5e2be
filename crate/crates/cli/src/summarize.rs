//! Post-hoc comparison of trace files: one row per trace with the distance
//! reached, the schedule shape recovered from the recorded steps, and the
//! communication counts needed to reach each requested accuracy.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::sweep::{write_atomic, CellSummary, SweepError, TRACE_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum SummarizeError {
    #[error("no trace files to summarize")]
    Empty,
    #[error("cannot read {0}: {1}")]
    Unreadable(PathBuf, std::io::Error),
    #[error("{path}: schema mismatch: {reason}")]
    SchemaMismatch { path: PathBuf, reason: String },
    #[error(transparent)]
    Write(#[from] SweepError),
}

/// The numbers recoverable from one trace file alone.
#[derive(Debug)]
pub struct ParsedTrace {
    pub steps: Vec<(usize, u64, f64)>, // (t, comms, dist)
}

impl ParsedTrace {
    pub fn final_dist(&self) -> f64 {
        self.steps.last().map(|r| r.2).unwrap_or(f64::NAN)
    }

    /// Longest stretch between recorded synchronizations, counting from 0.
    pub fn gap(&self) -> usize {
        let mut prev = 0usize;
        let mut gap = 0usize;
        for &(t, _, _) in &self.steps {
            gap = gap.max(t - prev);
            prev = t;
        }
        gap
    }

    pub fn comms_to_reach(&self, eps: f64) -> Option<u64> {
        self.steps.iter().find(|r| r.2 <= eps).map(|r| r.1)
    }
}

pub fn parse_trace(path: &Path) -> Result<ParsedTrace, SummarizeError> {
    let text =
        fs::read_to_string(path).map_err(|e| SummarizeError::Unreadable(path.to_path_buf(), e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != TRACE_HEADER {
        return Err(SummarizeError::SchemaMismatch {
            path: path.to_path_buf(),
            reason: format!("header `{header}` (expected `{TRACE_HEADER}`)"),
        });
    }
    let mut steps = Vec::new();
    let mut prev_t = 0usize;
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(SummarizeError::SchemaMismatch {
                path: path.to_path_buf(),
                reason: format!("row {} has {} fields, expected 9", idx + 2, fields.len()),
            });
        }
        let parse = |what: &str, v: &str| -> Result<f64, SummarizeError> {
            v.parse().map_err(|_| SummarizeError::SchemaMismatch {
                path: path.to_path_buf(),
                reason: format!("row {}: bad {what} value `{v}`", idx + 2),
            })
        };
        let t = parse("t", fields[0])? as usize;
        let comms = parse("comms", fields[1])? as u64;
        let dist = parse("dist", fields[3])?;
        if t <= prev_t {
            return Err(SummarizeError::SchemaMismatch {
                path: path.to_path_buf(),
                reason: format!("row {}: step {t} does not increase", idx + 2),
            });
        }
        prev_t = t;
        steps.push((t, comms, dist));
    }
    if steps.is_empty() {
        return Err(SummarizeError::SchemaMismatch {
            path: path.to_path_buf(),
            reason: "no data rows".into(),
        });
    }
    Ok(ParsedTrace { steps })
}

/// One output row of the comparison table.
#[derive(Debug, Serialize)]
pub struct TableRow {
    pub cell: String,
    pub steps: usize,
    pub gap: usize,
    pub final_dist: f64,
    pub eta: Option<f64>,
    pub floor_scale: Option<f64>,
    pub comms_to_eps: BTreeMap<String, Option<u64>>,
}

fn load_cell_metadata(dir: &Path) -> BTreeMap<String, (Option<f64>, Option<f64>)> {
    let mut meta = BTreeMap::new();
    if let Ok(bytes) = fs::read(dir.join("summary.json")) {
        if let Ok(cells) = serde_json::from_slice::<Vec<CellSummary>>(&bytes) {
            for cell in cells {
                if let Some(file) = cell.trace_file {
                    meta.insert(file, (cell.eta, cell.floor_scale));
                }
            }
        }
    }
    meta
}

/// Build rows for the given traces, joining per-cell metadata (shard
/// deviation, floor scale) from a run summary when one sits next to them.
pub fn build_table(
    traces: &[PathBuf],
    eps_targets: &[f64],
) -> Result<Vec<TableRow>, SummarizeError> {
    if traces.is_empty() {
        return Err(SummarizeError::Empty);
    }
    let mut rows = Vec::new();
    for path in traces {
        let parsed = parse_trace(path)?;
        let meta = path
            .parent()
            .map(load_cell_metadata)
            .unwrap_or_default()
            .remove(
                path.file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
                    .as_str(),
            );
        let (eta, floor_scale) = meta.unwrap_or((None, None));
        rows.push(TableRow {
            cell: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            steps: parsed.steps.len(),
            gap: parsed.gap(),
            final_dist: parsed.final_dist(),
            eta,
            floor_scale,
            comms_to_eps: eps_targets
                .iter()
                .map(|&eps| (format!("{eps}"), parsed.comms_to_reach(eps)))
                .collect(),
        });
    }
    Ok(rows)
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into())
}

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "null".into())
}

/// Render the aligned text form of the table.
pub fn render_text(rows: &[TableRow], eps_targets: &[f64]) -> String {
    let mut headers = vec![
        "cell".to_string(),
        "steps".into(),
        "gap".into(),
        "final_dist".into(),
        "eta".into(),
        "floor_scale".into(),
    ];
    for eps in eps_targets {
        headers.push(format!("comms@{eps}"));
    }
    let mut grid: Vec<Vec<String>> = vec![headers];
    for row in rows {
        let mut line = vec![
            row.cell.clone(),
            row.steps.to_string(),
            row.gap.to_string(),
            format!("{:.3e}", row.final_dist),
            fmt_opt_f64(row.eta),
            fmt_opt_f64(row.floor_scale),
        ];
        for eps in eps_targets {
            line.push(fmt_opt_u64(
                row.comms_to_eps.get(&format!("{eps}")).copied().flatten(),
            ));
        }
        grid.push(line);
    }
    let cols = grid[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &grid {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Full summarize flow: parse, render to stdout, write the JSON twin.
pub fn summarize(
    traces: &[PathBuf],
    eps_targets: &[f64],
    json_out: &Path,
) -> Result<(), SummarizeError> {
    let rows = build_table(traces, eps_targets)?;
    print!("{}", render_text(&rows, eps_targets));
    write_atomic(
        json_out,
        &serde_json::to_vec_pretty(&rows).expect("serializable"),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace-x.csv");
        fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_a_well_formed_trace() {
        let (_d, path) = write_tmp(
            "t,comms,words_sent,dist,H_norm,W_norm,G_norm,eps0,noise_ok\n\
             2,1,16,0.5,,,,,\n\
             4,2,32,0.05,,,,,\n\
             6,3,48,0.001,,,,,\n",
        );
        let trace = parse_trace(&path).unwrap();
        assert_eq!(trace.steps.len(), 3);
        assert_eq!(trace.gap(), 2);
        assert_eq!(trace.final_dist(), 0.001);
        assert_eq!(trace.comms_to_reach(0.1), Some(2));
        assert_eq!(trace.comms_to_reach(1e-9), None);
    }

    #[test]
    fn rejects_wrong_header_and_bad_rows() {
        let (_d, path) = write_tmp("time,stuff\n1,2\n");
        assert!(matches!(
            parse_trace(&path),
            Err(SummarizeError::SchemaMismatch { .. })
        ));
        let (_d, path) = write_tmp(
            "t,comms,words_sent,dist,H_norm,W_norm,G_norm,eps0,noise_ok\n1,1,8,oops,,,,,\n",
        );
        assert!(matches!(
            parse_trace(&path),
            Err(SummarizeError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn renders_an_aligned_table_and_omits_empty_eps_columns() {
        let (_d, path) = write_tmp(
            "t,comms,words_sent,dist,H_norm,W_norm,G_norm,eps0,noise_ok\n\
             1,1,8,0.5,,,,,\n\
             2,2,16,0.01,,,,,\n",
        );
        let rows = build_table(&[path], &[]).unwrap();
        let text = render_text(&rows, &[]);
        let header = text.lines().next().unwrap();
        assert!(header.contains("final_dist"));
        assert!(!header.contains("comms@"));
        let with_eps = render_text(&rows, &[0.1]);
        assert!(with_eps.lines().next().unwrap().contains("comms@0.1"));
    }
}
