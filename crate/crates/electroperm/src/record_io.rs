//! CSV serialization of trajectory records and ensemble statistics.
//!
//! Trajectory files double as checkpoints: a comment header carries the
//! config hash, so a restart can tell completed work from stale output.
//! All files use `,` separators, `.` decimals, a header row and LF endings;
//! floats are printed in shortest round-trip form, which keeps re-runs
//! byte-identical.

use crate::sim::{SimError, Snapshots, TrajectoryRecord};
use crate::stats::EnsembleStats;
use std::fmt::Write as _;

pub fn write_trajectory_csv(rec: &TrajectoryRecord, config_hash: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# electroperm trajectory");
    let _ = writeln!(out, "# config_hash {config_hash:016x}");
    let _ = writeln!(out, "# trajectory {}", rec.trajectory_id);
    let _ = writeln!(out, "# seed {}", rec.seed);
    out.push_str("t,norm_v_sq,norm_w_sq");
    for a in &rec.angles {
        let _ = write!(out, ",v_at_theta_{a}");
    }
    for a in &rec.angles {
        let _ = write!(out, ",w_at_theta_{a}");
    }
    out.push('\n');
    for k in 0..rec.times.len() {
        let _ = write!(out, "{}", rec.times[k]);
        let _ = write!(
            out,
            ",{},{}",
            rec.norm_v_sq.get(k).copied().unwrap_or(f64::NAN),
            rec.norm_w_sq.get(k).copied().unwrap_or(f64::NAN)
        );
        for series in &rec.v_at {
            let _ = write!(out, ",{}", series[k]);
        }
        for series in &rec.w_at {
            let _ = write!(out, ",{}", series[k]);
        }
        out.push('\n');
    }
    out
}

/// Parse a trajectory CSV; returns the record and the config hash it was
/// produced under.
pub fn read_trajectory_csv(text: &str) -> Result<(TrajectoryRecord, u64), SimError> {
    let mut config_hash = None;
    let mut trajectory_id = None;
    let mut seed = 0u64;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let toks: Vec<&str> = comment.split_whitespace().collect();
            match toks.as_slice() {
                ["config_hash", h] => {
                    config_hash = Some(u64::from_str_radix(h, 16).map_err(|_| {
                        SimError::BadData(format!("line {}: bad config hash", lineno + 1))
                    })?)
                }
                ["trajectory", id] => {
                    trajectory_id = Some(id.parse::<usize>().map_err(|_| {
                        SimError::BadData(format!("line {}: bad trajectory id", lineno + 1))
                    })?)
                }
                ["seed", s] => {
                    seed = s
                        .parse::<u64>()
                        .map_err(|_| SimError::BadData(format!("line {}: bad seed", lineno + 1)))?
                }
                _ => {}
            }
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(str::to_string).collect());
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        rows.push(
            row.map_err(|_| SimError::BadData(format!("line {}: non-numeric field", lineno + 1)))?,
        );
    }
    let header = header.ok_or_else(|| SimError::BadData("missing header row".into()))?;
    let config_hash =
        config_hash.ok_or_else(|| SimError::BadData("missing config_hash comment".into()))?;
    if header.len() < 3 || header[0] != "t" || header[1] != "norm_v_sq" || header[2] != "norm_w_sq"
    {
        return Err(SimError::BadData(format!(
            "unexpected column layout: {header:?}"
        )));
    }
    let v_cols: Vec<(usize, f64)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix("v_at_theta_")
                .and_then(|a| a.parse::<f64>().ok())
                .map(|a| (i, a))
        })
        .collect();
    let w_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("w_at_theta_").map(|_| i))
        .collect();
    if v_cols.len() != w_cols.len() {
        return Err(SimError::BadData("unpaired angle columns".into()));
    }
    for row in &rows {
        if row.len() != header.len() {
            return Err(SimError::BadData(format!(
                "row with {} fields under a {}-column header",
                row.len(),
                header.len()
            )));
        }
    }
    let column = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i]).collect() };
    Ok((
        TrajectoryRecord {
            trajectory_id: trajectory_id.unwrap_or(0),
            seed,
            times: column(0),
            norm_v_sq: column(1),
            norm_w_sq: column(2),
            angles: v_cols.iter().map(|&(_, a)| a).collect(),
            v_at: v_cols.iter().map(|&(i, _)| column(i)).collect(),
            w_at: w_cols.iter().map(|&i| column(i)).collect(),
            snapshots: None,
        },
        config_hash,
    ))
}

pub fn write_snapshots_csv(snap: &Snapshots) -> String {
    let mut out = String::new();
    out.push_str("t");
    for th in &snap.thetas {
        let _ = write!(out, ",v_theta_{th}");
    }
    for th in &snap.thetas {
        let _ = write!(out, ",w_theta_{th}");
    }
    out.push('\n');
    for k in 0..snap.times.len() {
        let _ = write!(out, "{}", snap.times[k]);
        for v in &snap.v[k] {
            let _ = write!(out, ",{v}");
        }
        for w in &snap.w[k] {
            let _ = write!(out, ",{w}");
        }
        out.push('\n');
    }
    out
}

/// Per-trajectory running time averages: `t` column then one column per
/// trajectory in id order.
pub fn write_time_avg_csv(stats: &EnsembleStats, ids: &[usize]) -> String {
    let mut out = String::new();
    out.push_str("t");
    for id in ids {
        let _ = write!(out, ",traj_{id:03}");
    }
    out.push('\n');
    for k in 0..stats.t_grid.len() {
        let _ = write!(out, "{}", stats.t_grid[k]);
        for row in &stats.per_trajectory_avg {
            let _ = write!(out, ",{}", row[k]);
        }
        out.push('\n');
    }
    out
}

/// Cross-trajectory standard deviation of the running time averages.
pub fn write_std_decay_csv(stats: &EnsembleStats) -> String {
    let mut out = String::new();
    out.push_str("t,window,std\n");
    for k in 0..stats.t_grid.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            stats.t_grid[k], stats.window_lengths[k], stats.std[k]
        );
    }
    out
}

pub fn write_slope_report(stats: &EnsembleStats, label: &str) -> String {
    match stats.slope_fit {
        Some(fit) => format!(
            "series = {label}\nslope = {}\nintercept = {}\nr_squared = {}\nwindow = [{}, {}]\n",
            fit.slope,
            fit.intercept,
            fit.r_squared,
            stats.t_grid.first().unwrap(),
            stats.t_grid.last().unwrap(),
        ),
        None => format!(
            "series = {label}\nslope = nan\nintercept = nan\nr_squared = nan\nwindow = [{}, {}]\n# deviation vanishes in the window; no decay to fit\n",
            stats.t_grid.first().unwrap(),
            stats.t_grid.last().unwrap(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TrajectoryRecord;

    fn sample_record() -> TrajectoryRecord {
        TrajectoryRecord {
            trajectory_id: 3,
            seed: 99,
            times: vec![0.0, 0.25, 0.5],
            norm_v_sq: vec![0.0, 1.5, 2.25e-7],
            norm_w_sq: vec![0.0, 0.5, 1.0],
            angles: vec![std::f64::consts::PI],
            v_at: vec![vec![0.0, -1.25, 3.5]],
            w_at: vec![vec![0.0, 0.25, 0.75]],
            snapshots: None,
        }
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let rec = sample_record();
        let text = write_trajectory_csv(&rec, 0xdead_beef_1234_5678);
        let (back, hash) = read_trajectory_csv(&text).unwrap();
        assert_eq!(hash, 0xdead_beef_1234_5678);
        assert_eq!(back, rec);
    }

    #[test]
    fn rewriting_is_byte_identical() {
        let rec = sample_record();
        let a = write_trajectory_csv(&rec, 7);
        let b = write_trajectory_csv(&rec, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn missing_hash_is_rejected() {
        let text = "t,norm_v_sq,norm_w_sq\n0,0,0\n";
        assert!(read_trajectory_csv(text).is_err());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let text = "# config_hash 0\nt,norm_v_sq,norm_w_sq\n0,zero,0\n";
        assert!(read_trajectory_csv(text).is_err());
        let text = "# config_hash 0\nt,norm_v_sq,norm_w_sq\n0,0\n";
        assert!(read_trajectory_csv(text).is_err());
    }
}
