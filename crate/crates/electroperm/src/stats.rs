//! Ergodicity diagnostics: interface norms, burn-in time averages, ensemble
//! standard deviations and log-log decay slopes.

use crate::mesh::MeshGeometry;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("value array has {got} entries, interface has {want} nodes")]
    SizeMismatch { got: usize, want: usize },
    #[error("time window [{lo}, {hi}] contains no samples")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("averaging grid violates its precondition: {0}")]
    GridViolation(String),
    #[error("need at least two trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("log-log fit window contains a non-positive value at index {0}")]
    NonPositive(usize),
    #[error("inconsistent trajectory grids: {0}")]
    InconsistentGrids(String),
}

/// Squared interface L2 norm of a nodal function, by exact quadrature of the
/// piecewise-linear interpolant (edgewise two-point Gauss equals the
/// consistent mass for quadratics).
pub fn l2_norm_sq_gamma(values: &[f64], mesh: &MeshGeometry) -> Result<f64, StatsError> {
    if values.len() != mesh.dof_map.n_trace {
        return Err(StatsError::SizeMismatch {
            got: values.len(),
            want: mesh.dof_map.n_trace,
        });
    }
    Ok(l2_norm_sq_edges(values, &mesh.trace_edges()))
}

/// Same norm from a precomputed (trace dof, trace dof, length) edge list.
pub fn l2_norm_sq_edges(values: &[f64], trace_edges: &[(usize, usize, f64)]) -> f64 {
    let mut acc = 0.0;
    for &(a, b, len) in trace_edges {
        let (va, vb) = (values[a], values[b]);
        acc += len / 3.0 * (va * va + vb * vb + va * vb);
    }
    acc
}

fn window_indices(times: &[f64], lo: f64, hi: f64) -> (Option<usize>, Option<usize>) {
    let first = times
        .iter()
        .position(|&t| t >= lo - 1e-12 * (1.0 + lo.abs()));
    let last = times
        .iter()
        .rposition(|&t| t <= hi + 1e-12 * (1.0 + hi.abs()));
    (first, last)
}

/// Trapezoidal time average of a sampled series over `[t_burn_in, t_end]`.
/// Window endpoints falling between samples are handled by linear
/// interpolation, so the average is exact for piecewise-linear series. A
/// window containing a single sample returns that sample.
pub fn time_average(
    times: &[f64],
    series: &[f64],
    t_burn_in: f64,
    t_end: f64,
) -> Result<f64, StatsError> {
    assert_eq!(times.len(), series.len());
    if !(t_end > t_burn_in) {
        // Degenerate window: return the sample at the window point if any.
        let (first, last) = window_indices(times, t_burn_in, t_end);
        if let (Some(i), Some(j)) = (first, last) {
            if i <= j {
                return Ok(series[i]);
            }
        }
        return Err(StatsError::EmptyWindow {
            lo: t_burn_in,
            hi: t_end,
        });
    }
    let (first, last) = window_indices(times, t_burn_in, t_end);
    let (Some(i), Some(j)) = (first, last) else {
        return Err(StatsError::EmptyWindow {
            lo: t_burn_in,
            hi: t_end,
        });
    };
    if i > j {
        return Err(StatsError::EmptyWindow {
            lo: t_burn_in,
            hi: t_end,
        });
    }
    if i == j {
        return Ok(series[i]);
    }
    let value_at = |t: f64| -> f64 {
        // Linear interpolation; only used inside the sampled range.
        let k = times
            .partition_point(|&x| x < t)
            .min(times.len() - 1)
            .max(1);
        let (t0, t1) = (times[k - 1], times[k]);
        if t1 == t0 {
            series[k]
        } else {
            series[k - 1] + (series[k] - series[k - 1]) * (t - t0) / (t1 - t0)
        }
    };
    let mut integral = 0.0;
    for k in i..j {
        integral += 0.5 * (series[k] + series[k + 1]) * (times[k + 1] - times[k]);
    }
    // Partial segments at the window ends.
    if times[i] > t_burn_in {
        let v = value_at(t_burn_in);
        integral += 0.5 * (v + series[i]) * (times[i] - t_burn_in);
    }
    if times[j] < t_end {
        let v = value_at(t_end);
        integral += 0.5 * (series[j] + v) * (t_end - times[j]);
    }
    Ok(integral / (t_end - t_burn_in))
}

/// Running time averages evaluated at every grid point, one incremental pass.
/// The grid must start no earlier than `1.1 * t_burn_in` and be strictly
/// increasing.
pub fn running_time_average(
    times: &[f64],
    series: &[f64],
    t_burn_in: f64,
    t_grid: &[f64],
) -> Result<Vec<f64>, StatsError> {
    assert_eq!(times.len(), series.len());
    if t_grid.is_empty() {
        return Err(StatsError::GridViolation("empty grid".into()));
    }
    let min_start = 1.1 * t_burn_in;
    if t_grid[0] < min_start - 1e-12 * (1.0 + min_start.abs()) {
        return Err(StatsError::GridViolation(format!(
            "grid starts at {}, must start at or after 1.1 * t_burn_in = {min_start}",
            t_grid[0]
        )));
    }
    for pair in t_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(StatsError::GridViolation(format!(
                "grid not strictly increasing at {} -> {}",
                pair[0], pair[1]
            )));
        }
    }
    let (first, _) = window_indices(times, t_burn_in, f64::INFINITY);
    let Some(start) = first else {
        return Err(StatsError::EmptyWindow {
            lo: t_burn_in,
            hi: f64::INFINITY,
        });
    };
    // Cumulative trapezoid from t_burn_in, advanced once over the series.
    let mut k = start;
    let mut cum = 0.0;
    if times[start] > t_burn_in && start > 0 {
        // Partial first segment from t_burn_in to the first in-window sample.
        let (t0, t1) = (times[start - 1], times[start]);
        let v =
            series[start - 1] + (series[start] - series[start - 1]) * (t_burn_in - t0) / (t1 - t0);
        cum += 0.5 * (v + series[start]) * (times[start] - t_burn_in);
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &tg in t_grid {
        while k + 1 < times.len() && times[k + 1] <= tg + 1e-12 * (1.0 + tg.abs()) {
            cum += 0.5 * (series[k] + series[k + 1]) * (times[k + 1] - times[k]);
            k += 1;
        }
        let mut total = cum;
        if tg > times[k] && k + 1 < times.len() {
            let (t0, t1) = (times[k], times[k + 1]);
            let v = series[k] + (series[k + 1] - series[k]) * (tg - t0) / (t1 - t0);
            total += 0.5 * (series[k] + v) * (tg - times[k]);
        }
        let len = tg - t_burn_in;
        out.push(if len > 0.0 { total / len } else { series[k] });
    }
    Ok(out)
}

/// Unbiased cross-trajectory standard deviation per time point.
/// Rows are trajectories, all of equal length.
pub fn ensemble_std(per_trajectory: &[Vec<f64>]) -> Result<Vec<f64>, StatsError> {
    let n = per_trajectory.len();
    if n < 2 {
        return Err(StatsError::TooFewTrajectories(n));
    }
    let len = per_trajectory[0].len();
    for (i, row) in per_trajectory.iter().enumerate() {
        if row.len() != len {
            return Err(StatsError::InconsistentGrids(format!(
                "trajectory {i} has {} samples, trajectory 0 has {len}",
                row.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let mean = per_trajectory.iter().map(|r| r[t]).sum::<f64>() / n as f64;
        let ss = per_trajectory
            .iter()
            .map(|r| (r[t] - mean).powi(2))
            .sum::<f64>();
        out.push((ss / (n as f64 - 1.0)).sqrt());
    }
    Ok(out)
}

/// Pointwise cross-trajectory mean.
pub fn ensemble_mean(per_trajectory: &[Vec<f64>]) -> Result<Vec<f64>, StatsError> {
    let n = per_trajectory.len();
    if n == 0 {
        return Err(StatsError::TooFewTrajectories(0));
    }
    let len = per_trajectory[0].len();
    let mut out = vec![0.0; len];
    for row in per_trajectory {
        if row.len() != len {
            return Err(StatsError::InconsistentGrids("row length mismatch".into()));
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    Ok(out)
}

/// Least-squares line through `(log x, log y)` over an index window.
/// Returns (slope, intercept, r^2).
pub fn loglog_slope(
    x: &[f64],
    y: &[f64],
    window: std::ops::Range<usize>,
) -> Result<(f64, f64, f64), StatsError> {
    assert_eq!(x.len(), y.len());
    let idx: Vec<usize> = window.filter(|&i| i < x.len()).collect();
    if idx.len() < 2 {
        return Err(StatsError::GridViolation(
            "log-log fit needs at least two points".into(),
        ));
    }
    for &i in &idx {
        if !(x[i] > 0.0) || !(y[i] > 0.0) {
            return Err(StatsError::NonPositive(i));
        }
    }
    let n = idx.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &idx {
        let (lx, ly) = (x[i].ln(), y[i].ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let ss_tot = syy - sy * sy / n;
    let ss_res: f64 = idx
        .iter()
        .map(|&i| {
            let pred = intercept + slope * x[i].ln();
            (y[i].ln() - pred).powi(2)
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok((slope, intercept, r2))
}

/// Least-squares fit of `log(std)` against `log(T - t_burn_in)`.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ensemble diagnostics of one scalar series (for example the squared
/// interface norm of `v`): per-trajectory running time averages, their
/// pointwise mean and standard deviation, and the decay slope of the standard
/// deviation against the elapsed window length. The fit is absent when the
/// deviation vanishes somewhere in the window (identical trajectories).
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    /// Evaluation grid, starting at `1.1 * t_burn_in`.
    pub t_grid: Vec<f64>,
    /// Window lengths `T - t_burn_in` matching `t_grid`.
    pub window_lengths: Vec<f64>,
    pub per_trajectory_avg: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub slope_fit: Option<SlopeFit>,
}

impl EnsembleStats {
    /// Build from per-trajectory series sampled on one shared time grid.
    pub fn compute(
        times: &[f64],
        series_per_trajectory: &[Vec<f64>],
        t_burn_in: f64,
    ) -> Result<EnsembleStats, StatsError> {
        if series_per_trajectory.len() < 2 {
            return Err(StatsError::TooFewTrajectories(series_per_trajectory.len()));
        }
        let start = 1.1 * t_burn_in;
        let t_grid: Vec<f64> = times
            .iter()
            .copied()
            .filter(|&t| t >= start - 1e-12 * (1.0 + start.abs()))
            .collect();
        if t_grid.len() < 2 {
            return Err(StatsError::EmptyWindow {
                lo: start,
                hi: *times.last().unwrap_or(&start),
            });
        }
        let per_trajectory_avg: Vec<Vec<f64>> = series_per_trajectory
            .iter()
            .map(|s| running_time_average(times, s, t_burn_in, &t_grid))
            .collect::<Result<_, _>>()?;
        let mean = ensemble_mean(&per_trajectory_avg)?;
        let std = ensemble_std(&per_trajectory_avg)?;
        let window_lengths: Vec<f64> = t_grid.iter().map(|&t| t - t_burn_in).collect();
        let slope_fit = match loglog_slope(&window_lengths, &std, 0..window_lengths.len()) {
            Ok((slope, intercept, r_squared)) => Some(SlopeFit {
                slope,
                intercept,
                r_squared,
            }),
            Err(StatsError::NonPositive(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(EnsembleStats {
            t_grid,
            window_lengths,
            per_trajectory_avg,
            mean,
            std,
            slope_fit,
        })
    }
}
