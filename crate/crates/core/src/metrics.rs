//! Scalar summaries of a trajectory log.

use serde::Serialize;

use crate::engine::TrajectoryLog;
use crate::linalg::{sub2, Vec2};
use crate::network::Topology;

/// Least-squares slope of `ln v` against `t`. Non-positive or non-finite
/// values are skipped; `None` if fewer than two points remain.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite() && **v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Index range of the decaying transient: from the peak to the first
/// sample at or below twice the largest value of the final fifth.
pub fn transient_window(values: &[f64]) -> std::ops::Range<usize> {
    let n = values.len();
    if n == 0 {
        return 0..0;
    }
    let peak = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let tail_start = n - (n / 5).max(1);
    let floor = 2.0 * values[tail_start..].iter().copied().fold(0.0, f64::max);
    let end = (peak..n).find(|&i| values[i] <= floor).unwrap_or(n);
    if end - peak < 3 {
        0..n
    } else {
        peak..end
    }
}

/// Decay rate fitted over [`transient_window`].
pub fn transient_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let w = transient_window(values);
    fit_decay_rate(&times[w.clone()], &values[w])
}

/// Earliest time after which the series stays at or below `threshold`.
pub fn time_to_threshold(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    match values.iter().rposition(|v| !(*v <= threshold)) {
        None => times.first().copied(),
        Some(last) if last + 1 < values.len() => Some(times[last + 1]),
        Some(_) => None,
    }
}

/// Largest value at times `≥ t0`; 0 if there are none.
pub fn max_after(times: &[f64], values: &[f64], t0: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t0 - 1e-12)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsOptions {
    pub threshold: f64,
    /// Start of the window where tracking errors must have settled.
    pub tracking_tail: f64,
    /// Start of the window where observer errors must have settled.
    pub observer_tail: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            threshold: 0.05,
            tracking_tail: 20.0,
            observer_tail: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentMetrics {
    pub max_q_error: f64,
    pub final_q_error: f64,
    pub tail_q_error: f64,
    pub q_settle_time: Option<f64>,
    pub max_z_error: f64,
    pub final_z_error: f64,
    pub tail_z_error: f64,
    pub z_settle_time: Option<f64>,
    pub max_x_error: f64,
    pub final_x_error: f64,
    pub tail_x_error: f64,
    pub tail_ztilde: f64,
    /// Fitted exponent of `‖(s_i, x_ir)‖`.
    pub tracking_rate: Option<f64>,
    /// Fitted exponent of `‖(x̃_i, z̃_i)‖`.
    pub observer_rate: Option<f64>,
    pub peak_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub options: MetricsOptions,
    pub agents: Vec<AgentMetrics>,
}

impl RunMetrics {
    pub fn worst_tail_q_error(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| a.tail_q_error)
            .fold(0.0, f64::max)
    }

    pub fn worst_tail_z_error(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| a.tail_z_error)
            .fold(0.0, f64::max)
    }
}

/// `x_ir` from logged positions.
pub fn position_disagreement(log: &TrajectoryLog, top: &Topology, i: usize) -> Vec<Vec2> {
    log.rows
        .iter()
        .map(|r| {
            let xi = r.agents[i].x;
            let mut acc = [0.0, 0.0];
            for j in top.neighbors(i) {
                let d = sub2(xi, r.agents[j].x);
                acc = [acc[0] + d[0], acc[1] + d[1]];
            }
            if top.b(i) > 0.0 {
                let d = sub2(xi, r.leader.x0);
                acc = [acc[0] + d[0], acc[1] + d[1]];
            }
            acc
        })
        .collect()
}

pub fn metrics(log: &TrajectoryLog, top: &Topology, options: MetricsOptions) -> RunMetrics {
    let t = log.times();
    let agents = (0..log.n_agents)
        .map(|i| {
            let q = log.q_error(i);
            let z = log.z_error(i);
            let x = log.x_error(i);
            let xr = position_disagreement(log, top, i);
            let sx: Vec<f64> = log
                .rows
                .iter()
                .zip(&xr)
                .map(|(r, xr)| {
                    let s = r.agents[i].s;
                    (s[0] * s[0] + s[1] * s[1] + xr[0] * xr[0] + xr[1] * xr[1]).sqrt()
                })
                .collect();
            AgentMetrics {
                max_q_error: max_of(&q),
                final_q_error: q.last().copied().unwrap_or(0.0),
                tail_q_error: max_after(&t, &q, options.tracking_tail),
                q_settle_time: time_to_threshold(&t, &q, options.threshold),
                max_z_error: max_of(&z),
                final_z_error: z.last().copied().unwrap_or(0.0),
                tail_z_error: max_after(&t, &z, options.tracking_tail),
                z_settle_time: time_to_threshold(&t, &z, options.threshold),
                max_x_error: max_of(&x),
                final_x_error: x.last().copied().unwrap_or(0.0),
                tail_x_error: max_after(&t, &x, options.tracking_tail),
                tail_ztilde: max_after(&t, &log.ztilde_norm(i), options.observer_tail),
                tracking_rate: transient_decay_rate(&t, &sx),
                observer_rate: transient_decay_rate(&t, &log.observer_error(i)),
                peak_torque: max_of(&log.torque_norm(i)),
            }
        })
        .collect();
    RunMetrics { options, agents }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t = grid(100, 0.1);
        let v = vec![0.7; 100];
        assert!(fit_decay_rate(&t, &v).unwrap().abs() < 1e-15);
        assert!(transient_decay_rate(&t, &v).unwrap().abs() < 1e-15);
    }

    #[test]
    fn exponential_rate() {
        let t = grid(3001, 0.01);
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v).unwrap() + 2.0).abs() < 1e-6);
        assert!((transient_decay_rate(&t, &v).unwrap() + 2.0).abs() < 1e-6);
    }

    #[test]
    fn window_skips_the_rise_and_the_floor() {
        let t = grid(1001, 0.01);
        let v: Vec<f64> = t
            .iter()
            .map(|&t| {
                if t < 1.0 {
                    0.1 + t
                } else {
                    1.1 * (-(t - 1.0)).exp() + 1e-6
                }
            })
            .collect();
        let w = transient_window(&v);
        assert_eq!(w.start, 100);
        let r = transient_decay_rate(&t, &v).unwrap();
        assert!((r + 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn threshold_times() {
        let t = grid(5, 1.0);
        assert_eq!(
            time_to_threshold(&t, &[3.0, 2.0, 0.5, 0.2, 0.1], 1.0),
            Some(2.0)
        );
        assert_eq!(
            time_to_threshold(&t, &[3.0, 0.5, 2.0, 0.2, 0.1], 1.0),
            Some(3.0)
        );
        assert_eq!(time_to_threshold(&t, &[0.0; 5], 1.0), Some(0.0));
        assert_eq!(time_to_threshold(&t, &[0.0, 0.0, 0.0, 0.0, 2.0], 1.0), None);
        assert_eq!(
            time_to_threshold(&t, &[0.0, 0.0, f64::NAN, 0.0, 0.0], 1.0),
            Some(3.0)
        );
    }

    #[test]
    fn tail_max() {
        let t = grid(5, 1.0);
        assert_eq!(max_after(&t, &[9.0, 1.0, 3.0, 2.0, 0.0], 2.0), 3.0);
        assert_eq!(max_after(&t, &[9.0; 5], 10.0), 0.0);
    }
}
