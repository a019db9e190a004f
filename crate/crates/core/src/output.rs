//! Result files: trajectory CSV, JSON summary and SVG line charts.
//!
//! CSV columns are `t`, then for each follower `i = 1..n` the sixteen
//! columns `a{i}_q1 a{i}_q2 a{i}_z1 a{i}_z2 a{i}_x1 a{i}_x2 a{i}_xhat1
//! a{i}_xhat2 a{i}_zhat1 a{i}_zhat2 a{i}_u1 a{i}_u2 a{i}_tau1 a{i}_tau2
//! a{i}_s1 a{i}_s2`, then the leader's `l_q1 l_q2 l_z1 l_z2 l_x1 l_x2`.
//! Values are written with 17 significant digits so reading a file back
//! reproduces the log exactly.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{AgentRecord, LeaderRecord, LogRow, RunDiagnostics, TrajectoryLog};
use crate::metrics::RunMetrics;
use crate::observer::ErrorMatrix;

pub const AGENT_COLUMNS: [&str; 16] = [
    "q1", "q2", "z1", "z2", "x1", "x2", "xhat1", "xhat2", "zhat1", "zhat2", "u1", "u2", "tau1",
    "tau2", "s1", "s2",
];

pub const LEADER_COLUMNS: [&str; 6] = ["q1", "q2", "z1", "z2", "x1", "x2"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad trajectory file: {0}")]
    Format(String),
}

pub fn csv_header(n_agents: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n_agents {
        h.extend(AGENT_COLUMNS.iter().map(|c| format!("a{i}_{c}")));
    }
    h.extend(LEADER_COLUMNS.iter().map(|c| format!("l_{c}")));
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(log: &TrajectoryLog, out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(log.n_agents))?;
    let mut rec = Vec::with_capacity(1 + 16 * log.n_agents + 6);
    for row in &log.rows {
        rec.clear();
        rec.push(fmt(row.t));
        for a in &row.agents {
            for pair in [a.q, a.z, a.x, a.xhat, a.zhat, a.u, a.tau, a.s] {
                rec.push(fmt(pair[0]));
                rec.push(fmt(pair[1]));
            }
        }
        let l = &row.leader;
        for pair in [l.q0, l.z0, l.x0] {
            rec.push(fmt(pair[0]));
            rec.push(fmt(pair[1]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<TrajectoryLog, OutputError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let width = header.len();
    if width < 7 || (width - 7) % 16 != 0 {
        return Err(OutputError::Format(format!(
            "unexpected column count {width}"
        )));
    }
    let n = (width - 7) / 16;
    if header != csv_header(n) {
        return Err(OutputError::Format(
            "header does not match the documented columns".into(),
        ));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| OutputError::Format(format!("row {}: {e}", line + 1)))?;
        let pair = |k: usize| [v[k], v[k + 1]];
        let agents = (0..n)
            .map(|i| {
                let b = 1 + 16 * i;
                AgentRecord {
                    q: pair(b),
                    z: pair(b + 2),
                    x: pair(b + 4),
                    xhat: pair(b + 6),
                    zhat: pair(b + 8),
                    u: pair(b + 10),
                    tau: pair(b + 12),
                    s: pair(b + 14),
                }
            })
            .collect();
        let b = 1 + 16 * n;
        rows.push(LogRow {
            t: v[0],
            agents,
            leader: LeaderRecord {
                q0: pair(b),
                z0: pair(b + 2),
                x0: pair(b + 4),
            },
        });
    }
    Ok(TrajectoryLog { n_agents: n, rows })
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub n_agents: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: Option<u64>,
    pub rows: usize,
    pub metrics: &'a RunMetrics,
    pub diagnostics: &'a RunDiagnostics,
    pub observer_error_matrix: ErrorMatrix,
}

/// One named series for [`svg_line_chart`].
pub struct Series<'a> {
    pub name: String,
    pub values: &'a [f64],
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

/// A standalone SVG line chart with one `<polyline>` per series.
pub fn svg_line_chart(title: &str, y_label: &str, times: &[f64], series: &[Series]) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let t0 = times.first().copied().unwrap_or(0.0);
    let t1 = times.last().copied().unwrap_or(1.0).max(t0 + 1e-12);
    let finite = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite());
    let (mut y0, mut y1) = finite.fold((0.0_f64, 0.0_f64), |(a, b), v| (a.min(v), b.max(v)));
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let ystep = nice_step(y1 - y0);
    y0 = (y0 / ystep).floor() * ystep;
    y1 = (y1 / ystep).ceil() * ystep;
    let sx = |t: f64| left + (t - t0) / (t1 - t0) * pw;
    let sy = |v: f64| top + (y1 - v) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    let tstep = nice_step(t1 - t0);
    let mut t = (t0 / tstep).ceil() * tstep;
    while t <= t1 + 1e-9 {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            top,
            top + ph,
            top + ph + 16.0,
            trim(t)
        );
        t += tstep;
    }
    let mut v = y0;
    while v <= y1 + ystep * 1e-9 {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0,
            trim(v)
        );
        v += ystep;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = String::new();
        for (t, v) in times.iter().zip(ser.values) {
            if v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(*t), sy(*v));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn per_agent(data: &[Vec<f64>]) -> Vec<Series<'_>> {
    data.iter()
        .enumerate()
        .map(|(i, v)| Series {
            name: format!("agent {}", i + 1),
            values: v,
        })
        .collect()
}

/// The three error plots: joint-angle tracking, velocity tracking and
/// velocity estimation, one line per follower.
pub fn figures(log: &TrajectoryLog) -> Vec<(&'static str, String)> {
    let t = log.times();
    let build =
        |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<Vec<f64>> { (0..log.n_agents).map(f).collect() };
    let q = build(&|i| log.q_error(i));
    let z = build(&|i| log.z_error(i));
    let zt = build(&|i| log.ztilde_norm(i));
    vec![
        (
            "fig2.svg",
            svg_line_chart(
                "Position tracking errors",
                "‖q_i − q_0‖∞",
                &t,
                &per_agent(&q),
            ),
        ),
        (
            "fig3.svg",
            svg_line_chart(
                "Velocity tracking errors",
                "‖z_i − z_0‖∞",
                &t,
                &per_agent(&z),
            ),
        ),
        (
            "fig4.svg",
            svg_line_chart(
                "Velocity observation errors",
                "‖ẑ_i − z_i‖∞",
                &t,
                &per_agent(&zt),
            ),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_log() -> TrajectoryLog {
        let rec = |k: f64| AgentRecord {
            q: [k, -k],
            z: [0.1 * k, 1.0 / 3.0],
            x: [std::f64::consts::PI, k * 1e-300],
            xhat: [1e300, -0.0],
            zhat: [2.5, 7.0],
            u: [0.0, 1.0],
            tau: [1.0, 2.0],
            s: [k.sin(), k.cos()],
        };
        TrajectoryLog {
            n_agents: 2,
            rows: (0..3)
                .map(|k| LogRow {
                    t: k as f64 * 0.1,
                    agents: vec![rec(k as f64), rec(k as f64 + 0.5)],
                    leader: LeaderRecord {
                        q0: [0.0, 0.1],
                        z0: [2.0, 1.0],
                        x0: [0.2 * k as f64, 0.3],
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn header_layout() {
        let h = csv_header(2);
        assert_eq!(h.len(), 1 + 32 + 6);
        assert_eq!(h[1], "a1_q1");
        assert_eq!(h[16], "a1_s2");
        assert_eq!(h[17], "a2_q1");
        assert_eq!(h[38], "l_x2");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = tiny_log();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let log = tiny_log();
        for (_, svg) in figures(&log) {
            assert_eq!(svg.matches("<polyline").count(), 2);
            assert!(svg.starts_with("<?xml"));
            assert!(svg.trim_end().ends_with("</svg>"));
        }
    }
}
