//! Minimal SVG line plots and the data files behind them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cpnest::accel::RunTrace;

use crate::error::{io_err, HarnessError, Result};
use crate::profile::{Metric, TauProfile};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#e377c2"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        LEFT + (x - self.x0) / span * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (y, y0, y1) =
            if self.log_y { (y.log10(), self.y0.log10(), self.y1.log10()) } else { (y, self.y0, self.y1) };
        let span = if y1 > y0 { y1 - y0 } else { 1.0 };
        H - BOTTOM - (y - y0) / span * (H - TOP - BOTTOM)
    }
}

fn frame(s: &mut String, ax: &Axes, title: &str, xlabel: &str, ylabel: &str) {
    write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" text-anchor="middle">{}</text>
<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>
"#,
        W / 2.0,
        escape(title),
        W - LEFT - RIGHT,
        H - TOP - BOTTOM,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(xlabel),
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    )
    .unwrap();
    for i in 0..=4 {
        let x = ax.x0 + (ax.x1 - ax.x0) * i as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            ax.px(x),
            H - BOTTOM + 16.0,
            fmt_tick(x)
        )
        .unwrap();
    }
    if ax.log_y {
        let (lo, hi) = (ax.y0.log10().floor() as i32, ax.y1.log10().ceil() as i32);
        let stride = ((hi - lo) / 8).max(1);
        for e in (lo..=hi).step_by(stride as usize) {
            let y = 10f64.powi(e);
            if y >= ax.y0 && y <= ax.y1 {
                writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"#, LEFT - 4.0, ax.py(y) + 4.0)
                    .unwrap();
            }
        }
    } else {
        for i in 0..=4 {
            let y = ax.y0 + (ax.y1 - ax.y0) * i as f64 / 4.0;
            writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 4.0,
                ax.py(y) + 4.0,
                fmt_tick(y)
            )
            .unwrap();
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(s: &mut String, pts: &[(f64, f64)], color: &str, class: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        write!(d, "{x:.2},{y:.2} ").unwrap();
    }
    writeln!(
        s,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        d.trim_end()
    )
    .unwrap();
}

fn cost_of(metric: Metric, r: &cpnest::accel::IterationRecord) -> f64 {
    match metric {
        Metric::WallTime => r.wall_seconds,
        Metric::SweepEquivalents => r.sweep_equivalents,
    }
}

/// Writes `<stem>.dat` (cost, ‖∇f‖/n_X per record) and `<stem>.svg` (log-scale gradient
/// axis, one circle per restarted record). Returns both paths.
pub fn emit_convergence_curve(trace: &RunTrace, metric: Metric, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    if trace.records.is_empty() {
        return Err(HarnessError::Usage("cannot plot an empty trace".into()));
    }
    let n = trace.n_vars.max(1) as f64;
    let rows: Vec<(f64, f64)> = trace.records.iter().map(|r| (cost_of(metric, r), r.grad_norm / n)).collect();

    let mut dat = format!("# {}\t{}\n", metric.label(), "grad_norm/n_vars");
    for (c, g) in &rows {
        writeln!(dat, "{c:?}\t{g:?}").unwrap();
    }
    let dat_path = stem.with_extension("dat");
    fs::write(&dat_path, dat).map_err(io_err(&dat_path))?;

    let positive: Vec<f64> = rows.iter().map(|r| r.1).filter(|&g| g > 0.0 && g.is_finite()).collect();
    let mut lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = positive.iter().copied().fold(0.0, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (1e-12, 1.0);
    }
    if trace.tol > 0.0 {
        lo = lo.min(trace.tol);
        hi = hi.max(trace.tol);
    }
    let ax = Axes {
        x0: 0.0,
        x1: rows.last().map_or(1.0, |r| r.0).max(f64::MIN_POSITIVE),
        y0: 10f64.powf(lo.log10().floor()),
        y1: 10f64.powf(hi.log10().ceil()),
        log_y: true,
    };
    let clamp = |g: f64| if g > 0.0 && g.is_finite() { g } else { ax.y0 };
    let mut svg = String::new();
    frame(&mut svg, &ax, &trace.solver, metric.label(), "‖∇f‖ / n_X");
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(c, g)| (ax.px(c), ax.py(clamp(g)))).collect();
    polyline(&mut svg, &pts, COLORS[2], "curve");
    if trace.tol > 0.0 {
        let y = ax.py(trace.tol);
        writeln!(
            svg,
            r##"<line class="tol" x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            W - RIGHT
        )
        .unwrap();
    }
    for (r, &(x, y)) in trace.records.iter().zip(&pts) {
        if r.restarted {
            writeln!(svg, r##"<circle class="restart" cx="{x:.2}" cy="{y:.2}" r="3" fill="none" stroke="#d62728"/>"##)
                .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    let svg_path = stem.with_extension("svg");
    fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
    Ok((dat_path, svg_path))
}

/// Step plot of a τ-profile, one curve per solver.
pub fn tau_plot_svg(profile: &TauProfile, metric: Metric) -> String {
    let ax = Axes { x0: profile.taus[0], x1: *profile.taus.last().unwrap(), y0: 0.0, y1: 1.0, log_y: false };
    let mut svg = String::new();
    frame(&mut svg, &ax, &format!("performance profile ({})", metric.label()), "τ", "fraction of problems");
    for (s, curve) in profile.fractions.iter().enumerate() {
        let color = COLORS[s % COLORS.len()];
        let mut pts = Vec::with_capacity(2 * curve.len());
        for (t, &f) in curve.iter().enumerate() {
            if t > 0 {
                pts.push((ax.px(profile.taus[t]), ax.py(curve[t - 1])));
            }
            pts.push((ax.px(profile.taus[t]), ax.py(f)));
        }
        polyline(&mut svg, &pts, color, "profile");
        let ly = TOP + 16.0 + 16.0 * s as f64;
        writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            W - RIGHT - 8.0,
            escape(&profile.solvers[s])
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<stem>.csv` and `<stem>.svg` for a profile.
pub fn write_profile(profile: &TauProfile, metric: Metric, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv = stem.with_extension("csv");
    fs::write(&csv, profile.to_csv()).map_err(io_err(&csv))?;
    let svg = stem.with_extension("svg");
    fs::write(&svg, tau_plot_svg(profile, metric)).map_err(io_err(&svg))?;
    Ok((csv, svg))
}
