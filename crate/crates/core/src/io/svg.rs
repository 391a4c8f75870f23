//! Minimal static SVG line/band plots.

use std::fmt::Write as _;

use crate::ensemble::{EnsembleStats, ScalingBranch, ScalingStudy};
use crate::error::{Error, Result};
use crate::table::DecimatedTable;

/// Lower clip of logarithmic variance axes.
pub const LOG_FLOOR: f64 = 1e-6;
const MAX_POINTS: usize = 1500;
const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;

#[derive(Debug, Clone)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
    /// Logarithmic axis clipped below at the given floor.
    pub log_floor: Option<f64>,
}

impl Axis {
    pub fn linear(label: &str, min: f64, max: f64) -> Self {
        Self {
            label: label.into(),
            min,
            max,
            log_floor: None,
        }
    }

    pub fn log(label: &str, floor: f64, max: f64) -> Self {
        Self {
            label: label.into(),
            min: floor,
            max,
            log_floor: Some(floor),
        }
    }

    fn unit(&self, v: f64) -> f64 {
        match self.log_floor {
            Some(floor) => {
                let (lo, hi) = (self.min.max(floor).log10(), self.max.log10());
                (v.max(floor).log10() - lo) / (hi - lo)
            }
            None => (v - self.min) / (self.max - self.min),
        }
    }

    fn ticks(&self) -> Vec<f64> {
        match self.log_floor {
            Some(floor) => {
                let lo = self.min.max(floor).log10().ceil() as i32;
                let hi = self.max.log10().floor() as i32;
                (lo..=hi).map(|e| 10f64.powi(e)).collect()
            }
            None => {
                let span = self.max - self.min;
                let raw = span / 5.0;
                let mag = 10f64.powf(raw.log10().floor());
                let step = [1.0, 2.0, 5.0, 10.0]
                    .iter()
                    .map(|m| m * mag)
                    .find(|s| *s >= raw)
                    .unwrap_or(raw);
                let first = (self.min / step).ceil() as i64;
                let last = (self.max / step).floor() as i64;
                (first..=last).map(|k| k as f64 * step).collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Band {
    pub color: String,
    pub xs: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn stride(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

fn render_panel(out: &mut String, p: &Panel, top: f64) {
    let w = WIDTH - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let x0 = MARGIN_L;
    let y0 = top + MARGIN_T;
    let px = |x: f64| x0 + w * p.x.unit(x).clamp(0.0, 1.0);
    let py = |y: f64| y0 + h * (1.0 - p.y.unit(y).clamp(0.0, 1.0));

    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"##,
        x0 + w / 2.0,
        top + 18.0,
        esc(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#000"/>"##
    );
    for t in p.x.ticks() {
        let x = px(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#000"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
            y0 + h,
            y0 + h + 5.0,
            y0 + h + 18.0,
            fmt_tick(t, p.x.log_floor.is_some())
        );
    }
    for t in p.y.ticks() {
        let y = py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#000"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            fmt_tick(t, p.y.log_floor.is_some())
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"##,
        x0 + w / 2.0,
        y0 + h + 36.0,
        esc(&p.x.label)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"##,
        x0 - 50.0,
        y0 + h / 2.0,
        x0 - 50.0,
        y0 + h / 2.0,
        esc(&p.y.label)
    );

    for b in &p.bands {
        let s = stride(b.xs.len());
        let idx: Vec<usize> = (0..b.xs.len()).step_by(s).collect();
        let mut pts = String::new();
        for &i in &idx {
            let _ = write!(pts, "{:.2},{:.2} ", px(b.xs[i]), py(b.hi[i]));
        }
        for &i in idx.iter().rev() {
            let _ = write!(pts, "{:.2},{:.2} ", px(b.xs[i]), py(b.lo[i]));
        }
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"##,
            pts.trim_end(),
            b.color
        );
    }
    for (k, s) in p.series.iter().enumerate() {
        let st = stride(s.xs.len());
        let mut pts = String::new();
        for i in (0..s.xs.len()).step_by(st) {
            if s.ys[i].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", px(s.xs[i]), py(s.ys[i]));
            }
        }
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"##,
            pts.trim_end(),
            s.color
        );
        let ly = y0 + 12.0 + 16.0 * k as f64;
        let lx = x0 + w + 10.0;
        let _ = writeln!(
            out,
            r##"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"##,
            lx + 18.0,
            s.color,
            lx + 22.0,
            ly + 4.0,
            esc(&s.label)
        );
    }
}

/// Stacks panels vertically into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn t_axis(times: &[f64]) -> Axis {
    let max = times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    Axis::linear("γ²t", 0.0, max)
}

fn series(label: &str, color: &str, xs: &[f64], ys: &[f64]) -> Series {
    Series {
        label: label.into(),
        color: color.into(),
        xs: xs.to_vec(),
        ys: ys.to_vec(),
    }
}

fn y_range(cols: &[&[f64]]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in cols {
        for &v in c.iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

/// Single trajectory: Bell overlaps and parity variance; homodyne signal.
pub fn trajectory_figure(table: &DecimatedTable, homodyne_ma: &[f64]) -> Result<String> {
    let t = &table.times;
    let bp = table.require("bell_plus")?;
    let bm = table.require("bell_minus")?;
    let var = table.require("var_zz")?;
    let hom = table.require("homodyne_mean_rate")?;
    if homodyne_ma.len() != t.len() {
        return Err(Error::Record("moving average length mismatch".into()));
    }
    let top = Panel {
        title: "Bell-state overlaps and parity variance".into(),
        x: t_axis(t),
        y: Axis::linear("", 0.0, 1.05),
        series: vec![
            series("|⟨Φ±|ψ⟩|²", "#1f77b4", t, bp),
            series("|⟨Ψ±|ψ⟩|²", "#d62728", t, bm),
            series("Var(σZσZ)", "#2ca02c", t, var),
        ],
        bands: vec![],
    };
    let (lo, hi) = y_range(&[hom, homodyne_ma]);
    let bottom = Panel {
        title: "Homodyne signal".into(),
        x: t_axis(t),
        y: Axis::linear("dY/dt", lo, hi),
        series: vec![
            series("moving avg dY0/dt", "#999999", t, homodyne_ma),
            series("⟨L+L†⟩", "#000000", t, hom),
        ],
        bands: vec![],
    };
    Ok(render(&[top, bottom]))
}

fn log_band(stats: &EnsembleStats, name: &str, color: &str) -> Result<(Series, Band)> {
    let b = stats.require(name)?;
    let lo = b.mean.iter().zip(&b.std).map(|(m, s)| (m - s).max(LOG_FLOOR)).collect();
    let hi = b.mean.iter().zip(&b.std).map(|(m, s)| m + s).collect();
    Ok((
        series(&format!("{name} mean"), color, &stats.times, &b.mean),
        Band {
            color: color.into(),
            xs: stats.times.clone(),
            lo,
            hi,
        },
    ))
}

/// Ensemble: parity-variance mean with ±1σ band on a log axis; when the
/// ensemble is cross-driven, the reduced filter's band and the fractional
/// residual error below.
pub fn ensemble_figure(stats: &EnsembleStats) -> Result<String> {
    let mut top = Panel {
        title: format!("Parity variance, {} ensemble (n = {})", stats.mode.label(), stats.n_ok()),
        x: t_axis(&stats.times),
        y: Axis::log("Var(Π)", LOG_FLOOR, 2.0),
        series: vec![],
        bands: vec![],
    };
    let (s, b) = log_band(stats, stats.mode.variance_column(), "#1f77b4")?;
    top.series.push(s);
    top.bands.push(b);
    let mut panels = vec![];
    if let Some(frac) = stats.band("frac_err") {
        let (s, b) = log_band(stats, "var_pi_rf", "#d62728")?;
        top.series.push(s);
        top.bands.push(b);
        let lo: Vec<f64> = frac.mean.iter().zip(&frac.std).map(|(m, s)| (m - s).max(0.0)).collect();
        let hi: Vec<f64> = frac.mean.iter().zip(&frac.std).map(|(m, s)| m + s).collect();
        let (_, ymax) = y_range(&[&hi]);
        panels.push(Panel {
            title: "Fractional residual error of the reduced filter".into(),
            x: t_axis(&stats.times),
            y: Axis::linear("|ΔVar|/Var", 0.0, ymax.max(0.1)),
            series: vec![series("mean", "#000000", &stats.times, &frac.mean)],
            bands: vec![Band {
                color: "#7f7f7f".into(),
                xs: stats.times.clone(),
                lo,
                hi,
            }],
        });
    }
    panels.insert(0, top);
    Ok(render(&panels))
}

/// Log–log discrepancy against scale factor, one line per branch.
pub fn scaling_figure(study: &ScalingStudy) -> Result<String> {
    let mut all = Vec::new();
    let mut lines = Vec::new();
    for (branch, color) in [(ScalingBranch::G, "#1f77b4"), (ScalingBranch::AlphaKappa, "#d62728")] {
        let pts: Vec<(f64, f64)> = study
            .branch(branch)
            .iter()
            .filter_map(|r| r.discrepancy.filter(|d| *d > 0.0).map(|d| (r.scale, d)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        all.extend(pts.iter().copied());
        lines.push(Series {
            label: format!("{} branch", branch.label()),
            color: color.into(),
            xs: pts.iter().map(|p| p.0).collect(),
            ys: pts.iter().map(|p| p.1).collect(),
        });
    }
    if all.is_empty() {
        return Err(Error::Record("no finite discrepancies to plot".into()));
    }
    let smax = all.iter().map(|p| p.0).fold(1.0, f64::max);
    let dmin = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let dmax = all.iter().map(|p| p.1).fold(0.0, f64::max);
    let panel = Panel {
        title: "Reduced-filter discrepancy vs coupling scale".into(),
        x: Axis::log("scale s", 1.0, (smax * 1.1).max(2.0)),
        y: Axis::log("discrepancy", dmin / 2.0, dmax * 2.0),
        series: lines,
        bands: vec![],
    };
    Ok(render(&[panel]))
}
