//! CSV, JSON and SVG renderings of a [`SweepReport`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Row, SweepReport};

pub const CSV_HEADER: &str = "t,quantity,value,std_err,flags";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];

    pub fn file_name(&self) -> &'static str {
        match self {
            Format::Csv => "report.csv",
            Format::Json => "report.json",
            Format::Svg => "report.svg",
        }
    }
}

fn nonempty(report: &SweepReport) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Precondition("report has no rows".into()));
    }
    Ok(())
}

pub fn to_csv(report: &SweepReport) -> Result<String> {
    nonempty(report)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
        let _ = writeln!(
            out,
            "{:?},{},{:?},{:?},{}",
            r.t,
            r.quantity,
            r.value,
            r.std_err,
            flags.join(";")
        );
    }
    Ok(out)
}

pub fn to_json(report: &SweepReport) -> Result<String> {
    nonempty(report)?;
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<SweepReport> {
    Ok(serde_json::from_str(text)?)
}

const WIDTH: f64 = 640.0;
const PANEL: f64 = 220.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

/// Stacked panels, one per quantity: the values against `t` as a polyline,
/// and the petal reference, when there is one, as a dashed horizontal rule.
pub fn to_svg(report: &SweepReport) -> Result<String> {
    nonempty(report)?;
    let mut names: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !names.contains(&r.quantity.as_str()) {
            names.push(&r.quantity);
        }
    }
    let height = PANEL * names.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    for (k, name) in names.iter().enumerate() {
        let rows: Vec<&Row> = report.rows.iter().filter(|r| r.quantity == *name).collect();
        panel(&mut out, name, &rows, report.reference(name), PANEL * k as f64);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn panel(out: &mut String, name: &str, rows: &[&Row], reference: Option<f64>, y0: f64) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.value.is_finite())
        .map(|r| (r.t, r.value))
        .collect();
    let (mut tmin, mut tmax) = span(pts.iter().map(|p| p.0));
    let (mut vmin, mut vmax) = span(pts.iter().map(|p| p.1).chain(reference.filter(|r| r.is_finite())));
    widen(&mut tmin, &mut tmax);
    widen(&mut vmin, &mut vmax);
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (ya, yb) = (y0 + TOP, y0 + PANEL - BOTTOM);
    let sx = |t: f64| x0 + (t - tmin) / (tmax - tmin) * (x1 - x0);
    let sy = |v: f64| yb - (v - vmin) / (vmax - vmin) * (yb - ya);
    let _ = writeln!(out, r#"<g class="panel" data-quantity="{name}">"#);
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{:.1}" font-weight="bold">{name}</text>"#,
        y0 + 18.0
    );
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.1},{ya:.1} L{x0:.1},{yb:.1} L{x1:.1},{yb:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#,
        (x0 + x1) / 2.0,
        yb + 32.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">value</text>"#,
        (ya + yb) / 2.0,
        (ya + yb) / 2.0
    );
    for (t, anchor) in [(tmin, "start"), (tmax, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#,
            sx(t),
            yb + 14.0,
            tick(t)
        );
    }
    for v in [vmin, vmax] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            sy(v) + 4.0,
            tick(v)
        );
    }
    if let Some(r) = reference.filter(|r| r.is_finite()) {
        let _ = writeln!(
            out,
            r#"<line class="reference" x1="{x0:.1}" y1="{:.1}" x2="{x1:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
            sy(r),
            sy(r)
        );
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
    out.push_str("</g>\n");
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn widen(lo: &mut f64, hi: &mut f64) {
    if !lo.is_finite() || !hi.is_finite() {
        (*lo, *hi) = (0.0, 1.0);
    } else if *hi - *lo <= 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * (1.0 + lo.abs()) * 1e-3;
        *lo -= pad;
        *hi += pad;
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

pub fn render(report: &SweepReport, format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(report),
        Format::Json => to_json(report),
        Format::Svg => to_svg(report),
    }
}

/// Writes each requested format into `dir` (created if missing) and returns
/// the written paths.
pub fn render_report(report: &SweepReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    nonempty(report)?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for f in formats {
        let path = dir.join(f.file_name());
        std::fs::write(&path, render(report, *f)?).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{Provenance, Reference};
    use crate::kernel::KernelSource;
    use crate::wos::Flag;

    fn report(rows: Vec<Row>) -> SweepReport {
        SweepReport {
            rows,
            references: vec![Reference {
                quantity: "harmonic".into(),
                value: 0.14,
                source: "petal".into(),
            }],
            verdicts: vec![],
            provenance: Provenance {
                version: "0".into(),
                seed: 1,
                domain: "slit-strip".into(),
                petal: "p".into(),
                n_walks: 100,
                kernel_walks: 100,
                epsilon_shell: 1e-3,
                max_steps: 10,
            },
        }
    }

    fn row(t: f64, q: &str, v: f64) -> Row {
        Row {
            t,
            quantity: q.into(),
            value: v,
            std_err: 0.01,
            source: KernelSource::MonteCarlo,
            flags: vec![Flag::Truncation, Flag::Clamped],
        }
    }

    #[test]
    fn csv_header_and_flags() {
        let r = report(vec![row(0.0, "harmonic", 0.2), row(-2.0, "harmonic", 0.15)]);
        let csv = to_csv(&r).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,quantity,value,std_err,flags"));
        assert_eq!(lines.next(), Some("0.0,harmonic,0.2,0.01,truncation;clamped"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn empty_report_is_rejected() {
        let r = report(vec![]);
        for f in Format::ALL {
            assert!(render(&r, f).is_err());
        }
    }

    #[test]
    fn svg_has_one_polyline_per_quantity() {
        let r = report(vec![
            row(0.0, "harmonic", 0.2),
            row(0.0, "area", 1.0),
            row(-1.0, "harmonic", 0.15),
            row(-1.0, "area", f64::INFINITY),
        ]);
        let svg = to_svg(&r).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r#"class="reference""#).count(), 1);
        assert_eq!(svg.matches(">t</text>").count(), 2);
        assert_eq!(svg.matches(">value</text>").count(), 2);
    }

    #[test]
    fn json_round_trips() {
        let r = report(vec![
            row(0.0, "harmonic", 0.2),
            row(-1.0, "distance", f64::INFINITY),
        ]);
        let text = to_json(&r).unwrap();
        assert!(text.contains(r#""value": "inf""#));
        assert_eq!(from_json(&text).unwrap(), r);
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = render_report(
            &report(vec![row(0.0, "harmonic", 0.2)]),
            &[Format::Csv],
            &blocker.join("sub"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
