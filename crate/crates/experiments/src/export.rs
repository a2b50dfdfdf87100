//! CSV and SVG renderings of experiment results.
//!
//! CSV files open with a `# format_version=1` comment row followed by a
//! header. Column order is fixed:
//!
//! * overload: `condition,v_tp,v_tf,v_u,assortment,attributes,sessions,purchases,sr,mean_turns,compared,statistic,p_value,method`
//!   (the last four columns repeat the paired test on every row)
//! * sweeps and ablations: `curve,variant,v_u,axis,sessions,purchases,sr`

use std::fmt::Write as _;
use std::str::FromStr;

use hesitator_core::domain::Level;

use crate::runner::ExperimentError;
use crate::studies::{AblationResult, OverloadResult, SweepResult};

pub const CSV_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            _ => Err(ExperimentError::Export(format!("unsupported format `{s}`"))),
        }
    }
}

pub enum ResultRef<'a> {
    Overload(&'a OverloadResult),
    Sweep(&'a SweepResult),
    Ablation(&'a AblationResult),
}

pub fn export_results(result: ResultRef<'_>, format: Format) -> Result<Vec<u8>, ExperimentError> {
    match (result, format) {
        (ResultRef::Overload(r), Format::Csv) => overload_csv(r),
        (ResultRef::Overload(_), Format::Svg) => Err(ExperimentError::Export("overload results have no SVG form".into())),
        (ResultRef::Sweep(r), Format::Csv) => sweep_csv(&[r]),
        (ResultRef::Sweep(r), Format::Svg) => sweep_svg(&[r]).map(String::into_bytes),
        (ResultRef::Ablation(r), Format::Csv) => sweep_csv(&[&r.structured, &r.flat]),
        (ResultRef::Ablation(r), Format::Svg) => sweep_svg(&[&r.structured, &r.flat]).map(String::into_bytes),
    }
}

fn csv_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Export(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, ExperimentError> {
    let body = w.into_inner().map_err(csv_err)?;
    let mut out = format!("# format_version={CSV_FORMAT_VERSION}\n").into_bytes();
    out.extend(body);
    Ok(out)
}

pub fn overload_csv(r: &OverloadResult) -> Result<Vec<u8>, ExperimentError> {
    if r.conditions.is_empty() {
        return Err(ExperimentError::Export("empty result".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "condition", "v_tp", "v_tf", "v_u", "assortment", "attributes", "sessions", "purchases", "sr", "mean_turns", "compared",
        "statistic", "p_value", "method",
    ])
    .map_err(csv_err)?;
    let compared = format!("{} vs {}", r.compared.0, r.compared.1);
    let (stat, p, method) = match &r.test {
        Some(t) => (t.statistic.to_string(), t.p_value.to_string(), format!("{:?}", t.method).to_lowercase()),
        None => (String::new(), "1".to_string(), "degenerate".to_string()),
    };
    for c in &r.conditions {
        let k = &c.condition;
        w.write_record([
            k.name.clone(),
            k.time_pressure.to_string(),
            k.format.to_string(),
            k.uncertainty.to_string(),
            k.assortment.to_string(),
            k.attributes.to_string(),
            c.sessions.len().to_string(),
            c.purchases.to_string(),
            c.sr.to_string(),
            c.mean_turns.to_string(),
            compared.clone(),
            stat.clone(),
            p.clone(),
            method.clone(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn sweep_csv(results: &[&SweepResult]) -> Result<Vec<u8>, ExperimentError> {
    if results.iter().all(|r| r.points.is_empty()) {
        return Err(ExperimentError::Export("empty result".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["curve", "variant", "v_u", "axis", "sessions", "purchases", "sr"]).map_err(csv_err)?;
    for r in results {
        for p in &r.points {
            w.write_record([
                r.curve.to_string(),
                r.variant.clone(),
                p.uncertainty.to_string(),
                p.axis.to_string(),
                p.sessions.to_string(),
                p.purchases.to_string(),
                p.sr.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Line chart of SR against the sweep axis, one polyline per
/// (variant, uncertainty) series.
pub fn sweep_svg(results: &[&SweepResult]) -> Result<String, ExperimentError> {
    let mut series: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    for r in results {
        let mut levels: Vec<Level> = r.points.iter().map(|p| p.uncertainty).collect();
        levels.sort();
        levels.dedup();
        for u in levels {
            let label = if results.len() > 1 { format!("{} v_u={u}", r.variant) } else { format!("v_u={u}") };
            series.push((label, r.series(u)));
        }
    }
    if series.iter().all(|s| s.1.is_empty()) {
        return Err(ExperimentError::Export("empty result".into()));
    }
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 160.0, 30.0, 50.0);
    let xs: Vec<usize> = series.iter().flat_map(|s| s.1.iter().map(|p| p.0)).collect();
    let xmin = *xs.iter().min().unwrap_or(&0) as f64;
    let xmax = *xs.iter().max().unwrap_or(&1) as f64;
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let px = |x: usize| left + (x as f64 - xmin) / span * (w - left - right);
    let py = |y: f64| top + (1.0 - y) * (h - top - bottom);
    let curve = results[0].curve;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom
    );
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#, h - bottom);
    for tick in 0..=4 {
        let y = f64::from(tick) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{y:.2}</text>"#,
            left - 6.0,
            py(y) + 4.0
        );
    }
    let mut ticks = xs.clone();
    ticks.sort_unstable();
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{x}</text>"#,
            px(x),
            h - bottom + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 12.0,
        curve.axis_label()
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="12" transform="rotate(-90 16 {:.1})" text-anchor="middle">success rate</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        let ly = top + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            w - right + 10.0,
            w - right + 30.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11">{label}</text>"#, w - right + 36.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
