//! Report export: JSON document, CSV interval hulls, and SVG projections
//! with the oracle (or Monte Carlo hull) drawn inside the data-driven sets.
//! Output bytes are a pure function of the report.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use zonoreach_core::linear_reach::ReachSequence;

use crate::config::{HarnessError, HarnessResult};
use crate::experiment::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    Svg,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(format!("unknown format `{other}` (expected json, csv, svg)")),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Json => "json",
            ExportFormat::Csv => "csv",
            ExportFormat::Svg => "svg",
        })
    }
}

/// Default projection pairs by state dimension; five and more states get
/// the three canonical pairs.
pub fn default_projection_pairs(dim: usize) -> Vec<(usize, usize)> {
    match dim {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        3 => vec![(0, 1), (1, 2)],
        4 => vec![(0, 1), (2, 3)],
        _ => vec![(0, 1), (2, 3), (4, 0)],
    }
}

/// Write the selected formats into `outdir` and return the created paths.
/// `dims` overrides the default projection pair selection for SVG.
pub fn export(
    report: &ExperimentReport,
    formats: &[ExportFormat],
    outdir: &Path,
    dims: Option<(usize, usize)>,
) -> HarnessResult<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir)?;
    let mut manifest = Vec::new();
    for format in formats {
        match format {
            ExportFormat::Json => {
                let path = outdir.join("report.json");
                std::fs::write(&path, report.to_json())?;
                manifest.push(path);
            }
            ExportFormat::Csv => {
                let path = outdir.join("reach_data_driven.csv");
                std::fs::write(&path, report.reach_data_driven.interval_hull_csv())?;
                manifest.push(path);
                if let Some(oracle) = &report.reach_oracle {
                    let path = outdir.join("reach_oracle.csv");
                    std::fs::write(&path, oracle.interval_hull_csv())?;
                    manifest.push(path);
                }
            }
            ExportFormat::Svg => {
                let dim = report.reach_data_driven.dim();
                let pairs = match dims {
                    Some(p) => vec![p],
                    None => default_projection_pairs(dim),
                };
                if pairs.is_empty() {
                    return Err(HarnessError::config(
                        "formats",
                        format!("svg export needs a 2-D projection, state dimension is {dim}"),
                    ));
                }
                for pair in pairs {
                    let svg = render_svg(report, pair)?;
                    let path = outdir.join(format!("reach_p{}_{}.svg", pair.0, pair.1));
                    std::fs::write(&path, svg)?;
                    manifest.push(path);
                }
            }
        }
    }
    Ok(manifest)
}

fn projected_outer(seq: &ReachSequence, pair: (usize, usize)) -> HarnessResult<Vec<Vec<[f64; 2]>>> {
    seq.sets
        .iter()
        .map(|z| {
            z.project(pair)
                .map_err(|e| HarnessError::config("dims", e.to_string()))
        })
        .collect()
}

/// Render one projection pair: the data-driven set outline per step with
/// the oracle set (linear runs) or the hull of the sampled states
/// (nonlinear runs) filled inside it.
fn render_svg(report: &ExperimentReport, pair: (usize, usize)) -> HarnessResult<String> {
    let outer = projected_outer(&report.reach_data_driven, pair)?;
    let inner: Vec<Vec<[f64; 2]>> = match &report.reach_oracle {
        Some(oracle) => projected_outer(oracle, pair)?,
        None => report
            .mc_states
            .iter()
            .map(|states| {
                convex_hull(
                    &states
                        .iter()
                        .map(|x| [x[pair.0], x[pair.1]])
                        .collect::<Vec<_>>(),
                )
            })
            .collect(),
    };

    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for poly in outer.iter().chain(inner.iter()) {
        for p in poly {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
    }
    if !min.iter().chain(max.iter()).all(|v| v.is_finite()) {
        min = [0.0, 0.0];
        max = [1.0, 1.0];
    }
    let span = [(max[0] - min[0]).max(1e-9), (max[1] - min[1]).max(1e-9)];
    let pad = [span[0] * 0.05, span[1] * 0.05];
    // SVG y grows downward; mirror the y coordinate.
    let view = (
        min[0] - pad[0],
        -(max[1] + pad[1]),
        span[0] + 2.0 * pad[0],
        span[1] + 2.0 * pad[1],
    );
    let stroke = (span[0].max(span[1])) * 0.004;

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"720\" \
         viewBox=\"{} {} {} {}\">\n",
        view.0, view.1, view.2, view.3
    ));
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        view.0, view.1, view.2, view.3
    ));
    svg.push_str(&format!(
        "<!-- projection dims ({}, {}), {} steps -->\n",
        pair.0,
        pair.1,
        outer.len()
    ));
    for (k, poly) in outer.iter().enumerate() {
        svg.push_str(&polygon_element(
            poly,
            "outer",
            k,
            "none",
            "#1f77b4",
            stroke,
        ));
    }
    for (k, poly) in inner.iter().enumerate() {
        svg.push_str(&polygon_element(
            poly,
            "inner",
            k,
            "#d6272833",
            "#d62728",
            stroke * 0.75,
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn polygon_element(
    poly: &[[f64; 2]],
    class: &str,
    step: usize,
    fill: &str,
    stroke_color: &str,
    stroke: f64,
) -> String {
    let mut points = String::new();
    for p in poly {
        points.push_str(&format!("{},{} ", p[0], -p[1]));
    }
    format!(
        "<polygon class=\"{class}\" data-step=\"{step}\" points=\"{}\" fill=\"{fill}\" \
         stroke=\"{stroke_color}\" stroke-width=\"{stroke}\"/>\n",
        points.trim_end()
    )
}

/// Andrew's monotone chain (counterclockwise, collinear points dropped).
/// Degenerate inputs (fewer than three distinct points) pass through.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
