//! Report emission: summary CSV, merged JSON and SVG line charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::score::DatasetReport;

pub const CSV_HEADER: [&str; 6] = ["model", "params", "dataset", "f1", "missed_mean", "missed_std"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub x: f64,
    pub y: f64,
    /// Tick caption under the point (model name for the size sweep).
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<ChartPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLine {
    pub caption: String,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XTicks {
    /// One tick per point, captioned with the point label.
    AtPoints,
    /// Integer ticks 1..=max.
    Integers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub references: Vec<ReferenceLine>,
    pub x_ticks: XTicks,
}

const PALETTE: [&str; 6] = ["#1f4fbf", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 110.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl LineChart {
    pub fn point_count(&self) -> usize {
        self.series.iter().map(|s| s.points.len()).sum()
    }

    fn x_max(&self) -> f64 {
        let m = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.x))
            .fold(0.0_f64, f64::max);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    fn y_max(&self) -> f64 {
        let m = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.y))
            .chain(self.references.iter().map(|r| r.y))
            .fold(0.0_f64, f64::max);
        ((m * 1.15 * 10.0).ceil() / 10.0).clamp(0.1, 1.0)
    }

    /// Renders a standalone SVG document. The x axis starts at zero and is
    /// linear, so point spacing is proportional to the x values.
    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let x_max = self.x_max();
        let y_max = self.y_max();
        let sx = |x: f64| LEFT + x / x_max * plot_w;
        let sy = |y: f64| TOP + plot_h - y / y_max * plot_h;
        let y0 = sy(0.0);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            xml_escape(&self.title)
        );
        // axes
        let _ = writeln!(
            svg,
            r#"<line class="axis" x1="{LEFT}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="black"/>"#,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<line class="axis" x1="{LEFT}" y1="{y0:.2}" x2="{LEFT}" y2="{TOP}" stroke="black"/>"#
        );
        let mut tick = 0.1;
        while tick <= y_max + 1e-9 {
            let y = sy(tick);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.1}</text>"#,
                LEFT - 4.0,
                LEFT - 7.0,
                y + 4.0
            );
            tick += 0.1;
        }
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + plot_h / 2.0,
            xml_escape(&self.y_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 10.0,
            xml_escape(&self.x_label)
        );

        match self.x_ticks {
            XTicks::AtPoints => {
                let mut ticks: BTreeMap<String, (f64, String)> = BTreeMap::new();
                for p in self.series.iter().flat_map(|s| &s.points) {
                    ticks.entry(format!("{:020.6}", p.x)).or_insert((p.x, p.label.clone()));
                }
                for (x, label) in ticks.values() {
                    let px = sx(*x);
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text transform="translate({:.2} {:.2}) rotate(-60)" text-anchor="end">{}</text>"#,
                        y0 + 4.0,
                        px + 4.0,
                        y0 + 10.0,
                        xml_escape(label)
                    );
                }
            }
            XTicks::Integers => {
                for k in 1..=(x_max.round() as u64) {
                    let px = sx(k as f64);
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#,
                        y0 + 4.0,
                        y0 + 18.0
                    );
                }
            }
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                coords.join(" ")
            );
            for p in &series.points {
                let _ = writeln!(
                    svg,
                    r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{color}"><title>{}: {:.4}</title></circle>"#,
                    sx(p.x),
                    sy(p.y),
                    xml_escape(&p.label),
                    p.y
                );
            }
            if let Some(last) = series.points.last() {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}" text-anchor="end">{}</text>"#,
                    sx(last.x) - 6.0,
                    sy(last.y) - 10.0,
                    xml_escape(&series.name)
                );
            }
        }

        for (i, r) in self.references.iter().enumerate() {
            let color = PALETTE[(i + self.series.len()) % PALETTE.len()];
            let y = sy(r.y);
            let _ = writeln!(
                svg,
                r#"<line class="reference" x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                LEFT + plot_w,
                LEFT + 8.0,
                y - 5.0,
                xml_escape(&r.caption)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// F1 versus model size, one series per dataset, from the reports that are
/// not session-ablation runs.
pub fn size_sweep_chart(reports: &[DatasetReport]) -> Result<LineChart> {
    let mut by_dataset: BTreeMap<&str, Vec<ChartPoint>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.info.finetune_sessions.is_none()) {
        let params = r.info.params_billion.ok_or_else(|| {
            Error::Report(format!(
                "report for model {:?} on {:?} has no parameter count",
                r.info.model, r.info.dataset
            ))
        })?;
        by_dataset.entry(&r.info.dataset).or_default().push(ChartPoint {
            x: params,
            y: r.mean_f1,
            label: r.info.model.clone(),
        });
    }
    let series = by_dataset
        .into_iter()
        .map(|(name, mut points)| {
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Series {
                name: name.to_string(),
                points,
            }
        })
        .collect();
    Ok(LineChart {
        title: "F1-score versus model size".into(),
        x_label: "Parameters (billions, to scale)".into(),
        y_label: "F1-score".into(),
        series,
        references: vec![],
        x_ticks: XTicks::AtPoints,
    })
}

/// F1 versus number of fine-tuning sessions, with dashed reference lines.
pub fn ablation_chart(
    series_name: &str,
    points: &[(u32, f64)],
    baselines: &[ReferenceLine],
) -> LineChart {
    let mut pts: Vec<ChartPoint> = points
        .iter()
        .map(|(k, f1)| ChartPoint {
            x: *k as f64,
            y: *f1,
            label: k.to_string(),
        })
        .collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    LineChart {
        title: format!("Fine-tuned student on {series_name}"),
        x_label: "Number of sessions used for fine-tuning".into(),
        y_label: "F1-score".into(),
        series: vec![Series {
            name: series_name.to_string(),
            points: pts,
        }],
        references: baselines.to_vec(),
        x_ticks: XTicks::Integers,
    }
}

fn ablation_from_reports(reports: &[DatasetReport]) -> Option<LineChart> {
    let points: Vec<(u32, f64)> = reports
        .iter()
        .filter_map(|r| r.info.finetune_sessions.map(|k| (k, r.mean_f1)))
        .collect();
    if points.is_empty() {
        return None;
    }
    let dataset = reports
        .iter()
        .find(|r| r.info.finetune_sessions.is_some())
        .map(|r| r.info.dataset.clone())
        .unwrap_or_default();
    let baselines: Vec<ReferenceLine> = reports
        .iter()
        .filter(|r| r.info.dataset == dataset)
        .filter_map(|r| {
            r.info.baseline.as_ref().map(|caption| ReferenceLine {
                caption: caption.clone(),
                y: r.mean_f1,
            })
        })
        .collect();
    Some(ablation_chart(&dataset, &points, &baselines))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedReport {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub size_chart: PathBuf,
    pub size_points: usize,
    pub ablation_chart: Option<PathBuf>,
    pub ablation_points: usize,
}

pub fn summary_csv(reports: &[DatasetReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Report(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.info.model.clone(),
            r.info.params_billion.map(|p| p.to_string()).unwrap_or_default(),
            r.info.dataset.clone(),
            format!("{:.6}", r.mean_f1),
            format!("{:.2}", r.missed_pct_mean),
            format!("{:.2}", r.missed_pct_std),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Report(format!("csv: {e}")))
}

/// Writes `summary.csv`, `reports.json`, `size_sweep.svg` and, when any
/// report carries a fine-tuning session count, `session_ablation.svg`.
pub fn emit_report(reports: &[DatasetReport], out_dir: &Path) -> Result<EmittedReport> {
    if reports.is_empty() {
        return Err(Error::Report("no reports to emit".into()));
    }
    let csv_path = out_dir.join("summary.csv");
    fsutil::write_atomic(&csv_path, &summary_csv(reports)?)?;

    let json_path = out_dir.join("reports.json");
    fsutil::write_json(&json_path, &reports)?;

    let size = size_sweep_chart(reports)?;
    let size_path = out_dir.join("size_sweep.svg");
    fsutil::write_atomic(&size_path, size.to_svg().as_bytes())?;

    let (ablation_chart, ablation_points) = match ablation_from_reports(reports) {
        Some(chart) => {
            let path = out_dir.join("session_ablation.svg");
            fsutil::write_atomic(&path, chart.to_svg().as_bytes())?;
            (Some(path), chart.point_count())
        }
        None => (None, 0),
    };

    Ok(EmittedReport {
        csv: csv_path,
        json: json_path,
        size_chart: size_path,
        size_points: size.point_count(),
        ablation_chart,
        ablation_points,
    })
}
