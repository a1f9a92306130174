//! Model files, reports and projection plot data.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hydra_core::cluster::HeuristicId;
use hydra_core::metrics::{project_2d, MetricError};
use hydra_core::pipeline::{
    FitOutcome, PipelineConfig, ReportRow, RunMetadata, Summary, TrainedModel, MODEL_FORMAT_VERSION,
    REPORT_SCHEMA_VERSION,
};
use hydra_core::{ClusteringEvaluation, Label, RiskReport, RuleSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: unsupported {what} version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("model was trained with {expected} rules ({names}) but {got} are loaded")]
    RuleCountMismatch { expected: usize, got: usize, names: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// On-disk model: version header, the configuration it was trained with, and
/// the trained weights, centroids and cluster table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub n_train: usize,
    pub best_epoch: Option<usize>,
    pub train_evaluation: Option<ClusteringEvaluation>,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn new(config: PipelineConfig, fit: &FitOutcome) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            config,
            n_train: fit.train_points.len(),
            best_epoch: fit.trace.as_ref().map(|t| t.best_epoch),
            train_evaluation: fit.train_evaluation.clone(),
            model: fit.model.clone(),
        }
    }

    /// Refuses a rule set whose size differs from the one used for training.
    pub fn check_rules(&self, rules: &RuleSet) -> Result<(), ArtifactError> {
        let expected = self.model.rule_indices.len();
        if rules.len() != expected {
            return Err(ArtifactError::RuleCountMismatch {
                expected,
                got: rules.len(),
                names: self.model.rule_names.join(", "),
            });
        }
        Ok(())
    }
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(artifact).map_err(json_err(path))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn load_model(path: &Path) -> Result<ModelArtifact, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let probe: VersionProbe = serde_json::from_str(&text).map_err(json_err(path))?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(ArtifactError::Version {
            path: path.to_path_buf(),
            what: "model format",
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    serde_json::from_str(&text).map_err(json_err(path))
}

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format `{s}` (expected json or csv)")),
        }
    }
}

pub fn report_to_json(r: &RiskReport) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

pub fn report_from_json(text: &str) -> serde_json::Result<RiskReport> {
    serde_json::from_str(text)
}

/// Column order of per-function CSV reports.
pub const REPORT_CSV_COLUMNS: [&str; 8] = [
    "id",
    "project",
    "bits",
    "label",
    "aligned_heuristic",
    "confidence",
    "cluster",
    "latent",
];

fn bits_string(bits: &[u8]) -> String {
    bits.iter().map(|b| if *b != 0 { '1' } else { '0' }).collect()
}

fn heuristic_cell(h: Option<HeuristicId>) -> String {
    h.map(|h| h.to_string()).unwrap_or_default()
}

pub fn write_report_rows_csv<W: Write>(rows: &[ReportRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_COLUMNS)?;
    for r in rows {
        let latent = r
            .latent
            .as_ref()
            .map(|l| l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            r.id.clone(),
            r.project.clone(),
            bits_string(&r.bits),
            r.label.to_string(),
            heuristic_cell(r.aligned_heuristic),
            r.confidence.to_string(),
            r.cluster.to_string(),
            latent,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything in a report except the rows; written next to CSV reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummaryFile {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub summary: Summary,
}

/// `report.csv` → `report.summary.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.summary.json"))
}

/// Writes the report; for CSV also writes the summary sidecar. Returns the
/// paths written.
pub fn emit_report(r: &RiskReport, format: ReportFormat, path: &Path) -> Result<Vec<PathBuf>, ArtifactError> {
    match format {
        ReportFormat::Json => {
            let text = report_to_json(r).map_err(json_err(path))?;
            write_file(path, text.as_bytes())?;
            Ok(vec![path.to_path_buf()])
        }
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_report_rows_csv(&r.rows, &mut buf).map_err(csv_err(path))?;
            write_file(path, &buf)?;
            let side = sidecar_path(path);
            let summary = ReportSummaryFile {
                schema_version: r.schema_version,
                metadata: r.metadata.clone(),
                summary: r.summary.clone(),
            };
            let mut text = serde_json::to_string_pretty(&summary).map_err(json_err(&side))?;
            text.push('\n');
            write_file(&side, text.as_bytes())?;
            Ok(vec![path.to_path_buf(), side])
        }
    }
}

pub fn read_report_json(path: &Path) -> Result<RiskReport, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let r = report_from_json(&text).map_err(json_err(path))?;
    if r.schema_version != REPORT_SCHEMA_VERSION {
        return Err(ArtifactError::Version {
            path: path.to_path_buf(),
            what: "report schema",
            found: r.schema_version,
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    Ok(r)
}

/// Human-readable summary in the `count (pct%)` style.
pub fn summary_table(r: &RiskReport) -> String {
    let s = &r.summary;
    let m = &r.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "variant {} (k={}, seed {}, n={})", m.variant, m.k, m.seed, s.n);
    for h in &s.per_heuristic {
        let _ = writeln!(out, "  {:<4} {:<24} {} ({})", h.heuristic.to_string(), h.name, h.count, h.percentage);
    }
    let _ = writeln!(out, "  matched (any rule)            {} ({})", s.symbolic_matched.count, s.symbolic_matched.percentage);
    let _ = writeln!(out, "  labeled                       {} ({})", s.labeled.count, s.labeled.percentage);
    let _ = writeln!(out, "  None                          {} ({})", s.none.count, s.none.percentage);
    for c in &s.clusters {
        let dom = c.dominant.map(|h| h.to_string()).unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            out,
            "  cluster {}: label {}, H_A {} ({:.2}), train {}, test {}",
            c.cluster, c.label, dom, c.dominant_fraction, c.train_size, c.test_members
        );
    }
    for (name, e) in [("train", &s.train_evaluation), ("test", &s.test_evaluation)] {
        if let Some(e) = e {
            let _ = writeln!(out, "  {name}: silhouette {:.4}  chi {}  dbi {}", e.silhouette, fmt_metric(e.chi), fmt_metric(e.dbi));
        }
    }
    for n in &s.notes {
        let _ = writeln!(out, "  note: {n}");
    }
    out
}

pub fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

/// One scatter point of the 2-D projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRecord {
    pub x: f64,
    pub y: f64,
    pub label: Label,
    pub aligned_heuristic: Option<HeuristicId>,
    pub cluster: usize,
}

/// PCA projection of `points`, annotated with each row's label. The flag is
/// set when the points have no variance.
pub fn projection_records(points: &[Vec<f64>], rows: &[ReportRow]) -> Result<(Vec<PlotRecord>, bool), ArtifactError> {
    let proj = project_2d(points)?;
    let records = proj
        .coords
        .iter()
        .zip(rows)
        .map(|(c, r)| PlotRecord {
            x: c[0],
            y: c[1],
            label: r.label,
            aligned_heuristic: r.aligned_heuristic,
            cluster: r.cluster,
        })
        .collect();
    Ok((records, proj.degenerate))
}

pub const PLOT_CSV_COLUMNS: [&str; 5] = ["x", "y", "label", "aligned_heuristic", "cluster"];

pub fn write_plot_csv<W: Write>(records: &[PlotRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_CSV_COLUMNS)?;
    for p in records {
        w.write_record([
            p.x.to_string(),
            p.y.to_string(),
            p.label.to_string(),
            heuristic_cell(p.aligned_heuristic),
            p.cluster.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn color(label: Label) -> &'static str {
    match label {
        Label::None => "#7f7f7f",
        Label::Heuristic(HeuristicId(i)) => PALETTE[(i - 1) % PALETTE.len()],
    }
}

/// Minimal scatter plot; colour encodes the label, shape the cluster parity.
pub fn render_svg(records: &[PlotRecord]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in records {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let (sx, sy) = (span(x0, x1), span(y0, y1));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for p in records {
        let cx = PAD + (p.x - x0) / sx * (W - 2.0 * PAD);
        let cy = H - PAD - (p.y - y0) / sy * (H - 2.0 * PAD);
        let title = format!("{} / {} / cluster {}", p.label, heuristic_cell(p.aligned_heuristic), p.cluster);
        if p.cluster % 2 == 0 {
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="{}" fill-opacity="0.8"><title>{title}</title></circle>"#,
                color(p.label)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{}" fill-opacity="0.8"><title>{title}</title></rect>"#,
                cx - 4.0,
                cy - 4.0,
                color(p.label)
            );
        }
    }
    let mut labels: Vec<Label> = records.iter().map(|p| p.label).collect();
    labels.sort();
    labels.dedup();
    for (i, l) in labels.iter().enumerate() {
        let y = 16.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<circle cx="12" cy="{y}" r="4" fill="{}"/>"#, color(*l));
        let _ = writeln!(out, r#"<text x="22" y="{}" font-family="sans-serif" font-size="12">{l}</text>"#, y + 4.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Writes the plot data as CSV and, when `svg` is given, a rendered scatter.
pub fn emit_projection_plot(
    points: &[Vec<f64>],
    rows: &[ReportRow],
    path: &Path,
    svg: Option<&Path>,
) -> Result<bool, ArtifactError> {
    let (records, degenerate) = projection_records(points, rows)?;
    let mut buf = Vec::new();
    write_plot_csv(&records, &mut buf).map_err(csv_err(path))?;
    write_file(path, &buf)?;
    if let Some(svg) = svg {
        write_file(svg, render_svg(&records).as_bytes())?;
    }
    Ok(degenerate)
}
