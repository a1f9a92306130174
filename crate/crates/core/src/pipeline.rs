//! Variant orchestration (M1, M2, M3, HYDRA) and the risk report.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::cluster::{
    kmeans_fit, label_clusters, predict_label, symbolic_label, ClusterError, ClusterModel, HeuristicId, KMeansParams,
    Label, DEFAULT_MATCH_THRESHOLD,
};
use crate::corpus::Corpus;
use crate::embed::{EmbedError, Embedding, EmbeddingProvider, EMBEDDING_DIM};
use crate::heuristics::{match_rules, HeuristicVector, RuleSet};
use crate::latent::{fuse, project_for_test_with, train_vae, LatentError, LossTrace, VaeConfig, VaeModel};
use crate::metrics::{evaluate, ClusteringEvaluation, MetricError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("variant {0} needs embeddings but no provider output was supplied")]
    VariantProviderMissing(Variant),
    #[error("features were matched with {got} rules but the model expects {expected}")]
    RuleSetMismatch { expected: usize, got: usize },
    #[error("{what}: {left} vs {right} entries")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    M1,
    M2,
    M3,
    Hydra,
}

/// What a variant clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    HeuristicBits,
    Embedding,
    Fused,
    VaeLatent,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::M1, Variant::M2, Variant::M3, Variant::Hydra];

    pub fn representation(self) -> Representation {
        match self {
            Variant::M1 => Representation::HeuristicBits,
            Variant::M2 => Representation::Embedding,
            Variant::M3 => Representation::Fused,
            Variant::Hydra => Representation::VaeLatent,
        }
    }

    pub fn needs_embeddings(self) -> bool {
        self != Variant::M1
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::M1 => "m1",
            Variant::M2 => "m2",
            Variant::M3 => "m3",
            Variant::Hydra => "hydra",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Variant::M1),
            "m2" => Ok(Variant::M2),
            "m3" => Ok(Variant::M3),
            "hydra" => Ok(Variant::Hydra),
            _ => Err(format!("unknown variant `{s}` (expected m1, m2, m3 or hydra)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub k: usize,
    /// Drives k-means seeding and, for HYDRA, the VAE (overrides `vae.seed`).
    pub seed: u64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub match_threshold: f64,
    pub vae: VaeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 2,
            seed: 0,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            vae: VaeConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Stable hash of every setting, for run metadata.
    pub fn fingerprint(&self, variant: Variant) -> String {
        let text = format!("{variant:?}|{self:?}");
        format!("{:016x}", xxh64(text.as_bytes(), 0))
    }
}

/// Per-function inputs shared by all variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub ids: Vec<String>,
    pub projects: Vec<String>,
    pub heuristics: Vec<HeuristicVector>,
    pub embeddings: Option<Vec<Embedding>>,
    pub provider_id: Option<String>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn rule_count(&self) -> usize {
        self.heuristics.first().map_or(0, HeuristicVector::len)
    }

    fn embeddings_for(&self, variant: Variant) -> Result<&[Embedding], PipelineError> {
        let e = self
            .embeddings
            .as_deref()
            .ok_or(PipelineError::VariantProviderMissing(variant))?;
        if e.len() != self.len() {
            return Err(PipelineError::LengthMismatch {
                what: "embeddings",
                left: e.len(),
                right: self.len(),
            });
        }
        Ok(e)
    }
}

/// Sequential feature extraction; the std crate offers a parallel equivalent.
pub fn extract_features(
    corpus: &Corpus,
    rules: &RuleSet,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Features, PipelineError> {
    let records = corpus.records();
    let heuristics = records.iter().map(|r| match_rules(&r.normalized_source, rules)).collect();
    let embeddings = match provider {
        Some(p) => Some(records.iter().map(|r| p.embed(r)).collect::<Result<Vec<_>, _>>()?),
        None => None,
    };
    Ok(Features {
        ids: records.iter().map(|r| r.id.clone()).collect(),
        projects: records.iter().map(|r| r.project.clone()).collect(),
        heuristics,
        embeddings,
        provider_id: provider.map(|p| p.provider_id()),
    })
}

/// Everything needed to label new functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub variant: Variant,
    pub rule_names: Vec<String>,
    pub rule_indices: Vec<usize>,
    pub provider_id: Option<String>,
    pub config_fingerprint: String,
    pub vae: Option<VaeModel>,
    pub clusters: ClusterModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Train,
    Test,
}

fn representation(
    variant: Variant,
    vae: Option<&VaeModel>,
    f: &Features,
    phase: Phase,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let r = f.rule_count();
    Ok(match variant {
        Variant::M1 => f.heuristics.iter().map(HeuristicVector::as_f64).collect(),
        Variant::M2 => f.embeddings_for(variant)?.iter().map(|e| e.values().to_vec()).collect(),
        Variant::M3 => f
            .embeddings_for(variant)?
            .iter()
            .zip(&f.heuristics)
            .map(|(e, h)| fuse(e, h).map(|v| v.values().to_vec()))
            .collect::<Result<_, _>>()?,
        Variant::Hydra => {
            let es = f.embeddings_for(variant)?;
            let fused: Vec<Vec<f64>> = match phase {
                Phase::Train => es
                    .iter()
                    .zip(&f.heuristics)
                    .map(|(e, h)| fuse(e, h).map(|v| v.values().to_vec()))
                    .collect::<Result<_, _>>()?,
                // Test-time heuristic slots are zero; real bits only feed the override.
                Phase::Test => es
                    .iter()
                    .map(|e| project_for_test_with(e, r).map(|v| v.values().to_vec()))
                    .collect::<Result<_, _>>()?,
            };
            match vae {
                Some(m) => fused.iter().map(|x| m.encode(x)).collect::<Result<_, _>>()?,
                None => fused,
            }
        }
    })
}

/// Output of the learning phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub train_points: Vec<Vec<f64>>,
    pub train_assignments: Vec<usize>,
    pub train_evaluation: Option<ClusteringEvaluation>,
    pub trace: Option<LossTrace>,
}

fn check_rules(expected: usize, f: &Features) -> Result<(), PipelineError> {
    if let Some(h) = f.heuristics.iter().find(|h| h.len() != expected) {
        return Err(PipelineError::RuleSetMismatch {
            expected,
            got: h.len(),
        });
    }
    Ok(())
}

/// Learning phase: build the variant's representation, cluster it and label clusters.
pub fn fit(train: &Features, variant: Variant, cfg: &PipelineConfig, rules: &RuleSet) -> Result<FitOutcome, PipelineError> {
    check_rules(rules.len(), train)?;
    let rule_indices: Vec<usize> = rules.rules().iter().map(|r| r.index).collect();
    let mut trace = None;
    let vae = if variant == Variant::Hydra {
        let vcfg = VaeConfig {
            input_dim: EMBEDDING_DIM + rules.len(),
            seed: cfg.seed,
            ..cfg.vae.clone()
        };
        let fused = representation(variant, None, train, Phase::Train)?;
        let (m, t) = train_vae(&fused, &vcfg)?;
        trace = Some(t);
        Some(m)
    } else {
        None
    };
    let points = representation(variant, vae.as_ref(), train, Phase::Train)?;
    let (clusters, assignments) = kmeans_fit(
        &points,
        KMeansParams {
            k: cfg.k,
            seed: cfg.seed,
            max_iter: cfg.kmeans_max_iter,
            tol: cfg.kmeans_tol,
        },
    )?;
    let clusters = label_clusters(clusters, &points, &train.heuristics, &rule_indices, cfg.match_threshold)?;
    let train_evaluation = if cfg.k >= 2 && points.len() > cfg.k {
        Some(evaluate(&points, &assignments)?)
    } else {
        None
    };
    Ok(FitOutcome {
        model: TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            variant,
            rule_names: rules.names(),
            rule_indices,
            provider_id: train.provider_id.clone().filter(|_| variant.needs_embeddings()),
            config_fingerprint: cfg.fingerprint(variant),
            vae,
            clusters,
        },
        train_points: points,
        train_assignments: assignments,
        train_evaluation,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub project: String,
    pub bits: Vec<u8>,
    pub label: Label,
    pub aligned_heuristic: Option<HeuristicId>,
    pub confidence: f64,
    pub cluster: usize,
    /// Latent code (HYDRA only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<Vec<f64>>,
}

/// Testing phase output: one row per function plus the points that were labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub rows: Vec<ReportRow>,
    pub points: Vec<Vec<f64>>,
}

/// Testing phase. M1 labels from rule matches alone; the other variants use the
/// nearest cluster's label unless the function's own rules fire.
pub fn predict(model: &TrainedModel, test: &Features) -> Result<Prediction, PipelineError> {
    check_rules(model.rule_indices.len(), test)?;
    let points = representation(model.variant, model.vae.as_ref(), test, Phase::Test)?;
    let mut rows = Vec::with_capacity(test.len());
    for (i, p) in points.iter().enumerate() {
        let h = &test.heuristics[i];
        let mut r = predict_label(&model.clusters, p, Some(h))?;
        if model.variant == Variant::M1 && h.is_zero() {
            r.label = symbolic_label(h, &model.rule_indices);
        }
        rows.push(ReportRow {
            id: test.ids[i].clone(),
            project: test.projects[i].clone(),
            bits: h.bits.clone(),
            label: r.label,
            aligned_heuristic: r.aligned_heuristic,
            confidence: r.confidence,
            cluster: r.cluster,
            latent: (model.variant == Variant::Hydra).then(|| p.clone()),
        });
    }
    Ok(Prediction { rows, points })
}

/// `count / n` as a percentage string with two decimals, truncated toward zero
/// (788 of 16387 gives "4.80%").
pub fn format_percentage(count: usize, n: usize) -> String {
    if n == 0 {
        return "0.00%".to_string();
    }
    let bp = (count as u128 * 10_000) / n as u128;
    format!("{}.{:02}%", bp / 100, bp % 100)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountShare {
    pub count: usize,
    pub percentage: String,
}

impl CountShare {
    fn new(count: usize, n: usize) -> Self {
        Self {
            count,
            percentage: format_percentage(count, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicSummary {
    pub heuristic: HeuristicId,
    pub name: String,
    pub count: usize,
    pub percentage: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: Label,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub label: Label,
    pub train_size: usize,
    pub dominant: Option<HeuristicId>,
    pub dominant_count: usize,
    pub dominant_fraction: f64,
    pub test_members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    /// Functions setting each rule's bit (column sums over rows).
    pub per_heuristic: Vec<HeuristicSummary>,
    /// Functions with at least one set bit.
    pub symbolic_matched: CountShare,
    /// Functions labeled with a heuristic; `labeled + none = n`.
    pub labeled: CountShare,
    pub none: CountShare,
    pub label_counts: Vec<LabelCount>,
    pub clusters: Vec<ClusterSummary>,
    pub train_evaluation: Option<ClusteringEvaluation>,
    pub test_evaluation: Option<ClusteringEvaluation>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub variant: Variant,
    pub representation: Representation,
    pub representation_dim: usize,
    pub seed: u64,
    pub k: usize,
    pub provider_id: Option<String>,
    pub rule_names: Vec<String>,
    pub config_fingerprint: String,
    pub n_train: usize,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub summary: Summary,
    pub rows: Vec<ReportRow>,
}

pub const NOTE_CHI_UNBOUNDED: &str = "chi is reported as \"inf\": every cluster consists of identical points, so within-cluster dispersion is zero and the variance ratio is unbounded. A finite value (such as 1.00) for this configuration would not follow from the standard Calinski-Harabasz formula.";
pub const NOTE_DBI_UNBOUNDED: &str =
    "dbi is reported as \"inf\": at least two clusters share a centroid.";
pub const NOTE_ZERO_FILL: &str = "test-time latents are encoded with all heuristic slots set to zero; rule matches on test functions only feed the symbolic override.";
pub const NOTE_M1_SYMBOLIC: &str =
    "m1 labels functions from their own rule matches only; clusters supply the aligned heuristic.";

fn notes_for(e: Option<&ClusteringEvaluation>, notes: &mut Vec<String>) {
    if let Some(e) = e {
        if e.chi.is_infinite() && !notes.iter().any(|n| n == NOTE_CHI_UNBOUNDED) {
            notes.push(NOTE_CHI_UNBOUNDED.to_string());
        }
        if e.dbi.is_infinite() && !notes.iter().any(|n| n == NOTE_DBI_UNBOUNDED) {
            notes.push(NOTE_DBI_UNBOUNDED.to_string());
        }
    }
}

/// Assembles the report for labeled test rows.
pub fn build_report(
    model: &TrainedModel,
    prediction: &Prediction,
    train_evaluation: Option<ClusteringEvaluation>,
    n_train: usize,
    seed: u64,
    best_epoch: Option<usize>,
) -> RiskReport {
    let rows = &prediction.rows;
    let n = rows.len();
    let per_heuristic = model
        .rule_indices
        .iter()
        .zip(&model.rule_names)
        .enumerate()
        .map(|(j, (&idx, name))| {
            let count = rows.iter().filter(|r| r.bits.get(j) == Some(&1)).count();
            HeuristicSummary {
                heuristic: HeuristicId(idx),
                name: name.clone(),
                count,
                percentage: format_percentage(count, n),
            }
        })
        .collect();
    let symbolic = rows.iter().filter(|r| r.bits.iter().any(|&b| b != 0)).count();
    let none = rows.iter().filter(|r| r.label.is_none()).count();
    let mut label_counts: Vec<LabelCount> = Vec::new();
    for label in model
        .rule_indices
        .iter()
        .map(|&i| Label::Heuristic(HeuristicId(i)))
        .chain([Label::None])
    {
        label_counts.push(LabelCount {
            label,
            count: rows.iter().filter(|r| r.label == label).count(),
        });
    }
    let clusters = model
        .clusters
        .clusters
        .iter()
        .enumerate()
        .map(|(c, info)| ClusterSummary {
            cluster: c,
            label: info.label,
            train_size: info.size,
            dominant: info.dominant,
            dominant_count: info.dominant_count,
            dominant_fraction: info.dominant_fraction,
            test_members: rows.iter().filter(|r| r.cluster == c).count(),
        })
        .collect();
    let assignments: Vec<usize> = rows.iter().map(|r| r.cluster).collect();
    let distinct = {
        let mut a = assignments.clone();
        a.sort_unstable();
        a.dedup();
        a.len()
    };
    let test_evaluation = if distinct >= 2 && n > distinct {
        evaluate(&prediction.points, &assignments).ok()
    } else {
        None
    };
    let mut notes = Vec::new();
    notes_for(train_evaluation.as_ref(), &mut notes);
    notes_for(test_evaluation.as_ref(), &mut notes);
    match model.variant {
        Variant::Hydra => notes.push(NOTE_ZERO_FILL.to_string()),
        Variant::M1 => notes.push(NOTE_M1_SYMBOLIC.to_string()),
        _ => {}
    }
    RiskReport {
        schema_version: REPORT_SCHEMA_VERSION,
        metadata: RunMetadata {
            variant: model.variant,
            representation: model.variant.representation(),
            representation_dim: model.clusters.dim,
            seed,
            k: model.clusters.k,
            provider_id: model.provider_id.clone(),
            rule_names: model.rule_names.clone(),
            config_fingerprint: model.config_fingerprint.clone(),
            n_train,
            best_epoch,
        },
        summary: Summary {
            n,
            per_heuristic,
            symbolic_matched: CountShare::new(symbolic, n),
            labeled: CountShare::new(n - none, n),
            none: CountShare::new(none, n),
            label_counts,
            clusters,
            train_evaluation,
            test_evaluation,
            notes,
        },
        rows: prediction.rows.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RiskReport,
    pub model: TrainedModel,
    pub trace: Option<LossTrace>,
    pub train_points: Vec<Vec<f64>>,
    pub test_points: Vec<Vec<f64>>,
}

/// Learning on `train`, testing on `test`, report for the test rows.
pub fn run_variant(
    train: &Features,
    test: &Features,
    variant: Variant,
    cfg: &PipelineConfig,
    rules: &RuleSet,
) -> Result<RunOutput, PipelineError> {
    if variant.needs_embeddings() {
        train.embeddings_for(variant)?;
        test.embeddings_for(variant)?;
    }
    let fit = fit(train, variant, cfg, rules)?;
    let prediction = predict(&fit.model, test)?;
    let best_epoch = fit.trace.as_ref().map(|t| t.best_epoch);
    let report = build_report(&fit.model, &prediction, fit.train_evaluation, train.len(), cfg.seed, best_epoch);
    Ok(RunOutput {
        report,
        model: fit.model,
        trace: fit.trace,
        train_points: fit.train_points,
        test_points: prediction.points,
    })
}
