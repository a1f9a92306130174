use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hydra::artifacts::{
    emit_projection_plot, emit_report, fmt_metric, load_model, save_model, summary_table, ModelArtifact, ReportFormat,
};
use hydra::config::{ProviderKind, Settings};
use hydra::features::extract_features_parallel;
use hydra::ingest::{load_input, write_csv_corpus};
use hydra::{build_provider, core};
use core::heuristics::explain;
use core::pipeline::{build_report, fit, predict, run_variant, Features, Variant};
use core::synth::{generate, SynthConfig};
use core::{Corpus, EmbeddingProvider, RuleSet};

/// Patched-function risk analysis: symbolic rules, code embeddings, a VAE and k-means.
#[derive(Debug, Parser)]
#[command(name = "hydra", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// m1, m2, m3 or hydra.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Number of clusters.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// hashed or remote.
    #[arg(long, global = true)]
    provider: Option<ProviderKind>,
    /// Base URL of the embedding service (remote provider).
    #[arg(long, global = true, value_name = "URL")]
    endpoint: Option<String>,
    /// Worker threads for matching and embedding.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML file of extra rules appended to H1..H5.
    #[arg(long, global = true, value_name = "FILE")]
    rules: Option<PathBuf>,
    /// CSV column holding function source.
    #[arg(long, global = true)]
    column: Option<String>,
    /// CSV column holding function ids (default: row index).
    #[arg(long, global = true)]
    id_column: Option<String>,
    /// Read at most this many CSV rows.
    #[arg(long, global = true)]
    limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a CSV file or source tree and print corpus statistics.
    Ingest {
        input: PathBuf,
        /// Write the loaded records as CSV (id, project, source column).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the rules, or match them against a corpus.
    Rules {
        input: Option<PathBuf>,
        /// Print evidence spans for every match.
        #[arg(long)]
        explain: bool,
    },
    /// Embed every function and write JSON lines (id, provider_id, vector).
    Embed {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learning phase: fit the variant on a training corpus and save the model.
    Train {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the per-epoch VAE loss trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Testing phase: label a corpus with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        #[command(flatten)]
        output: ReportOutput,
    },
    /// Compare variants by clustering quality on train and test corpora.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Evaluate every variant instead of only --variant.
        #[arg(long)]
        all: bool,
    },
    /// Train and test in one run and write the risk report.
    Report {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        output: ReportOutput,
    },
    /// Write the seeded synthetic corpus (train.csv and test.csv).
    Synth {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 150)]
        n_train: usize,
        #[arg(long, default_value_t = 60)]
        n_test: usize,
    },
}

#[derive(Debug, Args)]
struct ReportOutput {
    /// Report path; printed to stdout as JSON when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv (csv also writes <name>.summary.json).
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Write 2-D projection data (x, y, label, aligned_heuristic, cluster) as CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Also render the projection as SVG.
    #[arg(long, requires = "plot")]
    svg: Option<PathBuf>,
}

fn settings(g: &Global) -> Result<Settings> {
    let mut s = match &g.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(v) = g.seed {
        s.seed = v;
    }
    if let Some(v) = g.variant {
        s.variant = v;
    }
    if let Some(v) = g.k {
        s.k = v;
    }
    if let Some(v) = g.provider {
        s.provider = v;
    }
    if let Some(v) = &g.endpoint {
        s.endpoint = Some(v.clone());
    }
    if let Some(v) = g.jobs {
        s.jobs = Some(v);
    }
    if let Some(v) = &g.rules {
        s.rules_file = Some(v.clone());
    }
    if let Some(v) = &g.column {
        s.csv_column = v.clone();
    }
    if let Some(v) = &g.id_column {
        s.id_column = Some(v.clone());
    }
    if let Some(v) = g.limit {
        s.limit = Some(v);
    }
    Ok(s)
}

fn load(path: &Path, s: &Settings) -> Result<Corpus> {
    let c = load_input(path, &s.csv_options(), &s.extension_set()).with_context(|| format!("loading {}", path.display()))?;
    log::info!("{}: {} functions ({} skipped)", path.display(), c.len(), c.skipped_count);
    Ok(c)
}

fn features(corpus: &Corpus, rules: &RuleSet, s: &Settings, variant: Variant) -> Result<Features> {
    let provider = if variant.needs_embeddings() {
        Some(build_provider(s)?)
    } else {
        None
    };
    let p: Option<&dyn EmbeddingProvider> = provider.as_deref();
    Ok(extract_features_parallel(corpus, rules, p, s.jobs())?)
}

fn write_report(report: &core::RiskReport, points: &[Vec<f64>], out: &ReportOutput) -> Result<()> {
    match &out.out {
        Some(path) => {
            for p in emit_report(report, out.format, path)? {
                log::info!("wrote {}", p.display());
            }
            eprint!("{}", summary_table(report));
        }
        None => {
            let text = hydra::artifacts::report_to_json(report)?;
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    if let Some(plot) = &out.plot {
        if points.len() < 2 {
            bail!("projection plot needs at least 2 points");
        }
        if emit_projection_plot(points, &report.rows, plot, out.svg.as_deref())? {
            log::warn!("all projected points coincide; plot coordinates are zero");
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let s = settings(&cli.global)?;
    let rules = s.rules()?;
    match cli.command {
        Command::Ingest { input, out } => {
            let c = load(&input, &s)?;
            let tokens: usize = c.records().iter().map(|r| r.token_count).sum();
            println!(
                "{}: {} functions, {} skipped, {} tokens",
                c.name,
                c.len(),
                c.skipped_count,
                tokens
            );
            if let Some(out) = out {
                let f = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
                write_csv_corpus(&c, &s.csv_column, io::BufWriter::new(f))?;
            }
        }
        Command::Rules { input, explain: show } => {
            let Some(input) = input else {
                for r in rules.rules() {
                    println!("H{}\t{}\t{}", r.index, r.name, r.cwe_tags.join(","));
                }
                return Ok(());
            };
            let c = load(&input, &s)?;
            let f = extract_features_parallel(&c, &rules, None, s.jobs())?;
            let mut out = csv::Writer::from_writer(io::stdout().lock());
            let mut header = vec!["id".to_string()];
            header.extend(rules.rules().iter().map(|r| format!("H{}", r.index)));
            out.write_record(&header)?;
            for (id, h) in f.ids.iter().zip(&f.heuristics) {
                let mut row = vec![id.clone()];
                row.extend(h.bits.iter().map(u8::to_string));
                out.write_record(&row)?;
            }
            out.flush()?;
            drop(out);
            if show {
                for r in c.records() {
                    for e in explain(&r.normalized_source, &rules) {
                        eprintln!(
                            "{} H{} [{}] lines {}-{}: {}",
                            r.id,
                            e.rule_index,
                            e.clause,
                            e.line_start,
                            e.line_end,
                            e.text.trim()
                        );
                    }
                }
            }
        }
        Command::Embed { input, out } => {
            let c = load(&input, &s)?;
            let provider = build_provider(&s)?;
            let f = extract_features_parallel(&c, &rules, Some(provider.as_ref()), s.jobs())?;
            let mut w = io::BufWriter::new(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            for e in f.embeddings.unwrap_or_default() {
                serde_json::to_writer(&mut w, &e)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        Command::Train { input, out, trace } => {
            let c = load(&input, &s)?;
            let f = features(&c, &rules, &s, s.variant)?;
            let cfg = s.pipeline();
            let outcome = fit(&f, s.variant, &cfg, &rules)?;
            if let (Some(path), Some(t)) = (&trace, &outcome.trace) {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["epoch", "train_total", "train_reconstruction", "train_kl", "val_total", "val_reconstruction", "val_kl"])?;
                for e in &t.epochs {
                    w.write_record([
                        e.epoch.to_string(),
                        e.train.total.to_string(),
                        e.train.reconstruction.to_string(),
                        e.train.kl.to_string(),
                        e.validation.total.to_string(),
                        e.validation.reconstruction.to_string(),
                        e.validation.kl.to_string(),
                    ])?;
                }
                w.flush()?;
            }
            if let Some(e) = &outcome.train_evaluation {
                eprintln!("train: silhouette {:.4}  chi {}  dbi {}", e.silhouette, fmt_metric(e.chi), fmt_metric(e.dbi));
            }
            if let Some(t) = &outcome.trace {
                eprintln!("best epoch {} of {}", t.best_epoch, t.len());
            }
            save_model(&ModelArtifact::new(cfg, &outcome), &out)?;
            log::info!("wrote {}", out.display());
        }
        Command::Predict { model, input, output } => {
            let artifact = load_model(&model)?;
            artifact.check_rules(&rules)?;
            let c = load(&input, &s)?;
            let f = features(&c, &rules, &s, artifact.model.variant)?;
            let prediction = predict(&artifact.model, &f)?;
            let report = build_report(
                &artifact.model,
                &prediction,
                artifact.train_evaluation.clone(),
                artifact.n_train,
                artifact.config.seed,
                artifact.best_epoch,
            );
            write_report(&report, &prediction.points, &output)?;
        }
        Command::Evaluate { train, test, all } => {
            let (train, test) = (load(&train, &s)?, load(&test, &s)?);
            let variants: Vec<Variant> = if all { Variant::ALL.to_vec() } else { vec![s.variant] };
            let need = variants.iter().any(|v| v.needs_embeddings());
            let fv = if need { Variant::Hydra } else { Variant::M1 };
            let (ftrain, ftest) = (features(&train, &rules, &s, fv)?, features(&test, &rules, &s, fv)?);
            println!("variant\tsplit\tsilhouette\tchi\tdbi\tnone");
            for v in variants {
                let out = run_variant(&ftrain, &ftest, v, &s.pipeline(), &rules)?;
                let sum = &out.report.summary;
                for (split, e) in [("train", &sum.train_evaluation), ("test", &sum.test_evaluation)] {
                    match e {
                        Some(e) => println!(
                            "{v}\t{split}\t{:.4}\t{}\t{}\t{} ({})",
                            e.silhouette,
                            fmt_metric(e.chi),
                            fmt_metric(e.dbi),
                            sum.none.count,
                            sum.none.percentage
                        ),
                        None => println!("{v}\t{split}\t-\t-\t-\t{} ({})", sum.none.count, sum.none.percentage),
                    }
                }
            }
        }
        Command::Report { train, test, output } => {
            let (train, test) = (load(&train, &s)?, load(&test, &s)?);
            let (ftrain, ftest) = (features(&train, &rules, &s, s.variant)?, features(&test, &rules, &s, s.variant)?);
            let out = run_variant(&ftrain, &ftest, s.variant, &s.pipeline(), &rules)?;
            write_report(&out.report, &out.test_points, &output)?;
        }
        Command::Synth { out_dir, n_train, n_test } => {
            let corpus = generate(SynthConfig {
                seed: s.seed,
                n_train,
                n_test,
            });
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            for (name, funcs) in [("train", &corpus.train), ("test", &corpus.test)] {
                let path = out_dir.join(format!("{name}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["id", "project", "func_after", "injected"])?;
                for f in funcs.iter() {
                    let injected = f.injected.map(|i| format!("H{i}")).unwrap_or_default();
                    w.write_record([f.id.as_str(), f.project.as_str(), f.source.as_str(), injected.as_str()])?;
                }
                w.flush()?;
                log::info!("wrote {} ({} functions)", path.display(), funcs.len());
            }
        }
    }
    Ok(())
}
