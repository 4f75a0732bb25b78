//! `nuggetbank` CLI: generate document-grounded QA nugget banks, score
//! report runs against them, and compare the resulting leaderboards.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nuggetbank_cli::{align, compare, config::PipelineConfig, evaluate, pipeline, trainsvm};
use nuggetbank_cli::{EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL};
use nuggetbank_core::error::{Error, Result};
use nuggetbank_core::evalharness::{JudgmentFormat, MissingPolicy};
use nuggetbank_core::formats;
use nuggetbank_core::model::{validate_collection, SelectionMethod};
use nuggetbank_core::providers::{Embedder, ProviderKind};
use nuggetbank_core::rankstats::ScatterLevel;
use nuggetbank_core::selectstage::{self, SvmHyperparams};

#[derive(Parser)]
#[command(name = "nuggetbank", version, about = "QA nugget bank generation and report evaluation")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's parallelism.
    #[arg(long, global = true)]
    parallelism: Option<usize>,

    /// Count provider calls with deterministic mocks instead of calling
    /// real providers; writes nothing to the configured output directory.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the input collection for dangling references, duplicates, and
    /// empty texts.
    Validate,
    /// Run the pipeline: QA generation, paraphrase clustering, refinement,
    /// and selection, producing one bank per topic.
    Generate(GenerateArgs),
    /// Train the quality-criteria SVM from labeled criteria files.
    TrainSvm(TrainSvmArgs),
    /// Re-run final selection over an existing refined nugget pool.
    Select(SelectArgs),
    /// Judge reports against banks with the configured judge provider.
    Judge(JudgeArgs),
    /// Compute the run x topic recall matrix from judgments.
    Score(ScoreArgs),
    /// Build a leaderboard from judgments.
    Leaderboard(LeaderboardArgs),
    /// Correlate two leaderboards (rho, tau, weighted tau, WPA).
    Correlate(CorrelateArgs),
    /// Correlations on a run subset, with deltas against the full set.
    Subset(SubsetArgs),
    /// Pairwise rho/tau matrices over several leaderboards.
    Heatmap(HeatmapArgs),
    /// Plot-ready score scatter data for two leaderboards.
    Scatter(ScatterArgs),
    /// Stable-match a generated bank against a gold bank.
    Align(AlignArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Stop after stage 1, dumping summaries and candidates only.
    #[arg(long)]
    stage1_only: bool,
    /// Override the config's top-k retrieved documents per topic.
    #[arg(long)]
    top_k_docs: Option<usize>,
    /// Override the config's paraphrase cosine threshold.
    #[arg(long)]
    cosine_threshold: Option<f64>,
    /// Skip LLM paraphrase verification (keep all candidate edges).
    #[arg(long)]
    skip_llm_verify: bool,
    /// File holding an alternation body for the uninformative-answer filter.
    #[arg(long)]
    uninformative_pattern_file: Option<PathBuf>,
    /// Override the config's selection method.
    #[arg(long)]
    method: Option<String>,
    /// Override the config's selection cap.
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct TrainSvmArgs {
    /// criteria.jsonl rows for positive (human-quality) nuggets.
    #[arg(long)]
    positives: PathBuf,
    /// criteria.jsonl rows for negative (mined) nuggets.
    #[arg(long)]
    negatives: PathBuf,
    #[arg(long, default_value = "svm_model.json")]
    out: PathBuf,
    /// Soft-margin penalty.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 100_000)]
    epochs: usize,
    /// Fraction of each class held out for the accuracy report.
    #[arg(long)]
    holdout: Option<f64>,
}

#[derive(Args)]
struct SelectArgs {
    /// refined.jsonl nugget pool for one topic.
    #[arg(long)]
    refined: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 20)]
    cap: usize,
    /// svm_model.json; required for the dogmatiq method.
    #[arg(long)]
    model: Option<PathBuf>,
    /// criteria.jsonl for the pool; required for the dogmatiq method.
    #[arg(long)]
    criteria: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct JudgeArgs {
    /// Directory of *.nuggets.jsonl bank files.
    #[arg(long)]
    banks: Option<PathBuf>,
    /// reports.jsonl with every run's reports.
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    banks: Option<PathBuf>,
    #[arg(long)]
    reports: Option<PathBuf>,
    /// judgments.jsonl (native format).
    #[arg(long)]
    judgments: PathBuf,
    /// Treat the judgments file as an external addressed-only export.
    #[arg(long)]
    argue_export: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LeaderboardArgs {
    #[arg(long)]
    banks: Option<PathBuf>,
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    argue_export: bool,
    #[arg(long, default_value = "zero")]
    missing_policy: String,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Reference leaderboard.json.
    #[arg(long)]
    reference: PathBuf,
    /// Candidate leaderboard.json.
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long, default_value = "correlation.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SubsetArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    /// File with one run_id per line.
    #[arg(long)]
    runs_file: PathBuf,
    #[arg(long, default_value = "subset_report.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct HeatmapArgs {
    /// Two or more leaderboard.json files.
    #[arg(required = true)]
    leaderboards: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScatterArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    /// system (one point per run) or topic (one per run-topic pair).
    #[arg(long, default_value = "system")]
    level: String,
    #[arg(long, default_value = "scatter.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    /// Gold bank (nuggets.jsonl format).
    #[arg(long)]
    gold: PathBuf,
    /// Generated bank (nuggets.jsonl format).
    #[arg(long)]
    gen: PathBuf,
    #[arg(long, default_value_t = nuggetbank_core::alignment::DEFAULT_CLEAR_THRESHOLD)]
    threshold_clear: f64,
    #[arg(long, default_value = "alignment.txt")]
    out_text: PathBuf,
    #[arg(long, default_value = "alignment.jsonl")]
    out_jsonl: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(parallelism) = cli.parallelism {
        config.parallelism = parallelism.max(1);
    }
    Ok(config)
}

/// Dry-run variant: every provider becomes a deterministic mock and outputs
/// go to a throwaway directory.
fn dry_variant(config: &PipelineConfig, scratch: &std::path::Path) -> PipelineConfig {
    let mut dry = config.clone();
    for provider in dry.providers.values_mut() {
        provider.kind = ProviderKind::Mock;
        provider.endpoint = String::new();
        provider.cache_dir = String::new();
    }
    dry.paths.output_dir = scratch.to_path_buf();
    dry.paths.cache_dir = None;
    dry
}

fn dispatch(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Validate => {
            let config = load_config(&cli)?;
            let collection = pipeline::Collection::load(&config.paths.input_dir)?;
            let report =
                validate_collection(&collection.topics, &collection.documents, &collection.rankings);
            for d in &report.diagnostics {
                println!("[{}] {} {}", d.code, d.item, d.message);
            }
            if report.pass {
                println!(
                    "collection ok: {} topics, {} documents, {} rankings",
                    collection.topics.len(),
                    collection.documents.len(),
                    collection.rankings.len()
                );
                Ok(EXIT_OK)
            } else {
                println!("collection invalid: {} diagnostics", report.diagnostics.len());
                Ok(EXIT_CONFIG)
            }
        }

        Command::Generate(args) => {
            let mut config = load_config(&cli)?;
            if let Some(k) = args.top_k_docs {
                config.top_k_docs = k;
            }
            if let Some(threshold) = args.cosine_threshold {
                config.cluster.cosine_threshold = threshold;
            }
            if args.skip_llm_verify {
                config.cluster.verify_with_llm = false;
            }
            if let Some(path) = &args.uninformative_pattern_file {
                config.uninformative_pattern = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                    .trim()
                    .to_string();
            }
            if let Some(method) = &args.method {
                config.selection.method = method.parse()?;
            }
            if let Some(cap) = args.cap {
                config.selection.cap = cap;
            }
            config.selection.seed = config.seed;
            config.validate()?;

            if cli.dry_run {
                let scratch = tempfile::tempdir()?;
                let dry = dry_variant(&config, scratch.path());
                let outcome = pipeline::run_generate(&dry, args.stage1_only)?;
                println!("dry run: provider calls a real run would make");
                for (stage, stats) in &outcome.manifest.provider_stats {
                    println!("  {stage}: {} requests ({} cache hits)", stats.requests, stats.cache_hits);
                }
                println!("  network calls made now: {}", outcome.manifest.total_network_calls());
                return Ok(EXIT_OK);
            }

            let outcome = pipeline::run_generate(&config, args.stage1_only)?;
            println!(
                "generated banks for {} topics ({} failed); totals: {} candidates -> {} refined -> {} selected",
                outcome.manifest.per_topic.len(),
                outcome.failed_topics.len(),
                outcome.manifest.totals.candidates,
                outcome.manifest.totals.refined,
                outcome.manifest.totals.selected,
            );
            for (topic, error) in &outcome.failed_topics {
                eprintln!("topic {topic} failed: {error}");
            }
            if outcome.failed_topics.is_empty() {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_PARTIAL)
            }
        }

        Command::TrainSvm(args) => {
            let hyperparams = SvmHyperparams {
                c: args.c,
                epochs: args.epochs,
                seed: cli.seed.unwrap_or(0),
            };
            let outcome =
                trainsvm::run_train(&args.positives, &args.negatives, &hyperparams, args.holdout, &args.out)?;
            println!(
                "model written to {} (training accuracy {:.3}{})",
                args.out.display(),
                outcome.train_accuracy,
                match outcome.holdout_accuracy {
                    Some(acc) => format!(", holdout accuracy {acc:.3}"),
                    None => String::new(),
                }
            );
            Ok(EXIT_OK)
        }

        Command::Select(args) => {
            let mut pool: Vec<nuggetbank_core::model::QANugget> = formats::read_jsonl(&args.refined)?;
            let method: SelectionMethod = args.method.parse()?;
            let selection = selectstage::SelectionConfig {
                method,
                cap: args.cap,
                seed: cli.seed.unwrap_or(0),
            };
            let model = match method {
                SelectionMethod::Dogmatiq => {
                    let model_path = args.model.as_ref().ok_or_else(|| {
                        Error::Config("--model is required for the dogmatiq method".into())
                    })?;
                    let criteria_path = args.criteria.as_ref().ok_or_else(|| {
                        Error::Config("--criteria is required for the dogmatiq method".into())
                    })?;
                    let rows: Vec<trainsvm::CriteriaRow> = formats::read_jsonl(criteria_path)?;
                    let by_id: BTreeMap<String, _> =
                        rows.into_iter().map(|r| (r.nugget_id, r.criteria)).collect();
                    for nugget in &mut pool {
                        nugget.provenance.criteria = by_id.get(&nugget.nugget_id).cloned();
                    }
                    let text = std::fs::read_to_string(model_path)?;
                    Some(serde_json::from_str::<selectstage::SvmModel>(&text)?)
                }
                _ => None,
            };
            let fingerprint = nuggetbank_core::util::sha256_hex(&[
                b"select-cli",
                args.method.as_bytes(),
                &(args.cap as u64).to_le_bytes(),
                &selection.seed.to_le_bytes(),
            ]);
            let bank = selectstage::select(&pool, &selection, model.as_ref(), &fingerprint)?;
            formats::write_bank(&args.out, &bank)?;
            println!(
                "selected {} of {} nuggets into {}",
                bank.selected.len(),
                bank.candidates.len(),
                args.out.display()
            );
            Ok(EXIT_OK)
        }

        Command::Judge(args) => {
            let config = load_config(&cli)?;
            let banks_dir = args
                .banks
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("banks"));
            let reports_path = args
                .reports
                .clone()
                .unwrap_or_else(|| config.paths.input_dir.join("reports.jsonl"));
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("judgments.jsonl"));
            let banks = evaluate::load_banks(&banks_dir)?;
            let reports = evaluate::load_reports(&reports_path)?;

            if cli.dry_run {
                let scratch = tempfile::tempdir()?;
                let dry = dry_variant(&config, scratch.path());
                let (set, _) = evaluate::run_judge(
                    &dry,
                    &banks,
                    &reports,
                    &scratch.path().join("judgments.jsonl"),
                )?;
                println!("dry run: {} judgment entries would be produced", set.entries.len());
                return Ok(EXIT_OK);
            }

            let (set, diagnostics) = evaluate::run_judge(&config, &banks, &reports, &out)?;
            println!(
                "judged {} (run, topic, nugget) triples -> {} ({} diagnostics)",
                set.entries.len(),
                out.display(),
                diagnostics.len()
            );
            Ok(EXIT_OK)
        }

        Command::Score(args) => {
            let config = load_config(&cli)?;
            let banks_dir = args
                .banks
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("banks"));
            let reports_path = args
                .reports
                .clone()
                .unwrap_or_else(|| config.paths.input_dir.join("reports.jsonl"));
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("scores.csv"));
            let banks = evaluate::load_banks(&banks_dir)?;
            let reports = evaluate::load_reports(&reports_path)?;
            let format = if args.argue_export {
                JudgmentFormat::ArgueExport
            } else {
                JudgmentFormat::Native
            };
            let (judgments, _) = nuggetbank_core::evalharness::import_judgments(&args.judgments, format)?;
            let matrix = evaluate::score_matrix(&banks, &reports, &judgments, &config.label)?;
            formats::write_score_matrix(&out, &matrix)?;
            println!(
                "wrote {} x {} score matrix to {}",
                matrix.run_ids.len(),
                matrix.topic_ids.len(),
                out.display()
            );
            Ok(EXIT_OK)
        }

        Command::Leaderboard(args) => {
            let config = load_config(&cli)?;
            let banks_dir = args
                .banks
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("banks"));
            let reports_path = args
                .reports
                .clone()
                .unwrap_or_else(|| config.paths.input_dir.join("reports.jsonl"));
            let out_csv = args
                .out_csv
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("leaderboard.csv"));
            let out_json = args
                .out_json
                .clone()
                .unwrap_or_else(|| config.paths.output_dir.join("leaderboard.json"));
            let banks = evaluate::load_banks(&banks_dir)?;
            let reports = evaluate::load_reports(&reports_path)?;
            let format = if args.argue_export {
                JudgmentFormat::ArgueExport
            } else {
                JudgmentFormat::Native
            };
            let (judgments, _) = nuggetbank_core::evalharness::import_judgments(&args.judgments, format)?;
            let policy: MissingPolicy = args.missing_policy.parse()?;
            let label = args.label.clone().unwrap_or_else(|| config.label.clone());
            let (board, diagnostics) = evaluate::run_leaderboard(
                &banks,
                &reports,
                &judgments,
                policy,
                &label,
                &out_csv,
                &out_json,
            )?;
            println!(
                "leaderboard {} with {} runs -> {} ({} diagnostics)",
                label,
                board.rows.len(),
                out_csv.display(),
                diagnostics.len()
            );
            Ok(EXIT_OK)
        }

        Command::Correlate(args) => {
            let config = load_config(&cli)?;
            let reference = evaluate::read_leaderboard(&args.reference)?;
            let candidate = evaluate::read_leaderboard(&args.candidate)?;
            let report = compare::run_correlate(&reference, &candidate, &config.wpa, &args.out)?;
            print!("{}", compare::correlation_summary(&report));
            Ok(EXIT_OK)
        }

        Command::Subset(args) => {
            let config = load_config(&cli)?;
            let reference = evaluate::read_leaderboard(&args.reference)?;
            let candidate = evaluate::read_leaderboard(&args.candidate)?;
            let runs: Vec<String> = std::fs::read_to_string(&args.runs_file)
                .map_err(|e| Error::Config(format!("{}: {e}", args.runs_file.display())))?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            let report = compare::run_subset(&reference, &candidate, &runs, &config.wpa, &args.out)?;
            println!(
                "subset of {} runs vs full {}: delta rho={:+.3} tau={:+.3} weighted_tau={:+.3} wpa={:+.3}",
                report.subset.n_runs,
                report.full.n_runs,
                report.deltas[0],
                report.deltas[1],
                report.deltas[2],
                report.deltas[3]
            );
            Ok(EXIT_OK)
        }

        Command::Heatmap(args) => {
            let boards: Vec<_> = args
                .leaderboards
                .iter()
                .map(|p| evaluate::read_leaderboard(p))
                .collect::<Result<_>>()?;
            compare::run_heatmap(&boards, &args.out_dir)?;
            println!(
                "wrote {} x {} heatmap matrices to {}",
                boards.len(),
                boards.len(),
                args.out_dir.display()
            );
            Ok(EXIT_OK)
        }

        Command::Scatter(args) => {
            let reference = evaluate::read_leaderboard(&args.reference)?;
            let candidate = evaluate::read_leaderboard(&args.candidate)?;
            let level: ScatterLevel = args.level.parse()?;
            let rows = compare::run_scatter(&reference, &candidate, level, &args.out)?;
            println!("wrote {rows} scatter rows to {}", args.out.display());
            Ok(EXIT_OK)
        }

        Command::Align(args) => {
            let config = load_config(&cli)?;
            let embedder = Embedder::from_config(config.provider("embedding")?)?;
            let outcome = align::run_align(
                &args.gold,
                &args.gen,
                &embedder,
                args.threshold_clear,
                &args.out_text,
                &args.out_jsonl,
            )?;
            print!("{}", outcome.report);
            Ok(EXIT_OK)
        }
    }
}
