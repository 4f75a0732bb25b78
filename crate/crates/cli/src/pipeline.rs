//! End-to-end pipeline orchestration: stages 1 -> 2A -> 2B -> 3 per topic,
//! with content-addressed intermediates for resumable runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nuggetbank_core::clusterstage::{self, ParaphraseEdge};
use nuggetbank_core::error::{Error, Result};
use nuggetbank_core::formats;
use nuggetbank_core::genstage::{self, DocSummary, Stage1Config};
use nuggetbank_core::model::{
    audit_bank, validate_collection, CandidateNugget, Diagnostics, Document, NuggetBank, QANugget,
    RetrievalRanking, SelectionMethod, Topic,
};
use nuggetbank_core::providers::{ChatProvider, Embedder};
use nuggetbank_core::refinestage::{self, Stage2bConfig, UninformativePattern};
use nuggetbank_core::selectstage::{self, SvmModel};
use nuggetbank_core::util::{parallel_map, sha256_hex};

use crate::config::PipelineConfig;
use crate::manifest::{RunManifest, StageCounts};
use crate::trainsvm::CriteriaRow;

/// The loaded input collection.
pub struct Collection {
    pub topics: Vec<Topic>,
    pub documents: Vec<Document>,
    pub rankings: Vec<RetrievalRanking>,
}

impl Collection {
    pub fn load(input_dir: &Path) -> Result<Collection> {
        Ok(Collection {
            topics: formats::read_jsonl(&input_dir.join("topics.jsonl"))?,
            documents: formats::read_jsonl(&input_dir.join("documents.jsonl"))?,
            rankings: formats::read_jsonl(&input_dir.join("ranking.jsonl"))?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let report = validate_collection(&self.topics, &self.documents, &self.rankings);
        if report.pass {
            Ok(())
        } else {
            let mut message = String::from("collection validation failed:");
            for d in &report.diagnostics {
                message.push_str(&format!("\n  [{}] {}", d.code, d.message));
            }
            Err(Error::Config(message))
        }
    }
}

/// Providers for one run, built once and shared across topics.
pub struct StageProviders {
    pub stage1: Arc<ChatProvider>,
    pub embedding: Arc<Embedder>,
    pub refine: Arc<ChatProvider>,
    pub criteria: Arc<ChatProvider>,
}

impl StageProviders {
    pub fn build(config: &PipelineConfig) -> Result<StageProviders> {
        Ok(StageProviders {
            stage1: Arc::new(ChatProvider::from_config(config.provider("stage1")?)?),
            embedding: Arc::new(Embedder::from_config(config.provider("embedding")?)?),
            refine: Arc::new(ChatProvider::from_config(config.provider("refine")?)?),
            criteria: Arc::new(ChatProvider::from_config(config.provider("criteria")?)?),
        })
    }

    pub fn record_stats(&self, manifest: &mut RunManifest) {
        manifest
            .provider_stats
            .insert("stage1".into(), self.stage1.stats.snapshot());
        manifest
            .provider_stats
            .insert("embedding".into(), self.embedding.stats.snapshot());
        manifest
            .provider_stats
            .insert("refine".into(), self.refine.stats.snapshot());
        manifest
            .provider_stats
            .insert("criteria".into(), self.criteria.stats.snapshot());
    }
}

fn topic_dir(config: &PipelineConfig, topic_id: &str) -> PathBuf {
    config.paths.output_dir.join("intermediate").join(topic_id)
}

pub fn bank_path(config: &PipelineConfig, topic_id: &str) -> PathBuf {
    config
        .paths
        .output_dir
        .join("banks")
        .join(format!("{topic_id}.nuggets.jsonl"))
}

/// A stage output is reusable when its fingerprint sidecar matches.
fn fingerprint_matches(dir: &Path, stage: &str, fingerprint: &str) -> bool {
    std::fs::read_to_string(dir.join(format!("{stage}.fp")))
        .map(|text| text.trim() == fingerprint)
        .unwrap_or(false)
}

fn write_fingerprint(dir: &Path, stage: &str, fingerprint: &str) -> Result<()> {
    formats::write_atomic(&dir.join(format!("{stage}.fp")), fingerprint.as_bytes())
}

/// Everything produced for one topic.
pub struct TopicOutput {
    pub topic_id: String,
    pub bank: NuggetBank,
    pub counts: StageCounts,
    pub diagnostics: Diagnostics,
}

/// Run (or resume) the full pipeline for one topic.
pub fn run_topic(
    topic: &Topic,
    collection: &Collection,
    config: &PipelineConfig,
    providers: &StageProviders,
    model: Option<&SvmModel>,
    model_digest: &str,
    stage1_only: bool,
) -> Result<TopicOutput> {
    let dir = topic_dir(config, &topic.topic_id);
    std::fs::create_dir_all(&dir)?;
    let mut counts = StageCounts::default();
    let mut diagnostics = Diagnostics::new();

    let ranking = collection
        .rankings
        .iter()
        .find(|r| r.topic_id == topic.topic_id)
        .ok_or_else(|| Error::contract(format!("no ranking for topic {:?}", topic.topic_id)))?;

    // Stage 1: summarize + generate.
    let fp1 = config.fingerprint_stage1();
    let candidates: Vec<CandidateNugget>;
    if fingerprint_matches(&dir, "stage1", &fp1) {
        candidates = formats::read_jsonl(&dir.join("candidates.jsonl"))?;
        let summaries: Vec<DocSummary> = formats::read_jsonl(&dir.join("summaries.jsonl"))?;
        counts.documents_processed = summaries.len();
    } else {
        let stage1_config = Stage1Config {
            top_k_docs: config.top_k_docs,
            max_doc_chars: config.max_doc_chars,
            parallelism: 1,
        };
        let output = genstage::run_stage1(
            topic,
            ranking,
            &collection.documents,
            &stage1_config,
            &providers.stage1,
        );
        counts.documents_processed = output.summaries.len();
        diagnostics.extend(output.diagnostics);
        formats::write_jsonl(&dir.join("summaries.jsonl"), &output.summaries)?;
        formats::write_jsonl(&dir.join("candidates.jsonl"), &output.candidates)?;
        write_fingerprint(&dir, "stage1", &fp1)?;
        candidates = output.candidates;
    }
    counts.candidates = candidates.len();

    if stage1_only {
        return Ok(TopicOutput {
            topic_id: topic.topic_id.clone(),
            bank: NuggetBank {
                topic_id: topic.topic_id.clone(),
                selected: Vec::new(),
                candidates: Vec::new(),
                method: config.selection.method,
                config_fingerprint: fp1,
            },
            counts,
            diagnostics,
        });
    }
    if candidates.is_empty() {
        return Err(Error::contract(format!(
            "no candidate nuggets for topic {:?}",
            topic.topic_id
        )));
    }

    // Stage 2A: cluster and merge.
    let fp2a = config.fingerprint_stage2a();
    let merged: Vec<QANugget>;
    if fingerprint_matches(&dir, "stage2a", &fp2a) {
        merged = formats::read_jsonl(&dir.join("merged.jsonl"))?;
        let edges: Vec<ParaphraseEdge> = formats::read_jsonl(&dir.join("edges.jsonl"))?;
        counts.edges = edges.len();
    } else {
        let output = clusterstage::run_stage2a(
            &candidates,
            &providers.embedding,
            &providers.refine,
            &config.cluster,
        )?;
        let conservation = clusterstage::check_grounding_conservation(&candidates, &output.merged);
        if !conservation.is_empty() {
            return Err(Error::contract(format!(
                "grounding conservation violated for topic {:?}: {conservation:?}",
                topic.topic_id
            )));
        }
        counts.edges = output.edges.len();
        diagnostics.extend(output.diagnostics);
        formats::write_jsonl(&dir.join("edges.jsonl"), &output.edges)?;
        formats::write_jsonl(&dir.join("merged.jsonl"), &output.merged)?;
        write_fingerprint(&dir, "stage2a", &fp2a)?;
        merged = output.merged;
    }
    counts.clusters = merged.len();

    // Stage 2B: refine.
    let fp2b = config.fingerprint_stage2b();
    let refined: Vec<QANugget> = if fingerprint_matches(&dir, "stage2b", &fp2b) {
        formats::read_jsonl(&dir.join("refined.jsonl"))?
    } else {
        let stage2b_config = Stage2bConfig {
            pattern: UninformativePattern::new(&config.uninformative_pattern)?,
            parallelism: 1,
        };
        let output = refinestage::run_stage2b(&merged, topic, &stage2b_config, &providers.refine);
        let monotonicity = refinestage::check_answer_monotonicity(&merged, &output.refined);
        if !monotonicity.is_empty() {
            return Err(Error::contract(format!(
                "answer monotonicity violated for topic {:?}: {monotonicity:?}",
                topic.topic_id
            )));
        }
        diagnostics.extend(output.diagnostics);
        formats::write_jsonl(&dir.join("refined.jsonl"), &output.refined)?;
        write_fingerprint(&dir, "stage2b", &fp2b)?;
        output.refined
    };
    counts.refined = refined.len();
    if refined.is_empty() {
        return Err(Error::contract(format!(
            "no refined nuggets for topic {:?}",
            topic.topic_id
        )));
    }

    // Stage 3: criteria (dogmatiq only) + selection.
    let fp3 = config.fingerprint_stage3(model_digest);
    let bank_file = bank_path(config, &topic.topic_id);
    let bank: NuggetBank;
    let existing = bank_file
        .exists()
        .then(|| formats::read_bank(&bank_file))
        .transpose()?
        .filter(|b| b.config_fingerprint == fp3);
    if let Some(found) = existing {
        bank = found;
    } else {
        let mut pool = refined.clone();
        if config.selection.method == SelectionMethod::Dogmatiq {
            let (vectors, criteria_diags) =
                selectstage::score_criteria_batch(&pool, topic, &providers.criteria, 1);
            diagnostics.extend(criteria_diags);
            let rows: Vec<CriteriaRow> = pool
                .iter()
                .map(|n| CriteriaRow {
                    nugget_id: n.nugget_id.clone(),
                    criteria: vectors[&n.nugget_id].clone(),
                })
                .collect();
            formats::write_jsonl(&dir.join("criteria.jsonl"), &rows)?;
            for nugget in &mut pool {
                nugget.provenance.criteria = Some(vectors[&nugget.nugget_id].clone());
            }
        }
        bank = selectstage::select(&pool, &config.selection, model, &fp3)?;
        let violations = audit_bank(&bank, config.selection.cap);
        if !violations.is_empty() {
            return Err(Error::contract(format!(
                "bank audit failed for topic {:?}: {violations:?}",
                topic.topic_id
            )));
        }
        formats::write_bank(&bank_file, &bank)?;
    }
    counts.selected = bank.selected.len();

    let funnel = counts.audit_topic(config.selection.cap);
    if !funnel.is_empty() {
        return Err(Error::contract(format!(
            "count monotonicity violated for topic {:?}: {funnel:?}",
            topic.topic_id
        )));
    }

    Ok(TopicOutput {
        topic_id: topic.topic_id.clone(),
        bank,
        counts,
        diagnostics,
    })
}

/// Load the SVM model when dogmatiq selection is configured; its digest
/// feeds the stage-3 fingerprint.
pub fn load_model(config: &PipelineConfig) -> Result<(Option<SvmModel>, String)> {
    if config.selection.method != SelectionMethod::Dogmatiq {
        return Ok((None, String::new()));
    }
    let path = config.model_path.as_ref().ok_or_else(|| {
        Error::Config("dogmatiq selection requires model_path in the config".into())
    })?;
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("model file {}: {e}", path.display())))?;
    let model: SvmModel = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Config(format!("model file {}: {e}", path.display())))?;
    model.validate()?;
    let digest = sha256_hex(&[&bytes]);
    Ok((Some(model), digest))
}

/// Result of a whole generate run.
pub struct GenerateOutcome {
    pub manifest: RunManifest,
    pub failed_topics: Vec<(String, String)>,
}

/// Run the pipeline over every topic. Per-topic failures abort that topic
/// and continue; they are reported in the outcome and the manifest.
pub fn run_generate(config: &PipelineConfig, stage1_only: bool) -> Result<GenerateOutcome> {
    let collection = Collection::load(&config.paths.input_dir)?;
    collection.validate()?;
    let providers = StageProviders::build(config)?;
    let (model, model_digest) = load_model(config)?;

    let mut manifest = RunManifest::new(&config.fingerprint());
    let results: Vec<(String, Result<TopicOutput>)> =
        parallel_map(collection.topics.clone(), config.parallelism, |topic| {
            let result = run_topic(
                topic,
                &collection,
                config,
                &providers,
                model.as_ref(),
                &model_digest,
                stage1_only,
            );
            (topic.topic_id.clone(), result)
        });

    let mut failed = Vec::new();
    let mut all_diagnostics = Diagnostics::new();
    for (topic_id, result) in results {
        match result {
            Ok(output) => {
                manifest.totals.add(&output.counts);
                manifest.per_topic.insert(topic_id, output.counts);
                all_diagnostics.extend(output.diagnostics);
            }
            Err(e) => {
                failed.push((topic_id.clone(), e.to_string()));
                manifest.topics_failed.push(topic_id);
            }
        }
    }
    providers.record_stats(&mut manifest);
    manifest.diagnostics_summary = all_diagnostics.summary();
    manifest.finish();
    manifest.write(&config.paths.output_dir.join("run_manifest.json"))?;

    Ok(GenerateOutcome {
        manifest,
        failed_topics: failed,
    })
}
