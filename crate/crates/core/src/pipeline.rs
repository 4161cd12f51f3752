//! End-to-end orchestration: generate, train, extract, evaluate.
//!
//! Every command is a pure function of a [`PipelineConfig`] and the files
//! it names, so two runs with the same config produce identical artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{corpus_stats, generate_corpus, CorpusConfig, CorpusStats, SyntheticDocument};
use crate::encoder::{CharVocabulary, DocumentEncoder, EncodedCandidate, EncoderConfig, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::fusion::{classify, train_fusion, FusionDecision, FusionParams, ScoreScaling};
use crate::io;
use crate::network::{
    load_checkpoint, save_checkpoint, train, BaselineExample, BaselineParams, Checkpoint, CheckpointManifest,
    Model, NetworkDims, NetworkParams, TrainConfig, TrainHistory, BASELINE_HIDDEN, CHECKPOINT_VERSION,
};
use crate::parser::{parse_document, ConstraintSet, Document, EntitySpan, ExtractionCandidate};
use crate::symbols::SymbolTable;
use crate::tsdb::{ScoredCandidate, TimeSeriesStore};

/// Flat configuration; every key may appear in the TOML config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub documents: PathBuf,
    pub store: PathBuf,
    pub symbols: PathBuf,
    pub constraints: PathBuf,
    pub ledger: PathBuf,
    pub checkpoint: PathBuf,
    pub fusion: PathBuf,
    pub train_report: PathBuf,
    pub extractions: PathBuf,
    pub eval_report: PathBuf,

    pub num_documents: usize,
    pub distractor_rate: f64,
    pub db_noise_rate: f64,
    pub ambiguity_rate: f64,
    pub value_jitter: f64,
    pub typo_rate: f64,
    pub seed: u64,

    pub max_pair_distance: usize,
    pub tau: f64,
    pub section_width: usize,
    pub global_dim: usize,
    pub ngram_dim: usize,
    pub hash_seed: u64,
    pub input_dim: usize,
    pub hidden: usize,
    pub global_hidden: usize,

    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_norm: f64,
    pub validation_fraction: f64,
    pub init_scale: f64,

    pub train_baseline: bool,
    pub baseline_learning_rate: f64,
    pub baseline_epochs: usize,

    pub fusion_learning_rate: f64,
    pub fusion_epochs: usize,
    /// Knee of the log compression applied to `s` before standardization;
    /// 0 disables it.
    pub score_log_scale: f64,
    pub threshold: f64,

    pub split_network: f64,
    pub split_fusion: f64,
    pub split_test: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let corpus = CorpusConfig::default();
        let train = TrainConfig::default();
        let enc = EncoderConfig::default();
        let dims = NetworkDims::default();
        let work = Path::new("work");
        PipelineConfig {
            documents: work.join("documents.jsonl"),
            store: work.join("store.csv"),
            symbols: work.join("symbols.json"),
            constraints: work.join("constraints.json"),
            ledger: work.join("ledger.json"),
            checkpoint: work.join("model.ckpt"),
            fusion: work.join("fusion.json"),
            train_report: work.join("train_report.json"),
            extractions: work.join("extractions.jsonl"),
            eval_report: work.join("eval_report.json"),
            num_documents: corpus.num_documents,
            distractor_rate: corpus.distractor_rate,
            db_noise_rate: corpus.db_noise_rate,
            ambiguity_rate: corpus.ambiguity_rate,
            value_jitter: corpus.value_jitter,
            typo_rate: corpus.typo_rate,
            seed: corpus.seed,
            max_pair_distance: crate::parser::DEFAULT_MAX_PAIR_DISTANCE,
            tau: crate::tsdb::DEFAULT_TAU,
            section_width: enc.section_width,
            global_dim: enc.global_dim,
            ngram_dim: enc.ngram_dim,
            hash_seed: enc.hash_seed,
            input_dim: dims.input_dim,
            hidden: dims.hidden,
            global_hidden: dims.global_hidden,
            learning_rate: 2e-3,
            batch_size: train.batch_size,
            epochs: 15,
            clip_norm: train.clip_norm,
            validation_fraction: train.validation_fraction,
            init_scale: train.init_scale,
            train_baseline: false,
            baseline_learning_rate: train.learning_rate,
            baseline_epochs: train.epochs,
            fusion_learning_rate: 0.5,
            fusion_epochs: 500,
            score_log_scale: 0.01,
            threshold: 0.8,
            split_network: 0.6,
            split_fusion: 0.2,
            split_test: 0.2,
        }
    }
}

impl PipelineConfig {
    /// Read a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Format {
            what: "pipeline config",
            detail: format!("{}: {e}", path.display()),
        })?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Prefix every relative artifact path with `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        for p in [
            &mut self.documents,
            &mut self.store,
            &mut self.symbols,
            &mut self.constraints,
            &mut self.ledger,
            &mut self.checkpoint,
            &mut self.fusion,
            &mut self.train_report,
            &mut self.extractions,
            &mut self.eval_report,
        ] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus().validate()?;
        self.train_config().validate()?;
        self.encoder().validate()?;
        let splits = [self.split_network, self.split_fusion, self.split_test];
        if splits.iter().any(|s| !(*s > 0.0)) || (splits.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("splits {splits:?} must be positive and sum to 1")));
        }
        if self.input_dim != FEATURE_DIM {
            return Err(Error::InvalidConfig(format!("input_dim must be {FEATURE_DIM}, got {}", self.input_dim)));
        }
        if self.hidden == 0 || self.global_hidden == 0 {
            return Err(Error::InvalidConfig("hidden sizes must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {} not in (0, 1)", self.threshold)));
        }
        if !(self.score_log_scale.is_finite() && self.score_log_scale >= 0.0) {
            return Err(Error::InvalidConfig(format!("score_log_scale {} must be >= 0", self.score_log_scale)));
        }
        if !self.tau.is_finite() || self.tau > 0.0 {
            return Err(Error::InvalidConfig(format!("tau {} must be finite and <= 0", self.tau)));
        }
        if self.max_pair_distance == 0 {
            return Err(Error::InvalidConfig("max_pair_distance must be positive".into()));
        }
        Ok(())
    }

    pub fn corpus(&self) -> CorpusConfig {
        CorpusConfig {
            num_documents: self.num_documents,
            distractor_rate: self.distractor_rate,
            db_noise_rate: self.db_noise_rate,
            ambiguity_rate: self.ambiguity_rate,
            value_jitter: self.value_jitter,
            typo_rate: self.typo_rate,
            seed: self.seed,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            section_width: self.section_width,
            global_dim: self.global_dim,
            ngram_dim: self.ngram_dim,
            hash_seed: self.hash_seed,
        }
    }

    pub fn dims(&self) -> NetworkDims {
        NetworkDims {
            input_dim: self.input_dim,
            hidden: self.hidden,
            global_dim: self.global_dim,
            global_hidden: self.global_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            clip_norm: self.clip_norm,
            validation_fraction: self.validation_fraction,
            init_scale: self.init_scale,
            ..TrainConfig::default()
        }
    }

    fn baseline_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.baseline_learning_rate,
            epochs: self.baseline_epochs,
            ..self.train_config()
        }
    }
}

const SPLIT_SALT: u64 = 0x5b11_7c0d_e5a1_7000;

/// Document ids per split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub network: Vec<String>,
    pub fusion: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded shuffle of document ids, cut by the configured fractions.
pub fn split_documents(doc_ids: &[String], cfg: &PipelineConfig) -> Splits {
    let mut ids: Vec<String> = doc_ids.to_vec();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SPLIT_SALT);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_net = ((n as f64) * cfg.split_network).round() as usize;
    let n_fus = (((n as f64) * cfg.split_fusion).round() as usize).min(n - n_net.min(n));
    let n_net = n_net.min(n);
    let test = ids.split_off(n_net + n_fus);
    let fusion = ids.split_off(n_net);
    Splits { network: ids, fusion, test }
}

/// Everything the stages need besides the model.
pub struct Resources {
    pub symbols: SymbolTable,
    pub constraints: ConstraintSet,
    pub store: TimeSeriesStore,
    pub vocab: CharVocabulary,
    pub encoder: EncoderConfig,
    pub tau: f64,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        for p in [&cfg.store, &cfg.symbols, &cfg.constraints] {
            if !p.exists() {
                return Err(Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                });
            }
        }
        Ok(Resources {
            symbols: SymbolTable::load(&cfg.symbols)?,
            constraints: ConstraintSet::load(&cfg.constraints, cfg.max_pair_distance)?,
            store: TimeSeriesStore::load_csv(&cfg.store)?,
            vocab: CharVocabulary::default(),
            encoder: cfg.encoder(),
            tau: cfg.tau,
        })
    }
}

/// Stages 1 and 2 for one document, plus the encodings for stage 3.
pub struct PreparedDocument {
    pub entities: Vec<EntitySpan>,
    pub scored: Vec<ScoredCandidate>,
    pub encoded: Vec<EncodedCandidate>,
    pub baseline_inputs: Vec<Vec<f64>>,
}

pub fn candidate_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}#{index}")
}

pub fn prepare_document(doc: &Document, res: &Resources, with_baseline: bool) -> Result<PreparedDocument> {
    let (entities, candidates) = parse_document(doc, &res.symbols, &res.constraints, res.encoder.section_width);
    let scored: Vec<ScoredCandidate> = candidates
        .into_iter()
        .map(|c| ScoredCandidate::score(c, &res.store, res.tau))
        .collect();
    let enc = DocumentEncoder::new(doc, &entities, &res.vocab, &res.encoder)?;
    let mut encoded = Vec::with_capacity(scored.len());
    let mut baseline_inputs = Vec::new();
    for (i, sc) in scored.iter().enumerate() {
        encoded.push(enc.encode(candidate_id(&doc.doc_id, i), &sc.candidate, sc.y));
        if with_baseline {
            baseline_inputs.push(enc.baseline_input(&sc.candidate)?);
        }
    }
    Ok(PreparedDocument {
        entities,
        scored,
        encoded,
        baseline_inputs,
    })
}

/// A fully scored candidate, as emitted by `extract`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    #[serde(flatten)]
    pub candidate: ExtractionCandidate,
    pub s: Option<f64>,
    pub y_tilde: f64,
    pub s_tilde: f64,
    pub p: f64,
}

/// All four stages on one document; returns every candidate with its
/// decision, in parser order.
pub fn run_document(
    doc: &Document,
    res: &Resources,
    network: &NetworkParams,
    fusion: &FusionParams,
) -> Result<Vec<(Extraction, FusionDecision)>> {
    let prepared = prepare_document(doc, res, false)?;
    let mut out = Vec::with_capacity(prepared.scored.len());
    for (sc, enc) in prepared.scored.into_iter().zip(&prepared.encoded) {
        let net = network.forward(enc)?;
        let feats = fusion.features(&sc.candidate, sc.s, &net);
        let decision = classify(fusion, &feats);
        out.push((
            Extraction {
                candidate: sc.candidate,
                s: sc.s,
                y_tilde: net.y_tilde,
                s_tilde: net.s_tilde,
                p: decision.p,
            },
            decision,
        ));
    }
    Ok(out)
}

fn load_documents(cfg: &PipelineConfig) -> Result<Vec<SyntheticDocument>> {
    if !cfg.documents.exists() {
        return Err(Error::Io {
            path: cfg.documents.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    io::read_jsonl(&cfg.documents)
}

fn select<'a>(docs: &'a [SyntheticDocument], ids: &[String]) -> Vec<&'a SyntheticDocument> {
    let by_id: BTreeMap<&str, &SyntheticDocument> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut out: Vec<&SyntheticDocument> = ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect();
    // keep corpus order within a split
    out.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    out
}

/// `generate`: corpus files plus the constraint set derived from the
/// symbol table.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<CorpusStats> {
    cfg.validate()?;
    let corpus = generate_corpus(&cfg.corpus())?;
    corpus.save(&cfg.documents, &cfg.store, &cfg.symbols, Some(&cfg.ledger))?;
    ConstraintSet::from_symbols(&corpus.symbols, cfg.max_pair_distance).save(&cfg.constraints)?;
    Ok(corpus_stats(&corpus))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub network_documents: usize,
    pub fusion_documents: usize,
    pub test_documents: usize,
    pub network_candidates: usize,
    /// Candidates without a consistency score (no reference history);
    /// excluded from network training.
    pub network_label_excluded: usize,
    pub network_positive_rate: f64,
    pub fusion_candidates: usize,
    pub fusion_missing_score: usize,
    pub history: TrainHistory,
    pub baseline_history: Option<TrainHistory>,
    pub fusion_final_loss: f64,
    pub fusion_weights: BTreeMap<String, f64>,
    pub fusion_bias: f64,
}

/// `train`: network (and optionally the n-gram baseline) on the network
/// split, then the fusion gate on the fusion split.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let docs = load_documents(cfg)?;
    let res = Resources::load(cfg)?;
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let splits = split_documents(&ids, cfg);

    let mut train_set = Vec::new();
    let mut baseline_set = Vec::new();
    let mut network_candidates = 0;
    let mut excluded = 0;
    for d in select(&docs, &splits.network) {
        let prepared = prepare_document(&d.to_document(), &res, cfg.train_baseline)?;
        network_candidates += prepared.scored.len();
        for (i, enc) in prepared.encoded.into_iter().enumerate() {
            if enc.label.is_none() {
                excluded += 1;
                continue;
            }
            if cfg.train_baseline {
                baseline_set.push(BaselineExample {
                    candidate_id: enc.candidate_id.clone(),
                    input: prepared.baseline_inputs[i].clone(),
                    label: enc.label,
                });
            }
            train_set.push(enc);
        }
    }
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let positives = train_set.iter().filter(|e| e.label == Some(1)).count();

    let tcfg = cfg.train_config();
    let mut network = NetworkParams::init(cfg.dims(), tcfg.init_scale, tcfg.seed);
    let history = train(&mut network, &train_set, &tcfg)?;
    drop(train_set);

    let (baseline, baseline_history) = if cfg.train_baseline {
        let bcfg = cfg.baseline_train_config();
        let mut b = BaselineParams::init(
            cfg.global_dim + cfg.ngram_dim,
            BASELINE_HIDDEN,
            bcfg.init_scale,
            bcfg.seed ^ 0xba5e,
        );
        let h = train(&mut b, &baseline_set, &bcfg)?;
        (Some(b), Some(h))
    } else {
        (None, None)
    };

    let mut rows = Vec::new();
    let mut fusion_scores = Vec::new();
    let mut fusion_candidates = Vec::new();
    for d in select(&docs, &splits.fusion) {
        let prepared = prepare_document(&d.to_document(), &res, false)?;
        for (sc, enc) in prepared.scored.into_iter().zip(&prepared.encoded) {
            let net = network.forward(enc)?;
            fusion_scores.push(sc.s);
            fusion_candidates.push((sc, net));
        }
    }
    let scaling = ScoreScaling::fit(&fusion_scores, cfg.score_log_scale);
    let mut fusion_missing = 0;
    for (sc, net) in &fusion_candidates {
        if sc.s.is_none() {
            fusion_missing += 1;
        }
        let feats = crate::fusion::fuse_features(&sc.candidate, sc.s, net, &scaling, cfg.max_pair_distance);
        rows.push((feats, sc.y.unwrap_or(0)));
    }
    let fit = train_fusion(
        &rows,
        scaling,
        cfg.max_pair_distance,
        cfg.fusion_learning_rate,
        cfg.fusion_epochs,
        cfg.threshold,
    )?;

    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        dims: cfg.dims(),
        ngram_dim: cfg.ngram_dim,
        encoder: cfg.encoder(),
        train: tcfg,
        history: history.clone(),
        baseline_history: baseline_history.clone(),
    };
    save_checkpoint(&cfg.checkpoint, &Checkpoint { network, baseline }, &manifest)?;
    fit.params.save(&cfg.fusion)?;

    let report = TrainReport {
        network_documents: splits.network.len(),
        fusion_documents: splits.fusion.len(),
        test_documents: splits.test.len(),
        network_candidates,
        network_label_excluded: excluded,
        network_positive_rate: positives as f64 / (network_candidates - excluded) as f64,
        fusion_candidates: rows.len(),
        fusion_missing_score: fusion_missing,
        history,
        baseline_history,
        fusion_final_loss: fit.final_loss,
        fusion_weights: fit
            .params
            .feature_names
            .iter()
            .cloned()
            .zip(fit.params.weights.iter().copied())
            .collect(),
        fusion_bias: fit.params.bias,
    };
    io::write_json(&cfg.train_report, &report)?;
    Ok(report)
}

/// Trained artifacts needed by `extract` and `evaluate`.
pub struct TrainedPipeline {
    pub checkpoint: Checkpoint,
    pub manifest: CheckpointManifest,
    pub fusion: FusionParams,
}

impl TrainedPipeline {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let (checkpoint, manifest) = load_checkpoint(&cfg.checkpoint)?;
        let fusion = FusionParams::load(&cfg.fusion)?;
        if manifest.encoder != cfg.encoder() {
            return Err(Error::InvalidConfig(
                "encoder settings differ from those the checkpoint was trained with".into(),
            ));
        }
        Ok(TrainedPipeline {
            checkpoint,
            manifest,
            fusion,
        })
    }
}

/// `extract`: run the four stages over `input` and write the accepted
/// candidates to `output`. Returns the number written.
pub fn cmd_extract(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<usize> {
    cfg.validate()?;
    let res = Resources::load(cfg)?;
    let model = TrainedPipeline::load(cfg)?;
    let docs: Vec<Document> = io::read_jsonl(input)?;
    let mut accepted = Vec::new();
    for doc in &docs {
        for (ex, decision) in run_document(doc, &res, &model.checkpoint.network, &model.fusion)? {
            if decision.accepted() {
                accepted.push(ex);
            }
        }
    }
    io::write_jsonl(output, &accepted)?;
    Ok(accepted.len())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub candidates: usize,
    pub accepted: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub baseline_definition: String,
    pub precision_convention: String,
    pub tau: f64,
    pub threshold: f64,
    pub test_documents: usize,
    pub ground_truth_relations: usize,
    pub candidates: usize,
    /// Fraction of ground-truth relations present among the candidates.
    pub parser_recall: f64,
    pub baseline: SystemMetrics,
    pub full: SystemMetrics,
    /// `1 - FP_full / FP_baseline`; absent when the baseline has no false
    /// positives.
    pub false_positive_reduction: Option<f64>,
    pub recall_drop: f64,
    /// AUC of the network score against ground-truth correctness.
    pub network_auc: Option<f64>,
    pub ngram_baseline_auc: Option<f64>,
    /// AUC of the network score against the noisy consistency labels.
    pub network_auc_noisy: Option<f64>,
}

/// Does `cand` express `gt`? Same kind and symbol, value within relative
/// tolerance 1e-9, overlapping symbol and value spans.
pub fn matches_ground_truth(cand: &ExtractionCandidate, gt: &crate::corpus::GroundTruthRelation) -> bool {
    cand.kind == gt.kind
        && cand.symbol == gt.symbol
        && (cand.value - gt.value).abs() <= 1e-9 * gt.value.abs().max(f64::MIN_POSITIVE)
        && cand.value_span.overlaps(&gt.value_span)
        && cand.symbol_span.overlaps(&gt.symbol_span)
}

/// One-to-one greedy matching of accepted candidates to ground truth.
/// Returns (true positives, false positives, false negatives).
pub fn match_counts(
    accepted: &[&ExtractionCandidate],
    truth: &[crate::corpus::GroundTruthRelation],
) -> (usize, usize, usize) {
    let mut used = vec![false; truth.len()];
    let mut tp = 0;
    for c in accepted {
        if let Some(j) = (0..truth.len()).find(|&j| !used[j] && matches_ground_truth(c, &truth[j])) {
            used[j] = true;
            tp += 1;
        }
    }
    (tp, accepted.len() - tp, truth.len() - tp)
}

impl SystemMetrics {
    fn add(&mut self, candidates: usize, accepted: usize, (tp, fp, fn_): (usize, usize, usize)) {
        self.candidates += candidates;
        self.accepted += accepted;
        self.true_positives += tp;
        self.false_positives += fp;
        self.false_negatives += fn_;
    }

    fn finish(&mut self) {
        self.precision = if self.accepted == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.accepted as f64
        };
        let relevant = self.true_positives + self.false_negatives;
        self.recall = if relevant == 0 {
            1.0
        } else {
            self.true_positives as f64 / relevant as f64
        };
    }
}

/// Area under the ROC curve via the rank-sum statistic; ties count half.
/// `None` when either class is empty.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // average 1-based rank of the tie group
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum += rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// `evaluate`: score the test split with the trained pipeline and with the
/// threshold-only baseline.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let docs = load_documents(cfg)?;
    let res = Resources::load(cfg)?;
    let model = TrainedPipeline::load(cfg)?;
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let splits = split_documents(&ids, cfg);
    let baseline_model = model.checkpoint.baseline.as_ref();

    let mut base = SystemMetrics::default();
    let mut full = SystemMetrics::default();
    let mut n_truth = 0;
    let mut covered = 0;
    let mut n_candidates = 0;
    let mut net_scores = Vec::new();
    let mut ngram_scores = Vec::new();
    let mut correct = Vec::new();
    let mut noisy_scores = Vec::new();
    let mut noisy_labels = Vec::new();
    let test_docs = select(&docs, &splits.test);
    for d in &test_docs {
        let doc = d.to_document();
        let prepared = prepare_document(&doc, &res, baseline_model.is_some())?;
        n_truth += d.ground_truth.len();
        n_candidates += prepared.scored.len();
        covered += d
            .ground_truth
            .iter()
            .filter(|gt| prepared.scored.iter().any(|sc| matches_ground_truth(&sc.candidate, gt)))
            .count();

        let mut base_acc = Vec::new();
        let mut full_acc = Vec::new();
        for (i, sc) in prepared.scored.iter().enumerate() {
            let net = model.checkpoint.network.forward(&prepared.encoded[i])?;
            let decision = classify(&model.fusion, &model.fusion.features(&sc.candidate, sc.s, &net));
            if sc.y == Some(1) {
                base_acc.push(&sc.candidate);
            }
            if decision.accepted() {
                full_acc.push(&sc.candidate);
            }
            let is_correct = d.ground_truth.iter().any(|gt| matches_ground_truth(&sc.candidate, gt));
            net_scores.push(net.s_tilde);
            correct.push(is_correct);
            if let Some(b) = baseline_model {
                let ex = BaselineExample {
                    candidate_id: String::new(),
                    input: prepared.baseline_inputs[i].clone(),
                    label: None,
                };
                ngram_scores.push(b.logit(&ex)?);
            }
            if let Some(y) = sc.y {
                noisy_scores.push(net.s_tilde);
                noisy_labels.push(y == 1);
            }
        }
        let n = prepared.scored.len();
        base.add(n, base_acc.len(), match_counts(&base_acc, &d.ground_truth));
        full.add(n, full_acc.len(), match_counts(&full_acc, &d.ground_truth));
    }
    base.finish();
    full.finish();

    let report = EvalReport {
        baseline_definition: "parser candidates accepted iff consistency score s >= tau; missing s rejected".into(),
        precision_convention: "precision is 1 when nothing is accepted".into(),
        tau: cfg.tau,
        threshold: model.fusion.threshold,
        test_documents: test_docs.len(),
        ground_truth_relations: n_truth,
        candidates: n_candidates,
        parser_recall: if n_truth == 0 { 1.0 } else { covered as f64 / n_truth as f64 },
        false_positive_reduction: if base.false_positives == 0 {
            None
        } else {
            Some(1.0 - full.false_positives as f64 / base.false_positives as f64)
        },
        recall_drop: base.recall - full.recall,
        network_auc: auc(&net_scores, &correct),
        ngram_baseline_auc: baseline_model.and_then(|_| auc(&ngram_scores, &correct)),
        network_auc_noisy: auc(&noisy_scores, &noisy_labels),
        baseline: base,
        full,
    };
    io::write_json(&cfg.eval_report, &report)?;
    Ok(report)
}

/// Parser recall over a set of documents: fraction of ground-truth
/// relations that appear among the candidates.
pub fn parser_recall(docs: &[SyntheticDocument], symbols: &SymbolTable, constraints: &ConstraintSet, section_width: usize) -> f64 {
    let mut total = 0;
    let mut found = 0;
    for d in docs {
        let (_, cands) = parse_document(&d.to_document(), symbols, constraints, section_width);
        total += d.ground_truth.len();
        found += d
            .ground_truth
            .iter()
            .filter(|gt| cands.iter().any(|c| matches_ground_truth(c, gt)))
            .count();
    }
    if total == 0 {
        1.0
    } else {
        found as f64 / total as f64
    }
}
