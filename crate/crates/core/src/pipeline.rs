//! Experiment orchestration: data preparation, per-user V/G training,
//! attack runs, reports and the experiment manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{
    genuine_outcome, population_attack, population_stats, random_vector_attack, zero_effort_attack, AttackDataset,
    AttackManifest, AttackOutcome, GenuineOutcome, ScenarioKind, ScenarioRun, DEFAULT_ATTACK_VECTORS,
};
use crate::balancing::{adasyn_balance, AdasynConfig};
use crate::classifiers::{
    select_threshold_eer, train_classifier, Architecture, AuthModel, Classifier, ClassifierConfig, ClassifierKind,
    CvPlan, TrainedClassifier,
};
use crate::data::{
    filter_short_swipes, load_gender_csv, parse_swipe_csv, split_train_test, synth_generate_corpus, write_swipe_csv,
    Corpus, Gender, SwipeGesture, SynthParams,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    emit_heatmap_tables, fairness_by_group, EvalReport, FairnessCell, Grouping, HeatmapTables, RateSet, ReportFile,
};
use crate::features::{
    build_windows, extract_features, select_features, FeatureSelector, Normalizer, WindowLabel, FEATURE_COUNT,
};
use crate::gan::{GanPair, GanTrainConfig, DEFAULT_SYNTH_CANDIDATES};
use crate::rng;

/// Fixed stage order of model training, recorded in every manifest.
pub const STAGE_ORDER: [&str; 10] = [
    "filter_short_swipes",
    "split_train_test",
    "extract_features",
    "build_windows",
    "fit_normalizer",
    "select_features",
    "gan_augmentation",
    "adasyn_balance",
    "train_classifier",
    "eer_threshold",
];

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_K_GRID: [usize; 5] = [25, 50, 100, 150, 235];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gender: Option<PathBuf>,
    },
    Synth(SynthParams),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Corpus> {
        match self {
            DatasetSource::Csv { path, gender } => {
                let (mut corpus, report) = parse_swipe_csv(path)?;
                if report.non_monotone_dropped > 0 {
                    log::warn!(
                        "{}: dropped {} swipes with non-monotone timestamps",
                        path.display(),
                        report.non_monotone_dropped
                    );
                }
                if let Some(g) = gender {
                    corpus.user_metadata = load_gender_csv(g)?;
                }
                Ok(corpus)
            }
            DatasetSource::Synth(p) => synth_generate_corpus(p),
        }
    }

    fn resolve_relative(&mut self, base: &Path) {
        if let DatasetSource::Csv { path, gender } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if let Some(g) = gender.as_mut().filter(|g| g.is_relative()) {
                *g = base.join(&*g);
            }
        }
    }
}

/// Everything needed to rerun an experiment. The first dataset is the one
/// models are trained on; the others are external attack sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub train_fraction: f64,
    pub window_p: usize,
    pub window_q: usize,
    /// Train models for the first `max_users` users only (all others still
    /// serve as impostors).
    pub max_users: Option<usize>,
    pub classifiers: Vec<ClassifierKind>,
    pub architectures: Vec<Architecture>,
    pub scenarios: Vec<ScenarioKind>,
    pub k_grid: Vec<usize>,
    pub synth_candidates: Vec<usize>,
    pub cv_folds: usize,
    pub attack_n: usize,
    /// `seed` is mixed into the per-model seed.
    pub adasyn: AdasynConfig,
    /// `seed` is mixed into the per-model seed.
    pub gan: GanTrainConfig,
    pub classifier: ClassifierConfig,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            train_fraction: 0.6,
            window_p: 5,
            window_q: 1,
            max_users: None,
            classifiers: vec![ClassifierKind::Mlp],
            architectures: vec![Architecture::V, Architecture::G],
            scenarios: ScenarioKind::ALL.to_vec(),
            k_grid: DEFAULT_K_GRID.to_vec(),
            synth_candidates: DEFAULT_SYNTH_CANDIDATES.to_vec(),
            cv_folds: 5,
            attack_n: DEFAULT_ATTACK_VECTORS,
            adasyn: AdasynConfig::default(),
            gan: GanTrainConfig::default(),
            classifier: ClassifierConfig::default(),
            seeds: vec![0],
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads a TOML config, or JSON when the extension is `.json`. Relative
    /// CSV paths are resolved against the config file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.datasets.iter_mut().for_each(|d| d.resolve_relative(base));
        Ok(cfg)
    }

    pub fn window_dim(&self) -> usize {
        FEATURE_COUNT * self.window_p
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(config_err("at least one dataset is required"));
        }
        if self.classifiers.is_empty() {
            return Err(config_err("at least one classifier is required"));
        }
        if self.architectures.is_empty() {
            return Err(config_err("at least one architecture is required"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(config_err("train_fraction must be in (0,1)"));
        }
        if self.window_p == 0 || self.window_q == 0 {
            return Err(config_err("window p and q must be >= 1"));
        }
        if self.cv_folds < 2 {
            return Err(config_err("cv_folds must be >= 2"));
        }
        if self.attack_n == 0 {
            return Err(config_err("attack_n must be >= 1"));
        }
        if self.k_grid.is_empty() || self.k_grid.iter().any(|&k| k == 0 || k > self.window_dim()) {
            return Err(config_err(format!(
                "k_grid entries must be in 1..={}",
                self.window_dim()
            )));
        }
        if self.architectures.contains(&Architecture::G)
            && (self.synth_candidates.is_empty() || self.synth_candidates.contains(&0))
        {
            return Err(config_err("synth_candidates must be non-empty and positive"));
        }
        if self.max_users == Some(0) {
            return Err(config_err("max_users must be >= 1"));
        }
        if self.datasets.len() < 2 {
            if let Some(s) = self.scenarios.iter().find(|s| s.needs_external()) {
                return Err(config_err(format!("scenario {} needs an external dataset", s.as_str())));
            }
        }
        let unique = |n: usize, m: usize, what: &str| {
            if n != m {
                Err(config_err(format!("duplicate {what}")))
            } else {
                Ok(())
            }
        };
        unique(
            self.seeds.iter().collect::<BTreeSet<_>>().len(),
            self.seeds.len(),
            "seeds",
        )?;
        unique(
            self.classifiers.iter().collect::<BTreeSet<_>>().len(),
            self.classifiers.len(),
            "classifiers",
        )?;
        unique(
            self.architectures.iter().collect::<BTreeSet<_>>().len(),
            self.architectures.len(),
            "architectures",
        )?;
        unique(
            self.scenarios.iter().collect::<BTreeSet<_>>().len(),
            self.scenarios.len(),
            "scenarios",
        )?;
        Ok(())
    }
}

/// Raw training and test windows of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserWindows {
    pub gender: Gender,
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
}

/// Windows of a swipe sequence; swipes whose features cannot be computed are
/// skipped. Returns the rows and the number of skipped swipes.
pub fn window_rows(swipes: &[&SwipeGesture], p: usize, q: usize) -> (Vec<Vec<f64>>, usize) {
    let mut skipped = 0;
    let vectors: Vec<_> = swipes
        .iter()
        .filter_map(|s| match extract_features(s) {
            Ok(v) => Some(v),
            Err(e) => {
                log::debug!("skipping swipe {}: {e}", s.swipe_id);
                skipped += 1;
                None
            }
        })
        .collect();
    let rows = build_windows(&vectors, p, q, WindowLabel::Genuine)
        .into_iter()
        .map(|w| w.values)
        .collect();
    (rows, skipped)
}

/// Windowed data of the training dataset plus the attack sources.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset_id: String,
    pub users: BTreeMap<String, UserWindows>,
    /// Test-split windows of the training dataset.
    pub same_pool: AttackDataset,
    pub external: Vec<AttackDataset>,
    pub skipped_swipes: usize,
    pub hashes: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_rows<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> String {
    let mut h = Sha256::new();
    for r in rows {
        h.update((r.len() as u64).to_le_bytes());
        for v in r {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl PreparedData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let corpora = cfg
            .datasets
            .iter()
            .map(DatasetSource::load)
            .collect::<Result<Vec<_>>>()?;
        let (primary, external) = corpora.split_first().ok_or_else(|| config_err("no datasets"))?;
        Self::from_corpora(primary, external, cfg)
    }

    pub fn from_corpora(primary: &Corpus, external: &[Corpus], cfg: &ExperimentConfig) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for c in std::iter::once(primary).chain(external) {
            if !ids.insert(c.dataset_id.as_str()) {
                return Err(config_err(format!("dataset id `{}` used twice", c.dataset_id)));
            }
        }
        let (p, q) = (cfg.window_p, cfg.window_q);
        let mut hashes = BTreeMap::new();
        for c in std::iter::once(primary).chain(external) {
            let mut buf = Vec::new();
            write_swipe_csv(c, &mut buf)?;
            hashes.insert(format!("corpus:{}", c.dataset_id), sha256_hex(&buf));
        }

        let filtered = filter_short_swipes(primary.clone());
        let split = split_train_test(&filtered, cfg.train_fraction, cfg.seeds[0])?;
        let mut users = BTreeMap::new();
        let mut skipped_swipes = 0;
        for (user, plan) in &split.per_user {
            let swipes = filtered.user_swipes(user);
            let train_ids: BTreeSet<&str> = plan.train.iter().map(String::as_str).collect();
            let (train_sw, test_sw): (Vec<&SwipeGesture>, Vec<&SwipeGesture>) = swipes
                .into_iter()
                .partition(|s| train_ids.contains(s.swipe_id.as_str()));
            let (train, s1) = window_rows(&train_sw, p, q);
            let (test, s2) = window_rows(&test_sw, p, q);
            skipped_swipes += s1 + s2;
            users.insert(
                user.clone(),
                UserWindows {
                    gender: filtered.gender_of(user),
                    train,
                    test,
                },
            );
        }
        if users.len() < 2 {
            return Err(Error::invalid("the training dataset needs at least 2 users"));
        }
        hashes.insert(
            "windows:train".into(),
            hash_rows(users.values().flat_map(|u| u.train.iter())),
        );
        hashes.insert(
            "windows:test".into(),
            hash_rows(users.values().flat_map(|u| u.test.iter())),
        );
        let same_pool = AttackDataset {
            dataset_id: primary.dataset_id.clone(),
            windows_by_user: users.iter().map(|(u, w)| (u.clone(), w.test.clone())).collect(),
        };
        let external = external
            .iter()
            .map(|c| AttackDataset::from_corpus(&filter_short_swipes(c.clone()), p, q))
            .collect();
        Ok(Self {
            dataset_id: primary.dataset_id.clone(),
            users,
            same_pool,
            external,
            skipped_swipes,
            hashes,
        })
    }

    /// User ids that get models, in order.
    pub fn model_users(&self, cfg: &ExperimentConfig) -> Vec<String> {
        let n = cfg.max_users.unwrap_or(usize::MAX);
        self.users.keys().take(n).cloned().collect()
    }

    /// Raw training rows for `user`: own windows genuine, everyone else's impostor.
    pub fn training_set(&self, user: &str) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
        let own = self
            .users
            .get(user)
            .ok_or_else(|| Error::invalid(format!("unknown user `{user}`")))?;
        let mut rows = own.train.clone();
        let mut labels = vec![true; rows.len()];
        for (u, w) in &self.users {
            if u != user {
                rows.extend(w.train.iter().cloned());
                labels.extend(std::iter::repeat_n(false, w.train.len()));
            }
        }
        Ok((rows, labels))
    }

    pub fn genders(&self) -> BTreeMap<String, Gender> {
        self.users.iter().map(|(u, w)| (u.clone(), w.gender)).collect()
    }
}

/// What happened inside one model's training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub selected_k: usize,
    pub synth_count: Option<usize>,
    pub real_genuine: usize,
    pub real_impostor: usize,
    pub synthetic_genuine: usize,
    pub synthetic_impostor: usize,
    pub adasyn_synthetic: usize,
    /// EER on the pooled cross-validation scores.
    pub validation_eer: f64,
}

/// Normalizer, selector and projected training rows shared by the V and G
/// models of one (user, classifier, seed).
#[derive(Debug, Clone)]
pub struct BaseStage {
    pub user_id: String,
    pub classifier: ClassifierKind,
    pub seed: u64,
    pub cell_seed: u64,
    pub normalizer: Normalizer,
    pub selector: FeatureSelector,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub plan: CvPlan,
    /// Held-out scores per fold of the V pipeline at the selected `k`.
    v_folds: Option<Vec<FoldScores>>,
}

#[derive(Debug, Clone)]
struct FoldScores {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl FoldScores {
    fn hter(&self) -> Result<f64> {
        let t = select_threshold_eer(&self.genuine, &self.impostor)?;
        Ok(RateSet::new(t.far, t.frr).hter)
    }
}

fn mean_hter(folds: &[FoldScores]) -> Result<f64> {
    Ok(folds.iter().map(FoldScores::hter).sum::<Result<f64>>()? / folds.len() as f64)
}

fn pooled_threshold(folds: &[FoldScores]) -> Result<crate::classifiers::ThresholdChoice> {
    let g: Vec<f64> = folds.iter().flat_map(|f| f.genuine.iter().copied()).collect();
    let i: Vec<f64> = folds.iter().flat_map(|f| f.impostor.iter().copied()).collect();
    select_threshold_eer(&g, &i)
}

pub fn model_id(dataset: &str, user: &str, kind: ClassifierKind, arch: Architecture, seed: u64) -> String {
    format!("{dataset}:{user}:{}:{}:{seed}", kind.as_str(), arch.as_str())
}

struct Fitter<'a> {
    cfg: &'a ExperimentConfig,
    kind: ClassifierKind,
    cell_seed: u64,
}

impl Fitter<'_> {
    /// Appends synthetic rows, balances with ADASYN and trains the classifier.
    fn fit(
        &self,
        rows: &[Vec<f64>],
        labels: &[bool],
        synth: Option<(&[Vec<f64>], &[Vec<f64>])>,
        slot: u64,
    ) -> Result<(TrainedClassifier, usize)> {
        let mut x = rows.to_vec();
        let mut y = labels.to_vec();
        if let Some((gen, imp)) = synth {
            x.extend(gen.iter().cloned());
            y.extend(std::iter::repeat_n(true, gen.len()));
            x.extend(imp.iter().cloned());
            y.extend(std::iter::repeat_n(false, imp.len()));
        }
        let adasyn_cfg = AdasynConfig {
            seed: rng::derive_seed(self.cell_seed, &[0xADA, self.cfg.adasyn.seed, slot]),
            ..self.cfg.adasyn
        };
        let balanced = adasyn_balance(&x, &y, &adasyn_cfg)?;
        let clf_seed = rng::derive_seed(self.cell_seed, &[0xC1, slot]);
        let clf = train_classifier(
            self.kind,
            &self.cfg.classifier,
            &balanced.rows,
            &balanced.labels,
            clf_seed,
        )?;
        Ok((clf, balanced.synthetic_count()))
    }

    fn cv_scores(
        &self,
        rows: &[Vec<f64>],
        labels: &[bool],
        plan: &CvPlan,
        synth: Option<(&[Vec<f64>], &[Vec<f64>])>,
    ) -> Result<Vec<FoldScores>> {
        plan.check_classes(labels)?;
        (0..plan.folds)
            .map(|fold| {
                let (train, test) = plan.split(fold);
                let tx: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
                let ty: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
                let (clf, _) = self.fit(&tx, &ty, synth, fold as u64)?;
                let mut out = FoldScores {
                    genuine: Vec::new(),
                    impostor: Vec::new(),
                };
                for &i in &test {
                    let s = clf.score(&rows[i]);
                    if labels[i] {
                        out.genuine.push(s);
                    } else {
                        out.impostor.push(s);
                    }
                }
                Ok(out)
            })
            .collect()
    }
}

fn project_rows(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect()
}

fn cell_seed(seed: u64, user: &str, kind: ClassifierKind) -> u64 {
    rng::derive_seed(seed, &[rng::tag_str(user), rng::tag_str(kind.as_str())])
}

/// Fits the normalizer on all training windows and picks the MI-ranked
/// feature count by cross-validated HTER of the V pipeline.
pub fn fit_base_stage(
    data: &PreparedData,
    user: &str,
    kind: ClassifierKind,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<BaseStage> {
    let own = data
        .users
        .get(user)
        .ok_or_else(|| Error::invalid(format!("unknown user `{user}`")))?;
    let needed = cfg.cv_folds.max(2 * (cfg.adasyn.k + 1));
    if own.train.len() < needed {
        return Err(Error::InsufficientGenuineData {
            user: user.to_string(),
            windows: own.train.len(),
            needed,
        });
    }
    let (raw, labels) = data.training_set(user)?;
    let normalizer = Normalizer::fit(raw.iter().map(Vec::as_slice))?;
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| normalizer.apply(r)).collect();

    let cs = cell_seed(seed, user, kind);
    let plan = CvPlan::stratified(&labels, cfg.cv_folds, rng::derive_seed(cs, &[0xCF]))?;
    let fitter = Fitter {
        cfg,
        kind,
        cell_seed: cs,
    };
    let mut fold_cache: BTreeMap<usize, Vec<FoldScores>> = BTreeMap::new();
    let selector = select_features(&rows, &labels, &cfg.k_grid, |idx| {
        let folds = fitter.cv_scores(&project_rows(&rows, idx), &labels, &plan, None)?;
        let h = mean_hter(&folds)?;
        fold_cache.insert(idx.len(), folds);
        Ok(h)
    })?;
    let v_folds = fold_cache.remove(&selector.output_dim());
    let rows = project_rows(&rows, &selector.selected_indices);
    Ok(BaseStage {
        user_id: user.to_string(),
        classifier: kind,
        seed,
        cell_seed: cs,
        normalizer,
        selector,
        rows,
        labels,
        plan,
        v_folds,
    })
}

/// Completes one architecture on top of a base stage.
pub fn finish_model(
    base: &BaseStage,
    data: &PreparedData,
    arch: Architecture,
    cfg: &ExperimentConfig,
) -> Result<(AuthModel, TrainingTrace)> {
    let fitter = Fitter {
        cfg,
        kind: base.classifier,
        cell_seed: base.cell_seed,
    };
    let (genuine, impostor): (Vec<Vec<f64>>, Vec<Vec<f64>>) = {
        let mut g = Vec::new();
        let mut i = Vec::new();
        for (r, &l) in base.rows.iter().zip(&base.labels) {
            if l {
                g.push(r.clone())
            } else {
                i.push(r.clone())
            }
        }
        (g, i)
    };

    let (gan_pair, synth, synth_count, folds) = match arch {
        Architecture::V => {
            let folds = match &base.v_folds {
                Some(f) => f.clone(),
                None => fitter.cv_scores(&base.rows, &base.labels, &base.plan, None)?,
            };
            (None, None, None, folds)
        }
        Architecture::G => {
            let gan_cfg = GanTrainConfig {
                seed: rng::derive_seed(base.cell_seed, &[0x6A, cfg.gan.seed]),
                ..cfg.gan.clone()
            };
            let pair = GanPair::train(&genuine, &impostor, &gan_cfg)?;
            let synth_seed = rng::derive_seed(base.cell_seed, &[0x5E]);
            let mut candidates = cfg.synth_candidates.clone();
            candidates.sort_unstable();
            candidates.dedup();
            let mut best: Option<(f64, usize, Vec<FoldScores>)> = None;
            for &c in &candidates {
                let (sg, si) = pair.generate(c, synth_seed);
                let folds = fitter.cv_scores(&base.rows, &base.labels, &base.plan, Some((&sg, &si)))?;
                let h = if candidates.len() == 1 { 0.0 } else { mean_hter(&folds)? };
                if best.as_ref().is_none_or(|(bh, _, _)| h < *bh) {
                    best = Some((h, c, folds));
                }
            }
            let (_, c, folds) = best.ok_or_else(|| config_err("no synthetic-count candidates"))?;
            let synth = pair.generate(c, synth_seed);
            (Some(pair), Some(synth), Some(c), folds)
        }
    };

    let choice = pooled_threshold(&folds)?;
    let synth_ref = synth.as_ref().map(|(g, i)| (g.as_slice(), i.as_slice()));
    let (classifier, adasyn_synthetic) = fitter.fit(&base.rows, &base.labels, synth_ref, u64::MAX)?;
    let trace = TrainingTrace {
        selected_k: base.selector.output_dim(),
        synth_count,
        real_genuine: genuine.len(),
        real_impostor: impostor.len(),
        synthetic_genuine: synth.as_ref().map_or(0, |s| s.0.len()),
        synthetic_impostor: synth.as_ref().map_or(0, |s| s.1.len()),
        adasyn_synthetic,
        validation_eer: choice.eer,
    };
    let model = AuthModel {
        model_id: model_id(&data.dataset_id, &base.user_id, base.classifier, arch, base.seed),
        user_id: base.user_id.clone(),
        dataset_id: data.dataset_id.clone(),
        architecture: arch,
        classifier,
        threshold: choice.tau,
        normalizer: base.normalizer.clone(),
        selector: base.selector.clone(),
        gan_pair,
        window: (cfg.window_p, cfg.window_q),
        seed: base.seed,
    };
    Ok((model, trace))
}

/// Trains one user's model for one architecture.
pub fn train_user_model(
    data: &PreparedData,
    user: &str,
    kind: ClassifierKind,
    arch: Architecture,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<(AuthModel, TrainingTrace)> {
    let base = fit_base_stage(data, user, kind, seed, cfg)?;
    finish_model(&base, data, arch, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_id: String,
    pub user_id: String,
    pub classifier: ClassifierKind,
    pub architecture: Architecture,
    pub seed: u64,
    pub trace: TrainingTrace,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub subject: String,
    pub error: String,
}

impl FailureRecord {
    fn new(stage: &str, subject: impl Into<String>, err: &Error) -> Self {
        let subject = subject.into();
        log::warn!("{stage} failed for {subject}: {err}");
        Self {
            stage: stage.into(),
            subject,
            error: err.to_string(),
        }
    }
}

/// Trained models with their records, in (seed, user, classifier,
/// architecture) order.
pub struct TrainingRun {
    pub models: Vec<AuthModel>,
    pub records: Vec<ModelRecord>,
    pub failures: Vec<FailureRecord>,
}

/// Trains every configured model. Cells run in parallel; results keep the
/// configured order. Failed cells are recorded and skipped.
pub fn train_all(data: &PreparedData, cfg: &ExperimentConfig) -> Result<TrainingRun> {
    let users = data.model_users(cfg);
    let cells: Vec<(u64, &String, ClassifierKind)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| {
            users
                .iter()
                .flat_map(move |u| cfg.classifiers.iter().map(move |&k| (s, u, k)))
        })
        .collect();
    let results: Vec<Vec<std::result::Result<(AuthModel, TrainingTrace), FailureRecord>>> = cells
        .par_iter()
        .map(|&(seed, user, kind)| {
            let subject = |arch: Option<Architecture>| match arch {
                Some(a) => model_id(&data.dataset_id, user, kind, a, seed),
                None => format!("{}:{user}:{}:*:{seed}", data.dataset_id, kind.as_str()),
            };
            match fit_base_stage(data, user, kind, seed, cfg) {
                Err(e) => vec![Err(FailureRecord::new("base_stage", subject(None), &e))],
                Ok(base) => cfg
                    .architectures
                    .iter()
                    .map(|&arch| {
                        finish_model(&base, data, arch, cfg)
                            .map_err(|e| FailureRecord::new("finish_model", subject(Some(arch)), &e))
                    })
                    .collect(),
            }
        })
        .collect();
    let mut run = TrainingRun {
        models: Vec::new(),
        records: Vec::new(),
        failures: Vec::new(),
    };
    for r in results.into_iter().flatten() {
        match r {
            Ok((model, trace)) => {
                run.records.push(ModelRecord {
                    model_id: model.model_id.clone(),
                    user_id: model.user_id.clone(),
                    classifier: model_kind(&model),
                    architecture: model.architecture,
                    seed: model.seed,
                    trace,
                    sha256: sha256_hex(&model.to_json_bytes()?),
                });
                run.models.push(model);
            }
            Err(f) => run.failures.push(f),
        }
    }
    Ok(run)
}

pub fn model_kind(model: &AuthModel) -> ClassifierKind {
    match model.classifier {
        TrainedClassifier::Mlp(_) => ClassifierKind::Mlp,
        TrainedClassifier::Rf(_) => ClassifierKind::Rf,
    }
}

fn attack_seed(model: &AuthModel, kind: ScenarioKind) -> u64 {
    rng::derive_seed(
        model.seed,
        &[rng::tag_str(&model.model_id), rng::tag_str(kind.as_str())],
    )
}

/// Runs one scenario against one model. Returns the pooled outcome and the
/// per-dataset parts.
pub fn attack_model(
    model: &AuthModel,
    kind: ScenarioKind,
    data: &PreparedData,
    n: usize,
) -> Result<(AttackOutcome, Vec<AttackOutcome>)> {
    match kind {
        ScenarioKind::ZeroSame => {
            let parts = zero_effort_attack(std::slice::from_ref(model), std::slice::from_ref(&data.same_pool))?;
            Ok((parts[0].clone(), Vec::new()))
        }
        ScenarioKind::ZeroCross => {
            if data.external.is_empty() {
                return Err(Error::NoImpostorData("external".into()));
            }
            let parts = zero_effort_attack(std::slice::from_ref(model), &data.external)?;
            let pooled = AttackOutcome::pooled(&parts).ok_or(Error::EmptyList)?;
            Ok((pooled, parts))
        }
        ScenarioKind::Population => {
            let stats = population_stats(&data.external, model)?;
            Ok((
                population_attack(model, &stats, n, attack_seed(model, kind))?,
                Vec::new(),
            ))
        }
        ScenarioKind::Random => Ok((
            random_vector_attack(model, model.input_dim(), n, attack_seed(model, kind))?,
            Vec::new(),
        )),
    }
}

/// Genuine FRR and every configured scenario for every model. Models whose
/// genuine evaluation or any scenario fails are left out and recorded.
pub fn run_attacks(
    models: &[AuthModel],
    data: &PreparedData,
    cfg: &ExperimentConfig,
) -> (AttackManifest, Vec<FailureRecord>) {
    type PerModel = std::result::Result<(GenuineOutcome, Vec<(AttackOutcome, Vec<AttackOutcome>)>), FailureRecord>;
    let per_model: Vec<PerModel> = models
        .par_iter()
        .map(|m| {
            let test = data.users.get(&m.user_id).map(|u| u.test.as_slice()).unwrap_or(&[]);
            let genuine = genuine_outcome(m, test).map_err(|e| FailureRecord::new("genuine_frr", &m.model_id, &e))?;
            let runs = cfg
                .scenarios
                .iter()
                .map(|&k| {
                    attack_model(m, k, data, cfg.attack_n).map_err(|e| FailureRecord::new(k.as_str(), &m.model_id, &e))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((genuine, runs))
        })
        .collect();

    let mut failures = Vec::new();
    let mut genuine = Vec::new();
    let mut scenarios: Vec<ScenarioRun> = cfg
        .scenarios
        .iter()
        .map(|&kind| ScenarioRun {
            kind,
            seed: cfg.seeds[0],
            n: match kind {
                ScenarioKind::Population | ScenarioKind::Random => cfg.attack_n,
                _ => 0,
            },
            source_dataset_ids: match kind {
                ScenarioKind::ZeroSame => vec![data.dataset_id.clone()],
                ScenarioKind::Random => Vec::new(),
                _ => data.external.iter().map(|d| d.dataset_id.clone()).collect(),
            },
            outcomes: Vec::new(),
            per_dataset: Vec::new(),
        })
        .collect();
    for r in per_model {
        match r {
            Ok((g, runs)) => {
                genuine.push(g);
                for (slot, (pooled, parts)) in scenarios.iter_mut().zip(runs) {
                    slot.outcomes.push(pooled);
                    slot.per_dataset.extend(parts);
                }
            }
            Err(f) => failures.push(f),
        }
    }
    (AttackManifest::new(genuine, scenarios), failures)
}

/// One report per (model, scenario) with the model's single genuine FRR.
pub fn build_reports(
    models: &[AuthModel],
    attacks: &AttackManifest,
    genders: &BTreeMap<String, Gender>,
) -> Vec<EvalReport> {
    let frr: BTreeMap<&str, f64> = attacks.genuine.iter().map(|g| (g.model_id.as_str(), g.frr)).collect();
    let mut reports = Vec::new();
    for m in models {
        let Some(&frr) = frr.get(m.model_id.as_str()) else {
            continue;
        };
        for run in &attacks.scenarios {
            if let Some(o) = run.outcomes.iter().find(|o| o.model_id == m.model_id) {
                let rates = RateSet::new(o.far, frr);
                reports.push(EvalReport {
                    model_id: m.model_id.clone(),
                    classifier: model_kind(m).as_str().to_string(),
                    architecture: m.architecture,
                    scenario: run.kind,
                    far: rates.far,
                    frr: rates.frr,
                    hter: rates.hter,
                    gender: genders.get(&m.user_id).copied().unwrap_or(Gender::Unspecified),
                    dataset_ids: o.dataset_ids.clone(),
                    seed: m.seed,
                });
            }
        }
    }
    reports
}

/// Heatmaps and gender fairness cells; analysis errors become notes.
pub fn analyse(reports: &[EvalReport]) -> (Option<HeatmapTables>, Vec<FairnessCell>, Vec<String>) {
    let mut notes = Vec::new();
    let heatmaps = if reports.is_empty() {
        None
    } else {
        match emit_heatmap_tables(reports) {
            Ok(h) => Some(h),
            Err(e) => {
                notes.push(format!("heatmaps: {e}"));
                None
            }
        }
    };
    let fairness = if reports.is_empty() {
        Vec::new()
    } else {
        fairness_by_group(reports, Grouping::Gender).unwrap_or_else(|e| {
            notes.push(format!("fairness: {e}"));
            Vec::new()
        })
    };
    (heatmaps, fairness, notes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format_version: u32,
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    pub stage_order: Vec<String>,
    /// Output hashes of the data stages and of the report file.
    pub stage_hashes: BTreeMap<String, String>,
    pub skipped_swipes: usize,
    pub models: Vec<ModelRecord>,
    pub failures: Vec<FailureRecord>,
    pub genuine: Vec<GenuineOutcome>,
    pub reports: Vec<EvalReport>,
    pub heatmaps: Option<HeatmapTables>,
    pub fairness: Vec<FairnessCell>,
    pub notes: Vec<String>,
    pub wall_clock_secs: f64,
}

impl ExperimentManifest {
    pub fn report_file(&self) -> ReportFile {
        ReportFile::new(self.reports.clone())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: MANIFEST_FORMAT_VERSION,
                found: m.format_version,
            });
        }
        Ok(m)
    }
}

pub struct ExperimentOutput {
    pub manifest: ExperimentManifest,
    pub models: Vec<AuthModel>,
    pub attacks: AttackManifest,
}

/// Full grid: train, attack, report, analyse.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let data = PreparedData::load(cfg)?;
    run_experiment_on(&data, cfg)
}

/// [`run_experiment`] on already prepared data.
pub fn run_experiment_on(data: &PreparedData, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let training = train_all(data, cfg)?;
    let (attacks, attack_failures) = run_attacks(&training.models, data, cfg);
    let reports = build_reports(&training.models, &attacks, &data.genders());
    let (heatmaps, fairness, notes) = analyse(&reports);

    let mut stage_hashes = data.hashes.clone();
    let report_json = ReportFile::new(reports.clone()).to_json()?;
    stage_hashes.insert("reports".into(), sha256_hex(report_json.as_bytes()));
    let mut failures = training.failures;
    failures.extend(attack_failures);
    let manifest = ExperimentManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        toolkit_version: crate::VERSION.to_string(),
        config: cfg.clone(),
        stage_order: STAGE_ORDER.iter().map(|s| s.to_string()).collect(),
        stage_hashes,
        skipped_swipes: data.skipped_swipes,
        models: training.records,
        failures,
        genuine: attacks.genuine.clone(),
        reports,
        heatmaps,
        fairness,
        notes,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput {
        manifest,
        models: training.models,
        attacks,
    })
}
