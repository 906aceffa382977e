//! Zero-effort, population and random-vector attacks against trained
//! models.
//!
//! Population and random vectors are built directly in the model's input
//! space (normalized, post-selection). Zero-effort windows are raw and go
//! through the victim's own normalizer and selector.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifiers::AuthModel;
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::features::{build_windows, extract_features, WindowLabel};
use crate::rng;

/// Vectors generated per population or random-vector attack.
pub const DEFAULT_ATTACK_VECTORS: usize = 10_000;
/// Standard deviation of the population perturbation `r`.
pub const POPULATION_R_STD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "zero_same", alias = "zero_effort_same")]
    ZeroSame,
    #[serde(rename = "zero_cross", alias = "zero_effort_cross")]
    ZeroCross,
    #[serde(rename = "population")]
    Population,
    #[serde(rename = "random", alias = "random_vector")]
    Random,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::ZeroSame,
        ScenarioKind::ZeroCross,
        ScenarioKind::Population,
        ScenarioKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::ZeroSame => "zero_same",
            ScenarioKind::ZeroCross => "zero_cross",
            ScenarioKind::Population => "population",
            ScenarioKind::Random => "random",
        }
    }

    pub fn needs_external(self) -> bool {
        matches!(self, ScenarioKind::ZeroCross | ScenarioKind::Population)
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_same" | "zero_effort_same" => Ok(ScenarioKind::ZeroSame),
            "zero_cross" | "zero_effort_cross" => Ok(ScenarioKind::ZeroCross),
            "population" => Ok(ScenarioKind::Population),
            "random" | "random_vector" => Ok(ScenarioKind::Random),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub kind: ScenarioKind,
    pub source_datasets: Vec<String>,
    pub n: usize,
    pub seed: u64,
}

impl AttackScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("attack vector count must be >= 1"));
        }
        if self.kind.needs_external() && self.source_datasets.is_empty() {
            return Err(Error::invalid(format!(
                "scenario {} needs at least one external dataset",
                self.kind.as_str()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub model_id: String,
    pub scenario: ScenarioKind,
    pub dataset_ids: Vec<String>,
    pub accepted: usize,
    pub total: usize,
    pub far: f64,
}

impl AttackOutcome {
    pub fn new(
        model_id: &str,
        scenario: ScenarioKind,
        dataset_ids: Vec<String>,
        accepted: usize,
        total: usize,
    ) -> Self {
        Self {
            model_id: model_id.to_string(),
            scenario,
            dataset_ids,
            accepted,
            total,
            far: accepted as f64 / total as f64,
        }
    }

    /// Pools several outcomes of one model and scenario into one.
    pub fn pooled(parts: &[AttackOutcome]) -> Option<AttackOutcome> {
        let first = parts.first()?;
        let accepted = parts.iter().map(|o| o.accepted).sum();
        let total = parts.iter().map(|o| o.total).sum();
        let ids = parts.iter().flat_map(|o| o.dataset_ids.clone()).collect();
        Some(AttackOutcome::new(
            &first.model_id,
            first.scenario,
            ids,
            accepted,
            total,
        ))
    }
}

/// Anything that accepts or rejects vectors in its own input space.
pub trait AttackTarget: Sync {
    fn target_id(&self) -> &str;

    fn input_dim(&self) -> usize;

    fn accepts(&self, x: &[f64]) -> bool;

    fn accepts_batch(&self, rows: &[Vec<f64>]) -> Vec<bool> {
        rows.iter().map(|r| self.accepts(r)).collect()
    }
}

impl AttackTarget for AuthModel {
    fn target_id(&self) -> &str {
        &self.model_id
    }

    fn input_dim(&self) -> usize {
        AuthModel::input_dim(self)
    }

    fn accepts(&self, x: &[f64]) -> bool {
        self.accepts_prepared(x)
    }

    fn accepts_batch(&self, rows: &[Vec<f64>]) -> Vec<bool> {
        self.decide_prepared(rows)
    }
}

/// Raw (unnormalized) window vectors of one dataset, grouped by user.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttackDataset {
    pub dataset_id: String,
    pub windows_by_user: BTreeMap<String, Vec<Vec<f64>>>,
}

impl AttackDataset {
    /// Windows every user's swipes in time order. Swipes whose features
    /// cannot be computed are skipped.
    pub fn from_corpus(corpus: &Corpus, p: usize, q: usize) -> Self {
        let mut windows_by_user = BTreeMap::new();
        for user in corpus.user_ids() {
            let vectors: Vec<_> = corpus
                .user_swipes(&user)
                .into_iter()
                .filter_map(|s| extract_features(s).ok())
                .collect();
            let w: Vec<Vec<f64>> = build_windows(&vectors, p, q, WindowLabel::Impostor)
                .into_iter()
                .map(|w| w.values)
                .collect();
            windows_by_user.insert(user, w);
        }
        Self {
            dataset_id: corpus.dataset_id.clone(),
            windows_by_user,
        }
    }

    /// Windows of every user except `exclude_user`.
    pub fn impostor_windows<'a>(&'a self, exclude_user: Option<&'a str>) -> impl Iterator<Item = &'a Vec<f64>> + 'a {
        self.windows_by_user
            .iter()
            .filter(move |(u, _)| Some(u.as_str()) != exclude_user)
            .flat_map(|(_, w)| w.iter())
    }
}

fn count_accepted<T: AttackTarget + ?Sized>(target: &T, rows: &[Vec<f64>]) -> usize {
    target.accepts_batch(rows).into_iter().filter(|&a| a).count()
}

/// Scores every model against impostor windows of every dataset. Within the
/// model's own dataset the genuine user is excluded; external datasets are
/// used in full. One outcome per (model, dataset), in input order.
pub fn zero_effort_attack(models: &[AuthModel], datasets: &[AttackDataset]) -> Result<Vec<AttackOutcome>> {
    let mut out = Vec::with_capacity(models.len() * datasets.len());
    for model in models {
        for ds in datasets {
            let same = ds.dataset_id == model.dataset_id;
            let exclude = same.then_some(model.user_id.as_str());
            let prepared = ds
                .impostor_windows(exclude)
                .map(|w| model.prepare(w))
                .collect::<Result<Vec<_>>>()?;
            if prepared.is_empty() {
                return Err(Error::NoImpostorData(ds.dataset_id.clone()));
            }
            let kind = if same {
                ScenarioKind::ZeroSame
            } else {
                ScenarioKind::ZeroCross
            };
            out.push(AttackOutcome::new(
                &model.model_id,
                kind,
                vec![ds.dataset_id.clone()],
                count_accepted(model, &prepared),
                prepared.len(),
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub count: usize,
    pub dataset_ids: Vec<String>,
}

impl PopulationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Per-dimension mean and population standard deviation (Welford) of rows.
pub fn moments<'a, I>(rows: I) -> Option<(Vec<f64>, Vec<f64>, usize)>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut it = rows.into_iter();
    let first = it.next()?;
    let mut mean = first.to_vec();
    let mut m2 = vec![0.0; first.len()];
    let mut n = 1usize;
    for row in it {
        n += 1;
        for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
            let d = x - *m;
            *m += d / n as f64;
            *s += d * (x - *m);
        }
    }
    let std = m2.iter().map(|s| (s / n as f64).max(0.0).sqrt()).collect();
    Some((mean, std, n))
}

/// Statistics of the external pool in `model`'s input space. The model's
/// training dataset must not be part of the pool.
pub fn population_stats(datasets: &[AttackDataset], model: &AuthModel) -> Result<PopulationStats> {
    if let Some(ds) = datasets.iter().find(|d| d.dataset_id == model.dataset_id) {
        return Err(Error::invalid(format!(
            "population pool must exclude the training dataset `{}`",
            ds.dataset_id
        )));
    }
    let prepared = datasets
        .iter()
        .flat_map(|d| d.impostor_windows(None))
        .map(|w| model.prepare(w))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std, count) = moments(prepared.iter().map(Vec::as_slice)).ok_or(Error::EmptyPool)?;
    Ok(PopulationStats {
        mean,
        std,
        count,
        dataset_ids: datasets.iter().map(|d| d.dataset_id.clone()).collect(),
    })
}

/// `mean_i + r * std_i` with `r ~ N(0, 3)` drawn per dimension, clamped to
/// `[0,1]`. Draws are consumed vector by vector, dimension by dimension.
pub fn population_vectors(stats: &PopulationStats, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, POPULATION_R_STD).expect("valid normal");
    let mut r = rng::stream(seed, &[0x909]);
    (0..n)
        .map(|_| {
            stats
                .mean
                .iter()
                .zip(&stats.std)
                .map(|(&m, &s)| {
                    let z: f64 = normal.sample(&mut r);
                    (m + z * s).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect()
}

/// I.i.d. `U[0,1)` vectors of length `l`.
pub fn random_vectors(l: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, &[0x7A4D]);
    (0..n).map(|_| (0..l).map(|_| r.random::<f64>()).collect()).collect()
}

const CHUNK: usize = 1000;

fn attack_in_chunks<T, G>(
    target: &T,
    n: usize,
    kind: ScenarioKind,
    dataset_ids: Vec<String>,
    mut gen: G,
) -> AttackOutcome
where
    T: AttackTarget + ?Sized,
    G: FnMut(usize) -> Vec<Vec<f64>>,
{
    let mut accepted = 0;
    let mut done = 0;
    while done < n {
        let take = CHUNK.min(n - done);
        accepted += count_accepted(target, &gen(take));
        done += take;
    }
    AttackOutcome::new(target.target_id(), kind, dataset_ids, accepted, n)
}

pub fn population_attack<T: AttackTarget + ?Sized>(
    target: &T,
    stats: &PopulationStats,
    n: usize,
    seed: u64,
) -> Result<AttackOutcome> {
    if stats.dim() != target.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.input_dim(),
            got: stats.dim(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("attack vector count must be >= 1"));
    }
    let normal = Normal::new(0.0, POPULATION_R_STD).expect("valid normal");
    let mut r = rng::stream(seed, &[0x909]);
    Ok(attack_in_chunks(
        target,
        n,
        ScenarioKind::Population,
        stats.dataset_ids.clone(),
        |take| {
            (0..take)
                .map(|_| {
                    stats
                        .mean
                        .iter()
                        .zip(&stats.std)
                        .map(|(&m, &s)| (m + normal.sample(&mut r) * s).clamp(0.0, 1.0))
                        .collect()
                })
                .collect()
        },
    ))
}

pub fn random_vector_attack<T: AttackTarget + ?Sized>(
    target: &T,
    l: usize,
    n: usize,
    seed: u64,
) -> Result<AttackOutcome> {
    if l != target.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.input_dim(),
            got: l,
        });
    }
    if n == 0 {
        return Err(Error::invalid("attack vector count must be >= 1"));
    }
    let mut r = rng::stream(seed, &[0x7A4D]);
    Ok(attack_in_chunks(target, n, ScenarioKind::Random, Vec::new(), |take| {
        (0..take).map(|_| (0..l).map(|_| r.random::<f64>()).collect()).collect()
    }))
}

/// Genuine test outcome of one model; independent of any attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenuineOutcome {
    pub model_id: String,
    pub rejected: usize,
    pub total: usize,
    pub frr: f64,
}

/// Scores held-out genuine windows (raw) against the model.
pub fn genuine_outcome(model: &AuthModel, raw_windows: &[Vec<f64>]) -> Result<GenuineOutcome> {
    if raw_windows.is_empty() {
        return Err(Error::EmptyList);
    }
    let prepared = raw_windows
        .iter()
        .map(|w| model.prepare(w))
        .collect::<Result<Vec<_>>>()?;
    let rejected = model.decide_prepared(&prepared).into_iter().filter(|&a| !a).count();
    Ok(GenuineOutcome {
        model_id: model.model_id.clone(),
        rejected,
        total: prepared.len(),
        frr: rejected as f64 / prepared.len() as f64,
    })
}

pub const ATTACK_MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub n: usize,
    pub source_dataset_ids: Vec<String>,
    /// One pooled outcome per model.
    pub outcomes: Vec<AttackOutcome>,
    /// Per-dataset outcomes (zero-effort scenarios only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_dataset: Vec<AttackOutcome>,
}

/// JSON record of an attack run, consumed by the evaluation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackManifest {
    pub format_version: u32,
    pub genuine: Vec<GenuineOutcome>,
    pub scenarios: Vec<ScenarioRun>,
}

impl AttackManifest {
    pub fn new(genuine: Vec<GenuineOutcome>, scenarios: Vec<ScenarioRun>) -> Self {
        Self {
            format_version: ATTACK_MANIFEST_VERSION,
            genuine,
            scenarios,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.format_version != ATTACK_MANIFEST_VERSION {
            return Err(Error::FormatVersion {
                expected: ATTACK_MANIFEST_VERSION,
                found: m.format_version,
            });
        }
        Ok(m)
    }
}
