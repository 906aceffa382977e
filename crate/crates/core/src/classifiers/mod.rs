//! Binary scoring classifiers, EER thresholding, cross-validation and the
//! per-user [`AuthModel`].
//!
//! Labels are `true` for genuine and scores are genuine-likeness in `[0,1]`;
//! a window is accepted when its score reaches the model threshold.

mod cv;
mod forest;
mod mlp;
mod threshold;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, CvPlan, CvResult};
pub use forest::{train_random_forest, ForestHyper, RandomForest, Tree, TreeNode};
pub use mlp::{train_mlp, MlpClassifier, MlpHyper};
pub use threshold::{rates_at, select_threshold_eer, ThresholdChoice};

use crate::error::{Error, Result};
use crate::features::{FeatureSelector, Normalizer};
use crate::gan::GanPair;

/// A trained binary scorer.
pub trait Classifier: Send + Sync {
    fn name(&self) -> &'static str;

    fn input_dim(&self) -> usize;

    /// Genuine-likeness in `[0,1]`.
    fn score(&self, x: &[f64]) -> f64;

    fn score_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.score(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    /// Vanilla pipeline.
    V,
    /// Pipeline with dual-GAN augmentation.
    G,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::V => "V",
            Architecture::G => "G",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(Architecture::V),
            "G" | "g" => Ok(Architecture::G),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Mlp,
    Rf,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Rf => "rf",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ClassifierKind::Mlp),
            "rf" => Ok(ClassifierKind::Rf),
            other => Err(Error::Config(format!("unknown classifier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub mlp: MlpHyper,
    pub rf: ForestHyper,
}

/// Serializable union of the shipped classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Mlp(MlpClassifier),
    Rf(RandomForest),
}

impl Classifier for TrainedClassifier {
    fn name(&self) -> &'static str {
        match self {
            TrainedClassifier::Mlp(m) => m.name(),
            TrainedClassifier::Rf(f) => f.name(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            TrainedClassifier::Mlp(m) => m.input_dim(),
            TrainedClassifier::Rf(f) => f.input_dim(),
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        match self {
            TrainedClassifier::Mlp(m) => m.score(x),
            TrainedClassifier::Rf(f) => f.score(x),
        }
    }

    fn score_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        match self {
            TrainedClassifier::Mlp(m) => m.score_batch(rows),
            TrainedClassifier::Rf(f) => f.score_batch(rows),
        }
    }
}

pub fn train_classifier(
    kind: ClassifierKind,
    cfg: &ClassifierConfig,
    rows: &[Vec<f64>],
    labels: &[bool],
    seed: u64,
) -> Result<TrainedClassifier> {
    Ok(match kind {
        ClassifierKind::Mlp => TrainedClassifier::Mlp(train_mlp(rows, labels, &cfg.mlp, seed)?),
        ClassifierKind::Rf => TrainedClassifier::Rf(train_random_forest(rows, labels, &cfg.rf, seed)?),
    })
}

pub(crate) fn check_training_set(rows: &[Vec<f64>], labels: &[bool]) -> Result<usize> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: rows.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let dim = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: r.len(),
        });
    }
    Ok(dim)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained per-user authentication model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthModel {
    pub model_id: String,
    pub user_id: String,
    pub dataset_id: String,
    pub architecture: Architecture,
    pub classifier: TrainedClassifier,
    pub threshold: f64,
    pub normalizer: Normalizer,
    pub selector: FeatureSelector,
    pub gan_pair: Option<GanPair>,
    /// Swipes per window and window stride.
    pub window: (usize, usize),
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelContainer<M> {
    format_version: u32,
    kind: String,
    model: M,
}

impl AuthModel {
    /// Dimension of the classifier input (post-selection).
    pub fn input_dim(&self) -> usize {
        self.selector.output_dim()
    }

    pub fn raw_dim(&self) -> usize {
        self.normalizer.dim()
    }

    /// Raw window values to classifier input: normalize, then select.
    pub fn prepare(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.raw_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.raw_dim(),
                got: raw.len(),
            });
        }
        Ok(self.selector.project(&self.normalizer.apply(raw)))
    }

    pub fn accepts_prepared(&self, x: &[f64]) -> bool {
        self.classifier.score(x) >= self.threshold
    }

    pub fn accepts_raw(&self, raw: &[f64]) -> Result<bool> {
        Ok(self.accepts_prepared(&self.prepare(raw)?))
    }

    /// Accept/reject decisions for a batch of prepared rows.
    pub fn decide_prepared(&self, rows: &[Vec<f64>]) -> Vec<bool> {
        self.classifier
            .score_batch(rows)
            .into_iter()
            .map(|s| s >= self.threshold)
            .collect()
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let c = ModelContainer {
            format_version: MODEL_FORMAT_VERSION,
            kind: "auth_model".into(),
            model: self,
        };
        Ok(serde_json::to_vec(&c)?)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let c: ModelContainer<AuthModel> = serde_json::from_slice(bytes)?;
        if c.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                expected: MODEL_FORMAT_VERSION,
                found: c.format_version,
            });
        }
        Ok(c.model)
    }
}
