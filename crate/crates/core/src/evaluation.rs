//! Error rates, Gaussian KDE, fairness-by-gender analysis and heatmap
//! tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attacks::ScenarioKind;
use crate::classifiers::Architecture;
use crate::data::Gender;
use crate::error::{Error, Result};
use crate::features::percentile;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
}

impl RateSet {
    pub fn new(far: f64, frr: f64) -> Self {
        Self {
            far,
            frr,
            hter: (far + frr) / 2.0,
        }
    }
}

/// Fraction of `true` entries.
pub fn accept_fraction(decisions: &[bool]) -> f64 {
    decisions.iter().filter(|&&d| d).count() as f64 / decisions.len() as f64
}

/// FAR = accepted impostors / impostors, FRR = rejected genuine / genuine.
/// Decisions are `true` for accept.
pub fn compute_rates(genuine_decisions: &[bool], impostor_decisions: &[bool]) -> Result<RateSet> {
    if genuine_decisions.is_empty() || impostor_decisions.is_empty() {
        return Err(Error::EmptyList);
    }
    let rejected = genuine_decisions.iter().filter(|&&d| !d).count();
    let frr = rejected as f64 / genuine_decisions.len() as f64;
    Ok(RateSet::new(accept_fraction(impostor_decisions), frr))
}

/// Probability of defeating the entry point (`p`) and then `n` continuous
/// checks, each with probability `q`.
pub fn bypass_probability(p: f64, q: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("probabilities must lie in [0,1]"));
    }
    Ok(p * q.powi(n as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Silverman's rule `0.9 * min(sd, IQR/1.34) * k^(-1/5)`. Falls back to
/// whichever spread is non-zero, and to a small positive width for a
/// constant sample.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let sd = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let iqr = match (percentile(samples, 75.0), percentile(samples, 25.0)) {
        (Ok(hi), Ok(lo)) => hi - lo,
        _ => 0.0,
    };
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return 1e-3 * mean.abs().max(1.0),
    };
    0.9 * spread * k.powf(-0.2)
}

fn gaussian_sum(samples: &[f64], x: f64, h: f64) -> f64 {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    samples
        .iter()
        .map(|&s| {
            let u = (x - s) / h;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
        * norm
}

/// Gaussian KDE evaluated on caller-supplied points.
pub fn kde_on_grid(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Vec<f64> {
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(samples));
    grid.iter().map(|&x| gaussian_sum(samples, x, h)).collect()
}

/// Gaussian KDE on a uniform grid spanning `[min - 4h, max + 4h]`.
pub fn kde_density(samples: &[f64], grid_size: usize, bandwidth: Option<f64>) -> Result<KdeCurve> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if grid_size < 2 {
        return Err(Error::invalid("KDE grid needs at least 2 points"));
    }
    if let Some(h) = bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("bandwidth must be positive"));
        }
    }
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(samples));
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();
    let density = kde_on_grid(samples, &grid, Some(h));
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}

pub fn trapezoid_integral(curve: &KdeCurve) -> f64 {
    curve
        .grid
        .windows(2)
        .zip(curve.density.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub classifier: String,
    pub architecture: Architecture,
    pub scenario: ScenarioKind,
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
    pub gender: Gender,
    pub dataset_ids: Vec<String>,
    pub seed: u64,
}

impl EvalReport {
    pub fn rates(&self) -> RateSet {
        RateSet {
            far: self.far,
            frr: self.frr,
            hter: self.hter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub reports: Vec<EvalReport>,
}

impl ReportFile {
    pub fn new(reports: Vec<EvalReport>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            reports,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s)?;
        if f.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::FormatVersion {
                expected: REPORT_SCHEMA_VERSION,
                found: f.schema_version,
            });
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Gender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub hters: Vec<f64>,
    pub mean_hter: f64,
    pub kde: KdeCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessCell {
    pub architecture: Architecture,
    pub scenario: ScenarioKind,
    pub groups: BTreeMap<Gender, GroupStats>,
    /// Largest absolute difference of group mean HTERs.
    pub gap: f64,
}

pub const FAIRNESS_KDE_GRID: usize = 128;

/// Per-(architecture, scenario) HTER distributions split by gender.
/// Reports with an unspecified gender are left out.
pub fn fairness_by_group(reports: &[EvalReport], grouping: Grouping) -> Result<Vec<FairnessCell>> {
    let Grouping::Gender = grouping;
    let mut cells: BTreeMap<(Architecture, ScenarioKind), BTreeMap<Gender, Vec<f64>>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.gender != Gender::Unspecified) {
        cells
            .entry((r.architecture, r.scenario))
            .or_default()
            .entry(r.gender)
            .or_default()
            .push(r.hter);
    }
    if cells.is_empty() {
        return Err(Error::GroupTooSmall("any".into()));
    }
    cells
        .into_iter()
        .map(|((architecture, scenario), groups)| {
            if groups.len() < 2 {
                let present = groups.keys().next().map_or("none", |g| g.as_str());
                let missing = [Gender::Male, Gender::Female]
                    .into_iter()
                    .find(|g| g.as_str() != present)
                    .map_or("other", |g| g.as_str());
                return Err(Error::GroupTooSmall(missing.into()));
            }
            let mut stats = BTreeMap::new();
            for (g, hters) in groups {
                if hters.len() < 2 {
                    return Err(Error::GroupTooSmall(g.as_str().into()));
                }
                let mean_hter = hters.iter().sum::<f64>() / hters.len() as f64;
                let kde = kde_density(&hters, FAIRNESS_KDE_GRID, None)?;
                stats.insert(g, GroupStats { hters, mean_hter, kde });
            }
            let means: Vec<f64> = stats.values().map(|s| s.mean_hter).collect();
            let gap = group_gap(&means);
            Ok(FairnessCell {
                architecture,
                scenario,
                groups: stats,
                gap,
            })
        })
        .collect()
}

/// Largest pairwise absolute difference.
pub fn group_gap(means: &[f64]) -> f64 {
    let mut gap: f64 = 0.0;
    for (i, a) in means.iter().enumerate() {
        for b in &means[i + 1..] {
            gap = gap.max((a - b).abs());
        }
    }
    gap
}

/// Two-sided permutation p-value for the difference of means of `a` and `b`.
pub fn permutation_gap_pvalue(a: &[f64], b: &[f64], permutations: usize, seed: u64) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let observed = (mean(a) - mean(b)).abs();
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut r = rng::stream(seed, &[0x9E2]);
    let mut extreme = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(&mut r);
        let (pa, pb) = pooled.split_at(a.len());
        if (mean(pa) - mean(pb)).abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (permutations + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Far,
    Frr,
    Hter,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Far => "far",
            Metric::Frr => "frr",
            Metric::Hter => "hter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub classifier: String,
    pub architecture: Architecture,
    /// `None` for the scenario-independent FRR table.
    pub scenario: Option<ScenarioKind>,
    pub metric: Metric,
    pub value: f64,
    pub n_models: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTables {
    pub far: Vec<HeatmapCell>,
    pub hter: Vec<HeatmapCell>,
    pub frr: Vec<HeatmapCell>,
}

/// Mean FAR/HTER per (classifier, architecture, scenario) and mean FRR per
/// (classifier, architecture) over distinct models.
pub fn emit_heatmap_tables(reports: &[EvalReport]) -> Result<HeatmapTables> {
    if reports.is_empty() {
        return Err(Error::EmptyList);
    }
    type Key = (String, Architecture, ScenarioKind);
    let mut by_cell: BTreeMap<Key, Vec<&EvalReport>> = BTreeMap::new();
    let mut frr: BTreeMap<(String, Architecture), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in reports {
        by_cell
            .entry((r.classifier.clone(), r.architecture, r.scenario))
            .or_default()
            .push(r);
        frr.entry((r.classifier.clone(), r.architecture))
            .or_default()
            .insert(r.model_id.as_str(), r.frr);
    }
    let cell = |key: &Key, metric: Metric, rs: &[&EvalReport]| {
        let models: BTreeSet<&str> = rs.iter().map(|r| r.model_id.as_str()).collect();
        let value = rs
            .iter()
            .map(|r| match metric {
                Metric::Far => r.far,
                Metric::Hter => r.hter,
                Metric::Frr => r.frr,
            })
            .sum::<f64>()
            / rs.len() as f64;
        HeatmapCell {
            classifier: key.0.clone(),
            architecture: key.1,
            scenario: Some(key.2),
            metric,
            value,
            n_models: models.len(),
        }
    };
    Ok(HeatmapTables {
        far: by_cell.iter().map(|(k, rs)| cell(k, Metric::Far, rs)).collect(),
        hter: by_cell.iter().map(|(k, rs)| cell(k, Metric::Hter, rs)).collect(),
        frr: frr
            .into_iter()
            .map(|((classifier, architecture), per_model)| HeatmapCell {
                classifier,
                architecture,
                scenario: None,
                metric: Metric::Frr,
                value: per_model.values().sum::<f64>() / per_model.len() as f64,
                n_models: per_model.len(),
            })
            .collect(),
    })
}

pub const HEATMAP_CSV_HEADER: [&str; 6] = ["classifier", "architecture", "scenario", "metric", "value", "n_models"];

pub fn write_heatmap_csv<W: Write>(cells: &[HeatmapCell], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEATMAP_CSV_HEADER)?;
    for c in cells {
        wtr.write_record([
            c.classifier.clone(),
            c.architecture.as_str().to_string(),
            c.scenario.map_or("none", ScenarioKind::as_str).to_string(),
            c.metric.as_str().to_string(),
            c.value.to_string(),
            c.n_models.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<heatmap csv>", e))?;
    Ok(())
}
