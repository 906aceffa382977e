//! Per-swipe feature extraction, sliding windows, min-max normalization and
//! mutual-information feature selection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::SwipeGesture;
use crate::error::{Error, Result};

/// Number of features extracted from one swipe.
pub const FEATURE_COUNT: usize = 47;

/// Feature names in output order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "swipe_duration",
    "start_x",
    "start_y",
    "end_x",
    "end_y",
    "dp",
    "l",
    "velocity",
    "initial_v",
    "final_v",
    "mean_v",
    "direction",
    "area",
    "acceleration",
    "mean_a",
    "initial_a",
    "final_a",
    "aP25",
    "aP50",
    "aP75",
    "vP25",
    "vP50",
    "vP75",
    "speed",
    "initial_s",
    "final_s",
    "sP25",
    "sP50",
    "sP75",
    "mean_vx",
    "mean_vy",
    "mean_ax",
    "mean_ay",
    "mean_d",
    "max_d",
    "vxP25",
    "vxP50",
    "vxP75",
    "vyP25",
    "vyP50",
    "vyP75",
    "axP25",
    "axP50",
    "axP75",
    "ayP25",
    "ayP50",
    "ayP75",
];

/// Index of a named feature.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub user_id: String,
    pub swipe_id: String,
    /// Start time of the swipe in ms.
    pub timestamp: f64,
}

/// Linear-interpolation percentile: rank `m/100 * (k-1)` over the sorted
/// series, interpolated between neighbouring ranks.
pub fn percentile(series: &[f64], m: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, m))
}

fn percentile_sorted(sorted: &[f64], m: f64) -> f64 {
    let rank = m / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn quartiles(series: &[f64]) -> [f64; 3] {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    [25.0, 50.0, 75.0].map(|m| percentile_sorted(&sorted, m))
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Number of points in the "first/last 5%" prefix and suffix.
pub fn edge_points(n: usize) -> usize {
    ((0.05 * n as f64).ceil() as usize).max(2).min(n)
}

/// Number of entries of a derived series treated as its first/last 5%.
fn edge_entries(len: usize) -> usize {
    ((0.05 * len as f64).ceil() as usize).max(1).min(len)
}

/// Pairwise kinematics of a swipe.
struct Kinematics {
    vx: Vec<f64>,
    vy: Vec<f64>,
    /// Magnitude of the pairwise velocity.
    speed: Vec<f64>,
    /// Pairwise velocity projected on the start-to-end chord.
    along: Vec<f64>,
    ax: Vec<f64>,
    ay: Vec<f64>,
    accel: Vec<f64>,
}

impl Kinematics {
    fn of(swipe: &SwipeGesture, chord_unit: (f64, f64)) -> Self {
        let ev = &swipe.events;
        let pairs = ev.len() - 1;
        let mut k = Kinematics {
            vx: Vec::with_capacity(pairs),
            vy: Vec::with_capacity(pairs),
            speed: Vec::with_capacity(pairs),
            along: Vec::with_capacity(pairs),
            ax: Vec::with_capacity(pairs.saturating_sub(1)),
            ay: Vec::with_capacity(pairs.saturating_sub(1)),
            accel: Vec::with_capacity(pairs.saturating_sub(1)),
        };
        for w in ev.windows(2) {
            let dt = w[1].t - w[0].t;
            let vx = ratio_or_zero(w[1].x - w[0].x, dt);
            let vy = ratio_or_zero(w[1].y - w[0].y, dt);
            k.vx.push(vx);
            k.vy.push(vy);
            k.speed.push(vx.hypot(vy));
            k.along.push(vx * chord_unit.0 + vy * chord_unit.1);
        }
        for i in 1..pairs {
            // velocity i spans events (i, i+1); the step uses that interval
            let dt = ev[i + 1].t - ev[i].t;
            let ax = ratio_or_zero(k.vx[i] - k.vx[i - 1], dt);
            let ay = ratio_or_zero(k.vy[i] - k.vy[i - 1], dt);
            k.ax.push(ax);
            k.ay.push(ay);
            k.accel.push(ax.hypot(ay));
        }
        k
    }
}

/// Perpendicular distances of every point to the start-to-end chord.
fn chord_deviations(swipe: &SwipeGesture) -> Vec<f64> {
    let ev = &swipe.events;
    let (first, last) = (ev[0], ev[ev.len() - 1]);
    if first.x == last.x {
        return ev.iter().map(|e| (e.x - first.x).abs()).collect();
    }
    let m = (last.y - first.y) / (last.x - first.x);
    let c = first.y - m * first.x;
    let norm = (1.0 + m * m).sqrt();
    ev.iter().map(|e| (e.y - m * e.x - c).abs() / norm).collect()
}

fn path_length(events: &[crate::data::TouchEvent]) -> f64 {
    events
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum()
}

fn chord_velocity(events: &[crate::data::TouchEvent]) -> f64 {
    let (a, b) = (events[0], events[events.len() - 1]);
    ratio_or_zero((b.x - a.x).hypot(b.y - a.y), b.t - a.t)
}

fn path_speed(events: &[crate::data::TouchEvent]) -> f64 {
    let span = events[events.len() - 1].t - events[0].t;
    ratio_or_zero(path_length(events), span)
}

/// Extracts the 47 swipe features. Requires at least 6 touch events (the
/// preprocessing minimum) and a non-zero total duration.
pub fn extract_features(swipe: &SwipeGesture) -> Result<FeatureVector> {
    let ev = &swipe.events;
    let n = ev.len();
    if n < crate::data::MIN_SWIPE_POINTS {
        return Err(Error::invalid(format!(
            "swipe `{}` has {n} events, need at least {}",
            swipe.swipe_id,
            crate::data::MIN_SWIPE_POINTS
        )));
    }
    let (first, last) = (ev[0], ev[n - 1]);
    let duration = last.t - first.t;
    if duration == 0.0 {
        return Err(Error::DegenerateSwipe(swipe.swipe_id.clone()));
    }

    let (dx, dy) = (last.x - first.x, last.y - first.y);
    let dp = dx.hypot(dy);
    let chord_unit = if dp > 0.0 { (dx / dp, dy / dp) } else { (0.0, 0.0) };
    let l = path_length(ev);
    let kin = Kinematics::of(swipe, chord_unit);

    let k = edge_points(n);
    let initial_v = chord_velocity(&ev[..k]);
    let final_v = chord_velocity(&ev[n - k..]);
    let initial_s = path_speed(&ev[..k]);
    let final_s = path_speed(&ev[n - k..]);

    let m = edge_entries(kin.accel.len());
    let initial_a = mean(&kin.accel[..m]);
    let final_a = mean(&kin.accel[kin.accel.len() - m..]);

    let direction = if dx == 0.0 && dy == 0.0 { 0.0 } else { dx.atan2(dy) };
    let area = ev.iter().map(|e| std::f64::consts::PI * e.a * e.b).sum::<f64>() / n as f64;
    let deviations = chord_deviations(swipe);
    let max_d = deviations.iter().copied().fold(0.0, f64::max);

    let mut v = Vec::with_capacity(FEATURE_COUNT);
    v.push(duration);
    v.extend([first.x, first.y, last.x, last.y]);
    v.push(dp);
    v.push(l);
    v.push(dp / duration);
    v.push(initial_v);
    v.push(final_v);
    v.push(mean(&kin.speed));
    v.push(direction);
    v.push(area);
    v.push((final_v - initial_v) / duration);
    v.push(mean(&kin.accel));
    v.push(initial_a);
    v.push(final_a);
    v.extend(quartiles(&kin.accel));
    v.extend(quartiles(&kin.along));
    v.push(l / duration);
    v.push(initial_s);
    v.push(final_s);
    v.extend(quartiles(&kin.speed));
    v.extend([mean(&kin.vx), mean(&kin.vy), mean(&kin.ax), mean(&kin.ay)]);
    v.push(mean(&deviations));
    v.push(max_d);
    v.extend(quartiles(&kin.vx));
    v.extend(quartiles(&kin.vy));
    v.extend(quartiles(&kin.ax));
    v.extend(quartiles(&kin.ay));
    debug_assert_eq!(v.len(), FEATURE_COUNT);

    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!(
            "swipe `{}`: feature {} is not finite",
            swipe.swipe_id, FEATURE_NAMES[i]
        )));
    }
    Ok(FeatureVector {
        values: v,
        user_id: swipe.user_id.clone(),
        swipe_id: swipe.swipe_id.clone(),
        timestamp: first.t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowLabel {
    Genuine,
    Impostor,
    SyntheticGenuine,
    SyntheticImpostor,
}

impl WindowLabel {
    /// True for real or synthetic genuine windows.
    pub fn is_genuine(self) -> bool {
        matches!(self, WindowLabel::Genuine | WindowLabel::SyntheticGenuine)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WindowLabel::Genuine => "genuine",
            WindowLabel::Impostor => "impostor",
            WindowLabel::SyntheticGenuine => "synthetic_genuine",
            WindowLabel::SyntheticImpostor => "synthetic_impostor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVector {
    pub values: Vec<f64>,
    pub user_id: String,
    pub window_index: usize,
    pub label: WindowLabel,
}

/// Number of windows `build_windows` produces.
pub fn window_count(n: usize, p: usize, q: usize) -> usize {
    if p == 0 || q == 0 || n < p {
        0
    } else {
        (n - p) / q + 1
    }
}

/// Concatenates `p` consecutive feature vectors, advancing by `q` swipes.
/// Vectors must belong to one user and be in time order.
pub fn build_windows(vectors: &[FeatureVector], p: usize, q: usize, label: WindowLabel) -> Vec<WindowVector> {
    let count = window_count(vectors.len(), p, q);
    (0..count)
        .map(|i| {
            let chunk = &vectors[i * q..i * q + p];
            WindowVector {
                values: chunk.iter().flat_map(|f| f.values.iter().copied()).collect(),
                user_id: chunk[0].user_id.clone(),
                window_index: i,
                label,
            }
        })
        .collect()
}

/// Per-dimension min-max scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Fits on row-major samples. Returns an error for an empty or ragged set.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut it = rows.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::invalid("cannot fit a normalizer on no data"))?;
        let mut mins = first.to_vec();
        let mut maxs = first.to_vec();
        for row in it {
            if row.len() != mins.len() {
                return Err(Error::DimensionMismatch {
                    expected: mins.len(),
                    got: row.len(),
                });
            }
            for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    /// Maps into [0,1], clamping out-of-range values. Constant dimensions map to 0.5.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect()
    }
}

pub fn fit_normalizer(train: &[WindowVector]) -> Result<Normalizer> {
    Normalizer::fit(train.iter().map(|w| w.values.as_slice()))
}

pub fn apply_normalizer(norm: &Normalizer, v: &WindowVector) -> WindowVector {
    WindowVector {
        values: norm.apply(&v.values),
        ..v.clone()
    }
}

/// Default number of equal-frequency bins for the MI estimator.
pub const MI_BINS: usize = 10;

/// Equal-frequency bin assignment. Tied values share a bin, and the
/// partition is symmetric under reversing the order of the values.
fn equal_frequency_bins(column: &[f64], bins: usize) -> Vec<usize> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && column[order[end + 1]] == column[order[start]] {
            end += 1;
        }
        // bin position of the tie group's mid-rank: bins*(start+end+1)/(2n)
        let num = bins * (start + end + 1);
        let den = 2 * n;
        let k = num / den;
        // a mid-rank on a bin boundary goes to the side nearer the centre
        let bin = if !num.is_multiple_of(den) {
            k
        } else {
            match (2 * k).cmp(&bins) {
                std::cmp::Ordering::Less => k,
                std::cmp::Ordering::Greater => k - 1,
                // exactly on the central boundary: its own bin
                std::cmp::Ordering::Equal => bins,
            }
        };
        let bin = bin.min(bins);
        for &i in &order[start..=end] {
            out[i] = bin;
        }
        start = end + 1;
    }
    out
}

/// Plug-in mutual information (nats) between an equal-frequency binned
/// feature and a binary label.
pub fn mutual_information_binned(column: &[f64], labels: &[bool], bins: usize) -> Result<f64> {
    if column.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: column.len(),
        });
    }
    if column.len() < 10 {
        return Err(Error::TooFewSamples {
            needed: 10,
            got: column.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let n = column.len() as f64;
    let assignment = equal_frequency_bins(column, bins);
    let mut joint = vec![[0usize; 2]; bins + 1];
    for (&b, &l) in assignment.iter().zip(labels) {
        joint[b][usize::from(l)] += 1;
    }
    let py = [(labels.len() - positives) as f64 / n, positives as f64 / n];
    let mut mi = 0.0;
    for row in &joint {
        let px = (row[0] + row[1]) as f64 / n;
        for (c, &count) in row.iter().enumerate() {
            if count > 0 {
                let pxy = count as f64 / n;
                mi += pxy * (pxy / (px * py[c])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

pub fn mutual_information(column: &[f64], labels: &[bool]) -> Result<f64> {
    mutual_information_binned(column, labels, MI_BINS)
}

/// Ordered subset of window dimensions fed to the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelector {
    pub selected_indices: Vec<usize>,
    /// Mutual information of every window dimension.
    pub mi_scores: Vec<f64>,
}

impl FeatureSelector {
    pub fn identity(dim: usize) -> Self {
        Self {
            selected_indices: (0..dim).collect(),
            mi_scores: vec![0.0; dim],
        }
    }

    pub fn output_dim(&self) -> usize {
        self.selected_indices.len()
    }

    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        self.selected_indices.iter().map(|&i| values[i]).collect()
    }
}

/// Mutual information of each column of `rows` against `labels`.
pub fn mi_scores(rows: &[Vec<f64>], labels: &[bool]) -> Result<Vec<f64>> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut column = vec![0.0; rows.len()];
    (0..dim)
        .map(|d| {
            for (c, r) in column.iter_mut().zip(rows) {
                *c = r[d];
            }
            mutual_information(&column, labels)
        })
        .collect()
}

/// Dimension indices sorted by descending MI, ties by index.
pub fn rank_by_mi(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Ranks dimensions by MI and keeps the top `k`, with `k` picked from
/// `k_grid` by the lowest value of `validation_hter` (ties go to the
/// smaller `k`). The evaluator is not called when the grid has one entry.
pub fn select_features<F>(
    rows: &[Vec<f64>],
    labels: &[bool],
    k_grid: &[usize],
    mut validation_hter: F,
) -> Result<FeatureSelector>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let dim = rows.first().map_or(0, Vec::len);
    if k_grid.is_empty() {
        return Err(Error::invalid("k_grid is empty"));
    }
    if let Some(&k) = k_grid.iter().find(|&&k| k == 0 || k > dim) {
        return Err(Error::invalid(format!("k={k} outside 1..={dim}")));
    }
    let scores = mi_scores(rows, labels)?;
    let ranked = rank_by_mi(&scores);

    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let best_k = if grid.len() == 1 {
        grid[0]
    } else {
        let mut best: Option<(f64, usize)> = None;
        for &k in &grid {
            let h = validation_hter(&ranked[..k])?;
            if best.is_none_or(|(bh, _)| h < bh) {
                best = Some((h, k));
            }
        }
        best.map(|(_, k)| k).unwrap_or(grid[0])
    };
    Ok(FeatureSelector {
        selected_indices: ranked[..best_k].to_vec(),
        mi_scores: scores,
    })
}

/// Writes windows as `user_id,window_index,label,f000..`.
pub fn write_feature_matrix<W: Write>(windows: &[WindowVector], writer: W) -> Result<()> {
    let dim = windows.first().map_or(0, |w| w.values.len());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["user_id".to_string(), "window_index".into(), "label".into()];
    header.extend((0..dim).map(|i| format!("f{i:03}")));
    wtr.write_record(&header)?;
    for w in windows {
        if w.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: w.values.len(),
            });
        }
        let mut rec = vec![
            w.user_id.clone(),
            w.window_index.to_string(),
            w.label.as_str().to_string(),
        ];
        rec.extend(w.values.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<feature matrix>", e))?;
    Ok(())
}
