//! Swipe corpus model: ingestion, filtering, train/test splitting and a
//! seeded synthetic generator.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const SWIPE_CSV_HEADER: [&str; 9] = [
    "dataset_id",
    "user_id",
    "swipe_id",
    "event_index",
    "t_ms",
    "x",
    "y",
    "major_axis",
    "minor_axis",
];

pub const GENDER_CSV_HEADER: [&str; 2] = ["user_id", "gender"];

/// Swipes with this many points or fewer are dropped by preprocessing.
pub const MIN_SWIPE_POINTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub x: f64,
    pub y: f64,
    /// Milliseconds.
    pub t: f64,
    /// Fingertip major axis.
    pub a: f64,
    /// Fingertip minor axis.
    pub b: f64,
}

impl TouchEvent {
    pub fn new(x: f64, y: f64, t: f64, a: f64, b: f64) -> Self {
        Self { x, y, t, a, b }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if ![self.x, self.y, self.t, self.a, self.b].iter().all(|v| v.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.b < 0.0 || self.a < self.b {
            return Err(format!(
                "fingertip axes must satisfy a >= b >= 0 (a={}, b={})",
                self.a, self.b
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwipeGesture {
    pub user_id: String,
    pub dataset_id: String,
    pub swipe_id: String,
    pub events: Vec<TouchEvent>,
}

impl SwipeGesture {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Timestamp of the first event, or NaN for an empty swipe.
    pub fn t_start(&self) -> f64 {
        self.events.first().map_or(f64::NAN, |e| e.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

impl std::str::FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            "unspecified" | "" => Ok(Gender::Unspecified),
            other => Err(Error::invalid(format!("unknown gender `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserMeta {
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub dataset_id: String,
    pub swipes: Vec<SwipeGesture>,
    pub user_metadata: BTreeMap<String, UserMeta>,
}

impl Corpus {
    pub fn empty(dataset_id: impl Into<String>) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            swipes: Vec::new(),
            user_metadata: BTreeMap::new(),
        }
    }

    /// Sorted, de-duplicated user ids that own at least one swipe.
    pub fn user_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.swipes.iter().map(|s| s.user_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn gender_of(&self, user_id: &str) -> Gender {
        self.user_metadata
            .get(user_id)
            .map_or(Gender::Unspecified, |m| m.gender)
    }

    /// Swipes of one user in chronological order (ties broken by swipe id).
    pub fn user_swipes(&self, user_id: &str) -> Vec<&SwipeGesture> {
        let mut v: Vec<&SwipeGesture> = self.swipes.iter().filter(|s| s.user_id == user_id).collect();
        v.sort_by(|a, b| {
            a.t_start()
                .total_cmp(&b.t_start())
                .then_with(|| a.swipe_id.cmp(&b.swipe_id))
        });
        v
    }
}

/// Side-channel counts from CSV ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: u64,
    /// Swipes dropped because timestamps were not monotone in event order.
    pub non_monotone_dropped: usize,
    pub missing_axes: bool,
}

pub fn parse_swipe_csv(path: impl AsRef<Path>) -> Result<(Corpus, ParseReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_swipe_csv(file)
}

/// Reads the canonical swipe CSV. The two fingertip-axis columns may be
/// absent, in which case every axis is recorded as 0.
pub fn read_swipe_csv<R: Read>(reader: R) -> Result<(Corpus, ParseReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_axes = if cols == SWIPE_CSV_HEADER {
        true
    } else if cols == SWIPE_CSV_HEADER[..7] {
        false
    } else {
        return Err(Error::BadHeader(cols.join(",")));
    };

    let mut report = ParseReport {
        missing_axes: !has_axes,
        ..Default::default()
    };
    let mut dataset_id: Option<String> = None;
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<(u64, TouchEvent)>> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        if record.len() != cols.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                cols.len(),
                record.len()
            )));
        }
        report.rows += 1;

        let ds = &record[0];
        match &dataset_id {
            None => dataset_id = Some(ds.to_string()),
            Some(d) if d != ds => {
                return Err(Error::MixedDataset {
                    expected: d.clone(),
                    found: ds.to_string(),
                })
            }
            _ => {}
        }
        let num = |idx: usize| -> Result<f64> {
            let raw = &record[idx];
            if raw.is_empty() && idx >= 7 {
                return Ok(0.0);
            }
            raw.parse::<f64>()
                .map_err(|_| malformed(format!("column `{}`: cannot parse `{raw}`", cols[idx])))
        };
        let event_index: u64 = record[3]
            .parse()
            .map_err(|_| malformed(format!("event_index: cannot parse `{}`", &record[3])))?;
        let (a, b) = if has_axes { (num(7)?, num(8)?) } else { (0.0, 0.0) };
        let ev = TouchEvent::new(num(5)?, num(6)?, num(4)?, a, b);
        ev.validate().map_err(malformed)?;

        let key = (record[1].to_string(), record[2].to_string());
        let slot = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        if slot.iter().any(|(i, _)| *i == event_index) {
            return Err(malformed(format!("duplicate event_index {event_index}")));
        }
        slot.push((event_index, ev));
    }

    let dataset_id = dataset_id.unwrap_or_default();
    let mut corpus = Corpus::empty(dataset_id.clone());
    for key in order {
        let mut events = groups.remove(&key).unwrap_or_default();
        events.sort_by_key(|(i, _)| *i);
        if events.windows(2).any(|w| w[1].1.t < w[0].1.t) {
            report.non_monotone_dropped += 1;
            continue;
        }
        let (user_id, swipe_id) = key;
        corpus.swipes.push(SwipeGesture {
            user_id,
            dataset_id: dataset_id.clone(),
            swipe_id,
            events: events.into_iter().map(|(_, e)| e).collect(),
        });
    }
    if report.non_monotone_dropped > 0 {
        log::warn!(
            "dropped {} swipe(s) with non-monotone timestamps",
            report.non_monotone_dropped
        );
    }
    Ok((corpus, report))
}

pub fn write_swipe_csv<W: Write>(corpus: &Corpus, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SWIPE_CSV_HEADER)?;
    for s in &corpus.swipes {
        for (i, e) in s.events.iter().enumerate() {
            wtr.write_record([
                s.dataset_id.clone(),
                s.user_id.clone(),
                s.swipe_id.clone(),
                i.to_string(),
                e.t.to_string(),
                e.x.to_string(),
                e.y.to_string(),
                e.a.to_string(),
                e.b.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<swipe csv>", e))?;
    Ok(())
}

pub fn save_swipe_csv(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_swipe_csv(corpus, f)
}

pub fn read_gender_csv<R: Read>(reader: R) -> Result<BTreeMap<String, UserMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != GENDER_CSV_HEADER {
        return Err(Error::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let gender = record[1].parse().map_err(|e: Error| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        out.insert(record[0].to_string(), UserMeta { gender });
    }
    Ok(out)
}

pub fn load_gender_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, UserMeta>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_gender_csv(f)
}

pub fn write_gender_csv<W: Write>(meta: &BTreeMap<String, UserMeta>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(GENDER_CSV_HEADER)?;
    for (user, m) in meta {
        wtr.write_record([user.as_str(), m.gender.as_str()])?;
    }
    wtr.flush().map_err(|e| Error::io("<gender csv>", e))?;
    Ok(())
}

/// Keeps only swipes with more than five touch points.
pub fn filter_short_swipes(corpus: Corpus) -> Corpus {
    let Corpus {
        dataset_id,
        swipes,
        user_metadata,
    } = corpus;
    Corpus {
        dataset_id,
        swipes: swipes.into_iter().filter(|s| s.len() >= MIN_SWIPE_POINTS).collect(),
        user_metadata,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_fraction: f64,
    /// Recorded for provenance; the split itself is chronological.
    pub seed: u64,
    pub per_user: BTreeMap<String, UserSplit>,
}

/// Chronological per-user split: the earliest `floor(fraction * n)` swipes
/// of every user go to training, the rest to testing.
pub fn split_train_test(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut per_user = BTreeMap::new();
    for user in corpus.user_ids() {
        let swipes = corpus.user_swipes(&user);
        if swipes.len() < 2 {
            return Err(Error::UserTooSmall(user));
        }
        let n_train = (train_fraction * swipes.len() as f64).floor() as usize;
        let ids: Vec<String> = swipes.iter().map(|s| s.swipe_id.clone()).collect();
        let (train, test) = ids.split_at(n_train);
        per_user.insert(
            user,
            UserSplit {
                train: train.to_vec(),
                test: test.to_vec(),
            },
        );
    }
    Ok(SplitPlan {
        train_fraction,
        seed,
        per_user,
    })
}

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub dataset_id: String,
    pub num_users: usize,
    pub swipes_per_user: usize,
    /// Scales between-user variation of the behavioural profiles.
    pub profile_spread: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(num_users: usize, swipes_per_user: usize, profile_spread: f64, seed: u64) -> Self {
        Self {
            dataset_id: "synth".into(),
            num_users,
            swipes_per_user,
            profile_spread,
            seed,
        }
    }

    pub fn with_dataset_id(mut self, id: impl Into<String>) -> Self {
        self.dataset_id = id.into();
        self
    }
}

const SYNTH_MIN_POINTS: usize = 8;
const SYNTH_MAX_POINTS: usize = 40;

/// Per-user behavioural profile of the synthetic generator.
#[derive(Debug, Clone)]
struct Profile {
    start: (f64, f64),
    length: f64,
    angle: f64,
    duration: f64,
    curvature: f64,
    ease: f64,
    major: f64,
    minor_ratio: f64,
    points: f64,
}

impl Profile {
    fn draw<R: Rng>(rng: &mut R, spread: f64, device_scale: f64) -> Self {
        let mut g = |sd: f64| -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            spread * sd * z
        };
        Self {
            start: (device_scale * (540.0 + g(120.0)), device_scale * (1500.0 + g(150.0))),
            length: device_scale * 700.0 * g(0.25).exp(),
            angle: -std::f64::consts::FRAC_PI_2 + g(0.3),
            duration: 180.0 * g(0.3).exp(),
            curvature: g(0.15),
            ease: (1.6 * g(0.3).exp()).max(1.0),
            major: 60.0 * g(0.15).exp(),
            minor_ratio: (0.75 + g(0.08)).clamp(0.4, 1.0),
            points: (20.0 * g(0.3).exp()).clamp(SYNTH_MIN_POINTS as f64, SYNTH_MAX_POINTS as f64),
        }
    }

    fn swipe<R: Rng>(&self, rng: &mut R, t0: f64) -> Vec<TouchEvent> {
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let n = (self.points + 3.0 * z())
            .round()
            .clamp(SYNTH_MIN_POINTS as f64, SYNTH_MAX_POINTS as f64) as usize;
        let p0 = (self.start.0 + 40.0 * z(), self.start.1 + 40.0 * z());
        let length = self.length * (0.1 * z()).exp();
        let angle = self.angle + 0.08 * z();
        let p2 = (p0.0 + length * angle.cos(), p0.1 + length * angle.sin());
        let curvature = self.curvature + 0.05 * z();
        let mid = ((p0.0 + p2.0) / 2.0, (p0.1 + p2.1) / 2.0);
        // perpendicular to the chord
        let perp = (-(angle.sin()), angle.cos());
        let p1 = (mid.0 + curvature * length * perp.0, mid.1 + curvature * length * perp.1);
        let duration = self.duration * (0.12 * z()).exp();
        let major = self.major * (0.05 * z()).exp();

        let mut events = Vec::with_capacity(n);
        let mut t = t0;
        let base_dt = duration / (n - 1) as f64;
        for i in 0..n {
            if i > 0 {
                t += base_dt * (0.1 * z()).exp();
            }
            let u = i as f64 / (n - 1) as f64;
            let s = ease_progress(u, self.ease);
            let bx = (1.0 - s).powi(2) * p0.0 + 2.0 * s * (1.0 - s) * p1.0 + s * s * p2.0;
            let by = (1.0 - s).powi(2) * p0.1 + 2.0 * s * (1.0 - s) * p1.1 + s * s * p2.1;
            let a = major * (0.05 * z()).exp();
            let b = a * self.minor_ratio;
            events.push(TouchEvent::new(bx + 1.5 * z(), by + 1.5 * z(), t, a, b));
        }
        events
    }
}

fn ease_progress(u: f64, e: f64) -> f64 {
    let a = u.powf(e);
    let b = (1.0 - u).powf(e);
    a / (a + b)
}

/// Generates a seeded synthetic corpus with distinguishable per-user
/// behaviour. Identical parameters produce identical corpora.
pub fn synth_generate_corpus(params: &SynthParams) -> Result<Corpus> {
    if params.num_users < 2 {
        return Err(Error::invalid("synthetic corpus needs at least 2 users"));
    }
    if params.swipes_per_user < 10 {
        return Err(Error::invalid("synthetic corpus needs at least 10 swipes per user"));
    }
    if !(params.profile_spread.is_finite() && params.profile_spread >= 0.0) {
        return Err(Error::invalid("profile_spread must be finite and >= 0"));
    }
    let ds_tag = rng::tag_str(&params.dataset_id);
    let device_scale = {
        let mut r = rng::stream(params.seed, &[ds_tag, 0xDE51CE]);
        let d = Normal::new(0.0_f64, 0.1).expect("valid normal");
        d.sample(&mut r).exp()
    };

    let mut corpus = Corpus::empty(params.dataset_id.clone());
    for u in 0..params.num_users {
        let user_id = format!("u{u:03}");
        let mut prof_rng = rng::stream(params.seed, &[ds_tag, 1, u as u64]);
        let profile = Profile::draw(&mut prof_rng, params.profile_spread, device_scale);
        let mut swipe_rng = rng::stream(params.seed, &[ds_tag, 2, u as u64]);
        let mut t0 = 0.0;
        for k in 0..params.swipes_per_user {
            let events = profile.swipe(&mut swipe_rng, t0);
            t0 = events.last().map_or(t0, |e| e.t) + 500.0 + 2000.0 * swipe_rng.random::<f64>();
            corpus.swipes.push(SwipeGesture {
                user_id: user_id.clone(),
                dataset_id: params.dataset_id.clone(),
                swipe_id: format!("s{k:04}"),
                events,
            });
        }
        let mut g_rng = rng::stream(params.seed, &[ds_tag, 3, u as u64]);
        let gender = if g_rng.random::<bool>() {
            Gender::Male
        } else {
            Gender::Female
        };
        corpus.user_metadata.insert(user_id, UserMeta { gender });
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swipe(user: &str, id: &str, n: usize) -> SwipeGesture {
        SwipeGesture {
            user_id: user.into(),
            dataset_id: "d".into(),
            swipe_id: id.into(),
            events: (0..n)
                .map(|i| TouchEvent::new(i as f64, 0.0, i as f64 * 10.0, 1.0, 1.0))
                .collect(),
        }
    }

    #[test]
    fn parses_two_row_file() {
        let csv = "dataset_id,user_id,swipe_id,event_index,t_ms,x,y,major_axis,minor_axis\n\
                   d,u1,s1,0,0,10,20,5,4\n\
                   d,u1,s1,1,8,12,25,5,4\n";
        let (c, rep) = read_swipe_csv(csv.as_bytes()).unwrap();
        assert_eq!(c.swipes.len(), 1);
        assert_eq!(c.swipes[0].len(), 2);
        assert_eq!(c.dataset_id, "d");
        assert_eq!(rep.non_monotone_dropped, 0);
    }

    #[test]
    fn missing_axis_columns_become_zero() {
        let csv = "dataset_id,user_id,swipe_id,event_index,t_ms,x,y\n\
                   d,u1,s1,0,0,10,20\n\
                   d,u1,s1,1,8,12,25\n";
        let (c, rep) = read_swipe_csv(csv.as_bytes()).unwrap();
        assert!(rep.missing_axes);
        assert!(c.swipes[0].events.iter().all(|e| e.a == 0.0 && e.b == 0.0));
    }

    #[test]
    fn shuffled_time_drops_swipe() {
        let csv = "dataset_id,user_id,swipe_id,event_index,t_ms,x,y,major_axis,minor_axis\n\
                   d,u1,s1,0,0,10,20,5,4\n\
                   d,u1,s1,1,30,12,25,5,4\n\
                   d,u1,s1,2,20,14,30,5,4\n\
                   d,u1,s2,0,100,10,20,5,4\n\
                   d,u1,s2,1,110,12,25,5,4\n";
        let (c, rep) = read_swipe_csv(csv.as_bytes()).unwrap();
        assert_eq!(rep.non_monotone_dropped, 1);
        assert_eq!(c.swipes.len(), 1);
        assert_eq!(c.swipes[0].swipe_id, "s2");
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "dataset_id,user_id,swipe_id,event_index,t_ms,x,y,major_axis,minor_axis\n\
                   d,u1,s1,0,0,10,20,5,4\n\
                   d,u1,s1,1,oops,12,25,5,4\n";
        match read_swipe_csv(csv.as_bytes()) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_axis_order() {
        assert!(matches!(
            read_swipe_csv("a,b\n1,2\n".as_bytes()),
            Err(Error::BadHeader(_))
        ));
        let csv = "dataset_id,user_id,swipe_id,event_index,t_ms,x,y,major_axis,minor_axis\n\
                   d,u1,s1,0,0,10,20,3,4\n";
        assert!(matches!(
            read_swipe_csv(csv.as_bytes()),
            Err(Error::MalformedRow { .. })
        ));
    }

    #[test]
    fn filter_boundary() {
        let mut c = Corpus::empty("d");
        c.swipes = vec![swipe("u", "a", 5), swipe("u", "b", 6)];
        let f = filter_short_swipes(c);
        assert_eq!(f.swipes.len(), 1);
        assert_eq!(f.swipes[0].swipe_id, "b");
        assert!(filter_short_swipes(Corpus::empty("d")).swipes.is_empty());
        assert_eq!(filter_short_swipes(f.clone()), f);
    }

    #[test]
    fn split_counts() {
        let mut c = Corpus::empty("d");
        for k in 0..100 {
            let mut s = swipe("u1", &format!("s{k:03}"), 6);
            s.events.iter_mut().for_each(|e| e.t += k as f64 * 1000.0);
            c.swipes.push(s);
        }
        for k in 0..5 {
            let mut s = swipe("u2", &format!("s{k:03}"), 6);
            s.events.iter_mut().for_each(|e| e.t += k as f64 * 1000.0);
            c.swipes.push(s);
        }
        let plan = split_train_test(&c, 0.6, 0).unwrap();
        assert_eq!(plan.per_user["u1"].train.len(), 60);
        assert_eq!(plan.per_user["u1"].test.len(), 40);
        assert_eq!(plan.per_user["u2"].train, vec!["s000", "s001", "s002"]);
        assert_eq!(plan.per_user["u2"].test.len(), 2);
        assert!(split_train_test(&c, 1.0, 0).is_err());
        assert!(split_train_test(&c, 0.0, 0).is_err());
    }

    #[test]
    fn split_rejects_tiny_user() {
        let mut c = Corpus::empty("d");
        c.swipes = vec![swipe("u1", "a", 6)];
        assert!(matches!(
            split_train_test(&c, 0.6, 0),
            Err(Error::UserTooSmall(u)) if u == "u1"
        ));
    }

    #[test]
    fn synth_is_deterministic_and_survives_filter() {
        let p = SynthParams::new(20, 200, 1.0, 7);
        let a = synth_generate_corpus(&p).unwrap();
        let b = synth_generate_corpus(&p).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_swipe_csv(&a, &mut ba).unwrap();
        write_swipe_csv(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert!(a.swipes.iter().all(|s| s.len() >= 8 && s.len() <= 40));
        assert_eq!(filter_short_swipes(a.clone()).swipes.len(), a.swipes.len());
        for s in &a.swipes {
            assert!(s.events.windows(2).all(|w| w[1].t > w[0].t));
            assert!(s.events.iter().all(|e| e.validate().is_ok()));
        }
    }

    #[test]
    fn synth_rejects_bad_params() {
        assert!(synth_generate_corpus(&SynthParams::new(1, 20, 1.0, 0)).is_err());
        assert!(synth_generate_corpus(&SynthParams::new(3, 9, 1.0, 0)).is_err());
    }

    #[test]
    fn gender_csv_round_trip() {
        let mut m = BTreeMap::new();
        m.insert("u1".to_string(), UserMeta { gender: Gender::Female });
        m.insert(
            "u2".to_string(),
            UserMeta {
                gender: Gender::Unspecified,
            },
        );
        let mut buf = Vec::new();
        write_gender_csv(&m, &mut buf).unwrap();
        assert_eq!(read_gender_csv(buf.as_slice()).unwrap(), m);
    }
}
