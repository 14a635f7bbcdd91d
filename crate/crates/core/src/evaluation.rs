//! Ground truth, classification metrics, MAE and threshold sweeps.
//!
//! A corpus is a list of request pairs, each with the history available at
//! the time, the measured room state and a ground-truth conflict flag. Cases
//! are grouped into context scenarios (user pair, property, room, hour bin,
//! binned context readings); a scenario's likelihood is its conflict rate.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detection::{analyze_pair, DetectionConfig, DetectionMode, PairAssessment};
use crate::dynamics::{Affinity, RoomContext};
use crate::error::{Error, Result};
use crate::model::{normalize_location, EnvProperty, ServiceEvent, ServiceRequest, Timestamp};

/// Bin widths used to discretize numerical contexts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextBins {
    pub temperature: f64,
    pub illumination: f64,
    pub sound: f64,
    pub humidity: f64,
    pub hours: u32,
}

impl Default for ContextBins {
    fn default() -> Self {
        ContextBins {
            temperature: 2.0,
            illumination: 10.0,
            sound: 5.0,
            humidity: 5.0,
            hours: 3,
        }
    }
}

impl ContextBins {
    pub fn width(&self, p: EnvProperty) -> f64 {
        match p {
            EnvProperty::Temperature => self.temperature,
            EnvProperty::Illumination => self.illumination,
            EnvProperty::Sound => self.sound,
            EnvProperty::Humidity => self.humidity,
        }
    }

    pub fn bin(&self, p: EnvProperty, value: f64) -> i64 {
        (value / self.width(p)).floor() as i64
    }

    pub fn hour_bin(&self, t: Timestamp) -> u32 {
        let hour = (t.time_of_day_millis() / 3_600_000) as u32;
        hour / self.hours
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for p in EnvProperty::ALL {
            let w = self.width(p);
            if !(w > 0.0) || !w.is_finite() {
                errs.push(format!("evaluation.bins.{p} must be > 0"));
            }
        }
        if self.hours == 0 || self.hours > 24 {
            errs.push("evaluation.bins.hours must lie in 1..=24".into());
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ScenarioKey {
    pub affected_user: String,
    pub other_user: String,
    pub property: EnvProperty,
    pub location: String,
    pub hour_bin: u32,
    pub context: Vec<(EnvProperty, i64)>,
}

impl ScenarioKey {
    pub fn new(
        affected_user: &str,
        other_user: &str,
        property: EnvProperty,
        location: &str,
        start: Timestamp,
        context: &BTreeMap<EnvProperty, f64>,
        bins: &ContextBins,
    ) -> Self {
        ScenarioKey {
            affected_user: affected_user.to_string(),
            other_user: other_user.to_string(),
            property,
            location: normalize_location(location),
            hour_bin: bins.hour_bin(start),
            context: context.iter().map(|(&p, &v)| (p, bins.bin(p, v))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ContextScenario {
    pub occurrences: usize,
    pub conflicts: usize,
}

impl ContextScenario {
    pub fn likelihood(&self) -> f64 {
        if self.occurrences == 0 {
            0.0
        } else {
            self.conflicts as f64 / self.occurrences as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub key: ScenarioKey,
    pub conflict: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthTable {
    pub scenarios: BTreeMap<ScenarioKey, ContextScenario>,
}

impl GroundTruthTable {
    /// Conflict rate of the scenario; 0 for scenarios never seen.
    pub fn likelihood(&self, key: &ScenarioKey) -> f64 {
        self.scenarios.get(key).map_or(0.0, ContextScenario::likelihood)
    }
}

/// Tallies occurrences and conflict observations per scenario.
pub fn build_ground_truth(observations: &[Observation]) -> GroundTruthTable {
    let mut table = GroundTruthTable::default();
    for o in observations {
        let s = table.scenarios.entry(o.key.clone()).or_default();
        s.occurrences += 1;
        s.conflicts += usize::from(o.conflict);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

/// Confusion counts with the conflict class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub conflict: ClassMetrics,
    pub no_conflict: ClassMetrics,
}

/// Accuracy and per-class precision, recall and F1. A class with no
/// predicted (or no actual) members scores 0 precision (or recall).
pub fn classification_metrics(predicted: &[bool], truth: &[bool]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::NoSamples);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let n = predicted.len();
    Ok(Metrics {
        n,
        tp,
        fp,
        fn_,
        tn,
        accuracy: (tp + tn) as f64 / n as f64,
        conflict: ClassMetrics::from_counts(tp, fp, fn_),
        no_conflict: ClassMetrics::from_counts(tn, fn_, fp),
    })
}

pub fn mean_absolute_error(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimated.len(),
            right: truth.len(),
        });
    }
    if estimated.is_empty() {
        return Err(Error::NoSamples);
    }
    let total: f64 = estimated.iter().zip(truth).map(|(e, o)| (o - e).abs()).sum();
    Ok(total / estimated.len() as f64)
}

/// One request pair to classify.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub requests: [ServiceRequest; 2],
    /// Resident whose setpoint is at stake.
    pub affected_user: String,
    pub property: EnvProperty,
    /// Room state as the detector sees it.
    pub room: RoomContext,
    /// Only history starting before this instant is visible.
    pub history_cutoff: Timestamp,
    /// Measured context values used for scenario binning.
    pub context: BTreeMap<EnvProperty, f64>,
    pub truth: bool,
}

impl EvalCase {
    pub fn other_user(&self) -> &str {
        let [a, b] = &self.requests;
        if a.user == self.affected_user {
            &b.user
        } else {
            &a.user
        }
    }

    pub fn segment_start(&self) -> Timestamp {
        let [a, b] = &self.requests;
        a.interval.start.max(b.interval.start)
    }

    pub fn scenario_key(&self, bins: &ContextBins) -> ScenarioKey {
        ScenarioKey::new(
            &self.affected_user,
            self.other_user(),
            self.property,
            &self.requests[0].location,
            self.segment_start(),
            &self.context,
            bins,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    /// Sorted by start time.
    pub history: Vec<ServiceEvent>,
    pub cases: Vec<EvalCase>,
}

impl Corpus {
    pub fn new(mut history: Vec<ServiceEvent>, cases: Vec<EvalCase>) -> Self {
        history.sort_by(|a, b| (a.interval.start, &a.event_id).cmp(&(b.interval.start, &b.event_id)));
        Corpus { history, cases }
    }

    pub fn history_before(&self, cutoff: Timestamp) -> &[ServiceEvent] {
        let k = self.history.partition_point(|e| e.interval.start < cutoff);
        &self.history[..k]
    }

    pub fn truth(&self) -> Vec<bool> {
        self.cases.iter().map(|c| c.truth).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EvaluationConfig {
    pub bins: ContextBins,
    /// Emitted conflicts with likelihood below this are labelled no-conflict.
    pub label_threshold: f64,
    pub repetitions: usize,
    pub temporal_grid: Vec<f64>,
    pub preferential_grid: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            bins: ContextBins::default(),
            label_threshold: 0.0,
            repetitions: 5,
            temporal_grid: vec![0.0, 0.6, 0.7, 0.8, 0.9],
            preferential_grid: vec![1.0, 0.8, 0.6, 0.4, 0.2],
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.bins.validate();
        if !(0.0..=1.0).contains(&self.label_threshold) {
            errs.push("evaluation.label_threshold must lie in [0, 1]".into());
        }
        if self.repetitions == 0 {
            errs.push("evaluation.repetitions must be >= 1".into());
        }
        for (name, grid) in [
            ("temporal_grid", &self.temporal_grid),
            ("preferential_grid", &self.preferential_grid),
        ] {
            if grid.is_empty() {
                errs.push(format!("evaluation.{name} must not be empty"));
            }
            if grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
                errs.push(format!("evaluation.{name} values must lie in [0, 1]"));
            }
        }
        errs
    }
}

/// The assessment of the case's affected resident, if the pair produced one.
pub fn assess_case(
    corpus: &Corpus,
    case: &EvalCase,
    affinity: &Affinity,
    cfg: &DetectionConfig,
) -> Result<Option<PairAssessment>> {
    let [a, b] = &case.requests;
    let history = corpus.history_before(case.history_cutoff);
    let found = analyze_pair(a, b, history, std::slice::from_ref(&case.room), affinity, cfg)?
        .into_iter()
        .find(|x| x.affected_user == case.affected_user && x.property == case.property);
    Ok(found)
}

pub fn label(assessment: Option<&PairAssessment>, label_threshold: f64) -> bool {
    assessment.is_some_and(|a| a.is_conflict() && a.likelihood >= label_threshold)
}

pub fn predict(
    corpus: &Corpus,
    affinity: &Affinity,
    cfg: &DetectionConfig,
    label_threshold: f64,
) -> Result<Vec<bool>> {
    corpus
        .cases
        .iter()
        .map(|c| Ok(label(assess_case(corpus, c, affinity, cfg)?.as_ref(), label_threshold)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaeRow {
    pub property: EnvProperty,
    pub class: &'static str,
    pub mae: f64,
    pub n: usize,
}

/// MAE between ground-truth and estimated scenario likelihoods, per
/// property, split by the case's true class. The estimate for a case is
/// the predicted conflict rate of its scenario.
pub fn mae_table(corpus: &Corpus, predicted: &[bool], bins: &ContextBins) -> Result<Vec<MaeRow>> {
    if predicted.len() != corpus.cases.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: corpus.cases.len(),
        });
    }
    let keys: Vec<ScenarioKey> = corpus.cases.iter().map(|c| c.scenario_key(bins)).collect();
    let observe = |labels: &mut dyn Iterator<Item = bool>| -> Vec<Observation> {
        keys.iter()
            .zip(labels)
            .map(|(k, conflict)| Observation {
                key: k.clone(),
                conflict,
            })
            .collect()
    };
    let truth = build_ground_truth(&observe(&mut corpus.cases.iter().map(|c| c.truth)));
    let estimate = build_ground_truth(&observe(&mut predicted.iter().copied()));

    let mut rows = Vec::new();
    for property in EnvProperty::ALL {
        for (class, filter) in [
            ("Conflict", Some(true)),
            ("No Conflict", Some(false)),
            ("Overall", None),
        ] {
            let (ol, el): (Vec<f64>, Vec<f64>) = corpus
                .cases
                .iter()
                .zip(&keys)
                .filter(|(c, _)| c.property == property)
                .filter(|(c, _)| filter.is_none_or(|t| c.truth == t))
                .map(|(_, k)| (truth.likelihood(k), estimate.likelihood(k)))
                .unzip();
            if ol.is_empty() {
                continue;
            }
            rows.push(MaeRow {
                property,
                class,
                mae: mean_absolute_error(&el, &ol)?,
                n: ol.len(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationRun {
    pub samples: usize,
    pub truth_conflicts: usize,
    pub with_preference: Metrics,
    pub no_preference: Metrics,
    pub mae: Vec<MaeRow>,
}

/// Scores the detector and the no-preference baseline on `corpus`.
pub fn evaluate(
    corpus: &Corpus,
    affinity: &Affinity,
    cfg: &DetectionConfig,
    eval: &EvaluationConfig,
) -> Result<EvaluationRun> {
    let truth = corpus.truth();
    let with_cfg = DetectionConfig {
        mode: DetectionMode::WithPreference,
        ..cfg.clone()
    };
    let base_cfg = DetectionConfig {
        mode: DetectionMode::NoPreference,
        ..cfg.clone()
    };
    let with_pred = predict(corpus, affinity, &with_cfg, eval.label_threshold)?;
    let base_pred = predict(corpus, affinity, &base_cfg, eval.label_threshold)?;
    Ok(EvaluationRun {
        samples: truth.len(),
        truth_conflicts: truth.iter().filter(|&&t| t).count(),
        with_preference: classification_metrics(&with_pred, &truth)?,
        no_preference: classification_metrics(&base_pred, &truth)?,
        mae: mae_table(corpus, &with_pred, &eval.bins)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaeSummary {
    pub property: EnvProperty,
    pub class: &'static str,
    pub mean: f64,
    /// Sample standard deviation across runs; 0 for a single run.
    pub std: f64,
    pub runs: usize,
}

/// Mean and sample standard deviation of matching rows across runs.
pub fn summarize_mae(runs: &[Vec<MaeRow>]) -> Vec<MaeSummary> {
    let mut groups: BTreeMap<(EnvProperty, usize), (&'static str, Vec<f64>)> = BTreeMap::new();
    let order = |class: &str| ["Conflict", "No Conflict", "Overall"].iter().position(|c| *c == class).unwrap_or(3);
    for run in runs {
        for row in run {
            groups
                .entry((row.property, order(row.class)))
                .or_insert_with(|| (row.class, Vec::new()))
                .1
                .push(row.mae);
        }
    }
    groups
        .into_iter()
        .map(|((property, _), (class, xs))| {
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            MaeSummary {
                property,
                class,
                mean,
                std,
                runs: n,
            }
        })
        .collect()
}

pub fn write_mae_csv<W: Write>(rows: &[MaeSummary], preamble: &[String], mut out: W) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["property", "class", "mae_mean", "mae_std", "runs"])?;
    for r in rows {
        w.write_record([
            r.property.name().to_string(),
            r.class.to_string(),
            format!("{:.6}", r.mean),
            format!("{:.6}", r.std),
            r.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau_t: f64,
    pub tau_p: f64,
    pub predicted_positive: usize,
    pub metrics: Metrics,
}

/// Detection at every `(tau_t, tau_p)` grid point against the same truth,
/// rows ordered temporal-major.
pub fn threshold_sweep(
    corpus: &Corpus,
    affinity: &Affinity,
    cfg: &DetectionConfig,
    temporal_grid: &[f64],
    preferential_grid: &[f64],
    label_threshold: f64,
) -> Result<Vec<SweepRow>> {
    if temporal_grid.is_empty() || preferential_grid.is_empty() {
        return Err(Error::Contract("sweep grid must not be empty".into()));
    }
    let truth = corpus.truth();
    let mut rows = Vec::with_capacity(temporal_grid.len() * preferential_grid.len());
    for &tau_t in temporal_grid {
        for &tau_p in preferential_grid {
            let point = cfg.with_thresholds(tau_t, tau_p);
            let predicted = predict(corpus, affinity, &point, label_threshold)?;
            rows.push(SweepRow {
                tau_t,
                tau_p,
                predicted_positive: predicted.iter().filter(|&&p| p).count(),
                metrics: classification_metrics(&predicted, &truth)?,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "tau_t", "tau_p", "accuracy", "precision_c", "recall_c", "f1_c", "precision_nc", "recall_nc", "f1_nc",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], preamble: &[String], mut out: W) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record(
            [
                r.tau_t,
                r.tau_p,
                m.accuracy,
                m.conflict.precision,
                m.conflict.recall,
                m.conflict.f1,
                m.no_conflict.precision,
                m.no_conflict.recall,
                m.no_conflict.f1,
            ]
            .map(|v| format!("{v:.6}")),
        )?;
    }
    w.flush()?;
    Ok(())
}
