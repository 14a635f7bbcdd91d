//! Pairwise impact-conflict detection.
//!
//! For every pair of requests that share a room, a time span and an
//! environment property, the joint ambient trace is predicted and scored
//! against the requirement of each resident who asked for a setpoint. The
//! score is combined with how well the resident's preference band matches the
//! predicted range and how much of the shared span is violated.

use serde::{Deserialize, Serialize};

use crate::dynamics::{predict_signal, Affinity, RoomContext};
use crate::error::{Error, Result};
use crate::model::{
    overlap_segment, same_location, EnvProperty, Impact, ImpactConflict, OverlapSegment,
    ServiceEvent, ServiceRequest, TimeInterval, Timestamp,
};
use crate::preference::{estimate_preference, PreferenceBand, PreferenceParams, PreferenceTarget};
use crate::signal::Signal;
use crate::stl::{
    deviation_integral_with, violation_intervals, DeviationMode, StlRequirement,
};

/// One real number per environment property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerProperty {
    pub temperature: f64,
    pub illumination: f64,
    pub sound: f64,
    pub humidity: f64,
}

impl PerProperty {
    pub fn get(&self, p: EnvProperty) -> f64 {
        match p {
            EnvProperty::Temperature => self.temperature,
            EnvProperty::Illumination => self.illumination,
            EnvProperty::Sound => self.sound,
            EnvProperty::Humidity => self.humidity,
        }
    }

    fn values(&self) -> [(EnvProperty, f64); 4] {
        EnvProperty::ALL.map(|p| (p, self.get(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    #[default]
    WithPreference,
    /// Any deviation from the requested setpoint is a conflict.
    NoPreference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    /// Deviation-integral value mapped to an impact weight of 1.
    pub impact_normalization_cap: PerProperty,
    /// Band half-width used when no preference can be mined.
    pub default_tolerance: PerProperty,
    /// Conflicts with temporal proximity below this are pruned.
    pub temporal_threshold: f64,
    /// Conflicts with preferential proximity above this are pruned.
    pub preferential_threshold: f64,
    pub mode: DetectionMode,
    pub deviation: DeviationMode,
    pub preference: PreferenceParams,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            impact_normalization_cap: PerProperty {
                temperature: 100.0,
                illumination: 600.0,
                sound: 200.0,
                humidity: 300.0,
            },
            default_tolerance: PerProperty {
                temperature: 1.5,
                illumination: 5.0,
                sound: 5.0,
                humidity: 5.0,
            },
            temporal_threshold: 0.0,
            preferential_threshold: 1.0,
            mode: DetectionMode::WithPreference,
            deviation: DeviationMode::Magnitude,
            preference: PreferenceParams::default(),
        }
    }
}

impl DetectionConfig {
    pub fn with_thresholds(&self, temporal: f64, preferential: f64) -> Self {
        DetectionConfig {
            temporal_threshold: temporal,
            preferential_threshold: preferential,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (p, v) in self.impact_normalization_cap.values() {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("detection.impact_normalization_cap.{p} must be > 0"));
            }
        }
        for (p, v) in self.default_tolerance.values() {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("detection.default_tolerance.{p} must be >= 0"));
            }
        }
        for (name, v) in [
            ("temporal_threshold", self.temporal_threshold),
            ("preferential_threshold", self.preferential_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("detection.{name} must lie in [0, 1]"));
            }
        }
        errs.extend(self.preference.validate());
        errs
    }
}

/// Environment properties both requests influence.
pub fn shared_properties(
    a: &ServiceRequest,
    b: &ServiceRequest,
    affinity: &Affinity,
) -> Vec<EnvProperty> {
    let pb = affinity.properties_of(&b.service_id);
    affinity
        .properties_of(&a.service_id)
        .into_iter()
        .filter(|p| pb.contains(p))
        .collect()
}

/// Same room, overlapping in time, different users, different services and
/// at least one shared environment property.
pub fn impact_preconditions(a: &ServiceRequest, b: &ServiceRequest, affinity: &Affinity) -> bool {
    same_location(&a.location, &b.location)
        && overlap_segment(&a.interval, &b.interval).is_some()
        && a.user != b.user
        && !a.service_id.eq_ignore_ascii_case(&b.service_id)
        && !shared_properties(a, b, affinity).is_empty()
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// Overlap score between a preference range and the predicted range:
/// 1 for identical ranges, 0 for disjoint ones.
pub fn preferential_proximity(pref: (f64, f64), env: (f64, f64)) -> Result<f64> {
    let ((a_s, b_s), (a_e, b_e)) = (pref, env);
    for (lo, hi) in [pref, env] {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::MalformedRange { lo, hi });
        }
    }
    let denom = b_s.max(b_e) - a_s.min(a_e);
    if denom == 0.0 {
        return Ok(1.0);
    }
    let num = (median3(a_s, a_e, b_e) - median3(b_s, a_e, b_e)).abs();
    Ok((num / denom).clamp(0.0, 1.0))
}

/// Temporal proximity of intervals given in seconds: total covered time,
/// counted with multiplicity, over `n` times the overall span.
pub fn temporal_proximity_secs(intervals: &[(f64, f64)]) -> Result<f64> {
    let n = intervals.len();
    if n < 2 {
        return Err(Error::TooFewIntervals(n));
    }
    if let Some(&(a, b)) = intervals.iter().find(|(a, b)| !(a <= b)) {
        return Err(Error::MalformedRange { lo: a, hi: b });
    }
    // sweep over sorted endpoints accumulating depth * elapsed
    let mut edges: Vec<(f64, i32)> = intervals
        .iter()
        .flat_map(|&(a, b)| [(a, 1), (b, -1)])
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let (first, last) = (edges[0].0, edges[edges.len() - 1].0);
    if last == first {
        return Ok(1.0);
    }
    let mut depth = 0i32;
    let mut prev = first;
    let mut covered = 0.0;
    for (t, delta) in edges {
        covered += depth as f64 * (t - prev);
        depth += delta;
        prev = t;
    }
    Ok(covered / ((last - first) * n as f64))
}

pub fn temporal_proximity(intervals: &[TimeInterval]) -> Result<f64> {
    let secs: Vec<(f64, f64)> = intervals
        .iter()
        .map(|i| (i.start.secs(), i.end.secs()))
        .collect();
    temporal_proximity_secs(&secs)
}

/// `(raw, likelihood)` where the raw value is the capped impact weight times
/// `(1 - pref_prox) + temp_prox` and the likelihood halves it into `[0, 1]`.
pub fn conflict_likelihood(impact_value: f64, pref_prox: f64, temp_prox: f64, cap: f64) -> (f64, f64) {
    if !(impact_value > 0.0) {
        return (0.0, 0.0);
    }
    let weight = (impact_value / cap).min(1.0);
    let raw = weight * ((1.0 - pref_prox) + temp_prox);
    (raw, (raw / 2.0).clamp(0.0, 1.0))
}

/// Impact of running `other` alongside `affected` on the requirement `req`.
pub fn assess_impact(
    affected: &ServiceRequest,
    other: &ServiceRequest,
    ctx: &RoomContext,
    affinity: &Affinity,
    req: &StlRequirement,
    mode: DeviationMode,
) -> Result<Impact> {
    let segment = overlap_segment(&affected.interval, &other.interval).ok_or_else(|| {
        Error::Contract("requests do not overlap in time".into())
    })?;
    let signal = predict_signal(
        req.property,
        &[affected.clone(), other.clone()],
        ctx,
        affinity,
        &segment.interval(),
    )?;
    let value = deviation_integral_with(&signal, req, mode)?;
    Ok(Impact {
        service_id: affected.service_id.clone(),
        attribute: req.property,
        time: segment,
        value,
    })
}

/// Where the band used for an assessment came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BandSource {
    Mined(PreferenceBand),
    Fallback,
    Setpoint,
}

/// Everything computed for one affected resident of one request pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAssessment {
    pub affected_user: String,
    pub other_user: String,
    pub service: String,
    pub other_service: String,
    pub property: EnvProperty,
    pub location: String,
    pub segment: OverlapSegment,
    pub band: (f64, f64),
    pub band_source: BandSource,
    pub requirement: StlRequirement,
    #[serde(skip)]
    pub signal: Signal,
    pub env_range: (f64, f64),
    pub violations: Vec<(f64, f64)>,
    pub impact: f64,
    pub pref_prox: f64,
    pub temp_prox: f64,
    pub raw_cl: f64,
    pub likelihood: f64,
    pub pruned: bool,
}

impl PairAssessment {
    pub fn is_conflict(&self) -> bool {
        !self.pruned && self.impact > 0.0 && self.likelihood > 0.0
    }

    pub fn conflict(&self) -> Option<ImpactConflict> {
        if !self.is_conflict() {
            return None;
        }
        let (s0, s1) = (self.segment.start, self.segment.end);
        let first = self.violations.first().map_or(s0.secs(), |v| v.0);
        let last = self.violations.last().map_or(s1.secs(), |v| v.1);
        Some(ImpactConflict {
            service: self.service.clone(),
            attribute: self.property,
            user: self.affected_user.clone(),
            location: self.location.clone(),
            start: Timestamp::from_secs(first).clamp(s0, s1),
            end: Timestamp::from_secs(last).clamp(s0, s1),
            likelihood: self.likelihood,
            raw_cl: self.raw_cl,
            impact_value: self.impact,
            pref_prox: self.pref_prox,
            temp_prox: self.temp_prox,
        })
    }
}

pub fn room_for<'a>(rooms: &'a [RoomContext], location: &str) -> Result<&'a RoomContext> {
    rooms
        .iter()
        .find(|r| same_location(&r.location, location))
        .ok_or_else(|| Error::UnknownLocation(location.to_string()))
}

/// Scores one affected resident holding `setpoint` against an explicit
/// preference band: the requirement tolerates deviations up to the band's
/// half-width around the setpoint.
#[allow(clippy::too_many_arguments)]
pub fn assess_with_band(
    affected: &ServiceRequest,
    other: &ServiceRequest,
    property: EnvProperty,
    setpoint: f64,
    band: (f64, f64),
    band_source: BandSource,
    ctx: &RoomContext,
    affinity: &Affinity,
    cfg: &DetectionConfig,
) -> Result<PairAssessment> {
    let segment = overlap_segment(&affected.interval, &other.interval)
        .ok_or_else(|| Error::Contract("requests do not overlap in time".into()))?;
    if !(band.0 <= band.1) {
        return Err(Error::MalformedRange {
            lo: band.0,
            hi: band.1,
        });
    }
    let requirement = StlRequirement::new(
        property,
        setpoint,
        segment.interval(),
        0.5 * (band.1 - band.0),
    )?;
    let signal = predict_signal(
        property,
        &[affected.clone(), other.clone()],
        ctx,
        affinity,
        &segment.interval(),
    )?;
    let impact = deviation_integral_with(&signal, &requirement, cfg.deviation)?;
    let violations = violation_intervals(&signal, &requirement, cfg.deviation)?;
    let (s0, s1) = (segment.start.secs(), segment.end.secs());
    let env_range = signal.range_over(s0, s1);
    let pref_prox = preferential_proximity(band, env_range)?;
    let temp_prox = match (violations.first(), violations.last()) {
        (Some(first), Some(last)) => temporal_proximity_secs(&[(s0, s1), (first.0, last.1)])?,
        _ => 0.0,
    };
    let (raw_cl, mut likelihood) = conflict_likelihood(
        impact,
        pref_prox,
        temp_prox,
        cfg.impact_normalization_cap.get(property),
    );
    if cfg.mode == DetectionMode::NoPreference && impact > 0.0 {
        likelihood = 1.0;
    }
    let pruned = temp_prox < cfg.temporal_threshold || pref_prox > cfg.preferential_threshold;
    Ok(PairAssessment {
        affected_user: affected.user.clone(),
        other_user: other.user.clone(),
        service: affected.service_id.clone(),
        other_service: other.service_id.clone(),
        property,
        location: affected.location.clone(),
        segment,
        band,
        band_source,
        requirement,
        signal,
        env_range,
        violations,
        impact,
        pref_prox,
        temp_prox,
        raw_cl,
        likelihood,
        pruned,
    })
}

/// Assessments for every resident of the pair who asked for a setpoint on
/// a shared property. Empty when the preconditions fail.
pub fn analyze_pair(
    a: &ServiceRequest,
    b: &ServiceRequest,
    history: &[ServiceEvent],
    rooms: &[RoomContext],
    affinity: &Affinity,
    cfg: &DetectionConfig,
) -> Result<Vec<PairAssessment>> {
    if !impact_preconditions(a, b, affinity) {
        return Ok(Vec::new());
    }
    let ctx = room_for(rooms, &a.location)?;
    let segment = overlap_segment(&a.interval, &b.interval).expect("checked by preconditions");
    let mut out = Vec::new();
    for property in shared_properties(a, b, affinity) {
        for (affected, other) in [(a, b), (b, a)] {
            let Some(setpoint) = affinity.setpoint_of(affected, property) else {
                continue;
            };
            let (band, source) = resident_band(affected, property, setpoint, &segment, history, cfg);
            out.push(assess_with_band(
                affected, other, property, setpoint, band, source, ctx, affinity, cfg,
            )?);
        }
    }
    Ok(out)
}

fn resident_band(
    affected: &ServiceRequest,
    property: EnvProperty,
    setpoint: f64,
    segment: &OverlapSegment,
    history: &[ServiceEvent],
    cfg: &DetectionConfig,
) -> ((f64, f64), BandSource) {
    if cfg.mode == DetectionMode::NoPreference {
        return ((setpoint, setpoint), BandSource::Setpoint);
    }
    let target = PreferenceTarget::service(affected.service_id.clone(), property.name());
    match estimate_preference(
        history,
        &affected.user,
        &target,
        segment,
        &affected.location,
        &cfg.preference,
    ) {
        Some(b) => ((b.lo, b.hi), BandSource::Mined(b)),
        None => {
            let tol = cfg.default_tolerance.get(property);
            ((setpoint - tol, setpoint + tol), BandSource::Fallback)
        }
    }
}

/// Assessments for every unordered request pair.
pub fn analyze_all(
    requests: &[ServiceRequest],
    history: &[ServiceEvent],
    rooms: &[RoomContext],
    affinity: &Affinity,
    cfg: &DetectionConfig,
) -> Result<Vec<PairAssessment>> {
    let mut out = Vec::new();
    for (i, a) in requests.iter().enumerate() {
        for b in &requests[i + 1..] {
            out.extend(analyze_pair(a, b, history, rooms, affinity, cfg)?);
        }
    }
    Ok(out)
}

/// Conflicts among `requests`, one per affected resident and request pair,
/// in a canonical order independent of the input order.
pub fn detect(
    requests: &[ServiceRequest],
    history: &[ServiceEvent],
    rooms: &[RoomContext],
    affinity: &Affinity,
    cfg: &DetectionConfig,
) -> Result<Vec<ImpactConflict>> {
    let mut conflicts: Vec<ImpactConflict> = analyze_all(requests, history, rooms, affinity, cfg)?
        .iter()
        .filter_map(PairAssessment::conflict)
        .collect();
    sort_conflicts(&mut conflicts);
    Ok(conflicts)
}

pub fn sort_conflicts(conflicts: &mut [ImpactConflict]) {
    conflicts.sort_by(|x, y| {
        (x.start, x.end, &x.user, x.attribute, &x.service, &x.location)
            .cmp(&(y.start, y.end, &y.user, y.attribute, &y.service, &y.location))
            .then(x.likelihood.total_cmp(&y.likelihood))
            .then(x.impact_value.total_cmp(&y.impact_value))
    });
}
