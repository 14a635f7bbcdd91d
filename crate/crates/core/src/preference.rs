//! Preference bands mined from a resident's service history.
//!
//! History is searched for events that ran during the impacted period,
//! their attribute values are clustered, and the densest cluster is reduced
//! to the narrowest range covering most of its mass.

use serde::{Deserialize, Serialize};

use crate::dbscan::{cluster_sizes, dbscan, Label};
use crate::error::{Error, Result};
use crate::model::{
    same_location, EnvProperty, OverlapSegment, ServiceEvent, TimeInterval, MILLIS_PER_DAY,
};

/// How a historical event is matched against the impacted segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// Positive-measure intersection with the segment's time of day on any
    /// day, so past days' events at the same hours qualify.
    #[default]
    TimeOfDay,
    /// Positive-measure intersection on the absolute timeline.
    Absolute,
    /// Only events whose start or end falls inside the segment's time of day
    /// (endpoint test; misses events that enclose the segment).
    EndpointOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlappingEvent<'a> {
    pub event: &'a ServiceEvent,
    pub interval: TimeInterval,
}

pub type OverlappingEventSet<'a> = Vec<OverlappingEvent<'a>>;

fn intersects(a0: i64, a1: i64, b0: i64, b1: i64) -> bool {
    a0 < b1 && a1 > b0
}

/// Whether `ev` intersects `seg` shifted by some whole number of days.
fn intersects_daily(ev: &TimeInterval, seg: &OverlapSegment) -> bool {
    let (e0, e1) = (ev.start.millis(), ev.end.millis());
    let (s0, s1) = (seg.start.millis(), seg.end.millis());
    if s1 - s0 >= MILLIS_PER_DAY {
        return e1 > e0;
    }
    // shifts k with s0 + k*day < e1 and s1 + k*day > e0
    let k_lo = (e0 - s1).div_euclid(MILLIS_PER_DAY);
    let k_hi = (e1 - s0).div_euclid(MILLIS_PER_DAY) + 1;
    (k_lo..=k_hi).any(|k| intersects(e0, e1, s0 + k * MILLIS_PER_DAY, s1 + k * MILLIS_PER_DAY))
}

fn endpoint_in_daily(t: i64, seg: &OverlapSegment) -> bool {
    let len = seg.end.millis() - seg.start.millis();
    if len >= MILLIS_PER_DAY {
        return true;
    }
    let offset = (t - seg.start.millis()).rem_euclid(MILLIS_PER_DAY);
    offset <= len
}

pub fn event_overlaps(ev: &ServiceEvent, seg: &OverlapSegment, policy: OverlapPolicy) -> bool {
    match policy {
        OverlapPolicy::TimeOfDay => intersects_daily(&ev.interval, seg),
        OverlapPolicy::Absolute => intersects(
            ev.interval.start.millis(),
            ev.interval.end.millis(),
            seg.start.millis(),
            seg.end.millis(),
        ),
        OverlapPolicy::EndpointOnly => {
            endpoint_in_daily(ev.interval.start.millis(), seg)
                || endpoint_in_daily(ev.interval.end.millis(), seg)
        }
    }
}

/// Every event at `location` that ran during the segment, paired with its
/// interval. Output preserves history order.
pub fn overlapping_service_events<'a>(
    history: &'a [ServiceEvent],
    segment: &OverlapSegment,
    location: &str,
    policy: OverlapPolicy,
) -> OverlappingEventSet<'a> {
    history
        .iter()
        .filter(|e| same_location(&e.location, location))
        .filter(|e| event_overlaps(e, segment, policy))
        .map(|e| OverlappingEvent {
            event: e,
            interval: e.interval,
        })
        .collect()
}

/// Narrowest range `[lo, hi]` holding at least `ceil(coverage_p * n)` values;
/// ties go to the smaller `lo`. Returns `(lo, hi, coverage)` where coverage
/// is the fraction of values inside the range.
pub fn preference_band(values: &[f64], coverage_p: f64) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::NoSamples);
    }
    if !(coverage_p > 0.0 && coverage_p <= 1.0) {
        return Err(Error::Contract(format!(
            "coverage_p must lie in (0, 1], got {coverage_p}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = required_count(n, coverage_p);
    let (mut best_lo, mut best_width) = (0, f64::INFINITY);
    for i in 0..=(n - k) {
        let width = sorted[i + k - 1] - sorted[i];
        if width < best_width {
            best_width = width;
            best_lo = i;
        }
    }
    let (lo, hi) = (sorted[best_lo], sorted[best_lo + k - 1]);
    let inside = sorted.iter().filter(|&&v| v >= lo && v <= hi).count();
    Ok((lo, hi, inside as f64 / n as f64))
}

/// `ceil(p * n)` guarded against representation error, clamped to `1..=n`.
pub fn required_count(n: usize, p: f64) -> usize {
    let raw = p * n as f64;
    let k = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceBand {
    pub user: String,
    pub attribute: String,
    pub lo: f64,
    pub hi: f64,
    pub support: usize,
    pub coverage: f64,
}

impl PreferenceBand {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }
}

/// Which values to mine: one attribute, optionally limited to one service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceTarget {
    pub service_id: Option<String>,
    pub attribute: String,
}

impl PreferenceTarget {
    pub fn attribute(attribute: impl Into<String>) -> Self {
        PreferenceTarget {
            service_id: None,
            attribute: attribute.into(),
        }
    }

    pub fn service(service_id: impl Into<String>, attribute: impl Into<String>) -> Self {
        PreferenceTarget {
            service_id: Some(service_id.into()),
            attribute: attribute.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreferenceParams {
    pub eps_temperature: f64,
    pub eps_illumination: f64,
    pub eps_sound: f64,
    pub eps_humidity: f64,
    pub min_pts: usize,
    pub coverage_p: f64,
    pub overlap_policy: OverlapPolicy,
}

impl Default for PreferenceParams {
    fn default() -> Self {
        PreferenceParams {
            eps_temperature: 1.0,
            eps_illumination: 5.0,
            eps_sound: 3.0,
            eps_humidity: 5.0,
            min_pts: 4,
            coverage_p: 0.8,
            overlap_policy: OverlapPolicy::TimeOfDay,
        }
    }
}

impl PreferenceParams {
    pub fn eps_for(&self, attribute: &str) -> f64 {
        match attribute.parse::<EnvProperty>() {
            Ok(EnvProperty::Temperature) => self.eps_temperature,
            Ok(EnvProperty::Illumination) => self.eps_illumination,
            Ok(EnvProperty::Sound) => self.eps_sound,
            Ok(EnvProperty::Humidity) => self.eps_humidity,
            Err(_) => self.eps_temperature,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("eps_temperature", self.eps_temperature),
            ("eps_illumination", self.eps_illumination),
            ("eps_sound", self.eps_sound),
            ("eps_humidity", self.eps_humidity),
        ] {
            if !(v > 0.0) {
                errs.push(format!("preference.{name} must be > 0"));
            }
        }
        if self.min_pts < 1 {
            errs.push("preference.min_pts must be >= 1".into());
        }
        if !(self.coverage_p > 0.0 && self.coverage_p <= 1.0) {
            errs.push("preference.coverage_p must lie in (0, 1]".into());
        }
        errs
    }
}

/// Mines `user`'s band for `target` from history overlapping `segment`.
/// Absent when no cluster reaches `min_pts`.
pub fn estimate_preference(
    history: &[ServiceEvent],
    user: &str,
    target: &PreferenceTarget,
    segment: &OverlapSegment,
    location: &str,
    params: &PreferenceParams,
) -> Option<PreferenceBand> {
    estimate_preference_filtered(history, user, target, segment, location, params, |_| true)
}

/// [`estimate_preference`] over the history entries accepted by `context`
/// (e.g. weekdays only).
pub fn estimate_preference_filtered(
    history: &[ServiceEvent],
    user: &str,
    target: &PreferenceTarget,
    segment: &OverlapSegment,
    location: &str,
    params: &PreferenceParams,
    context: impl Fn(&ServiceEvent) -> bool,
) -> Option<PreferenceBand> {
    let values: Vec<[f64; 1]> =
        overlapping_service_events(history, segment, location, params.overlap_policy)
            .into_iter()
            .map(|o| o.event)
            .filter(|e| e.user == user)
            .filter(|e| {
                target
                    .service_id
                    .as_ref()
                    .is_none_or(|s| e.service_id.eq_ignore_ascii_case(s))
            })
            .filter(|e| context(e))
            .filter_map(|e| e.quality(&target.attribute))
            .filter(|v| v.is_finite())
            .map(|v| [v])
            .collect();
    if values.is_empty() {
        return None;
    }
    let labels = dbscan(&values, params.eps_for(&target.attribute), params.min_pts);
    let sizes = cluster_sizes(&labels);
    // largest cluster, earliest discovered on ties
    let (best, &support) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    if support < params.min_pts {
        return None;
    }
    let members: Vec<f64> = values
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == Label::Cluster(best))
        .map(|(v, _)| v[0])
        .collect();
    let (lo, hi, coverage) = preference_band(&members, params.coverage_p).ok()?;
    Some(PreferenceBand {
        user: user.to_string(),
        attribute: target.attribute.clone(),
        lo,
        hi,
        support,
        coverage,
    })
}

/// Writes `user,attribute,lo,hi,support,coverage` CSV.
pub fn write_bands_csv<W: std::io::Write>(bands: &[PreferenceBand], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "attribute", "lo", "hi", "support", "coverage"])?;
    for b in bands {
        w.write_record([
            b.user.clone(),
            b.attribute.clone(),
            b.lo.to_string(),
            b.hi.to_string(),
            b.support.to_string(),
            b.coverage.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QualityAttribute, Timestamp};

    fn at(day: u32, hm: &str) -> Timestamp {
        Timestamp::parse(&format!("2011-06-{day:02} {hm}")).unwrap()
    }

    fn event(id: &str, user: &str, day: u32, a: &str, b: &str, temp: f64) -> ServiceEvent {
        ServiceEvent {
            event_id: id.into(),
            service_id: "ac".into(),
            functions: vec![],
            qualities: vec![QualityAttribute::new("temperature", temp)],
            interval: TimeInterval::new(at(day, a), at(day, b)).unwrap(),
            location: "Living".into(),
            user: user.into(),
        }
    }

    fn segment(day: u32, a: &str, b: &str) -> OverlapSegment {
        OverlapSegment {
            start: at(day, a),
            end: at(day, b),
        }
    }

    #[test]
    fn contained_disjoint_straddling() {
        let seg = segment(20, "20:00", "20:30");
        let history = vec![
            event("in", "R1", 20, "20:05", "20:25", 20.0),
            event("before", "R1", 20, "19:00", "19:59", 20.0),
            event("straddle", "R1", 20, "19:50", "20:40", 20.0),
        ];
        let ids: Vec<&str> =
            overlapping_service_events(&history, &seg, "living", OverlapPolicy::TimeOfDay)
                .iter()
                .map(|o| o.event.event_id.as_str())
                .collect();
        assert_eq!(ids, ["in", "straddle"]);
    }

    #[test]
    fn earlier_days_match_by_time_of_day() {
        let seg = segment(20, "20:00", "20:30");
        let history = vec![event("old", "R1", 3, "20:10", "20:20", 20.0)];
        assert_eq!(
            overlapping_service_events(&history, &seg, "living", OverlapPolicy::TimeOfDay).len(),
            1
        );
        assert!(
            overlapping_service_events(&history, &seg, "living", OverlapPolicy::Absolute)
                .is_empty()
        );
    }

    #[test]
    fn endpoint_policy_misses_enclosing_event() {
        let seg = segment(20, "20:00", "20:30");
        let history = vec![event("wide", "R1", 20, "19:00", "21:00", 20.0)];
        assert!(
            overlapping_service_events(&history, &seg, "living", OverlapPolicy::EndpointOnly)
                .is_empty()
        );
        assert_eq!(
            overlapping_service_events(&history, &seg, "living", OverlapPolicy::TimeOfDay).len(),
            1
        );
    }

    #[test]
    fn segment_across_midnight() {
        let seg = segment(20, "23:30", "23:59");
        let seg = OverlapSegment {
            end: seg.end.plus_minutes(61),
            ..seg
        };
        let history = vec![event("late", "R1", 5, "00:10", "00:20", 20.0)];
        assert_eq!(
            overlapping_service_events(&history, &seg, "living", OverlapPolicy::TimeOfDay).len(),
            1
        );
    }

    #[test]
    fn band_degenerate() {
        assert_eq!(preference_band(&[21.0; 6], 0.8).unwrap(), (21.0, 21.0, 1.0));
    }

    #[test]
    fn band_picks_dense_half() {
        let v = [19.0, 19.5, 20.0, 20.5, 21.0, 30.0, 31.0, 32.0, 33.0, 34.0];
        let (lo, hi, cov) = preference_band(&v, 0.5).unwrap();
        assert_eq!((lo, hi), (19.0, 21.0));
        assert_eq!(cov, 0.5);
    }

    #[test]
    fn band_errors() {
        assert_eq!(preference_band(&[], 0.8), Err(Error::NoSamples));
        assert!(preference_band(&[1.0], 0.0).is_err());
        assert!(preference_band(&[1.0], 1.5).is_err());
    }

    #[test]
    fn required_count_is_exact_on_round_products() {
        assert_eq!(required_count(10, 0.8), 8);
        assert_eq!(required_count(10, 0.7), 7);
        assert_eq!(required_count(9, 0.8), 8);
        assert_eq!(required_count(3, 0.01), 1);
    }

    #[test]
    fn no_history_or_wrong_user() {
        let seg = segment(20, "20:00", "21:00");
        let p = PreferenceParams::default();
        let target = PreferenceTarget::service("ac", "temperature");
        assert!(estimate_preference(&[], "R1", &target, &seg, "living", &p).is_none());
        let history: Vec<ServiceEvent> = (1..=10)
            .map(|d| event(&format!("e{d}"), "R2", d, "20:00", "21:00", 20.0))
            .collect();
        assert!(estimate_preference(&history, "R1", &target, &seg, "living", &p).is_none());
        let band = estimate_preference(&history, "R2", &target, &seg, "living", &p).unwrap();
        assert_eq!((band.lo, band.hi, band.support), (20.0, 20.0, 10));
    }

    #[test]
    fn context_filter_restricts_history() {
        let seg = segment(20, "20:00", "21:00");
        let p = PreferenceParams::default();
        let target = PreferenceTarget::attribute("temperature");
        let history: Vec<ServiceEvent> = (1..=10)
            .map(|d| event(&format!("e{d}"), "R1", d, "20:00", "21:00", 20.0))
            .collect();
        let band = estimate_preference_filtered(&history, "R1", &target, &seg, "living", &p, |e| {
            e.interval.start.day_index() % 2 == 0
        });
        assert_eq!(band.unwrap().support, 5);
    }
}
