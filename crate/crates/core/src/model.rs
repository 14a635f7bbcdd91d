//! Domain types shared by every stage of the pipeline: services, historical
//! events, current requests, impacts and conflicts, plus the interval algebra
//! used to intersect request windows.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MILLIS_PER_SECOND: i64 = 1_000;
pub const MILLIS_PER_DAY: i64 = 86_400_000;

/// Naive local wall-clock time at millisecond resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Seconds since the epoch as a real number; all signal arithmetic uses this.
    pub fn secs(self) -> f64 {
        self.0 as f64 / MILLIS_PER_SECOND as f64
    }

    /// Rounds to the nearest millisecond.
    pub fn from_secs(secs: f64) -> Self {
        Timestamp((secs * MILLIS_PER_SECOND as f64).round() as i64)
    }

    pub fn from_naive(dt: NaiveDateTime) -> Self {
        Timestamp(dt.and_utc().timestamp_millis())
    }

    pub fn to_naive(self) -> NaiveDateTime {
        DateTime::from_timestamp_millis(self.0)
            .expect("timestamp within chrono range")
            .naive_utc()
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Timestamp(self.0 + minutes * 60 * MILLIS_PER_SECOND)
    }

    /// Milliseconds elapsed since local midnight.
    pub fn time_of_day_millis(self) -> i64 {
        self.0.rem_euclid(MILLIS_PER_DAY)
    }

    pub fn day_index(self) -> i64 {
        self.0.div_euclid(MILLIS_PER_DAY)
    }

    /// Parses `YYYY-MM-DD HH:MM[:SS[.fff]]`, with either a space or `T` separator.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        const FORMATS: [&str; 4] = [
            "%Y-%m-%dT%H:%M:%S%.f",
            "%Y-%m-%d %H:%M:%S%.f",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M",
        ];
        FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .map(Timestamp::from_naive)
            .ok_or_else(|| Error::Parse(format!("unparseable timestamp `{s}`")))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format("%Y-%m-%dT%H:%M:%S%.3f"))
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Closed time interval `[start, end]` with `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeInterval {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInterval {
                start: start.0,
                end: end.0,
            });
        }
        Ok(TimeInterval { start, end })
    }

    pub fn duration_millis(&self) -> i64 {
        self.end.0 - self.start.0
    }

    pub fn duration_secs(&self) -> f64 {
        self.duration_millis() as f64 / MILLIS_PER_SECOND as f64
    }

    pub fn contains(&self, other: &TimeInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl From<OverlapSegment> for TimeInterval {
    fn from(seg: OverlapSegment) -> Self {
        TimeInterval {
            start: seg.start,
            end: seg.end,
        }
    }
}

/// The positive-length intersection of two request windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OverlapSegment {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl OverlapSegment {
    pub fn interval(&self) -> TimeInterval {
        (*self).into()
    }

    pub fn duration_secs(&self) -> f64 {
        self.interval().duration_secs()
    }
}

/// Intersection `[max(starts), min(ends)]` when it has positive length.
pub fn overlap_segment(a: &TimeInterval, b: &TimeInterval) -> Option<OverlapSegment> {
    let start = a.start.max(b.start);
    let end = a.end.min(b.end);
    (start < end).then_some(OverlapSegment { start, end })
}

/// Ambient environment properties a service can influence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvProperty {
    Temperature,
    Illumination,
    Sound,
    Humidity,
}

impl EnvProperty {
    pub const ALL: [EnvProperty; 4] = [
        EnvProperty::Temperature,
        EnvProperty::Illumination,
        EnvProperty::Sound,
        EnvProperty::Humidity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvProperty::Temperature => "temperature",
            EnvProperty::Illumination => "illumination",
            EnvProperty::Sound => "sound",
            EnvProperty::Humidity => "humidity",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            EnvProperty::Temperature => "°C",
            EnvProperty::Illumination => "lux",
            EnvProperty::Sound => "dB",
            EnvProperty::Humidity => "%RH",
        }
    }
}

impl fmt::Display for EnvProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "temperature" | "temp" => Ok(EnvProperty::Temperature),
            "illumination" | "light" | "lux" | "brightness" => Ok(EnvProperty::Illumination),
            "sound" | "volume" | "noise" => Ok(EnvProperty::Sound),
            "humidity" => Ok(EnvProperty::Humidity),
            other => Err(Error::UnknownProperty(other.to_string())),
        }
    }
}

/// A named non-functional attribute value, e.g. `temperature = 20`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAttribute {
    pub name: String,
    pub value: f64,
}

impl QualityAttribute {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        QualityAttribute {
            name: name.into(),
            value,
        }
    }

    pub fn property(&self) -> Option<EnvProperty> {
        self.name.parse().ok()
    }
}

fn quality_value(qualities: &[QualityAttribute], name: &str) -> Option<f64> {
    qualities
        .iter()
        .find(|q| q.name.eq_ignore_ascii_case(name))
        .map(|q| q.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub id: String,
    pub name: String,
    pub functions: Vec<String>,
    pub qualities: Vec<QualityAttribute>,
}

impl Service {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Contract("service name must be non-empty".into()));
        }
        Ok(Service {
            id: id.into(),
            name,
            functions: Vec::new(),
            qualities: Vec::new(),
        })
    }
}

/// A historical service interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub event_id: String,
    pub service_id: String,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default)]
    pub qualities: Vec<QualityAttribute>,
    pub interval: TimeInterval,
    pub location: String,
    pub user: String,
}

impl ServiceEvent {
    pub fn quality(&self, name: &str) -> Option<f64> {
        quality_value(&self.qualities, name)
    }
}

/// A resident's current service requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub request_id: String,
    pub service_id: String,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default)]
    pub qualities: Vec<QualityAttribute>,
    pub interval: TimeInterval,
    pub location: String,
    pub user: String,
}

impl ServiceRequest {
    pub fn quality(&self, name: &str) -> Option<f64> {
        quality_value(&self.qualities, name)
    }
}

impl From<ServiceEvent> for ServiceRequest {
    fn from(e: ServiceEvent) -> Self {
        ServiceRequest {
            request_id: e.event_id,
            service_id: e.service_id,
            functions: e.functions,
            qualities: e.qualities,
            interval: e.interval,
            location: e.location,
            user: e.user,
        }
    }
}

/// Case-sensitive glob where `*` matches any run of characters.
pub fn wildcard_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last)
    {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

/// Trimmed, case-folded location used for equality checks.
pub fn normalize_location(location: &str) -> String {
    location.trim().to_lowercase()
}

pub fn same_location(a: &str, b: &str) -> bool {
    normalize_location(a) == normalize_location(b)
}

/// Severity of an impact on one service attribute over an overlap segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    pub service_id: String,
    pub attribute: EnvProperty,
    pub time: OverlapSegment,
    pub value: f64,
}

impl Impact {
    pub fn is_none(&self) -> bool {
        self.value <= 0.0
    }
}

/// A probable impact conflict experienced by `user`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactConflict {
    pub service: String,
    pub attribute: EnvProperty,
    pub user: String,
    pub location: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub likelihood: f64,
    pub raw_cl: f64,
    pub impact_value: f64,
    pub pref_prox: f64,
    pub temp_prox: f64,
}

impl ImpactConflict {
    pub fn interval(&self) -> TimeInterval {
        TimeInterval {
            start: self.start,
            end: self.end,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(hm: &str) -> Timestamp {
        Timestamp::parse(&format!("2011-06-15 {hm}")).unwrap()
    }

    fn iv(a: &str, b: &str) -> TimeInterval {
        TimeInterval::new(at(a), at(b)).unwrap()
    }

    #[test]
    fn overlap_partial() {
        let seg = overlap_segment(&iv("20:00", "22:00"), &iv("21:00", "23:00")).unwrap();
        assert_eq!(seg.interval(), iv("21:00", "22:00"));
    }

    #[test]
    fn overlap_touching_is_absent() {
        assert!(overlap_segment(&iv("20:00", "21:00"), &iv("21:00", "22:00")).is_none());
    }

    #[test]
    fn overlap_containment() {
        let seg = overlap_segment(&iv("20:00", "23:00"), &iv("21:00", "22:00")).unwrap();
        assert_eq!(seg.interval(), iv("21:00", "22:00"));
    }

    #[test]
    fn interval_rejects_reversed() {
        assert!(TimeInterval::new(at("21:00"), at("20:00")).is_err());
    }

    #[test]
    fn timestamp_round_trips_through_display() {
        let t = Timestamp::parse("2011-06-15 08:30:00.125").unwrap();
        assert_eq!(t.to_string(), "2011-06-15T08:30:00.125");
        assert_eq!(Timestamp::parse(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn wildcard() {
        assert!(wildcard_match("ac*", "ac_living"));
        assert!(wildcard_match("*blind*", "window_blind_2"));
        assert!(wildcard_match("tv", "tv"));
        assert!(!wildcard_match("tv", "tv2"));
        assert!(!wildcard_match("a*c", "ab"));
    }

    #[test]
    fn location_normalization() {
        assert!(same_location(" Living ", "living"));
        assert!(!same_location("living", "kitchen"));
    }

    #[test]
    fn property_names_parse() {
        for p in EnvProperty::ALL {
            assert_eq!(p.name().parse::<EnvProperty>().unwrap(), p);
        }
        assert!("pressure".parse::<EnvProperty>().is_err());
    }
}
