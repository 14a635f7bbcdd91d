//! Browser bindings: the two motivating scenarios and the two proximity
//! scores. Every export returns plain numbers or JSON text.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use impact_core::detection::{self, assess_with_band, BandSource, DetectionConfig};
use impact_core::dynamics::{Affinity, RoomContext};
use impact_core::model::{EnvProperty, QualityAttribute};
use impact_core::{ServiceRequest, TimeInterval, Timestamp};

#[derive(Debug, Serialize)]
pub struct Trace {
    pub property: EnvProperty,
    /// `[minutes after the first request starts, value]`
    pub samples: Vec<[f64; 2]>,
    pub band: (f64, f64),
    pub setpoint: f64,
    pub impact: f64,
    pub pref_prox: f64,
    pub temp_prox: f64,
    pub raw_cl: f64,
    pub likelihood: f64,
    pub conflict: bool,
}

fn at(hm: &str) -> Timestamp {
    Timestamp::parse(&format!("2011-06-15 {hm}")).expect("valid literal")
}

fn request(id: &str, service: &str, user: &str, from: &str, to: &str, setpoint: Option<(EnvProperty, f64)>) -> ServiceRequest {
    ServiceRequest {
        request_id: id.into(),
        service_id: service.into(),
        functions: Vec::new(),
        qualities: setpoint
            .map(|(p, v)| QualityAttribute::new(p.name(), v))
            .into_iter()
            .collect(),
        interval: TimeInterval::new(at(from), at(to)).expect("ordered literal"),
        location: "living".into(),
        user: user.into(),
    }
}

/// `ac-window`: R1 cools a 25 °C room to 20 °C from 20:00, R2 opens the
/// window at 20:30 with `outdoor` °C outside.
/// `light-blind`: R1 sets 10 lux from 08:00, R2 opens the blind at 08:30
/// admitting `outdoor` lux.
pub fn trace(kind: &str, outdoor: f64) -> Result<Trace, String> {
    if !outdoor.is_finite() {
        return Err("outdoor value must be finite".into());
    }
    let (property, setpoint, band, held, opened) = match kind {
        "ac-window" => (
            EnvProperty::Temperature,
            20.0,
            (18.5, 22.5),
            request("sr1", "ac", "R1", "20:00", "22:00", Some((EnvProperty::Temperature, 20.0))),
            request("sr2", "window", "R2", "20:30", "21:30", None),
        ),
        "light-blind" => (
            EnvProperty::Illumination,
            10.0,
            (5.0, 15.0),
            request("sr1", "light", "R1", "08:00", "09:30", Some((EnvProperty::Illumination, 10.0))),
            request("sr2", "blind", "R2", "08:30", "09:30", None),
        ),
        other => return Err(format!("unknown scenario `{other}`")),
    };
    if property == EnvProperty::Illumination && outdoor < 0.0 {
        return Err("admitted light cannot be negative".into());
    }
    let room = RoomContext::new("living", 40.0)
        .with_baseline(EnvProperty::Temperature, 25.0)
        .with_baseline(EnvProperty::Illumination, 0.0)
        .with_outdoor(property, outdoor);
    let affinity = Affinity::default_profile();
    let cfg = DetectionConfig::default();
    let a = assess_with_band(&held, &opened, property, setpoint, band, BandSource::Fallback, &room, &affinity, &cfg)
        .map_err(|e| e.to_string())?;
    let span = TimeInterval::new(held.interval.start, held.interval.end).expect("ordered");
    let full = impact_core::dynamics::predict_signal(property, &[held.clone(), opened], &room, &affinity, &span)
        .map_err(|e| e.to_string())?;
    let t0 = held.interval.start.secs();
    Ok(Trace {
        property,
        samples: full.samples().map(|(t, v)| [(t - t0) / 60.0, v]).collect(),
        band,
        setpoint,
        impact: a.impact,
        pref_prox: a.pref_prox,
        temp_prox: a.temp_prox,
        raw_cl: a.raw_cl,
        likelihood: a.likelihood,
        conflict: a.is_conflict(),
    })
}

#[derive(Serialize)]
struct Failure {
    error: String,
}

/// JSON of [`Trace`], or `{"error": ..}`.
#[wasm_bindgen]
pub fn scenario_trace(kind: &str, outdoor: f64) -> String {
    let json = match trace(kind, outdoor) {
        Ok(t) => serde_json::to_string(&t),
        Err(error) => serde_json::to_string(&Failure { error }),
    };
    json.expect("plain data serializes")
}

/// NaN for malformed ranges.
#[wasm_bindgen]
pub fn preferential_proximity(pref_lo: f64, pref_hi: f64, env_lo: f64, env_hi: f64) -> f64 {
    detection::preferential_proximity((pref_lo, pref_hi), (env_lo, env_hi)).unwrap_or(f64::NAN)
}

/// `bounds` holds `start, end` pairs in minutes. NaN for fewer than two
/// intervals or an odd count.
#[wasm_bindgen]
pub fn temporal_proximity(bounds: Vec<f64>) -> f64 {
    if !bounds.len().is_multiple_of(2) {
        return f64::NAN;
    }
    let intervals: Vec<(f64, f64)> = bounds.chunks(2).map(|c| (c[0] * 60.0, c[1] * 60.0)).collect();
    if intervals.iter().any(|(a, b)| a.partial_cmp(b).is_none_or(|o| o.is_gt())) {
        return f64::NAN;
    }
    detection::temporal_proximity_secs(&intervals).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proximities() {
        assert_eq!(preferential_proximity(19.0, 21.0, 20.0, 23.0), 0.25);
        assert!(preferential_proximity(3.0, 1.0, 0.0, 1.0).is_nan());
        let p = temporal_proximity(vec![0.0, 60.0, 45.0, 105.0]);
        assert!((p - 4.0 / 7.0).abs() < 1e-12);
        assert!(temporal_proximity(vec![0.0, 60.0]).is_nan());
        assert!(temporal_proximity(vec![0.0, 60.0, 1.0]).is_nan());
    }

    #[test]
    fn blind_scenario_steps_at_half_past() {
        let t = trace("light-blind", 20.0).unwrap();
        assert!(t.conflict);
        let at = |m: f64| t.samples.iter().rev().find(|s| s[0] <= m).unwrap()[1];
        assert_eq!(at(29.0), 10.0);
        assert_eq!(at(31.0), 30.0);
        let night = trace("light-blind", 0.0).unwrap();
        assert_eq!(night.impact, 0.0);
        assert!(!night.conflict);
    }

    #[test]
    fn window_scenario_conflicts_when_hot_outside() {
        assert!(trace("ac-window", 30.0).unwrap().conflict);
        assert!(!trace("ac-window", 20.0).unwrap().conflict);
    }

    #[test]
    fn errors_become_json() {
        let v: serde_json::Value = serde_json::from_str(&scenario_trace("nope", 1.0)).unwrap();
        assert!(v["error"].as_str().unwrap().contains("nope"));
    }
}
