//! Seeded two-resident corpus with planted preference bands.
//!
//! Each day both residents use the AC and the lights on their own, which
//! builds the history preference bands are mined from; a lead-in of such
//! days precedes the first evaluated day. On top of that the
//! day holds shared sessions where one resident holds a setpoint and the
//! other opens the window or the blinds:
//!
//! * evening AC + window, with outdoor temperature drawn per session;
//! * daytime light + blinds, with admitted daylight drawn per session;
//! * night light + blinds, where the blinds admit nothing.
//!
//! Ground truth comes from the true room trace (true outdoor values and a
//! jittered coupling factor): a resident is in conflict when the room
//! leaves their setpoint by more than the planted band's half-width. The
//! detector sees noisy outdoor readings and the nominal coupling.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{predict_signal, Affinity, Effect, RoomContext};
use crate::error::Result;
use crate::evaluation::{Corpus, EvalCase};
use crate::model::{
    EnvProperty, QualityAttribute, ServiceEvent, ServiceRequest, TimeInterval, Timestamp,
};
use crate::stl::{violation_intervals, DeviationMode, StlRequirement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentProfile {
    pub name: String,
    pub temperature_band: (f64, f64),
    pub illumination_band: (f64, f64),
}

impl ResidentProfile {
    pub fn band(&self, p: EnvProperty) -> (f64, f64) {
        match p {
            EnvProperty::Illumination => self.illumination_band,
            _ => self.temperature_band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub days: u32,
    pub start_date: NaiveDate,
    pub location: String,
    pub volume_m3: f64,
    pub indoor_temperature: f64,
    pub residents: Vec<ResidentProfile>,
    pub outdoor_temperature_range: (f64, f64),
    pub daylight_lux_range: (f64, f64),
    /// Days of solo usage before the first evaluated day.
    pub history_days: u32,
    /// Solo thermostat settings per resident and evening.
    pub solo_ac_per_day: usize,
    pub ac_window_sessions: usize,
    pub daylight_blind_sessions: usize,
    pub night_blind_sessions: usize,
    /// Standard deviation of the outdoor thermometer, °C.
    pub temperature_noise: f64,
    /// Relative standard deviation of the daylight sensor.
    pub lux_noise: f64,
    /// Relative half-range of the true window coupling around nominal.
    pub coupling_jitter: f64,
    /// Out-of-band time a resident must experience to count a conflict; 0 counts
    /// any excursion.
    pub min_violation_minutes: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            days: 30,
            start_date: NaiveDate::from_ymd_opt(2011, 6, 15).unwrap(),
            location: "living".into(),
            volume_m3: 40.0,
            indoor_temperature: 26.0,
            residents: vec![
                ResidentProfile {
                    name: "R1".into(),
                    temperature_band: (18.0, 22.0),
                    illumination_band: (20.0, 40.0),
                },
                ResidentProfile {
                    name: "R2".into(),
                    temperature_band: (22.0, 26.0),
                    illumination_band: (40.0, 60.0),
                },
            ],
            outdoor_temperature_range: (14.0, 34.0),
            daylight_lux_range: (0.0, 40.0),
            history_days: 14,
            solo_ac_per_day: 4,
            ac_window_sessions: 2,
            daylight_blind_sessions: 1,
            night_blind_sessions: 3,
            temperature_noise: 0.5,
            lux_noise: 0.1,
            coupling_jitter: 0.2,
            min_violation_minutes: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.days == 0 {
            errs.push("synthetic.days must be >= 1".into());
        }
        if self.residents.len() != 2 {
            errs.push("synthetic.residents must list exactly two residents".into());
        }
        if self.residents.len() == 2 && self.residents[0].name == self.residents[1].name {
            errs.push("synthetic.residents must have distinct names".into());
        }
        for r in &self.residents {
            for (name, (lo, hi)) in [("temperature_band", r.temperature_band), ("illumination_band", r.illumination_band)] {
                if !(lo < hi) {
                    errs.push(format!("synthetic.residents.{}.{name} must satisfy lo < hi", r.name));
                }
            }
        }
        for (name, (lo, hi)) in [
            ("outdoor_temperature_range", self.outdoor_temperature_range),
            ("daylight_lux_range", self.daylight_lux_range),
        ] {
            if !(lo <= hi) {
                errs.push(format!("synthetic.{name} must satisfy lo <= hi"));
            }
        }
        if self.daylight_lux_range.0 < 0.0 {
            errs.push("synthetic.daylight_lux_range must be non-negative".into());
        }
        if self.ac_window_sessions > 3 || self.daylight_blind_sessions > 3 || self.night_blind_sessions > 3 {
            errs.push("synthetic: at most 3 sessions of each kind per day".into());
        }
        if !(self.volume_m3 > 0.0) {
            errs.push("synthetic.volume_m3 must be > 0".into());
        }
        for (name, v) in [
            ("temperature_noise", self.temperature_noise),
            ("lux_noise", self.lux_noise),
            ("min_violation_minutes", self.min_violation_minutes),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("synthetic.{name} must be >= 0"));
            }
        }
        if !(0.0..1.0).contains(&self.coupling_jitter) {
            errs.push("synthetic.coupling_jitter must lie in [0, 1)".into());
        }
        errs
    }
}

/// Standard normal quantile at 0.9.
const Z_80: f64 = 1.281_551_565_544_600_5;

struct Gen<'a> {
    spec: &'a SyntheticSpec,
    affinity: &'a Affinity,
    rng: ChaCha8Rng,
    history: Vec<ServiceEvent>,
    cases: Vec<EvalCase>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn noisy(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("positive sd").sample(rng)
    } else {
        0.0
    }
}

enum Kind {
    AcWindow,
    Blind { daylight: bool },
}

impl Gen<'_> {
    fn minutes(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.random_range(lo..=hi)
    }

    fn event(
        &self,
        id: String,
        service: &str,
        user: &str,
        start: Timestamp,
        minutes: i64,
        quality: Option<(EnvProperty, f64)>,
    ) -> ServiceEvent {
        ServiceEvent {
            event_id: id,
            service_id: service.into(),
            functions: Vec::new(),
            qualities: quality
                .map(|(p, v)| QualityAttribute::new(p.name(), v))
                .into_iter()
                .collect(),
            interval: TimeInterval {
                start,
                end: start.plus_minutes(minutes),
            },
            location: self.spec.location.clone(),
            user: user.into(),
        }
    }

    fn solo_usage(&mut self, day: i64, midnight: Timestamp) {
        for r in 0..self.spec.residents.len() {
            let resident = self.spec.residents[r].clone();
            for k in 0..self.spec.solo_ac_per_day {
                let ac_start = midnight.plus_minutes(16 * 60 + self.minutes(0, 360));
                let ac_len = self.minutes(30, 120);
                let t = self.preferred(resident.temperature_band);
                let ev = self.event(
                    format!("solo-{day}-{}-ac{k}", resident.name),
                    "ac",
                    &resident.name,
                    ac_start,
                    ac_len,
                    Some((EnvProperty::Temperature, t)),
                );
                self.history.push(ev);
            }
            for (k, (from, span)) in [(7 * 60, 540), (19 * 60, 240)].into_iter().enumerate() {
                let start = midnight.plus_minutes(from + self.minutes(0, span));
                let len = self.minutes(20, 90);
                let lux = self.preferred(resident.illumination_band).max(0.0);
                let ev = self.event(
                    format!("solo-{day}-{}-light{k}", resident.name),
                    "light",
                    &resident.name,
                    start,
                    len,
                    Some((EnvProperty::Illumination, lux)),
                );
                self.history.push(ev);
            }
        }
    }

    /// A value a resident would set: normal around the band centre with
    /// the band as its central 80 % range.
    fn preferred(&mut self, band: (f64, f64)) -> f64 {
        let centre = 0.5 * (band.0 + band.1);
        centre + noisy(&mut self.rng, 0.5 * (band.1 - band.0) / Z_80)
    }

    fn true_affinity(&mut self) -> Affinity {
        let mut truth = self.affinity.clone();
        let j = self.spec.coupling_jitter;
        for rule in &mut truth.rules {
            if let Effect::ExternalCoupling { factor } = &mut rule.effect {
                *factor *= 1.0 + uniform(&mut self.rng, (-j, j));
            }
        }
        truth
    }

    fn session(&mut self, day: i64, slot: usize, midnight: Timestamp, kind: Kind) -> Result<()> {
        let x = self.rng.random_range(0..2usize);
        let holder = self.spec.residents[x].clone();
        let other = self.spec.residents[1 - x].clone();
        let (property, holder_service, other_service, anchor, gap, hold, open) = match kind {
            Kind::AcWindow => (
                EnvProperty::Temperature,
                "ac",
                "window",
                16 * 60 + 150 * slot as i64,
                (35, 60),
                (90, 130),
                (20, 60),
            ),
            Kind::Blind { daylight: true } => (
                EnvProperty::Illumination,
                "light",
                "blind",
                8 * 60 + 180 * slot as i64,
                (5, 30),
                (60, 120),
                (20, 60),
            ),
            Kind::Blind { daylight: false } => (
                EnvProperty::Illumination,
                "light",
                "blind",
                20 * 60 + 70 * slot as i64,
                (5, 20),
                (40, 55),
                (10, 30),
            ),
        };
        let band = holder.band(property);
        let setpoint = self.preferred(band).max(0.0);
        let start = midnight.plus_minutes(anchor + self.minutes(0, 10));
        let hold_len = self.minutes(hold.0, hold.1);
        let open_start = start.plus_minutes(self.minutes(gap.0, gap.1));
        let open_len = self.minutes(open.0, open.1);

        let (true_outdoor, measured) = match kind {
            Kind::AcWindow => {
                let o = uniform(&mut self.rng, self.spec.outdoor_temperature_range);
                (o, o + noisy(&mut self.rng, self.spec.temperature_noise))
            }
            Kind::Blind { daylight: true } => {
                let o = uniform(&mut self.rng, self.spec.daylight_lux_range);
                let factor = 1.0 + noisy(&mut self.rng, self.spec.lux_noise);
                (o, (o * factor).max(0.0))
            }
            Kind::Blind { daylight: false } => (0.0, 0.0),
        };

        let tag = format!("{day}-{}-{slot}", property.name());
        let held = self.event(
            format!("s{tag}-{holder_service}"),
            holder_service,
            &holder.name,
            start,
            hold_len,
            Some((property, setpoint)),
        );
        let blind_lux = (property == EnvProperty::Illumination).then_some((property, true_outdoor));
        let opened = self.event(
            format!("s{tag}-{other_service}"),
            other_service,
            &other.name,
            open_start,
            open_len,
            blind_lux.filter(|_| other_service == "blind"),
        );
        let mut requests = [ServiceRequest::from(held.clone()), ServiceRequest::from(opened.clone())];
        // the blind's own value is not known in advance
        requests[1].qualities.clear();

        let room = |outdoor: f64| {
            RoomContext::new(&self.spec.location, self.spec.volume_m3)
                .with_baseline(EnvProperty::Temperature, self.spec.indoor_temperature)
                .with_baseline(EnvProperty::Illumination, 0.0)
                .with_outdoor(property, outdoor)
        };
        let truth_affinity = self.true_affinity();
        let segment = TimeInterval {
            start: requests[0].interval.start.max(requests[1].interval.start),
            end: requests[0].interval.end.min(requests[1].interval.end),
        };
        let trace = predict_signal(property, &requests, &room(true_outdoor), &truth_affinity, &segment)?;
        // the resident tolerates the planted half-width around what they asked for
        let requirement = StlRequirement::new(property, setpoint, segment, 0.5 * (band.1 - band.0))?;
        let outside: f64 = violation_intervals(&trace, &requirement, DeviationMode::Magnitude)?
            .iter()
            .map(|(a, b)| b - a)
            .sum();
        let truth = outside > 0.0 && outside >= self.spec.min_violation_minutes * 60.0;

        self.cases.push(EvalCase {
            requests,
            affected_user: holder.name.clone(),
            property,
            room: room(measured),
            history_cutoff: midnight,
            context: BTreeMap::from([(property, measured)]),
            truth,
        });
        self.history.push(held);
        self.history.push(opened);
        Ok(())
    }
}

/// Generates the corpus for `seed`; identical inputs give identical output.
pub fn generate(spec: &SyntheticSpec, affinity: &Affinity, seed: u64) -> Result<Corpus> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(crate::Error::Config(problems));
    }
    let mut g = Gen {
        spec,
        affinity,
        rng: ChaCha8Rng::seed_from_u64(seed),
        history: Vec::new(),
        cases: Vec::new(),
    };
    let origin = Timestamp::from_naive(spec.start_date.and_hms_opt(0, 0, 0).expect("midnight"));
    for day in -i64::from(spec.history_days)..0 {
        g.solo_usage(day, origin.plus_minutes(day * 24 * 60));
    }
    for day in 0..i64::from(spec.days) {
        let midnight = origin.plus_minutes(day * 24 * 60);
        g.solo_usage(day, midnight);
        for slot in 0..spec.ac_window_sessions {
            g.session(day, slot, midnight, Kind::AcWindow)?;
        }
        for slot in 0..spec.daylight_blind_sessions {
            g.session(day, slot, midnight, Kind::Blind { daylight: true })?;
        }
        for slot in 0..spec.night_blind_sessions {
            g.session(day, slot, midnight, Kind::Blind { daylight: false })?;
        }
    }
    Ok(Corpus::new(g.history, g.cases))
}
