//! Ambient environment prediction for a set of concurrent service requests.
//!
//! Each request is mapped onto the properties it influences through
//! [`AffinityRule`]s. Progressive rules (AC, window) move the value along
//! linear ramps; instantaneous rules (light, blind, TV) switch levels at
//! request boundaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wildcard_match, EnvProperty, ServiceRequest, TimeInterval};
use crate::signal::Signal;

/// Width of an instantaneous step, in seconds: one timestamp tick.
pub const STEP_SECS: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeMode {
    Progressive,
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    /// Fixed ramp speed in property units per hour.
    PerHour { value: f64 },
    /// Speed derived from the room cooling-time formula for a unit of the
    /// given capacity.
    CoolingFormula { capacity_tons: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    /// Drive the property to the request's setpoint (quality named after the
    /// property), or to `default` when the request carries none.
    TargetSetpoint {
        #[serde(default)]
        default: Option<f64>,
    },
    /// Add the request's own quality value, or `offset` when absent.
    AdditiveOffset { offset: f64 },
    /// Couple the room to the outdoor value: progressive rules shift the
    /// indoor value toward outdoor by `factor`, instantaneous rules add
    /// `factor * outdoor`.
    ExternalCoupling { factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityRule {
    /// Case-insensitive service id pattern; `*` matches any run of characters.
    pub service: String,
    pub property: EnvProperty,
    pub mode: ChangeMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSpec>,
    pub effect: Effect,
}

impl AffinityRule {
    pub fn matches(&self, service_id: &str) -> bool {
        wildcard_match(
            &self.service.to_ascii_lowercase(),
            &service_id.to_ascii_lowercase(),
        )
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let who = format!("rule `{}`/{}", self.service, self.property);
        if self.service.trim().is_empty() {
            errs.push(format!("{who}: empty service pattern"));
        }
        match (self.mode, self.rate) {
            (ChangeMode::Progressive, None) => {
                errs.push(format!("{who}: progressive rules require a rate"))
            }
            (_, Some(RateSpec::PerHour { value })) if !(value > 0.0) => {
                errs.push(format!("{who}: rate must be > 0"))
            }
            (_, Some(RateSpec::CoolingFormula { capacity_tons })) if !(capacity_tons > 0.0) => {
                errs.push(format!("{who}: capacity_tons must be > 0"))
            }
            _ => {}
        }
        match self.effect {
            Effect::ExternalCoupling { factor } if !(0.0..=1.0).contains(&factor) => {
                if self.mode == ChangeMode::Progressive {
                    errs.push(format!("{who}: coupling factor must lie in [0, 1]"));
                } else if !(factor >= 0.0) {
                    errs.push(format!("{who}: coupling factor must be >= 0"));
                }
            }
            Effect::AdditiveOffset { offset } if !offset.is_finite() => {
                errs.push(format!("{who}: offset must be finite"))
            }
            _ => {}
        }
        errs
    }
}

/// Physical constants used by the cooling-time formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Physics {
    /// kg/m³
    pub air_density: f64,
    /// kJ/(kg·K)
    pub specific_heat: f64,
    /// kJ/kg
    pub latent_heat: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            air_density: 1.2,
            specific_heat: 1.005,
            latent_heat: 334.0,
        }
    }
}

/// Rules plus the constants needed to turn them into ramp speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affinity {
    pub rules: Vec<AffinityRule>,
    #[serde(default)]
    pub physics: Physics,
}

impl Affinity {
    /// AC, window, light, blind, TV and humidifier.
    pub fn default_profile() -> Self {
        use ChangeMode::*;
        let rule = |service: &str, property, mode, rate, effect| AffinityRule {
            service: service.to_string(),
            property,
            mode,
            rate,
            effect,
        };
        Affinity {
            rules: vec![
                rule(
                    "ac*",
                    EnvProperty::Temperature,
                    Progressive,
                    Some(RateSpec::CoolingFormula {
                        capacity_tons: 0.05,
                    }),
                    Effect::TargetSetpoint { default: None },
                ),
                rule(
                    "window*",
                    EnvProperty::Temperature,
                    Progressive,
                    Some(RateSpec::CoolingFormula { capacity_tons: 0.1 }),
                    Effect::ExternalCoupling { factor: 0.5 },
                ),
                rule(
                    "light*",
                    EnvProperty::Illumination,
                    Instantaneous,
                    None,
                    Effect::TargetSetpoint { default: None },
                ),
                rule(
                    "blind*",
                    EnvProperty::Illumination,
                    Instantaneous,
                    None,
                    Effect::ExternalCoupling { factor: 1.0 },
                ),
                rule(
                    "tv*",
                    EnvProperty::Sound,
                    Instantaneous,
                    None,
                    Effect::AdditiveOffset { offset: 60.0 },
                ),
                rule(
                    "humidifier*",
                    EnvProperty::Humidity,
                    Instantaneous,
                    None,
                    Effect::AdditiveOffset { offset: 10.0 },
                ),
            ],
            physics: Physics::default(),
        }
    }

    pub fn rule_for(&self, service_id: &str, property: EnvProperty) -> Option<&AffinityRule> {
        self.rules
            .iter()
            .find(|r| r.property == property && r.matches(service_id))
    }

    pub fn properties_of(&self, service_id: &str) -> Vec<EnvProperty> {
        let mut out: Vec<EnvProperty> = self
            .rules
            .iter()
            .filter(|r| r.matches(service_id))
            .map(|r| r.property)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// The setpoint a request asks for on `property`, if it targets one.
    pub fn setpoint_of(&self, req: &ServiceRequest, property: EnvProperty) -> Option<f64> {
        match self.rule_for(&req.service_id, property)?.effect {
            Effect::TargetSetpoint { default } => req.quality(property.name()).or(default),
            _ => None,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs: Vec<String> = self.rules.iter().flat_map(|r| r.validate()).collect();
        let p = self.physics;
        for (name, v) in [
            ("air_density", p.air_density),
            ("specific_heat", p.specific_heat),
            ("latent_heat", p.latent_heat),
        ] {
            if !(v > 0.0) {
                errs.push(format!("physics.{name} must be > 0"));
            }
        }
        errs
    }

    fn rate_per_sec(&self, rate: RateSpec, volume: f64) -> Result<f64> {
        match rate {
            RateSpec::PerHour { value } => Ok(value / 3600.0),
            RateSpec::CoolingFormula { capacity_tons } => {
                let p = self.physics;
                // the formula is linear in the temperature change, so one
                // degree gives the speed for any change
                let hours = cooling_time_hours(
                    volume,
                    p.air_density,
                    1.0,
                    p.specific_heat,
                    p.latent_heat,
                    capacity_tons,
                )?;
                Ok(1.0 / (hours * 3600.0))
            }
        }
    }
}

/// Room state the prediction starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomContext {
    pub location: String,
    pub volume_m3: f64,
    #[serde(default)]
    pub baseline: BTreeMap<EnvProperty, f64>,
    #[serde(default)]
    pub outdoor: BTreeMap<EnvProperty, f64>,
}

impl RoomContext {
    pub fn new(location: impl Into<String>, volume_m3: f64) -> Self {
        RoomContext {
            location: location.into(),
            volume_m3,
            baseline: BTreeMap::new(),
            outdoor: BTreeMap::new(),
        }
    }

    pub fn with_baseline(mut self, p: EnvProperty, v: f64) -> Self {
        self.baseline.insert(p, v);
        self
    }

    pub fn with_outdoor(mut self, p: EnvProperty, v: f64) -> Self {
        self.outdoor.insert(p, v);
        self
    }

    /// Current indoor value, falling back to a neutral default per property.
    pub fn baseline_of(&self, p: EnvProperty) -> f64 {
        self.baseline.get(&p).copied().unwrap_or(match p {
            EnvProperty::Temperature => 24.0,
            EnvProperty::Illumination => 0.0,
            EnvProperty::Sound => 30.0,
            EnvProperty::Humidity => 50.0,
        })
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.volume_m3 > 0.0) {
            errs.push(format!("room `{}`: volume_m3 must be > 0", self.location));
        }
        if self
            .baseline
            .values()
            .chain(self.outdoor.values())
            .any(|v| !v.is_finite())
        {
            errs.push(format!("room `{}`: non-finite baseline/outdoor value", self.location));
        }
        errs
    }
}

/// Hours needed to change a room's temperature by `delta_t`.
///
/// `(volume * density * delta_t * specific_heat) / (latent_heat * tons * 1000 / 24)`
pub fn cooling_time_hours(
    volume_m3: f64,
    air_density: f64,
    delta_t: f64,
    specific_heat: f64,
    latent_heat: f64,
    ac_tons: f64,
) -> Result<f64> {
    let named = [
        ("volume", volume_m3),
        ("air_density", air_density),
        ("specific_heat", specific_heat),
        ("latent_heat", latent_heat),
        ("ac_tons", ac_tons),
    ];
    if let Some((name, v)) = named.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Contract(format!("{name} must be > 0, got {v}")));
    }
    if !(delta_t >= 0.0) || !delta_t.is_finite() {
        return Err(Error::Contract(format!("delta_t must be >= 0, got {delta_t}")));
    }
    Ok((volume_m3 * air_density * delta_t * specific_heat)
        / (latent_heat * ac_tons * 1000.0 / 24.0))
}

/// Energy sum of sound pressure levels. `-inf` is silence.
pub fn combine_sound_db(levels: &[f64]) -> Result<f64> {
    if levels.is_empty() {
        return Err(Error::NoSamples);
    }
    let energy: f64 = levels.iter().map(|l| 10f64.powf(l / 10.0)).sum();
    Ok(10.0 * energy.log10())
}

struct Span {
    start: f64,
    end: f64,
    order: usize,
}

impl Span {
    fn active(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

struct Controller {
    span: Span,
    setpoint: f64,
    rate: f64,
}

enum Push {
    Coupling { factor: f64, outdoor: Option<f64> },
    Offset(f64),
}

struct Disturbance {
    span: Span,
    push: Push,
    rate: f64,
}

struct Step {
    span: Span,
    value: f64,
}

#[derive(Default)]
struct Sources {
    controllers: Vec<Controller>,
    disturbances: Vec<Disturbance>,
    levels: Vec<Step>,
    additive: Vec<Step>,
}

fn collect_sources(
    property: EnvProperty,
    requests: &[ServiceRequest],
    ctx: &RoomContext,
    affinity: &Affinity,
) -> Result<Sources> {
    let mut ordered: Vec<&ServiceRequest> = requests.iter().collect();
    ordered.sort_by(|a, b| {
        (a.interval.start, &a.request_id).cmp(&(b.interval.start, &b.request_id))
    });
    let outdoor = ctx.outdoor.get(&property).copied();
    let mut src = Sources::default();
    for (order, req) in ordered.into_iter().enumerate() {
        let Some(rule) = affinity.rule_for(&req.service_id, property) else {
            continue;
        };
        let span = Span {
            start: req.interval.start.secs(),
            end: req.interval.end.secs(),
            order,
        };
        let own = req.quality(property.name());
        match (rule.mode, rule.effect) {
            (ChangeMode::Instantaneous, Effect::TargetSetpoint { default }) => {
                if let Some(value) = own.or(default) {
                    src.levels.push(Step { span, value });
                }
            }
            (ChangeMode::Instantaneous, Effect::AdditiveOffset { offset }) => {
                src.additive.push(Step {
                    span,
                    value: own.unwrap_or(offset),
                });
            }
            (ChangeMode::Instantaneous, Effect::ExternalCoupling { factor }) => {
                src.additive.push(Step {
                    span,
                    value: factor * outdoor.unwrap_or(0.0),
                });
            }
            (ChangeMode::Progressive, effect) => {
                let rate_spec = rule.rate.ok_or_else(|| {
                    Error::Contract(format!("progressive rule `{}` has no rate", rule.service))
                })?;
                let rate = affinity.rate_per_sec(rate_spec, ctx.volume_m3)?;
                match effect {
                    Effect::TargetSetpoint { default } => {
                        if let Some(setpoint) = own.or(default) {
                            src.controllers.push(Controller {
                                span,
                                setpoint,
                                rate,
                            });
                        }
                    }
                    Effect::AdditiveOffset { offset } => src.disturbances.push(Disturbance {
                        span,
                        push: Push::Offset(own.unwrap_or(offset)),
                        rate,
                    }),
                    Effect::ExternalCoupling { factor } => src.disturbances.push(Disturbance {
                        span,
                        push: Push::Coupling { factor, outdoor },
                        rate,
                    }),
                }
            }
        }
    }
    Ok(src)
}

/// Ramp simulation of the progressive sources. A disturbance starting at
/// value `x` first pushes the room to its peak at its own speed; once the
/// peak is reached (or the disturbance ends) the latest active controller
/// pulls the room back to its setpoint.
fn simulate_progressive(src: &Sources, baseline: f64, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut events: Vec<f64> = src
        .controllers
        .iter()
        .map(|c| &c.span)
        .chain(src.disturbances.iter().map(|d| &d.span))
        .flat_map(|s| [s.start, s.end])
        .filter(|&t| t > t0 && t < t1)
        .collect();
    events.push(t1);
    events.sort_by(f64::total_cmp);
    events.dedup();

    let mut x = baseline;
    let mut t = t0;
    let mut pts = vec![(t, x)];
    // (peak, speed, index of the disturbance driving it)
    let mut phase: Option<(f64, f64, usize)> = None;

    let start_disturbances = |at: f64, x: f64, phase: &mut Option<(f64, f64, usize)>| {
        for (i, d) in src.disturbances.iter().enumerate() {
            if d.span.start == at || (at == t0 && d.span.active(t0)) {
                let peak = match d.push {
                    Push::Coupling { factor, outdoor } => {
                        outdoor.map_or(x, |o| x + factor * (o - x))
                    }
                    Push::Offset(off) => x + off,
                };
                *phase = Some((peak, d.rate, i));
            }
        }
    };
    start_disturbances(t0, x, &mut phase);

    for &te in &events {
        loop {
            let controller = src
                .controllers
                .iter()
                .filter(|c| c.span.active(t))
                .max_by_key(|c| c.span.order);
            let drive = phase
                .map(|(peak, rate, _)| (peak, rate))
                .or_else(|| controller.map(|c| (c.setpoint, c.rate)));
            let Some((target, rate)) = drive else {
                t = te;
                break;
            };
            if x == target {
                if phase.take().is_some() {
                    continue;
                }
                t = te;
                break;
            }
            let reach = t + (target - x).abs() / rate;
            if reach <= te {
                t = reach;
                x = target;
                pts.push((t, x));
                phase = None;
            } else {
                x += (target - x).signum() * rate * (te - t);
                t = te;
                break;
            }
        }
        if pts.last().map(|p| p.0) != Some(te) {
            pts.push((te, x));
        }
        if let Some((_, _, i)) = phase {
            if src.disturbances[i].span.end == te {
                phase = None;
            }
        }
        if te < t1 {
            start_disturbances(te, x, &mut phase);
        }
    }
    pts
}

/// Predicted ambient trace of `property` over `window` while `requests`
/// run in the room described by `ctx`. Requests without a matching rule are
/// ignored; with none matching the trace is the constant baseline.
pub fn predict_signal(
    property: EnvProperty,
    requests: &[ServiceRequest],
    ctx: &RoomContext,
    affinity: &Affinity,
    window: &TimeInterval,
) -> Result<Signal> {
    let src = collect_sources(property, requests, ctx, affinity)?;
    let (w0, w1) = (window.start.secs(), window.end.secs());
    let t0 = requests
        .iter()
        .map(|r| r.interval.start.secs())
        .fold(w0, f64::min);
    let t1 = w1;

    let baseline = ctx.baseline_of(property);
    let progressive = if src.controllers.is_empty() && src.disturbances.is_empty() {
        vec![(t0, baseline), (t1, baseline)]
    } else {
        simulate_progressive(&src, baseline, t0, t1)
    };
    let progressive = if t1 > t0 {
        Signal::new(property, progressive)?
    } else {
        Signal::new(property, vec![(t0, baseline)])?
    };

    let steps: Vec<f64> = src
        .levels
        .iter()
        .chain(&src.additive)
        .flat_map(|s| [s.span.start, s.span.end])
        .collect();
    let mut times: Vec<f64> = progressive
        .times()
        .iter()
        .copied()
        .chain(steps)
        .chain([t0, t1])
        .filter(|&t| t >= t0 && t <= t1)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let value_at = |t: f64, state_t: f64| -> f64 {
        let base = src
            .levels
            .iter()
            .filter(|s| s.span.active(state_t))
            .max_by_key(|s| s.span.order)
            .map_or_else(|| progressive.value_at(t), |s| s.value);
        let adds = src.additive.iter().filter(|s| s.span.active(state_t));
        if property == EnvProperty::Sound {
            let levels: Vec<f64> = std::iter::once(base).chain(adds.map(|s| s.value)).collect();
            combine_sound_db(&levels).unwrap_or(base)
        } else {
            base + adds.map(|s| s.value).sum::<f64>()
        }
    };

    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(times.len() * 2);
    if times.len() == 1 {
        pts.push((t0, value_at(t0, t0)));
    }
    for w in times.windows(2) {
        let (u, v) = (w[0], w[1]);
        let mid = 0.5 * (u + v);
        let (a, b) = (value_at(u, mid), value_at(v, mid));
        match pts.last() {
            None => pts.push((u, a)),
            Some(&(_, prev)) if prev != a => {
                let stepped = if u + STEP_SECS < v { u + STEP_SECS } else { mid };
                pts.push((stepped, a));
            }
            _ => {}
        }
        pts.push((v, b));
    }
    let full = Signal::new(property, pts)?.simplified();
    if w1 > w0 {
        Ok(full.clip(w0, w1)?.simplified())
    } else {
        Signal::new(property, vec![(w0, full.value_at(w0))])
    }
}
