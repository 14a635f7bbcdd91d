//! Quantitative checks of `always[a,b] (x := setpoint)` requirements over
//! piecewise-linear signals.
//!
//! Everything here is exact: the window is split at signal breakpoints and at
//! every crossing of the acceptable band, after which the deviation is linear
//! with constant sign on each piece and integrates in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnvProperty, TimeInterval};
use crate::signal::Signal;

/// Hold `property` at `setpoint` (± `tolerance`) throughout `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlRequirement {
    pub property: EnvProperty,
    pub setpoint: f64,
    pub window: TimeInterval,
    pub tolerance: f64,
}

impl StlRequirement {
    pub fn new(
        property: EnvProperty,
        setpoint: f64,
        window: TimeInterval,
        tolerance: f64,
    ) -> Result<Self> {
        if !(tolerance >= 0.0) || !tolerance.is_finite() {
            return Err(Error::Contract(format!("tolerance must be >= 0, got {tolerance}")));
        }
        if !setpoint.is_finite() {
            return Err(Error::Contract("setpoint must be finite".into()));
        }
        Ok(StlRequirement {
            property,
            setpoint,
            window,
            tolerance,
        })
    }
}

/// How a sample's departure from the setpoint is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMode {
    /// `|x - setpoint|`: departures in either direction count.
    #[default]
    Magnitude,
    /// Negative-part form `|min(x - setpoint, 0)|`; only undershoot counts and
    /// robustness is the one-sided `sup (x - setpoint)`.
    NegativePart,
}

pub fn positive_part(v: f64) -> f64 {
    v.max(0.0)
}

pub fn negative_part(v: f64) -> f64 {
    v.min(0.0)
}

/// Deviation beyond the tolerance band at one sample; `> 0` means violated.
fn excess(mode: DeviationMode, value: f64, req: &StlRequirement) -> f64 {
    let e = value - req.setpoint;
    match mode {
        DeviationMode::Magnitude => e.abs() - req.tolerance,
        DeviationMode::NegativePart => negative_part(e).abs() - req.tolerance,
    }
}

fn check(sig: &Signal, req: &StlRequirement) -> Result<(f64, f64)> {
    if sig.property() != req.property {
        return Err(Error::PropertyMismatch {
            signal: sig.property(),
            requirement: req.property,
        });
    }
    let (a, b) = (req.window.start.secs(), req.window.end.secs());
    if b < sig.start() || a > sig.end() {
        return Err(Error::WindowNotCovered);
    }
    Ok((a, b))
}

/// Window breakpoints refined with every point where the deviation changes
/// sign or crosses the band edges.
fn refined_points(sig: &Signal, req: &StlRequirement, a: f64, b: f64) -> Vec<(f64, f64)> {
    let levels = [
        req.setpoint - req.tolerance,
        req.setpoint,
        req.setpoint + req.tolerance,
    ];
    let base = sig.restricted(a, b);
    let mut out = Vec::with_capacity(base.len() * 2);
    for w in base.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        out.push((t0, v0));
        let mut cuts: Vec<f64> = levels
            .iter()
            .filter(|&&l| (v0 - l) * (v1 - l) < 0.0)
            .map(|&l| t0 + (l - v0) / (v1 - v0) * (t1 - t0))
            .filter(|&t| t > t0 && t < t1)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for t in cuts {
            let frac = (t - t0) / (t1 - t0);
            out.push((t, v0 + (v1 - v0) * frac));
        }
    }
    if let Some(&last) = base.last() {
        out.push(last);
    }
    out
}

/// Violated pieces of the refined grid as `(t0, t1, excess0, excess1)`.
fn violated_pieces(
    sig: &Signal,
    req: &StlRequirement,
    mode: DeviationMode,
    a: f64,
    b: f64,
) -> Vec<(f64, f64, f64, f64)> {
    let pts = refined_points(sig, req, a, b);
    pts.windows(2)
        .filter_map(|w| {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            let (d0, d1) = (excess(mode, v0, req), excess(mode, v1, req));
            let mid = excess(mode, 0.5 * (v0 + v1), req);
            (t1 > t0 && mid > 0.0).then_some((t0, t1, d0.max(0.0), d1.max(0.0)))
        })
        .collect()
}

/// Worst-case deviation from the setpoint over the window (magnitude form).
pub fn robustness(sig: &Signal, req: &StlRequirement) -> Result<f64> {
    robustness_with(sig, req, DeviationMode::Magnitude)
}

pub fn robustness_with(sig: &Signal, req: &StlRequirement, mode: DeviationMode) -> Result<f64> {
    let (a, b) = check(sig, req)?;
    let dev = |v: f64| match mode {
        DeviationMode::Magnitude => (v - req.setpoint).abs(),
        DeviationMode::NegativePart => v - req.setpoint,
    };
    Ok(sig
        .restricted(a, b)
        .into_iter()
        .map(|(_, v)| dev(v))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Fraction of the window during which the signal is outside the band.
pub fn violation_fraction(sig: &Signal, req: &StlRequirement) -> Result<f64> {
    violation_fraction_with(sig, req, DeviationMode::Magnitude)
}

pub fn violation_fraction_with(
    sig: &Signal,
    req: &StlRequirement,
    mode: DeviationMode,
) -> Result<f64> {
    let (a, b) = check(sig, req)?;
    if b <= a {
        return Err(Error::EmptyWindow);
    }
    let violated: f64 = violated_pieces(sig, req, mode, a, b)
        .iter()
        .map(|&(t0, t1, _, _)| t1 - t0)
        .sum();
    Ok((violated / (b - a)).clamp(0.0, 1.0))
}

/// Area of the deviation beyond the band over violated time, in
/// property-unit × minutes.
pub fn deviation_area(sig: &Signal, req: &StlRequirement, mode: DeviationMode) -> Result<f64> {
    let (a, b) = check(sig, req)?;
    if b <= a {
        return Err(Error::EmptyWindow);
    }
    let area_secs: f64 = violated_pieces(sig, req, mode, a, b)
        .iter()
        .map(|&(t0, t1, d0, d1)| 0.5 * (d0 + d1) * (t1 - t0))
        .sum();
    Ok(area_secs / 60.0)
}

/// Impact severity: violation fraction times the deviation area.
pub fn deviation_integral(sig: &Signal, req: &StlRequirement) -> Result<f64> {
    deviation_integral_with(sig, req, DeviationMode::Magnitude)
}

pub fn deviation_integral_with(
    sig: &Signal,
    req: &StlRequirement,
    mode: DeviationMode,
) -> Result<f64> {
    let eta = violation_fraction_with(sig, req, mode)?;
    let area = deviation_area(sig, req, mode)?;
    Ok(eta * area)
}

/// Maximal violated sub-intervals of the window, in seconds.
pub fn violation_intervals(
    sig: &Signal,
    req: &StlRequirement,
    mode: DeviationMode,
) -> Result<Vec<(f64, f64)>> {
    let (a, b) = check(sig, req)?;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (t0, t1, _, _) in violated_pieces(sig, req, mode, a, b) {
        match out.last_mut() {
            Some(last) if last.1 >= t0 => last.1 = t1,
            _ => out.push((t0, t1)),
        }
    }
    Ok(out)
}
