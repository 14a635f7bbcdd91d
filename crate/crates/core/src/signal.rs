//! Piecewise-linear traces of one environment property.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnvProperty, Timestamp};

/// Breakpoints `(t, value)` with `t` in seconds. Values are linearly
/// interpolated between breakpoints and held constant outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    property: EnvProperty,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(property: EnvProperty, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("at least one sample is required".into()));
        }
        let (times, values): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal("non-finite sample".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSignal(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Signal {
            property,
            times,
            values,
        })
    }

    pub fn constant(property: EnvProperty, start: f64, end: f64, value: f64) -> Result<Self> {
        if end > start {
            Signal::new(property, vec![(start, value), (end, value)])
        } else {
            Signal::new(property, vec![(start, value)])
        }
    }

    pub fn property(&self) -> EnvProperty {
        self.property
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        // first index with time > t; guaranteed in 1..n
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Breakpoints of the trace restricted to `[a, b]`, with the window
    /// edges inserted as breakpoints.
    pub fn restricted(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut out = vec![(a, self.value_at(a))];
        out.extend(self.samples().filter(|&(t, _)| t > a && t < b));
        if b > a {
            out.push((b, self.value_at(b)));
        }
        out
    }

    /// `[min, max]` of the trace over `[a, b]`.
    pub fn range_over(&self, a: f64, b: f64) -> (f64, f64) {
        self.restricted(a, b)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Clips the trace to `[a, b]`.
    pub fn clip(&self, a: f64, b: f64) -> Result<Signal> {
        Signal::new(self.property, self.restricted(a, b))
    }

    /// Drops interior breakpoints lying on the line through their neighbours.
    pub fn simplified(&self) -> Signal {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.len());
        for (t, v) in self.samples() {
            while pts.len() >= 2 {
                let (t0, v0) = pts[pts.len() - 2];
                let (t1, v1) = pts[pts.len() - 1];
                let predicted = v0 + (v - v0) * (t1 - t0) / (t - t0);
                if (predicted - v1).abs() <= 1e-9 * (1.0 + v1.abs()) {
                    pts.pop();
                } else {
                    break;
                }
            }
            pts.push((t, v));
        }
        Signal {
            property: self.property,
            times: pts.iter().map(|p| p.0).collect(),
            values: pts.iter().map(|p| p.1).collect(),
        }
    }

    /// Writes `timestamp,property,value` CSV with ISO-8601 timestamps.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "property", "value"])?;
        for (t, v) in self.samples() {
            w.write_record([
                Timestamp::from_secs(t).to_string(),
                self.property.to_string(),
                v.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Signal::write_csv`]. Rows must share one property.
    pub fn read_csv<R: Read>(input: R) -> Result<Signal> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut property = None;
        let mut samples = Vec::new();
        for row in r.records() {
            let row = row?;
            if row.len() != 3 {
                return Err(Error::Parse(format!("expected 3 columns, got {}", row.len())));
            }
            let t = Timestamp::parse(&row[0])?.secs();
            let p: EnvProperty = row[1].parse()?;
            let v: f64 = row[2]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{}`", &row[2])))?;
            match property {
                None => property = Some(p),
                Some(q) if q != p => {
                    return Err(Error::Parse(format!("mixed properties {q} and {p}")));
                }
                _ => {}
            }
            samples.push((t, v));
        }
        let property = property.ok_or(Error::NoSamples)?;
        Signal::new(property, samples)
    }
}
