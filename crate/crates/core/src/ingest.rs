//! CASAS-style sensor logs to service events.
//!
//! A log line is `date time sensor status`, whitespace separated. Actuator
//! sensors emit ON/OFF (or OPEN/CLOSE) pairs that become service events;
//! numeric sensors provide the attribute values attached to those events.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    same_location, wildcard_match, QualityAttribute, ServiceEvent, TimeInterval, Timestamp,
    MILLIS_PER_DAY,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLogLine {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub sensor: String,
    pub status: String,
}

impl RawLogLine {
    pub fn timestamp(&self) -> Timestamp {
        Timestamp::from_naive(NaiveDateTime::new(self.date, self.time))
    }

    /// Canonical `date time sensor status` form.
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {}",
            self.date.format("%Y-%m-%d"),
            self.time.format("%H:%M:%S%.f"),
            self.sensor,
            self.status
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub lines: Vec<RawLogLine>,
    pub rejects: Vec<Reject>,
    pub empty_lines: usize,
}

fn parse_time(s: &str) -> Option<NaiveTime> {
    ["%H:%M:%S%.f", "%H:%M:%S", "%H:%M"]
        .iter()
        .find_map(|f| NaiveTime::parse_from_str(s, f).ok())
}

/// Tokenizes a log. Fields beyond the fourth (activity annotations) are
/// ignored. Bad lines are reported, never dropped silently.
pub fn parse_casas<R: BufRead>(input: R) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            out.empty_lines += 1;
            continue;
        }
        let reject = |reason: &str| Reject {
            line: line_no,
            text: line.clone(),
            reason: reason.to_string(),
        };
        if fields.len() < 4 {
            out.rejects.push(reject("missing field"));
            continue;
        }
        let Ok(date) = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d") else {
            out.rejects.push(reject("unparseable date"));
            continue;
        };
        let Some(time) = parse_time(fields[1]) else {
            out.rejects.push(reject("unparseable time"));
            continue;
        };
        out.lines.push(RawLogLine {
            date,
            time,
            sensor: fields[2].to_string(),
            status: fields[3].to_string(),
        });
    }
    Ok(out)
}

pub fn parse_casas_str(text: &str) -> ParsedLog {
    parse_casas(text.as_bytes()).expect("in-memory read cannot fail")
}

/// An ON/OFF sensor standing for a service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorBinding {
    /// Sensor name; `*` wildcards allowed.
    pub sensor: String,
    pub service: String,
    pub location: String,
    #[serde(default)]
    pub user: Option<String>,
}

/// A numeric sensor whose latest reading becomes an event attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingBinding {
    pub sensor: String,
    pub location: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorMap {
    pub actuators: Vec<ActuatorBinding>,
    #[serde(default)]
    pub readings: Vec<ReadingBinding>,
    /// Open events without an OFF close after this many minutes.
    #[serde(default = "default_horizon")]
    pub max_duration_minutes: i64,
}

fn default_horizon() -> i64 {
    240
}

impl Default for SensorMap {
    /// Thermostat as AC, `LL*` light switches, `D0*` door/window contacts.
    fn default() -> Self {
        SensorMap {
            actuators: vec![
                ActuatorBinding {
                    sensor: "T1*".into(),
                    service: "ac".into(),
                    location: "living".into(),
                    user: None,
                },
                ActuatorBinding {
                    sensor: "LL*".into(),
                    service: "light".into(),
                    location: "living".into(),
                    user: None,
                },
                ActuatorBinding {
                    sensor: "D0*".into(),
                    service: "window".into(),
                    location: "living".into(),
                    user: None,
                },
            ],
            readings: vec![
                ReadingBinding {
                    sensor: "LS*".into(),
                    location: "living".into(),
                    attribute: "illumination".into(),
                },
                ReadingBinding {
                    sensor: "TS*".into(),
                    location: "living".into(),
                    attribute: "temperature".into(),
                },
            ],
            max_duration_minutes: default_horizon(),
        }
    }
}

impl SensorMap {
    fn actuator(&self, sensor: &str) -> Option<&ActuatorBinding> {
        self.actuators
            .iter()
            .find(|b| wildcard_match(&b.sensor, sensor))
    }

    fn reading(&self, sensor: &str) -> Option<&ReadingBinding> {
        self.readings.iter().find(|b| wildcard_match(&b.sensor, sensor))
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.max_duration_minutes <= 0 {
            errs.push("sensors.max_duration_minutes must be > 0".into());
        }
        for b in &self.actuators {
            if b.sensor.is_empty() || b.service.is_empty() || b.location.trim().is_empty() {
                errs.push(format!("sensors: incomplete actuator binding `{}`", b.sensor));
            }
        }
        for b in &self.readings {
            if b.sensor.is_empty() || b.attribute.is_empty() || b.location.trim().is_empty() {
                errs.push(format!("sensors: incomplete reading binding `{}`", b.sensor));
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

fn switch_of(status: &str) -> Option<Switch> {
    match status.to_ascii_uppercase().as_str() {
        "ON" | "OPEN" => Some(Switch::On),
        "OFF" | "CLOSE" | "CLOSED" => Some(Switch::Off),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub events: Vec<ServiceEvent>,
    pub rejects: Vec<Reject>,
}

/// Pairs each ON with the next OFF of the same sensor. A repeated ON while
/// open and an OFF without an open ON are rejected; an ON never closed ends
/// at the horizon. Attributes are the latest co-located readings at or
/// before the event start.
pub fn reconstruct_events(lines: &[RawLogLine], sensors: &SensorMap) -> Reconstruction {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by_key(|&i| (lines[i].timestamp(), i));

    let horizon = sensors.max_duration_minutes * 60_000;
    let mut out = Reconstruction::default();
    // (location, attribute) -> time-ordered readings
    let mut readings: BTreeMap<(String, String), Vec<(Timestamp, f64)>> = BTreeMap::new();
    let mut open: HashMap<String, (Timestamp, usize)> = HashMap::new();
    let mut spans: Vec<(String, Timestamp, Timestamp)> = Vec::new();

    for &i in &order {
        let line = &lines[i];
        let t = line.timestamp();
        if let Some(rb) = sensors.reading(&line.sensor) {
            if let Ok(v) = line.status.parse::<f64>() {
                readings
                    .entry((rb.location.trim().to_lowercase(), rb.attribute.clone()))
                    .or_default()
                    .push((t, v));
            }
            continue;
        }
        if sensors.actuator(&line.sensor).is_none() {
            continue;
        }
        let reject = |reason: &str| Reject {
            line: i + 1,
            text: line.to_line(),
            reason: reason.to_string(),
        };
        match switch_of(&line.status) {
            Some(Switch::On) => {
                if open.contains_key(&line.sensor) {
                    out.rejects.push(reject("duplicate ON"));
                } else {
                    open.insert(line.sensor.clone(), (t, i));
                }
            }
            Some(Switch::Off) => match open.remove(&line.sensor) {
                Some((start, _)) => spans.push((line.sensor.clone(), start, t)),
                None => out.rejects.push(reject("OFF without prior ON")),
            },
            None => out.rejects.push(reject("unrecognized status")),
        }
    }
    let mut dangling: Vec<(String, Timestamp)> =
        open.into_iter().map(|(s, (t, _))| (s, t)).collect();
    dangling.sort();
    for (sensor, start) in dangling {
        spans.push((sensor, start, start.plus_millis(horizon)));
    }
    spans.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));

    for (n, (sensor, start, end)) in spans.into_iter().enumerate() {
        let binding = sensors.actuator(&sensor).expect("bound sensor");
        let location = binding.location.trim().to_lowercase();
        let qualities = readings
            .iter()
            .filter(|((loc, _), _)| same_location(loc, &location))
            .filter_map(|((_, attr), series)| {
                let k = series.partition_point(|&(rt, _)| rt <= start);
                (k > 0).then(|| QualityAttribute::new(attr.clone(), series[k - 1].1))
            })
            .collect();
        out.events.push(ServiceEvent {
            event_id: format!("{sensor}-{n}"),
            service_id: binding.service.clone(),
            functions: Vec::new(),
            qualities,
            interval: TimeInterval { start, end },
            location: binding.location.clone(),
            user: binding.user.clone().unwrap_or_else(|| "unknown".into()),
        });
    }
    out
}

/// Tags each resident's events with their label and returns the time-sorted
/// union over the days every non-empty log covers.
pub fn merge_residents(datasets: Vec<(String, Vec<ServiceEvent>)>) -> Vec<ServiceEvent> {
    let spans: Vec<(i64, i64)> = datasets
        .iter()
        .filter(|(_, evs)| !evs.is_empty())
        .map(|(_, evs)| {
            let first = evs.iter().map(|e| e.interval.start.day_index()).min().unwrap();
            let last = evs.iter().map(|e| e.interval.start.day_index()).max().unwrap();
            (first, last)
        })
        .collect();
    let lo = spans.iter().map(|s| s.0).max().unwrap_or(i64::MIN);
    let hi = spans.iter().map(|s| s.1).min().unwrap_or(i64::MAX);
    let mut out: Vec<ServiceEvent> = datasets
        .into_iter()
        .flat_map(|(label, evs)| {
            evs.into_iter().map(move |mut e| {
                e.user = label.clone();
                if !e.event_id.starts_with(&format!("{label}:")) {
                    e.event_id = format!("{label}:{}", e.event_id);
                }
                e
            })
        })
        .filter(|e| (lo..=hi).contains(&e.interval.start.day_index()))
        .collect();
    out.sort_by(|a, b| {
        (a.interval.start, &a.user, &a.event_id).cmp(&(b.interval.start, &b.user, &b.event_id))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationSpec {
    /// Window/blind open-close events inserted per day.
    pub window_blind_event_rate: f64,
    pub sound_range: (f64, f64),
    pub outdoor_lux_range: (f64, f64),
    pub min_duration_minutes: i64,
    pub max_duration_minutes: i64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            window_blind_event_rate: 2.0,
            sound_range: (30.0, 70.0),
            outdoor_lux_range: (0.0, 40.0),
            min_duration_minutes: 15,
            max_duration_minutes: 90,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.window_blind_event_rate >= 0.0) || !self.window_blind_event_rate.is_finite() {
            errs.push("augmentation.window_blind_event_rate must be >= 0".into());
        }
        for (name, (lo, hi)) in [
            ("sound_range", self.sound_range),
            ("outdoor_lux_range", self.outdoor_lux_range),
        ] {
            if !(lo <= hi) {
                errs.push(format!("augmentation.{name} must satisfy lo <= hi"));
            }
        }
        if self.min_duration_minutes <= 0 || self.min_duration_minutes > self.max_duration_minutes {
            errs.push("augmentation durations must satisfy 0 < min <= max".into());
        }
        errs
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Adds seeded window/blind events and uniform sound levels for TV events
/// that have none. Blind events carry the admitted outdoor illumination.
pub fn augment(events: &[ServiceEvent], spec: &AugmentationSpec, seed: u64) -> Vec<ServiceEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<ServiceEvent> = events.to_vec();
    for e in out.iter_mut() {
        if e.service_id.to_ascii_lowercase().starts_with("tv") && e.quality("sound").is_none() {
            let level = uniform(&mut rng, spec.sound_range);
            e.qualities.push(QualityAttribute::new("sound", level));
        }
    }
    if spec.window_blind_event_rate <= 0.0 || events.is_empty() {
        return out;
    }
    let locations: BTreeSet<&str> = events.iter().map(|e| e.location.as_str()).collect();
    let users: BTreeSet<&str> = events.iter().map(|e| e.user.as_str()).collect();
    let locations: Vec<&str> = locations.into_iter().collect();
    let users: Vec<&str> = users.into_iter().collect();
    let first = events.iter().map(|e| e.interval.start.day_index()).min().unwrap();
    let last = events.iter().map(|e| e.interval.start.day_index()).max().unwrap();

    let whole = spec.window_blind_event_rate.floor() as usize;
    let frac = spec.window_blind_event_rate.fract();
    for day in first..=last {
        let count = whole + usize::from(rng.random::<f64>() < frac);
        for k in 0..count {
            let blind = rng.random::<bool>();
            let location = locations[rng.random_range(0..locations.len())];
            let user = users[rng.random_range(0..users.len())];
            let minute = rng.random_range(6 * 60..22 * 60);
            let duration = rng.random_range(spec.min_duration_minutes..=spec.max_duration_minutes);
            let start = Timestamp::from_millis(day * MILLIS_PER_DAY).plus_minutes(minute);
            let mut qualities = Vec::new();
            if blind {
                qualities.push(QualityAttribute::new(
                    "illumination",
                    uniform(&mut rng, spec.outdoor_lux_range),
                ));
            }
            out.push(ServiceEvent {
                event_id: format!("aug-{day}-{k}"),
                service_id: if blind { "blind" } else { "window" }.into(),
                functions: Vec::new(),
                qualities,
                interval: TimeInterval {
                    start,
                    end: start.plus_minutes(duration),
                },
                location: location.to_string(),
                user: user.to_string(),
            });
        }
    }
    out.sort_by(|a, b| (a.interval.start, &a.event_id).cmp(&(b.interval.start, &b.event_id)));
    out
}

pub const EVENT_CSV_HEADER: [&str; 8] = [
    "event_id", "service", "attribute", "value", "start", "end", "location", "user",
];

/// Writes `event_id,service,attribute,value,start,end,location,user`, one row
/// per attribute (an event without attributes gets one row with them empty).
/// `preamble` lines are written first as `#` comments.
pub fn write_events_csv<W: Write>(events: &[ServiceEvent], preamble: &[String], mut out: W) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_CSV_HEADER)?;
    for e in events {
        let base = |attr: &str, value: String| {
            [
                e.event_id.clone(),
                e.service_id.clone(),
                attr.to_string(),
                value,
                e.interval.start.to_string(),
                e.interval.end.to_string(),
                e.location.clone(),
                e.user.clone(),
            ]
        };
        if e.qualities.is_empty() {
            w.write_record(base("", String::new()))?;
        }
        for q in &e.qualities {
            w.write_record(base(&q.name, q.value.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the canonical event CSV; rows sharing an `event_id` merge into one
/// event. `#` lines are ignored.
pub fn read_events_csv<R: Read>(input: R) -> Result<Vec<ServiceEvent>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != EVENT_CSV_HEADER {
        return Err(Error::Parse(format!(
            "expected header {}, got {}",
            EVENT_CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<ServiceEvent> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (row_no, row) in r.records().enumerate() {
        let row = row?;
        let ctx = |m: String| Error::Parse(format!("row {}: {m}", row_no + 1));
        let start = Timestamp::parse(&row[4]).map_err(|e| ctx(e.to_string()))?;
        let end = Timestamp::parse(&row[5]).map_err(|e| ctx(e.to_string()))?;
        let interval = TimeInterval::new(start, end).map_err(|e| ctx(e.to_string()))?;
        let quality = if row[2].is_empty() {
            None
        } else {
            let v: f64 = row[3]
                .parse()
                .map_err(|_| ctx(format!("bad value `{}`", &row[3])))?;
            Some(QualityAttribute::new(&row[2], v))
        };
        let id = row[0].to_string();
        match index.get(&id) {
            Some(&i) => out[i].qualities.extend(quality),
            None => {
                if row[7].is_empty() || row[6].is_empty() {
                    return Err(ctx("user and location must be non-empty".into()));
                }
                index.insert(id.clone(), out.len());
                out.push(ServiceEvent {
                    event_id: id,
                    service_id: row[1].to_string(),
                    functions: Vec::new(),
                    qualities: quality.into_iter().collect(),
                    interval,
                    location: row[6].to_string(),
                    user: row[7].to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Writes `line,reason,text` rows for rejected log lines.
pub fn write_rejects_csv<W: Write>(rejects: &[Reject], preamble: &[String], mut out: W) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["line", "reason", "text"])?;
    for r in rejects {
        w.write_record([r.line.to_string(), r.reason.clone(), r.text.clone()])?;
    }
    w.flush()?;
    Ok(())
}
