//! Brute-force references shared by the property suites and the
//! acceptance run.

use std::collections::HashMap;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use impact_core::dbscan::{dbscan, Label};
use impact_core::model::{EnvProperty, QualityAttribute, TimeInterval, Timestamp, MILLIS_PER_DAY};
use impact_core::preference::{overlapping_service_events, OverlapPolicy};
use impact_core::stl::{deviation_integral, violation_fraction, StlRequirement};
use impact_core::{OverlapSegment, ServiceEvent, Signal};

pub const T0: f64 = 1_308_160_800.0;

pub fn window(a: f64, b: f64) -> TimeInterval {
    TimeInterval::new(Timestamp::from_secs(a), Timestamp::from_secs(b)).unwrap()
}

/// Midpoint sums on a 10 ms grid: (violation fraction, area in unit·minutes).
pub fn riemann(sig: &Signal, setpoint: f64, tol: f64, a: f64, b: f64) -> (f64, f64) {
    let steps = ((b - a) / 0.01).round() as usize;
    let dt = (b - a) / steps as f64;
    let (mut out, mut area) = (0usize, 0.0);
    for k in 0..steps {
        let t = a + (k as f64 + 0.5) * dt;
        let d = (sig.value_at(t) - setpoint).abs() - tol;
        if d > 0.0 {
            out += 1;
            area += d * dt;
        }
    }
    (out as f64 / steps as f64, area / 60.0)
}

/// Breakpoints one to ten minutes apart, values in [10, 40].
pub fn random_signal(rng: &mut ChaCha8Rng) -> Signal {
    let n = rng.random_range(2..12);
    let mut t = T0;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push((t, rng.random_range(10.0..40.0)));
        t += rng.random_range(60.0..600.0);
    }
    Signal::new(EnvProperty::Temperature, samples).unwrap()
}

/// 100 seeded signals against [`riemann`]; panics on the first mismatch.
pub fn check_stl_against_riemann() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let sig = random_signal(&mut rng);
        let (s, e) = (sig.start(), sig.end());
        // whole-millisecond window inside the signal
        let a = ((s + rng.random_range(0.0..0.3) * (e - s)) * 1000.0).ceil() / 1000.0;
        let b = ((e - rng.random_range(0.0..0.3) * (e - s)) * 1000.0).floor() / 1000.0;
        let setpoint = rng.random_range(15.0..35.0);
        let tol = rng.random_range(0.0..4.0);
        let req = StlRequirement::new(EnvProperty::Temperature, setpoint, window(a, b), tol).unwrap();
        let (eta, area) = riemann(&sig, setpoint, tol, a, b);
        let exact_eta = violation_fraction(&sig, &req).unwrap();
        let exact = deviation_integral(&sig, &req).unwrap();
        if eta * area == 0.0 {
            assert!(exact < 1e-9, "oracle saw no violation, exact {exact}");
        } else {
            assert_relative_eq!(exact_eta, eta, max_relative = 1e-3);
            assert_relative_eq!(exact, eta * area, max_relative = 1e-3);
        }
        checked += 1;
    }
}

/// Textbook DBSCAN: brute-force neighbourhoods, core components by
/// union-find, border points to the adjacent component whose lowest core
/// index is smallest.
pub fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in 0..i {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    // component rank by lowest core index
    let mut rank: HashMap<usize, usize> = HashMap::new();
    for (i, &is_core) in core.iter().enumerate() {
        if is_core {
            let r = find(&mut parent, i);
            let next = rank.len();
            rank.entry(r).or_insert(next);
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                Some(rank[&find(&mut parent, i)])
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| rank[&find(&mut parent, j)])
                    .min()
            }
        })
        .collect()
}

/// Same partition up to renaming clusters.
pub fn same_up_to_relabeling(got: &[Label], want: &[Option<usize>]) -> bool {
    let mut fwd: HashMap<usize, usize> = HashMap::new();
    let mut back: HashMap<usize, usize> = HashMap::new();
    got.iter().zip(want).all(|(g, w)| match (g.cluster(), w) {
        (None, None) => true,
        (Some(a), Some(b)) => *fwd.entry(a).or_insert(*b) == *b && *back.entry(*b).or_insert(a) == a,
        _ => false,
    })
}

pub fn random_points(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=200);
    let centres: Vec<Vec<f64>> = (0..rng.random_range(1..5))
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..50.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                (0..dim).map(|_| rng.random_range(0.0..50.0)).collect()
            } else {
                let c = &centres[rng.random_range(0..centres.len())];
                c.iter().map(|x| x + rng.random_range(-3.0..3.0)).collect()
            }
        })
        .collect()
}

/// 50 seeded point sets against [`reference_dbscan`].
pub fn check_dbscan_against_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for set in 0..50 {
        let dim = 1 + set % 2;
        let points = random_points(&mut rng, dim);
        let eps = rng.random_range(0.5..3.0);
        let min_pts = rng.random_range(1..6);
        let got = dbscan(&points, eps, min_pts);
        let want = reference_dbscan(&points, eps, min_pts);
        assert!(same_up_to_relabeling(&got, &want), "set {set}: {got:?} vs {want:?}");
    }
}

pub fn event(i: usize, start: i64, len: i64, room: &str) -> ServiceEvent {
    ServiceEvent {
        event_id: format!("e{i}"),
        service_id: "ac".into(),
        functions: vec![],
        qualities: vec![QualityAttribute::new("temperature", 20.0)],
        interval: TimeInterval::new(Timestamp::from_millis(start), Timestamp::from_millis(start + len)).unwrap(),
        location: room.into(),
        user: "R1".into(),
    }
}

/// Every day shift in range, intersection by max-start < min-end.
pub fn brute_force(events: &[ServiceEvent], seg: &OverlapSegment, policy: OverlapPolicy) -> Vec<String> {
    let shifts: Vec<i64> = match policy {
        OverlapPolicy::Absolute => vec![0],
        _ => (-60..=60).collect(),
    };
    events
        .iter()
        .filter(|e| e.location == "living")
        .filter(|e| {
            shifts.iter().any(|k| {
                let s = seg.start.millis() + k * MILLIS_PER_DAY;
                let t = seg.end.millis() + k * MILLIS_PER_DAY;
                e.interval.start.millis().max(s) < e.interval.end.millis().min(t)
            })
        })
        .map(|e| e.event_id.clone())
        .collect()
}

/// 50 seeded event sets against [`brute_force`] under both policies.
pub fn check_overlap_against_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let span = 30 * MILLIS_PER_DAY;
    for set in 0..50 {
        let n = rng.random_range(0..=500);
        let events: Vec<ServiceEvent> = (0..n)
            .map(|i| {
                let room = if rng.random_bool(0.8) { "living" } else { "kitchen" };
                event(i, rng.random_range(0..span), rng.random_range(0..6 * 3_600_000), room)
            })
            .collect();
        let s = rng.random_range(0..span);
        let seg = OverlapSegment {
            start: Timestamp::from_millis(s),
            end: Timestamp::from_millis(s + rng.random_range(1..8 * 3_600_000)),
        };
        for policy in [OverlapPolicy::TimeOfDay, OverlapPolicy::Absolute] {
            let got: Vec<String> = overlapping_service_events(&events, &seg, "living", policy)
                .into_iter()
                .map(|o| o.event.event_id.clone())
                .collect();
            assert_eq!(got, brute_force(&events, &seg, policy), "set {set} {policy:?}");
        }
    }
}

