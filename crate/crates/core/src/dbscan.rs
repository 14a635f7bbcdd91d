//! Density-based clustering with Euclidean distance.

/// Cluster assignment of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Neighbourhood index: points sorted by their first coordinate so a query
/// only inspects the slab `|x0 - q0| <= eps`.
struct Index<'a, P> {
    points: &'a [P],
    order: Vec<usize>,
    keys: Vec<f64>,
    eps: f64,
}

impl<'a, P: AsRef<[f64]>> Index<'a, P> {
    fn new(points: &'a [P], eps: f64) -> Self {
        let first = |i: usize| points[i].as_ref().first().copied().unwrap_or(0.0);
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| first(a).total_cmp(&first(b)).then(a.cmp(&b)));
        let keys = order.iter().map(|&i| first(i)).collect();
        Index {
            points,
            order,
            keys,
            eps,
        }
    }

    /// Indices within `eps` of point `i` (itself included), ascending.
    fn neighbours(&self, i: usize) -> Vec<usize> {
        let p = self.points[i].as_ref();
        let q0 = p.first().copied().unwrap_or(0.0);
        let lo = self.keys.partition_point(|&k| k < q0 - self.eps);
        let hi = self.keys.partition_point(|&k| k <= q0 + self.eps);
        let eps2 = self.eps * self.eps;
        let mut out: Vec<usize> = self.order[lo..hi]
            .iter()
            .copied()
            .filter(|&j| dist2(p, self.points[j].as_ref()) <= eps2)
            .collect();
        out.sort_unstable();
        out
    }
}

/// Labels every point as a member of a density-connected cluster or noise.
///
/// Core points have at least `min_pts` points (themselves included) within
/// `eps`. Points are scanned in input order; clusters are numbered in order
/// of discovery and a border point joins the first cluster that reaches it.
pub fn dbscan<P: AsRef<[f64]>>(points: &[P], eps: f64, min_pts: usize) -> Vec<Label> {
    let n = points.len();
    let index = Index::new(points, eps);
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next_cluster = 0;

    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = index.neighbours(i);
        if seeds.len() < min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let c = next_cluster;
        next_cluster += 1;
        labels[i] = Some(Label::Cluster(c));
        let mut queue: std::collections::VecDeque<usize> = seeds.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Cluster(_)) => continue,
                Some(Label::Noise) => {
                    // border point previously marked noise
                    labels[j] = Some(Label::Cluster(c));
                    continue;
                }
                None => labels[j] = Some(Label::Cluster(c)),
            }
            let nb = index.neighbours(j);
            if nb.len() >= min_pts {
                queue.extend(nb.into_iter().filter(|&k| labels[k].is_none() || labels[k] == Some(Label::Noise)));
            }
        }
    }
    labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect()
}

/// Cluster sizes indexed by cluster id.
pub fn cluster_sizes(labels: &[Label]) -> Vec<usize> {
    let mut sizes = Vec::new();
    for c in labels.iter().filter_map(|l| l.cluster()) {
        if c >= sizes.len() {
            sizes.resize(c + 1, 0);
        }
        sizes[c] += 1;
    }
    sizes
}
