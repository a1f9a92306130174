//! Unsupervised clustering quality (Silhouette, Calinski-Harabasz, Davies-Bouldin)
//! and a PCA projection to two dimensions.
//!
//! Cluster ids are arbitrary integers; `k` is the number of distinct ids present.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dist, dot, mean, sq_dist, symmetric_eigen};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("metrics need at least two clusters")]
    SingleCluster,
    #[error("need more points than clusters ({points} points, {clusters} clusters)")]
    TooFewPoints { points: usize, clusters: usize },
    #[error("{points} points but {assignments} assignments")]
    LengthMismatch { points: usize, assignments: usize },
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Serializes non-finite values as the string `"inf"` and reads either form back.
pub mod inf_as_string {
    use alloc::string::String;
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct V;

    impl Visitor<'_> for V {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }

        fn visit_string<E: de::Error>(self, v: String) -> Result<f64, E> {
            self.visit_str(&v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringEvaluation {
    pub silhouette: f64,
    /// `inf` when within-cluster dispersion is zero and between-cluster dispersion is not.
    #[serde(with = "inf_as_string")]
    pub chi: f64,
    /// `inf` when two clusters share a centroid.
    #[serde(with = "inf_as_string")]
    pub dbi: f64,
    pub n_points: usize,
    pub k: usize,
}

struct Groups {
    /// Member indices per distinct cluster id, ids ascending.
    members: Vec<Vec<usize>>,
    /// Position of each point's cluster in `members`.
    of: Vec<usize>,
}

fn group(points: &[Vec<f64>], assignments: &[usize]) -> Result<Groups, MetricError> {
    if points.len() != assignments.len() {
        return Err(MetricError::LengthMismatch {
            points: points.len(),
            assignments: assignments.len(),
        });
    }
    let d = points.first().map_or(0, Vec::len);
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(MetricError::DimensionMismatch { expected: d, got: p.len() });
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    for &a in assignments {
        let next = ids.len();
        ids.entry(a).or_insert(next);
    }
    // Re-number in ascending id order.
    let order: BTreeMap<usize, usize> = ids.keys().enumerate().map(|(i, &id)| (id, i)).collect();
    let of: Vec<usize> = assignments.iter().map(|a| order[a]).collect();
    let mut members = vec![Vec::new(); order.len()];
    for (i, &g) in of.iter().enumerate() {
        members[g].push(i);
    }
    if members.len() < 2 {
        return Err(MetricError::SingleCluster);
    }
    Ok(Groups { members, of })
}

fn centroids(points: &[Vec<f64>], g: &Groups) -> Vec<Vec<f64>> {
    g.members
        .iter()
        .map(|m| mean(&m.iter().map(|&i| points[i].clone()).collect::<Vec<_>>()))
        .collect()
}

/// Mean silhouette coefficient. Singletons and points with `max(a, b) = 0` score 0.
pub fn silhouette(points: &[Vec<f64>], assignments: &[usize]) -> Result<f64, MetricError> {
    let g = group(points, assignments)?;
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = g.of[i];
        if g.members[own].len() == 1 {
            continue;
        }
        let mut sums = vec![0.0; g.members.len()];
        for j in 0..n {
            if j != i {
                sums[g.of[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (g.members[own].len() - 1) as f64;
        let b = (0..g.members.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / g.members[c].len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Calinski-Harabasz variance ratio.
pub fn chi(points: &[Vec<f64>], assignments: &[usize]) -> Result<f64, MetricError> {
    let g = group(points, assignments)?;
    let n = points.len();
    let k = g.members.len();
    if n <= k {
        return Err(MetricError::TooFewPoints { points: n, clusters: k });
    }
    let overall = mean(points);
    let cents = centroids(points, &g);
    let between: f64 = cents
        .iter()
        .zip(&g.members)
        .map(|(c, m)| m.len() as f64 * sq_dist(c, &overall))
        .sum();
    let within: f64 = (0..n).map(|i| sq_dist(&points[i], &cents[g.of[i]])).sum();
    Ok(if between == 0.0 {
        0.0
    } else if within == 0.0 {
        f64::INFINITY
    } else {
        (between / within) * ((n - k) as f64 / (k - 1) as f64)
    })
}

/// Davies-Bouldin index.
pub fn dbi(points: &[Vec<f64>], assignments: &[usize]) -> Result<f64, MetricError> {
    let g = group(points, assignments)?;
    let cents = centroids(points, &g);
    let sigma: Vec<f64> = g
        .members
        .iter()
        .zip(&cents)
        .map(|(m, c)| m.iter().map(|&i| dist(&points[i], c)).sum::<f64>() / m.len() as f64)
        .collect();
    let k = cents.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = dist(&cents[i], &cents[j]);
            let r = if d == 0.0 { f64::INFINITY } else { (sigma[i] + sigma[j]) / d };
            worst = worst.max(r);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn evaluate(points: &[Vec<f64>], assignments: &[usize]) -> Result<ClusteringEvaluation, MetricError> {
    let g = group(points, assignments)?;
    Ok(ClusteringEvaluation {
        silhouette: silhouette(points, assignments)?,
        chi: chi(points, assignments)?,
        dbi: dbi(points, assignments)?,
        n_points: points.len(),
        k: g.members.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    /// Set when the data has no variance; `coords` are then all zero.
    pub degenerate: bool,
}

/// Scores on the top two principal components. Each component's sign is fixed
/// so that its first non-negligible loading is positive.
pub fn project_2d(points: &[Vec<f64>]) -> Result<Projection, MetricError> {
    let n = points.len();
    if n < 2 {
        return Err(MetricError::TooFewPoints { points: n, clusters: 1 });
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(MetricError::DimensionMismatch { expected: d, got: p.len() });
    }
    let mu = mean(points);
    let x: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mu).map(|(a, b)| a - b).collect())
        .collect();

    // Loadings (unit vectors in feature space) of the top components.
    let loadings: Vec<(f64, Vec<f64>)> = if d <= n {
        let mut cov = vec![0.0; d * d];
        for r in &x {
            for i in 0..d {
                for j in i..d {
                    cov[i * d + j] += r[i] * r[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[i * d + j] = cov[j * d + i];
            }
        }
        let (vals, vecs) = symmetric_eigen(&cov, d);
        vals.into_iter().zip(vecs).take(2).collect()
    } else {
        // Gram matrix: same nonzero spectrum, far smaller when d > n.
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(&x[i], &x[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(&gram, n);
        vals.into_iter()
            .zip(vecs)
            .take(2)
            .map(|(l, u)| {
                let mut v = vec![0.0; d];
                for (r, &ui) in x.iter().zip(&u) {
                    crate::linalg::axpy(ui, r, &mut v);
                }
                let nv = crate::linalg::norm(&v);
                if nv > 0.0 {
                    v.iter_mut().for_each(|c| *c /= nv);
                }
                (l, v)
            })
            .collect()
    };

    let top = loadings.first().map_or(0.0, |l| l.0);
    let scale: f64 = x.iter().map(|r| dot(r, r)).sum();
    if scale == 0.0 || top <= 1e-12 * scale {
        return Ok(Projection {
            coords: vec![[0.0; 2]; n],
            degenerate: true,
        });
    }
    let mut comps: Vec<Option<Vec<f64>>> = Vec::new();
    for (l, mut v) in loadings {
        if l <= 1e-12 * scale {
            comps.push(None);
            continue;
        }
        let vmax = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-9 * vmax) {
            if *first < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
        }
        comps.push(Some(v));
    }
    let coords = x
        .iter()
        .map(|r| {
            let mut out = [0.0; 2];
            for (k, c) in comps.iter().enumerate().take(2) {
                if let Some(v) = c {
                    out[k] = dot(r, v);
                }
            }
            out
        })
        .collect();
    Ok(Projection {
        coords,
        degenerate: false,
    })
}
