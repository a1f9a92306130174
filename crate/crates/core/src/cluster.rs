//! K-means over representation vectors, cluster labeling by heuristic
//! prevalence, and per-function risk labels.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::heuristics::HeuristicVector;
use crate::linalg::{sq_dist, mean};
use crate::rng::stream;

const SEED_STREAM: u64 = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need at least k = {k} points, got {got}")]
    TooFewPoints { k: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("cluster model has not been labeled")]
    UnlabeledModel,
    #[error("{points} points but {vectors} heuristic vectors")]
    LengthMismatch { points: usize, vectors: usize },
    #[error("heuristic vectors have {got} bits but the model was labeled with {expected} rules")]
    RuleCountMismatch { expected: usize, got: usize },
}

/// A heuristic named by its rule index, displayed as `H<index>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeuristicId(pub usize);

impl fmt::Display for HeuristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.0)
    }
}

impl FromStr for HeuristicId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.strip_prefix('H')
            .and_then(|n| n.parse().ok())
            .filter(|&n| n >= 1)
            .map(HeuristicId)
            .ok_or_else(|| format!("not a heuristic id: `{s}`"))
    }
}

impl Serialize for HeuristicId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HeuristicId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Risk label: a heuristic, or `None` (no known pattern applies).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Heuristic(HeuristicId),
    None,
}

impl Label {
    pub fn is_none(&self) -> bool {
        matches!(self, Label::None)
    }

    pub fn heuristic(&self) -> Option<HeuristicId> {
        match self {
            Label::Heuristic(h) => Some(*h),
            Label::None => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Heuristic(h) => h.fmt(f),
            Label::None => f.write_str("None"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "None" {
            Ok(Label::None)
        } else {
            s.parse().map(Label::Heuristic)
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-cluster heuristic prevalence and the resulting label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub label: Label,
    pub size: usize,
    /// Members with at least one set bit.
    pub matched: usize,
    /// Members per rule, in rule-set order.
    pub rule_counts: Vec<usize>,
    /// Dominant heuristic among matched members (ties go to the lowest index).
    pub dominant: Option<HeuristicId>,
    pub dominant_count: usize,
    /// `dominant_count / size`.
    pub dominant_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    pub inertia: f64,
    pub iterations: usize,
    pub match_threshold: f64,
    /// Rule index for each bit position; fixed at labeling time.
    pub rule_indices: Vec<usize>,
    /// Empty until [`label_clusters`] runs.
    pub clusters: Vec<ClusterInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskLabel {
    pub label: Label,
    pub aligned_heuristic: Option<HeuristicId>,
    pub confidence: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 2,
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.5;

/// Index of the nearest centroid (lowest index on ties) and the squared distance.
pub fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, p);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check_dims(points: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let d = points.first().map_or(0, Vec::len);
    for p in points {
        if p.len() != d {
            return Err(ClusterError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
    }
    Ok(d)
}

fn assign_all(centroids: &[Vec<f64>], points: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let a = points
        .iter()
        .map(|p| {
            let (c, d) = nearest(centroids, p);
            inertia += d;
            c
        })
        .collect();
    (a, inertia)
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = stream(seed, SEED_STREAM);
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` at the very end of the mass.
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[pick].clone();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// K-means++ seeding followed by Lloyd iterations. Returns the model and the
/// training assignments.
pub fn kmeans_fit(points: &[Vec<f64>], params: KMeansParams) -> Result<(ClusterModel, Vec<usize>), ClusterError> {
    let k = params.k;
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints { k, got: points.len() });
    }
    let dim = check_dims(points)?;
    let mut centroids = kmeans_pp(points, k, params.seed);
    let mut prev_inertia = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        iterations += 1;
        let (assign, inertia) = assign_all(&centroids, points);
        assert!(
            inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12,
            "k-means inertia increased: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;

        let mut members: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
        for (p, &c) in points.iter().zip(&assign) {
            members[c].push(p.clone());
        }
        let mut next: Vec<Vec<f64>> = members
            .iter()
            .zip(&centroids)
            .map(|(m, old)| if m.is_empty() { old.clone() } else { mean(m) })
            .collect();
        for c in 0..k {
            if members[c].is_empty() {
                // Re-seed at the point farthest from its own centroid.
                let far = points
                    .iter()
                    .zip(&assign)
                    .enumerate()
                    .map(|(i, (p, &a))| (i, sq_dist(p, &next[a])))
                    .fold((0, -1.0), |b, x| if x.1 > b.1 { x } else { b });
                next[c] = points[far.0].clone();
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| libm::sqrt(sq_dist(a, b)))
            .fold(0.0, f64::max);
        centroids = next;
        if shift < params.tol {
            break;
        }
    }
    let (assign, inertia) = assign_all(&centroids, points);
    Ok((
        ClusterModel {
            k,
            dim,
            centroids,
            seed: params.seed,
            inertia,
            iterations,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            rule_indices: Vec::new(),
            clusters: Vec::new(),
        },
        assign,
    ))
}

impl ClusterModel {
    pub fn is_labeled(&self) -> bool {
        self.clusters.len() == self.k
    }

    pub fn assign(&self, p: &[f64]) -> Result<usize, ClusterError> {
        if p.len() != self.dim {
            return Err(ClusterError::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(nearest(&self.centroids, p).0)
    }
}

/// Labels each cluster from the heuristic vectors of its training members.
/// `rule_indices[j]` names the rule behind bit `j`.
pub fn label_clusters(
    mut model: ClusterModel,
    points: &[Vec<f64>],
    heuristics: &[HeuristicVector],
    rule_indices: &[usize],
    match_threshold: f64,
) -> Result<ClusterModel, ClusterError> {
    if points.len() != heuristics.len() {
        return Err(ClusterError::LengthMismatch {
            points: points.len(),
            vectors: heuristics.len(),
        });
    }
    let r = rule_indices.len();
    if let Some(h) = heuristics.iter().find(|h| h.len() != r) {
        return Err(ClusterError::RuleCountMismatch { expected: r, got: h.len() });
    }
    let mut size = vec![0usize; model.k];
    let mut matched = vec![0usize; model.k];
    let mut counts = vec![vec![0usize; r]; model.k];
    for (p, h) in points.iter().zip(heuristics) {
        let c = model.assign(p)?;
        size[c] += 1;
        if !h.is_zero() {
            matched[c] += 1;
        }
        for (j, &b) in h.bits.iter().enumerate() {
            if b != 0 {
                counts[c][j] += 1;
            }
        }
    }
    let mut clusters = Vec::with_capacity(model.k);
    for c in 0..model.k {
        if size[c] == 0 {
            return Err(ClusterError::EmptyCluster(c));
        }
        let (best_j, best_n) = counts[c]
            .iter()
            .enumerate()
            .fold((0, 0), |b, (j, &n)| if n > b.1 { (j, n) } else { b });
        let dominant = (best_n > 0).then(|| HeuristicId(rule_indices[best_j]));
        let fraction_matched = matched[c] as f64 / size[c] as f64;
        let label = match dominant {
            Some(h) if fraction_matched >= match_threshold => Label::Heuristic(h),
            _ => Label::None,
        };
        clusters.push(ClusterInfo {
            label,
            size: size[c],
            matched: matched[c],
            rule_counts: counts[c].clone(),
            dominant,
            dominant_count: best_n,
            dominant_fraction: best_n as f64 / size[c] as f64,
        });
    }
    model.clusters = clusters;
    model.rule_indices = rule_indices.to_vec();
    model.match_threshold = match_threshold;
    Ok(model)
}

/// Label from the symbolic layer alone: the lowest set bit's rule, if any.
pub fn symbolic_label(h: &HeuristicVector, rule_indices: &[usize]) -> Label {
    h.lowest_set()
        .map_or(Label::None, |j| Label::Heuristic(HeuristicId(rule_indices[j])))
}

/// Nearest-centroid label, overridden by the function's own rule matches.
pub fn predict_label(model: &ClusterModel, p: &[f64], h_test: Option<&HeuristicVector>) -> Result<RiskLabel, ClusterError> {
    if !model.is_labeled() {
        return Err(ClusterError::UnlabeledModel);
    }
    let c = model.assign(p)?;
    let info = &model.clusters[c];
    if let Some(h) = h_test {
        if h.len() != model.rule_indices.len() {
            return Err(ClusterError::RuleCountMismatch {
                expected: model.rule_indices.len(),
                got: h.len(),
            });
        }
        if !h.is_zero() {
            return Ok(RiskLabel {
                label: symbolic_label(h, &model.rule_indices),
                aligned_heuristic: info.dominant,
                confidence: 1.0,
                cluster: c,
            });
        }
    }
    Ok(RiskLabel {
        label: info.label,
        aligned_heuristic: info.dominant,
        confidence: info.dominant_fraction,
        cluster: c,
    })
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let aligned = self.aligned_heuristic.map_or_else(|| "-".to_string(), |h| h.to_string());
        write!(f, "{} (aligned {aligned}, confidence {:.2})", self.label, self.confidence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec<f64>> {
        v.iter().map(|&(a, b)| vec![a, b]).collect()
    }

    fn params(k: usize, seed: u64) -> KMeansParams {
        KMeansParams {
            k,
            seed,
            ..KMeansParams::default()
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let (m, a) = kmeans_fit(&pts(&[(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)]), params(1, 0)).unwrap();
        assert_eq!(m.centroids, vec![vec![2.0, 0.0]]);
        assert_eq!(m.inertia, 8.0);
        assert_eq!(a, [0, 0, 0]);
    }

    /// Exhaustive search over 2-partitions for the minimum within-cluster SSE.
    fn brute_force_2(points: &[Vec<f64>]) -> (f64, Vec<usize>) {
        let n = points.len();
        let mut best = (f64::INFINITY, Vec::new());
        for mask in 1u32..(1 << n) - 1 {
            let groups: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut sse = 0.0;
            for g in 0..2 {
                let m: Vec<Vec<f64>> = (0..n).filter(|&i| groups[i] == g).map(|i| points[i].clone()).collect();
                let c = mean(&m);
                sse += m.iter().map(|p| sq_dist(p, &c)).sum::<f64>();
            }
            if sse < best.0 {
                best = (sse, groups);
            }
        }
        best
    }

    #[test]
    fn two_clusters_match_brute_force_optimum() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 10.0), (10.0, 11.0)]);
        let (sse, groups) = brute_force_2(&p);
        for seed in 0..10 {
            let (m, a) = kmeans_fit(&p, params(2, seed)).unwrap();
            assert!((m.inertia - sse).abs() < 1e-12);
            assert_eq!(a[0] == a[1], groups[0] == groups[1]);
            assert_eq!(a[2] == a[3], groups[2] == groups[3]);
            assert_ne!(a[0], a[2]);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let p: Vec<Vec<f64>> = (0..40).map(|i| vec![libm::sin(i as f64), libm::cos(i as f64 * 0.7)]).collect();
        assert_eq!(kmeans_fit(&p, params(3, 4)).unwrap(), kmeans_fit(&p, params(3, 4)).unwrap());
    }

    #[test]
    fn fit_errors() {
        assert_eq!(kmeans_fit(&pts(&[(0.0, 0.0)]), params(2, 0)), Err(ClusterError::TooFewPoints { k: 2, got: 1 }));
        assert!(matches!(
            kmeans_fit(&[vec![0.0], vec![1.0, 2.0]], params(1, 0)),
            Err(ClusterError::DimensionMismatch { .. })
        ));
    }

    fn hv(bits: [u8; 5]) -> HeuristicVector {
        HeuristicVector::from_bits(bits.to_vec())
    }

    const RULES: [usize; 5] = [1, 2, 3, 4, 5];

    fn one_cluster(members: &[HeuristicVector]) -> ClusterInfo {
        let p: Vec<Vec<f64>> = members.iter().map(|_| vec![0.0]).collect();
        let (m, _) = kmeans_fit(&p, params(1, 0)).unwrap();
        label_clusters(m, &p, members, &RULES, 0.5).unwrap().clusters[0].clone()
    }

    #[test]
    fn majority_cluster_gets_heuristic_label() {
        let mut members = vec![hv([1, 0, 0, 0, 0]); 8];
        members.extend(vec![hv([0; 5]); 2]);
        let c = one_cluster(&members);
        assert_eq!(c.label, Label::Heuristic(HeuristicId(1)));
        assert_eq!((c.dominant, c.dominant_count, c.dominant_fraction), (Some(HeuristicId(1)), 8, 0.8));
    }

    #[test]
    fn minority_cluster_is_none_but_aligned() {
        let mut members = vec![hv([0, 1, 0, 0, 0]); 10];
        members.extend(vec![hv([0; 5]); 90]);
        let c = one_cluster(&members);
        assert_eq!(c.label, Label::None);
        assert_eq!((c.dominant, c.dominant_count, c.dominant_fraction), (Some(HeuristicId(2)), 10, 0.1));
    }

    #[test]
    fn dominant_ties_go_to_lowest_index() {
        let c = one_cluster(&[hv([0, 0, 1, 0, 0]), hv([0, 1, 0, 0, 0])]);
        assert_eq!(c.dominant, Some(HeuristicId(2)));
    }

    #[test]
    fn prediction_paths() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 10.0), (10.0, 11.0)]);
        let h = [hv([0, 0, 1, 0, 0]), hv([0; 5]), hv([0; 5]), hv([0; 5])];
        let (m, _) = kmeans_fit(&p, params(2, 1)).unwrap();
        assert_eq!(predict_label(&m, &[0.0, 0.0], None), Err(ClusterError::UnlabeledModel));
        let m = label_clusters(m, &p, &h, &RULES, 0.5).unwrap();
        // Near the H3-aligned cluster, no symbolic match.
        let r = predict_label(&m, &[0.1, 0.5], Some(&hv([0; 5]))).unwrap();
        assert_eq!(r.label, Label::Heuristic(HeuristicId(3)));
        assert_eq!(r.aligned_heuristic, Some(HeuristicId(3)));
        assert_eq!(r.confidence, 0.5);
        // Symbolic override.
        let r = predict_label(&m, &[10.0, 10.0], Some(&hv([0, 1, 0, 1, 0]))).unwrap();
        assert_eq!((r.label, r.confidence), (Label::Heuristic(HeuristicId(2)), 1.0));
        // The far cluster has no matched members.
        let r = predict_label(&m, &[10.0, 10.0], None).unwrap();
        assert_eq!((r.label, r.aligned_heuristic), (Label::None, None));
    }

    #[test]
    fn labels_round_trip_as_strings() {
        for s in ["H1", "H5", "H12", "None"] {
            assert_eq!(s.parse::<Label>().unwrap().to_string(), s);
        }
        assert!("H0".parse::<Label>().is_err());
        assert!("X1".parse::<Label>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn converged_assignments_are_nearest(
                raw in proptest::collection::vec((-50f64..50.0, -50f64..50.0, -5f64..5.0), 3..40),
                k in 1usize..4,
                seed in 0u64..1000,
            ) {
                let p: Vec<Vec<f64>> = raw.iter().map(|&(a, b, c)| vec![a, b, c]).collect();
                prop_assume!(p.len() >= k);
                let (m, a) = kmeans_fit(&p, params(k, seed)).unwrap();
                let mut total = 0.0;
                for (x, &c) in p.iter().zip(&a) {
                    let (n, d) = nearest(&m.centroids, x);
                    prop_assert_eq!(n, c);
                    total += d;
                }
                prop_assert!((total - m.inertia).abs() <= 1e-9 * (1.0 + total));
            }

            #[test]
            fn every_cluster_gets_one_label(bits in proptest::collection::vec(proptest::collection::vec(0u8..2, 5), 4..30), seed in 0u64..100) {
                let p: Vec<Vec<f64>> = bits.iter().enumerate().map(|(i, b)| {
                    let mut v: Vec<f64> = b.iter().map(|&x| f64::from(x)).collect();
                    v.push(i as f64 * 1e-3);
                    v
                }).collect();
                let h: Vec<HeuristicVector> = bits.iter().map(|b| HeuristicVector::from_bits(b.clone())).collect();
                let (m, _) = kmeans_fit(&p, params(2, seed)).unwrap();
                let m = label_clusters(m, &p, &h, &RULES, 0.5).unwrap();
                prop_assert_eq!(m.clusters.len(), 2);
                for c in &m.clusters {
                    prop_assert!(c.label.is_none() || c.label.heuristic() == c.dominant);
                }
            }
        }
    }
}
