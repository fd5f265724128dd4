use std::fmt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cluster::{kmeans, KMeansParams};
use crate::exec::Exec;
use crate::{seed, Error, Result};

/// Indices of (anchor, positive, negative) audio clips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveRule {
    Random,
    /// Nearest neighbour in visual feature space.
    Distance,
    /// Uniform within the anchor's visual cluster.
    Cluster,
    /// Uniform within the anchor's true class (evaluation only).
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeRule {
    Random,
    /// Farthest sample in visual feature space.
    Distance,
    /// Uniform over samples in other visual clusters.
    Cluster,
    /// Uniform over samples of other true classes (evaluation only).
    GroundTruth,
}

macro_rules! rule_names {
    ($t:ty) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self {
                    Self::Random => "random",
                    Self::Distance => "distance",
                    Self::Cluster => "cluster",
                    Self::GroundTruth => "ground_truth",
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    "random" => Some(Self::Random),
                    "distance" => Some(Self::Distance),
                    "cluster" => Some(Self::Cluster),
                    "ground_truth" | "gt" => Some(Self::GroundTruth),
                    _ => None,
                }
            }
        }
    };
}
rule_names!(PositiveRule);
rule_names!(NegativeRule);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingMechanism {
    pub positive: PositiveRule,
    pub negative: NegativeRule,
}

impl SamplingMechanism {
    pub const RANDOM: Self = Self {
        positive: PositiveRule::Random,
        negative: NegativeRule::Random,
    };
    pub const DISTANCE_CLUSTER: Self = Self {
        positive: PositiveRule::Distance,
        negative: NegativeRule::Cluster,
    };
    pub const GROUND_TRUTH: Self = Self {
        positive: PositiveRule::GroundTruth,
        negative: NegativeRule::GroundTruth,
    };

    /// Parses `positive/negative`, e.g. `distance/cluster`; a single name
    /// applies to both sides.
    pub fn parse(s: &str) -> Option<Self> {
        let (p, n) = s.split_once('/').unwrap_or((s, s));
        Some(Self {
            positive: PositiveRule::parse(p.trim())?,
            negative: NegativeRule::parse(n.trim())?,
        })
    }

    pub fn needs_clusters(self) -> bool {
        self.positive == PositiveRule::Cluster || self.negative == NegativeRule::Cluster
    }

    pub fn needs_truth(self) -> bool {
        self.positive == PositiveRule::GroundTruth || self.negative == NegativeRule::GroundTruth
    }
}

impl fmt::Display for SamplingMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.positive.name(), self.negative.name())
    }
}

/// Side information some rules need: visual cluster ids and, for the
/// evaluation harness only, true classes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Guide<'a> {
    pub clusters: Option<&'a [usize]>,
    pub truth: Option<&'a [usize]>,
}

/// k-means on visual features (ten restarts).
pub fn cluster_visual(features: &Array2<f64>, k: usize, cluster_seed: u64, exec: Exec) -> Result<Vec<usize>> {
    Ok(kmeans(features, &KMeansParams::new(k, cluster_seed), exec)?.labels)
}

fn groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut g = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        g[l].push(i);
    }
    g
}

fn sq_dist(f: &Array2<f64>, i: usize, j: usize) -> f64 {
    f.row(i).iter().zip(f.row(j)).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Nearest (ties: lowest index) and farthest (ties: lowest index) other
/// sample for every row.
fn extremes(f: &Array2<f64>) -> (Vec<usize>, Vec<usize>) {
    let n = f.nrows();
    (0..n)
        .map(|i| {
            let (mut near, mut far) = ((usize::MAX, f64::INFINITY), (usize::MAX, f64::NEG_INFINITY));
            for j in (0..n).filter(|&j| j != i) {
                let d = sq_dist(f, i, j);
                if d < near.1 {
                    near = (j, d);
                }
                if d > far.1 {
                    far = (j, d);
                }
            }
            (near.0, far.0)
        })
        .unzip()
}

fn pick_other(rng: &mut impl Rng, pool: &[usize], avoid: &[usize]) -> Option<usize> {
    let avail = pool.iter().filter(|i| !avoid.contains(i)).count();
    if avail == 0 {
        return None;
    }
    let mut k = rng.random_range(0..avail);
    for &i in pool {
        if !avoid.contains(&i) {
            if k == 0 {
                return Some(i);
            }
            k -= 1;
        }
    }
    None
}

fn pick_outside(rng: &mut impl Rng, n: usize, labels: &[usize], label: usize, avoid: &[usize]) -> Option<usize> {
    let pool: Vec<usize> = (0..n).filter(|&i| labels[i] != label).collect();
    pick_other(rng, &pool, avoid)
}

const ANCHOR_RETRIES: usize = 1000;

/// Forms `n` triplets with anchors drawn uniformly with replacement.
pub fn sample_triplets(
    features: &Array2<f64>,
    mechanism: SamplingMechanism,
    guide: &Guide,
    n: usize,
    sample_seed: u64,
) -> Result<Vec<Triplet>> {
    let m = features.nrows();
    if m < 3 {
        return Err(Error::input(format!("need at least 3 samples, got {m}")));
    }
    if n == 0 {
        return Err(Error::input("triplet count must be positive"));
    }
    let need = |labels: Option<&[usize]>, what: &str| -> Result<Vec<usize>> {
        let l = labels.ok_or_else(|| Error::input(format!("{mechanism} sampling needs {what}")))?;
        if l.len() != m {
            return Err(Error::input(format!("{} {what} for {m} samples", l.len())));
        }
        Ok(l.to_vec())
    };
    let clusters = if mechanism.needs_clusters() { need(guide.clusters, "cluster ids")? } else { Vec::new() };
    let truth = if mechanism.needs_truth() { need(guide.truth, "true classes")? } else { Vec::new() };
    if !clusters.is_empty() {
        let k = groups(&clusters).iter().filter(|g| !g.is_empty()).count();
        if m < k + 1 {
            return Err(Error::input(format!("need at least {} samples for {k} clusters", k + 1)));
        }
    }
    let cluster_groups = groups(&clusters);
    let truth_groups = groups(&truth);
    let uses_distance =
        mechanism.positive == PositiveRule::Distance || mechanism.negative == NegativeRule::Distance;
    let (nearest, farthest) = if uses_distance { extremes(features) } else { (Vec::new(), Vec::new()) };
    let all: Vec<usize> = (0..m).collect();

    let mut rng = seed::rng(sample_seed, 0x7219);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut tries = 0;
        let triplet = loop {
            tries += 1;
            if tries > ANCHOR_RETRIES {
                return Err(Error::input(format!(
                    "no valid triplet found for {mechanism} after {ANCHOR_RETRIES} anchors"
                )));
            }
            let a = rng.random_range(0..m);
            let p = match mechanism.positive {
                PositiveRule::Random => pick_other(&mut rng, &all, &[a]),
                PositiveRule::Distance => Some(nearest[a]),
                PositiveRule::Cluster => pick_other(&mut rng, &cluster_groups[clusters[a]], &[a]),
                PositiveRule::GroundTruth => pick_other(&mut rng, &truth_groups[truth[a]], &[a]),
            };
            let Some(p) = p else { continue };
            let q = match mechanism.negative {
                NegativeRule::Random => pick_other(&mut rng, &all, &[a, p]),
                NegativeRule::Distance if farthest[a] != p => Some(farthest[a]),
                NegativeRule::Distance => (0..m)
                    .filter(|&j| j != a && j != p)
                    .max_by(|&x, &y| sq_dist(features, a, x).total_cmp(&sq_dist(features, a, y)).then(y.cmp(&x))),
                NegativeRule::Cluster => pick_outside(&mut rng, m, &clusters, clusters[a], &[a, p]),
                NegativeRule::GroundTruth => pick_outside(&mut rng, m, &truth, truth[a], &[a, p]),
            };
            if let Some(q) = q {
                break Triplet { anchor: a, positive: p, negative: q };
            }
        };
        out.push(triplet);
    }
    Ok(out)
}

fn is_correct(t: &Triplet, truth: &[usize]) -> bool {
    truth[t.anchor] == truth[t.positive] && truth[t.anchor] != truth[t.negative]
}

/// Fraction of triplets whose anchor and positive share a true class that
/// the negative does not. Zero for an empty list.
pub fn triplet_correctness(triplets: &[Triplet], truth: &[usize]) -> f64 {
    if triplets.is_empty() {
        return 0.0;
    }
    triplets.iter().filter(|t| is_correct(t, truth)).count() as f64 / triplets.len() as f64
}

/// Edits triplets until exactly `round(target * n)` are correct. Correct
/// triplets are broken by swapping in a positive from another class (or a
/// negative from the anchor's class); incorrect ones are repaired by
/// redrawing both partners from the truth.
pub fn corrupt_triplets(
    triplets: &[Triplet],
    truth: &[usize],
    target_correct_ratio: f64,
    corrupt_seed: u64,
) -> Result<Vec<Triplet>> {
    if !(0.0..=1.0).contains(&target_correct_ratio) {
        return Err(Error::input("target ratio must lie in [0, 1]"));
    }
    if let Some(t) = triplets.iter().find(|t| t.anchor.max(t.positive).max(t.negative) >= truth.len()) {
        return Err(Error::input(format!("triplet {t:?} indexes past {} labels", truth.len())));
    }
    let n = truth.len();
    let classes = groups(truth);
    let mut out = triplets.to_vec();
    let target = (target_correct_ratio * out.len() as f64).round() as usize;
    let mut correct = out.iter().filter(|t| is_correct(t, truth)).count();
    let mut rng = seed::rng(corrupt_seed, 0xC0);
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.shuffle(&mut rng);

    for &i in &order {
        if correct == target {
            break;
        }
        let t = out[i];
        let a = t.anchor;
        let la = truth[a];
        if correct > target && is_correct(&t, truth) {
            if let Some(p) = pick_outside(&mut rng, n, truth, la, &[a, t.negative]) {
                out[i].positive = p;
            } else if let Some(q) = pick_other(&mut rng, &classes[la], &[a, t.positive]) {
                out[i].negative = q;
            } else {
                continue;
            }
            correct -= 1;
        } else if correct < target && !is_correct(&t, truth) {
            let Some(p) = pick_other(&mut rng, &classes[la], &[a]) else { continue };
            let Some(q) = pick_outside(&mut rng, n, truth, la, &[a, p]) else { continue };
            out[i].positive = p;
            out[i].negative = q;
            correct += 1;
        }
    }
    if correct != target {
        return Err(Error::input(format!(
            "cannot reach {target} correct triplets of {} with these labels",
            out.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n_per: usize, k: usize) -> (Array2<f64>, Vec<usize>) {
        let truth: Vec<usize> = (0..n_per * k).map(|i| i % k).collect();
        let f = Array2::from_shape_fn((n_per * k, 2), |(i, j)| {
            (truth[i] * 100) as f64 + ((i * 7 + j * 3) % 5) as f64 * 0.1
        });
        (f, truth)
    }

    #[test]
    fn random_rate_matches_analytic() {
        let (f, truth) = separable(200, 5);
        let t = sample_triplets(&f, SamplingMechanism::RANDOM, &Guide::default(), 10_000, 1).unwrap();
        let c = triplet_correctness(&t, &truth);
        assert!((c - 0.16).abs() < 0.02, "{c}");
    }

    #[test]
    fn separable_distance_cluster_is_perfect() {
        let (f, truth) = separable(20, 4);
        let clusters = cluster_visual(&f, 4, 2, Exec::Sequential).unwrap();
        let guide = Guide { clusters: Some(&clusters), truth: None };
        let t = sample_triplets(&f, SamplingMechanism::DISTANCE_CLUSTER, &guide, 500, 3).unwrap();
        assert_eq!(triplet_correctness(&t, &truth), 1.0);
    }

    #[test]
    fn ground_truth_is_perfect_and_distinct() {
        let (f, truth) = separable(5, 3);
        let guide = Guide { clusters: None, truth: Some(&truth) };
        let t = sample_triplets(&f, SamplingMechanism::GROUND_TRUTH, &guide, 300, 4).unwrap();
        assert_eq!(triplet_correctness(&t, &truth), 1.0);
        assert!(t.iter().all(|t| t.anchor != t.positive && t.anchor != t.negative && t.positive != t.negative));
    }

    #[test]
    fn missing_guide_is_error() {
        let (f, _) = separable(5, 3);
        assert!(sample_triplets(&f, SamplingMechanism::GROUND_TRUTH, &Guide::default(), 3, 0).is_err());
    }

    #[test]
    fn correctness_counts() {
        let truth = [0, 0, 1, 1];
        let t = |a, p, n| Triplet { anchor: a, positive: p, negative: n };
        let list = [t(0, 1, 2), t(2, 3, 0), t(1, 0, 3), t(0, 2, 3)];
        assert_eq!(triplet_correctness(&list, &truth), 0.75);
        assert_eq!(triplet_correctness(&[t(0, 1, 1)], &[0, 0]), 0.0);
    }

    #[test]
    fn corruption_hits_target() {
        let (f, truth) = separable(20, 5);
        let guide = Guide { clusters: None, truth: Some(&truth) };
        let t = sample_triplets(&f, SamplingMechanism::GROUND_TRUTH, &guide, 1000, 5).unwrap();
        assert_eq!(corrupt_triplets(&t, &truth, 1.0, 0).unwrap(), t);
        for target in [0.0, 0.5, 0.8] {
            let c = corrupt_triplets(&t, &truth, target, 7).unwrap();
            assert!((triplet_correctness(&c, &truth) - target).abs() < 1e-12);
        }
        let r = sample_triplets(&f, SamplingMechanism::RANDOM, &Guide::default(), 1000, 5).unwrap();
        let up = corrupt_triplets(&r, &truth, 0.9, 1).unwrap();
        assert!((triplet_correctness(&up, &truth) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn single_class_cannot_be_made_correct() {
        let truth = vec![0; 6];
        let t = vec![Triplet { anchor: 0, positive: 1, negative: 2 }];
        assert!(corrupt_triplets(&t, &truth, 1.0, 0).is_err());
        assert!(corrupt_triplets(&t, &truth, 0.0, 0).is_ok());
    }

    #[test]
    fn mechanism_parsing() {
        assert_eq!(SamplingMechanism::parse("distance/cluster"), Some(SamplingMechanism::DISTANCE_CLUSTER));
        assert_eq!(SamplingMechanism::parse("random"), Some(SamplingMechanism::RANDOM));
        assert_eq!(SamplingMechanism::DISTANCE_CLUSTER.to_string(), "distance/cluster");
        assert!(SamplingMechanism::parse("nearest").is_none());
    }
}
