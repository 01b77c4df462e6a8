//! Backward scenario reduction and k-means clustering.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::scenarios::{features, FeatureOptions, Origin, ScenarioSet};

const KMEANS_MAX_ITER: usize = 300;
const KMEANS_TOL: f64 = 1e-6;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise Euclidean distances between feature vectors.
pub fn kantorovich_matrix(features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = features.len();
    if n < 2 {
        return Err(Error::Domain("need at least two scenarios".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::Domain("feature vectors differ in length".into()));
    }
    let mut kd = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist2(&features[i], &features[j]).sqrt();
            kd[i][j] = d;
            kd[j][i] = d;
        }
    }
    Ok(kd)
}

/// One elimination of the backward reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub removed_id: usize,
    pub absorbed_by: usize,
    pub pd_value: f64,
    /// Probability mass of the survivors after this step.
    pub total_prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub steps: Vec<TraceStep>,
}

impl ReductionTrace {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "iteration,removed_id,absorbed_by,pd_value")?;
        for s in &self.steps {
            writeln!(w, "{},{},{},{}", s.iteration, s.removed_id, s.absorbed_by, s.pd_value)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Greedy backward elimination on raw feature vectors.
///
/// Each round pairs every survivor with its nearest surviving neighbour,
/// removes the survivor with the smallest `p_i · KD(i, nearest)` and adds
/// its probability to that neighbour. Ties go to the lowest index. Returns
/// the surviving indices in ascending order, their probabilities and the
/// trace (ids are input indices).
pub fn backward_reduce_features(
    features: &[Vec<f64>],
    probs: &[f64],
    target: usize,
) -> Result<(Vec<usize>, Vec<f64>, ReductionTrace)> {
    let n = features.len();
    if probs.len() != n {
        return Err(Error::Domain("one probability per scenario required".into()));
    }
    if target < 1 || target > n {
        return Err(Error::Domain(format!("target {target} outside 1..={n}")));
    }
    let mut p = probs.to_vec();
    let mut alive = vec![true; n];
    let mut trace = ReductionTrace::default();
    if target < n {
        let kd = kantorovich_matrix(features)?;
        for iteration in 1..=n - target {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in (0..n).filter(|&i| alive[i]) {
                let mut nearest: Option<(f64, usize)> = None;
                for j in (0..n).filter(|&j| alive[j] && j != i) {
                    if nearest.is_none_or(|(d, _)| kd[i][j] < d) {
                        nearest = Some((kd[i][j], j));
                    }
                }
                let (d, j) = nearest.expect("at least two survivors");
                let pd = p[i] * d;
                if best.is_none_or(|(b, _, _)| pd < b) {
                    best = Some((pd, i, j));
                }
            }
            let (pd, i, j) = best.expect("at least two survivors");
            alive[i] = false;
            p[j] += p[i];
            p[i] = 0.0;
            let total_prob = (0..n).filter(|&k| alive[k]).map(|k| p[k]).sum();
            trace.steps.push(TraceStep {
                iteration,
                removed_id: i,
                absorbed_by: j,
                pd_value: pd,
                total_prob,
            });
        }
    }
    let survivors: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let kept = survivors.iter().map(|&i| p[i]).collect();
    Ok((survivors, kept, trace))
}

/// Backward reduction of a scenario set to `target` original days.
///
/// Trace ids are original day indices where the input carries them.
pub fn backward_reduce(
    set: &ScenarioSet,
    target: usize,
    opts: FeatureOptions,
) -> Result<(ScenarioSet, ReductionTrace)> {
    if target < 1 || target > set.len() {
        return Err(Error::Domain(format!("target {target} outside 1..={}", set.len())));
    }
    if target == set.len() {
        return Ok((set.clone(), ReductionTrace::default()));
    }
    let feats = features(set, opts)?;
    let probs: Vec<f64> = set.scenarios.iter().map(|s| s.prob).collect();
    let (survivors, kept, mut trace) = backward_reduce_features(&feats, &probs, target)?;
    let id = |i: usize| match set.origin[i] {
        Origin::Day(d) => d,
        Origin::Centroid(_) => i,
    };
    for s in &mut trace.steps {
        s.removed_id = id(s.removed_id);
        s.absorbed_by = id(s.absorbed_by);
    }
    let scenarios = survivors
        .iter()
        .zip(kept)
        .map(|(&i, p)| Scenario {
            prob: p,
            ..set.scenarios[i].clone()
        })
        .collect();
    let origin = survivors.iter().map(|&i| set.origin[i]).collect();
    Ok((ScenarioSet { scenarios, origin }, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    pub iterations: usize,
}

fn nearest_center(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = dist2(x, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans_features(features: &[Vec<f64>], k: usize, seed: u64) -> Result<KmeansFit> {
    let n = features.len();
    if k < 1 || k > n {
        return Err(Error::Domain(format!("k = {k} outside 1..={n}")));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::Domain("feature vectors differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![features[first].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = features.iter().map(|x| nearest_center(x, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[next] = true;
        centroids.push(features[next].clone());
    }

    let mut assignments = vec![0; n];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        for (i, x) in features.iter().enumerate() {
            assignments[i] = nearest_center(x, &centroids).0;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, x) in features.iter().enumerate() {
            counts[assignments[i]] += 1;
            sums[assignments[i]].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let new = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // re-seed an empty cluster at the point worst served
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(&features[a], &centroids[assignments[a]]);
                        let db = dist2(&features[b], &centroids[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("nonempty");
                assignments[far] = c;
                features[far].clone()
            };
            shift = shift.max(dist2(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift <= KMEANS_TOL {
            break;
        }
    }
    for (i, x) in features.iter().enumerate() {
        assignments[i] = nearest_center(x, &centroids).0;
    }
    let wcss = features
        .iter()
        .zip(&assignments)
        .map(|(x, &c)| dist2(x, &centroids[c]))
        .sum();
    Ok(KmeansFit {
        assignments,
        centroids,
        wcss,
        iterations,
    })
}

/// Clusters days on scaled features; each nonempty cluster becomes one
/// scenario whose series are the member means in original units and whose
/// probability is its share of members.
pub fn kmeans_reduce(set: &ScenarioSet, k: usize, seed: u64, opts: FeatureOptions) -> Result<ScenarioSet> {
    if k < 1 || k > set.len() {
        return Err(Error::Domain(format!("k = {k} outside 1..={}", set.len())));
    }
    let feats = features(set, opts)?;
    let fit = kmeans_features(&feats, k, seed)?;
    let n = set.len() as f64;
    let steps = set.scenarios[0].steps();
    let mut scenarios = Vec::new();
    let mut origin = Vec::new();
    for c in 0..k {
        let members: Vec<&Scenario> = (0..set.len())
            .filter(|&i| fit.assignments[i] == c)
            .map(|i| &set.scenarios[i])
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let mean = |f: fn(&Scenario) -> &Vec<f64>| -> Vec<f64> {
            (0..steps)
                .map(|t| members.iter().map(|s| f(s)[t]).sum::<f64>() / m)
                .collect()
        };
        scenarios.push(Scenario {
            prob: m / n,
            load_e: mean(|s| &s.load_e),
            load_h: mean(|s| &s.load_h),
            load_c: mean(|s| &s.load_c),
            wind_speed: mean(|s| &s.wind_speed),
            irradiance: mean(|s| &s.irradiance),
            price_e: mean(|s| &s.price_e),
        });
        origin.push(Origin::Centroid(c));
    }
    Ok(ScenarioSet { scenarios, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn scalar_distances() {
        let kd = kantorovich_matrix(&scalars(&[0.0, 1.0, 10.0])).unwrap();
        assert_eq!(kd[0][1], 1.0);
        assert_eq!(kd[0][2], 10.0);
        assert_eq!(kd[1][2], 9.0);
        assert_eq!(kd[2][1], 9.0);
        assert!((0..3).all(|i| kd[i][i] == 0.0));
        assert!(kantorovich_matrix(&scalars(&[1.0])).is_err());
        assert!(kantorovich_matrix(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn hand_traced_reduction() {
        let (keep, p, trace) = backward_reduce_features(&scalars(&[0.0, 1.0, 10.0]), &[0.5, 0.3, 0.2], 2).unwrap();
        assert_eq!(keep, vec![0, 2]);
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
        assert_eq!(trace.steps.len(), 1);
        let step = &trace.steps[0];
        assert_eq!((step.removed_id, step.absorbed_by), (1, 0));
        assert!((step.pd_value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn reduction_edge_targets() {
        let f = scalars(&[0.0, 1.0, 10.0]);
        let probs = [0.5, 0.3, 0.2];
        let (keep, p, trace) = backward_reduce_features(&f, &probs, 3).unwrap();
        assert_eq!((keep, p, trace.steps.len()), (vec![0, 1, 2], probs.to_vec(), 0));
        let (keep, p, _) = backward_reduce_features(&f, &probs, 1).unwrap();
        assert_eq!(keep.len(), 1);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(backward_reduce_features(&f, &probs, 0).is_err());
        assert!(backward_reduce_features(&f, &probs, 4).is_err());
    }

    #[test]
    fn kmeans_scalar_examples() {
        let one = kmeans_features(&scalars(&[0.0, 1.0, 10.0]), 1, 1).unwrap();
        assert!((one.centroids[0][0] - 11.0 / 3.0).abs() < 1e-12);
        let all = kmeans_features(&scalars(&[0.0, 1.0, 10.0]), 3, 1).unwrap();
        let mut c: Vec<f64> = all.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 1.0, 10.0]);
        let dup = kmeans_features(&scalars(&[2.0, 2.0, 5.0, 5.0, 5.0, 9.0]), 3, 4).unwrap();
        let mut c: Vec<f64> = dup.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![2.0, 5.0, 9.0]);
        assert!(kmeans_features(&scalars(&[1.0]), 2, 0).is_err());
    }

    fn random_set() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (2usize..=12, 1usize..=4).prop_flat_map(|(n, dim)| {
            (
                prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n),
                prop::collection::vec(0.01f64..1.0, n),
            )
                .prop_map(|(f, w)| {
                    let t: f64 = w.iter().sum();
                    (f, w.iter().map(|x| x / t).collect())
                })
        })
    }

    proptest! {
        #[test]
        fn first_removal_is_brute_force_argmin((f, p) in random_set()) {
            let n = f.len();
            let (_, _, trace) = backward_reduce_features(&f, &p, n - 1).unwrap();
            let mut best = (f64::INFINITY, usize::MAX);
            for i in 0..n {
                let d = (0..n).filter(|&j| j != i).map(|j| dist2(&f[i], &f[j]).sqrt()).fold(f64::INFINITY, f64::min);
                if p[i] * d < best.0 {
                    best = (p[i] * d, i);
                }
            }
            prop_assert_eq!(trace.steps[0].removed_id, best.1);
        }

        #[test]
        fn probability_conserved_every_step((f, p) in random_set()) {
            let (_, kept, trace) = backward_reduce_features(&f, &p, 1).unwrap();
            for s in &trace.steps {
                prop_assert!((s.total_prob - 1.0).abs() <= 1e-12);
            }
            prop_assert!((kept.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn kmeans_is_deterministic((f, _p) in random_set(), seed in 0u64..1000) {
            let k = 1 + (seed as usize) % f.len();
            prop_assert_eq!(kmeans_features(&f, k, seed).unwrap(), kmeans_features(&f, k, seed).unwrap());
        }
    }
}
