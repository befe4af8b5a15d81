use rand::Rng;

use super::{sq_dist, Partition, PointSet};
use crate::seed;
use crate::Result;

/// k-means settings. Each restart runs k-means++ seeding, Lloyd iterations and
/// a single-point-move polish; the lowest-inertia restart wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub max_iter: usize,
    /// Stop when the relative inertia change drops below this.
    pub tol: f64,
    pub n_init: usize,
}

impl Default for KMeans {
    fn default() -> Self {
        KMeans { max_iter: 300, tol: 1e-6, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub partition: Partition,
    /// Centre of each cluster, indexed like the partition labels.
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
}

/// k-means with default settings except `max_iter`.
pub fn kmeans(points: &PointSet, m: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    KMeans { max_iter, ..KMeans::default() }.fit(points, m, seed)
}

struct Run {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    inertia: f64,
    iterations: usize,
    history: Vec<f64>,
}

impl KMeans {
    pub fn fit(&self, points: &PointSet, m: usize, seed: u64) -> Result<KMeansResult> {
        points.check_count(m)?;
        let mut best: Option<Run> = None;
        for r in 0..self.n_init.max(1) {
            let run = self.single(points, m, seed::derive(seed, r as u64));
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        let run = best.expect("at least one restart");
        let partition = Partition::from_labels(&run.labels);
        // Reorder centres to follow the canonical labels.
        let mut centers = vec![Vec::new(); m];
        for (raw, canon) in run.labels.iter().zip(partition.assignment()) {
            if centers[*canon].is_empty() {
                centers[*canon] = run.centers[*raw].clone();
            }
        }
        Ok(KMeansResult {
            partition,
            centers,
            inertia: run.inertia,
            iterations: run.iterations,
            history: run.history,
        })
    }

    fn single(&self, points: &PointSet, m: usize, seed: u64) -> Run {
        let mut rng = seed::rng(seed);
        let mut centers = plus_plus(points, m, &mut rng);
        let mut labels = vec![0usize; points.len()];
        let mut history = Vec::new();
        let mut prev = f64::INFINITY;
        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            assign(points, &centers, &mut labels);
            fill_empty(points, &mut centers, &mut labels, m);
            centers = means(points, &labels, m);
            let inertia = inertia(points, &centers, &labels);
            history.push(inertia);
            let converged = inertia == 0.0 || (prev - inertia).abs() <= self.tol * prev.abs();
            prev = inertia;
            if converged {
                break;
            }
        }
        hartigan(points, &mut centers, &mut labels);
        let inertia = inertia(points, &centers, &labels);
        Run { labels, centers, inertia, iterations, history }
    }
}

fn plus_plus(points: &PointSet, m: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points.get(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = points.points().iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.get(pick).to_vec();
        for (d, p) in d2.iter_mut().zip(points.points()) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

fn assign(points: &PointSet, centers: &[Vec<f64>], labels: &mut [usize]) {
    for (l, p) in labels.iter_mut().zip(points.points()) {
        *l = nearest(p, centers);
    }
}

/// An empty cluster takes over the point farthest from its own centre among
/// clusters that can spare one.
fn fill_empty(points: &PointSet, centers: &mut [Vec<f64>], labels: &mut [usize], m: usize) {
    loop {
        let mut sizes = vec![0usize; m];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = (f64::NEG_INFINITY, 0);
        for (i, p) in points.points().iter().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centers[labels[i]]);
            if d > far.0 {
                far = (d, i);
            }
        }
        labels[far.1] = empty;
        centers[empty] = points.get(far.1).to_vec();
    }
}

fn means(points: &PointSet, labels: &[usize], m: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; points.dim()]; m];
    let mut counts = vec![0usize; m];
    for (p, &l) in points.points().iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= c as f64;
        }
    }
    sums
}

fn inertia(points: &PointSet, centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    points.points().iter().zip(labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum()
}

/// Moves single points between clusters while any move lowers inertia.
fn hartigan(points: &PointSet, centers: &mut [Vec<f64>], labels: &mut [usize]) {
    let m = centers.len();
    let mut sizes = vec![0usize; m];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut improved = true;
    let mut sweeps = 0;
    while improved && sweeps < 1000 {
        improved = false;
        sweeps += 1;
        for (i, p) in points.points().iter().enumerate() {
            let a = labels[i];
            if sizes[a] < 2 {
                continue;
            }
            let na = sizes[a] as f64;
            let loss = na / (na - 1.0) * sq_dist(p, &centers[a]);
            let mut best = (0.0, a);
            for b in (0..m).filter(|&b| b != a) {
                let nb = sizes[b] as f64;
                let delta = nb / (nb + 1.0) * sq_dist(p, &centers[b]) - loss;
                if delta < best.0 - 1e-12 * loss.max(1e-300) {
                    best = (delta, b);
                }
            }
            let b = best.1;
            if b == a {
                continue;
            }
            let nb = sizes[b] as f64;
            for (c, v) in centers[a].iter_mut().zip(p) {
                *c = (*c * na - v) / (na - 1.0);
            }
            for (c, v) in centers[b].iter_mut().zip(p) {
                *c = (*c * nb + v) / (nb + 1.0);
            }
            sizes[a] -= 1;
            sizes[b] += 1;
            labels[i] = b;
            improved = true;
        }
    }
    // Refresh centres exactly to shed accumulated rounding.
    let exact = means(points, labels, m);
    centers.clone_from_slice(&exact);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_points(n: usize, seed: u64) -> PointSet {
        let mut rng = seed::rng(seed);
        PointSet::new((0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect()).unwrap()
    }

    /// Minimum inertia over all 2^n two-cluster assignments.
    fn brute_force_two(points: &PointSet) -> (f64, Partition) {
        let n = points.len();
        let mut best = (f64::INFINITY, Partition::from_labels(&[]));
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let centers = means(points, &labels, 2);
            let v = inertia(points, &centers, &labels);
            if v < best.0 {
                best = (v, Partition::from_labels(&labels));
            }
        }
        best
    }

    #[test]
    fn matches_exhaustive_two_cluster_optimum() {
        for s in 0..30 {
            let pts = random_points(6, 100 + s);
            let (opt, part) = brute_force_two(&pts);
            let got = kmeans(&pts, 2, s, 300).unwrap();
            assert!((got.inertia - opt).abs() < 1e-9, "seed {s}: {} vs {opt}", got.inertia);
            assert_eq!(got.partition, part);
        }
    }

    #[test]
    fn distinct_locations_converge_immediately() {
        let pts = PointSet::new(vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![-3.0, 9.0]]).unwrap();
        let r = kmeans(&pts, 3, 1, 300).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.partition.clusters(), 3);
    }

    #[test]
    fn inertia_non_increasing_and_locally_optimal() {
        let pts = random_points(80, 3);
        let r = kmeans(&pts, 5, 9, 300).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(r.inertia <= *r.history.last().unwrap() + 1e-12);
        // No single-point move lowers inertia.
        let labels = r.partition.assignment().to_vec();
        for i in 0..pts.len() {
            for b in 0..5 {
                let mut moved = labels.clone();
                moved[i] = b;
                if moved.iter().filter(|&&l| l == labels[i]).count() == 0 {
                    continue;
                }
                let c = means(&pts, &moved, 5);
                assert!(inertia(&pts, &c, &moved) >= r.inertia - 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let pts = random_points(50, 4);
        let a = kmeans(&pts, 4, 77, 300).unwrap();
        assert_eq!(a, kmeans(&pts, 4, 77, 300).unwrap());
    }

    #[test]
    fn every_cluster_occupied_with_duplicates() {
        let pts = PointSet::new(vec![vec![1.0]; 5]).unwrap();
        let r = kmeans(&pts, 3, 0, 300).unwrap();
        assert_eq!(r.partition.clusters(), 3);
        assert!(kmeans(&pts, 6, 0, 300).is_err());
    }
}
