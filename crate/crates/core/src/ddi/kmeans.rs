//! Weighted k-means under the metric-weighted strain distance `C·Δε·Δε`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::phase_space::kdtree::{dist_sq, KdTree};
use crate::phase_space::{Mandel, Metric};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct KMeans {
    pub centroids: Vec<Mandel>,
    /// Cluster of every input point.
    pub assignment: Vec<usize>,
    pub cluster_weights: Vec<f64>,
    /// `Σ w C(ε − ε*)·(ε − ε*)`.
    pub inertia: f64,
    pub iterations: usize,
}

/// Binary tree of partial sums supporting point updates and sampling by
/// cumulative weight. Sums are recomputed from the children on every update,
/// so no rounding drift builds up.
struct SumTree {
    size: usize,
    tree: Vec<f64>,
}

impl SumTree {
    fn new(values: &[f64]) -> Self {
        let size = values.len().next_power_of_two();
        let mut tree = vec![0.0; 2 * size];
        tree[size..size + values.len()].copy_from_slice(values);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i] + tree[2 * i + 1];
        }
        Self { size, tree }
    }

    fn total(&self) -> f64 {
        self.tree[1]
    }

    fn set(&mut self, i: usize, v: f64) {
        let mut k = self.size + i;
        self.tree[k] = v;
        while k > 1 {
            k /= 2;
            self.tree[k] = self.tree[2 * k] + self.tree[2 * k + 1];
        }
    }

    /// Leaf whose cumulative range contains `r`; never returns a zero leaf.
    fn find(&self, mut r: f64) -> usize {
        let mut k = 1;
        while k < self.size {
            let l = self.tree[2 * k];
            if (r < l && l > 0.0) || self.tree[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                r -= l;
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}

/// Collapses identical points, summing their weights. Returns the distinct
/// points (first-occurrence order), their weights and the point-to-distinct map.
fn dedup(points: &[[f64; 3]], weights: &[f64]) -> (Vec<[f64; 3]>, Vec<f64>, Vec<usize>) {
    let mut seen: HashMap<[u64; 3], usize> = HashMap::with_capacity(points.len());
    let mut uniq = Vec::new();
    let mut w = Vec::new();
    let mut map = Vec::with_capacity(points.len());
    for (p, &wp) in points.iter().zip(weights) {
        // +0.0 and -0.0 are the same point
        let key = p.map(|x| (x + 0.0).to_bits());
        let id = *seen.entry(key).or_insert_with(|| {
            uniq.push(*p);
            w.push(0.0);
            uniq.len() - 1
        });
        w[id] += wp;
        map.push(id);
    }
    (uniq, w, map)
}

/// k-means++ seeding. Returns the chosen distinct-point indices.
fn seed_centers(x: &[[f64; 3]], w: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.len();
    let mut tree = SumTree::new(w);
    let first = tree.find(rng.random::<f64>() * tree.total());
    let mut centers = vec![first];
    let mut d2: Vec<f64> = x.iter().map(|p| dist_sq(p, &x[first])).collect();
    let mut owner = vec![0u32; n];
    let mut members: Vec<Vec<u32>> = vec![(0..n as u32).collect()];
    let mut radius: Vec<f64> = vec![d2.iter().copied().fold(0.0, f64::max)];
    for (i, v) in d2.iter().enumerate() {
        tree.set(i, w[i] * v);
    }
    while centers.len() < k {
        let total = tree.total();
        let c = if total > 0.0 {
            tree.find(rng.random::<f64>() * total)
        } else {
            // every point sits on a center; cannot happen with enough distinct points
            (0..n).find(|i| !centers.contains(i)).expect("more distinct points than centers")
        };
        let cid = centers.len() as u32;
        centers.push(c);
        let xc = x[c];
        let mut mine = Vec::new();
        for a in 0..members.len() {
            // a point of cluster `a` can only move if |c − a| < 2·D(p)
            let dac = dist_sq(&x[centers[a]], &xc);
            if dac >= 4.0 * radius[a] {
                continue;
            }
            let mut r = 0.0f64;
            members[a].retain(|&p| {
                let p = p as usize;
                let d = dist_sq(&x[p], &xc);
                if d < d2[p] {
                    d2[p] = d;
                    owner[p] = cid;
                    tree.set(p, w[p] * d);
                    mine.push(p as u32);
                    false
                } else {
                    r = r.max(d2[p]);
                    true
                }
            });
            radius[a] = r;
        }
        radius.push(mine.iter().map(|&p| d2[p as usize]).fold(0.0, f64::max));
        members.push(mine);
    }
    centers
}

/// Weighted Lloyd iterations with k-means++ seeding.
///
/// Identical points are merged first, so duplicating the input (or scaling
/// all weights by a power of two) leaves the result unchanged.
pub fn kmeans(
    strains: &[Mandel],
    weights: &[f64],
    k: usize,
    metric: &Metric,
    seed: u64,
    max_iterations: usize,
) -> Result<KMeans> {
    if strains.len() != weights.len() {
        return Err(Error::Dimension {
            what: "k-means weights",
            expected: strains.len(),
            got: weights.len(),
        });
    }
    if k == 0 {
        return Err(Error::Config("number of clusters must be positive".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Config("k-means weights must be positive".into()));
    }
    let embedded = crate::par::map_slice(strains, |e| metric.embed_strain(e));
    let (x, w, map) = dedup(&embedded, weights);
    if k > x.len() {
        return Err(Error::TooManyClusters {
            requested: k,
            distinct: x.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = seed_centers(&x, &w, k, &mut rng);
    let mut cen: Vec<[f64; 3]> = centers.iter().map(|&c| x[c]).collect();

    let mut assign: Vec<usize> = vec![usize::MAX; x.len()];
    let mut iterations = 0;
    loop {
        let tree = KdTree::new(&cen);
        let found = crate::par::map_range(x.len(), |p| {
            let hint = (assign[p] != usize::MAX).then(|| (assign[p], dist_sq(&x[p], &cen[assign[p]])));
            tree.nearest(&x[p], hint).expect("centroids exist")
        });
        let mut changed = 0;
        for (a, (c, _)) in assign.iter_mut().zip(&found) {
            if *a != *c {
                changed += 1;
                *a = *c;
            }
        }
        let mut d2: Vec<f64> = found.iter().map(|f| f.1).collect();
        reseed_empty(&x, &mut assign, &mut d2, k);
        cen = weighted_means(&x, &w, &assign, k, &cen);
        iterations += 1;
        if changed == 0 || iterations >= max_iterations {
            break;
        }
    }

    let assignment: Vec<usize> = map.iter().map(|&u| assign[u]).collect();
    let (centroids, cluster_weights) = cluster_means(strains, weights, &assignment, k);
    let inertia = x
        .iter()
        .zip(&assign)
        .zip(&w)
        .map(|((p, &a), &wp)| wp * dist_sq(p, &cen[a]))
        .sum();
    Ok(KMeans {
        centroids,
        assignment,
        cluster_weights,
        inertia,
        iterations,
    })
}

/// Gives every empty cluster the point farthest from its centroid.
fn reseed_empty(x: &[[f64; 3]], assign: &mut [usize], d2: &mut [f64], k: usize) {
    let mut count = vec![0usize; k];
    for &a in assign.iter() {
        count[a] += 1;
    }
    for c in 0..k {
        if count[c] > 0 {
            continue;
        }
        let far = (0..x.len())
            .filter(|&p| count[assign[p]] > 1)
            .max_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)))
            .expect("more distinct points than clusters");
        count[assign[far]] -= 1;
        assign[far] = c;
        count[c] = 1;
        d2[far] = 0.0;
    }
}

/// Weighted mean strain and total weight of every cluster (zero for empty ones).
pub fn cluster_means(strains: &[Mandel], weights: &[f64], assignment: &[usize], k: usize) -> (Vec<Mandel>, Vec<f64>) {
    let mut sum = vec![Mandel::zeros(); k];
    let mut tot = vec![0.0; k];
    for ((e, &a), &w) in strains.iter().zip(assignment).zip(weights) {
        sum[a] += w * e;
        tot[a] += w;
    }
    let means = sum.iter().zip(&tot).map(|(s, &t)| if t > 0.0 { s / t } else { Mandel::zeros() }).collect();
    (means, tot)
}

fn weighted_means(x: &[[f64; 3]], w: &[f64], assign: &[usize], k: usize, old: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut sum = vec![[0.0; 3]; k];
    let mut tot = vec![0.0; k];
    for ((p, &a), &wp) in x.iter().zip(assign).zip(w) {
        for c in 0..3 {
            sum[a][c] += wp * p[c];
        }
        tot[a] += wp;
    }
    (0..k)
        .map(|i| if tot[i] > 0.0 { sum[i].map(|s| s / tot[i]) } else { old[i] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_tree_sampling() {
        let t = SumTree::new(&[1.0, 0.0, 3.0]);
        assert_eq!(t.total(), 4.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(3.99), 2);
        assert_eq!(t.find(4.5), 2);
    }

    #[test]
    fn single_cluster_is_weighted_mean() {
        let pts = vec![Mandel::new(1.0, 0.0, 0.0), Mandel::new(0.0, 2.0, 0.0), Mandel::new(0.0, 0.0, 3.0)];
        let w = vec![1.0, 2.0, 1.0];
        let km = kmeans(&pts, &w, 1, &Metric::identity(), 42, 100).unwrap();
        let expect = Mandel::new(0.25, 1.0, 0.75);
        assert!((km.centroids[0] - expect).norm() < 1e-15);
    }

    #[test]
    fn duplicates_do_not_count_as_distinct() {
        let pts = vec![Mandel::new(1.0, 0.0, 0.0); 5];
        let err = kmeans(&pts, &[1.0; 5], 2, &Metric::identity(), 1, 10).unwrap_err();
        assert!(matches!(err, Error::TooManyClusters { requested: 2, distinct: 1 }));
    }
}
