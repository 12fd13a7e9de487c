//! Static k-d tree for exact nearest-neighbor queries.
//!
//! Ties are resolved towards the lowest original index, so a query returns
//! exactly what a linear scan with the same distance function returns.

const LEAF_SIZE: usize = 12;
const NO_CHILD: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node<const D: usize> {
    lo: [f64; D],
    hi: [f64; D],
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    ids: Vec<u32>,
    nodes: Vec<Node<D>>,
}

/// Squared Euclidean distance, summed in a fixed order.
#[inline(always)]
pub fn dist_sq<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

#[inline(always)]
fn box_dist_sq<const D: usize>(q: &[f64; D], lo: &[f64; D], hi: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        let d = if q[k] < lo[k] {
            lo[k] - q[k]
        } else if q[k] > hi[k] {
            q[k] - hi[k]
        } else {
            0.0
        };
        s += d * d;
    }
    s
}

#[inline(always)]
fn better(d: f64, id: u32, best_d: f64, best_id: u32) -> bool {
    d < best_d || (d == best_d && id < best_id)
}

impl<const D: usize> KdTree<D> {
    pub fn new(points: &[[f64; D]]) -> Self {
        assert!(points.len() < u32::MAX as usize, "too many points");
        let mut items: Vec<([f64; D], u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !items.is_empty() {
            build(&mut items, 0, &mut nodes);
        }
        let (points, ids) = items.into_iter().unzip();
        Self { points, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point to `q` as `(original index, squared distance)`.
    ///
    /// `hint` is an index known to be a good candidate (e.g. the previous
    /// answer for a slowly moving query); it only speeds up the search.
    pub fn nearest(&self, q: &[f64; D], hint: Option<(usize, f64)>) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let (mut best_id, mut best_d) = match hint {
            Some((i, d)) => (i as u32, d),
            None => (u32::MAX, f64::INFINITY),
        };
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, 0.0));
        while let Some((ni, bound)) = stack.pop() {
            if bound > best_d {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.left == NO_CHILD {
                for k in node.start as usize..node.end as usize {
                    let d = dist_sq(q, &self.points[k]);
                    if better(d, self.ids[k], best_d, best_id) {
                        best_d = d;
                        best_id = self.ids[k];
                    }
                }
                continue;
            }
            let l = &self.nodes[node.left as usize];
            let r = &self.nodes[node.right as usize];
            let bl = box_dist_sq(q, &l.lo, &l.hi);
            let br = box_dist_sq(q, &r.lo, &r.hi);
            // push the farther child first so the nearer one is explored first
            if bl <= br {
                stack.push((node.right, br));
                stack.push((node.left, bl));
            } else {
                stack.push((node.left, bl));
                stack.push((node.right, br));
            }
        }
        Some((best_id as usize, best_d))
    }

    /// Best-first search with a custom exact distance.
    ///
    /// The tree coordinates must be a lower-bound embedding: the squared
    /// Euclidean distance between tree coordinates never exceeds `exact(id)`.
    /// Nodes are pruned with a small relative slack to absorb rounding in
    /// that bound.
    pub fn nearest_by<F>(&self, q: &[f64; D], hint: Option<(usize, f64)>, exact: F) -> Option<(usize, f64)>
    where
        F: Fn(usize) -> f64,
    {
        if self.is_empty() {
            return None;
        }
        const SLACK: f64 = 1.0 - 1e-9;
        let (mut best_id, mut best_d) = match hint {
            Some((i, d)) => (i as u32, d),
            None => (u32::MAX, f64::INFINITY),
        };
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, 0.0));
        while let Some((ni, bound)) = stack.pop() {
            if bound * SLACK > best_d {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.left == NO_CHILD {
                for k in node.start as usize..node.end as usize {
                    if dist_sq(q, &self.points[k]) * SLACK > best_d {
                        continue;
                    }
                    let id = self.ids[k];
                    let d = exact(id as usize);
                    if better(d, id, best_d, best_id) {
                        best_d = d;
                        best_id = id;
                    }
                }
                continue;
            }
            let l = &self.nodes[node.left as usize];
            let r = &self.nodes[node.right as usize];
            let bl = box_dist_sq(q, &l.lo, &l.hi);
            let br = box_dist_sq(q, &r.lo, &r.hi);
            if bl <= br {
                stack.push((node.right, br));
                stack.push((node.left, bl));
            } else {
                stack.push((node.left, bl));
                stack.push((node.right, br));
            }
        }
        Some((best_id as usize, best_d))
    }
}

fn build<const D: usize>(items: &mut [([f64; D], u32)], offset: usize, nodes: &mut Vec<Node<D>>) -> u32 {
    let mut lo = [f64::INFINITY; D];
    let mut hi = [f64::NEG_INFINITY; D];
    for (p, _) in items.iter() {
        for k in 0..D {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let index = nodes.len() as u32;
    nodes.push(Node {
        lo,
        hi,
        start: offset as u32,
        end: (offset + items.len()) as u32,
        left: NO_CHILD,
        right: NO_CHILD,
    });
    let (axis, spread) = (0..D)
        .map(|k| (k, hi[k] - lo[k]))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if items.len() <= LEAF_SIZE || spread <= 0.0 {
        return index;
    }
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]));
    let (left_items, right_items) = items.split_at_mut(mid);
    let left = build(left_items, offset, nodes);
    let right = build(right_items, offset + mid, nodes);
    nodes[index as usize].left = left;
    nodes[index as usize].right = right;
    index
}
