use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    /// Bilinear quadrilateral, counterclockwise corners.
    Q4,
    /// Quadratic triangle: corners 0..3, then mid-side nodes of edges 0-1, 1-2, 2-0.
    T6,
}

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Q4 => 4,
            ElementKind::T6 => 6,
        }
    }

    /// Local node lists of each edge, end nodes first.
    pub fn edges(self) -> &'static [&'static [usize]] {
        match self {
            ElementKind::Q4 => &[&[0, 1], &[1, 2], &[2, 3], &[3, 0]],
            ElementKind::T6 => &[&[0, 1, 3], &[1, 2, 4], &[2, 0, 5]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub kind: ElementKind,
    pub conn: Vec<usize>,
}

/// 2D mesh with named node sets and side sets `(element, local edge)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Element>,
    #[serde(default)]
    pub node_sets: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub side_sets: BTreeMap<String, Vec<(usize, usize)>>,
}

/// Degree of freedom index of `component` (0 = x, 1 = y) at `node`.
#[inline]
pub fn dof(node: usize, component: usize) -> usize {
    2 * node + component
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Mesh(format!("unknown node set `{name}`")))
    }

    /// Structural checks: connectivity, index ranges, straight-sided T6 edges.
    /// Jacobian positivity is checked when the quadrature is built.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if let Some(i) = self.nodes.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::Mesh(format!("node {i} has non-finite coordinates")));
        }
        for (e, el) in self.elements.iter().enumerate() {
            if el.conn.len() != el.kind.node_count() {
                return Err(Error::Mesh(format!(
                    "element {e}: {:?} needs {} nodes, got {}",
                    el.kind,
                    el.kind.node_count(),
                    el.conn.len()
                )));
            }
            if let Some(&bad) = el.conn.iter().find(|&&a| a >= n) {
                return Err(Error::Mesh(format!("element {e} references node {bad} (only {n} nodes)")));
            }
            if el.kind == ElementKind::T6 {
                for edge in ElementKind::T6.edges() {
                    let (a, b, m) = (self.nodes[el.conn[edge[0]]], self.nodes[el.conn[edge[1]]], self.nodes[el.conn[edge[2]]]);
                    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                    let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    let off = ((m[0] - mid[0]).powi(2) + (m[1] - mid[1]).powi(2)).sqrt();
                    if off > 1e-9 * len.max(1.0) {
                        return Err(Error::Mesh(format!("element {e}: mid-side node off the chord midpoint by {off:e}")));
                    }
                }
            }
        }
        for (name, set) in &self.node_sets {
            if let Some(&bad) = set.iter().find(|&&a| a >= n) {
                return Err(Error::Mesh(format!("node set `{name}` references node {bad}")));
            }
        }
        for (name, set) in &self.side_sets {
            for &(e, s) in set {
                let ok = self.elements.get(e).is_some_and(|el| s < el.kind.edges().len());
                if !ok {
                    return Err(Error::Mesh(format!("side set `{name}` references invalid side ({e}, {s})")));
                }
            }
        }
        Ok(())
    }

    /// Bounding box `[xmin, ymin, xmax, ymax]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        self.nodes.iter().fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
        )
    }

    /// Boundary edges (edges used by exactly one element) as `(element, local edge)`.
    pub fn boundary_sides(&self) -> Vec<(usize, usize)> {
        let mut count: std::collections::HashMap<(usize, usize), (usize, usize, usize)> =
            std::collections::HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            for (s, edge) in el.kind.edges().iter().enumerate() {
                let (a, b) = (el.conn[edge[0]], el.conn[edge[1]]);
                let key = (a.min(b), a.max(b));
                count.entry(key).and_modify(|c| c.2 += 1).or_insert((e, s, 1));
            }
        }
        let mut sides: Vec<(usize, usize)> = count.values().filter(|c| c.2 == 1).map(|c| (c.0, c.1)).collect();
        sides.sort_unstable();
        sides
    }

    /// Collects the nodes lying on the listed sides.
    pub fn nodes_of_sides(&self, sides: &[(usize, usize)]) -> Vec<usize> {
        let mut nodes: Vec<usize> = sides
            .iter()
            .flat_map(|&(e, s)| {
                let el = &self.elements[e];
                el.kind.edges()[s].iter().map(move |&k| el.conn[k])
            })
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Builds node sets and side sets from boundary sides selected by a predicate
    /// on each side's end points.
    pub fn tag_boundary<F>(&mut self, name: &str, on_boundary: F)
    where
        F: Fn([f64; 2], [f64; 2]) -> bool,
    {
        let sides: Vec<(usize, usize)> = self
            .boundary_sides()
            .into_iter()
            .filter(|&(e, s)| {
                let el = &self.elements[e];
                let edge = el.kind.edges()[s];
                on_boundary(self.nodes[el.conn[edge[0]]], self.nodes[el.conn[edge[1]]])
            })
            .collect();
        let nodes = self.nodes_of_sides(&sides);
        self.node_sets.insert(name.to_string(), nodes);
        self.side_sets.insert(name.to_string(), sides);
    }
}
