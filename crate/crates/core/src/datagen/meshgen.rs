//! Parametric meshes: a structured quarter plate with a hole (Q4) and
//! Delaunay-refined quadratic triangles for the L-beam and the perforated
//! identification sample.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::fe::{Element, ElementKind, Mesh};
use crate::{Error, Result};

/// Quarter of a plate `12.8 R × 20 R` with a central hole of radius `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateParams {
    pub radius: f64,
    pub width_factor: f64,
    pub height_factor: f64,
    /// Target element size far from the hole (m).
    pub size: f64,
    /// Ratio between successive radial element sizes away from the hole.
    pub grading: f64,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self {
            radius: 0.0025,
            width_factor: 12.8,
            height_factor: 20.0,
            size: 0.0025 * 0.75,
            grading: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LBeamParams {
    /// Total height `H` (m); every other length scales with it.
    pub height: f64,
    pub width: f64,
    /// Width of the vertical branch (m).
    pub branch_width: f64,
    /// Height of the horizontal branch (m).
    pub foot_height: f64,
    pub fillet_radius: f64,
    pub hole_radius: f64,
    pub hole_center: [f64; 2],
    pub size: f64,
}

impl Default for LBeamParams {
    fn default() -> Self {
        Self {
            height: 1.0,
            width: 0.6,
            branch_width: 0.4,
            foot_height: 0.3,
            fillet_radius: 0.02,
            hole_radius: 0.075,
            hole_center: [0.2, 0.5],
            size: 0.045,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hole {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Square sample with circular holes, loaded biaxially through its edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    pub side: f64,
    pub holes: Vec<Hole>,
    pub size: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        let h = |x: f64, y: f64, r: f64| Hole { center: [x, y], radius: r };
        Self {
            side: 1.0,
            holes: vec![
                h(0.28, 0.30, 0.08),
                h(0.70, 0.26, 0.08),
                h(0.32, 0.72, 0.08),
                h(0.72, 0.68, 0.08),
                h(0.12, 0.88, 0.06),
            ],
            size: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    PlateHoleQuarter(PlateParams),
    LBeam(LBeamParams),
    PerforatedSample(SampleParams),
}

pub fn gen_mesh(spec: &MeshSpec) -> Result<Mesh> {
    match spec {
        MeshSpec::PlateHoleQuarter(p) => plate_hole_quarter(p),
        MeshSpec::LBeam(p) => l_beam(p),
        MeshSpec::PerforatedSample(p) => perforated_sample(p),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InfeasibleGeometry(format!("{name} must be positive, got {v}")))
    }
}

/// Node insertion with coordinate-based deduplication.
struct NodePool {
    nodes: Vec<[f64; 2]>,
    index: HashMap<(i64, i64), usize>,
    quantum: f64,
}

impl NodePool {
    fn new(scale: f64) -> Self {
        Self {
            nodes: Vec::new(),
            index: HashMap::new(),
            quantum: 1e-9 * scale,
        }
    }

    fn add(&mut self, p: [f64; 2]) -> usize {
        let key = ((p[0] / self.quantum).round() as i64, (p[1] / self.quantum).round() as i64);
        *self.index.entry(key).or_insert_with(|| {
            self.nodes.push(p);
            self.nodes.len() - 1
        })
    }
}

fn graded(n: usize, ratio: f64) -> Vec<f64> {
    if (ratio - 1.0).abs() < 1e-12 {
        return (0..=n).map(|k| k as f64 / n as f64).collect();
    }
    let total = ratio.powi(n as i32) - 1.0;
    (0..=n).map(|k| (ratio.powi(k as i32) - 1.0) / total).collect()
}

/// Structured Q4 mesh of the quarter plate, refined towards the hole.
///
/// Three blocks: two transfinite blocks between the quarter arc and the
/// square `[0, a]²` (split along the diagonal), and a rectangular block
/// above it up to the top edge. Node sets: `left`, `bottom`, `right`,
/// `top`, `hole`.
pub fn plate_hole_quarter(p: &PlateParams) -> Result<Mesh> {
    positive("radius", p.radius)?;
    positive("size", p.size)?;
    positive("grading", p.grading)?;
    let r = p.radius;
    let a = 0.5 * p.width_factor * r;
    let b = 0.5 * p.height_factor * r;
    if !(a > 1.5 * r && b >= a) {
        return Err(Error::InfeasibleGeometry(format!(
            "plate {}R × {}R cannot hold the hole with a square core",
            p.width_factor, p.height_factor
        )));
    }
    let nt = ((a / p.size).ceil() as usize).max(2);
    // radial count: enough for the graded spacing to reach `size` at the outer edge
    let span = a * std::f64::consts::SQRT_2 - r;
    let mut nr = 2;
    while nr < 400 {
        let t = graded(nr, p.grading);
        let first = (t[1] - t[0]) * span;
        let last = (t[nr] - t[nr - 1]) * span;
        if last <= 1.4 * p.size || first <= 0.25 * r * PI / (4.0 * nt as f64) {
            break;
        }
        nr += 1;
    }
    let nc = (((b - a) / p.size).ceil() as usize).max(if b > a { 1 } else { 0 });
    let tr = graded(nr, p.grading);
    let mut pool = NodePool::new(b);
    let mut elements = Vec::new();

    // block 0: θ ∈ [0, π/4], outer edge x = a; block 1: θ ∈ [π/4, π/2], outer edge y = a
    for block in 0..2 {
        let mut grid = vec![vec![0usize; nr + 1]; nt + 1];
        for (i, row) in grid.iter_mut().enumerate() {
            let s = i as f64 / nt as f64;
            let theta = FRAC_PI_4 * (block as f64 + s);
            let inner = [r * theta.cos(), r * theta.sin()];
            let outer = if block == 0 { [a, a * s] } else { [a * (1.0 - s), a] };
            for (j, slot) in row.iter_mut().enumerate() {
                let t = tr[j];
                *slot = pool.add(if j == 0 {
                    inner
                } else if j == nr {
                    outer
                } else {
                    [(1.0 - t) * inner[0] + t * outer[0], (1.0 - t) * inner[1] + t * outer[1]]
                });
            }
        }
        for i in 0..nt {
            for j in 0..nr {
                elements.push(quad(&pool.nodes, [grid[i][j], grid[i][j + 1], grid[i + 1][j + 1], grid[i + 1][j]]));
            }
        }
    }
    // block 2: [0, a] × [a, b], x nodes shared with block 1's outer edge
    if nc > 0 {
        let mut grid = vec![vec![0usize; nc + 1]; nt + 1];
        for (i, row) in grid.iter_mut().enumerate() {
            let x = a * (1.0 - i as f64 / nt as f64);
            for (j, slot) in row.iter_mut().enumerate() {
                let y = if j == nc { b } else { a + (b - a) * j as f64 / nc as f64 };
                *slot = pool.add([x, y]);
            }
        }
        for i in 0..nt {
            for j in 0..nc {
                elements.push(quad(&pool.nodes, [grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]));
            }
        }
    }
    let mut mesh = Mesh {
        nodes: pool.nodes,
        elements,
        ..Default::default()
    };
    let tol = 1e-9 * b;
    mesh.tag_boundary("left", |p, q| p[0].abs() < tol && q[0].abs() < tol);
    mesh.tag_boundary("bottom", |p, q| p[1].abs() < tol && q[1].abs() < tol);
    mesh.tag_boundary("right", |p, q| (p[0] - a).abs() < tol && (q[0] - a).abs() < tol);
    mesh.tag_boundary("top", |p, q| (p[1] - b).abs() < tol && (q[1] - b).abs() < tol);
    let on_arc = |p: [f64; 2]| (p[0].hypot(p[1]) - r).abs() < 1e-9 * r;
    mesh.tag_boundary("hole", |p, q| on_arc(p) && on_arc(q));
    mesh.validate()?;
    Ok(mesh)
}

/// Q4 element with counterclockwise ordering.
fn quad(nodes: &[[f64; 2]], c: [usize; 4]) -> Element {
    let area2: f64 = (0..4)
        .map(|k| {
            let (p, q) = (nodes[c[k]], nodes[c[(k + 1) % 4]]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    let conn = if area2 > 0.0 { c.to_vec() } else { vec![c[0], c[3], c[2], c[1]] };
    Element { kind: ElementKind::Q4, conn }
}

/// Circular arc used to snap boundary vertices after refinement.
#[derive(Clone, Copy, Debug)]
struct Arc {
    center: [f64; 2],
    radius: f64,
    /// Angular span `[start, start + sweep]` (sweep may be negative).
    start: f64,
    sweep: f64,
    /// Number of boundary segments.
    n: usize,
}

impl Arc {
    fn new(center: [f64; 2], radius: f64, start: f64, sweep: f64, size: f64, min_segments: usize) -> Self {
        let n = ((radius * sweep.abs() / size).ceil() as usize).max(min_segments);
        Self { center, radius, start, sweep, n }
    }

    fn points(&self) -> Vec<[f64; 2]> {
        (0..=self.n)
            .map(|k| {
                let t = self.start + self.sweep * k as f64 / self.n as f64;
                [self.center[0] + self.radius * t.cos(), self.center[1] + self.radius * t.sin()]
            })
            .collect()
    }

    /// Radial projection of `p` when it lies on a chord of this arc.
    fn snap(&self, p: [f64; 2], chord_tol: f64) -> Option<[f64; 2]> {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let rho = d[0].hypot(d[1]);
        if rho < self.radius - chord_tol || rho > self.radius + 1e-12 * self.radius {
            return None;
        }
        let ang = d[1].atan2(d[0]);
        let (lo, hi) = if self.sweep >= 0.0 {
            (self.start, self.start + self.sweep)
        } else {
            (self.start + self.sweep, self.start)
        };
        let eps = 1e-9;
        let inside = (-2..=2).any(|k| {
            let a = ang + 2.0 * PI * k as f64;
            a >= lo - eps && a <= hi + eps
        });
        inside.then(|| [self.center[0] + self.radius * d[0] / rho, self.center[1] + self.radius * d[1] / rho])
    }
}

fn subdivide(a: [f64; 2], b: [f64; 2], size: f64) -> Vec<[f64; 2]> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let n = ((len / size).ceil() as usize).max(1);
    (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Constrained Delaunay refinement of a polygonal domain, then promotion to T6.
///
/// `loops` are closed boundary polylines (outer boundary and holes); the
/// region inside an odd number of loops is meshed. Corner vertices created
/// on arc chords are projected back onto their arc; mid-side nodes stay at
/// the chord midpoints so that every element is straight-sided.
fn triangulate_t6(loops: &[Vec<[f64; 2]>], arcs: &[Arc], size: f64) -> Result<Mesh> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    for lp in loops {
        let pts: Vec<Point2<f64>> = lp.iter().map(|p| Point2::new(p[0], p[1])).collect();
        cdt.add_constraint_edges(pts, true)
            .map_err(|e| Error::InfeasibleGeometry(format!("boundary insertion failed: {e:?}")))?;
    }
    let max_area = 0.5 * size * size;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_max_allowed_area(max_area)
            .with_angle_limit(AngleLimit::from_deg(28.0))
            .with_max_additional_vertices(2_000_000)
            .exclude_outer_faces(true),
    );
    if !result.refinement_complete {
        return Err(Error::Mesh("triangle refinement did not complete".into()));
    }
    let excluded: std::collections::HashSet<_> = result.excluded_faces.iter().copied().collect();

    let mut vmap: HashMap<usize, usize> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let vs = face.vertices();
        let mut t = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let key = v.fix().index();
            t[k] = *vmap.entry(key).or_insert_with(|| {
                let p = v.position();
                nodes.push([p.x, p.y]);
                nodes.len() - 1
            });
        }
        tris.push(t);
    }
    if tris.is_empty() {
        return Err(Error::InfeasibleGeometry("empty triangulation".into()));
    }

    // snap boundary vertices that sit on arc chords
    let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in &tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut on_boundary = vec![false; nodes.len()];
    for (&(a, b), &c) in &edge_count {
        if c == 1 {
            on_boundary[a] = true;
            on_boundary[b] = true;
        }
    }
    for (i, p) in nodes.iter_mut().enumerate() {
        if !on_boundary[i] {
            continue;
        }
        for arc in arcs {
            let sag = 1.0 - (0.5 * arc.sweep.abs() / arc.n as f64).cos();
            let chord_tol = arc.radius * sag * 1.01 + 1e-12 * arc.radius;
            if let Some(q) = arc.snap(*p, chord_tol) {
                *p = q;
                break;
            }
        }
    }

    let mut elements = Vec::with_capacity(tris.len());
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &tris {
        let (p0, p1, p2) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let c = if area2 > 0.0 { [t[0], t[1], t[2]] } else { [t[0], t[2], t[1]] };
        let mut conn = c.to_vec();
        for k in 0..3 {
            let (a, b) = (c[k], c[(k + 1) % 3]);
            let m = *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (pa, pb) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                nodes.len() - 1
            });
            conn.push(m);
        }
        elements.push(Element { kind: ElementKind::T6, conn });
    }
    Ok(Mesh {
        nodes,
        elements,
        ..Default::default()
    })
}

/// L-shaped beam: horizontal foot `[0, W] × [0, h]`, vertical branch
/// `[0, w] × [0, H]`, fillet at the re-entrant corner, one hole in the branch.
///
/// Node sets: `bottom`, `top`, `left`, `right`, `hole`, `fillet`.
pub fn l_beam(p: &LBeamParams) -> Result<Mesh> {
    for (n, v) in [
        ("height", p.height),
        ("width", p.width),
        ("branch_width", p.branch_width),
        ("foot_height", p.foot_height),
        ("fillet_radius", p.fillet_radius),
        ("hole_radius", p.hole_radius),
        ("size", p.size),
    ] {
        positive(n, v)?;
    }
    let (hh, ww, bw, fh, rf) = (p.height, p.width, p.branch_width, p.foot_height, p.fillet_radius);
    if !(bw + rf < ww && fh + rf < hh) {
        return Err(Error::InfeasibleGeometry("fillet does not fit between the branches".into()));
    }
    let [cx, cy] = p.hole_center;
    let rh = p.hole_radius;
    let clear = 0.02 * hh;
    let inside_branch = cx - rh > clear && cx + rh < bw - clear && cy - rh > clear && cy + rh < hh - clear;
    let clear_of_fillet = cy - rh > fh + rf + clear || cx + rh < bw - clear;
    if !(inside_branch && clear_of_fillet && rh * 2.0 < bw) {
        return Err(Error::InfeasibleGeometry(format!(
            "hole of radius {rh} at ({cx}, {cy}) does not fit in the vertical branch"
        )));
    }
    let s = p.size;
    let fillet = Arc::new([bw + rf, fh + rf], rf, -FRAC_PI_2, -FRAC_PI_2, s, 8);
    let hole = Arc::new([cx, cy], rh, 0.0, 2.0 * PI, s, 32);
    let mut outer = Vec::new();
    outer.extend(subdivide([0.0, 0.0], [ww, 0.0], s));
    outer.extend(subdivide([ww, 0.0], [ww, fh], s));
    outer.extend(subdivide([ww, fh], [bw + rf, fh], s));
    let fp = fillet.points();
    outer.extend(&fp[..fp.len() - 1]);
    outer.extend(subdivide([bw, fh + rf], [bw, hh], s));
    outer.extend(subdivide([bw, hh], [0.0, hh], s));
    outer.extend(subdivide([0.0, hh], [0.0, 0.0], s));
    let hp = hole.points();
    let hole_loop = hp[..hp.len() - 1].to_vec();
    let mut mesh = triangulate_t6(&[outer, hole_loop], &[fillet, hole], s)?;

    let tol = 1e-9 * hh;
    mesh.tag_boundary("bottom", |a, b| a[1].abs() < tol && b[1].abs() < tol);
    mesh.tag_boundary("top", |a, b| (a[1] - hh).abs() < tol && (b[1] - hh).abs() < tol);
    mesh.tag_boundary("left", |a, b| a[0].abs() < tol && b[0].abs() < tol);
    mesh.tag_boundary("right", |a, b| (a[0] - ww).abs() < tol && (b[0] - ww).abs() < tol);
    let near = |c: [f64; 2], r: f64, q: [f64; 2]| ((q[0] - c[0]).hypot(q[1] - c[1]) - r).abs() < 1e-9 * r.max(1.0);
    mesh.tag_boundary("hole", |a, b| near(hole.center, rh, a) && near(hole.center, rh, b));
    mesh.tag_boundary("fillet", |a, b| near(fillet.center, rf, a) && near(fillet.center, rf, b));
    mesh.validate()?;
    Ok(mesh)
}

/// Square sample with circular holes. Node sets: `left`, `bottom`, `right`,
/// `top`, and `hole{k}` per hole.
pub fn perforated_sample(p: &SampleParams) -> Result<Mesh> {
    positive("side", p.side)?;
    positive("size", p.size)?;
    let l = p.side;
    let clear = 0.01 * l;
    for (k, h) in p.holes.iter().enumerate() {
        positive("hole radius", h.radius)?;
        let [x, y] = h.center;
        if !(x - h.radius > clear && x + h.radius < l - clear && y - h.radius > clear && y + h.radius < l - clear) {
            return Err(Error::InfeasibleGeometry(format!("hole {k} crosses the sample boundary")));
        }
        for (j, g) in p.holes.iter().enumerate().take(k) {
            let d = (x - g.center[0]).hypot(y - g.center[1]);
            if d < h.radius + g.radius + clear {
                return Err(Error::InfeasibleGeometry(format!("holes {j} and {k} overlap")));
            }
        }
    }
    let s = p.size;
    let mut outer = Vec::new();
    outer.extend(subdivide([0.0, 0.0], [l, 0.0], s));
    outer.extend(subdivide([l, 0.0], [l, l], s));
    outer.extend(subdivide([l, l], [0.0, l], s));
    outer.extend(subdivide([0.0, l], [0.0, 0.0], s));
    let arcs: Vec<Arc> = p
        .holes
        .iter()
        .map(|h| Arc::new(h.center, h.radius, 0.0, 2.0 * PI, s, 32))
        .collect();
    let mut loops = vec![outer];
    for a in &arcs {
        let pts = a.points();
        loops.push(pts[..pts.len() - 1].to_vec());
    }
    let mut mesh = triangulate_t6(&loops, &arcs, s)?;
    let tol = 1e-9 * l;
    mesh.tag_boundary("left", |a, b| a[0].abs() < tol && b[0].abs() < tol);
    mesh.tag_boundary("bottom", |a, b| a[1].abs() < tol && b[1].abs() < tol);
    mesh.tag_boundary("right", |a, b| (a[0] - l).abs() < tol && (b[0] - l).abs() < tol);
    mesh.tag_boundary("top", |a, b| (a[1] - l).abs() < tol && (b[1] - l).abs() < tol);
    for (k, h) in p.holes.iter().enumerate() {
        let near = |q: [f64; 2]| ((q[0] - h.center[0]).hypot(q[1] - h.center[1]) - h.radius).abs() < 1e-9;
        mesh.tag_boundary(&format!("hole{k}"), |a, b| near(a) && near(b));
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Structured rectangle `[0, w] × [0, h]` with `nx × ny` Q4 elements.
/// Node sets: `left`, `bottom`, `right`, `top`.
pub fn rectangle_q4(w: f64, h: f64, nx: usize, ny: usize) -> Result<Mesh> {
    positive("width", w)?;
    positive("height", h)?;
    if nx == 0 || ny == 0 {
        return Err(Error::InfeasibleGeometry("rectangle needs at least one element per side".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([w * i as f64 / nx as f64, h * j as f64 / ny as f64]);
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(Element {
                kind: ElementKind::Q4,
                conn: vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
            });
        }
    }
    let mut mesh = Mesh {
        nodes,
        elements,
        ..Default::default()
    };
    tag_rectangle(&mut mesh, w, h);
    Ok(mesh)
}

/// Structured rectangle of T6 elements (each cell split along a diagonal).
pub fn rectangle_t6(w: f64, h: f64, nx: usize, ny: usize) -> Result<Mesh> {
    let q = rectangle_q4(w, h, nx, ny)?;
    let mut nodes = q.nodes.clone();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elements = Vec::new();
    for el in &q.elements {
        let c = &el.conn;
        for tri in [[c[0], c[1], c[2]], [c[0], c[2], c[3]]] {
            let mut conn = tri.to_vec();
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let m = *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    nodes.push([0.5 * (nodes[a][0] + nodes[b][0]), 0.5 * (nodes[a][1] + nodes[b][1])]);
                    nodes.len() - 1
                });
                conn.push(m);
            }
            elements.push(Element { kind: ElementKind::T6, conn });
        }
    }
    let mut mesh = Mesh {
        nodes,
        elements,
        ..Default::default()
    };
    tag_rectangle(&mut mesh, w, h);
    Ok(mesh)
}

fn tag_rectangle(mesh: &mut Mesh, w: f64, h: f64) {
    let tol = 1e-12 * w.max(h);
    mesh.tag_boundary("left", |a, b| a[0].abs() < tol && b[0].abs() < tol);
    mesh.tag_boundary("bottom", |a, b| a[1].abs() < tol && b[1].abs() < tol);
    mesh.tag_boundary("right", |a, b| (a[0] - w).abs() < tol && (b[0] - w).abs() < tol);
    mesh.tag_boundary("top", |a, b| (a[1] - h).abs() < tol && (b[1] - h).abs() < tol);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::Quadrature;

    #[test]
    fn plate_area_close_to_analytic() {
        let p = PlateParams {
            radius: 1.0,
            size: 0.8,
            ..Default::default()
        };
        let m = plate_hole_quarter(&p).unwrap();
        let q = Quadrature::build(&m).unwrap();
        let exact = 6.4 * 10.0 - PI / 4.0;
        assert!((q.total_weight() - exact).abs() < 0.01 * exact);
        for set in ["left", "bottom", "right", "top", "hole"] {
            assert!(!m.node_sets[set].is_empty(), "{set}");
        }
    }

    #[test]
    fn l_beam_dimensions() {
        let m = l_beam(&LBeamParams::default()).unwrap();
        let bb = m.bounding_box();
        assert_eq!(bb, [0.0, 0.0, 0.6, 1.0]);
        for &n in &m.node_sets["hole"] {
            let p = m.nodes[n];
            let d = (p[0] - 0.2).hypot(p[1] - 0.5);
            assert!((d - 0.075).abs() <= 0.01 * 0.075, "{d}");
        }
        assert!(Quadrature::build(&m).is_ok());
    }

    #[test]
    fn hole_too_large_is_infeasible() {
        let p = LBeamParams {
            hole_radius: 0.3,
            ..Default::default()
        };
        assert!(matches!(l_beam(&p), Err(Error::InfeasibleGeometry(_))));
        let mut s = SampleParams::default();
        s.holes[0].radius = 0.5;
        assert!(matches!(perforated_sample(&s), Err(Error::InfeasibleGeometry(_))));
    }

    #[test]
    fn sample_mesh_is_valid() {
        let p = SampleParams {
            size: 0.06,
            ..Default::default()
        };
        let m = perforated_sample(&p).unwrap();
        let q = Quadrature::build(&m).unwrap();
        let holes: f64 = p.holes.iter().map(|h| PI * h.radius * h.radius).sum();
        assert!((q.total_weight() - (1.0 - holes)).abs() < 0.01);
    }
}
