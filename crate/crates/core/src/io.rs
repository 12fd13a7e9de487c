//! File formats: database CSV, mesh JSON, snapshot sets, VTK output and
//! provenance headers.
//!
//! Floating-point values are written with 17 significant digits (CSV) or the
//! shortest exact representation (JSON), so every file re-reads losslessly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ddi::{Grip, Snapshot};
use crate::fe::{ElementKind, Mesh, Quadrature};
use crate::phase_space::{mandel, tensor_components, LocalState, Mandel};
use crate::{Error, Result};

pub const DATABASE_HEADER: &str = "eps_xx,eps_yy,eps_xy,sig_xx,sig_yy,sig_xy";

/// Where an output came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

impl Provenance {
    pub fn new<T: Serialize>(config: &T, seed: Option<u64>, preset: Option<&str>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash(config),
            seed,
            preset: preset.map(str::to_string),
        }
    }

    /// `key: value` lines for comment headers.
    pub fn lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("tool: {} {}", self.tool, self.version),
            format!("config_sha256: {}", self.config_sha256),
        ];
        if let Some(s) = self.seed {
            v.push(format!("seed: {s}"));
        }
        if let Some(p) = &self.preset {
            v.push(format!("preset: {p}"));
        }
        v
    }
}

/// SHA-256 of the canonical JSON encoding.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Database rows in tensor components, as stored on disk.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatabaseFile {
    pub provenance: Vec<String>,
    /// `[eps_xx, eps_yy, eps_xy, sig_xx, sig_yy, sig_xy]`.
    pub rows: Vec<[f64; 6]>,
}

impl DatabaseFile {
    pub fn from_states(states: &[LocalState], provenance: Vec<String>) -> Self {
        let rows = states
            .iter()
            .map(|z| {
                let e = tensor_components(&z.strain);
                let s = tensor_components(&z.stress);
                [e[0], e[1], e[2], s[0], s[1], s[2]]
            })
            .collect();
        Self { provenance, rows }
    }

    pub fn states(&self) -> Vec<LocalState> {
        self.rows
            .iter()
            .map(|r| LocalState::new(mandel(r[0], r[1], r[2]), mandel(r[3], r[4], r[5])))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 150);
        for line in &self.provenance {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str(DATABASE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&x| num(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut body = text;
        while let Some(rest) = body.strip_prefix('#') {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            provenance.push(line.strip_prefix(' ').unwrap_or(line).trim_end_matches('\r').to_string());
            body = tail;
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?;
        let got: Vec<&str> = header.iter().map(str::trim).collect();
        if got.join(",") != DATABASE_HEADER {
            return Err(Error::format(path, format!("expected header `{DATABASE_HEADER}`")));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            if rec.len() != 6 {
                return Err(Error::format(path, format!("row {} has {} fields", k + 1, rec.len())));
            }
            let mut r = [0.0; 6];
            for (c, field) in rec.iter().enumerate() {
                r[c] = field
                    .trim()
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Error::format(path, format!("row {}: bad number `{field}`", k + 1)))?;
            }
            rows.push(r);
        }
        Ok(Self { provenance, rows })
    }
}

pub fn write_database(path: &Path, db: &DatabaseFile) -> Result<()> {
    write_text(path, &db.to_csv())
}

pub fn read_database(path: &Path) -> Result<DatabaseFile> {
    DatabaseFile::parse(&read_text(path)?, path)
}

#[derive(Serialize)]
struct MeshDocumentRef<'a> {
    provenance: &'a [String],
    #[serde(flatten)]
    mesh: &'a Mesh,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshDocument {
    #[serde(default)]
    provenance: Vec<String>,
    nodes: Vec<[f64; 2]>,
    elements: Vec<crate::fe::Element>,
    #[serde(default)]
    node_sets: std::collections::BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    side_sets: std::collections::BTreeMap<String, Vec<(usize, usize)>>,
}

pub fn mesh_to_json(mesh: &Mesh, provenance: &[String]) -> String {
    let mut s = serde_json::to_string_pretty(&MeshDocumentRef { provenance, mesh }).expect("mesh serializes");
    s.push('\n');
    s
}

/// Parses and validates a mesh document; returns the mesh and its provenance.
pub fn mesh_from_json(text: &str, path: &Path) -> Result<(Mesh, Vec<String>)> {
    let doc: MeshDocument = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    let mesh = Mesh {
        nodes: doc.nodes,
        elements: doc.elements,
        node_sets: doc.node_sets,
        side_sets: doc.side_sets,
    };
    mesh.validate()?;
    Ok((mesh, doc.provenance))
}

pub fn write_mesh(path: &Path, mesh: &Mesh, provenance: &[String]) -> Result<()> {
    write_text(path, &mesh_to_json(mesh, provenance))
}

pub fn read_mesh(path: &Path) -> Result<(Mesh, Vec<String>)> {
    mesh_from_json(&read_text(path)?, path)
}

/// Cell data for VTK output.
#[derive(Clone, Debug)]
pub enum CellField {
    Scalar(Vec<f64>),
    /// Symmetric tensor in components `(xx, yy, xy)`.
    Tensor(Vec<[f64; 3]>),
}

/// Per-element mean of per-point scalars.
pub fn element_average_scalar(quad: &Quadrature, n_elements: usize, values: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; n_elements];
    let mut cnt = vec![0usize; n_elements];
    for (&e, &v) in quad.elements().iter().zip(values) {
        sum[e] += v;
        cnt[e] += 1;
    }
    sum.iter().zip(&cnt).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
}

/// Per-element mean of per-point tensors, in tensor components.
pub fn element_average_tensor(quad: &Quadrature, n_elements: usize, values: &[Mandel]) -> Vec<[f64; 3]> {
    let comps: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let v: Vec<f64> = values.iter().map(|m| tensor_components(m)[c]).collect();
            element_average_scalar(quad, n_elements, &v)
        })
        .collect();
    (0..n_elements).map(|e| [comps[0][e], comps[1][e], comps[2][e]]).collect()
}

/// Legacy ASCII VTK 4.2 unstructured grid.
pub fn vtk_string(
    mesh: &Mesh,
    title: &str,
    point_vectors: &[(&str, &[f64])],
    cell_fields: &[(&str, CellField)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 4.2\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", num(p[0]), num(p[1]));
    }
    let size: usize = mesh.elements.iter().map(|e| e.conn.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {size}", mesh.elements.len());
    for e in &mesh.elements {
        let ids: Vec<String> = e.conn.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{} {}", e.conn.len(), ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.elements.len());
    for e in &mesh.elements {
        let t = match e.kind {
            ElementKind::Q4 => 9,
            ElementKind::T6 => 22,
        };
        let _ = writeln!(s, "{t}");
    }
    if !point_vectors.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        for (name, v) in point_vectors {
            let _ = writeln!(s, "VECTORS {name} double");
            for n in 0..mesh.n_nodes() {
                let _ = writeln!(s, "{} {} 0", num(v[2 * n]), num(v[2 * n + 1]));
            }
        }
    }
    if !cell_fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", mesh.elements.len());
        for (name, f) in cell_fields {
            match f {
                CellField::Scalar(v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                    for x in v {
                        let _ = writeln!(s, "{}", num(*x));
                    }
                }
                CellField::Tensor(v) => {
                    let _ = writeln!(s, "SCALARS {name} double 3\nLOOKUP_TABLE default");
                    for t in v {
                        let _ = writeln!(s, "{} {} {}", num(t[0]), num(t[1]), num(t[2]));
                    }
                }
            }
        }
    }
    s
}

pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    title: &str,
    point_vectors: &[(&str, &[f64])],
    cell_fields: &[(&str, CellField)],
) -> Result<()> {
    write_text(path, &vtk_string(mesh, title, point_vectors, cell_fields))
}

/// Isotropic plane-strain metric parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// Pa.
    pub e: f64,
    pub nu: f64,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { e: 100e9, nu: 0.35 }
    }
}

impl MetricSpec {
    pub fn build(&self) -> Result<crate::Metric> {
        crate::Metric::isotropic_plane_strain(self.e, self.nu)
            .map_err(|_| Error::Config(format!("metric E = {}, ν = {} is not positive definite", self.e, self.nu)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub time: f64,
    /// CSV of nodal displacements, relative to the manifest.
    pub displacements: String,
    /// CSV of applied nodal forces, relative to the manifest.
    pub forces: String,
    pub dirichlet: Vec<usize>,
    pub grips: Vec<Grip>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotManifest {
    pub provenance: Vec<String>,
    /// Mesh JSON, relative to the manifest.
    pub mesh: String,
    pub metric: MetricSpec,
    pub snapshots: Vec<SnapshotEntry>,
}

fn nodal_csv(provenance: &[String], v: &[f64], names: [&str; 2]) -> String {
    let mut s = String::with_capacity(v.len() * 26);
    for line in provenance {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "node,{},{}", names[0], names[1]);
    for n in 0..v.len() / 2 {
        let _ = writeln!(s, "{n},{},{}", num(v[2 * n]), num(v[2 * n + 1]));
    }
    s
}

fn parse_nodal_csv(text: &str, path: &Path, n_nodes: usize) -> Result<Vec<f64>> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let mut v = vec![f64::NAN; 2 * n_nodes];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = || Error::format(path, format!("malformed row {:?}", rec.iter().collect::<Vec<_>>()));
        if rec.len() != 3 {
            return Err(bad());
        }
        let n: usize = rec[0].trim().parse().map_err(|_| bad())?;
        if n >= n_nodes {
            return Err(Error::format(path, format!("node {n} out of range")));
        }
        for c in 0..2 {
            v[2 * n + c] = rec[c + 1].trim().parse().map_err(|_| bad())?;
        }
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::format(path, "missing or non-finite nodal values"));
    }
    Ok(v)
}

/// Writes `manifest.json` plus two CSVs per snapshot into `dir`. The mesh is
/// written alongside as `mesh.json`.
pub fn write_snapshots(
    dir: &Path,
    mesh: &Mesh,
    metric: MetricSpec,
    snapshots: &[Snapshot],
    provenance: &[String],
) -> Result<PathBuf> {
    write_mesh(&dir.join("mesh.json"), mesh, provenance)?;
    let mut entries = Vec::with_capacity(snapshots.len());
    for (k, s) in snapshots.iter().enumerate() {
        let du = format!("snapshot_{k:04}_u.csv");
        let df = format!("snapshot_{k:04}_f.csv");
        write_text(&dir.join(&du), &nodal_csv(provenance, &s.u, ["ux", "uy"]))?;
        write_text(&dir.join(&df), &nodal_csv(provenance, &s.forces, ["fx", "fy"]))?;
        entries.push(SnapshotEntry {
            time: s.time,
            displacements: du,
            forces: df,
            dirichlet: s.dirichlet.clone(),
            grips: s.grips.clone(),
        });
    }
    let manifest = SnapshotManifest {
        provenance: provenance.to_vec(),
        mesh: "mesh.json".into(),
        metric,
        snapshots: entries,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Reads a snapshot manifest with its mesh and every snapshot.
pub fn read_snapshots(manifest_path: &Path) -> Result<(SnapshotManifest, Mesh, Vec<Snapshot>)> {
    let manifest: SnapshotManifest = read_json(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let (mesh, _) = read_mesh(&dir.join(&manifest.mesh))?;
    let mut snaps = Vec::with_capacity(manifest.snapshots.len());
    for e in &manifest.snapshots {
        let pu = dir.join(&e.displacements);
        let pf = dir.join(&e.forces);
        let s = Snapshot {
            time: e.time,
            u: parse_nodal_csv(&read_text(&pu)?, &pu, mesh.n_nodes())?,
            forces: parse_nodal_csv(&read_text(&pf)?, &pf, mesh.n_nodes())?,
            dirichlet: e.dirichlet.clone(),
            grips: e.grips.clone(),
        };
        s.validate(mesh.n_dofs())?;
        snaps.push(s);
    }
    Ok((manifest, mesh, snaps))
}

/// Iteration history as CSV.
pub fn history_csv(provenance: &[String], history: &[f64], changes: &[usize]) -> String {
    let mut s = String::new();
    for line in provenance {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("iteration,distance_sq,mapping_changes\n");
    for (k, (d, c)) in history.iter().zip(changes).enumerate() {
        let _ = writeln!(s, "{},{},{c}", k + 1, num(*d));
    }
    s
}

pub const STATES_HEADER: &str = "weight,eps_xx,eps_yy,eps_xy,sig_xx,sig_yy,sig_xy";

/// Per-point weighted states in tensor components.
pub fn states_csv(provenance: &[String], weights: &[f64], states: &[LocalState]) -> String {
    let mut s = String::with_capacity(states.len() * 170);
    for line in provenance {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str(STATES_HEADER);
    s.push('\n');
    for (w, z) in weights.iter().zip(states) {
        let e = tensor_components(&z.strain);
        let t = tensor_components(&z.stress);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(*w),
            num(e[0]),
            num(e[1]),
            num(e[2]),
            num(t[0]),
            num(t[1]),
            num(t[2])
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn database_round_trip_is_byte_identical() {
        let states = vec![
            LocalState::new(mandel(1e-3, -2e-3, 0.1 / 3.0), mandel(1.0 / 3.0, 2e8, -7.0)),
            LocalState::new(mandel(0.0, -0.0, 5e-324), mandel(f64::MAX, 1.0, 0.1)),
        ];
        let db = DatabaseFile::from_states(&states, vec!["tool: x".into(), "seed: 3".into()]);
        let text = db.to_csv();
        let back = DatabaseFile::parse(&text, Path::new("mem")).unwrap();
        assert_eq!(back, db);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn database_header_is_checked() {
        let err = DatabaseFile::parse("a,b\n1,2\n", Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash(&1u8), config_hash(&1u8));
        assert_ne!(config_hash(&1u8), config_hash(&2u8));
        assert_eq!(config_hash(&1u8).len(), 64);
    }
}
