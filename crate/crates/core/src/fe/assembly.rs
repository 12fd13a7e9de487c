use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::quadrature::Quadrature;
use crate::{Error, Result};

/// Map from full DOFs to the reduced unknowns of a constrained system.
///
/// A DOF is either fixed (eliminated, its value prescribed), free (its own
/// unknown), or part of a tied group sharing one unknown. Tied groups model
/// rigid grips whose only known datum is the force resultant.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    map: Vec<Option<usize>>,
    fixed: Vec<usize>,
    n_reduced: usize,
}

impl DofMap {
    pub fn new(n_dofs: usize, fixed: &[usize], tied: &[Vec<usize>]) -> Result<Self> {
        const FIXED: usize = usize::MAX;
        const UNSET: usize = usize::MAX - 1;
        let mut tag = vec![UNSET; n_dofs];
        for &d in fixed {
            if d >= n_dofs {
                return Err(Error::BoundaryConditions(format!("constrained DOF {d} out of range")));
            }
            tag[d] = FIXED;
        }
        for (g, group) in tied.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::BoundaryConditions(format!("tied group {g} is empty")));
            }
            for &d in group {
                if d >= n_dofs {
                    return Err(Error::BoundaryConditions(format!("tied DOF {d} out of range")));
                }
                if tag[d] != UNSET {
                    return Err(Error::BoundaryConditions(format!("DOF {d} is both tied and constrained")));
                }
                tag[d] = g;
            }
        }
        let mut group_index = vec![None; tied.len()];
        let mut map = vec![None; n_dofs];
        let mut n_reduced = 0;
        for d in 0..n_dofs {
            match tag[d] {
                FIXED => {}
                UNSET => {
                    map[d] = Some(n_reduced);
                    n_reduced += 1;
                }
                g => {
                    let idx = *group_index[g].get_or_insert_with(|| {
                        n_reduced += 1;
                        n_reduced - 1
                    });
                    map[d] = Some(idx);
                }
            }
        }
        let mut fixed: Vec<usize> = fixed.to_vec();
        fixed.sort_unstable();
        fixed.dedup();
        Ok(Self { map, fixed, n_reduced })
    }

    pub fn n_full(&self) -> usize {
        self.map.len()
    }

    pub fn n_reduced(&self) -> usize {
        self.n_reduced
    }

    pub fn reduced(&self, d: usize) -> Option<usize> {
        self.map[d]
    }

    pub fn is_fixed(&self, d: usize) -> bool {
        self.map[d].is_none()
    }

    /// Sorted constrained DOFs.
    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    /// `Tᵀ·v`: sums full-vector entries into their reduced unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_reduced];
        for (d, m) in self.map.iter().enumerate() {
            if let Some(i) = m {
                r[*i] += full[d];
            }
        }
        r
    }

    /// Reads the reduced unknowns back out of a vector built by
    /// [`DofMap::prolong_into`].
    pub fn pick(&self, full: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_reduced];
        for (d, m) in self.map.iter().enumerate() {
            if let Some(i) = m {
                r[*i] = full[d];
            }
        }
        r
    }

    /// Writes `T·x` into the non-fixed entries of `full`.
    pub fn prolong_into(&self, reduced: &[f64], full: &mut [f64]) {
        for (d, m) in self.map.iter().enumerate() {
            if let Some(i) = m {
                full[d] = reduced[*i];
            }
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        crate::par::map_range(self.n, |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
        })
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 { worst / scale } else { 0.0 }
    }
}

/// Assembles `Σ w_e B_eᵀ C B_e` over all quadrature points.
///
/// The upper triangle of each point contribution is computed once and
/// mirrored, so the result is exactly symmetric.
pub fn assemble_stiffness(quad: &Quadrature, c: &Matrix3<f64>) -> CsrMatrix {
    let n = quad.n_dofs();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut last_elem = usize::MAX;
    for qp in quad.points() {
        if qp.element == last_elem {
            continue;
        }
        last_elem = qp.element;
        for &a in qp.dofs {
            adj[a].extend_from_slice(qp.dofs);
        }
    }
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    indptr.push(0);
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
        indices.extend_from_slice(row);
        indptr.push(indices.len());
    }
    drop(adj);
    let mut k = CsrMatrix {
        n,
        indptr,
        indices,
        data: Vec::new(),
    };
    k.data = vec![0.0; k.indices.len()];

    let locals = crate::par::map_range(quad.len(), |p| {
        let qp = quad.point(p);
        let m = qp.b.len();
        let cb: Vec<[f64; 3]> = qp
            .b
            .iter()
            .map(|col| {
                let v = c * nalgebra::Vector3::from(*col);
                [v[0], v[1], v[2]]
            })
            .collect();
        let mut ke = vec![0.0; m * m];
        for a in 0..m {
            for b in a..m {
                let ba = qp.b[a];
                let v = qp.weight * (ba[0] * cb[b][0] + ba[1] * cb[b][1] + ba[2] * cb[b][2]);
                ke[a * m + b] = v;
                ke[b * m + a] = v;
            }
        }
        ke
    });
    for (p, ke) in locals.iter().enumerate() {
        let qp = quad.point(p);
        let m = qp.dofs.len();
        for (a, &ga) in qp.dofs.iter().enumerate() {
            let r = k.indptr[ga]..k.indptr[ga + 1];
            let cols = &k.indices[r.clone()];
            for (b, &gb) in qp.dofs.iter().enumerate() {
                let pos = r.start + cols.binary_search(&gb).expect("pattern covers element DOFs");
                k.data[pos] += ke[a * m + b];
            }
        }
    }
    k
}

/// Pseudo-stiffness matrix restricted to the reduced unknowns, with its
/// sparse Cholesky factorization.
///
/// Immutable once built; one factorization serves any number of solves
/// with physical or homogeneous Dirichlet data.
pub struct FactorizedOperator {
    k: CsrMatrix,
    dofs: DofMap,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for FactorizedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactorizedOperator")
            .field("n_full", &self.dofs.n_full())
            .field("n_reduced", &self.dofs.n_reduced())
            .field("nnz", &self.k.nnz())
            .finish()
    }
}

impl FactorizedOperator {
    pub fn new(quad: &Quadrature, c: &Matrix3<f64>, dofs: DofMap) -> Result<Self> {
        if dofs.n_full() != quad.n_dofs() {
            return Err(Error::Dimension {
                what: "DOF map",
                expected: quad.n_dofs(),
                got: dofs.n_full(),
            });
        }
        if dofs.n_reduced() == 0 {
            return Err(Error::BoundaryConditions("every DOF is constrained".into()));
        }
        let k = assemble_stiffness(quad, c);
        let mut trip = Vec::with_capacity(k.nnz());
        for i in 0..k.n {
            let Some(ri) = dofs.reduced(i) else { continue };
            let (cols, vals) = k.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(rj) = dofs.reduced(j) {
                    trip.push(Triplet::new(ri, rj, v));
                }
            }
        }
        let nr = dofs.n_reduced();
        let kr = SparseColMat::<usize, f64>::try_new_from_triplets(nr, nr, &trip)
            .map_err(|e| Error::Solver(format!("sparse matrix construction: {e:?}")))?;
        let llt = kr.sp_cholesky(Side::Lower).map_err(|e| {
            Error::UnderConstrained(format!("factorization of the reduced operator failed ({e:?})"))
        })?;
        let op = Self { k, dofs, llt };
        op.check_nonsingular()?;
        Ok(op)
    }

    /// Floating-point Cholesky can succeed on a singular matrix with tiny
    /// pivots; a solve against a known solution exposes that.
    fn check_nonsingular(&self) -> Result<()> {
        let nr = self.dofs.n_reduced();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let r: Vec<f64> = (0..nr).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut x = self.apply_reduced(&r);
        self.solve_reduced_in_place(&mut x);
        let err: f64 = x.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nrm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(err <= 1e-4 * nrm) {
            return Err(Error::UnderConstrained(format!(
                "reduced operator is numerically singular (round-trip error {:.3e})",
                err / nrm
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_full()
    }

    /// `Tᵀ K T x` for a reduced vector.
    pub fn apply_reduced(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs()];
        self.dofs.prolong_into(x, &mut full);
        self.dofs.restrict(&self.k.matvec(&full))
    }

    pub fn solve_reduced_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(x, n, 1));
    }

    /// Solves several reduced systems at once; `data` holds the right-hand
    /// sides column by column.
    pub fn solve_reduced_batch(&self, data: &mut [f64]) {
        let n = self.dofs.n_reduced();
        assert_eq!(data.len() % n, 0, "batch is not a whole number of columns");
        let cols = data.len() / n;
        if cols > 0 {
            self.llt.solve_in_place(MatMut::from_column_major_slice_mut(data, n, cols));
        }
    }

    fn check_len(&self, v: &[f64], what: &'static str) -> Result<()> {
        if v.len() != self.n_dofs() {
            return Err(Error::Dimension {
                what,
                expected: self.n_dofs(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Solves `K u = rhs` at the unconstrained DOFs with `u = value` at the
    /// listed constrained DOFs (omitted constrained DOFs are zero).
    pub fn solve(&self, rhs: &[f64], dirichlet: &[(usize, f64)]) -> Result<Vec<f64>> {
        self.check_len(rhs, "right-hand side")?;
        let mut u = vec![0.0; self.n_dofs()];
        for &(d, v) in dirichlet {
            if d >= u.len() || !self.dofs.is_fixed(d) {
                return Err(Error::BoundaryConditions(format!("DOF {d} is not constrained by this operator")));
            }
            if !v.is_finite() {
                return Err(Error::BoundaryConditions(format!("non-finite value at DOF {d}")));
            }
            u[d] = v;
        }
        let mut r = rhs.to_vec();
        if dirichlet.iter().any(|&(_, v)| v != 0.0) {
            let ku = self.k.matvec(&u);
            for (ri, k) in r.iter_mut().zip(ku) {
                *ri -= k;
            }
        }
        let mut x = self.dofs.restrict(&r);
        self.solve_reduced_in_place(&mut x);
        self.dofs.prolong_into(&x, &mut u);
        Ok(u)
    }

    /// Homogeneous-Dirichlet solves for several right-hand sides sharing one
    /// factorization.
    pub fn solve_homogeneous_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for r in rhs {
            self.check_len(r, "right-hand side")?;
        }
        let nr = self.dofs.n_reduced();
        let mut data = Vec::with_capacity(nr * rhs.len());
        for r in rhs {
            data.extend(self.dofs.restrict(r));
        }
        self.solve_reduced_batch(&mut data);
        Ok(data
            .chunks(nr)
            .map(|x| {
                let mut u = vec![0.0; self.n_dofs()];
                self.dofs.prolong_into(x, &mut u);
                u
            })
            .collect())
    }

    /// `‖Tᵀ(K u − rhs)‖ / ‖Tᵀ rhs‖` over the reduced unknowns (absolute when
    /// the reduced right-hand side vanishes).
    pub fn relative_residual(&self, u: &[f64], rhs: &[f64]) -> f64 {
        let ku = self.k.matvec(u);
        let diff: Vec<f64> = ku.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let num = norm(&self.dofs.restrict(&diff));
        let den = norm(&self.dofs.restrict(rhs));
        if den > 0.0 { num / den } else { num }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
