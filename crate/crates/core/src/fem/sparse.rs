//! Compressed sparse rows with a fixed pattern, plus direct factorizations of
//! plain and bordered systems backed by faer.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from (row, col, value) entries; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last = (usize::MAX, usize::MAX);
        for (i, j, v) in trip {
            if (i, j) == last {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = (i, j);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.val
    }

    /// Same pattern, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self { n: self.n, row_ptr: self.row_ptr.clone(), col: self.col.clone(), val: vec![0.0; self.val.len()] }
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.val[s])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    /// `self += a·other` for matrices sharing the pattern.
    pub fn axpy(&mut self, a: f64, other: &CsrMatrix) {
        assert_eq!(self.col.len(), other.col.len());
        for (s, o) in self.val.iter_mut().zip(&other.val) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut m = self.clone();
        m.val.iter_mut().for_each(|v| *v *= a);
        m
    }

    /// `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, a)| a * y[j]).sum::<f64>()).sum()
    }

    /// `Pᵀ A P` for a 0/1 aggregation map `agg[i] = class of i`.
    pub fn aggregate(&self, agg: &[usize], n_classes: usize) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                trip.push((agg[i], agg[j], a));
            }
        }
        CsrMatrix::from_triplets(n_classes, trip)
    }

    fn triplets(&self) -> impl Iterator<Item = Triplet<usize, usize, f64>> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, a)| Triplet::new(i, j, a)))
    }
}

/// Dense extra rows and columns appended to a sparse block:
/// `[A, U; Vᵀ, D]` with `U`, `V` of size `n × m`.
#[derive(Clone, Debug, Default)]
pub struct Border {
    pub cols: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
    /// Row-major `m × m` corner block.
    pub corner: Vec<f64>,
}

impl Border {
    pub fn m(&self) -> usize {
        self.cols.len()
    }

    /// Symmetric border `[A, U; Uᵀ, D]`.
    pub fn symmetric(cols: Vec<Vec<f64>>, corner: Vec<f64>) -> Self {
        Self { rows: cols.clone(), cols, corner }
    }
}

enum Kind {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// Factorized (possibly bordered) system with one step of iterative refinement on solve.
/// Borders are eliminated through a dense Schur complement so the sparse ordering
/// never sees the dense rows.
pub struct Factor {
    kind: Kind,
    a: CsrMatrix,
    border: Border,
    /// `A⁻¹ U` columns.
    a_inv_u: Vec<Vec<f64>>,
    /// LU of `D − Vᵀ A⁻¹ U`.
    schur: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

fn sparse(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &a.triplets().collect::<Vec<_>>())
        .map_err(|e| Error::Solver(format!("assembly: {e:?}")))
}

impl Factor {
    /// Sparse Cholesky of a symmetric positive definite matrix.
    pub fn spd(a: &CsrMatrix) -> Result<Self> {
        let llt = sparse(a)?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky failed, matrix not positive definite: {e:?}")))?;
        Ok(Self { kind: Kind::Llt(llt), a: a.clone(), border: Border::default(), a_inv_u: Vec::new(), schur: None })
    }

    /// Factor of `[A, U; Vᵀ, D]` from a sparse LU of `A`.
    pub fn bordered(a: &CsrMatrix, border: &Border) -> Result<Self> {
        let lu = sparse(a)?.sp_lu().map_err(|e| Error::Solver(format!("LU failed: {e:?}")))?;
        let mut f = Self { kind: Kind::Lu(lu), a: a.clone(), border: border.clone(), a_inv_u: Vec::new(), schur: None };
        let m = border.m();
        if m > 0 {
            f.a_inv_u = border.cols.iter().map(|c| f.sparse_solve(c)).collect();
            let s = nalgebra::DMatrix::from_fn(m, m, |i, j| {
                border.corner[i * m + j] - border.rows[i].iter().zip(&f.a_inv_u[j]).map(|(r, x)| r * x).sum::<f64>()
            });
            let lu = s.lu();
            if !lu.is_invertible() {
                return Err(Error::Solver("bordered system is singular".into()));
            }
            f.schur = Some(lu);
        }
        Ok(f)
    }

    fn sparse_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = match &self.kind {
            Kind::Llt(f) => f.solve(&rhs),
            Kind::Lu(f) => f.solve(&rhs),
        };
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn dim(&self) -> usize {
        self.a.n + self.border.m()
    }

    /// Applies the full bordered operator.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.a.n;
        let m = self.border.m();
        let mut y = self.a.matvec(&x[..n]);
        for (k, c) in self.border.cols.iter().enumerate() {
            let s = x[n + k];
            if s != 0.0 {
                for (yi, ci) in y.iter_mut().zip(c) {
                    *yi += ci * s;
                }
            }
        }
        for i in 0..m {
            let mut v: f64 = self.border.rows[i].iter().zip(&x[..n]).map(|(r, xi)| r * xi).sum();
            for j in 0..m {
                v += self.border.corner[i * m + j] * x[n + j];
            }
            y.push(v);
        }
        y
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.a.n;
        let m = self.border.m();
        let mut x = self.sparse_solve(&b[..n]);
        if let Some(schur) = &self.schur {
            // s = S⁻¹ (b₂ − Vᵀ A⁻¹ b₁), x = A⁻¹ b₁ − A⁻¹U s
            let r = nalgebra::DVector::from_fn(m, |i, _| {
                b[n + i] - self.border.rows[i].iter().zip(&x).map(|(r, v)| r * v).sum::<f64>()
            });
            let s = schur.solve(&r).expect("invertible Schur complement");
            for (k, col) in self.a_inv_u.iter().enumerate() {
                for (xi, c) in x.iter_mut().zip(col) {
                    *xi -= c * s[k];
                }
            }
            x.extend(s.iter());
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim());
        let mut x = self.raw_solve(b);
        let ax = self.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.raw_solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }

    /// `‖b − A x‖ / ‖b‖`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.apply(x);
        let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb == 0.0 {
            r
        } else {
            r / nb
        }
    }
}
