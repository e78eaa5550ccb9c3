//! Dense/sparse measurement operators and the small amount of linear algebra
//! the solvers need on top of nalgebra.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Compressed sparse column copy of a matrix, used only for fast products.
#[derive(Debug, Clone)]
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csc {
    fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut col_ptr = Vec::with_capacity(a.ncols() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in a.column_iter() {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(values.len());
        }
        Csc {
            col_ptr,
            row_idx,
            values,
        }
    }
}

/// Density below which products go through the CSC copy.
const SPARSE_DENSITY: f64 = 0.25;

/// A measurement matrix together with a sparse copy when that pays off.
///
/// Products are single-threaded and therefore bitwise deterministic.
#[derive(Debug, Clone)]
pub struct Design {
    dense: DMatrix<f64>,
    sparse: Option<Csc>,
    norm_sq: OnceLock<f64>,
    pinv: OnceLock<PseudoInverse>,
}

impl Design {
    pub fn new(a: DMatrix<f64>) -> Self {
        let nnz = a.iter().filter(|v| **v != 0.0).count();
        let total = (a.nrows() * a.ncols()).max(1);
        let sparse = if (nnz as f64) < SPARSE_DENSITY * total as f64 {
            Some(Csc::from_dense(&a))
        } else {
            None
        };
        Design {
            dense: a,
            sparse,
            norm_sq: OnceLock::new(),
            pinv: OnceLock::new(),
        }
    }

    /// Cached [`Design::spectral_norm_sq`].
    pub fn lipschitz_sq(&self) -> f64 {
        *self.norm_sq.get_or_init(|| self.spectral_norm_sq())
    }

    /// Cached pseudo-inverse.
    pub fn pseudo_inverse(&self) -> &PseudoInverse {
        self.pinv.get_or_init(|| PseudoInverse::new(self))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn nrows(&self) -> usize {
        self.dense.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.dense.ncols()
    }

    /// `A x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.sparse {
            Some(s) => {
                let mut out = DVector::zeros(self.nrows());
                for (j, &xj) in x.iter().enumerate() {
                    if xj == 0.0 {
                        continue;
                    }
                    for k in s.col_ptr[j]..s.col_ptr[j + 1] {
                        out[s.row_idx[k]] += s.values[k] * xj;
                    }
                }
                out
            }
            None => &self.dense * x,
        }
    }

    /// `Aᵀ r`
    pub fn apply_t(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.sparse {
            Some(s) => DVector::from_iterator(
                self.ncols(),
                (0..self.ncols()).map(|j| {
                    (s.col_ptr[j]..s.col_ptr[j + 1])
                        .map(|k| s.values[k] * r[s.row_idx[k]])
                        .sum::<f64>()
                }),
            ),
            None => self.dense.tr_mul(r),
        }
    }

    /// Largest eigenvalue of `AᵀA` by power iteration (50 iterations, stops
    /// early once the Rayleigh quotient moves by less than 1e-10 relative).
    pub fn spectral_norm_sq(&self) -> f64 {
        let n = self.ncols();
        if n == 0 || self.nrows() == 0 {
            return 0.0;
        }
        // fixed, non-symmetric start so we are not orthogonal to the top vector
        let mut v = DVector::from_iterator(n, (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()));
        v /= v.norm();
        let mut estimate = 0.0;
        for _ in 0..50 {
            let w = self.apply_t(&self.apply(&v));
            let next = v.dot(&w);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            v = w / norm;
            if (next - estimate).abs() <= 1e-10 * next.abs() {
                estimate = next;
                break;
            }
            estimate = next;
        }
        // the Rayleigh quotient underestimates; the final norm ratio is tighter
        let w = self.apply_t(&self.apply(&v));
        estimate.max(w.norm())
    }
}

/// Applies the Moore–Penrose pseudo-inverse of `A` through an eigendecomposition
/// of the smaller Gram matrix.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    wide: bool,
    eigvecs: DMatrix<f64>,
    inv_eigvals: DVector<f64>,
}

impl PseudoInverse {
    pub fn new(design: &Design) -> Self {
        let a = design.matrix();
        let wide = a.nrows() <= a.ncols();
        let gram = if wide { a * a.transpose() } else { a.tr_mul(a) };
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let cutoff = 1e-12 * top.max(f64::MIN_POSITIVE);
        let inv_eigvals = eig
            .eigenvalues
            .map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        PseudoInverse {
            wide,
            eigvecs: eig.eigenvectors,
            inv_eigvals,
        }
    }

    fn gram_pinv(&self, v: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.eigvecs.tr_mul(v).component_mul(&self.inv_eigvals);
        &self.eigvecs * coeffs
    }

    /// `A⁺ r`
    pub fn apply(&self, design: &Design, r: &DVector<f64>) -> DVector<f64> {
        if self.wide {
            design.apply_t(&self.gram_pinv(r))
        } else {
            self.gram_pinv(&design.apply_t(r))
        }
    }
}

/// Least squares restricted to the columns in `support`; `None` when those
/// columns are numerically rank deficient.
pub fn least_squares_on_support(
    a: &DMatrix<f64>,
    support: &[usize],
    y: &DVector<f64>,
) -> Option<DVector<f64>> {
    if support.is_empty() {
        return Some(DVector::zeros(a.ncols()));
    }
    if support.len() > a.nrows() {
        return None;
    }
    let sub = a.select_columns(support);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-10 * smax {
        return None;
    }
    let coef = svd.solve(y, 0.0).ok()?;
    let mut x = DVector::zeros(a.ncols());
    for (k, &j) in support.iter().enumerate() {
        x[j] = coef[k];
    }
    Some(x)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
