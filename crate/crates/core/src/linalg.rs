//! Dense linear-algebra primitives: projectors, singular spectra, orthogonal
//! complements, hyperplane normals and the chordal distance on the Grassmannian.
//!
//! Every decomposition goes through [`singular_spectrum`], which returns a
//! full (square left and right factors) singular value decomposition. Numerical
//! rank is decided by [`rank_tolerance`].

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entries below this magnitude are skipped when fixing the sign of a normal.
pub const SIGN_TOLERANCE: f64 = 1e-12;

/// Real matrix with all entries finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Wraps an nalgebra matrix, rejecting NaN and infinite entries.
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.iter().all(|x| x.is_finite()) {
            Ok(Self(inner))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "row-major entries",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "ragged rows",
                    expected: cols,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, &entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        singular_spectrum(self).spectral_norm()
    }

    /// Smallest singular value over `min(rows, cols)` values.
    pub fn smallest_singular_value(&self) -> f64 {
        singular_spectrum(self).smallest()
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DenseMatrix({}x{}) {:?}",
            self.rows(),
            self.cols(),
            self.to_row_major()
        )
    }
}

impl TryFrom<DMatrix<f64>> for DenseMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

/// Full singular value decomposition `M = L · diag(values) · Rᵀ`.
///
/// `left` is `rows × rows` and `right` is `cols × cols`; both are orthogonal.
/// `values` has `min(rows, cols)` entries, sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    rows: usize,
    cols: usize,
}

impl SingularSpectrum {
    pub fn spectral_norm(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn tolerance(&self) -> f64 {
        rank_tolerance(self.rows, self.cols, self.spectral_norm())
    }

    /// Number of singular values above [`rank_tolerance`].
    pub fn numerical_rank(&self) -> usize {
        let tol = self.tolerance();
        self.values.iter().filter(|&&s| s > tol).count()
    }

    /// Rebuilds `L · diag(values) · Rᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.values.len();
        let l = self.left.columns(0, k);
        let r = self.right.columns(0, k);
        let s = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        l * s * r.transpose()
    }
}

/// Singular values at or below this threshold count as zero:
/// `max(rows, cols) · ε_machine · σ_max`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn singular_spectrum(m: &DenseMatrix) -> SingularSpectrum {
    let (rows, cols) = (m.rows(), m.cols());
    if rows >= cols {
        let (values, left, right) = full_svd_tall(m.as_matrix());
        SingularSpectrum {
            values,
            left,
            right,
            rows,
            cols,
        }
    } else {
        let (values, right, left) = full_svd_tall(&m.as_matrix().transpose());
        SingularSpectrum {
            values,
            left,
            right,
            rows,
            cols,
        }
    }
}

/// Full SVD of a matrix with `rows >= cols`. The thin left factor is completed
/// to a square orthogonal matrix with the Householder Q of its own QR
/// factorization, whose trailing columns span the orthogonal complement.
fn full_svd_tall(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = (m.nrows(), m.ncols());
    if cols == 0 {
        return (
            Vec::new(),
            DMatrix::identity(rows, rows),
            DMatrix::zeros(0, 0),
        );
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");

    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].max(0.0))
        .collect();

    let mut left = DMatrix::zeros(rows, rows);
    let mut right = DMatrix::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v_t.row(src).transpose());
    }
    if rows > cols {
        let thin = left.columns(0, cols).into_owned();
        let qr = thin.qr();
        let mut q_t = DMatrix::identity(rows, rows);
        qr.q_tr_mul(&mut q_t);
        let q = q_t.transpose();
        for j in cols..rows {
            left.set_column(j, &q.column(j));
        }
    }
    (values, left, right)
}

fn require_full_column_rank(spec: &SingularSpectrum, cols: usize) -> Result<()> {
    let rank = spec.numerical_rank();
    if rank < cols {
        Err(Error::RankDeficient {
            expected: cols,
            found: rank,
            index: None,
        })
    } else {
        Ok(())
    }
}

/// Orthogonal projector onto `span(M)` for a full-column-rank `M`.
pub fn projection_operator(m: &DenseMatrix) -> Result<DenseMatrix> {
    let basis = SubspaceBasis::span_of(m)?;
    Ok(basis.projector())
}

/// Orthonormal basis of `span(M)^⊥` for a full-column-rank `M`.
pub fn orthogonal_complement(m: &DenseMatrix) -> Result<SubspaceBasis> {
    let spec = singular_spectrum(m);
    require_full_column_rank(&spec, m.cols())?;
    let k = m.cols();
    let basis = spec.left.columns(k, m.rows() - k).into_owned();
    Ok(SubspaceBasis { basis })
}

/// Unit normal of the hyperplane spanned by the columns of an `(r+1) × r`
/// matrix, with its first significant entry made positive.
pub fn hyperplane_normal(v: &DenseMatrix) -> Result<DVector<f64>> {
    if v.rows() != v.cols() + 1 {
        return Err(Error::DimensionMismatch {
            context: "hyperplane rows (r+1)",
            expected: v.cols() + 1,
            found: v.rows(),
        });
    }
    let spec = singular_spectrum(v);
    require_full_column_rank(&spec, v.cols())?;
    let mut b = spec.left.column(v.cols()).into_owned();
    canonicalize_sign(&mut b);
    Ok(b)
}

pub(crate) fn canonicalize_sign(b: &mut DVector<f64>) {
    if let Some(&first) = b.iter().find(|x| x.abs() > SIGN_TOLERANCE) {
        if first < 0.0 {
            b.neg_mut();
        }
    }
}

/// Orthonormal `m × r` basis; a point on the Grassmannian `Gr(r, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Orthonormality tolerance on `‖BᵀB − I‖` entries.
    pub const ORTHONORMAL_TOL: f64 = 1e-10;

    /// Accepts a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::DimensionMismatch {
                context: "subspace dimension <= ambient dimension",
                expected: basis.nrows(),
                found: basis.ncols(),
            });
        }
        let gram = basis.transpose() * &basis;
        let k = basis.ncols();
        let off = (gram - DMatrix::<f64>::identity(k, k)).amax();
        if off.is_nan() || off > Self::ORTHONORMAL_TOL {
            return Err(Error::InvalidConfig {
                field: "basis",
                message: format!("columns are not orthonormal (max deviation {off:e})"),
            });
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis for the column span of a full-column-rank matrix.
    pub fn span_of(m: &DenseMatrix) -> Result<Self> {
        let spec = singular_spectrum(m);
        require_full_column_rank(&spec, m.cols())?;
        Ok(Self {
            basis: spec.left.columns(0, m.cols()).into_owned(),
        })
    }

    pub(crate) fn from_columns_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix(self.basis.clone())
    }

    pub fn projector(&self) -> DenseMatrix {
        DenseMatrix(&self.basis * self.basis.transpose())
    }
}

/// `(1/√2)·‖P₁ − P₂‖_F`.
pub fn chordal_distance(s1: &SubspaceBasis, s2: &SubspaceBasis) -> Result<f64> {
    if s1.ambient_dim() != s2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "chordal distance ambient dimension",
            expected: s1.ambient_dim(),
            found: s2.ambient_dim(),
        });
    }
    let diff = s1.projector().into_inner() - s2.projector().into_inner();
    Ok(diff.norm() / std::f64::consts::SQRT_2)
}

/// Spectral norm of the Moore-Penrose pseudo-inverse, `1/σ_min` over the
/// nonzero singular values. Infinite for a numerically zero matrix.
pub fn pseudo_inverse_norm(m: &DenseMatrix) -> f64 {
    let spec = singular_spectrum(m);
    let tol = spec.tolerance();
    spec.values
        .iter()
        .rev()
        .find(|&&s| s > tol)
        .map_or(f64::INFINITY, |s| 1.0 / s)
}
