//! The kernel estimator `Û = ker Bᵀ` built from the unit normals of the
//! observed hyperplane projections.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    hyperplane_normal, rank_tolerance, singular_spectrum, DenseMatrix, SubspaceBasis,
};
use crate::sampling::SamplingPattern;

/// Tolerance for `V = U + Z` when all three lists are supplied.
pub const DECOMPOSITION_TOL: f64 = 1e-12;

/// Observed projections `V^Ω_i`, optionally with the noiseless `U^Ω_i` and
/// noise `Z^Ω_i` they were formed from.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pattern: SamplingPattern,
    v_list: Vec<DenseMatrix>,
    u_list: Option<Vec<DenseMatrix>>,
    z_list: Option<Vec<DenseMatrix>>,
}

impl ProjectionSet {
    pub fn new(pattern: SamplingPattern, v_list: Vec<DenseMatrix>) -> Result<Self> {
        check_shapes(&pattern, &v_list)?;
        Ok(Self {
            pattern,
            v_list,
            u_list: None,
            z_list: None,
        })
    }

    /// Attaches noiseless projections and derives the noise as `Z = V − U`.
    pub fn with_truth(mut self, u_list: Vec<DenseMatrix>) -> Result<Self> {
        check_shapes(&self.pattern, &u_list)?;
        let z_list = self
            .v_list
            .iter()
            .zip(&u_list)
            .map(|(v, u)| DenseMatrix::new(v.as_matrix() - u.as_matrix()))
            .collect::<Result<Vec<_>>>()?;
        self.u_list = Some(u_list);
        self.z_list = Some(z_list);
        Ok(self)
    }

    /// Attaches noise only (no noiseless projections available).
    pub fn with_noise(mut self, z_list: Vec<DenseMatrix>) -> Result<Self> {
        check_shapes(&self.pattern, &z_list)?;
        self.z_list = Some(z_list);
        Ok(self)
    }

    /// Builds `V = U + Z` from both components.
    pub fn from_parts(
        pattern: SamplingPattern,
        u_list: Vec<DenseMatrix>,
        z_list: Vec<DenseMatrix>,
    ) -> Result<Self> {
        check_shapes(&pattern, &u_list)?;
        check_shapes(&pattern, &z_list)?;
        let v_list = u_list
            .iter()
            .zip(&z_list)
            .map(|(u, z)| DenseMatrix::new(u.as_matrix() + z.as_matrix()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pattern,
            v_list,
            u_list: Some(u_list),
            z_list: Some(z_list),
        })
    }

    /// Exact projections of `U` onto every `Ω_i`, with zero noise.
    pub fn noiseless(pattern: SamplingPattern, u: &DenseMatrix) -> Result<Self> {
        if u.rows() != pattern.m() || u.cols() != pattern.r() {
            return Err(Error::DimensionMismatch {
                context: "basis rows vs pattern m",
                expected: pattern.m(),
                found: u.rows(),
            });
        }
        let u_list = pattern
            .omegas()
            .iter()
            .map(|o| restrict_rows(u, o))
            .collect::<Result<Vec<_>>>()?;
        let z_list = u_list
            .iter()
            .map(|x| DenseMatrix::zeros(x.rows(), x.cols()))
            .collect();
        Ok(Self {
            pattern,
            v_list: u_list.clone(),
            u_list: Some(u_list),
            z_list: Some(z_list),
        })
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    pub fn v_list(&self) -> &[DenseMatrix] {
        &self.v_list
    }

    pub fn u_list(&self) -> Option<&[DenseMatrix]> {
        self.u_list.as_deref()
    }

    pub fn z_list(&self) -> Option<&[DenseMatrix]> {
        self.z_list.as_deref()
    }

    /// Checks `V = U + Z` entrywise when all three lists are present.
    pub fn is_consistent(&self) -> bool {
        match (&self.u_list, &self.z_list) {
            (Some(u), Some(z)) => self.v_list.iter().zip(u).zip(z).all(|((v, u), z)| {
                (v.as_matrix() - u.as_matrix() - z.as_matrix()).amax() <= DECOMPOSITION_TOL
            }),
            _ => true,
        }
    }
}

fn check_shapes(pattern: &SamplingPattern, list: &[DenseMatrix]) -> Result<()> {
    if list.len() != pattern.len() {
        return Err(Error::DimensionMismatch {
            context: "number of projections",
            expected: pattern.len(),
            found: list.len(),
        });
    }
    for (omega, mat) in pattern.omegas().iter().zip(list) {
        if mat.rows() != omega.len() {
            return Err(Error::DimensionMismatch {
                context: "projection rows vs |Ω_i|",
                expected: omega.len(),
                found: mat.rows(),
            });
        }
        if mat.cols() != pattern.r() {
            return Err(Error::DimensionMismatch {
                context: "projection columns vs r",
                expected: pattern.r(),
                found: mat.cols(),
            });
        }
    }
    Ok(())
}

/// Rows of `u` listed in `omega`, in that order.
pub fn restrict_rows(u: &DenseMatrix, omega: &[usize]) -> Result<DenseMatrix> {
    if let Some(&bad) = omega.iter().find(|&&k| k >= u.rows()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            bound: u.rows(),
        });
    }
    Ok(DenseMatrix::new(u.as_matrix().select_rows(omega)).expect("rows of a finite matrix"))
}

/// Scatters `b_omega` into an `m`-vector at the coordinates of `omega`.
pub fn lift(b_omega: &DVector<f64>, omega: &[usize], m: usize) -> Result<DVector<f64>> {
    if b_omega.len() != omega.len() {
        return Err(Error::DimensionMismatch {
            context: "lifted vector length vs |Ω|",
            expected: omega.len(),
            found: b_omega.len(),
        });
    }
    let mut out = DVector::zeros(m);
    for (&k, &x) in omega.iter().zip(b_omega.iter()) {
        if k >= m {
            return Err(Error::IndexOutOfRange { index: k, bound: m });
        }
        out[k] = x;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalSource {
    /// Normals of the observed `V^Ω_i` (the matrix `B`).
    Observed,
    /// Normals of the noiseless `U^Ω_i` (the matrix `A`), sign-aligned to `B`.
    Noiseless,
}

/// `m × N` matrix whose column `i` is the lifted unit normal of projection `i`.
#[derive(Debug, Clone)]
pub struct NormalMatrix {
    matrix: DenseMatrix,
}

impl NormalMatrix {
    pub fn as_dense(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.matrix.as_matrix()
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.as_matrix().column(i).into_owned()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.cols()
    }

    /// `σ(B)`, the smallest singular value.
    pub fn smallest_singular_value(&self) -> f64 {
        self.matrix.smallest_singular_value()
    }

    pub fn from_columns(matrix: DenseMatrix) -> Self {
        Self { matrix }
    }
}

fn local_normals(list: &[DenseMatrix]) -> Result<Vec<DVector<f64>>> {
    list.iter()
        .enumerate()
        .map(|(i, m)| hyperplane_normal(m).map_err(|e| e.with_index(i)))
        .collect()
}

fn assemble(pattern: &SamplingPattern, locals: &[DVector<f64>]) -> Result<NormalMatrix> {
    let mut matrix = DMatrix::zeros(pattern.m(), locals.len());
    for (i, (b, omega)) in locals.iter().zip(pattern.omegas()).enumerate() {
        matrix.set_column(i, &lift(b, omega, pattern.m())?);
    }
    Ok(NormalMatrix {
        matrix: DenseMatrix::new(matrix)?,
    })
}

/// Per-projection unit normals restricted to `Ω_i` (`b^Ω_i` or sign-aligned `a^Ω_i`).
pub fn projection_normals(ps: &ProjectionSet, source: NormalSource) -> Result<Vec<DVector<f64>>> {
    match source {
        NormalSource::Observed => local_normals(ps.v_list()),
        NormalSource::Noiseless => {
            let u_list = ps.u_list().ok_or(Error::MissingTruth)?;
            let mut a = local_normals(u_list)?;
            // Align so that ⟨a_i, b_i⟩ ≥ 0 against the observed normals.
            let b = local_normals(ps.v_list())?;
            for (a_i, b_i) in a.iter_mut().zip(&b) {
                if a_i.dot(b_i) < 0.0 {
                    a_i.neg_mut();
                }
            }
            Ok(a)
        }
    }
}

pub fn build_normal_matrix(ps: &ProjectionSet, source: NormalSource) -> Result<NormalMatrix> {
    let locals = projection_normals(ps, source)?;
    assemble(ps.pattern(), &locals)
}

/// Result of the kernel estimator: the subspace and the `σ(B)` from the same
/// decomposition.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub basis: SubspaceBasis,
    pub sigma_b: f64,
}

/// Orthonormal basis of `span(B)^⊥ = ker Bᵀ`; an error if the kernel has
/// dimension other than `m − N`, i.e. `B` is not of full column rank.
pub fn estimate_subspace(b: &NormalMatrix) -> Result<SubspaceBasis> {
    estimate(b).map(|e| e.basis)
}

pub fn estimate(b: &NormalMatrix) -> Result<Estimate> {
    let spec = singular_spectrum(b.as_dense());
    let (m, n) = (b.as_dense().rows(), b.ncols());
    let rank = spec.numerical_rank();
    if rank < n {
        return Err(Error::IdentifiabilityFailure {
            expected: n,
            found: rank,
            kernel_dim: m - rank,
        });
    }
    let basis = spec.left.columns(n, m - n).into_owned();
    Ok(Estimate {
        basis: SubspaceBasis::from_columns_unchecked(basis),
        sigma_b: spec.smallest(),
    })
}

/// Runs the full estimator on the observed projections.
pub fn estimate_from_projections(ps: &ProjectionSet) -> Result<Estimate> {
    estimate(&build_normal_matrix(ps, NormalSource::Observed)?)
}

/// `α` such that `U_omega` has the column-echelon basis `[I; αᵀ]`. The vector
/// `(αᵀ, −1)ᵀ` is then normal to the projection.
pub fn echelon_alpha(u_omega: &DenseMatrix) -> Result<DVector<f64>> {
    let r = u_omega.cols();
    if u_omega.rows() != r + 1 {
        return Err(Error::DimensionMismatch {
            context: "echelon rows (r+1)",
            expected: r + 1,
            found: u_omega.rows(),
        });
    }
    let top = u_omega.as_matrix().rows(0, r).into_owned();
    let top_dense = DenseMatrix::new(top.clone())?;
    let spec = singular_spectrum(&top_dense);
    let tol = rank_tolerance(r, r, spec.spectral_norm());
    if spec.smallest() <= tol {
        return Err(Error::EchelonDegenerate);
    }
    // [I; αᵀ] = U·T⁻¹, so αᵀ = last_row·T⁻¹, i.e. Tᵀα = last_rowᵀ.
    let last = u_omega.as_matrix().row(r).transpose();
    top.transpose()
        .lu()
        .solve(&last)
        .ok_or(Error::EchelonDegenerate)
}
