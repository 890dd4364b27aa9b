//! The perturbation bound
//!
//! ```text
//! d_G(U, Û) ≤ ε·√(2r(m−r)) / (δ·σ(B))
//! ```
//!
//! with `ε = maxᵢ ‖Zᵢ‖₂`, `δ = minᵢ σ(Vᵢ)` and `σ(B)` the smallest singular
//! value of the normal matrix, plus the per-projection quantities the bound is
//! assembled from.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{
    build_normal_matrix, estimate, projection_normals, NormalSource, ProjectionSet,
};
use crate::linalg::{
    chordal_distance, pseudo_inverse_norm, singular_spectrum, DenseMatrix, SubspaceBasis,
};

/// Largest spectral norm over the noise matrices.
pub fn epsilon_of(z_list: &[DenseMatrix]) -> Result<f64> {
    if z_list.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(z_list
        .iter()
        .map(DenseMatrix::spectral_norm)
        .fold(0.0, f64::max))
}

/// Smallest singular value over the observed projections.
pub fn delta_of(v_list: &[DenseMatrix]) -> Result<f64> {
    if v_list.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut delta = f64::INFINITY;
    for (i, v) in v_list.iter().enumerate() {
        let spec = singular_spectrum(v);
        let rank = spec.numerical_rank();
        let full = v.rows().min(v.cols());
        if rank < full {
            return Err(Error::RankDeficient {
                expected: full,
                found: rank,
                index: Some(i),
            });
        }
        delta = delta.min(spec.smallest());
    }
    Ok(delta)
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveDenominator { name, value })
    }
}

/// `√(2r(m−r))`, the degrees-of-freedom factor of `Gr(r, m)`.
pub fn dof_factor(m: usize, r: usize) -> f64 {
    (2.0 * r as f64 * (m - r) as f64).sqrt()
}

pub fn perturbation_bound(
    epsilon: f64,
    delta: f64,
    sigma_b: f64,
    m: usize,
    r: usize,
) -> Result<f64> {
    positive("delta", delta)?;
    positive("sigma_B", sigma_b)?;
    if r == 0 || r >= m {
        return Err(Error::InvalidDimensions { m, r });
    }
    Ok(epsilon * dof_factor(m, r) / (delta * sigma_b))
}

/// `ε√(2r)/δ`: bounds both `‖P_{Uᵢ} − P_{Vᵢ}‖_F` and `‖aᵢ − bᵢ‖`.
pub fn projection_bound(epsilon: f64, delta: f64, r: usize) -> Result<f64> {
    positive("delta", delta)?;
    Ok(epsilon * (2.0 * r as f64).sqrt() / delta)
}

/// `ε√(2r(m−r))/δ`: bounds `‖A − B‖_F`.
pub fn normal_matrix_bound(epsilon: f64, delta: f64, m: usize, r: usize) -> Result<f64> {
    positive("delta", delta)?;
    Ok(epsilon * dof_factor(m, r) / delta)
}

/// Right-hand side of the projector perturbation inequality
/// `‖P₁ − P₂‖_F ≤ √2·‖M₁ − M₂‖_F·min(‖M₁†‖, ‖M₂†‖)`.
pub fn projector_perturbation_rhs(m1: &DenseMatrix, m2: &DenseMatrix) -> f64 {
    let diff = (m1.as_matrix() - m2.as_matrix()).norm();
    std::f64::consts::SQRT_2 * diff * pseudo_inverse_norm(m1).min(pseudo_inverse_norm(m2))
}

#[derive(Debug, Clone, Default)]
pub struct BoundOptions {
    /// Replaces the data-derived ε.
    pub epsilon_override: Option<f64>,
    /// Replaces the data-derived δ.
    pub delta_override: Option<f64>,
    /// Fail with [`Error::MissingNoise`] when ε cannot be determined.
    pub require_epsilon: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub m: usize,
    pub r: usize,
    pub epsilon: Option<f64>,
    pub delta: f64,
    #[serde(rename = "sigma_B")]
    pub sigma_b: f64,
    pub bound: Option<f64>,
    /// The bound divided by ε, available without noise information.
    pub bound_per_unit_epsilon: f64,
    pub sqrt_r: f64,
    #[serde(rename = "d_G")]
    pub d_g: Option<f64>,
}

impl BoundReport {
    pub fn bound_holds(&self) -> Option<bool> {
        Some(self.d_g? <= self.bound?)
    }
}

/// Runs the estimator and assembles every ingredient of the bound.
pub fn bound_report(
    ps: &ProjectionSet,
    ground_truth: Option<&SubspaceBasis>,
    opts: &BoundOptions,
) -> Result<(BoundReport, SubspaceBasis)> {
    let p = ps.pattern();
    let (m, r) = (p.m(), p.r());
    let est = estimate(&build_normal_matrix(ps, NormalSource::Observed)?)?;
    let delta = match opts.delta_override {
        Some(d) => d,
        None => delta_of(ps.v_list())?,
    };
    let epsilon = match (opts.epsilon_override, ps.z_list()) {
        (Some(e), _) => Some(e),
        (None, Some(z)) => Some(epsilon_of(z)?),
        (None, None) if opts.require_epsilon => return Err(Error::MissingNoise),
        (None, None) => None,
    };
    let bound_per_unit_epsilon = perturbation_bound(1.0, delta, est.sigma_b, m, r)?;
    let bound = epsilon
        .map(|e| perturbation_bound(e, delta, est.sigma_b, m, r))
        .transpose()?;
    let d_g = ground_truth
        .map(|t| chordal_distance(t, &est.basis))
        .transpose()?;
    Ok((
        BoundReport {
            m,
            r,
            epsilon,
            delta,
            sigma_b: est.sigma_b,
            bound,
            bound_per_unit_epsilon,
            sqrt_r: (r as f64).sqrt(),
            d_g,
        },
        est.basis,
    ))
}

/// Measured and bounded quantities for one projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionDiagnostics {
    pub index: usize,
    /// `‖P_{Uᵢ} − P_{Vᵢ}‖_F`
    pub projector_gap: f64,
    /// `‖(I − P_{Uᵢ}) − (I − P_{Vᵢ})‖_F`
    pub complement_gap: f64,
    /// `√2·‖Zᵢ‖_F·min(‖Uᵢ†‖, ‖Vᵢ†‖)`
    pub perturbation_rhs: f64,
    /// `‖aᵢ − bᵢ‖` after sign alignment
    pub normal_gap: f64,
}

/// The chain of intermediate inequalities leading to the main bound,
/// evaluated on one projection set with known ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofChainReport {
    pub epsilon: f64,
    pub delta: f64,
    pub sigma_b: f64,
    pub per_projection: Vec<ProjectionDiagnostics>,
    /// `ε√(2r)/δ`
    pub projection_bound: f64,
    /// `‖A − B‖_F`
    pub normal_matrix_gap: f64,
    /// `ε√(2r(m−r))/δ`
    pub normal_matrix_bound: f64,
    /// `‖P_A − P_B‖_F`
    pub normal_projector_gap: f64,
    /// `√2·ε√(2r(m−r))/(δσ(B))`
    pub normal_projector_bound: f64,
}

impl ProofChainReport {
    /// Every inequality of the chain holds (the complement equality to `tol`).
    pub fn all_hold(&self, tol: f64) -> bool {
        self.per_projection.iter().all(|d| {
            (d.projector_gap - d.complement_gap).abs() <= tol
                && d.projector_gap <= d.perturbation_rhs
                && d.projector_gap <= self.projection_bound
                && d.normal_gap <= self.projection_bound
        }) && self.normal_matrix_gap <= self.normal_matrix_bound
            && self.normal_projector_gap <= self.normal_projector_bound
    }
}

pub fn proof_chain(ps: &ProjectionSet) -> Result<ProofChainReport> {
    let p = ps.pattern();
    let (m, r) = (p.m(), p.r());
    let u_list = ps.u_list().ok_or(Error::MissingTruth)?;
    let z_list = ps.z_list().ok_or(Error::MissingNoise)?;
    let epsilon = epsilon_of(z_list)?;
    let delta = delta_of(ps.v_list())?;

    let b_local = projection_normals(ps, NormalSource::Observed)?;
    let a_local = projection_normals(ps, NormalSource::Noiseless)?;

    let mut per_projection = Vec::with_capacity(p.len());
    for (i, (u, v)) in u_list.iter().zip(ps.v_list()).enumerate() {
        let pu = SubspaceBasis::span_of(u)
            .map_err(|e| e.with_index(i))?
            .projector();
        let pv = SubspaceBasis::span_of(v)
            .map_err(|e| e.with_index(i))?
            .projector();
        let id = nalgebra::DMatrix::<f64>::identity(u.rows(), u.rows());
        let gap = (pu.as_matrix() - pv.as_matrix()).norm();
        let complement_gap = ((&id - pu.as_matrix()) - (&id - pv.as_matrix())).norm();
        per_projection.push(ProjectionDiagnostics {
            index: i,
            projector_gap: gap,
            complement_gap,
            perturbation_rhs: projector_perturbation_rhs(u, v),
            normal_gap: (&a_local[i] - &b_local[i]).norm(),
        });
    }

    let a = build_normal_matrix(ps, NormalSource::Noiseless)?;
    let b = build_normal_matrix(ps, NormalSource::Observed)?;
    let sigma_b = b.smallest_singular_value();
    let pa = SubspaceBasis::span_of(a.as_dense())?.projector();
    let pb = SubspaceBasis::span_of(b.as_dense())?.projector();

    let normal_matrix_bound = normal_matrix_bound(epsilon, delta, m, r)?;
    Ok(ProofChainReport {
        epsilon,
        delta,
        sigma_b,
        per_projection,
        projection_bound: projection_bound(epsilon, delta, r)?,
        normal_matrix_gap: (a.as_matrix() - b.as_matrix()).norm(),
        normal_matrix_bound,
        normal_projector_gap: (pa.as_matrix() - pb.as_matrix()).norm(),
        normal_projector_bound: std::f64::consts::SQRT_2 * normal_matrix_bound / sigma_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn padded_diag(d: &[f64]) -> DenseMatrix {
        let mut rows = vec![vec![0.0; d.len()]; d.len() + 1];
        for (i, &x) in d.iter().enumerate() {
            rows[i][i] = x;
        }
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_of(&[DenseMatrix::zeros(3, 2)]).unwrap(), 0.0);
        assert!((epsilon_of(&[padded_diag(&[0.3, 0.1])]).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(epsilon_of(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn delta_examples() {
        assert!((delta_of(&[padded_diag(&[1.0, 1.0])]).unwrap() - 1.0).abs() < 1e-15);
        let d = delta_of(&[padded_diag(&[3.0, 2.0]), padded_diag(&[5.0, 4.0])]).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
        assert!(matches!(
            delta_of(&[padded_diag(&[1.0, 1.0]), padded_diag(&[1.0, 0.0])]),
            Err(Error::RankDeficient { index: Some(1), .. })
        ));
        assert!(matches!(delta_of(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn perturbation_bound_examples() {
        assert_eq!(perturbation_bound(0.0, 0.7, 0.3, 5, 2).unwrap(), 0.0);
        assert!((perturbation_bound(1.0, 1.0, 1.0, 5, 2).unwrap() - 12f64.sqrt()).abs() < 1e-14);
        assert!((perturbation_bound(1.0, 1.0, 1.0, 5, 2).unwrap() - 3.46410).abs() < 1e-5);
        assert!(matches!(
            perturbation_bound(1.0, 0.0, 1.0, 5, 2),
            Err(Error::NonPositiveDenominator { name: "delta", .. })
        ));
        assert!(matches!(
            perturbation_bound(1.0, 1.0, -1.0, 5, 2),
            Err(Error::NonPositiveDenominator {
                name: "sigma_B",
                ..
            })
        ));
        assert!(perturbation_bound(1.0, 1.0, 1.0, 2, 2).is_err());
    }

    #[test]
    fn projection_bound_examples() {
        assert_eq!(projection_bound(0.0, 1.0, 3).unwrap(), 0.0);
        assert!((projection_bound(0.1, 1.0, 2).unwrap() - 0.2).abs() < 1e-15);
        assert!(projection_bound(0.1, 0.0, 2).is_err());
    }

    #[test]
    fn bound_is_monotone_in_epsilon() {
        let mut last = 0.0;
        for k in 0..20 {
            let b = perturbation_bound(k as f64 * 0.05, 0.5, 0.2, 10, 7).unwrap();
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn report_without_noise_omits_epsilon() {
        let pattern = crate::sampling::gen_omega2(5, 2).unwrap();
        let u =
            DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0], [1.0, 5.0]])
                .unwrap();
        let v = ProjectionSet::noiseless(pattern.clone(), &u)
            .unwrap()
            .v_list()
            .to_vec();
        let ps = ProjectionSet::new(pattern, v).unwrap();
        let (rep, _) = bound_report(&ps, None, &BoundOptions::default()).unwrap();
        assert_eq!(rep.epsilon, None);
        assert_eq!(rep.bound, None);
        assert_eq!(rep.d_g, None);
        assert!(rep.bound_per_unit_epsilon > 0.0);
        let strict = BoundOptions {
            require_epsilon: true,
            ..Default::default()
        };
        assert!(matches!(
            bound_report(&ps, None, &strict),
            Err(Error::MissingNoise)
        ));
        let what_if = BoundOptions {
            epsilon_override: Some(0.01),
            ..Default::default()
        };
        let (rep, _) = bound_report(&ps, None, &what_if).unwrap();
        assert!((rep.bound.unwrap() - 0.01 * rep.bound_per_unit_epsilon).abs() < 1e-15);
    }

    #[test]
    fn report_json_keys() {
        let rep = BoundReport {
            m: 5,
            r: 2,
            epsilon: Some(0.1),
            delta: 1.0,
            sigma_b: 0.5,
            bound: Some(0.2),
            bound_per_unit_epsilon: 2.0,
            sqrt_r: 2f64.sqrt(),
            d_g: None,
        };
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        for key in ["epsilon", "delta", "sigma_B", "bound", "sqrt_r", "d_G"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["d_G"].is_null());
    }
}
