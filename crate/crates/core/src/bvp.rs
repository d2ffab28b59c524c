//! The nonhomogeneous boundary value problem
//!
//! ```text
//! z_k = 𝕊_k(λ) z_{k+1} − J Ψ_k f_k,   α z_0 = ξ,   β z_{N+1} = 0,
//! ```
//!
//! its closed-form, kernel and dense solutions, and the eigenfunction
//! expansion of solutions at `λ = 0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::eigenbasis::{orthonormal_eigen_set, OrthonormalEigenSet};
use crate::error::{Result, SpectralError};
use crate::linalg::{c64, max_abs, svd_sorted, CMatrix};
use crate::propagation::{check_boundary, stacked_operator, step_residual, transition_inverse};
use crate::spectrum::{check_atkinson, EIG_TOL};
use crate::system::{semi_inner_matrix, semi_norm, BoundaryMatrix, SymplecticSystem, VectorSequence};
use crate::weyl::{green_kernel, weyl_data};

/// Agreement required between the closed form and the kernel summation.
pub const ORACLE_TOL: f64 = 1e-9;
/// Precondition tolerance for "solves the problem at `λ = 0`".
pub const SOLUTION_TOL: f64 = 1e-9;
/// Qualification threshold of the pointwise expansion.
pub const QUALIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    DenseOracle,
    EigenExpansion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvpSolution {
    #[serde(serialize_with = "crate::cli::serialize_complex")]
    pub lambda: Complex64,
    #[serde(serialize_with = "crate::cli::serialize_sequence")]
    pub z: VectorSequence,
    pub method: Method,
    /// `max(|α z_0 − ξ|, |β z_{N+1}|)`.
    pub boundary_residual: f64,
    /// `max_k |z_k − 𝕊_k(λ) z_{k+1} + J Ψ_k f_k|`.
    pub step_residual: f64,
    /// Dense oracle only: `|A x − b| / (|A| |x| + |b|)` for the stacked system.
    pub consistency_residual: Option<f64>,
    /// Dense oracle only: basis of the null space of the stacked system.
    #[serde(skip)]
    pub nullspace: Option<VectorSequence>,
}

fn check_forcing(sys: &SymplecticSystem, f: &VectorSequence) -> Result<()> {
    if f.len() != sys.sequence_len() || f.rows() != 2 * sys.n() {
        return Err(SpectralError::Dimension(format!(
            "forcing must have {} entries of {} rows",
            sys.sequence_len(),
            2 * sys.n()
        )));
    }
    Ok(())
}

fn boundary_datum(sys: &SymplecticSystem, xi: Option<&CMatrix>, cols: usize) -> Result<CMatrix> {
    match xi {
        None => Ok(CMatrix::zeros(sys.n(), cols)),
        Some(x) if x.shape() == (sys.n(), cols) => Ok(x.clone()),
        Some(x) => Err(SpectralError::Dimension(format!(
            "boundary datum must be {}x{cols}, got {:?}",
            sys.n(),
            x.shape()
        ))),
    }
}

fn boundary_residual(alpha: &BoundaryMatrix, beta: &BoundaryMatrix, z: &VectorSequence, xi: &CMatrix) -> f64 {
    max_abs(&(alpha.matrix() * z.get(0) - xi)).max(max_abs(&(beta.matrix() * z.get(z.len() - 1))))
}

fn finish(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    z: VectorSequence,
    f: &VectorSequence,
    xi: &CMatrix,
    method: Method,
) -> Result<BvpSolution> {
    Ok(BvpSolution {
        lambda,
        boundary_residual: boundary_residual(alpha, beta, &z, xi),
        step_residual: step_residual(sys, lambda, &z, Some(f))?,
        z,
        method,
        consistency_residual: None,
        nullspace: None,
    })
}

/// Closed-form solution: `z_k = Z̃_k c + Φ_k Σ_{j<k} J Φ_j*(λ̄) Ψ_j f_j` with
/// `c = Σ_j [M(λ) Z̃_j*(λ̄) + Ẑ_j*(λ̄)] Ψ_j f_j`, plus `𝒳(λ) ξ`.
///
/// `M(λ) Z̃_j*(λ̄) + Ẑ_j*(λ̄) = 𝒳_j*(λ̄)` and `J Φ_j*(λ̄) = Φ_j^{-1}(λ) J`, so
/// the sum is accumulated as `y_{k+1} = 𝕊_k^{-1}(λ)(y_k + J Ψ_k f_k)`. Forming
/// `Φ_k` and `Φ_j*(λ̄)` separately multiplies two growing factors whose product
/// is moderate and costs up to eight digits on longer random systems.
pub fn solve_bvp_closed_form(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    f: &VectorSequence,
    xi: Option<&CMatrix>,
) -> Result<BvpSolution> {
    check_forcing(sys, f)?;
    let xi = boundary_datum(sys, xi, f.cols())?;
    let here = weyl_data(sys, alpha, beta, lambda)?;
    let conj = weyl_data(sys, alpha, beta, lambda.conj())?;
    let j = sys.j();
    let cols = f.cols();
    let mut c = CMatrix::zeros(sys.n(), cols);
    for (k, psi) in sys.psi_all().iter().enumerate() {
        c += conj.chi.get(k).adjoint() * psi * f.get(k);
    }
    let mut prefix = CMatrix::zeros(2 * sys.n(), cols);
    let mut out = Vec::with_capacity(sys.sequence_len());
    for k in 0..sys.sequence_len() {
        out.push(here.ztilde.get(k) * &c + &prefix + here.chi.get(k) * &xi);
        if k <= sys.horizon() {
            prefix = transition_inverse(sys, k, lambda)? * (prefix + &j * &sys.psi_all()[k] * f.get(k));
        }
    }
    finish(sys, alpha, beta, lambda, VectorSequence::new(out)?, f, &xi, Method::ClosedForm)
}

/// Kernel summation `z_k = Σ_j G_{k,j}(λ) Ψ_j f_j`, plus `𝒳(λ) ξ`.
pub fn solve_bvp_kernel(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    f: &VectorSequence,
    xi: Option<&CMatrix>,
) -> Result<BvpSolution> {
    check_forcing(sys, f)?;
    let xi = boundary_datum(sys, xi, f.cols())?;
    let kernel = green_kernel(sys, alpha, beta, lambda)?;
    let mut z = kernel.apply(sys, f)?;
    if max_abs(&xi) > 0.0 {
        z = z.add(&weyl_data(sys, alpha, beta, lambda)?.chi.mul_right(&xi));
    }
    finish(sys, alpha, beta, lambda, z, f, &xi, Method::ClosedForm)
}

/// Solves the problem off the spectrum; the closed form and the kernel
/// summation are both evaluated and must agree.
pub fn solve_bvp(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    f: &VectorSequence,
    xi: Option<&CMatrix>,
) -> Result<BvpSolution> {
    let closed = solve_bvp_closed_form(sys, alpha, beta, lambda, f, xi)?;
    let kernel = solve_bvp_kernel(sys, alpha, beta, lambda, f, xi)?;
    let diff = closed.z.sub(&kernel.z).max_abs();
    if diff > ORACLE_TOL * (1.0 + closed.z.max_abs()) {
        return Err(SpectralError::NumericalConsistency {
            what: "closed form and kernel summation disagree".into(),
            residual: diff,
        });
    }
    Ok(closed)
}

/// Least-squares solution of the stacked `2n(N+2)` square system. Singular
/// values below `EIG_TOL · σ_max` are treated as zero; the corresponding
/// right singular vectors are returned as the null space.
pub fn solve_bvp_dense_oracle(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    f: &VectorSequence,
    xi: Option<&CMatrix>,
) -> Result<BvpSolution> {
    check_boundary(sys, alpha)?;
    check_boundary(sys, beta)?;
    check_forcing(sys, f)?;
    let cols = f.cols();
    let xi = boundary_datum(sys, xi, cols)?;
    let n = sys.n();
    let n2 = 2 * n;
    let op = stacked_operator(sys, alpha, beta, lambda)?;
    let size = op.nrows();
    let j = sys.j();
    let mut rhs = CMatrix::zeros(size, cols);
    for (k, psi) in sys.psi_all().iter().enumerate() {
        rhs.view_mut((n2 * k, 0), (n2, cols)).copy_from(&(-(&j * psi * f.get(k))));
    }
    rhs.view_mut((size - n2, 0), (n, cols)).copy_from(&xi);
    let (u, sigma, v) = svd_sorted(&op);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().filter(|&&s| s > EIG_TOL * smax).count();
    let mut x = CMatrix::zeros(size, cols);
    for i in 0..rank {
        let coeff = u.column(i).adjoint() * &rhs;
        x += v.column(i) * coeff.unscale(sigma[i]);
    }
    let residual = (&op * &x - &rhs).norm();
    let consistency = residual / (op.norm() * x.norm() + rhs.norm()).max(f64::MIN_POSITIVE);
    let split = |m: &CMatrix| VectorSequence::from_fn(sys.sequence_len(), |k| m.rows(n2 * k, n2).into_owned());
    let z = split(&x)?;
    let nullspace = if rank < size { Some(split(&v.columns(rank, size - rank).into_owned())?) } else { None };
    let mut sol = finish(sys, alpha, beta, lambda, z, f, &xi, Method::DenseOracle)?;
    sol.consistency_residual = Some(consistency);
    sol.nullspace = nullspace;
    Ok(sol)
}

/// `c^{[ℓ]} = Σ_{k=0}^{N} z_k^{[ℓ]*} Ψ_k ẑ_k` for every member of the set.
pub fn fourier_coefficients(
    sys: &SymplecticSystem,
    set: &OrthonormalEigenSet,
    zhat: &VectorSequence,
) -> Result<Vec<Complex64>> {
    if zhat.cols() != 1 {
        return Err(SpectralError::Dimension("expansion expects a vector sequence".into()));
    }
    set.entries
        .iter()
        .map(|e| Ok(semi_inner_matrix(sys, &e.eigenfunction, zhat)?[(0, 0)]))
        .collect()
}

/// `Σ c^{[ℓ]} z^{[ℓ]}` over the entries selected by `keep`.
fn combination(
    sys: &SymplecticSystem,
    set: &OrthonormalEigenSet,
    coeffs: &[Complex64],
    keep: impl Fn(f64) -> bool,
) -> VectorSequence {
    let mut acc = VectorSequence::zeros_for(sys, 1);
    for (e, &c) in set.entries.iter().zip(coeffs) {
        if keep(e.lambda) {
            acc = acc.add(&e.eigenfunction.scale(c));
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionResult {
    #[serde(serialize_with = "crate::cli::serialize_complex_vec")]
    pub coefficients: Vec<Complex64>,
    #[serde(serialize_with = "crate::cli::serialize_sequence")]
    pub reconstruction: VectorSequence,
    /// `‖ẑ − Σ c z‖_Ψ`.
    pub residual_seminorm: f64,
    /// `‖ẑ‖²_Ψ`.
    pub norm_sq: f64,
    /// `|‖ẑ‖²_Ψ − Σ |c|²|`.
    pub parseval_gap: f64,
}

/// Checks that `zhat` solves the problem at `λ = 0` with forcing `f` and
/// homogeneous boundary conditions.
fn check_solution(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    zhat: &VectorSequence,
    f: &VectorSequence,
) -> Result<()> {
    check_forcing(sys, f)?;
    check_forcing(sys, zhat)?;
    let zero = CMatrix::zeros(sys.n(), zhat.cols());
    let step = step_residual(sys, c64(0.0, 0.0), zhat, Some(f))?;
    let bnd = boundary_residual(alpha, beta, zhat, &zero);
    let psi_scale = sys.psi_all().iter().map(max_abs).fold(0.0, f64::max);
    let scale = 1.0 + zhat.max_abs() + psi_scale * f.max_abs();
    let worst = step.max(bnd);
    if worst > SOLUTION_TOL * scale {
        return Err(SpectralError::Precondition {
            what: "sequence does not solve the boundary value problem at lambda = 0 with the given forcing".into(),
            residual: worst,
        });
    }
    Ok(())
}

fn require_atkinson(sys: &SymplecticSystem, alpha: &BoundaryMatrix) -> Result<()> {
    let check = check_atkinson(sys, alpha, &[])?;
    if !check.holds {
        let min_eig = check.min_eig.into_iter().fold(f64::INFINITY, f64::min);
        return Err(SpectralError::AtkinsonViolation { min_eig });
    }
    Ok(())
}

/// Expansion of `zhat` in a precomputed orthonormal set.
pub fn expand_with(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    set: &OrthonormalEigenSet,
    zhat: &VectorSequence,
    f: &VectorSequence,
) -> Result<ExpansionResult> {
    check_solution(sys, alpha, beta, zhat, f)?;
    let coefficients = fourier_coefficients(sys, set, zhat)?;
    let reconstruction = combination(sys, set, &coefficients, |_| true);
    let residual_seminorm = semi_norm(sys, &zhat.sub(&reconstruction))?;
    let norm_sq = semi_norm(sys, zhat)?.powi(2);
    let sum: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    Ok(ExpansionResult { coefficients, reconstruction, residual_seminorm, norm_sq, parseval_gap: (norm_sq - sum).abs() })
}

pub fn expand(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    zhat: &VectorSequence,
    f: &VectorSequence,
) -> Result<ExpansionResult> {
    require_atkinson(sys, alpha)?;
    let set = orthonormal_eigen_set(sys, alpha, beta)?;
    expand_with(sys, alpha, beta, &set, zhat, f)
}

/// `(‖ẑ^a‖²_Ψ, a^{-2} ‖f‖²_Ψ)` where `ẑ^a` removes the eigenfunctions with
/// `|λ_j| ≤ a` from `zhat`.
pub fn truncation_bound_with(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    set: &OrthonormalEigenSet,
    zhat: &VectorSequence,
    f: &VectorSequence,
    a: f64,
) -> Result<(f64, f64)> {
    if a.is_nan() || a <= 0.0 {
        return Err(SpectralError::Domain(format!("truncation level must be positive, got {a}")));
    }
    check_solution(sys, alpha, beta, zhat, f)?;
    let coefficients = fourier_coefficients(sys, set, zhat)?;
    let low = combination(sys, set, &coefficients, |t| t.abs() <= a);
    let lhs = semi_norm(sys, &zhat.sub(&low))?.powi(2);
    let rhs = semi_norm(sys, f)?.powi(2) / (a * a);
    Ok((lhs, rhs))
}

pub fn truncation_bound(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    zhat: &VectorSequence,
    f: &VectorSequence,
    a: f64,
) -> Result<(f64, f64)> {
    require_atkinson(sys, alpha)?;
    let set = orthonormal_eigen_set(sys, alpha, beta)?;
    truncation_bound_with(sys, alpha, beta, &set, zhat, f, a)
}

/// `z̃_k = Σ (λ_j − λ)^{-1} d^{[ℓ]} z_k^{[ℓ]}` with `d^{[ℓ]} = ⟨z^{[ℓ]}, g⟩_Ψ`,
/// valid when `g` lies in the span of the eigenfunctions up to `[0]`.
pub fn pointwise_expansion_with(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    set: &OrthonormalEigenSet,
    lambda: Complex64,
    g: &VectorSequence,
) -> Result<BvpSolution> {
    check_forcing(sys, g)?;
    if set.entries.iter().any(|e| (lambda - e.lambda).norm() <= EIG_TOL * (1.0 + e.lambda.abs())) {
        return Err(SpectralError::EigenvalueProximity { lambda, ratio: 0.0 });
    }
    let d = fourier_coefficients(sys, set, g)?;
    let projected = combination(sys, set, &d, |_| true);
    let miss = semi_norm(sys, &g.sub(&projected))?;
    if miss > QUALIFY_TOL * (1.0 + semi_norm(sys, g)?) {
        return Err(SpectralError::Precondition {
            what: "forcing is not a combination of eigenfunctions in the semi-norm".into(),
            residual: miss,
        });
    }
    let scaled: Vec<Complex64> = set.entries.iter().zip(&d).map(|(e, &dj)| dj / (e.lambda - lambda)).collect();
    let z = combination(sys, set, &scaled, |_| true);
    let zero = CMatrix::zeros(sys.n(), 1);
    finish(sys, alpha, beta, lambda, z, g, &zero, Method::EigenExpansion)
}

pub fn pointwise_expansion(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    g: &VectorSequence,
) -> Result<BvpSolution> {
    require_atkinson(sys, alpha)?;
    let set = orthonormal_eigen_set(sys, alpha, beta)?;
    pointwise_expansion_with(sys, alpha, beta, &set, lambda, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::weyl::weyl_solution;

    fn col(values: &[Complex64]) -> CMatrix {
        CMatrix::from_column_slice(values.len(), 1, values)
    }

    fn scalar_forcing(len: usize, f2: impl Fn(usize) -> f64) -> VectorSequence {
        VectorSequence::from_fn(len, |k| col(&[c64(0.3 * k as f64, 0.0), c64(f2(k), 0.0)])).unwrap()
    }

    #[test]
    fn closed_form_matches_oracle_on_block_family() {
        let sys = families::block_ab(2.0, 3.0, 3).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let f = VectorSequence::from_fn(sys.sequence_len(), |k| {
            col(&[c64(1.0, k as f64), c64(-0.5, 0.2), c64(k as f64, 0.0), c64(0.0, 1.0)])
        })
        .unwrap();
        let xi = col(&[c64(0.4, -0.1), c64(1.0, 0.5)]);
        for lambda in [c64(0.0, 1.0), c64(0.7, -0.3)] {
            let a = solve_bvp(&sys, &alpha, &beta, lambda, &f, Some(&xi)).unwrap();
            let b = solve_bvp_dense_oracle(&sys, &alpha, &beta, lambda, &f, Some(&xi)).unwrap();
            assert!(a.z.sub(&b.z).max_abs() < 1e-12);
            assert!(a.step_residual < 1e-12 && a.boundary_residual < 1e-12);
            assert!(b.nullspace.is_none());
            let plain = solve_bvp(&sys, &alpha, &beta, lambda, &f, None).unwrap();
            let chi = weyl_solution(&sys, &alpha, &beta, lambda).unwrap().mul_right(&xi);
            assert!(a.z.sub(&plain.z).sub(&chi).max_abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_example_with_dirichlet_right_end() {
        // β = (0, 1): ẑ_k = (Σ_{j<k} f_j^{[2]} Δv_j, 0).
        let v = [0.0, 1.0, 3.0, 4.0];
        let sys = families::sl_scalar(&v).unwrap();
        let alpha = BoundaryMatrix::first_block(1);
        let beta = BoundaryMatrix::second_block(1);
        let f = scalar_forcing(sys.sequence_len(), |k| 1.0 + k as f64);
        let sol = solve_bvp(&sys, &alpha, &beta, c64(0.0, 0.0), &f, None).unwrap();
        let mut partial = 0.0;
        for k in 0..sys.sequence_len() {
            let want = col(&[c64(partial, 0.0), c64(0.0, 0.0)]);
            assert!(max_abs(&(sol.z.get(k) - want)) < 1e-12, "k = {k}");
            if k <= sys.horizon() {
                partial += (1.0 + k as f64) * (v[k + 1] - v[k]);
            }
        }
        assert!(semi_norm(&sys, &sol.z).unwrap() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let sys = families::block_ab(1.0, 2.0, 2).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let f = VectorSequence::zeros_for(&sys, 1);
        let sol = solve_bvp(&sys, &alpha, &alpha, c64(0.0, 1.0), &f, None).unwrap();
        assert_eq!(sol.z.max_abs(), 0.0);
        let oracle = solve_bvp_dense_oracle(&sys, &alpha, &alpha, c64(0.0, 1.0), &f, None).unwrap();
        assert_eq!(oracle.z.max_abs(), 0.0);
    }

    #[test]
    fn oracle_solvability_at_scalar_eigenvalue() {
        // α = β = (1, 0): λ = 0 is an eigenvalue and the problem is solvable
        // iff Σ f_k^{[2]} Δv_k = 0.
        let v = [0.0, 1.0, 2.0, 3.0];
        let sys = families::sl_scalar(&v).unwrap();
        let a = BoundaryMatrix::first_block(1);
        let good = scalar_forcing(sys.sequence_len(), |k| [1.0, 1.0, -2.0, 7.0][k]);
        let bad = scalar_forcing(sys.sequence_len(), |k| [1.0, 1.0, 1.0, 7.0][k]);
        let ok = solve_bvp_dense_oracle(&sys, &a, &a, c64(0.0, 0.0), &good, None).unwrap();
        let fail = solve_bvp_dense_oracle(&sys, &a, &a, c64(0.0, 0.0), &bad, None).unwrap();
        assert!(ok.consistency_residual.unwrap() < 1e-12);
        assert!(fail.consistency_residual.unwrap() > 1e-3);
        assert_eq!(ok.nullspace.as_ref().unwrap().cols(), 1);
        assert!(matches!(
            solve_bvp(&sys, &a, &a, c64(0.0, 0.0), &good, None),
            Err(SpectralError::EigenvalueProximity { .. })
        ));
    }

    #[test]
    fn scalar_expansion_coefficient() {
        // ẑ_k = (Σ_{j<k} f_j^{[2]} Δv_j, u) with Σ f^{[2]} Δv = 0 solves the
        // problem for α = β = (1, 0); then c = u √v_{N+1}.
        let v = [0.0, 1.0, 2.0, 3.0];
        let sys = families::sl_scalar(&v).unwrap();
        let a = BoundaryMatrix::first_block(1);
        let f2 = [1.0, 1.0, -2.0, 0.0];
        let f = scalar_forcing(sys.sequence_len(), |k| f2[k]);
        let u = c64(0.5, -1.5);
        let mut partial = 0.0;
        let zhat = VectorSequence::from_fn(sys.sequence_len(), |k| {
            let z = col(&[c64(partial, 0.0), u]);
            if k <= sys.horizon() {
                partial += f2[k] * (v[k + 1] - v[k]);
            }
            z
        })
        .unwrap();
        let result = expand(&sys, &a, &a, &zhat, &f).unwrap();
        assert_eq!(result.coefficients.len(), 1);
        assert!((result.coefficients[0].norm() - u.norm() * 3f64.sqrt()).abs() < 1e-12);
        assert!(result.residual_seminorm < 1e-12);
        assert!((result.norm_sq - u.norm_sqr() * 3.0).abs() < 1e-12);
        assert!(result.parseval_gap < 1e-12);
    }

    #[test]
    fn expand_rejects_non_solutions() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0]).unwrap();
        let a = BoundaryMatrix::first_block(1);
        let f = VectorSequence::zeros_for(&sys, 1);
        let z = VectorSequence::from_fn(3, |k| col(&[c64(k as f64, 0.0), c64(1.0, 0.0)])).unwrap();
        assert!(matches!(expand(&sys, &a, &a, &z, &f), Err(SpectralError::Precondition { .. })));
        let zero = VectorSequence::zeros_for(&sys, 1);
        let r = expand(&sys, &a, &a, &zero, &f).unwrap();
        assert!(r.coefficients.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn pointwise_expansion_of_eigenfunction() {
        let sys = families::block_ab(1.0, 1.0, 2).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let set = orthonormal_eigen_set(&sys, &alpha, &beta).unwrap();
        let lambda = c64(0.0, 1.0);
        for e in &set.entries {
            let g = &e.eigenfunction;
            let sol = pointwise_expansion_with(&sys, &alpha, &beta, &set, lambda, g).unwrap();
            let direct = solve_bvp(&sys, &alpha, &beta, lambda, g, None).unwrap();
            assert!(sol.z.sub(&direct.z).max_abs() < 1e-10);
            let single = g.scale(c64(1.0, 0.0) / (e.lambda - lambda));
            assert!(sol.z.sub(&single).max_abs() < 1e-10);
        }
    }
}
