//! The Weyl–Titchmarsh function `M(λ) = -[β Z̃_{N+1}(λ)]^{-1} β Ẑ_{N+1}(λ)`,
//! the Weyl solution `𝒳(λ) = Ẑ(λ) + Z̃(λ) M(λ)`, the Green kernel and the
//! residues of `M` at the eigenvalues.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::eigenbasis::OrthonormalEigenSet;
use crate::error::{Result, SpectralError};
use crate::linalg::{hermitian_part, lu_solve, max_abs, singular_values, CMatrix};
use crate::propagation::{check_boundary, fundamental_solutions, initial_ztilde, stacked_operator, transition_inverse};
use crate::spectrum::EIG_TOL;
use crate::system::{BoundaryMatrix, SymplecticSystem, VectorSequence};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MFunctionValue {
    #[serde(serialize_with = "crate::cli::serialize_complex")]
    pub lambda: Complex64,
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub m: CMatrix,
    /// `σ_max / σ_min` of `β Q`, `Q` an orthonormal basis of the range of
    /// `Z̃_{N+1}(λ)` (`NaN` when not computed).
    pub condition: f64,
}

/// Orthonormal basis of the column space of `Z̃_{N+1}(λ)`, propagated with a
/// QR step at every index so the columns cannot collapse onto one growth
/// direction. `β Z̃_{N+1}` is singular exactly when `β` times this basis is.
fn end_plane(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64) -> Result<CMatrix> {
    let mut q = initial_ztilde(sys, alpha);
    for k in 0..=sys.horizon() {
        q = (transition_inverse(sys, k, lambda)? * q).qr().q();
    }
    Ok(q)
}

/// Weyl solution and `M(λ)` from one solve of the stacked problem
/// `z_k = 𝕊_k(λ) z_{k+1}`, `α 𝒳_0 = I`, `β 𝒳_{N+1} = 0`.
///
/// `𝒳_0 = Z̃_0 M + Ẑ_0` with `Z̃_0 = -Jα*`, `Ẑ_0 = α*`, so `M` is read off
/// the left end. Forming `β Z̃_{N+1}` by propagation instead makes the columns
/// of `Z̃_{N+1}` collapse onto the dominant growth direction once `|λ|` is
/// large, and `M` loses every digit. With `guard`, refuses when the smallest
/// singular value of `β` on the orthonormalised end plane is at most
/// `EIG_TOL`.
fn stacked_weyl(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    guard: bool,
) -> Result<(MFunctionValue, VectorSequence)> {
    check_boundary(sys, alpha)?;
    check_boundary(sys, beta)?;
    let n = sys.n();
    let n2 = 2 * n;
    let op = stacked_operator(sys, alpha, beta, lambda)?;
    let condition = if guard {
        let sv = singular_values(&(beta.matrix() * end_plane(sys, alpha, lambda)?));
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        if smin <= EIG_TOL {
            return Err(SpectralError::EigenvalueProximity { lambda, ratio: smin });
        }
        smax / smin
    } else {
        f64::NAN
    };
    let mut rhs = CMatrix::zeros(op.nrows(), n);
    rhs.view_mut((n2 * sys.sequence_len() - n2, 0), (n, n)).fill_with_identity();
    let proximity = SpectralError::EigenvalueProximity { lambda, ratio: 0.0 };
    let sol = lu_solve(&op, &rhs).ok_or(proximity.clone())?;
    if !crate::linalg::is_finite(&sol) {
        return Err(proximity);
    }
    let chi = VectorSequence::from_fn(sys.sequence_len(), |k| sol.rows(n2 * k, n2).into_owned())?;
    let z0 = initial_ztilde(sys, alpha);
    let h0 = alpha.matrix().adjoint();
    let gram = z0.adjoint() * &z0;
    let m = lu_solve(&gram, &(z0.adjoint() * (chi.get(0) - h0))).ok_or(proximity)?;
    Ok((MFunctionValue { lambda, m, condition }, chi))
}

pub fn m_function(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<MFunctionValue> {
    Ok(stacked_weyl(sys, alpha, beta, lambda, true)?.0)
}

/// `M(λ)` without the proximity guard, for evaluations that deliberately
/// approach a pole or go far out along the imaginary axis.
pub(crate) fn m_function_unguarded(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<CMatrix> {
    Ok(stacked_weyl(sys, alpha, beta, lambda, false)?.0.m)
}

/// Weyl solution `𝒳(λ)` together with `Z̃(λ)` and `M(λ)`.
#[derive(Debug, Clone)]
pub struct WeylData {
    pub m: MFunctionValue,
    pub chi: VectorSequence,
    pub ztilde: VectorSequence,
}

pub fn weyl_data(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<WeylData> {
    let (m, chi) = stacked_weyl(sys, alpha, beta, lambda, true)?;
    let pair = fundamental_solutions(sys, alpha, lambda)?;
    Ok(WeylData { m, chi, ztilde: pair.ztilde_sequence() })
}

pub fn weyl_solution(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<VectorSequence> {
    Ok(weyl_data(sys, alpha, beta, lambda)?.chi)
}

/// `G_{k,j}(λ) = 𝒳_k(λ) Z̃_j*(λ̄)` for `j < k` and `Z̃_k(λ) 𝒳_j*(λ̄)` for
/// `j ≥ k`; entries are evaluated on demand from the stored solutions.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub lambda: Complex64,
    chi: VectorSequence,
    ztilde: VectorSequence,
    chi_conj: VectorSequence,
    ztilde_conj: VectorSequence,
}

impl GreenKernel {
    /// Number of row indices `k = 0, …, N + 1`.
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn entry(&self, k: usize, j: usize) -> Result<CMatrix> {
        let max = self.len() - 1;
        if k > max || j > max {
            return Err(SpectralError::IndexOutOfRange { index: k.max(j), max });
        }
        Ok(if j < k {
            self.chi.get(k) * self.ztilde_conj.get(j).adjoint()
        } else {
            self.ztilde.get(k) * self.chi_conj.get(j).adjoint()
        })
    }

    /// Row `k`: `G_{k,0}, …, G_{k,N+1}`.
    pub fn row(&self, k: usize) -> Result<Vec<CMatrix>> {
        (0..self.len()).map(|j| self.entry(k, j)).collect()
    }

    /// All entries, `dense[k][j] = G_{k,j}`.
    pub fn materialize(&self) -> Result<Vec<Vec<CMatrix>>> {
        (0..self.len()).map(|k| self.row(k)).collect()
    }

    /// `Σ_{j=0}^{N} G_{k,j}(λ) Ψ_j f_j` for every `k`.
    pub fn apply(&self, sys: &SymplecticSystem, f: &VectorSequence) -> Result<VectorSequence> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let mut acc = CMatrix::zeros(2 * sys.n(), f.cols());
            for (j, psi) in sys.psi_all().iter().enumerate() {
                acc += self.entry(k, j)? * psi * f.get(j);
            }
            out.push(acc);
        }
        VectorSequence::new(out)
    }
}

pub fn green_kernel(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<GreenKernel> {
    let here = weyl_data(sys, alpha, beta, lambda)?;
    let there = weyl_data(sys, alpha, beta, lambda.conj())?;
    Ok(GreenKernel { lambda, chi: here.chi, ztilde: here.ztilde, chi_conj: there.chi, ztilde_conj: there.ztilde })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueMatrix {
    pub lambda_j: f64,
    /// `-Σ_ℓ η^{[ℓ]} η^{[ℓ]*}`.
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub l_minus1: CMatrix,
    /// Limit of `(λ − λ_j) M(λ)` estimated on two small circles.
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub numeric: CMatrix,
    /// `‖l_minus1 − numeric‖` over the largest residue of the problem, in the
    /// entrywise maximum norm.
    pub relative_gap: f64,
}

/// Mean of `(λ − center) M(λ)` over eight equally spaced points on a circle.
fn circle_mean(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    center: f64,
    radius: f64,
) -> Result<CMatrix> {
    let n = sys.n();
    let mut acc = CMatrix::zeros(n, n);
    for m in 0..8 {
        let w = Complex64::from_polar(radius, 2.0 * PI * (m as f64 + 0.5) / 8.0);
        acc += m_function_unguarded(sys, alpha, beta, Complex64::new(center, 0.0) + w)? * w;
    }
    Ok(acc / Complex64::new(8.0, 0.0))
}

/// Residue of `M` at `lambda_j`, an eigenvalue carried by `set`.
pub fn m_residue(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    set: &OrthonormalEigenSet,
    lambda_j: f64,
) -> Result<ResidueMatrix> {
    let n = sys.n();
    let l_minus1 = -hermitian_part(&set.projector(lambda_j));
    let l_minus1 = if l_minus1.nrows() == n { l_minus1 } else { CMatrix::zeros(n, n) };
    let gap = set
        .eigenvalues()
        .into_iter()
        .filter(|&t| t != lambda_j)
        .map(|t| (t - lambda_j).abs())
        .fold(f64::INFINITY, f64::min);
    // The 8-point mean of w M(λ_j + w) is exact up to terms of order
    // (r / gap)^8; rounding grows like |λ_j| / r, so the radius follows |λ_j|.
    let r1 = (1e-3 * (1.0 + lambda_j.abs())).min(gap / 10.0);
    let r2 = r1 / 2.0;
    let coarse = circle_mean(sys, alpha, beta, lambda_j, r1)?;
    let fine = circle_mean(sys, alpha, beta, lambda_j, r2)?;
    let numeric = &fine + (&fine - &coarse) / Complex64::new(255.0, 0.0);
    // Relative to the largest residue of the problem: a residue many orders
    // below the others is only resolved to the rounding level of M itself.
    let size = set
        .eigenvalues()
        .into_iter()
        .map(|t| max_abs(&set.projector(t)))
        .fold(max_abs(&l_minus1), f64::max);
    let relative_gap = max_abs(&(&l_minus1 - &numeric)) / if size > 0.0 { size } else { 1.0 };
    Ok(ResidueMatrix { lambda_j, l_minus1, numeric, relative_gap })
}

/// `Σ_{s=0}^{N} G_{k,s}(λ) Ψ_s G_{k,s}*(λ) − Σ_j Σ_ℓ |λ − λ_j|^{-2} z_k z_k*`,
/// positive semidefinite when the set is complete.
pub fn green_bound_gap(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    set: &OrthonormalEigenSet,
    lambda: Complex64,
    k: usize,
) -> Result<CMatrix> {
    let kernel = green_kernel(sys, alpha, beta, lambda)?;
    let n2 = 2 * sys.n();
    let mut acc = CMatrix::zeros(n2, n2);
    for (s, psi) in sys.psi_all().iter().enumerate() {
        let g = kernel.entry(k, s)?;
        acc += &g * psi * g.adjoint();
    }
    for e in &set.entries {
        let z = e.eigenfunction.get(k);
        acc -= (z * z.adjoint()).unscale((lambda - e.lambda).norm_sqr());
    }
    Ok(hermitian_part(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::orthonormal_eigen_set;
    use crate::families;
    use crate::linalg::{c64, min_hermitian_eigenvalue, symplectic_unit};
    use crate::system::semi_inner_matrix;

    fn closing() -> (SymplecticSystem, BoundaryMatrix) {
        (families::sl_scalar(&[0.0, 1.0, 2.0]).unwrap(), BoundaryMatrix::first_block(1))
    }

    #[test]
    fn closing_example_m_function() {
        let (sys, a) = closing();
        for lambda in [c64(0.0, 1.0), c64(1.0, 1.0), c64(-2.0, 0.5)] {
            let m = m_function(&sys, &a, &a, lambda).unwrap().m[(0, 0)];
            assert!((m + 1.0 / (lambda * 2.0)).norm() < 1e-14);
        }
        assert!(matches!(m_function(&sys, &a, &a, c64(0.0, 0.0)), Err(SpectralError::EigenvalueProximity { .. })));
    }

    #[test]
    fn weyl_solution_boundary_conditions() {
        let (sys, a) = closing();
        let chi = weyl_solution(&sys, &a, &a, c64(0.0, 2.0)).unwrap();
        assert!(max_abs(&(a.matrix() * chi.get(0) - CMatrix::identity(1, 1))) < 1e-14);
        assert!(max_abs(&(a.matrix() * chi.get(chi.len() - 1))) < 1e-14);
        let sys = families::block_ab(2.0, 3.0, 4).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::second_block(2);
        let chi = weyl_solution(&sys, &alpha, &beta, c64(0.0, 2.0)).unwrap();
        assert!(max_abs(&(alpha.matrix() * chi.get(0) - CMatrix::identity(2, 2))) < 1e-12);
        assert!(max_abs(&(beta.matrix() * chi.get(chi.len() - 1))) < 1e-12);
    }

    #[test]
    fn green_kernel_symmetry_and_diagonal() {
        let sys = families::block_ab(2.0, 3.0, 3).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let lambda = c64(0.3, 0.8);
        let g = green_kernel(&sys, &alpha, &beta, lambda).unwrap().materialize().unwrap();
        let h = green_kernel(&sys, &alpha, &beta, lambda.conj()).unwrap().materialize().unwrap();
        let j = symplectic_unit(2);
        for k in 0..g.len() {
            for l in 0..g.len() {
                let want = if k == l { &h[l][k] + &j } else { h[l][k].clone() };
                assert!(max_abs(&(g[k][l].adjoint() - want)) < 1e-12, "({k}, {l})");
            }
        }
    }

    #[test]
    fn m_identity_between_two_points() {
        let sys = families::block_ab(2.0, 3.0, 3).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::second_block(2);
        let (lambda, nu) = (c64(0.0, 1.0), c64(0.0, 2.0));
        let a = weyl_data(&sys, &alpha, &beta, lambda).unwrap();
        let b = weyl_data(&sys, &alpha, &beta, nu).unwrap();
        let lhs = semi_inner_matrix(&sys, &a.chi, &b.chi).unwrap() * (lambda.conj() - nu);
        let rhs = a.m.m.adjoint() - &b.m.m;
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
        let im = crate::linalg::imaginary_part(&a.m.m);
        assert!(min_hermitian_eigenvalue(&im) > 0.0);
    }

    #[test]
    fn closing_example_residue() {
        let (sys, a) = closing();
        let set = orthonormal_eigen_set(&sys, &a, &a).unwrap();
        let res = m_residue(&sys, &a, &a, &set, set.entries[0].lambda).unwrap();
        assert!((res.l_minus1[(0, 0)] - c64(-0.5, 0.0)).norm() < 1e-12);
        assert!(res.relative_gap < 1e-8);
    }

    #[test]
    fn residue_of_mixed_block_example() {
        let sys = families::block_ab(1.0, 1.0, 1).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let set = orthonormal_eigen_set(&sys, &alpha, &beta).unwrap();
        for t in set.eigenvalues() {
            let res = m_residue(&sys, &alpha, &beta, &set, t).unwrap();
            assert!(res.relative_gap < 1e-6, "{res:?}");
            assert_eq!(crate::linalg::numerical_rank(&res.numeric, 1e-6), 1);
        }
    }

    #[test]
    fn residue_away_from_spectrum_vanishes() {
        let (sys, a) = closing();
        let limit = circle_mean(&sys, &a, &a, 3.0, 1e-4).unwrap();
        assert!(max_abs(&limit) < 1e-8);
    }

    #[test]
    fn green_bound_gap_is_psd() {
        let (sys, a) = closing();
        let set = orthonormal_eigen_set(&sys, &a, &a).unwrap();
        for k in 0..sys.sequence_len() {
            let gap = green_bound_gap(&sys, &a, &a, &set, c64(0.0, 1.0), k).unwrap();
            assert!(min_hermitian_eigenvalue(&gap) >= -1e-12);
        }
        let sys = families::block_ab(1.0, 1.0, 1).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let set = orthonormal_eigen_set(&sys, &alpha, &beta).unwrap();
        let gap = green_bound_gap(&sys, &alpha, &beta, &set, c64(0.0, 1.0), 1).unwrap();
        assert!(min_hermitian_eigenvalue(&gap) >= -1e-12);
    }
}
