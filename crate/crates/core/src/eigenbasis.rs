//! Orthonormal eigenfunctions under the weak Atkinson condition.
//!
//! For an eigenvalue `λ_j` with kernel basis `ξ^{[1]}, …, ξ^{[r]}` of
//! `β Z̃_{N+1}(λ_j)`, set `ω^{[ℓ]} = Ω^{1/2} ξ^{[ℓ]}`, orthonormalise the `ω`'s
//! into `ρ`'s and take `η^{[ℓ]} = Ω^{-1/2} ρ^{[ℓ]}`. The eigenfunctions
//! `z^{[ℓ]} = Z̃(λ_j) η^{[ℓ]}` are then orthonormal in `⟨·,·⟩_Ψ`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, SpectralError};
use crate::linalg::{c64, hermitian_sqrt_pair, lstsq, max_abs, svd_sorted, CMatrix, CVector};
use crate::propagation::{check_boundary, initial_ztilde, stacked_operator, InverseSteps};
use crate::spectrum::{eigenvalues, omega_with_scale, Eigenvalue, ATK_TOL, EIG_TOL};
use crate::system::{semi_inner_matrix, BoundaryMatrix, SymplecticSystem, VectorSequence};

/// `Ω(λ) = Σ_{k=0}^{N} Z̃_k*(λ) Ψ_k Z̃_k(λ)`.
pub fn omega_matrix(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64) -> Result<CMatrix> {
    check_boundary(sys, alpha)?;
    let zt = InverseSteps::new(sys).propagate(lambda, initial_ztilde(sys, alpha))?;
    Ok(omega_with_scale(sys, &zt).0)
}

/// One member of the orthonormal set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenEntry {
    pub lambda: f64,
    #[serde(serialize_with = "crate::cli::serialize_complex_vec")]
    pub eta: Vec<Complex64>,
    #[serde(skip)]
    pub eigenfunction: VectorSequence,
}

impl EigenEntry {
    pub fn eta_vector(&self) -> CVector {
        CVector::from_vec(self.eta.clone())
    }
}

/// `Ω(λ_j)` for one eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaAt {
    pub lambda: f64,
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub omega: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthonormalEigenSet {
    pub entries: Vec<EigenEntry>,
    pub omega: Vec<OmegaAt>,
}

impl OrthonormalEigenSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct eigenvalues in order of appearance.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.omega.iter().map(|o| o.lambda).collect()
    }

    /// Entries belonging to the eigenvalue `lambda`.
    pub fn entries_at(&self, lambda: f64) -> impl Iterator<Item = &EigenEntry> {
        self.entries.iter().filter(move |e| e.lambda == lambda)
    }

    /// `Σ_ℓ η^{[ℓ]} η^{[ℓ]*}` over the entries at `lambda`.
    pub fn projector(&self, lambda: f64) -> CMatrix {
        let n = self.omega.first().map(|o| o.omega.nrows()).unwrap_or(0);
        let mut p = CMatrix::zeros(n, n);
        for e in self.entries_at(lambda) {
            let v = e.eta_vector();
            p += &v * v.adjoint();
        }
        p
    }

    /// Gram matrix `(⟨z^{[a]}, z^{[b]}⟩_Ψ)` of the whole set.
    pub fn gram(&self, sys: &SymplecticSystem) -> Result<CMatrix> {
        let r = self.entries.len();
        let mut g = CMatrix::zeros(r, r);
        if r == 0 {
            return Ok(g);
        }
        let all = VectorSequence::from_fn(sys.sequence_len(), |k| {
            let mut m = CMatrix::zeros(2 * sys.n(), r);
            for (c, e) in self.entries.iter().enumerate() {
                m.set_column(c, &e.eigenfunction.get(k).column(0));
            }
            m
        })?;
        g.copy_from(&semi_inner_matrix(sys, &all, &all)?);
        Ok(g)
    }
}

/// Modified Gram–Schmidt with one reorthogonalisation pass. Columns whose
/// norm collapses below `1e-8` of their original size signal dependence.
fn gram_schmidt(w: &CMatrix, lambda: f64) -> Result<CMatrix> {
    let mut q = w.clone();
    for i in 0..q.ncols() {
        let original = q.column(i).norm();
        for _ in 0..2 {
            for p in 0..i {
                let proj = q.column(p).dotc(&q.column(i));
                let qp = q.column(p).into_owned();
                let mut col = q.column_mut(i);
                col -= qp * proj;
            }
        }
        let norm = q.column(i).norm();
        if original == 0.0 || norm <= 1e-8 * original {
            return Err(SpectralError::RankDeficient { lambda });
        }
        q.column_mut(i).unscale_mut(norm);
    }
    Ok(q)
}

/// Eigenfunctions `Z̃(λ) ξ` for the columns of `basis`, read from the null
/// space of the stacked boundary value problem.
///
/// The null vectors satisfy the recursion to working precision at every
/// index, whereas forward propagation of `Z̃(λ)` can lose digits at the far
/// end when the solution first grows and then decays.
pub(crate) fn eigen_sequences(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    basis: &CMatrix,
) -> Result<VectorSequence> {
    let count = basis.ncols();
    let n2 = 2 * sys.n();
    let op = stacked_operator(sys, alpha, beta, lambda)?;
    let (_, _, v) = svd_sorted(&op);
    let size = v.nrows();
    let null = v.columns(size - count, count).into_owned();
    let xi = initial_ztilde(sys, alpha).adjoint() * null.rows(0, n2);
    let w = lstsq(&xi, basis, 1e-12);
    let y = null * w;
    VectorSequence::from_fn(sys.sequence_len(), |k| y.rows(n2 * k, n2).into_owned())
}

/// Eigenfunctions `Z̃(λ) ξ` for the columns `ξ` of the kernel basis of `ev`,
/// before orthonormalization.
pub fn kernel_eigenfunctions(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    ev: &Eigenvalue,
) -> Result<VectorSequence> {
    check_boundary(sys, alpha)?;
    check_boundary(sys, beta)?;
    eigen_sequences(sys, alpha, beta, c64(ev.lambda.re, 0.0), &ev.kernel_basis)
}

/// The `η`'s for one eigenvalue, their eigenfunctions `Z̃(λ_j) η`, and
/// `Ω(λ_j)`.
///
/// The square roots are taken of `Ω` compressed to the eigenspace,
/// `Ω_K = K* Ω K` for the orthonormal kernel basis `K`, evaluated as the
/// Gram matrix of the eigenfunctions `Z̃ K`. This is the same construction in
/// the coordinates of `K`; the full `Ω(λ)` becomes numerically singular for
/// large `|λ|` (condition numbers beyond `1e16` already at `|λ| ≈ 20` on
/// random systems) while `Ω_K` stays well conditioned.
pub fn orthonormalize(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    ev: &Eigenvalue,
) -> Result<(Vec<CVector>, VectorSequence, CMatrix)> {
    check_boundary(sys, alpha)?;
    check_boundary(sys, beta)?;
    let lambda = ev.lambda.re;
    let basis = &ev.kernel_basis;
    if basis.ncols() == 0 {
        return Err(SpectralError::RankDeficient { lambda });
    }
    let omega = omega_matrix(sys, alpha, c64(lambda, 0.0))?;
    let y = eigen_sequences(sys, alpha, beta, c64(lambda, 0.0), basis)?;
    let compressed = crate::linalg::hermitian_part(&semi_inner_matrix(sys, &y, &y)?);
    let size = (0..compressed.nrows()).map(|i| compressed[(i, i)].re).sum::<f64>();
    let (root, inv_root) = hermitian_sqrt_pair(&compressed, ATK_TOL * size)?;
    let rho = gram_schmidt(&root, lambda)?;
    let local = &inv_root * rho;
    let eta = basis * &local;
    let etas = (0..eta.ncols()).map(|i| eta.column(i).into_owned()).collect();
    Ok((etas, y.mul_right(&local), omega))
}

/// Builds the set from precomputed eigenvalues.
pub fn orthonormal_eigen_set_from(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    spectrum: &[Eigenvalue],
) -> Result<OrthonormalEigenSet> {
    let mut entries = Vec::new();
    let mut omegas = Vec::with_capacity(spectrum.len());
    for ev in spectrum {
        let lambda = ev.lambda.re;
        let (etas, z, omega) = orthonormalize(sys, alpha, beta, ev)?;
        for (i, eta) in etas.into_iter().enumerate() {
            entries.push(EigenEntry { lambda, eta: eta.iter().copied().collect(), eigenfunction: z.column(i) });
        }
        omegas.push(OmegaAt { lambda, omega });
    }
    Ok(OrthonormalEigenSet { entries, omega: omegas })
}

/// Orthonormal set of eigenfunctions for `(α, β)`.
pub fn orthonormal_eigen_set(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
) -> Result<OrthonormalEigenSet> {
    let spec = eigenvalues(sys, alpha, beta, EIG_TOL)?;
    if spec.degenerate {
        return Err(SpectralError::DegenerateSpectrum);
    }
    if !spec.atkinson_holds && !spec.eigenvalues.is_empty() {
        let min_eig = crate::spectrum::check_atkinson(sys, alpha, &[])?.min_eig.into_iter().fold(f64::INFINITY, f64::min);
        return Err(SpectralError::AtkinsonViolation { min_eig });
    }
    orthonormal_eigen_set_from(sys, alpha, beta, &spec.eigenvalues)
}

/// Largest boundary residual `max(|α z_0|, |β z_{N+1}|)` over the set,
/// relative to the largest entry of each eigenfunction.
pub fn boundary_residual(set: &OrthonormalEigenSet, alpha: &BoundaryMatrix, beta: &BoundaryMatrix) -> f64 {
    set.entries
        .iter()
        .map(|e| {
            let z = &e.eigenfunction;
            let size = z.max_abs().max(f64::MIN_POSITIVE);
            max_abs(&(alpha.matrix() * z.get(0))).max(max_abs(&(beta.matrix() * z.get(z.len() - 1)))) / size
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::propagation::step_residual;
    use crate::system::semi_norm;

    fn identity_gap(g: &CMatrix) -> f64 {
        max_abs(&(g - CMatrix::identity(g.nrows(), g.ncols())))
    }

    #[test]
    fn omega_block_family() {
        let (a, b, horizon) = (2.0, 3.0, 4);
        let sys = families::block_ab(a, b, horizon).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let omega = omega_matrix(&sys, &alpha, c64(0.0, 0.0)).unwrap();
        let want = CMatrix::identity(2, 2).scale(b * (horizon as f64 + 1.0));
        assert!(max_abs(&(omega - want)) < 1e-12);
    }

    #[test]
    fn omega_vanishes_without_weight() {
        let sys = families::sl_scalar(&[0.0, 0.0, 0.0]).unwrap();
        let omega = omega_matrix(&sys, &BoundaryMatrix::first_block(1), c64(0.4, 1.0)).unwrap();
        assert!(max_abs(&omega) == 0.0);
    }

    #[test]
    fn scalar_example_eta_and_norm() {
        let v = [0.0, 1.0, 2.0, 3.0];
        let sys = families::sl_scalar(&v).unwrap();
        let alpha = BoundaryMatrix::first_block(1);
        let omega = omega_matrix(&sys, &alpha, c64(0.0, 0.0)).unwrap();
        assert!((omega[(0, 0)].re - 3.0).abs() < 1e-12);
        let set = orthonormal_eigen_set(&sys, &alpha, &alpha).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set.entries[0].eta[0].norm() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let z = &set.entries[0].eigenfunction;
        assert!((semi_norm(&sys, z).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_family_sets() {
        let (a, b, horizon) = (2.0, 3.0, 4);
        let sys = families::block_ab(a, b, horizon).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let mixed = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        for beta in [BoundaryMatrix::first_block(2), BoundaryMatrix::second_block(2), mixed] {
            let set = orthonormal_eigen_set(&sys, &alpha, &beta).unwrap();
            assert_eq!(set.len(), 2);
            assert!(identity_gap(&set.gram(&sys).unwrap()) < 1e-10);
            assert!(boundary_residual(&set, &alpha, &beta) < 1e-10);
            for e in &set.entries {
                let res = step_residual(&sys, c64(e.lambda, 0.0), &e.eigenfunction, None).unwrap();
                assert!(res < 1e-10);
                // ‖Z̃ ξ‖ = √(b(N+1)) for unit ξ, so ‖η‖ = 1/√15.
                assert!((e.eta_vector().norm() - 1.0 / 15f64.sqrt()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mixed_example_first_eigenfunction() {
        let (a, b, horizon) = (1.0, 1.0, 1usize);
        let sys = families::block_ab(a, b, horizon).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let set = orthonormal_eigen_set(&sys, &alpha, &beta).unwrap();
        let zero = set.entries.iter().find(|e| e.lambda.abs() < 1e-9).unwrap();
        let third = 1.0 / (b * (horizon as f64 + 1.0)).sqrt();
        for k in 0..=horizon + 1 {
            let z = zero.eigenfunction.get(k);
            let phase = z[(2, 0)] / z[(2, 0)].norm();
            let want = [0.0, 0.0, third, 0.0];
            for (i, w) in want.iter().enumerate() {
                assert!((z[(i, 0)] / phase - c64(*w, 0.0)).norm() < 1e-10, "k = {k}, row {i}");
            }
        }
    }

    #[test]
    fn orthonormalize_is_basis_invariant() {
        let sys = families::block_ab(2.0, 3.0, 4).unwrap();
        let alpha = BoundaryMatrix::first_block(2);
        let spec = eigenvalues(&sys, &alpha, &alpha, EIG_TOL).unwrap();
        let mut ev = spec.eigenvalues[0].clone();
        let (etas, _, _) = orthonormalize(&sys, &alpha, &alpha, &ev).unwrap();
        let proj = |etas: &[CVector]| etas.iter().fold(CMatrix::zeros(2, 2), |acc, e| acc + e * e.adjoint());
        let p1 = proj(&etas);
        let t = std::f64::consts::FRAC_1_SQRT_2;
        let u = CMatrix::from_row_slice(2, 2, &[c64(t, 0.0), c64(0.0, t), c64(0.0, t), c64(t, 0.0)]);
        ev.kernel_basis = &ev.kernel_basis * u;
        let (etas, _, _) = orthonormalize(&sys, &alpha, &alpha, &ev).unwrap();
        assert!(max_abs(&(p1 - proj(&etas))) < 1e-12);
    }

    #[test]
    fn no_eigenvalues_gives_empty_set() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let set =
            orthonormal_eigen_set(&sys, &BoundaryMatrix::second_block(1), &BoundaryMatrix::first_block(1)).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn degenerate_spectrum_is_refused() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let a = BoundaryMatrix::second_block(1);
        assert!(matches!(orthonormal_eigen_set(&sys, &a, &a), Err(SpectralError::DegenerateSpectrum)));
    }
}
