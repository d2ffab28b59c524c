//! Transition matrices and fundamental solutions.
//!
//! Solutions are propagated forward from `k = 0` with the closed-form inverse
//! `𝕊_k^{-1}(λ) = -J 𝕊_k*(λ̄) J`, which is affine in `λ`.

use num_complex::Complex64;

use crate::error::{Result, SpectralError};
use crate::linalg::{is_finite, CMatrix};
use crate::system::{v_from_psi, BoundaryMatrix, SymplecticSystem, VectorSequence};

/// `𝕊_k(λ) = S_k + λ V_k`.
pub fn transition(sys: &SymplecticSystem, k: usize, lambda: Complex64) -> Result<CMatrix> {
    let v = v_from_psi(sys, k)?;
    Ok(sys.s(k)? + v * lambda)
}

/// `𝕊_k^{-1}(λ) = -J 𝕊_k*(λ̄) J`.
pub fn transition_inverse(sys: &SymplecticSystem, k: usize, lambda: Complex64) -> Result<CMatrix> {
    let j = sys.j();
    let v = v_from_psi(sys, k)?;
    let m = sys.s(k)?.adjoint() + v.adjoint() * lambda;
    Ok(-(&j * m * &j))
}

/// Cached pieces of the inverse transitions, `𝕊_k^{-1}(λ) = A_k + λ B_k`.
#[derive(Debug, Clone)]
pub(crate) struct InverseSteps {
    a: Vec<CMatrix>,
    b: Vec<CMatrix>,
}

impl InverseSteps {
    pub(crate) fn new(sys: &SymplecticSystem) -> Self {
        let j = sys.j();
        let mut a = Vec::with_capacity(sys.horizon() + 1);
        let mut b = Vec::with_capacity(sys.horizon() + 1);
        for (s, psi) in sys.s_all().iter().zip(sys.psi_all()) {
            let v = -(&j * psi * s);
            a.push(-(&j * s.adjoint() * &j));
            b.push(-(&j * v.adjoint() * &j));
        }
        Self { a, b }
    }

    pub(crate) fn apply(&self, k: usize, lambda: Complex64, z: &CMatrix) -> CMatrix {
        &self.a[k] * z + (&self.b[k] * z) * lambda
    }

    /// `Z_0, …, Z_{N+1}` for `Z_{k+1} = 𝕊_k^{-1}(λ) Z_k`.
    pub(crate) fn propagate(&self, lambda: Complex64, z0: CMatrix) -> Result<Vec<CMatrix>> {
        let mut out = Vec::with_capacity(self.a.len() + 1);
        out.push(z0);
        for k in 0..self.a.len() {
            let next = self.apply(k, lambda, &out[k]);
            if !is_finite(&next) {
                return Err(SpectralError::Overflow(k));
            }
            out.push(next);
        }
        Ok(out)
    }

    /// Only the final value `Z_{N+1}`.
    pub(crate) fn propagate_to_end(&self, lambda: Complex64, z0: &CMatrix) -> Result<CMatrix> {
        let mut z = z0.clone();
        for k in 0..self.a.len() {
            z = self.apply(k, lambda, &z);
            if !is_finite(&z) {
                return Err(SpectralError::Overflow(k));
            }
        }
        Ok(z)
    }
}

/// The solutions `Ẑ(λ)` and `Z̃(λ)` with `Ẑ_0 = α*`, `Z̃_0 = -J α*`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalPair {
    pub lambda: Complex64,
    zhat: Vec<CMatrix>,
    ztilde: Vec<CMatrix>,
}

impl FundamentalPair {
    pub fn len(&self) -> usize {
        self.zhat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zhat.is_empty()
    }

    pub fn zhat(&self, k: usize) -> &CMatrix {
        &self.zhat[k]
    }

    pub fn ztilde(&self, k: usize) -> &CMatrix {
        &self.ztilde[k]
    }

    pub fn zhat_all(&self) -> &[CMatrix] {
        &self.zhat
    }

    pub fn ztilde_all(&self) -> &[CMatrix] {
        &self.ztilde
    }

    /// `Φ_k = (Ẑ_k, Z̃_k)`.
    pub fn phi(&self, k: usize) -> CMatrix {
        let n = self.zhat[k].ncols();
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        m.columns_mut(0, n).copy_from(&self.zhat[k]);
        m.columns_mut(n, n).copy_from(&self.ztilde[k]);
        m
    }

    pub fn zhat_sequence(&self) -> VectorSequence {
        VectorSequence::new(self.zhat.clone()).expect("non-empty, uniform shape")
    }

    pub fn ztilde_sequence(&self) -> VectorSequence {
        VectorSequence::new(self.ztilde.clone()).expect("non-empty, uniform shape")
    }
}

pub(crate) fn check_boundary(sys: &SymplecticSystem, b: &BoundaryMatrix) -> Result<()> {
    if b.n() != sys.n() {
        return Err(SpectralError::Dimension(format!(
            "boundary matrix is {}x{}, system block size is {}",
            b.n(),
            2 * b.n(),
            sys.n()
        )));
    }
    Ok(())
}

/// `Φ_0 = (α*, -Jα*)`.
pub(crate) fn initial_phi(sys: &SymplecticSystem, alpha: &BoundaryMatrix) -> CMatrix {
    let n = sys.n();
    let a_star = alpha.matrix().adjoint();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.columns_mut(0, n).copy_from(&a_star);
    m.columns_mut(n, n).copy_from(&(-(sys.j() * &a_star)));
    m
}

pub(crate) fn initial_ztilde(sys: &SymplecticSystem, alpha: &BoundaryMatrix) -> CMatrix {
    -(sys.j() * alpha.matrix().adjoint())
}

pub fn fundamental_solutions(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<FundamentalPair> {
    check_boundary(sys, alpha)?;
    fundamental_with(&InverseSteps::new(sys), sys, alpha, lambda)
}

pub(crate) fn fundamental_with(
    steps: &InverseSteps,
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<FundamentalPair> {
    let n = sys.n();
    let phis = steps.propagate(lambda, initial_phi(sys, alpha))?;
    let zhat = phis.iter().map(|p| p.columns(0, n).into_owned()).collect();
    let ztilde = phis.iter().map(|p| p.columns(n, n).into_owned()).collect();
    Ok(FundamentalPair { lambda, zhat, ztilde })
}

/// Solves the initial value problem `z_k = 𝕊_k(λ) z_{k+1} - J Ψ_k f_k`, `z_0 = z0`.
///
/// `z0` may hold several columns; `f`, when given, must have as many.
pub fn solve_ivp(
    sys: &SymplecticSystem,
    lambda: Complex64,
    z0: &CMatrix,
    f: Option<&VectorSequence>,
) -> Result<VectorSequence> {
    let n2 = 2 * sys.n();
    if z0.nrows() != n2 || z0.ncols() == 0 {
        return Err(SpectralError::Dimension(format!(
            "initial value must have {n2} rows, got {:?}",
            z0.shape()
        )));
    }
    if let Some(f) = f {
        if f.len() != sys.sequence_len() || f.rows() != n2 || f.cols() != z0.ncols() {
            return Err(SpectralError::Dimension(
                "forcing sequence does not match the system and initial value".into(),
            ));
        }
    }
    let steps = InverseSteps::new(sys);
    let j = sys.j();
    let mut out = Vec::with_capacity(sys.sequence_len());
    out.push(z0.clone());
    for k in 0..=sys.horizon() {
        let mut rhs = out[k].clone();
        if let Some(f) = f {
            rhs += &j * &sys.psi_all()[k] * f.get(k);
        }
        let next = steps.apply(k, lambda, &rhs);
        if !is_finite(&next) {
            return Err(SpectralError::Overflow(k));
        }
        out.push(next);
    }
    VectorSequence::new(out)
}

/// Largest per-step residual `‖z_k − 𝕊_k(λ) z_{k+1} + J Ψ_k f_k‖` (max-entry norm).
pub fn step_residual(
    sys: &SymplecticSystem,
    lambda: Complex64,
    z: &VectorSequence,
    f: Option<&VectorSequence>,
) -> Result<f64> {
    if z.len() != sys.sequence_len() || z.rows() != 2 * sys.n() {
        return Err(SpectralError::Dimension("sequence does not match the system".into()));
    }
    let j = sys.j();
    let mut worst: f64 = 0.0;
    for k in 0..=sys.horizon() {
        let mut r = z.get(k) - transition(sys, k, lambda)? * z.get(k + 1);
        if let Some(f) = f {
            r += &j * &sys.psi_all()[k] * f.get(k);
        }
        worst = worst.max(crate::linalg::max_abs(&r));
    }
    Ok(worst)
}

/// `Φ_k*(λ̄) J Φ_k(λ)`, given the pairs computed at `λ` and at `λ̄`.
pub fn wronskian(sys: &SymplecticSystem, at: &FundamentalPair, at_conj: &FundamentalPair, k: usize) -> CMatrix {
    at_conj.phi(k).adjoint() * sys.j() * at.phi(k)
}

/// The square system `z_k − 𝕊_k(λ) z_{k+1} = r_k` (`k = 0, …, N`), `α z_0 = a`,
/// `β z_{N+1} = b` in the unknowns `(z_0, …, z_{N+1})`, as one dense matrix of
/// size `2n(N + 2)`.
pub(crate) fn stacked_operator(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<CMatrix> {
    let n2 = 2 * sys.n();
    let n = sys.n();
    let size = n2 * sys.sequence_len();
    let mut m = CMatrix::zeros(size, size);
    for k in 0..=sys.horizon() {
        let row = n2 * k;
        m.view_mut((row, row), (n2, n2)).copy_from(&CMatrix::identity(n2, n2));
        m.view_mut((row, row + n2), (n2, n2)).copy_from(&(-transition(sys, k, lambda)?));
    }
    let row = n2 * (sys.horizon() + 1);
    m.view_mut((row, 0), (n, n2)).copy_from(alpha.matrix());
    m.view_mut((row + n, size - n2), (n, n2)).copy_from(beta.matrix());
    Ok(m)
}
