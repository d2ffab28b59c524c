//! The spectral step function `τ_{α,β}` and the integral representation
//!
//! ```text
//! M(λ) = M^{[0]} + λ M^{[1]} + ∫ (1/(t − λ) − t/(1 + t²)) dτ(t).
//! ```

use num_complex::Complex64;
use serde::Serialize;

use crate::eigenbasis::{orthonormal_eigen_set, OrthonormalEigenSet};
use crate::error::{Result, SpectralError};
use crate::linalg::{c64, hermitian_part, imaginary_part, max_abs, min_hermitian_eigenvalue, CMatrix};
use crate::spectrum::check_atkinson;
use crate::system::{BoundaryMatrix, SymplecticSystem};
use crate::weyl::{m_function, m_function_unguarded};

/// Sampling points for `M^{[1]} = lim M(iμ)/(iμ)`.
pub const M1_SAMPLES: [f64; 2] = [1e6, 1e7];
/// `M^{[1]}` entries below this are reported as zero.
pub const M1_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jump {
    pub t: f64,
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub d: CMatrix,
}

/// Right-continuous step function with `τ(0) = 0` and jumps `D_j = Σ_ℓ ηη*`
/// at the eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralStepFunction {
    pub n: usize,
    pub jumps: Vec<Jump>,
}

impl SpectralStepFunction {
    /// Builds the step function from an orthonormal set.
    pub fn from_set(n: usize, set: &OrthonormalEigenSet) -> Self {
        let mut jumps: Vec<Jump> =
            set.eigenvalues().into_iter().map(|t| Jump { t, d: hermitian_part(&set.projector(t)) }).collect();
        jumps.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { n, jumps }
    }

    /// `Σ_{0<t_j≤t} D_j` for `t > 0`, `−Σ_{t<t_j≤0} D_j` for `t < 0`, `0` at `t = 0`.
    pub fn tau_at(&self, t: f64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.n, self.n);
        if t > 0.0 {
            let lo = self.jumps.partition_point(|j| j.t <= 0.0);
            let hi = self.jumps.partition_point(|j| j.t <= t);
            for j in &self.jumps[lo..hi.max(lo)] {
                acc += &j.d;
            }
        } else if t < 0.0 {
            let lo = self.jumps.partition_point(|j| j.t <= t);
            let hi = self.jumps.partition_point(|j| j.t <= 0.0);
            for j in &self.jumps[lo..hi.max(lo)] {
                acc -= &j.d;
            }
        }
        acc
    }

    /// `τ(t⁻)`, evaluated just left of `t` (before any other jump).
    pub fn tau_left(&self, t: f64) -> CMatrix {
        let below = self.jumps.iter().map(|j| j.t).filter(|&s| s < t).fold(f64::NEG_INFINITY, f64::max);
        let step = if below.is_finite() { 0.5 * (t - below) } else { 1.0 };
        self.tau_at(t - step.min(1.0))
    }
}

/// `τ` for `(α, β)`. Needs the weak Atkinson condition even when the
/// spectrum is empty.
pub fn spectral_function(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
) -> Result<SpectralStepFunction> {
    let set = orthonormal_eigen_set(sys, alpha, beta)?;
    let check = check_atkinson(sys, alpha, &[])?;
    if !check.holds {
        let min_eig = check.min_eig.into_iter().fold(f64::INFINITY, f64::min);
        return Err(SpectralError::AtkinsonViolation { min_eig });
    }
    Ok(SpectralStepFunction::from_set(sys.n(), &set))
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_nan() || b.is_nan() || a > b {
        return Err(SpectralError::Domain(format!("integration interval [{a}, {b}] is empty")));
    }
    Ok(())
}

/// `∫_a^b f dτ = Σ f(x_k) [τ(x_k⁺) − τ(x_k⁻)]` over the jumps in `[a, b]`,
/// with `τ(a⁻) := τ(a)` and `τ(b⁺) := τ(b)`. Infinite endpoints are allowed.
pub fn rs_step_integral(
    tau: &SpectralStepFunction,
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
) -> Result<CMatrix> {
    rs_step_integral_matrix(tau, |t| CMatrix::from_element(1, 1, f(t)), a, b)
}

/// Matrix-valued integrand version; a `1 × 1` value acts as a scalar, an
/// `n × n` value multiplies the jump from the left.
pub fn rs_step_integral_matrix(
    tau: &SpectralStepFunction,
    f: impl Fn(f64) -> CMatrix,
    a: f64,
    b: f64,
) -> Result<CMatrix> {
    check_interval(a, b)?;
    let mut acc = CMatrix::zeros(tau.n, tau.n);
    for jump in tau.jumps.iter().filter(|j| j.t >= a && j.t <= b) {
        let right = tau.tau_at(jump.t);
        let left = if jump.t == a { right.clone() } else { tau.tau_left(jump.t) };
        let step = right - left;
        let value = f(jump.t);
        if !crate::linalg::is_finite(&value) {
            return Err(SpectralError::IntegrandSingular(jump.t));
        }
        acc += if value.shape() == (1, 1) { step * value[(0, 0)] } else { value * step };
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralRepresentation {
    #[serde(serialize_with = "crate::cli::serialize_complex")]
    pub lambda: Complex64,
    /// `re M(i)`.
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub m0: CMatrix,
    /// `lim M(iμ)/(iμ)` after the zero floor.
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub m1: CMatrix,
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub m_rebuilt: CMatrix,
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub m_direct: CMatrix,
    /// `max |M_rebuilt − M(λ)|`.
    pub gap: f64,
    /// `max |im M(λ) − im λ M^{[1]} − ∫ im (t − λ)^{-1} dτ|`.
    pub im_gap: f64,
    /// Smallest eigenvalue of `im M(λ)/im λ − ∫ im (t − λ)^{-1}/im λ dτ`.
    pub im_excess_min_eig: f64,
}

/// `M^{[1]}` by sampling `M(iμ)/(iμ)` at `μ = 10^6, 10^7` with one
/// Richardson step for the `1/μ` error term.
pub fn m1_estimate(sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &BoundaryMatrix) -> Result<CMatrix> {
    let sample = |mu: f64| -> Result<CMatrix> {
        let lambda = c64(0.0, mu);
        Ok(m_function_unguarded(sys, alpha, beta, lambda)? / lambda)
    };
    let g1 = sample(M1_SAMPLES[0])?;
    let g2 = sample(M1_SAMPLES[1])?;
    let ratio = M1_SAMPLES[1] / M1_SAMPLES[0];
    let m1 = hermitian_part(&((g2 * c64(ratio, 0.0) - g1) / c64(ratio - 1.0, 0.0)));
    if max_abs(&m1) < M1_FLOOR {
        return Ok(CMatrix::zeros(sys.n(), sys.n()));
    }
    let min = min_hermitian_eigenvalue(&m1);
    if min < -M1_FLOOR {
        return Err(SpectralError::NumericalConsistency {
            what: "estimated linear coefficient of M is not positive semidefinite".into(),
            residual: -min,
        });
    }
    Ok(m1)
}

pub fn m_integral_representation_with(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    tau: &SpectralStepFunction,
    lambda: Complex64,
) -> Result<IntegralRepresentation> {
    if lambda.im == 0.0 || !lambda.im.is_finite() || !lambda.re.is_finite() {
        return Err(SpectralError::Domain(format!("integral representation needs a non-real lambda, got {lambda}")));
    }
    let m0 = hermitian_part(&m_function(sys, alpha, beta, c64(0.0, 1.0))?.m);
    let m1 = m1_estimate(sys, alpha, beta)?;
    let m_direct = m_function(sys, alpha, beta, lambda)?.m;
    let all = f64::NEG_INFINITY;
    let integral = rs_step_integral(tau, |t| 1.0 / (t - lambda) - t / (1.0 + t * t), all, f64::INFINITY)?;
    let m_rebuilt = &m0 + &m1 * lambda + integral;
    let gap = max_abs(&(&m_rebuilt - &m_direct));
    let im_integral = rs_step_integral(tau, |t| c64((1.0 / (t - lambda)).im, 0.0), all, f64::INFINITY)?;
    let im_direct = imaginary_part(&m_direct);
    let im_gap = max_abs(&(&im_direct - &m1 * c64(lambda.im, 0.0) - &im_integral));
    let excess = hermitian_part(&((im_direct - im_integral) / c64(lambda.im, 0.0)));
    Ok(IntegralRepresentation {
        lambda,
        m0,
        m1,
        m_rebuilt,
        m_direct,
        gap,
        im_gap,
        im_excess_min_eig: min_hermitian_eigenvalue(&excess),
    })
}

/// Smallest eigenvalue of `im M(λ)/im λ − ∫ im (t − λ)^{-1}/im λ dτ`, which
/// does not involve `M^{[1]}`.
pub fn im_excess_min_eig(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    tau: &SpectralStepFunction,
    lambda: Complex64,
) -> Result<f64> {
    if lambda.im == 0.0 {
        return Err(SpectralError::Domain(format!("needs a non-real lambda, got {lambda}")));
    }
    let m = m_function(sys, alpha, beta, lambda)?.m;
    let im_integral = rs_step_integral(tau, |t| c64((1.0 / (t - lambda)).im, 0.0), f64::NEG_INFINITY, f64::INFINITY)?;
    let excess = hermitian_part(&((imaginary_part(&m) - im_integral) / c64(lambda.im, 0.0)));
    Ok(min_hermitian_eigenvalue(&excess))
}

pub fn m_integral_representation(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<IntegralRepresentation> {
    let tau = spectral_function(sys, alpha, beta)?;
    m_integral_representation_with(sys, alpha, beta, &tau, lambda)
}
