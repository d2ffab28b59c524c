//! Ready-made systems: the scalar second-order family, the constant
//! `2 × 2` block family and randomly generated systems satisfying the weak
//! Atkinson condition.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, SpectralError};
use crate::linalg::{c64, hermitian_sqrt_pair, CMatrix};
use crate::spectrum::{check_atkinson, DEFAULT_PROBES};
use crate::system::{BoundaryMatrix, SymplecticSystem};

/// `S_k = I_2`, `Ψ_k = diag{0, v_{k+1} - v_k}` for `k = 0, …, N`, where
/// `v = (v_0, …, v_{N+1})` is nondecreasing with `v_0 = 0`.
pub fn sl_scalar(v: &[f64]) -> Result<SymplecticSystem> {
    if v.len() < 2 {
        return Err(SpectralError::Domain("v needs at least two entries (N >= 0)".into()));
    }
    if v[0] != 0.0 {
        return Err(SpectralError::Domain(format!("v_0 must be 0, got {}", v[0])));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] < w[0]) {
        return Err(SpectralError::Domain("v must be finite and nondecreasing".into()));
    }
    let s = vec![CMatrix::identity(2, 2); v.len() - 1];
    let psi = v
        .windows(2)
        .map(|w| {
            let mut p = CMatrix::zeros(2, 2);
            p[(1, 1)] = c64(w[1] - w[0], 0.0);
            p
        })
        .collect();
    SymplecticSystem::new(1, s, psi)
}

/// `n = 2`, `S_k = I_4`, `Ψ_k = [[a I, √(ab) I], [√(ab) I, b I]]` on `[0, N]`.
pub fn block_ab(a: f64, b: f64, horizon: usize) -> Result<SymplecticSystem> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(SpectralError::Domain(format!("a and b must be positive, got a = {a}, b = {b}")));
    }
    let r = (a * b).sqrt();
    let mut p = CMatrix::zeros(4, 4);
    for i in 0..2 {
        p[(i, i)] = c64(a, 0.0);
        p[(i, 2 + i)] = c64(r, 0.0);
        p[(2 + i, i)] = c64(r, 0.0);
        p[(2 + i, 2 + i)] = c64(b, 0.0);
    }
    SymplecticSystem::new(2, vec![CMatrix::identity(4, 4); horizon + 1], vec![p; horizon + 1])
}

/// A random system together with boundary matrices for which the weak
/// Atkinson condition holds.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub system: SymplecticSystem,
    pub alpha: BoundaryMatrix,
    pub beta: BoundaryMatrix,
}

fn random_complex<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Complex64 {
    c64(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng, scale))
}

fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let g = random_matrix(rng, n, n, scale);
    (&g + g.adjoint()).scale(0.5)
}

fn embed(n: usize, blocks: [&CMatrix; 4]) -> CMatrix {
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(blocks[0]);
    m.view_mut((0, n), (n, n)).copy_from(blocks[1]);
    m.view_mut((n, 0), (n, n)).copy_from(blocks[2]);
    m.view_mut((n, n), (n, n)).copy_from(blocks[3]);
    m
}

/// Product of elementary symplectic factors `[[I, H], [0, I]]`,
/// `[[A, 0], [0, A^{-*}]]` and `[[I, 0], [H, I]]`.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let id = CMatrix::identity(n, n);
    let zero = CMatrix::zeros(n, n);
    let upper = embed(n, [&id, &random_hermitian(rng, n, scale), &zero, &id]);
    let lower = embed(n, [&id, &zero, &random_hermitian(rng, n, scale), &id]);
    let a = &id + random_matrix(rng, n, n, 0.3 * scale);
    let (a, a_inv_star) = match a.clone().try_inverse() {
        Some(inv) => (a, inv.adjoint()),
        None => (id.clone(), id.clone()),
    };
    let diag = embed(n, [&a, &zero, &zero, &a_inv_star]);
    upper * diag * lower
}

/// `Ψ = T diag{G G*, 0} T*` with `T` symplectic and `G` of rank at most `rank`.
pub fn random_psi<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize, scale: f64) -> CMatrix {
    let g = random_matrix(rng, n, rank, scale);
    let zero = CMatrix::zeros(n, n);
    let d = embed(n, [&(&g * g.adjoint()), &zero, &zero, &zero]);
    let t = random_symplectic(rng, n, 0.5);
    &t * d * t.adjoint()
}

/// A random `α` with `αα* = I`, `αJα* = 0`: `W (I + H²)^{-1/2} (I, H)`,
/// optionally followed by `J` on the right.
pub fn random_boundary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> BoundaryMatrix {
    let h = random_hermitian(rng, n, 1.0);
    let id = CMatrix::identity(n, n);
    let (_, inv_root) = hermitian_sqrt_pair(&(&id + &h * &h), 0.5).expect("I + H^2 >= I");
    let mut raw = CMatrix::zeros(n, 2 * n);
    raw.columns_mut(0, n).copy_from(&inv_root);
    raw.columns_mut(n, n).copy_from(&(&inv_root * &h));
    let q = random_matrix(rng, n, n, 1.0).qr().q();
    let mut alpha = q * raw;
    if rng.random_bool(0.5) {
        alpha *= crate::linalg::symplectic_unit(n);
    }
    BoundaryMatrix::new(alpha).expect("construction is admissible")
}

/// Random system on `[0, horizon]` with block size `n`, redrawn until the
/// weak Atkinson condition holds for the drawn `α`.
pub fn random_atkinson_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, horizon: usize) -> RandomInstance {
    loop {
        let mut s = Vec::with_capacity(horizon + 1);
        let mut psi = Vec::with_capacity(horizon + 1);
        for _ in 0..=horizon {
            s.push(random_symplectic(rng, n, 0.5));
            let rank = rng.random_range(0..=n);
            psi.push(random_psi(rng, n, rank, 0.8));
        }
        let system = SymplecticSystem::new(n, s, psi).expect("shapes are consistent");
        let alpha = random_boundary(rng, n);
        let beta = random_boundary(rng, n);
        if check_atkinson(&system, &alpha, &DEFAULT_PROBES).map(|c| c.holds).unwrap_or(false) {
            return RandomInstance { system, alpha, beta };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{validate_system, TOL_STRUCT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sl_rejects_bad_parameters() {
        assert!(sl_scalar(&[1.0, 2.0]).is_err());
        assert!(sl_scalar(&[0.0, 2.0, 1.0]).is_err());
        assert!(sl_scalar(&[0.0]).is_err());
        assert!(block_ab(-1.0, 1.0, 2).is_err());
    }

    #[test]
    fn random_systems_pass_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=3 {
            for horizon in [0, 3, 8] {
                let inst = random_atkinson_instance(&mut rng, n, horizon);
                let report = validate_system(&inst.system, TOL_STRUCT);
                assert!(report.passed, "{report:?}");
            }
        }
    }

    #[test]
    fn block_family_is_valid() {
        assert!(validate_system(&block_ab(2.0, 3.0, 4).unwrap(), TOL_STRUCT).passed);
    }
}
