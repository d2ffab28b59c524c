//! Discrete symplectic systems `z_k = (S_k + λ V_k) z_{k+1}` on `[0, N]`,
//! their boundary matrices, sequence spaces and structural checks.
//!
//! A system is stored through the pair `(S_k, Ψ_k)`; the coupling matrix
//! `V_k = -J Ψ_k S_k` is always derived on demand.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, SpectralError};
use crate::linalg::{
    c64, hermitian_part, min_hermitian_eigenvalue, norm1, singular_values, symplectic_unit, CMatrix,
};

/// Default structural tolerance, relative to the 1-norm of the matrices involved.
pub const TOL_STRUCT: f64 = 1e-10;
/// Default relative threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

const PROBES: [(f64, f64); 2] = [(0.7, 0.3), (-1.3, 2.1)];

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSystem {
    n: usize,
    s: Vec<CMatrix>,
    psi: Vec<CMatrix>,
}

impl SymplecticSystem {
    /// Builds a system from `N + 1` pairs `(S_k, Ψ_k)` of `2n × 2n` matrices.
    ///
    /// Each `Ψ_k` whose skew-Hermitian part is below [`TOL_STRUCT`] (relative
    /// to its 1-norm) is replaced by its Hermitian part. Larger asymmetry is
    /// kept so that [`validate_system`] can report it.
    pub fn new(n: usize, s: Vec<CMatrix>, psi: Vec<CMatrix>) -> Result<Self> {
        if n == 0 {
            return Err(SpectralError::Dimension("block dimension n must be positive".into()));
        }
        if s.is_empty() || s.len() != psi.len() {
            return Err(SpectralError::Dimension(format!(
                "expected the same positive number of S and Psi matrices, got {} and {}",
                s.len(),
                psi.len()
            )));
        }
        for (k, (sk, pk)) in s.iter().zip(psi.iter()).enumerate() {
            if sk.shape() != (2 * n, 2 * n) || pk.shape() != (2 * n, 2 * n) {
                return Err(SpectralError::Dimension(format!(
                    "matrices at index {k} must be {0}x{0}, got S {1:?} and Psi {2:?}",
                    2 * n,
                    sk.shape(),
                    pk.shape()
                )));
            }
        }
        let psi = psi
            .into_iter()
            .map(|p| {
                let asym = norm1(&(&p - p.adjoint()));
                if asym <= TOL_STRUCT * norm1(&p).max(1.0) {
                    hermitian_part(&p)
                } else {
                    p
                }
            })
            .collect();
        Ok(Self { n, s, psi })
    }

    /// Block dimension `n` (matrices are `2n × 2n`).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Right endpoint `N` of the interval `[0, N]`.
    pub fn horizon(&self) -> usize {
        self.s.len() - 1
    }

    /// Number of sequence entries on `[0, N + 1]`.
    pub fn sequence_len(&self) -> usize {
        self.s.len() + 1
    }

    pub fn s(&self, k: usize) -> Result<&CMatrix> {
        self.s.get(k).ok_or(SpectralError::IndexOutOfRange { index: k, max: self.horizon() })
    }

    pub fn psi(&self, k: usize) -> Result<&CMatrix> {
        self.psi.get(k).ok_or(SpectralError::IndexOutOfRange { index: k, max: self.horizon() })
    }

    pub fn s_all(&self) -> &[CMatrix] {
        &self.s
    }

    pub fn psi_all(&self) -> &[CMatrix] {
        &self.psi
    }

    pub fn j(&self) -> CMatrix {
        symplectic_unit(self.n)
    }

    /// Same coefficients with every entry conjugated.
    pub fn conjugate(&self) -> Self {
        Self {
            n: self.n,
            s: self.s.iter().map(|m| m.map(|z| z.conj())).collect(),
            psi: self.psi.iter().map(|m| m.map(|z| z.conj())).collect(),
        }
    }
}

/// `V_k = -J Ψ_k S_k`.
pub fn v_from_psi(sys: &SymplecticSystem, k: usize) -> Result<CMatrix> {
    let j = sys.j();
    Ok(-(&j * sys.psi(k)? * sys.s(k)?))
}

/// A boundary matrix `α` (or `β`) of size `n × 2n` with `αα* = I` and `αJα* = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    mat: CMatrix,
}

impl BoundaryMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerance(mat, TOL_STRUCT)
    }

    pub fn with_tolerance(mat: CMatrix, tol: f64) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != 2 * n {
            return Err(SpectralError::Dimension(format!(
                "boundary matrix must be n x 2n, got {:?}",
                mat.shape()
            )));
        }
        let residual = Self::residual_of(&mat);
        if residual > tol {
            return Err(SpectralError::InvalidBoundary { residual });
        }
        Ok(Self { mat })
    }

    /// Builds `α` from real row-major entries.
    pub fn from_real_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != 2 * n * n {
            return Err(SpectralError::Dimension(format!(
                "expected {} entries for an {n}x{} boundary matrix, got {}",
                2 * n * n,
                2 * n,
                entries.len()
            )));
        }
        let data: Vec<Complex64> = entries.iter().map(|&x| c64(x, 0.0)).collect();
        Self::new(CMatrix::from_row_slice(n, 2 * n, &data))
    }

    /// `max(‖αα* − I‖₁, ‖αJα*‖₁)`
    pub fn residual_of(mat: &CMatrix) -> f64 {
        let n = mat.nrows();
        let j = symplectic_unit(n);
        let unit = norm1(&(mat * mat.adjoint() - CMatrix::identity(n, n)));
        let iso = norm1(&(mat * j * mat.adjoint()));
        unit.max(iso)
    }

    /// `(I_n  0)`
    pub fn first_block(n: usize) -> Self {
        let mut mat = CMatrix::zeros(n, 2 * n);
        for i in 0..n {
            mat[(i, i)] = c64(1.0, 0.0);
        }
        Self { mat }
    }

    /// `(0  I_n)`
    pub fn second_block(n: usize) -> Self {
        let mut mat = CMatrix::zeros(n, 2 * n);
        for i in 0..n {
            mat[(i, n + i)] = c64(1.0, 0.0);
        }
        Self { mat }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

/// Sequence of `2n × m` blocks indexed by `k = 0, …, N + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSequence {
    values: Vec<CMatrix>,
}

impl VectorSequence {
    pub fn new(values: Vec<CMatrix>) -> Result<Self> {
        let shape = values.first().map(|m| m.shape()).ok_or_else(|| {
            SpectralError::Dimension("a sequence needs at least one entry".into())
        })?;
        if values.iter().any(|m| m.shape() != shape) {
            return Err(SpectralError::Dimension("sequence entries differ in shape".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(rows: usize, cols: usize, len: usize) -> Self {
        Self { values: vec![CMatrix::zeros(rows, cols); len] }
    }

    /// Zero sequence shaped for `sys` with `cols` columns.
    pub fn zeros_for(sys: &SymplecticSystem, cols: usize) -> Self {
        Self::zeros(2 * sys.n(), cols, sys.sequence_len())
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> CMatrix) -> Result<Self> {
        Self::new((0..len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.values[0].ncols()
    }

    pub fn get(&self, k: usize) -> &CMatrix {
        &self.values[k]
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn into_values(self) -> Vec<CMatrix> {
        self.values
    }

    pub fn column(&self, j: usize) -> Self {
        Self { values: self.values.iter().map(|m| m.columns(j, 1).into_owned()).collect() }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self { values: self.values.iter().map(|m| m * a).collect() }
    }

    /// Right-multiplies every entry by `m`.
    pub fn mul_right(&self, m: &CMatrix) -> Self {
        Self { values: self.values.iter().map(|x| x * m).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    /// Largest entry modulus over all indices.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(crate::linalg::max_abs).fold(0.0, f64::max)
    }

    fn check_for(&self, sys: &SymplecticSystem) -> Result<()> {
        if self.len() != sys.sequence_len() || self.rows() != 2 * sys.n() {
            return Err(SpectralError::Dimension(format!(
                "sequence must have {} entries of {} rows, got {} entries of {} rows",
                sys.sequence_len(),
                2 * sys.n(),
                self.len(),
                self.rows()
            )));
        }
        Ok(())
    }
}

/// Semi-inner product matrix `Σ_{k=0}^{N} z_k* Ψ_k u_k` for multi-column sequences.
pub fn semi_inner_matrix(
    sys: &SymplecticSystem,
    z: &VectorSequence,
    u: &VectorSequence,
) -> Result<CMatrix> {
    z.check_for(sys)?;
    u.check_for(sys)?;
    let mut acc = CMatrix::zeros(z.cols(), u.cols());
    for (k, psi) in sys.psi_all().iter().enumerate() {
        acc += z.get(k).adjoint() * psi * u.get(k);
    }
    Ok(acc)
}

/// `⟨z, u⟩_Ψ = Σ_{k=0}^{N} z_k* Ψ_k u_k`; the entry at `N + 1` does not contribute.
pub fn semi_inner_product(
    sys: &SymplecticSystem,
    z: &VectorSequence,
    u: &VectorSequence,
) -> Result<Complex64> {
    if z.cols() != 1 || u.cols() != 1 {
        return Err(SpectralError::Dimension("semi_inner_product expects vector sequences".into()));
    }
    Ok(semi_inner_matrix(sys, z, u)?[(0, 0)])
}

/// `‖z‖_Ψ`, the square root of the real part of `⟨z, z⟩_Ψ`.
pub fn semi_norm(sys: &SymplecticSystem, z: &VectorSequence) -> Result<f64> {
    let v = semi_inner_product(sys, z, z)?;
    // Roundoff in the imaginary part follows the size of the summands, not of the sum.
    let summands: f64 = sys
        .psi_all()
        .iter()
        .enumerate()
        .map(|(k, psi)| z.get(k).norm_squared() * psi.norm())
        .sum();
    if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) + 64.0 * f64::EPSILON * summands {
        return Err(SpectralError::NumericalConsistency {
            what: "semi-inner product of a sequence with itself is not real".into(),
            residual: v.im.abs(),
        });
    }
    Ok(v.re.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpaceDimensions {
    /// Dimension of the sequence space on `[0, N + 1]`, `2n(N + 2)`.
    pub dim_ltp: usize,
    /// Dimension of the quotient Hilbert space, `Σ rank Ψ_k`.
    pub dim_quotient: usize,
}

pub fn space_dimensions(sys: &SymplecticSystem, rank_tol: f64) -> SpaceDimensions {
    SpaceDimensions {
        dim_ltp: 2 * sys.n() * sys.sequence_len(),
        dim_quotient: sys
            .psi_all()
            .iter()
            .map(|p| crate::linalg::numerical_rank(p, rank_tol))
            .sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst_residual: f64,
    pub failing_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub tol: f64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(move |c| c.worst_residual > self.tol)
    }
}

struct CheckAccumulator {
    name: &'static str,
    worst: f64,
    failing: Vec<usize>,
}

impl CheckAccumulator {
    fn new(name: &'static str) -> Self {
        Self { name, worst: 0.0, failing: Vec::new() }
    }

    fn record(&mut self, k: usize, residual: f64, tol: f64) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        self.worst = self.worst.max(residual);
        if residual > tol {
            self.failing.push(k);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult { name: self.name, worst_residual: self.worst, failing_indices: self.failing }
    }
}

/// Checks every structural hypothesis on `(S_k, Ψ_k)`. Numeric failures are
/// reported, never raised.
pub fn validate_system(sys: &SymplecticSystem, tol_struct: f64) -> ValidationReport {
    let n = sys.n();
    let j = sys.j();
    let mut symplectic = CheckAccumulator::new("symplectic_s");
    let mut hermitian = CheckAccumulator::new("psi_hermitian");
    let mut isotropic = CheckAccumulator::new("psi_isotropic");
    let mut psd = CheckAccumulator::new("psi_psd");
    let mut rank = CheckAccumulator::new("psi_rank");
    let mut coupling = CheckAccumulator::new("v_coupling_hermitian");
    let mut transition = CheckAccumulator::new("transition_symplectic");

    for k in 0..=sys.horizon() {
        let s = &sys.s[k];
        let p = &sys.psi[k];
        let sn = norm1(s).max(1.0);
        let pn = norm1(p).max(1.0);

        symplectic.record(k, norm1(&(s.adjoint() * &j * s - &j)) / (sn * sn), tol_struct);
        hermitian.record(k, norm1(&(p - p.adjoint())) / pn, tol_struct);
        isotropic.record(k, norm1(&(p * &j * p)) / (pn * pn), tol_struct);
        psd.record(k, (-min_hermitian_eigenvalue(p)).max(0.0) / pn, tol_struct);
        let sv = singular_values(p);
        let excess = sv.get(n).copied().unwrap_or(0.0) / sv.first().copied().unwrap_or(0.0).max(1.0);
        rank.record(k, excess, tol_struct);

        let v = -(&j * p * s);
        let w = v.adjoint() * &j * s;
        coupling.record(k, norm1(&(&w - w.adjoint())) / (norm1(&v).max(1.0) * sn), tol_struct);

        for &(re, im) in &PROBES {
            let lambda = c64(re, im);
            let at = s + &v * lambda;
            let at_conj = s + &v * lambda.conj();
            let r = norm1(&(at_conj.adjoint() * &j * &at - &j)) / (norm1(&at) * norm1(&at_conj)).max(1.0);
            transition.record(k, r, tol_struct);
        }
    }
    transition.failing.dedup();

    let checks: Vec<CheckResult> = [symplectic, hermitian, isotropic, psd, rank, coupling, transition]
        .into_iter()
        .map(CheckAccumulator::finish)
        .collect();
    let passed = checks.iter().all(|c| c.worst_residual <= tol_struct);
    ValidationReport { passed, tol: tol_struct, checks }
}

/// Residual of the extended Lagrange identity
///
/// `z_k* J u_k |_s^{t+1} = Σ_{k=s}^{t} [(λ̄ − ν) z_k* Ψ_k u_k + f_k* Ψ_k u_k − z_k* Ψ_k g_k]`
///
/// maximised over `0 ≤ s ≤ t ≤ N`, for `z` solving the system at `λ` with
/// forcing `f` and `u` solving it at `ν` with forcing `g` (absent forcing is zero).
pub fn lagrange_residual(
    sys: &SymplecticSystem,
    lambda: Complex64,
    nu: Complex64,
    z: &VectorSequence,
    u: &VectorSequence,
    f: Option<&VectorSequence>,
    g: Option<&VectorSequence>,
) -> Result<f64> {
    z.check_for(sys)?;
    u.check_for(sys)?;
    if let Some(f) = f {
        f.check_for(sys)?;
    }
    if let Some(g) = g {
        g.check_for(sys)?;
    }
    let j = sys.j();
    let len = sys.sequence_len();
    // D_k = z_k* J u_k − Σ_{i<k} term_i ; the identity says D is constant.
    let mut d = Vec::with_capacity(len);
    let mut partial = CMatrix::zeros(z.cols(), u.cols());
    for k in 0..len {
        let w = z.get(k).adjoint() * &j * u.get(k);
        d.push(&w - &partial);
        if k < len - 1 {
            let psi = &sys.psi[k];
            let mut term = (z.get(k).adjoint() * psi * u.get(k)) * (lambda.conj() - nu);
            if let Some(f) = f {
                term += f.get(k).adjoint() * psi * u.get(k);
            }
            if let Some(g) = g {
                term -= z.get(k).adjoint() * psi * g.get(k);
            }
            partial += term;
        }
    }
    let mut worst: f64 = 0.0;
    for s in 0..len {
        for t in (s + 1)..len {
            worst = worst.max(crate::linalg::max_abs(&(&d[t] - &d[s])));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::linalg::max_abs;

    fn diag2(a: f64, b: f64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(a, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(b, 0.0)])
    }

    #[test]
    fn sl_scalar_example_passes_validation() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(sys.horizon(), 1);
        let report = validate_system(&sys, TOL_STRUCT);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn identity_psi_violates_isotropy() {
        let id = CMatrix::identity(2, 2);
        let sys = SymplecticSystem::new(1, vec![id.clone(); 2], vec![id; 2]).unwrap();
        let report = validate_system(&sys, TOL_STRUCT);
        assert!(!report.passed);
        let iso = report.check("psi_isotropic").unwrap();
        assert!(iso.worst_residual > 0.1);
        assert_eq!(iso.failing_indices, vec![0, 1]);
    }

    #[test]
    fn skew_psi_violates_hermitian_check() {
        let id = CMatrix::identity(2, 2);
        let sys = SymplecticSystem::new(1, vec![id.clone(); 2], vec![symplectic_unit(1); 2]).unwrap();
        let report = validate_system(&sys, TOL_STRUCT);
        assert!(!report.passed);
        assert!(report.check("psi_hermitian").unwrap().worst_residual > 0.1);
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized_on_ingest() {
        let mut p = diag2(0.0, 1.0);
        p[(0, 1)] = c64(1e-14, 0.0);
        let sys = SymplecticSystem::new(1, vec![CMatrix::identity(2, 2)], vec![p]).unwrap();
        let q = sys.psi(0).unwrap();
        assert_eq!(q[(0, 1)], q[(1, 0)].conj());
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = SymplecticSystem::new(1, vec![CMatrix::identity(2, 2)], vec![]).unwrap_err();
        assert!(matches!(err, SpectralError::Dimension(_)));
        let err =
            SymplecticSystem::new(2, vec![CMatrix::identity(2, 2)], vec![CMatrix::identity(2, 2)]).unwrap_err();
        assert!(matches!(err, SpectralError::Dimension(_)));
    }

    #[test]
    fn v_from_block_example() {
        let (a, b) = (2.0_f64, 3.0_f64);
        let sys = families::block_ab(a, b, 2).unwrap();
        let v = v_from_psi(&sys, 1).unwrap();
        let r = (a * b).sqrt();
        for i in 0..2 {
            assert!((v[(i, i)] - c64(-r, 0.0)).norm() < 1e-14);
            assert!((v[(i, 2 + i)] - c64(-b, 0.0)).norm() < 1e-14);
            assert!((v[(2 + i, i)] - c64(a, 0.0)).norm() < 1e-14);
            assert!((v[(2 + i, 2 + i)] - c64(r, 0.0)).norm() < 1e-14);
        }
        assert!(v_from_psi(&sys, 3).is_err());
    }

    #[test]
    fn zero_psi_gives_zero_v_and_zero_quotient() {
        let sys = families::sl_scalar(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(max_abs(&v_from_psi(&sys, 0).unwrap()), 0.0);
        assert_eq!(space_dimensions(&sys, RANK_TOL).dim_quotient, 0);
    }

    #[test]
    fn quotient_dimension_examples() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let dims = space_dimensions(&sys, RANK_TOL);
        assert_eq!(dims, SpaceDimensions { dim_ltp: 2 * 4, dim_quotient: 3 });
        let sys = families::block_ab(1.0, 2.0, 3).unwrap();
        assert_eq!(space_dimensions(&sys, RANK_TOL).dim_quotient, 2 * 4);
    }

    #[test]
    fn norm_of_constant_second_component() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.5]).unwrap();
        let z = VectorSequence::from_fn(3, |_| {
            CMatrix::from_column_slice(2, 1, &[c64(0.0, 0.0), c64(1.0, 0.0)])
        })
        .unwrap();
        assert!((semi_norm(&sys, &z).unwrap() - 2.5_f64.sqrt()).abs() < 1e-14);
        let zero = VectorSequence::zeros_for(&sys, 1);
        assert_eq!(semi_inner_product(&sys, &zero, &zero).unwrap(), c64(0.0, 0.0));
    }

    #[test]
    fn inner_product_rejects_wrong_length() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0]).unwrap();
        let z = VectorSequence::zeros(2, 1, 2);
        assert!(semi_inner_product(&sys, &z, &z).is_err());
    }

    #[test]
    fn boundary_matrix_checks() {
        assert!(BoundaryMatrix::from_real_rows(1, &[1.0, 0.0]).is_ok());
        assert!(BoundaryMatrix::from_real_rows(1, &[1.0, 1.0]).is_err());
        // αJα* ≠ 0 for this 2x4 choice
        assert!(BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).is_err());
        assert!(BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn lagrange_residual_of_zero_sequences_is_zero() {
        let sys = families::sl_scalar(&[0.0, 1.0, 2.0]).unwrap();
        let z = VectorSequence::zeros_for(&sys, 1);
        let r = lagrange_residual(&sys, c64(0.3, 1.0), c64(2.0, -1.0), &z, &z, None, None).unwrap();
        assert_eq!(r, 0.0);
    }
}
