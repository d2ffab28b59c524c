//! Eigenvalues of the boundary value problem `α z_0 = 0`, `β z_{N+1} = 0`.
//!
//! `λ` is an eigenvalue exactly when `det β Z̃_{N+1}(λ) = 0`. The
//! characteristic polynomial is recovered by interpolation on a circle.
//! Under the weak Atkinson condition the eigenvalues are located through the
//! resolvent of the problem restricted to the quotient space, which is a
//! normal matrix, and refined with local shifts; algebraic multiplicities are
//! counted with the argument principle on `det β Z̃_{N+1}`. Without the
//! condition the roots of the characteristic polynomial are used directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, SpectralError};
use crate::linalg::{c64, determinant, eigenvalues as matrix_eigenvalues, frobenius, hermitian_eigen, svd_sorted, CMatrix};
use crate::propagation::{check_boundary, initial_ztilde, stacked_operator, InverseSteps};
use crate::system::{BoundaryMatrix, SymplecticSystem, RANK_TOL};

pub const EIG_TOL: f64 = 1e-8;
pub const ZERO_POLY_TOL: f64 = 1e-10;
pub const ATK_TOL: f64 = 1e-10;
pub const CLUSTER_TOL: f64 = 1e-7;
pub const DEFAULT_PROBES: [Complex64; 3] = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0)];

/// Coefficients `c_0, …, c_d` of `p(λ) = det β Z̃_{N+1}(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharPoly {
    #[serde(serialize_with = "crate::cli::serialize_complex_vec")]
    pub coeffs: Vec<Complex64>,
    pub is_identically_zero: bool,
    /// Radius of the interpolation circle that produced `coeffs`.
    pub radius: f64,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::default(), |acc, &c| acc * lambda + c)
    }

    /// Roots as eigenvalues of the companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let d = self.degree();
        if self.is_identically_zero {
            return Err(SpectralError::DegenerateSpectrum);
        }
        if d == 0 {
            return Ok(Vec::new());
        }
        let lead = self.coeffs[d];
        let mut comp = CMatrix::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = c64(1.0, 0.0);
        }
        for i in 0..d {
            comp[(i, d - 1)] = -self.coeffs[i] / lead;
        }
        matrix_eigenvalues(&comp)
    }
}

struct Evaluator<'a> {
    steps: InverseSteps,
    z0: CMatrix,
    beta: &'a BoundaryMatrix,
}

impl<'a> Evaluator<'a> {
    fn new(sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &'a BoundaryMatrix) -> Self {
        Self { steps: InverseSteps::new(sys), z0: initial_ztilde(sys, alpha), beta }
    }

    /// `β Z̃_{N+1}(λ)`
    fn boundary_matrix(&self, lambda: Complex64) -> Result<CMatrix> {
        Ok(self.beta.matrix() * self.steps.propagate_to_end(lambda, &self.z0)?)
    }

    /// `β Z̃_{N+1}(λ)` and `max_k ‖Z̃_k(λ)‖_F`, the size of the intermediate
    /// values that bounds the rounding error of the propagated end value.
    fn boundary_matrix_with_scale(&self, lambda: Complex64) -> Result<(CMatrix, f64)> {
        let all = self.steps.propagate(lambda, self.z0.clone())?;
        let scale = all.iter().map(frobenius).fold(0.0, f64::max);
        Ok((self.beta.matrix() * all.last().expect("at least two entries"), scale))
    }

    /// Determinant and its Hadamard bound (product of column norms).
    fn det(&self, lambda: Complex64) -> Result<(Complex64, f64)> {
        let m = self.boundary_matrix(lambda)?;
        let bound = (0..m.ncols()).map(|j| m.column(j).norm()).product();
        Ok((determinant(&m), bound))
    }
}

/// `det β Z̃_{N+1}(λ)`.
pub fn characteristic_value(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
) -> Result<Complex64> {
    check_boundary(sys, alpha)?;
    check_boundary(sys, beta)?;
    Ok(Evaluator::new(sys, alpha, beta).det(lambda)?.0)
}

fn interpolate(eval: &Evaluator, degree_bound: usize, radius: f64) -> Result<(Vec<Complex64>, bool)> {
    let nodes = degree_bound + 1;
    let mut values = Vec::with_capacity(nodes);
    let mut all_zero = true;
    for m in 0..nodes {
        let w = Complex64::from_polar(1.0, 2.0 * PI * m as f64 / nodes as f64);
        let (v, bound) = eval.det(w * radius)?;
        if v.norm() > ZERO_POLY_TOL * bound {
            all_zero = false;
        }
        values.push(v);
    }
    let mut scaled = vec![Complex64::default(); nodes];
    for (j, q) in scaled.iter_mut().enumerate() {
        for (m, v) in values.iter().enumerate() {
            let w = Complex64::from_polar(1.0, -2.0 * PI * ((j * m) % nodes) as f64 / nodes as f64);
            *q += v * w;
        }
        *q /= nodes as f64;
    }
    Ok((scaled, all_zero))
}

fn trim_scaled(scaled: &[Complex64], radius: f64) -> Vec<Complex64> {
    let big = scaled.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let top = scaled.iter().rposition(|c| c.norm() > ZERO_POLY_TOL * big).unwrap_or(0);
    scaled[..=top].iter().enumerate().map(|(j, &q)| q / radius.powi(j as i32)).collect()
}

/// Fujiwara's bound on the moduli of the roots.
fn root_bound(coeffs: &[Complex64]) -> f64 {
    let d = coeffs.len() - 1;
    if d == 0 {
        return 0.0;
    }
    let lead = coeffs[d].norm();
    (1..=d)
        .map(|j| {
            let ratio = coeffs[d - j].norm() / lead;
            if j == d {
                (ratio / 2.0).powf(1.0 / j as f64)
            } else {
                ratio.powf(1.0 / j as f64)
            }
        })
        .fold(0.0, f64::max)
        * 2.0
}

pub fn char_poly(sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &BoundaryMatrix) -> Result<CharPoly> {
    check_boundary(sys, alpha)?;
    check_boundary(sys, beta)?;
    let eval = Evaluator::new(sys, alpha, beta);
    let bound = sys.n() * (sys.horizon() + 1);
    let (scaled, zero) = interpolate(&eval, bound, 1.0)?;
    if zero {
        return Ok(CharPoly { coeffs: vec![Complex64::default()], is_identically_zero: true, radius: 1.0 });
    }
    let coeffs = trim_scaled(&scaled, 1.0);
    let estimate = root_bound(&coeffs);
    if estimate > 2.0 && estimate.is_finite() {
        let radius = estimate.min(1e8);
        let (scaled, _) = interpolate(&eval, bound, radius)?;
        return Ok(CharPoly { coeffs: trim_scaled(&scaled, radius), is_identically_zero: false, radius });
    }
    Ok(CharPoly { coeffs, is_identically_zero: false, radius: 1.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtkinsonCheck {
    pub holds: bool,
    #[serde(serialize_with = "crate::cli::serialize_complex_vec")]
    pub probes: Vec<Complex64>,
    pub min_eig: Vec<f64>,
    pub verdicts: Vec<bool>,
    /// All probes gave the same verdict.
    pub consistent: bool,
}

/// `Ω(λ) = Σ_k Z̃_k*(λ) Ψ_k Z̃_k(λ)` together with the scale
/// `Σ_k ‖Z̃_k‖² ‖Ψ_k‖` used for relative decisions.
pub(crate) fn omega_with_scale(sys: &SymplecticSystem, ztilde: &[CMatrix]) -> (CMatrix, f64) {
    let n = sys.n();
    let mut omega = CMatrix::zeros(n, n);
    let mut scale = 0.0;
    for (z, psi) in ztilde.iter().zip(sys.psi_all()) {
        omega += z.adjoint() * psi * z;
        scale += frobenius(z).powi(2) * frobenius(psi);
    }
    (crate::linalg::hermitian_part(&omega), scale)
}

pub fn check_atkinson(sys: &SymplecticSystem, alpha: &BoundaryMatrix, probes: &[Complex64]) -> Result<AtkinsonCheck> {
    check_boundary(sys, alpha)?;
    let probes = if probes.is_empty() { DEFAULT_PROBES.to_vec() } else { probes.to_vec() };
    let steps = InverseSteps::new(sys);
    let z0 = initial_ztilde(sys, alpha);
    let mut min_eig = Vec::with_capacity(probes.len());
    let mut verdicts = Vec::with_capacity(probes.len());
    for &p in &probes {
        let zt = steps.propagate(p, z0.clone())?;
        let (omega, scale) = omega_with_scale(sys, &zt);
        let m = hermitian_eigen(&omega).0[0];
        min_eig.push(m);
        verdicts.push(scale > 0.0 && m > ATK_TOL * scale);
    }
    let holds = verdicts.iter().all(|&v| v);
    let consistent = verdicts.iter().all(|&v| v == verdicts[0]);
    Ok(AtkinsonCheck { holds, probes, min_eig, verdicts, consistent })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenvalue {
    #[serde(serialize_with = "crate::cli::serialize_complex")]
    pub lambda: Complex64,
    pub alg_mult: usize,
    pub geom_mult: usize,
    /// Orthonormal columns spanning `ker β Z̃_{N+1}(λ)`.
    #[serde(serialize_with = "crate::cli::serialize_matrix")]
    pub kernel_basis: CMatrix,
    /// `‖β Z̃_{N+1}(λ) Ξ‖₂` for the basis `Ξ`, relative to `max_k ‖Z̃_k(λ)‖_F`.
    pub kernel_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub degenerate: bool,
    pub atkinson_holds: bool,
    /// Set when some eigenvalue has a non-negligible imaginary part.
    pub complex_warning: bool,
    /// Degree of the trimmed characteristic polynomial.
    pub poly_degree: usize,
}

impl Spectrum {
    pub fn total_alg(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.alg_mult).sum()
    }

    pub fn total_geom(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.geom_mult).sum()
    }
}

/// Orthonormal factors `F_k` with `Ψ_k = F_k F_k*`.
pub(crate) fn psi_factors(sys: &SymplecticSystem) -> Vec<CMatrix> {
    sys.psi_all()
        .iter()
        .map(|psi| {
            let (values, vectors) = hermitian_eigen(psi);
            let top = values.last().copied().unwrap_or(0.0);
            let keep: Vec<usize> = (0..values.len()).filter(|&i| top > 0.0 && values[i] > RANK_TOL * top).collect();
            let mut f = CMatrix::zeros(psi.nrows(), keep.len());
            for (dst, &i) in keep.iter().enumerate() {
                f.set_column(dst, &(vectors.column(i) * c64(values[i].sqrt(), 0.0)));
            }
            f
        })
        .collect()
}

/// Matrix of the resolvent `f ↦ z` of the boundary value problem at `σ` in an
/// orthonormal basis of the quotient space.
fn quotient_resolvent(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    factors: &[CMatrix],
    sigma: Complex64,
) -> Result<CMatrix> {
    let n2 = 2 * sys.n();
    let dim: usize = factors.iter().map(|f| f.ncols()).sum();
    let op = stacked_operator(sys, alpha, beta, sigma)?;
    let j = sys.j();
    let mut rhs = CMatrix::zeros(op.nrows(), dim);
    let mut col = 0;
    for (k, f) in factors.iter().enumerate() {
        let block = -(&j * f);
        rhs.view_mut((n2 * k, col), (n2, f.ncols())).copy_from(&block);
        col += f.ncols();
    }
    let sol = crate::linalg::lu_solve(&op, &rhs)
        .ok_or(SpectralError::EigenvalueProximity { lambda: sigma, ratio: 0.0 })?;
    if !crate::linalg::is_finite(&sol) {
        return Err(SpectralError::EigenvalueProximity { lambda: sigma, ratio: 0.0 });
    }
    let mut r = CMatrix::zeros(dim, dim);
    let mut row = 0;
    for (k, f) in factors.iter().enumerate() {
        let zk = sol.view((n2 * k, 0), (n2, dim));
        r.view_mut((row, 0), (f.ncols(), dim)).copy_from(&(f.adjoint() * zk));
        row += f.ncols();
    }
    Ok(r)
}

/// Eigenvalues `σ + 1/μ` of the problem from the resolvent spectrum at `σ`.
fn resolvent_eigenvalues(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    factors: &[CMatrix],
    sigma: Complex64,
) -> Result<Vec<Complex64>> {
    let r = quotient_resolvent(sys, alpha, beta, factors, sigma)?;
    let mu = matrix_eigenvalues(&r)?;
    // With an empty spectrum R itself is roundoff, so the floor also has an
    // absolute part on the scale of Ψ (|λ - σ| beyond ~1e12 / ‖Ψ‖ is noise).
    let psi_scale = factors.iter().map(|f| f.norm_squared()).fold(0.0, f64::max);
    let floor = (1e-9 * frobenius(&r)).max(1e-12 * psi_scale);
    Ok(mu.into_iter().filter(|m| m.norm() > floor && floor > 0.0).map(|m| sigma + m.inv()).collect())
}

fn cluster_tol(lambda: Complex64) -> f64 {
    CLUSTER_TOL * (1.0 + lambda.norm())
}

/// Groups values within the cluster tolerance; returns (center, size).
fn cluster(mut values: Vec<Complex64>) -> Vec<(Complex64, usize)> {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    for v in values {
        let joined = groups.iter_mut().find(|g| {
            let c = g.iter().sum::<Complex64>() / g.len() as f64;
            (c - v).norm() <= cluster_tol(c)
        });
        match joined {
            Some(g) => g.push(v),
            None => groups.push(vec![v]),
        }
    }
    groups
        .into_iter()
        .map(|g| (g.iter().sum::<Complex64>() / g.len() as f64, g.len()))
        .collect()
}

fn gaps(centers: &[Complex64]) -> Vec<f64> {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            centers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, d)| (c - d).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `arg det A(λ)` for the stacked boundary value matrix, from the pivots of
/// its LU factorisation (no overflow for large `|λ|`).
fn stacked_det_arg(sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &BoundaryMatrix, lambda: Complex64) -> Result<f64> {
    let lu = stacked_operator(sys, alpha, beta, lambda)?.lu();
    let u = lu.u();
    let mut arg = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == Complex64::default() || !d.is_finite() {
            return Err(SpectralError::NumericalConsistency {
                what: format!("stacked matrix singular on the counting circle at {lambda}"),
                residual: 0.0,
            });
        }
        arg += d.arg();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        arg += PI;
    }
    Ok(arg)
}

/// Number of zeros of `det β Z̃_{N+1}` inside the circle `|λ − center| = radius`.
///
/// The stacked matrix `A(λ)` of the boundary value problem is affine in `λ`
/// and `det A(λ) = c · det β Z̃_{N+1}(λ)` with `c ≠ 0` independent of `λ`
/// (block elimination and `det 𝕊_k = 1`), so the winding of `det A` is
/// counted. Evaluating `β Z̃_{N+1}` by propagation instead loses all relative
/// accuracy once `|λ|` is in the hundreds.
fn winding_number(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    center: Complex64,
    radius: f64,
) -> Result<usize> {
    let at = |m: usize, samples: usize| {
        let w = Complex64::from_polar(radius, 2.0 * PI * m as f64 / samples as f64);
        stacked_det_arg(sys, alpha, beta, center + w)
    };
    let mut samples = 16usize;
    let mut args = (0..samples).map(|m| at(m, samples)).collect::<Result<Vec<f64>>>()?;
    loop {
        let mut total = 0.0;
        let mut worst: f64 = 0.0;
        for m in 0..samples {
            let raw = args[(m + 1) % samples] - args[m];
            let step = raw - 2.0 * PI * (raw / (2.0 * PI)).round();
            worst = worst.max(step.abs());
            total += step;
        }
        if (worst < PI / 4.0 && total.is_finite()) || samples >= 4096 {
            let turns = (total / (2.0 * PI)).round();
            if !turns.is_finite() || turns < 0.0 {
                return Err(SpectralError::NumericalConsistency {
                    what: "argument principle on the characteristic determinant".into(),
                    residual: total,
                });
            }
            return Ok(turns as usize);
        }
        // Doubling keeps the old samples at the even positions.
        samples *= 2;
        let mut finer = Vec::with_capacity(samples);
        for (m, &old) in args.iter().enumerate() {
            finer.push(old);
            finer.push(at(2 * m + 1, samples)?);
        }
        args = finer;
    }
}

/// Kernel of `β Z̃_{N+1}(λ)` read off the null space of the stacked boundary
/// value problem at `λ`.
///
/// A null vector `(z_0, …, z_{N+1})` is an eigenfunction and `z_0 = Z̃_0 ξ`
/// with `ξ = Z̃_0* z_0`. The stacked matrix only contains the coefficients, so
/// its singular values do not suffer from the growth of `Z̃_k(λ)`; the count
/// uses singular values below `eig_tol · σ_max`.
fn kernel(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    eval: &Evaluator,
    lambda: Complex64,
    eig_tol: f64,
    at_least_one: bool,
) -> Result<(CMatrix, f64)> {
    let op = stacked_operator(sys, alpha, eval.beta, lambda)?;
    let (_, sigma, v) = svd_sorted(&op);
    let size = sigma.len();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut count = sigma.iter().filter(|&&s| s <= eig_tol * smax).count();
    if count == 0 && at_least_one {
        count = 1;
    }
    let n = sys.n();
    let z0_tilde = initial_ztilde(sys, alpha);
    let xi = z0_tilde.adjoint() * v.view((0, size - count), (2 * n, count));
    let (u, xs, _) = svd_sorted(&xi);
    let basis = u.columns(0, count.min(xs.len())).into_owned();
    let (m, scale) = eval.boundary_matrix_with_scale(lambda)?;
    let residual = if basis.ncols() == 0 || scale == 0.0 {
        0.0
    } else {
        crate::linalg::singular_values(&(m * &basis)).first().copied().unwrap_or(0.0) / scale
    };
    Ok((basis, residual))
}

pub fn eigenvalues(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    eig_tol: f64,
) -> Result<Spectrum> {
    let poly = char_poly(sys, alpha, beta)?;
    if poly.is_identically_zero {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            degenerate: true,
            atkinson_holds: false,
            complex_warning: false,
            poly_degree: 0,
        });
    }
    let atkinson = check_atkinson(sys, alpha, &DEFAULT_PROBES)?.holds;
    let eval = Evaluator::new(sys, alpha, beta);
    let eigenvalues = if atkinson {
        atkinson_eigenvalues(sys, alpha, beta, &eval, eig_tol)?
    } else {
        polynomial_eigenvalues(sys, alpha, &poly, &eval, eig_tol)?
    };
    let complex_warning = eigenvalues.iter().any(|e| e.lambda.im.abs() > eig_tol * (1.0 + e.lambda.re.abs()));
    Ok(Spectrum { eigenvalues, degenerate: false, atkinson_holds: atkinson, complex_warning, poly_degree: poly.degree() })
}

fn polynomial_eigenvalues(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    poly: &CharPoly,
    eval: &Evaluator,
    eig_tol: f64,
) -> Result<Vec<Eigenvalue>> {
    let mut out = Vec::new();
    for (lambda, size) in cluster(poly.roots()?) {
        let (kernel_basis, kernel_residual) = kernel(sys, alpha, eval, lambda, eig_tol, true)?;
        out.push(Eigenvalue { lambda, alg_mult: size, geom_mult: kernel_basis.ncols(), kernel_basis, kernel_residual });
    }
    Ok(out)
}

fn atkinson_eigenvalues(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    eval: &Evaluator,
    eig_tol: f64,
) -> Result<Vec<Eigenvalue>> {
    let factors = psi_factors(sys);
    let mut rough = None;
    for sigma in [c64(0.0, 1.0), c64(0.3, 2.7), c64(-0.7, 0.45)] {
        if let Ok(v) = resolvent_eigenvalues(sys, alpha, beta, &factors, sigma) {
            rough = Some(v);
            break;
        }
    }
    let rough = rough.ok_or(SpectralError::NoConvergence)?;
    let clusters = cluster(rough.into_iter().map(|z| c64(z.re, z.im)).collect());
    let centers: Vec<Complex64> = clusters.iter().map(|c| c.0).collect();
    let gap = gaps(&centers);

    let mut out = Vec::with_capacity(clusters.len());
    for (i, &(center, size)) in clusters.iter().enumerate() {
        let h = (1e-3 * (1.0 + center.norm())).min(0.25 * gap[i]);
        let sigma = c64(center.re, center.im + h);
        let local = resolvent_eigenvalues(sys, alpha, beta, &factors, sigma)?;
        let mut nearest: Vec<Complex64> = local;
        nearest.sort_by(|a, b| (a - sigma).norm().total_cmp(&(b - sigma).norm()));
        nearest.truncate(size);
        let mut lambda = nearest.iter().sum::<Complex64>() / size as f64;
        if lambda.im.abs() <= eig_tol * (1.0 + lambda.re.abs()) {
            lambda.im = 0.0;
        } else {
            return Err(SpectralError::NumericalConsistency {
                what: format!("non-real eigenvalue {lambda} under the weak Atkinson condition"),
                residual: lambda.im.abs(),
            });
        }
        let (kernel_basis, kernel_residual) = kernel(sys, alpha, eval, lambda, eig_tol, false)?;
        let radius = (1e-2 * (1.0 + lambda.norm())).min(0.3 * gap[i]);
        let alg = winding_number(sys, alpha, beta, lambda, radius)?;
        let geom = kernel_basis.ncols();
        if alg != geom || geom != size {
            return Err(SpectralError::NumericalConsistency {
                what: format!(
                    "multiplicities at lambda = {lambda}: algebraic {alg}, geometric {geom}, resolvent {size}"
                ),
                residual: kernel_residual,
            });
        }
        out.push(Eigenvalue { lambda, alg_mult: alg, geom_mult: geom, kernel_basis, kernel_residual });
    }
    out.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re));
    Ok(out)
}
