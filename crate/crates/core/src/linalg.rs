//! Dense complex linear algebra used throughout the crate.
//!
//! Most decompositions come from `nalgebra`. The general (non-Hermitian)
//! eigenvalue solver is implemented here as a shifted QR iteration on the
//! upper Hessenberg form, since companion matrices and the small Newton
//! pencils in the spectrum module are genuinely complex.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, SpectralError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The skew matrix `J = [[0, I], [-I, 0]]` of size `2n`.
///
/// This orientation is the one under which `V_k = -J Ψ_k S_k` reproduces the
/// standard worked examples (positive eigenvalues for the constant block
/// family, `Φ_k = [[1, λ v_k], [0, 1]]` for the scalar family).
pub fn symplectic_unit(n: usize) -> CMatrix {
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = c64(1.0, 0.0);
        j[(n + i, i)] = c64(-1.0, 0.0);
    }
    j
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(M + M*) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `(M - M*) / (2i)`
pub fn imaginary_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * c64(0.0, -0.5)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Only the Hermitian part of `m` is used.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Returns `(H^{1/2}, H^{-1/2})` for a Hermitian positive definite `H`.
/// Fails when the smallest eigenvalue does not exceed `floor`.
pub fn hermitian_sqrt_pair(h: &CMatrix, floor: f64) -> Result<(CMatrix, CMatrix)> {
    let (values, vectors) = hermitian_eigen(h);
    let min = values.first().copied().unwrap_or(0.0);
    if min <= floor {
        return Err(SpectralError::AtkinsonViolation { min_eig: min });
    }
    let n = values.len();
    let mut root = CMatrix::zeros(n, n);
    let mut inv_root = CMatrix::zeros(n, n);
    for (i, &lambda) in values.iter().enumerate() {
        let v = vectors.column(i);
        let outer = v * v.adjoint();
        root += outer.scale(lambda.sqrt());
        inv_root += outer.scale(1.0 / lambda.sqrt());
    }
    Ok((root, inv_root))
}

/// Singular value decomposition sorted by decreasing singular value.
/// Returns `(U, sigma, V)` where the columns of `V` are right singular vectors.
pub fn svd_sorted(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (CMatrix::zeros(rows, 0), Vec::new(), CMatrix::zeros(cols, 0));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").adjoint();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u_sorted = CMatrix::zeros(rows, k);
    let mut v_sorted = CMatrix::zeros(cols, k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v.column(src));
    }
    (u_sorted, sigma, v_sorted)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Solves `A X = B` with partial-pivoting LU. `None` when `A` is exactly singular.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    a.clone().lu().solve(b)
}

pub fn determinant(a: &CMatrix) -> Complex64 {
    if a.nrows() == 0 {
        return c64(1.0, 0.0);
    }
    a.clone().lu().determinant()
}

/// Least-squares / minimum-norm solution through the SVD, treating singular
/// values below `rel_tol * sigma_max` as zero.
pub fn lstsq(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> CMatrix {
    let (u, sigma, v) = svd_sorted(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut x = CMatrix::zeros(a.ncols(), b.ncols());
    for (i, &s) in sigma.iter().enumerate() {
        if s <= rel_tol * smax || s == 0.0 {
            break;
        }
        let coeff = u.column(i).adjoint() * b;
        x += v.column(i) * coeff.unscale(s);
    }
    x
}

/// All eigenvalues of a general complex square matrix.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![m[(0, 0)]]),
        _ => {}
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok(vec![Complex64::default(); n]);
    }
    let balanced = balance(&m.unscale(scale));
    let h = nalgebra::linalg::Hessenberg::new(balanced).unpack_h();
    let mut eig = hessenberg_qr(h)?;
    for z in eig.iter_mut() {
        *z *= scale;
    }
    Ok(eig)
}

/// Diagonal similarity balancing (Parlett–Reinsch, radix 2).
fn balance(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut a = m.clone();
    let radix = 2.0_f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].l1_norm();
                    row += a[(i, j)].l1_norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let mut g = row / radix;
            let mut f = 1.0;
            let s = col + row;
            while col < g {
                f *= radix;
                col *= radix * radix;
            }
            g = row * radix;
            while col > g {
                f /= radix;
                col /= radix * radix;
            }
            if (col + row) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)].unscale(f);
                    a[(j, i)] = a[(j, i)].scale(f);
                }
            }
        }
    }
    a
}

/// Rotation `G = [[c, s], [-conj(s), c]]` with `G [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    if b.norm() == 0.0 {
        return (1.0, Complex64::default());
    }
    if na == 0.0 {
        return (0.0, c64(1.0, 0.0));
    }
    let rho = na.hypot(b.norm());
    (na / rho, (a / na) * b.conj() / rho)
}

/// Single-shift QR iteration with Wilkinson shifts on an upper Hessenberg matrix.
fn hessenberg_qr(mut h: CMatrix) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let mut out = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if diag == 0.0 {
                diag = 1.0;
            }
            if sub <= eps * diag {
                h[(lo, lo - 1)] = Complex64::default();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            out.push(h[(hi, hi)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n {
            return Err(SpectralError::NoConvergence);
        }
        let a = h[(hi - 1, hi - 1)];
        let b = h[(hi - 1, hi)];
        let c = h[(hi, hi - 1)];
        let d = h[(hi, hi)];
        let mu = if iter % 11 == 10 {
            d + c.norm() * c64(0.75, 0.3)
        } else {
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * cs + sn * y;
                h[(k + 1, j)] = -sn.conj() * x + y * cs;
            }
            rotations.push((cs, sn));
        }
        for (offset, &(cs, sn)) in rotations.iter().enumerate() {
            let k = lo + offset;
            let last = (k + 2).min(hi);
            for i in lo..=last {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * cs + sn.conj() * y;
                h[(i, k + 1)] = -sn * x + y * cs;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
    out.push(h[(0, 0)]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_by_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn j_is_skew_and_orthogonal() {
        let j = symplectic_unit(2);
        assert_eq!(&j.transpose(), &(-&j));
        assert!(max_abs(&(j.adjoint() * &j - CMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn eigenvalues_of_triangular_matrix() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c64(1.0, 1.0),
                c64(2.0, 0.0),
                c64(3.0, 0.0),
                c64(0.0, 0.0),
                c64(-2.0, 0.0),
                c64(1.0, 0.0),
                c64(0.0, 0.0),
                c64(0.0, 0.0),
                c64(0.5, -3.0),
            ],
        );
        let got = sorted_by_re(eigenvalues(&m).unwrap());
        let want = [c64(-2.0, 0.0), c64(0.5, -3.0), c64(1.0, 1.0)];
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn eigenvalues_match_polynomial_roots_via_companion() {
        // roots 1, -2, 3i, 0.5 - i
        let roots = [c64(1.0, 0.0), c64(-2.0, 0.0), c64(0.0, 3.0), c64(0.5, -1.0)];
        let mut coeffs = vec![c64(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::default(); coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            coeffs = next;
        }
        let d = roots.len();
        let mut comp = CMatrix::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = c64(1.0, 0.0);
        }
        for i in 0..d {
            comp[(i, d - 1)] = -coeffs[i];
        }
        let got = eigenvalues(&comp).unwrap();
        for r in roots {
            let best = got.iter().map(|g| (g - r).norm()).fold(f64::MAX, f64::min);
            assert!(best < 1e-10, "root {r} missing, closest distance {best}");
        }
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let h = CMatrix::from_row_slice(2, 2, &[c64(4.0, 0.0), c64(1.0, 1.0), c64(1.0, -1.0), c64(3.0, 0.0)]);
        let (r, ri) = hermitian_sqrt_pair(&h, 0.0).unwrap();
        assert!(max_abs(&(&r * &r - &h)) < 1e-12);
        assert!(max_abs(&(&r * &ri - CMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn lstsq_returns_minimum_norm_solution() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0)]);
        let b = CMatrix::from_column_slice(2, 1, &[c64(2.0, 0.0), c64(2.0, 0.0)]);
        let x = lstsq(&a, &b, 1e-12);
        assert!((x[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!((x[(1, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
    }
}
