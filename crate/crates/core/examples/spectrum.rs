//! Eigenvalues of the scalar and block example families under several
//! boundary conditions, with multiplicities and the Atkinson verdict.

use symspec::families::{block_ab, sl_scalar};
use symspec::spectrum::{char_poly, check_atkinson, eigenvalues, DEFAULT_PROBES, EIG_TOL};
use symspec::{BoundaryMatrix, Result, SymplecticSystem};

fn show(name: &str, sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &BoundaryMatrix) -> Result<()> {
    let spec = eigenvalues(sys, alpha, beta, EIG_TOL)?;
    let atkinson = check_atkinson(sys, alpha, &DEFAULT_PROBES)?;
    println!("{name}");
    println!("  Atkinson holds: {}  (min eig of Omega at probes: {:?})", atkinson.holds, atkinson.min_eig);
    if spec.degenerate {
        println!("  det vanishes identically: every complex number is an eigenvalue");
        return Ok(());
    }
    println!("  degree of det(beta Z~_(N+1)): {}", char_poly(sys, alpha, beta)?.degree());
    if spec.eigenvalues.is_empty() {
        println!("  no eigenvalues");
    }
    for e in &spec.eigenvalues {
        println!("  lambda = {:+.12}  alg {}  geom {}", e.lambda.re, e.alg_mult, e.geom_mult);
    }
    Ok(())
}

fn main() -> Result<()> {
    let sys = sl_scalar(&[0.0, 1.0, 2.0, 3.0])?;
    let d = BoundaryMatrix::from_real_rows(1, &[0.0, 1.0])?;
    let n = BoundaryMatrix::from_real_rows(1, &[1.0, 0.0])?;
    show("scalar, v = (0, 1, 2, 3), alpha = beta = (0 1)", &sys, &d, &d)?;
    show("scalar, alpha = (0 1), beta = (1 0)", &sys, &d, &n)?;
    show("scalar, alpha = beta = (1 0)", &sys, &n, &n)?;

    let sys = block_ab(2.0, 3.0, 4)?;
    let alpha = BoundaryMatrix::first_block(2);
    show("block, a = 2, b = 3, N = 4, beta = (I 0)", &sys, &alpha, &BoundaryMatrix::first_block(2))?;
    show("block, beta = (0 I)", &sys, &alpha, &BoundaryMatrix::second_block(2))?;
    let mixed = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])?;
    show("block, mixed beta", &sys, &alpha, &mixed)?;
    println!("\nexpected nonzero eigenvalue 1/(5 sqrt 6) = {:.12}", 1.0 / (5.0 * 6f64.sqrt()));
    Ok(())
}
