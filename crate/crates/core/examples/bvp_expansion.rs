//! Nonhomogeneous boundary value problem: three solvers agree, and the
//! solution at lambda = 0 expands in the orthonormal eigenfunctions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symspec::bvp::{expand, solve_bvp_closed_form, solve_bvp_dense_oracle, solve_bvp_kernel, truncation_bound};
use symspec::families::random_atkinson_instance;
use symspec::{c64, CMatrix, Result, VectorSequence};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = random_atkinson_instance(&mut rng, 2, 4);
    let (sys, alpha, beta) = (&inst.system, &inst.alpha, &inst.beta);
    let f = VectorSequence::from_fn(sys.sequence_len(), |_| {
        CMatrix::from_fn(2 * sys.n(), 1, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    })?;

    let lambda = c64(0.4, 0.9);
    let closed = solve_bvp_closed_form(sys, alpha, beta, lambda, &f, None)?;
    let kernel = solve_bvp_kernel(sys, alpha, beta, lambda, &f, None)?;
    let dense = solve_bvp_dense_oracle(sys, alpha, beta, lambda, &f, None)?;
    println!("solvers at lambda = {lambda}:");
    println!("  closed form vs Green kernel: {:.2e}", closed.z.sub(&kernel.z).max_abs());
    println!("  closed form vs dense stack:  {:.2e}", closed.z.sub(&dense.z).max_abs());
    println!("  step residual {:.1e}, boundary residual {:.1e}", closed.step_residual, closed.boundary_residual);

    let zhat = solve_bvp_dense_oracle(sys, alpha, beta, c64(0.0, 0.0), &f, None)?.z;
    let exp = expand(sys, alpha, beta, &zhat, &f)?;
    println!("\nexpansion of the solution at lambda = 0:");
    println!("  {} coefficients", exp.coefficients.len());
    println!("  |zhat|^2 = {:.12}", exp.norm_sq);
    println!("  Parseval gap {:.1e}, residual semi-norm {:.1e}", exp.parseval_gap, exp.residual_seminorm);
    for a in [0.5, 2.0, 10.0] {
        let (lhs, rhs) = truncation_bound(sys, alpha, beta, &zhat, &f, a)?;
        println!("  tail above |t| = {a}: {lhs:.6} <= {rhs:.6}");
    }
    Ok(())
}
