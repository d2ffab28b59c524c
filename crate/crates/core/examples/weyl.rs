//! Weyl-Titchmarsh function, Weyl solution and Green kernel. For the scalar
//! example with v = (0, 1, 2) and alpha = beta = (1 0) the function is
//! M(lambda) = -1 / (2 lambda).

use symspec::families::sl_scalar;
use symspec::linalg::max_abs;
use symspec::weyl::{green_kernel, m_function, weyl_data};
use symspec::{c64, BoundaryMatrix, Result};

fn main() -> Result<()> {
    let sys = sl_scalar(&[0.0, 1.0, 2.0])?;
    let bc = BoundaryMatrix::from_real_rows(1, &[1.0, 0.0])?;

    for lambda in [c64(0.0, 1.0), c64(1.0, 1.0), c64(-2.0, 0.5)] {
        let m = m_function(&sys, &bc, &bc, lambda)?;
        let exact = -(2.0 * lambda).inv();
        println!("M({lambda}) = {:.12}   closed form {:.12}", m.m[(0, 0)], exact);
    }

    let lambda = c64(0.5, 2.0);
    let data = weyl_data(&sys, &bc, &bc, lambda)?;
    println!("\nWeyl solution at {lambda}:");
    for k in 0..data.chi.len() {
        let x = data.chi.get(k);
        println!("  k = {k}: ({:.6}, {:.6})", x[(0, 0)], x[(1, 0)]);
    }

    let kernel = green_kernel(&sys, &bc, &bc, lambda)?;
    println!("\nGreen kernel G(k, j) at {lambda}, largest entry per pair:");
    for k in 0..kernel.len() {
        let row: Vec<String> = kernel.row(k)?.iter().map(|g| format!("{:.4}", max_abs(g))).collect();
        println!("  k = {k}: {}", row.join("  "));
    }
    Ok(())
}
