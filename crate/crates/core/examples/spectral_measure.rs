//! Spectral step function, residues of M at the eigenvalues and the integral
//! representation of M rebuilt from the jumps.

use symspec::families::block_ab;
use symspec::measure::{m_integral_representation, spectral_function};
use symspec::eigenbasis::orthonormal_eigen_set;
use symspec::weyl::m_residue;
use symspec::{c64, BoundaryMatrix, Result};

fn main() -> Result<()> {
    let sys = block_ab(1.0, 2.0, 3)?;
    let alpha = BoundaryMatrix::first_block(2);
    let beta = BoundaryMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])?;

    let tau = spectral_function(&sys, &alpha, &beta)?;
    println!("jumps of tau:");
    for j in &tau.jumps {
        println!("  t = {:+.10}\n{:.8}", j.t, j.d);
    }
    for t in [-1.0, 0.0, 0.1, 1.0] {
        println!("tau({t:+}) =\n{:.8}", tau.tau_at(t));
    }

    let set = orthonormal_eigen_set(&sys, &alpha, &beta)?;
    for t in set.eigenvalues() {
        let r = m_residue(&sys, &alpha, &beta, &set, t)?;
        println!("residue at {t:+.8}: relative gap to the numeric limit {:.1e}", r.relative_gap);
    }

    for lambda in [c64(0.0, 1.0), c64(0.3, -0.7), c64(-4.0, 0.1)] {
        let rep = m_integral_representation(&sys, &alpha, &beta, lambda)?;
        println!("lambda = {lambda}: |M rebuilt - M| = {:.1e}, imaginary-part gap {:.1e}", rep.gap, rep.im_gap);
    }
    Ok(())
}
