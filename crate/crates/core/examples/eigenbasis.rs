//! Orthonormal eigenfunctions of a random system satisfying the weak
//! Atkinson condition, checked against the semi-inner product.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symspec::eigenbasis::orthonormal_eigen_set;
use symspec::families::random_atkinson_instance;
use symspec::linalg::max_abs;
use symspec::propagation::step_residual;
use symspec::{c64, CMatrix, Result};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = random_atkinson_instance(&mut rng, 2, 5);
    let sys = &inst.system;
    let set = orthonormal_eigen_set(sys, &inst.alpha, &inst.beta)?;

    println!("n = {}, N = {}, {} eigenfunctions", sys.n(), sys.horizon(), set.len());
    for e in &set.entries {
        let res = step_residual(sys, c64(e.lambda, 0.0), &e.eigenfunction, None)?;
        println!("  lambda = {:+.10}  |eta| = {:.6}  step residual {:.1e}", e.lambda, e.eta_vector().norm(), res);
    }
    let gram = set.gram(sys)?;
    let dev = max_abs(&(gram - CMatrix::identity(set.len(), set.len())));
    println!("max |Gram - I| = {dev:.2e}");

    // Sum of the jumps of the spectral step function, tau(+inf) - tau(-inf).
    let mut total = CMatrix::zeros(sys.n(), sys.n());
    for t in set.eigenvalues() {
        total += set.projector(t);
    }
    println!("sum of eta eta* over the spectrum:\n{total:.6}");
    Ok(())
}
