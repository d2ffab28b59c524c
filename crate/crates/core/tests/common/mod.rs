//! Shared measurements for the random-system checks.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symspec::bvp::{expand_with, solve_bvp_closed_form, solve_bvp_dense_oracle, solve_bvp_kernel, truncation_bound_with};
use symspec::eigenbasis::{orthonormal_eigen_set_from, OrthonormalEigenSet};
use symspec::families::{random_atkinson_instance, RandomInstance};
use symspec::linalg::{c64, hermitian_part, imaginary_part, max_abs, min_hermitian_eigenvalue, numerical_rank, CMatrix};
use symspec::measure::{im_excess_min_eig, SpectralStepFunction};
use symspec::propagation::{fundamental_solutions, transition, wronskian};
use symspec::spectrum::{eigenvalues, Spectrum, EIG_TOL};
use symspec::system::{semi_inner_matrix, RANK_TOL};
use symspec::weyl::{green_kernel, green_bound_gap, m_function, m_residue};
use symspec::{SymplecticSystem, VectorSequence};

/// Worst value of every measured quantity over a batch. Residual-type
/// entries are maxima, positivity-type entries are minima.
#[derive(Debug, Clone)]
pub struct Worst {
    pub systems: usize,
    pub eigenvalues: usize,
    pub symplectic: f64,
    pub wronskian: f64,
    pub reflection: f64,
    pub nevanlinna: f64,
    pub bvp_oracle: f64,
    pub expansion_residual: f64,
    pub parseval: f64,
    pub residue: f64,
    pub tau_jump: f64,
    pub truncation: f64,
    pub green_gap: f64,
    pub im_excess: f64,
    pub imag_part: f64,
    pub mult_mismatch: usize,
    pub count_violations: usize,
}

impl Default for Worst {
    fn default() -> Self {
        Self {
            systems: 0,
            eigenvalues: 0,
            symplectic: 0.0,
            wronskian: 0.0,
            reflection: 0.0,
            nevanlinna: f64::INFINITY,
            bvp_oracle: 0.0,
            expansion_residual: 0.0,
            parseval: 0.0,
            residue: 0.0,
            tau_jump: 0.0,
            truncation: f64::NEG_INFINITY,
            green_gap: f64::INFINITY,
            im_excess: f64::INFINITY,
            imag_part: 0.0,
            mult_mismatch: 0,
            count_violations: 0,
        }
    }
}

pub fn random_complex(rng: &mut ChaCha8Rng, re: f64, im: f64) -> Complex64 {
    c64(rng.random_range(-re..re), rng.random_range(-im..im))
}

pub fn random_forcing(rng: &mut ChaCha8Rng, sys: &SymplecticSystem) -> VectorSequence {
    VectorSequence::from_fn(sys.sequence_len(), |_| {
        CMatrix::from_fn(2 * sys.n(), 1, |_, _| random_complex(rng, 1.0, 1.0))
    })
    .unwrap()
}

fn nonreal(rng: &mut ChaCha8Rng) -> Complex64 {
    let mut l = random_complex(rng, 2.0, 2.0);
    if l.im.abs() < 0.2 {
        l.im += 0.5f64.copysign(l.im);
    }
    l
}

/// Instances `n ∈ {1, 2, 3}`, `N ∈ {0, …, 8}` from a fixed seed.
pub fn instances(seed: u64, count: usize) -> Vec<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=3);
            let horizon = rng.random_range(0..=8);
            random_atkinson_instance(&mut rng, n, horizon)
        })
        .collect()
}

/// Eigenvalue facts only (criterion on multiplicities and realness).
pub fn measure_spectrum(inst: &RandomInstance, worst: &mut Worst) -> Spectrum {
    let sys = &inst.system;
    let spec = eigenvalues(sys, &inst.alpha, &inst.beta, EIG_TOL).expect("eigenvalues");
    worst.systems += 1;
    worst.eigenvalues += spec.eigenvalues.len();
    for e in &spec.eigenvalues {
        worst.imag_part = worst.imag_part.max(e.lambda.im.abs());
        if e.alg_mult != e.geom_mult {
            worst.mult_mismatch += 1;
        }
    }
    let rank_sum: usize = sys.psi_all().iter().map(|p| numerical_rank(p, RANK_TOL)).sum();
    if spec.total_geom() > rank_sum.min(sys.n() * (sys.horizon() + 1)) {
        worst.count_violations += 1;
    }
    spec
}

/// Every property of the random suite for one instance.
pub fn measure_all(inst: &RandomInstance, rng: &mut ChaCha8Rng, worst: &mut Worst) {
    let sys = &inst.system;
    let (alpha, beta) = (&inst.alpha, &inst.beta);
    let n = sys.n();
    let j = sys.j();
    let spec = measure_spectrum(inst, worst);

    let lambda = nonreal(rng);
    for k in 0..=sys.horizon() {
        let a = transition(sys, k, lambda).unwrap();
        let b = transition(sys, k, lambda.conj()).unwrap();
        let scale = 1.0 + max_abs(&a) * max_abs(&b);
        worst.symplectic = worst.symplectic.max(max_abs(&(b.adjoint() * &j * &a - &j)) / scale);
    }
    let here = fundamental_solutions(sys, alpha, lambda).unwrap();
    let there = fundamental_solutions(sys, alpha, lambda.conj()).unwrap();
    for k in 0..sys.sequence_len() {
        let scale = 1.0 + max_abs(&here.phi(k)) * max_abs(&there.phi(k));
        worst.wronskian = worst.wronskian.max(max_abs(&(wronskian(sys, &here, &there, k) - &j)) / scale);
    }

    for _ in 0..3 {
        let l = nonreal(rng);
        let m = m_function(sys, alpha, beta, l).unwrap().m;
        let mc = m_function(sys, alpha, beta, l.conj()).unwrap().m;
        let scale = 1.0 + max_abs(&m);
        worst.reflection = worst.reflection.max(max_abs(&(mc - m.adjoint())) / scale);
        let im = imaginary_part(&m).scale(l.im.signum());
        worst.nevanlinna = worst.nevanlinna.min(min_hermitian_eigenvalue(&im) / scale);
    }

    let f = random_forcing(rng, sys);
    let xi = CMatrix::from_fn(n, 1, |_, _| random_complex(rng, 1.0, 1.0));
    let closed = solve_bvp_closed_form(sys, alpha, beta, lambda, &f, Some(&xi)).unwrap();
    let kernel = solve_bvp_kernel(sys, alpha, beta, lambda, &f, Some(&xi)).unwrap();
    let dense = solve_bvp_dense_oracle(sys, alpha, beta, lambda, &f, Some(&xi)).unwrap();
    let scale = 1.0 + closed.z.max_abs();
    worst.bvp_oracle = worst
        .bvp_oracle
        .max(closed.z.sub(&kernel.z).max_abs() / scale)
        .max(closed.z.sub(&dense.z).max_abs() / scale);

    let set: OrthonormalEigenSet = orthonormal_eigen_set_from(sys, alpha, beta, &spec.eigenvalues).expect("eigen set");
    let tau = SpectralStepFunction::from_set(n, &set);
    for t in set.eigenvalues() {
        let res = m_residue(sys, alpha, beta, &set, t).unwrap();
        worst.residue = worst.residue.max(res.relative_gap);
        let jump = hermitian_part(&(tau.tau_at(t) - tau.tau_left(t)));
        worst.tau_jump = worst.tau_jump.max(max_abs(&(jump + &res.l_minus1)));
    }

    // A solution of the problem at λ = 0 from the dense oracle (which also
    // covers λ = 0 being an eigenvalue after projecting f).
    let f0 = random_forcing(rng, sys);
    let d: Vec<Complex64> = set
        .entries
        .iter()
        .map(|e| semi_inner_matrix(sys, &e.eigenfunction, &f0).unwrap()[(0, 0)])
        .collect();
    let mut f0 = f0;
    for (e, dj) in set.entries.iter().zip(&d) {
        if e.lambda.abs() <= 1e-9 {
            f0 = f0.sub(&e.eigenfunction.scale(*dj));
        }
    }
    let zhat = solve_bvp_dense_oracle(sys, alpha, beta, c64(0.0, 0.0), &f0, None).unwrap().z;
    let exp = expand_with(sys, alpha, beta, &set, &zhat, &f0).expect("expansion");
    worst.expansion_residual = worst.expansion_residual.max(exp.residual_seminorm / (1.0 + exp.norm_sq.sqrt()));
    worst.parseval = worst.parseval.max(exp.parseval_gap / (1.0 + exp.norm_sq));
    let mut levels: Vec<f64> = set.eigenvalues().iter().map(|t| t.abs()).collect();
    levels.push(0.5);
    for a in levels.iter().map(|&t| t * 1.5 + 0.1) {
        let (lhs, rhs) = truncation_bound_with(sys, alpha, beta, &set, &zhat, &f0, a).unwrap();
        worst.truncation = worst.truncation.max((lhs - rhs) / (1.0 + exp.norm_sq));
    }

    let kern = green_kernel(sys, alpha, beta, lambda).unwrap();
    for k in 0..sys.sequence_len() {
        let gap = green_bound_gap(sys, alpha, beta, &set, lambda, k).unwrap();
        let mut total = CMatrix::zeros(2 * n, 2 * n);
        for (s, psi) in sys.psi_all().iter().enumerate() {
            let g = kern.entry(k, s).unwrap();
            total += &g * psi * g.adjoint();
        }
        worst.green_gap = worst.green_gap.min(min_hermitian_eigenvalue(&gap) / (1.0 + max_abs(&total)));
    }

    let m = m_function(sys, alpha, beta, lambda).unwrap().m;
    let ex = im_excess_min_eig(sys, alpha, beta, &tau, lambda).unwrap();
    worst.im_excess = worst.im_excess.min(ex / (1.0 + max_abs(&m) / lambda.im.abs()));
}
