//! Shared inputs for the kernel benchmarks.

use kamred::kam::{MelnikovParams, NormalForm};
use kamred::suites::{random_hamiltonian, random_normal_form, rng};
use kamred::{BlockLayout, BlockOperator};

/// Random Hamiltonian perturbation and small normal form on the two-sphere.
pub struct Fixture {
    pub m: BlockOperator,
    pub nf: NormalForm,
    pub omega: Vec<f64>,
    pub params: MelnikovParams,
}

pub fn fixture(k_max: usize, l_max: usize) -> Fixture {
    let layout = BlockLayout::new(2, k_max).expect("valid layout");
    let mut r = rng(7);
    let params = MelnikovParams {
        gamma: 0.05,
        tau: 19.5,
        tau0: 2.0,
        beta: 0.5,
    };
    Fixture {
        m: random_hamiltonian(&layout, 2, l_max, 1e-3, &mut r),
        nf: random_normal_form(&layout, params.beta, 1e-3, &mut r).expect("normal form"),
        omega: vec![0.757967, 1.422353],
        params,
    }
}
