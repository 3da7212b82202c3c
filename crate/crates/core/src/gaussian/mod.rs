//! Gaussian states with ħ = 2: the vacuum has identity covariance and the
//! quadratures are ordered `(q_1..q_M, p_1..p_M)`.

mod complex;
mod experiment;
mod pure;
mod state;
mod williamson;

pub use complex::{factorial_product, log_vacuum_prob, pure_loops, real_probability, ComplexStateRep};
pub use experiment::{
    build_experiment_state, haar_random_unitary, thermal_adversary_state, Detector, ExperimentConfig,
    UnitarySpec,
};
pub use pure::PureFamily;
pub use state::{check_unitary, omega, squeeze, tmsv, unitary_symplectic, GaussianState, HBAR};
pub use williamson::{williamson_decompose, WilliamsonDecomposition, NOISE_RANK_TOL};

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::lhaf::ReducedMatrix;

/// The reduced problem for `pattern`: the half-size `B_n` with `γ'` loops for
/// pure states, the doubled `A_n` with `γ` loops otherwise. `beta` shifts the
/// displacement and only applies to pure states.
pub fn build_reduced_matrix(rep: &ComplexStateRep, pattern: &[usize], beta: Option<&[C64]>) -> Result<ReducedMatrix> {
    if rep.is_pure() {
        rep.pure_reduced(pattern, beta)
    } else if beta.is_some() {
        crate::error::invalid("a coherent shift needs a pure state")
    } else {
        rep.mixed_reduced(pattern)
    }
}
