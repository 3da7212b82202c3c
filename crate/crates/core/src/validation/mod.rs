//! Distribution comparison and Markov-chain diagnostics.

mod chog;
mod correlators;
mod diagnostics;
mod photons;
mod stats;
mod table;

pub use chog::{chog_clicks, chog_ratio, logistic, ChogTrace};
pub use correlators::{correlators_empirical, correlators_exact, off_diagonal};
pub use diagnostics::{
    acceptance_burnin, likelihood_burnin, repeat_curve, repeat_probability, thinning_for, AcceptanceBurnin, BurnIn,
    LikelihoodBurnin, ACCEPTANCE_EXCESS, ACCEPTANCE_TAIL, ACCEPTANCE_WINDOW, LIKELIHOOD_TAIL, LIKELIHOOD_TARGET,
    LIKELIHOOD_WINDOW, MIN_THINNING_CHAIN,
};
pub use photons::{ips_photon_number_distribution, photon_number_distribution};
pub use stats::{chi_square_gof, ks_two_sample, linear_fit, TestResult};
pub use table::{click_subsets, compositions, exact_distribution, tvd, DistributionTable, TableKind, MAX_OUTCOMES};
