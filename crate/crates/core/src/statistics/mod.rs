//! Monte Carlo statistics of returns to the saddle: entry sampling, return
//! time tails, and limit laws of Birkhoff sums.

pub mod ks;
pub mod renewal;
pub mod sampling;
pub mod tail;

pub use ks::{ks_normal, ks_test, kolmogorov_p_value, KsResult};
pub use renewal::{
    birkhoff_experiment, birkhoff_sums, birkhoff_with_table, BirkhoffConfig, LimitLawReport, LimitRegime, ReturnTable, MODEL_LABEL, RNG_NAME,
};
pub use sampling::{expected_tail_constant, sample_entry, tau_samples, Entry, ReturnConfig, ReturnSample, TauSampleSet};
pub use tail::{stable_index, tail_fit, StableIndexEstimate, TailEstimate, TailFitConfig, TailMethod};
