//! Numerical laboratory for planar cubic neutral saddles.
//!
//! Passage times and exit heights through the saddle, the closed-form
//! asymptotics they obey, time integrals of homogeneous observables along
//! passages, and Monte Carlo experiments on return-time tails and the
//! resulting limit laws.

pub mod dulac_analysis;
pub mod error;
pub mod fit;
pub mod flow_integrator;
pub mod observable_integrals;
pub mod quadrature;
pub mod saddle_model;
pub mod statistics;

mod rk;

pub use error::{Error, Result};
