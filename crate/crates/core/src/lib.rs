//! Exact enumeration, Metropolis sampling and large-deviation numerics for
//! random walks carrying i.i.d. charges, with energy H_N = Σ_x (Q^x)².

pub mod charges;
pub mod checks;
pub mod error;
pub mod exact;
pub mod field;
pub mod lattice;
pub mod mcmc;
pub mod pulling;
pub mod rate;
pub mod spec;
pub mod stats;
pub mod structure;

pub use charges::{charge_moments, sample_charges, ChargeLaw, ChargeMoments, ChargeVector, Sign};
pub use error::{PolyqError, Result};
pub use field::{occupation, parity_sign_sums, OccupationField, ParitySignSums};
pub use lattice::{Parity, Site, Step, Walk};
pub use spec::GibbsSpec;
pub use stats::Estimate;
