//! Sum-rate analysis and optimization for a self-backhauling full-duplex
//! access node with large antenna arrays serving half-duplex users.
//!
//! * [`params`]: cell parameters, power allocations, structural validation.
//! * [`rates`]: closed-form SINRs and rates for the full-duplex, half-duplex
//!   and hybrid relay schemes.
//! * [`constraints`]: backhaul, power, rate-ratio and time-split constraints.
//! * [`optimizer`]: multi-start constrained maximization and the max-power
//!   baseline.
//! * [`zf`]: Monte-Carlo checks of the zero-forcing precoder and the
//!   large-array SINR approximations.
//! * [`experiment`]: parameter sweeps and CSV output.

pub mod config;
pub mod constraints;
pub mod error;
pub mod experiment;
pub mod optimizer;
pub mod params;
pub mod rates;
pub mod zf;

pub use constraints::{constraints, ConstraintLabel, ConstraintReport};
pub use error::{Error, Result};
pub use optimizer::{baseline, optimize, Baseline, OptResult, OptimizerOptions};
pub use params::{params_from_db, validate, PowerAllocation, Scheme, SystemParams, Violation};
pub use rates::{rates, sinr_set, RateBreakdown, SinrSet};
