//! Optimal stopping boundaries for Brownian motion and the Rost reversed
//! barriers they generate.
//!
//! The crate solves the finite-horizon problem `sup E_x G(B_tau)` with the
//! obstacle `G(x) = 2 * int_0^x (F_nu - F_mu)`, extracts the two monotone
//! stopping boundaries, reverses them in time and checks by Monte Carlo that
//! Brownian motion started from `nu` and stopped at the reversed barrier is
//! distributed as `mu`.
//!
//! Module map:
//!
//! * [`measures`]: atoms plus piecewise-constant densities, support analysis
//!   and validation of the standing assumptions.
//! * [`payoff`]: the exact piecewise-quadratic obstacle and its
//!   infinite-horizon geometry.
//! * [`solver`]: monotone explicit backward induction on a space-time lattice.
//! * [`boundaries`]: boundary extraction, time reversal, generalized inverse
//!   and structural detectors.
//! * [`embed`]: path simulation, embedding verification and killed-density
//!   estimators.
//! * [`oracle`]: exhaustive enumeration of stopping rules on tiny trees.
//! * [`problem`]: JSON problem specs and the end-to-end pipeline used by the
//!   command line front end.

pub mod boundaries;
pub mod embed;
pub mod error;
pub mod extended;
pub mod io;
pub mod measures;
pub mod oracle;
pub mod payoff;
pub mod problem;
pub mod solver;

pub use error::{Error, Result, Side};
pub use extended::Extended;
pub use measures::{ProbabilityMeasure, SupportSummary, ValidationReport};
pub use payoff::PayoffCurve;
