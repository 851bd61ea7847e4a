//! Numerical laboratory for positive radial solutions of
//!
//! ```text
//!     u'' + (n-1)/r u' + f(u) = 0,   a < r < b,   u(a) = u(b) = 0,
//! ```
//!
//! with `b` finite (annulus) or infinite (exterior domain), for nonlinearities
//! of the form `f(s) = s^p + s^q`, `f(s) = s^p - s^q`, or user-supplied
//! evaluators.
//!
//! The crate has three layers:
//!
//! * trajectory machinery — an adaptive Dormand–Prince integrator with dense
//!   output and event location ([`ode`]), driven by a shooting layer that
//!   brackets boundary residuals or crossing/bouncing transitions
//!   ([`shooting`]);
//! * comparison diagnostics — inversion of a profile into its rising and
//!   falling branches and evaluation of the weighted-energy and Pohozaev-type
//!   functionals whose ordering underlies uniqueness arguments for this
//!   equation ([`functionals`]);
//! * closed-form parameter regions — classification of `(n, p, q)` against the
//!   explicit uniqueness conditions for the two power families ([`regions`]).
//!
//! The `annulus` binary exposes all of it behind a CLI with deterministic CSV
//! and JSON outputs.

pub mod cli;
pub mod error;
pub mod functionals;
pub mod interp;
pub mod nonlinearity;
pub mod ode;
pub mod regions;
pub mod rootfind;
pub mod shooting;

mod dopri5;

pub use error::{Error, Result};
pub use nonlinearity::{Landmarks, NonlinearitySpec};
pub use ode::{IntegratorControls, RadialProblem, SolutionProfile, Termination};
