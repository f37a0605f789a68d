//! Pseudospectral laboratory for the Galerkin-truncated cubic NLS with
//! third-order dispersion on the torus,
//!
//! ```text
//! ∂ₜu = −i(i∂ₓ³ + β∂ₓ²)u − i P_N(|u|²u),
//! ```
//!
//! together with the Gaussian measures `μ_α` (covariance `(1 − ∂ₓ²)^{−α}`) and
//! the Radon–Nikodym density of `μ_α` transported by the flow.
//!
//! Fields are stored as Fourier coefficients under the convention
//! `u(x) = (2π)^{−1/2} Σ_k û(k) e^{ikx}`, so Parseval carries no constants.
//!
//! Module map:
//!
//! * [`fourier`]: [`FourierState`], transforms, norms, projections, multipliers
//!   and the resonance algebra of the phase function.
//! * [`flow`]: integrating-factor Runge–Kutta integration of the truncated system,
//!   forward and backward in time.
//! * [`measures`]: sampling of `μ_α`, cutoffs and relative Gaussian densities.
//! * [`transport`]: the log-weight by quadrature and by the endpoint energy
//!   identity, the nonresonant quadrilinear form, flow Jacobians and the
//!   divergence/orthogonality/transport checks.
//! * [`experiments`]: seeded Monte Carlo campaigns and their CSV/JSON output.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod flow;
pub mod fourier;
pub mod measures;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use flow::{ModelParams, Scheme, Trajectory};
pub use fourier::{FourierState, PhaseTriple};
pub use measures::{MCReport, MeasureSpec};
pub use transport::{JacobianMethod, JacobianReport, WeightResult};

pub use num_complex::Complex64;
