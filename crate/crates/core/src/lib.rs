//! Green functions, regular parts, Robin functions and boundary traces of the
//! fractional Laplacian `(-Δ)^s` (and of `-Δ`) on balls, together with
//! quadrature-based checks of the Pohozaev-type identities they satisfy.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`]: gamma, beta and incomplete beta, plus the normalisation
//!   constants of the operator, its fundamental solution and the ball Green
//!   function.
//! * [`ball`]: the ball `B_R(0)`, signed distance, normals, sphere rules and
//!   deterministic pairwise summation.
//! * [`kernels`]: closed-form `F_s`, `G_s`, `H_s`, Robin function, boundary
//!   trace `G_s/δ^s` and gradients, and the classical `s = 1` counterparts.
//! * [`nonlocal`]: a principal-value evaluator for `(-Δ)^s` and the bilinear
//!   form `I_s`, independent of the closed forms.
//! * [`verify`]: both sides of each identity with refinement histories.
//! * [`cli`]: run configurations, JSON and CSV reports.

#![allow(clippy::excessive_precision)]

pub mod ball;
pub mod cli;
mod error;
pub mod kernels;
pub mod nonlocal;
pub mod quad;
pub mod special;
pub mod verify;

pub use ball::{pairwise_sum, BallDomain, Point, SphereRule};
pub use error::{Error, Result};
pub use kernels::{FractionalGreen, KernelEval, LocalGreen, Method, Slot};
pub use special::{ConstantSet, FracParams};
pub use verify::{IdentityId, IdentityProblem, IdentityReport};
