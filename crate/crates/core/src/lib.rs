//! Lifted (non-reversible) MCMC samplers for probability mass functions on
//! partially ordered discrete state-spaces.
//!
//! The state-space is the hypercube `{-1,+1}^n` ordered by the number of `+1`
//! components. A direction variable `nu` restricts proposals to one-flip
//! neighbours that move up (`nu = +1`) or down (`nu = -1`) in that order; the
//! direction is flipped on rejection, which breaks reversibility and produces
//! persistent sweeps through the space.
//!
//! The crate provides:
//! - the lifted samplers together with their reversible baselines
//!   ([`samplers`]),
//! - uniform and locally-balanced (informed) proposal kernels ([`proposals`]),
//! - concrete targets: 2-D Ising model, marginalized Bayesian variable
//!   selection, and tabular fixtures ([`targets`]),
//! - a lifted trans-dimensional sampler with per-model continuous parameters
//!   ([`transdim`]),
//! - brute-force validation machinery for small spaces: exact kernel matrices,
//!   stationarity checks, and asymptotic variances via the Poisson equation
//!   ([`oracle`]),
//! - run statistics: effective sample size, acceptance and direction-flip
//!   rates ([`diagnostics`]),
//! - an incremental fast path for large Ising lattices ([`fastpath`]).

pub mod diagnostics;
pub mod fastpath;
pub mod oracle;
pub mod poset;
pub mod proposals;
pub mod samplers;
pub mod targets;
pub mod transdim;

pub use poset::{BinaryState, Direction, LiftedChainState};
pub use proposals::{BalancingFunction, ProposalSpec};
pub use samplers::{RhoPolicy, SamplerKind};
pub use targets::TargetModel;
