//! Exact distributions, simulation, and hitting-time analysis for a family
//! of integer-valued counting processes built from Poisson components.
//!
//! The family, for order `i` and rate `lambda`:
//!
//! - `Y(t)`: the multi-jump process `sum_{j=1}^i j * N_j(t)` over
//!   independent Poisson components, equivalently a compound Poisson process
//!   with uniform jump sizes on `{1, ..., i}`;
//! - `Z(t)`: the weighted variant, component `j` contributing `g(j)`;
//! - `W(t) = Y(H^f(t))`: `Y` run on an independent subordinator with
//!   Bernstein function `f`;
//! - `U(t) = Y(N_beta(t))`: `Y` run on an independent Poisson clock.
//!
//! Modules:
//!
//! - [`params`]: validated parameters, weight tables, and the weighted
//!   integer compositions the exact formulas sum over;
//! - [`exactdist`]: pmfs, generating functions, certified truncated tables,
//!   and the jump-size laws of the embedded chains;
//! - [`subordinators`]: Bernstein functions with derivatives (analytic where
//!   possible, guarded finite differences otherwise) and exact samplers;
//! - [`simulate`]: path and terminal samplers in two representations each,
//!   plus reproducible parallel Monte Carlo plumbing;
//! - [`hitting`]: closed-form hitting probabilities and densities, an
//!   independent renewal recursion on the jump chain, and three-way
//!   comparison reports;
//! - [`stats`]: the chi-square machinery the distributional checks run on.
//!
//! Results that depend on truncation carry certified bounds on what was cut
//! off; sub-probability jump laws keep their missing mass explicit instead
//! of renormalizing it away.

pub mod error;
pub mod exactdist;
pub mod hitting;
pub mod params;
pub mod simulate;
pub mod stats;
pub mod subordinators;

pub use error::{Error, Result};
