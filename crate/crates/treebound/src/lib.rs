//! Tight upper and lower bounds on `P(sum of n dependent Bernoulli variables >= k)`
//! when the univariate marginals and the pairwise joint probabilities on the edges
//! of a tree are known.
//!
//! The central objects are:
//!
//! * [`tree::TreeModel`] — a rooted tree with per-node marginals `p_i` and
//!   per-edge joints `p_ij = P(c_i = 1, c_j = 1)`.
//! * [`bounds::upper_bound`] / [`bounds::lower_bound`] — the tight bounds
//!   `U(k)` and `L(k)` over every joint distribution consistent with the tree
//!   data, computed by a polynomial-size linear program with a verifiable dual
//!   certificate.
//! * [`ci::ci_tail`] — the tail probability under the conditionally
//!   independent tree-graphical-model distribution, for comparison.
//! * [`oracle`] — exponential-size exact references (a `2^n`-variable linear
//!   program and brute-force enumerations) used to cross-check everything at
//!   small scale.
//! * [`orderstats`] — pointwise bands for order-statistic CDFs
//!   `P(X_{k:n} <= x)` built by thresholding marginal/bivariate CDFs.
//!
//! Batch entry points (bound tables, grid sweeps, experiment batches) run on
//! rayon when the `parallel` feature (default) is enabled and fall back to
//! plain loops otherwise.

pub mod bounds;
pub mod ci;
pub mod gen;
pub mod knapsack;
pub mod lp;
pub mod oracle;
pub mod orderstats;
pub(crate) mod par;
pub mod tree;

pub use bounds::{BoundResult, Direction, DualCertificate};
pub use tree::{ConsistencyReport, TreeError, TreeModel};
