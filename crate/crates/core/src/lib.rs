//! Gaussian recombining split trees.
//!
//! A binomial tree with branch probability 1/2 whose layers match a schedule
//! of Gaussian marginals exactly in mean and variance. Mixtures of such trees
//! are fitted to intraday data and priced by backward induction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod lattice;
pub mod marginal;
pub mod pricer;
pub mod split;

pub use error::{GrstError, Result};
pub use lattice::{
    build_grst0, grst0_step_moves, layer_moments, layer_pmf, nn_lattice_distance, DiscretePmf,
    GaussianSpec, RecombiningTree, StepMoves, STEP_PROB,
};
pub use pricer::{
    payoff, price_claim, price_mixture, price_tree, ExerciseStyle, OptionContract, OptionKind,
    PricingResult,
};
pub use split::{
    affine_params, augment_lattices, build_grst1, build_grst_n, build_mixture, extend_lattice,
    extend_tree, lattice_flow, map_lattice, reduce_to_split_segment, schedule_residuals,
    AffineParams, GrstMixture, LatticeFlow, MarginalSchedule, SplitSegment,
};
