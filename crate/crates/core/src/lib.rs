//! Numerical laboratory for weighted Calderón–Hardy theory.
//!
//! The crate implements, at desk scale, the operators that connect weighted
//! Hardy spaces H^p(ℝⁿ, w) to the Calderón–Hardy spaces 𝓗^p_{q,γ}(ℝⁿ, w):
//! Muckenhoupt weights with their critical indices, four maximal operators
//! (Hardy–Littlewood, smooth, grand, and the quotient maximal N_{q,γ}),
//! w-(p, p₀, d) atoms, fundamental solutions of the iterated Laplacian Δ^m
//! and their atom potentials, and the constructive solver for Δ^m F = f
//! together with the inequalities that make it a bijection on power weights.
//!
//! All operations are pure functions of their inputs; parallel loops reduce
//! in fixed order, so results are independent of thread count.

// negated comparisons are deliberate: `!(x >= a)` rejects NaN where `x < a`
// would accept it; flat-indexed loops mirror the dense-matrix layout
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

pub mod atoms;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod kernel;
pub mod maximal;
pub mod minimax;
pub mod poly;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{Cube, Grid, GridFunction, Point, RadiusLadder};
pub use weights::Weight;
