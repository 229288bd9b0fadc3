//! Gate, noise and GKP error analysis for measurement-based computation on
//! continuous-variable cluster states.
//!
//! Quadratures are ordered `(x_1..x_n, p_1..p_n)`, ħ = 1 and the vacuum
//! variance is 1/2. Mode indices are zero-based.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod gates;
pub mod gkp;
pub mod lattice;
pub mod optimizer;
pub mod oracle;
pub(crate) mod matrix_serde;
pub mod reduction;
pub mod symplectic;

pub use error::{Error, Result};

/// `a mod b` in `[0, b)` for `b > 0`. `f64::rem_euclid` needs std.
pub(crate) fn rem_euclid(a: f64, b: f64) -> f64 {
    let r = libm::fmod(a, b);
    if r < 0.0 {
        r + b
    } else {
        r
    }
}

pub use lattice::{
    cz_region_graph, effective_epsilon, single_step_graph, BasisSetting, ComputationGraph, ControlBasis, Lattice,
    LatticeParams,
};
pub use reduction::{chain, noise_factors, reduce, GateResult, Reducer};
pub use symplectic::{check_symplectic, compose, embed, gaussian_unitary, Gaussian, SymplecticMatrix};
