//! Weak isomorphisms between products of CM elliptic curves.
//!
//! Curves are complex tori `C/L` with `L` a lattice in an imaginary
//! quadratic field, so every isogeny, endomorphism ring and isomorphism
//! class is computed exactly from lattice data.

pub mod analytic;
pub mod arith;
pub mod cm_curves;
pub mod error;
pub mod pair_generator;
pub mod products;
pub mod psi_map;
pub mod qexp;
pub mod quad_orders;
pub mod torsor;
pub mod wire;

pub use error::{Error, Result};
