//! Qualitative numerical planning toolkit.
//!
//! Models with boolean atoms and non-negative numeric variables that are only
//! observed as `X=0` / `X>0` and changed by qualitative increments or
//! decrements. The crate parses and validates such models, translates them to
//! FOND problems whose strong-cyclic solutions solve the original, maps FOND
//! problems back, checks policies for termination and simulates them.

pub mod model;
pub mod io;
pub mod direct;
pub mod sieve;
pub mod solver;
pub mod qnp2fond;
pub mod fond2qnp;
pub mod gen;
pub mod sim;
pub mod cli;
pub mod fixtures;
