//! Slow invariant manifolds and reaction-diffusion manifolds for singularly
//! perturbed systems.

pub mod benchmark;
pub mod calculus;
pub mod error;
pub mod export;
pub mod gql;
pub mod linalg;
pub mod manifold;
pub mod mm;
pub mod model;
pub mod pde;
pub mod testsystems;
pub mod validation;

pub use error::{Error, Result};
