//! PPT symmetric-extension separability hierarchy, solved as semidefinite
//! programs, with witness extraction, decomposability analysis and a
//! positive-map toolkit.

pub mod error;
pub mod qlinalg;
pub mod sdp;
pub mod hierarchy;
pub mod witness;
pub mod states;
pub mod decomp;
pub mod posmap;
pub mod io;

pub use error::{Error, Result};
