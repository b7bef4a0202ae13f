//! Covariant and invariant descriptors of colored point configurations built
//! from products of matrix moments, with a Clebsch-Gordan reference path.

pub mod bench;
pub mod cgnet;
pub mod cgref;
pub mod config;
pub mod distinguish;
pub mod error;
pub mod features;
pub mod fixtures;
pub mod model;
pub mod moments;
pub mod projection;
pub mod radial;
pub mod so3;
pub mod tensors;
pub mod training;

pub use error::{Error, Result};
