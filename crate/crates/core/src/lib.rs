//! Numerical parallel transport for matrix Lie group connections: path-ordered
//! exponentials, descent data over covers, holonomies and Wilson lines.

pub mod connection;
pub mod descent;
pub mod error;
pub mod geometry;
pub mod holonomy;
pub mod lie;
pub mod presets;
pub mod solver;

pub use error::{Error, Result};

pub type GroupElement = lie::GroupElement<f64>;
pub type AlgebraElement = lie::AlgebraElement<f64>;
pub type GroupElementF32 = lie::GroupElement<f32>;
pub type AlgebraElementF32 = lie::AlgebraElement<f32>;
