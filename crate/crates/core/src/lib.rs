//! Finite-element simulation of a soft pneumatic arm with cavity-pressure control.

pub mod actuation;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod materials;
pub mod mesh;
pub mod scene;
pub mod sparse;

pub use error::{Error, Result};
