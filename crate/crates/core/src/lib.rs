pub mod assembly;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod linsolve;
pub mod mesh;
pub mod mms;
pub mod observer;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod timestepping;

pub use error::{Error, Result};
