//! Numerical verification lab for Ornstein-Uhlenbeck resolvent gradient
//! contractivity on Gaussian-convex domains.

pub mod app;
pub mod config;
pub mod contract;
pub mod domain;
pub mod error;
pub mod feynman_kac;
pub mod gauss;
pub mod grid;
pub mod report;
pub mod rng;
pub mod solver;
pub mod suites;
pub mod wiener;

pub use error::{Error, Result};
