pub mod coeffs;
pub mod config;
pub mod dataset;
pub mod error;
pub mod hydro;
pub mod identify;
pub mod lsq;
pub mod shapley;
pub mod sim;
