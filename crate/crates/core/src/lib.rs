//! Pure-state density-matrix reconstruction from `N` mean measurements by
//! pairwise maximal entropy.

pub mod exec;
pub mod maxent_pair;
pub mod qmath;
pub mod reconstruct;
mod roots;
pub mod simulate;

pub use exec::Execution;
