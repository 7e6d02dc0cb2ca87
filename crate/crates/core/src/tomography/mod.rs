//! Density-matrix reconstruction from window-integrated correlations.

pub mod pair;
pub mod single;
