pub mod bspline1d;
pub mod error;
pub mod grid;
pub mod obsmodels;
pub mod shear;
pub mod sparse;
pub mod reconstruct;
pub mod synth;
pub mod bench;
pub mod io;
pub mod cli;
