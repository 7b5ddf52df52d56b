pub mod detector;
pub mod filters;
pub mod model;
pub mod spectral;
pub mod stats;
pub mod synth;
