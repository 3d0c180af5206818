//! Speed of local quote adjustment to global price moves, and the behavioural
//! bias signatures it carries.

pub mod biaslab;
pub mod econometrics;
pub mod impulse;
pub mod ingest;
pub mod microstructure;
pub mod quotegrid;
pub mod synth;
