pub mod bcd;
pub mod beam_opt;
pub mod config;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod power_dc;
pub mod scenario;
pub mod star_opt;
