pub mod geometry;
pub mod assignment;
pub mod embedding;
pub mod huber;
pub mod tracker;
pub mod reid;
pub mod postfilter;
pub mod config;
pub mod io;
pub mod eval;
pub mod synth;
pub mod pipeline;
pub mod overlay;
