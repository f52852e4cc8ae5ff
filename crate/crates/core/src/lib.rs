pub mod aggregation;
pub mod dense;
pub mod error;
pub mod graph;
pub mod layers;
pub mod sparse;
pub mod model;
pub mod data;
pub mod train;
pub mod cli;
