pub mod active_set;
pub mod domain;
pub mod engine;
pub mod engine_cuberoot;
pub mod engine_multi;
pub mod engine_sqrt;
pub mod engine_two;
pub mod forest;
pub mod harness;
pub mod index;
pub mod mode_engines;
pub mod oracle;
pub mod part_universe;
pub mod partition;
pub mod reduction;
pub mod tour;
pub mod workload;
