pub mod dataset;
pub mod error;
pub mod interval;
pub mod regress;
pub mod seed;
pub mod conformal;
pub mod individualize;
pub mod dgp;
pub mod config;
pub mod pipeline;
pub mod evaluate;
pub mod runner;
pub mod selftest;
