pub mod archive;
pub mod assets;
pub mod budget;
pub mod config;
pub mod cascade;
pub mod llm;
pub mod model;
pub mod problems;
pub mod report;
pub mod sandbox;
pub mod search;
pub mod stats;
pub mod verifiers;
