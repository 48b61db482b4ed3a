//! Configuration ingestion, scenario orchestration, parallel multi-instance
//! execution, and persistence.

pub mod config;
pub mod export;
pub mod runner;
