pub mod fixtures;
pub mod gateway;
pub mod harness;
pub mod memory;
pub mod metrics;
pub mod planning;
pub mod prompts;
pub mod report;
pub mod runner;
pub mod tools;
