pub mod backends;
pub mod conditioning;
pub mod dataset;
pub mod harness;
pub mod metrics;
pub mod pipeline;
pub mod prompt;
pub mod synthetic;
pub mod tensor;
