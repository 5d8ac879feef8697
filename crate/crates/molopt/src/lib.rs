pub mod chem;
pub mod config;
pub mod fixtures;
pub mod model;
pub mod pairs;
pub mod pipeline;
pub mod props;
pub mod tensor;
