pub mod criteria;
pub mod data;
pub mod error;
pub mod model;
pub mod optim;
pub mod seed;
pub mod trainer;
pub mod selector;
pub mod simlab;
pub mod report;
pub mod cli;
