pub mod catalog;
pub mod cloud;
pub mod metrics;
pub mod model;
pub mod platform;
pub mod scheduler;
pub mod sim;
pub mod workload;
