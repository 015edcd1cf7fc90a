//! Energy-aware placement of microservice DAGs across container registries
//! and edge devices.

pub mod bench;
pub mod cost;
pub mod game;
pub mod model;
