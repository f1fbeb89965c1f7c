pub mod analysis;
pub mod dataio;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod ib_solver;
pub mod infotheory;
pub mod metrics;
pub mod network;
pub mod quantizer;
pub mod rng;
