pub mod baselines;
pub mod corpus;
pub mod embedding;
pub mod encoder;
pub mod io;
pub mod priming;
pub mod similarity;
pub mod stats;
pub mod tensor;
pub mod vge;
pub mod world;
