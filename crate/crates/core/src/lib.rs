pub mod corpus;
pub mod ensemble;
pub mod evaluation;
pub mod experiment;
pub mod instances;
pub mod manifest;
pub mod modeling;
pub mod splits;
pub mod synthgen;
