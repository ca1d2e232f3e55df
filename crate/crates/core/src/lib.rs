//! Topic-wise multi-modal feature building and depression-score regression
//! for structured clinical interviews.

pub mod corpus;
pub mod eval;
pub mod exec;
pub mod features;
pub mod matrix;
pub mod model;
pub mod seed;
pub mod select;
pub mod synth;
pub mod topic;
