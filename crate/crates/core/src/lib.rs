//! KDD Cup 99 intrusion-detection pipeline: streaming record parsing,
//! stratified extraction, six classifiers written from first principles and
//! the usual classification statistics.

pub mod bayes;
pub mod cli;
pub mod dataset;
pub mod evaluate;
pub mod preprocess;
pub mod synth;
pub mod mlp;
pub mod model;
pub mod pipeline;
pub mod trees;
