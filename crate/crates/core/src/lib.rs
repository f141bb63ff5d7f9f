//! Bite-weight estimation from in-ear chewing audio.
//!
//! The pipeline turns annotated chewing bouts into per-chew audio descriptors
//! and per-bout timing features, aggregates the descriptors with a k-means
//! codebook (bag-of-words or VLAD), and regresses bite weight in grams with
//! linear regression, epsilon-SVR, a small feed-forward network or a GRNN.
//! [`harness`] runs the whole grid under leave-one-subject-out evaluation.

pub mod baseline;
pub mod boutfeat;
pub mod chewfeat;
pub mod codebook;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
