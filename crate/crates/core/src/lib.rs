//! Higher-order averages of non-convergent Birkhoff sums.
//!
//! The crate streams partial means of bounded observables through Hölder and
//! Cesàro cascades, detects the slow oscillations that make them diverge,
//! classifies historical orbits as type B1 (the nested limit sets of all orders
//! shrink to a point) or B2 (they keep a non-trivial interval), simulates the
//! heteroclinic-cycle return maps that produce both behaviours, and counts
//! cylinders of symbol sequences whose block averages alternate.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision choice.

pub mod bowen;
pub mod classify;
pub mod entropy;
pub mod error;
pub mod means;
pub mod oscillation;
pub mod scalar;
pub mod sequences;
pub mod stream;

pub use error::{Error, Result};
pub use scalar::{KahanSum, Scalar};
pub use stream::ObservableStream;

pub type MeanCascade64 = means::MeanCascade<f64>;
pub type MeanCascade32 = means::MeanCascade<f32>;
pub type CesaroCascade64 = means::CesaroCascade<f64>;
pub type CesaroCascade32 = means::CesaroCascade<f32>;
pub type LevelHistory64 = means::LevelHistory<f64>;
pub type Analysis64 = means::Analysis<f64>;
pub type IntervalTower64 = means::IntervalTower<f64>;
pub type LimitSetEstimate64 = means::LimitSetEstimate<f64>;
pub type OscillationProfile64 = oscillation::OscillationProfile<f64>;
pub type CrossingProfile64 = oscillation::CrossingProfile<f64>;
pub type Verdict64 = classify::Verdict<f64>;
pub type ClassifierConfig64 = classify::ClassifierConfig<f64>;
