//! Local measures and mass distribution for limsup sets of balls in
//! Ahlfors regular spaces.

pub mod cantortree;
pub mod covering;
pub mod dimfn;
pub mod geometry;
pub mod localmeasure;
pub mod oracle;
pub mod rng;
pub mod sequences;

pub use dimfn::{check_dimension_function, scale_ball, DimensionFunction, FValidity};
pub use geometry::{AhlforsSpace, Ball, Interval, RegionUnion};
pub use sequences::{BallIndex, BallSequence, IndexedBall};
