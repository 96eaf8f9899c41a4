//! Diffusion channel toolkit for molecular communication.
//!
//! The crate provides closed-form first-hitting responses of a fully
//! absorbing spherical receiver in free space, in a half-space bounded by a
//! reflecting plane (method of images) and between two parallel reflecting
//! planes, together with a Brownian-motion particle simulator that serves as
//! the ground truth for those expressions.
//!
//! Geometry, the analytic models and the simulator are generic over the
//! scalar type through [`Real`]; the aliases below fix it to `f64`, which is
//! what the experiment harness and the command-line tool use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;

pub type Vec3 = geometry::Vec3<f64>;
pub type Plane = geometry::Plane<f64>;
pub type Rect = geometry::Rect<f64>;
pub type Reflector = geometry::Reflector<f64>;
pub type AbsorbingSphere = geometry::AbsorbingSphere<f64>;
pub type ImageSet = geometry::ImageSet<f64>;

pub type Diffusion = analytic::Diffusion<f64>;
pub type SisoParams = analytic::SisoParams<f64>;
pub type SimoPairParams = analytic::SimoPairParams<f64>;
pub type HalfSpaceParams = analytic::HalfSpaceParams<f64>;
pub type TwoPlaneParams = analytic::TwoPlaneParams<f64>;
pub type ChannelModel = analytic::ChannelModel<f64>;

pub type Environment = montecarlo::Environment<f64>;
pub use montecarlo::{HitHistogram, SimConfig};

pub type Vec3f32 = geometry::Vec3<f32>;
pub type ChannelModelF32 = analytic::ChannelModel<f32>;
