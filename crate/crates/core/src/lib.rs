//! Discrete n-harmonic maps to spheres and the extremal metrics they induce.
//!
//! Closed simplicial manifolds with per-cell constant metrics ([`mesh`]) carry
//! circle-valued maps ([`circle`]) and sphere-valued maps ([`sphere`]).
//! Minimizing the conformally invariant energy and rescaling the metric by the
//! map's density ([`conformal`]) yields candidate eigenmaps, whose Laplace
//! spectrum is checked in [`spectrum`].
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circle;
pub mod conformal;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod optim;
pub mod scalar;
pub mod spectrum;
pub mod sphere;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mesh64 = mesh::Mesh<f64>;
pub type MetricField64 = mesh::MetricField<f64>;
pub type CircleClass64 = circle::CircleClass<f64>;
pub type CircleMap64 = circle::CircleMap<f64>;
pub type SphereMap64 = sphere::SphereMap<f64>;
pub type TargetMap64 = conformal::TargetMap<f64>;
pub type ExtremalCandidate64 = conformal::ExtremalCandidate<f64>;
pub type SpectrumResult64 = spectrum::SpectrumResult<f64>;
pub type GapReport64 = spectrum::GapReport<f64>;

pub type Mesh32 = mesh::Mesh<f32>;
pub type MetricField32 = mesh::MetricField<f32>;
