//! Numerical potential theory for compact sets carried along backward orbits
//! of holomorphic semigroups.
//!
//! Every semigroup is modelled through its Koenigs domain `Ω`, where the flow
//! is translation: the backward orbit of a compact set `K` at time `t ≤ 0` is
//! studied as `K` inside the shifted domain `Ω − t`. All quantities are
//! computed in that planar frame:
//!
//! - [`oracles`]: closed forms for the disk, half-planes and strips.
//! - [`wos`]: walk-on-spheres estimators of harmonic measure, Green function,
//!   hyperbolic density and distance.
//! - [`hypgeom`]: hyperbolic area and the quasi-hyperbolic bounds.
//! - [`fekete`]: Euclidean and hyperbolic n-th diameters, hyperbolic capacity.
//! - [`energy`]: Green equilibrium measures and condenser capacity.
//! - [`experiments`]: flow-time sweeps and theorem checks; [`report`] writes
//!   CSV/JSON/SVG.
//!
//! The numerical core is generic over [`Real`]; `f64` aliases are provided
//! below and are what the experiment layer uses.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compacts;
pub mod domains;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fekete;
pub mod hypgeom;
pub mod kernel;
pub mod oracles;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod wos;

pub use error::{Error, Result};
pub use scalar::{pt, shift, Real};

/// A point of the complex plane.
pub type Point<T> = num_complex::Complex<T>;

pub type Point64 = Point<f64>;
pub type Domain64 = domains::KoenigsDomain<f64>;
pub type Petal64 = domains::Petal<f64>;
pub type Compact64 = compacts::CompactSet<f64>;
pub type Estimate64 = wos::Estimate<f64>;
pub type ClosedForm64 = oracles::ClosedForm<f64>;
pub type FeketeResult64 = fekete::FeketeResult<f64>;
pub type Equilibrium64 = energy::EquilibriumResult<f64>;
pub type AreaResult64 = hypgeom::AreaResult<f64>;

pub type Point32 = Point<f32>;
pub type Domain32 = domains::KoenigsDomain<f32>;
pub type Compact32 = compacts::CompactSet<f32>;
pub type Estimate32 = wos::Estimate<f32>;
