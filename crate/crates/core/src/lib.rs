//! Numerical toolkit for the integration-by-parts formulae of Bessel bridges.
//!
//! The deterministic layers ([`specfun`], [`quad`], [`measures`], [`ode`],
//! [`laws`], [`renorm`]) are generic over the scalar type through [`Real`];
//! the stochastic layers ([`sampler`], [`ibpf`], [`spde`]) work in `f64`.
//! Concrete `f64` aliases for the generic types live at the crate root.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ibpf;
pub mod laws;
pub mod measures;
pub mod num;
pub mod ode;
pub mod poly;
pub mod quad;
pub mod report;
pub mod renorm;
pub mod sampler;
pub mod spde;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use num::Real;

pub type FiniteMeasure = measures::FiniteMeasure<f64>;
pub type TestFunctionH = measures::TestFunctionH<f64>;
pub type OdeSolution = ode::OdeSolution<f64>;
pub type ScalarTestFunction = renorm::ScalarTestFunction<f64>;
pub type ExpFunctional = laws::ExpFunctional<f64>;
pub type Dimension = laws::Dimension<f64>;
