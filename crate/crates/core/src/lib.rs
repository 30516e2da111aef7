//! Uniform perfectness of compact sets and the conformal capacity of condensers.
//!
//! The crate is split along the lines of the computation:
//!
//! * [`geom`] – points, balls, annuli, chordal distance.
//! * [`specfun`] – sphere constants, Γ/Beta, elliptic integrals, the
//!   Teichmüller function and its logarithmic lower bound.
//! * [`sets`] – Cantor-type generators, the uniform-perfectness estimator and a
//!   dyadic Hausdorff-content estimate.
//! * [`bounds`] – closed-form lower bounds for dimension, content and capacity.
//! * [`mask`] / [`whitney`] – raster domains and their Whitney decomposition.
//! * [`capacity2d`] – a planar condenser-capacity solver.
//! * [`metrics`] – distance-ratio and quasihyperbolic metrics.
//! * [`testfn`] – the capacity test function and the Whitney-cube characterization.

pub mod bounds;
pub mod capacity2d;
pub mod error;
pub mod geom;
pub mod mask;
pub mod metrics;
pub mod sets;
pub mod specfun;
pub mod testfn;
pub mod whitney;

pub use error::{Error, Result};
