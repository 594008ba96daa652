//! Lagrangian solutions of the linearized vorticity transport equation
//! `dY/dt + (u.grad)Y - (Y.grad)u = g` on the periodic channel
//! `(0, Lx) x T^2`, with data entering through the inflow wall `x1 = 0`.
//!
//! The solution is evaluated pointwise by tracing characteristics backward:
//! points whose trajectory reaches `t = 0` inside the channel carry the pushed
//! forward initial data, the rest carry pushed forward inflow data from their
//! entry time and point. Supporting modules check compatibility of the data,
//! predict and measure jumps across the interface between the two regions,
//! reconstruct velocities from vorticity and assemble verification reports.

pub mod compat;
pub mod config;
pub mod curltools;
pub mod diagnostics;
pub mod entry;
pub mod error;
pub mod expr;
pub mod flowmap;
pub mod geometry;
pub mod par;
pub mod quadrature;
pub mod scenario;
pub mod transport;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
