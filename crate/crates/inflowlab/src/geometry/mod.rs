//! Channel geometry, grids, interpolation, differential operators and field
//! providers.

pub mod domain;
pub mod dump;
pub mod grid;
pub mod holder;
pub mod interp;
pub mod ops;
pub mod provider;
pub mod spectral;

pub use domain::{ChannelDomain, Side};
pub use dump::{Dump, DumpHeader};
pub use grid::{BoundaryGrid, BoundaryVectorField, GridVectorField, ScalarGrid};
pub use holder::{holder_seminorm, holder_seminorm_spacetime};
pub use interp::interpolate;
pub use ops::{curl, divergence, surface_divergence, DiffOps};
pub use provider::{
    BoundaryField, ExprField, FieldProvider, Flavor, GriddedField, HigherDerivatives, SharedField,
    Shifted, ZeroField,
};
pub use spectral::Stencil;
