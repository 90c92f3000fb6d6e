//! Discrete harmonic functions on the lattice `(hZ)^n`.
//!
//! The crate is organised around the cube `Q_1^h = [-1, 1]^n ∩ (hZ)^n` with
//! `h = 1/N`. Lattice points are stored as integer index vectors; the
//! physical coordinate of index `i` is `i * h`.
//!
//! * [`lattice`]: boxes, grid functions, the five-point (2n+1-point) stencil.
//! * [`oracle`]: direct Dirichlet solver, layer-wise extension, growth fits.
//! * [`kernel`]: the explicit discrete Poisson kernel of the cube.
//! * [`interp`]: Chebyshev and grid-constrained nodes, Lagrange weights.
//! * [`threecubes`]: three-cubes constants, bounds and the sampling harness.
//! * [`polyext`]: exact extension of cube data by discrete harmonic polynomials.
//! * [`io`]: file formats for boundary data, cube data and polynomials.

pub mod error;
pub mod interp;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod oracle;
pub mod polyext;
pub mod sum;
pub mod threecubes;

pub use error::{Error, Result};
pub use lattice::{BoundaryData, BoundaryMode, GridBox, GridFunction, GridPoint, LatticeSpec};
