//! Free Dirac evolution of Gaussian spinor packets in one space dimension,
//! stationary-phase approximations of the evolved spinor, and Bohmian
//! trajectories guided by either.
//!
//! Module map:
//!
//! * [`specfun`]: `J0`, `J1` and the first zero of `J0`.
//! * [`quadrature`]: adaptive Gauss-Kronrod integration of real, complex and spinor valued integrands.
//! * [`packets`]: initial data, Cayley-Klein angles, Bloch vectors and operator expectations.
//! * [`dirac_exact`]: the evolved spinor by quadrature of the Bessel-kernel solution.
//! * [`spa`]: stationary-phase approximations and their error scaling.
//! * [`ode`]: Dormand-Prince 5(4) stepping with dense output.
//! * [`trajectories`]: guiding-equation integration, ensembles and barrier analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dirac_exact;
pub mod error;
pub mod ode;
pub mod packets;
pub mod quadrature;
pub mod spa;
pub mod specfun;
pub mod trajectories;

pub use error::{Error, Result};
pub use packets::{CayleyKlein, PacketParams, Spinor};
pub use quadrature::QuadConfig;
