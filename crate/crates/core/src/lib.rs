//! Numerical laboratory for nonlinear dislocation waves.
//!
//! The library integrates a mixed FPU/Frenkel-Kontorova chain and its
//! continuum limit — the mixed potential-KdV/sine-Gordon field equation
//!
//! ```text
//! u_{xt} + α u_x u_{xx} + 3β u_x² u_{xx} + γ u_{xxxx} = δ sin u
//! ```
//!
//! whose integrable sector (α = 0, γ = 2β) carries a zero-curvature
//! representation.  On top of the integrators it provides:
//!
//! * closed-form one-soliton (kink) solutions and a Bäcklund/Riccati
//!   solution generator ([`solutions`]),
//! * the conserved-density tower generated by the spectral recurrence and
//!   the continuity-law residuals that certify it ([`charges`]),
//! * quasi-integrable deformations (power, source-replacement, shift) with
//!   anomaly accounting ([`qideform`]),
//! * the order-0 diagonalizing gauge of the Lax connection, its
//!   quasi-conserved charge, and the anomaly-killing construction
//!   ([`abelianize`]).

pub mod abelianize;
pub mod charges;
pub mod continuum;
pub mod error;
pub mod lattice;
pub mod numerics;
pub mod qideform;
pub mod solutions;

pub use error::{Error, Result};
