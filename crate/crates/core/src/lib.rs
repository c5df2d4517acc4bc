//! Synthesis and analysis of multi-pole coupled-resonator Purcell filters with
//! multiplexed readout resonators on a flip-chip coplanar-waveguide stack.
//!
//! The crate follows the design chain from cross-section geometry to complex
//! transmission spectra:
//!
//! - [`specfun`]: complete/incomplete elliptic integrals and modulus inversion.
//! - [`tgcpw`]: top-grounded CPW line parameters and quarter-wave bookkeeping.
//! - [`coupled_tgcpw`]: even/odd-mode analysis of edge-coupled top-grounded CPW.
//! - [`coupler_net`]: four-port coupled-section network and coupling extraction.
//! - [`cmatrix`]: coupling-matrix assembly, S-parameters and external coupling.
//! - [`notchfit`]: notch-resonator model and parameter extraction.
//! - [`oracles`]: brute-force reference solvers used for verification.
//! - [`cli`]: configuration, the chip pipeline, and file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cmatrix;
pub mod coupled_tgcpw;
pub mod coupler_net;
mod error;
pub mod notchfit;
pub mod oracles;
pub mod specfun;
pub mod tgcpw;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
