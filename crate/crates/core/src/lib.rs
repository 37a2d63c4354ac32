//! Linearized forward map of electrical impedance tomography on the unit disk.
//!
//! The Fréchet derivative `F` of the Neumann-to-Dirichlet map at unit
//! conductivity is represented in the orthonormal Zernike basis of `L²(D)`
//! and the Fourier basis `f_m = e^{imθ}/√(2π)` of the mean-free boundary
//! space. Each angular frequency `j` couples to a single diagonal of the
//! boundary matrix, carried by a lower-triangular matrix `F^{|j|}`.
//!
//! Modules:
//! - [`zernike`]: basis evaluation, disk quadrature, analysis/synthesis.
//! - [`frechet`]: closed-form entries, block assembly, forward application.
//! - [`bounds`]: entry majorant, Schur sums, norm estimates, figure data.
//! - [`oracle`]: quadrature of the defining bilinear identity.
//! - [`sobolev`]: eigen-scale of `Λ(1)` and the finite-rank embedding check.
//! - [`recon`]: one-step Tikhonov reconstruction per diagonal.
//! - [`io`]: CSV formats shared by the command-line tool.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod frechet;
pub mod io;
pub mod oracle;
pub mod quadrature;
pub mod recon;
pub mod sobolev;
pub mod special;
pub mod zernike;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// `1/√π`.
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
