//! Numerical and combinatorial laboratory for affine Toda-type elliptic
//! systems attached to root systems and their extended Dynkin diagrams.
//!
//! The crate has three layers:
//!
//! * exact combinatorics: root systems, extended simple roots, marks,
//!   Coxeter numbers ([`rootsys`]) and affine Cartan matrices with their
//!   foldings and kernel vectors ([`folding`]), all in rational arithmetic;
//! * a flat periodic grid with spectral Poisson solves, discrete Green
//!   functions and divisor-encoded forcings ([`grid`]), on top of which
//!   [`toda`] assembles and solves the discrete Bochner-Toda systems by
//!   damped Newton-Krylov iteration;
//! * verifiers: the graph-neighbourhood and cooperative-system maximum
//!   principles ([`maxprin`]) and scripted experiments that turn solver
//!   output into machine-readable verdicts ([`experiments`]).
//!
//! Matrix conventions. The finite Cartan matrix stored on a
//! [`rootsys::RootSystem`] is column-normalized, `a[i][j] = 2 ν(α_i,α_j) /
//! ν(α_j,α_j)`. Affine matrices in [`folding::AffineSystem`] are
//! row-normalized (Kac convention), `A[i][j] = 2 ν(z_i,z_j) / ν(z_i,z_i)`,
//! so the marks vector spans the right kernel. The Toda systems built in
//! [`toda`] use the transpose of the stored affine matrix as coefficient
//! matrix, which is the normalization-independent form of the equations.

pub mod error;
pub mod experiments;
pub mod folding;
pub mod grid;
pub mod maxprin;
pub mod par;
pub mod ratlin;
pub mod rootsys;
pub mod toda;

pub use error::Error;
