//! Discrete conformal geometry on closed triangulated surfaces, a normalized
//! curvature flow driving angle defects to their uniform target, fiberwise
//! flow families over a sampled base, and exact signature computation for
//! monodromy factorizations of surface symplectic groups.
//!
//! The crate is split along those lines:
//!
//! - [`mesh`]: triangulated surfaces with edge-length metrics, per-vertex
//!   conformal factors, curvature, areas and the cotangent Laplacian;
//! - [`flow`]: the normalized flow `du_i/dt = k*_i - K_i`, its monitors
//!   (potential, maximum-principle function, gradient proxy) and decay fits;
//! - [`fibered`]: families of flows over a sampled base space, uniform decay
//!   envelopes, spectral fingerprints and loop continuity checks;
//! - [`mcg`]: integer symplectic transvections, monodromy words, Hurwitz
//!   moves and mirrors;
//! - [`meyer`]: the exact rational cocycle, local contributions of singular
//!   fibers and assembled signature reports.
//!
//! Fiber flows are independent of one another; with the default `parallel`
//! feature they run on a rayon pool (capped via [`exec::Parallelism`]),
//! otherwise everything degrades to sequential execution with identical
//! results.

pub mod exact;
pub mod exec;
pub mod fibered;
pub mod flow;
pub mod mcg;
pub mod mesh;
pub mod meyer;
