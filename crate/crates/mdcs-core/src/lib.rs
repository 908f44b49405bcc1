//! Compressive acquisition and reconstruction of multispectral light fields.
//!
//! A multispectral light field is a dense 5-way array `L(s, t, u, v, lambda)`:
//! two spatial coordinates, two angular (view) coordinates, and a spectral
//! band index. This crate models a snapshot camera that observes such a field
//! through a chain of small per-dimension operators — four permutations for
//! the spatial/angular axes and a one-hot band selector per snapshot — and
//! recovers the field from those measurements by smoothed-l0 sparse coding in
//! a separable orthonormal dictionary.
//!
//! The design constraint driving everything here is that the sensing operator
//! and the dictionary are never materialized as the huge Kronecker-product
//! matrices they are mathematically equal to. All hot paths work with the
//! per-dimension factors via n-mode products, which keeps the operator
//! footprint at a few kilobytes where the flattened equivalent would need
//! hundreds of megabytes, and turns the per-patch solve from a large dense
//! least-squares problem into a handful of tiny matrix multiplies.
//!
//! Module map:
//!
//! * [`tensor`] — dense tensors, unfoldings, n-mode products, Kronecker
//!   products, and the vectorization convention the rest of the crate
//!   depends on.
//! * [`sensing`] — seeded construction of the per-dimension measurement
//!   operators and the forward (acquisition) model.
//! * [`dict`] — separable orthonormal dictionaries: a DCT default and a
//!   data-driven alternative learned from training patches.
//! * [`sl0`] — the smoothed-l0 solver in both its factored n-dimensional
//!   form and a flattened one-dimensional baseline form.
//! * [`pipeline`] — patch extraction/assembly and the end-to-end
//!   sense/reconstruct drivers.
//! * [`metrics`] — PSNR, SSIM, spectral angle, timing helpers, and CSV
//!   reporting.
//! * [`io`] — on-disk tensor format, synthetic scene generation, and
//!   spectral-to-RGB rendering.

pub mod dict;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod sensing;
pub mod sl0;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{DenseMatrix, DenseTensor};
