//! Polarization-guided multimodal representation learning at desk scale.
//!
//! The crate is split along the processing chain:
//!
//! - [`polarimetry`]: per-pixel Mueller matrices, Lu–Chipman polar decomposition and
//!   the derived retardance / fast-axis / depolarization maps.
//! - [`decoupling`]: batch-normalized cross-correlation matrices and the
//!   common/unique/intra-modal redundancy-reduction objective with analytic gradients.
//! - [`trainer`]: a synthetic paired-modality dataset, small dual MLP encoders trained on
//!   the decoupled objective, linear probing and the ablation grid.
//! - [`slide`]: flat-field correction, rigid registration, resampling, tissue masking and
//!   corresponding patch extraction for paired slides.
//! - [`io`]: the PMM float raster container and binary PGM.

pub mod decoupling;
pub mod error;
pub mod io;
pub mod polarimetry;
pub mod slide;
pub mod trainer;

pub use error::{Error, Result};
