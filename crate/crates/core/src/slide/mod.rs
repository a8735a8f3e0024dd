//! Slide preparation: illumination correction, rigid registration of H&E onto the
//! polarization frame, resampling, tissue masking and aligned patch extraction.

mod flatfield;
mod gray;
mod mask;
mod patches;
mod pipeline;
mod register;
mod synthetic;
mod transform;

pub use flatfield::{box_mean, flat_field_correct, DEFAULT_FLAT_FIELD_RADIUS};
pub use gray::GrayImage;
pub use mask::{otsu_bin, tissue_mask, tissue_mask_within, TissueMask, OTSU_BINS};
pub use patches::{
    extract_patches, PatchConfig, PatchRecord, PatchSource, TileGrid, DEFAULT_MIN_TISSUE_FRACTION, DEFAULT_PATCH_SIZE,
    MANIFEST_NAME,
};
pub use pipeline::{run_pipeline, PipelineReport, PipelineSettings, SlideInputs};
pub use register::{masked_ncc, register_rigid, RegistrationOutcome, SearchBounds, NCC_FLOOR};
pub use transform::{resample_gray, resample_mueller, wrap_angle, Resampled, RigidTransform};
pub use synthetic::synthetic_tissue;
