//! Mueller-matrix polarimetry: Stokes/Mueller algebra, Lu–Chipman polar decomposition and
//! the derived per-pixel optical property maps (retardance, fast-axis orientation,
//! depolarization power).

mod decompose;
mod image;
mod maps;
mod mueller;

pub use decompose::{
    derive_properties, lu_chipman_decompose, DecompositionFailure, PolarDecomposition,
    PolarProperties,
};
pub use image::MuellerImage;
pub use maps::{property_maps, render_map, PolarPropertyMaps, RenderStyle, VALIDATION_TOL};
pub use mueller::{
    mueller_apply, validate_mueller, InvalidReason, MuellerMatrix, StokesVector, ValidityReport,
};
