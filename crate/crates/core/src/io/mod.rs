//! File formats: the PMM float raster container and binary PGM (P5).

pub mod pgm;
pub mod pmm;

pub use pgm::{read_pgm, read_pgm_file, write_pgm, write_pgm_file, PgmImage};
pub use pmm::{read_pmm, read_pmm_file, write_pmm, write_pmm_file, PmmRaster};
