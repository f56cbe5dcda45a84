use std::fmt::Write as _;
use std::str::FromStr;

use super::{LayerRaster, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    /// Binary portable graymap (`P5`); filled cells are white.
    Pgm,
    /// One row per grid row, `0`/`1` per cell.
    Csv,
}

impl RasterFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RasterFormat::Pgm => "pgm",
            RasterFormat::Csv => "csv",
        }
    }
}

impl FromStr for RasterFormat {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "pgm" => Ok(RasterFormat::Pgm),
            "csv" => Ok(RasterFormat::Csv),
            _ => Err(SimError::UnsupportedFormat(s.to_string())),
        }
    }
}

/// Serializes a raster. Both formats list the highest-y row first so the
/// image appears with +y up.
pub fn export_raster(raster: &LayerRaster, format: RasterFormat) -> Vec<u8> {
    match format {
        RasterFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", raster.nx, raster.ny).into_bytes();
            out.reserve(raster.nx * raster.ny);
            for row in raster.cells().chunks(raster.nx).rev() {
                out.extend(row.iter().map(|&c| if c { 255u8 } else { 0 }));
            }
            out
        }
        RasterFormat::Csv => {
            let mut out = String::with_capacity(raster.nx * raster.ny * 2);
            for row in raster.cells().chunks(raster.nx).rev() {
                for (i, &c) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push(if c { '1' } else { '0' });
                }
                let _ = writeln!(out);
            }
            out.into_bytes()
        }
    }
}
