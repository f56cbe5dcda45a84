//! Run configuration and region files, both TOML.
//!
//! Run configuration (every key optional; command-line flags win):
//!
//! ```toml
//! [printer]
//! filament_diameter = 1.75   # mm
//! nominal_width = 0.4        # mm
//! layer_height = 0.2         # mm
//! dialect = "marlin"
//!
//! [transform]
//! regions = "regions.toml"   # relative to this file
//! source_gamma = "100%"      # or 1.0
//! arc_tolerance = 0.01       # mm
//! remove_toolchanges = false
//! tool_alias = { 1 = 0 }     # virtual tool -> physical extruder
//!
//! [simulate]
//! resolution = 0.01          # mm
//!
//! [report]
//! output = "report.json"
//!
//! [tolerance]
//! reference = 0.05           # relative deviation allowed against reference means
//! onset_drop = 0.2
//! ```
//!
//! Region file:
//!
//! ```toml
//! [[region]]
//! label = "porous"
//! shape = "z_slab"           # z_slab | box | cylinder
//! z_min = 1.0
//! z_max = 3.1
//! gamma = "30%"              # percent needs the % sign; bare numbers are fractions
//! feedrate = 1200            # optional, mm/min
//!
//! [[region]]
//! label = "pad"
//! shape = "box"
//! min = [0, 0, 0]
//! max = [10, 10, 1]
//! gamma = 0.5
//!
//! [[region]]
//! label = "plug"
//! shape = "cylinder"
//! center = [30, 30]
//! radius = 4
//! z_min = 0
//! z_max = 2
//! gamma = "10%"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::flow::{parse_flow_fraction, FlowParams};
use crate::region::{RegionShape, RegionSpec};

/// A flow value written as `"30%"`, `"0.3"` or `0.3`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GammaValue {
    Number(f64),
    Text(String),
}

impl GammaValue {
    pub fn fraction(&self) -> Result<f64, String> {
        match self {
            GammaValue::Number(v) => parse_flow_fraction(&v.to_string()),
            GammaValue::Text(s) => parse_flow_fraction(s),
        }
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrinterSection {
    pub filament_diameter: Option<f64>,
    pub nominal_width: Option<f64>,
    pub layer_height: Option<f64>,
    pub dialect: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    pub regions: Option<PathBuf>,
    pub source_gamma: Option<GammaValue>,
    pub arc_tolerance: Option<f64>,
    pub remove_toolchanges: Option<bool>,
    pub tool_alias: Option<BTreeMap<String, u32>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub reference: Option<f64>,
    pub onset_drop: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub printer: PrinterSection,
    #[serde(default)]
    pub transform: TransformSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub tolerance: ToleranceSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if let Some(d) = &cfg.printer.dialect {
            if !d.eq_ignore_ascii_case("marlin") {
                return Err(format!("unsupported dialect `{d}` (only marlin)"));
            }
        }
        cfg.printer.dialect = None;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.transform.regions, &mut cfg.report.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Printer parameters with defaults filled in; flow is 1.
    pub fn flow_params(&self) -> FlowParams {
        let d = FlowParams::default();
        FlowParams {
            filament_diameter: self.printer.filament_diameter.unwrap_or(d.filament_diameter),
            nominal_width: self.printer.nominal_width.unwrap_or(d.nominal_width),
            layer_height: self.printer.layer_height.unwrap_or(d.layer_height),
            flow_fraction: 1.0,
        }
    }

    pub fn tool_alias(&self) -> Result<Option<BTreeMap<u32, u32>>, String> {
        let Some(map) = &self.transform.tool_alias else {
            return Ok(None);
        };
        map.iter()
            .map(|(k, &v)| {
                let tool = k
                    .trim_start_matches(['T', 't'])
                    .parse::<u32>()
                    .map_err(|_| format!("tool alias key `{k}` is not a tool number"))?;
                Ok((tool, v))
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    label: String,
    shape: String,
    gamma: GammaValue,
    feedrate: Option<f64>,
    min: Option<[f64; 3]>,
    max: Option<[f64; 3]>,
    center: Option<[f64; 2]>,
    radius: Option<f64>,
    z_min: Option<f64>,
    z_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegionFile {
    #[serde(default)]
    region: Vec<RawRegion>,
}

impl RawRegion {
    fn into_spec(self) -> Result<RegionSpec, String> {
        let label = self.label.clone();
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| format!("region `{label}`: missing `{key}`"));
        let shape = match self.shape.to_ascii_lowercase().replace('-', "_").as_str() {
            "z_slab" | "slab" => RegionShape::ZSlab {
                z_min: self.z_min.unwrap_or(f64::NEG_INFINITY),
                z_max: self.z_max.unwrap_or(f64::INFINITY),
            },
            "box" | "axis_aligned_box" => RegionShape::AxisAlignedBox {
                min: self.min.ok_or_else(|| format!("region `{label}`: missing `min`"))?,
                max: self.max.ok_or_else(|| format!("region `{label}`: missing `max`"))?,
            },
            "cylinder" => RegionShape::Cylinder {
                center: self
                    .center
                    .ok_or_else(|| format!("region `{label}`: missing `center`"))?,
                radius: need(self.radius, "radius")?,
                z_min: need(self.z_min, "z_min")?,
                z_max: need(self.z_max, "z_max")?,
            },
            other => return Err(format!("region `{label}`: unknown shape `{other}`")),
        };
        let gamma = self
            .gamma
            .fraction()
            .map_err(|e| format!("region `{label}`: {e}"))?;
        Ok(RegionSpec {
            label: self.label,
            shape,
            target_gamma: gamma,
            feedrate_override: self.feedrate,
        })
    }
}

/// Parses a region file. Geometry and overlap checks happen when the
/// regions are applied.
pub fn parse_regions(text: &str) -> Result<Vec<RegionSpec>, String> {
    let raw: RawRegionFile = toml::from_str(text).map_err(|e| e.to_string())?;
    raw.region.into_iter().map(RawRegion::into_spec).collect()
}
