use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::flow::parse_flow_fraction;

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// Displacement in mm against force in N.
    ForceDisplacement,
    /// Time in s against pressure in kPa.
    PressureTime,
}

impl FromStr for TraceKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "force_displacement" => Ok(TraceKind::ForceDisplacement),
            "pressure_time" => Ok(TraceKind::PressureTime),
            _ => Err(BenchError::InvalidMetadata {
                key: "kind",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Material {
    Ecoflex,
    DragonSkin,
    Other(String),
}

impl Material {
    pub fn parse(s: &str) -> Material {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if key.starts_with("ecoflex") {
            Material::Ecoflex
        } else if key.starts_with("dragonskin") {
            Material::DragonSkin
        } else {
            Material::Other(s.trim().to_ascii_lowercase())
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Material::Ecoflex => f.write_str("ecoflex"),
            Material::DragonSkin => f.write_str("dragonskin"),
            Material::Other(s) => f.write_str(s),
        }
    }
}

impl Serialize for Material {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BondTest {
    LapShear,
    Peel,
    BalloonPressure,
    BalloonDeflection,
}

impl BondTest {
    pub fn as_str(self) -> &'static str {
        match self {
            BondTest::LapShear => "lap_shear",
            BondTest::Peel => "peel",
            BondTest::BalloonPressure => "balloon_pressure",
            BondTest::BalloonDeflection => "balloon_deflection",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            BondTest::LapShear | BondTest::Peel => "N",
            BondTest::BalloonPressure => "kPa",
            BondTest::BalloonDeflection => "mm",
        }
    }
}

impl fmt::Display for BondTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BondTest {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "lap_shear" | "lapshear" => Ok(BondTest::LapShear),
            "peel" | "peeling" => Ok(BondTest::Peel),
            "balloon_pressure" | "balloon_pressure_kpa" | "pressure" => Ok(BondTest::BalloonPressure),
            "balloon_deflection" | "balloon_deflection_mm" | "deflection" => Ok(BondTest::BalloonDeflection),
            _ => Err(BenchError::InvalidMetadata {
                key: "test",
                value: s.to_string(),
            }),
        }
    }
}

/// How the rubber was bonded to the printed part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Commercial silicone adhesive.
    Silpoxy,
    /// Porous underextruded interface at this flow percentage.
    Underextrusion(u32),
}

impl Method {
    pub fn from_gamma(gamma: f64) -> Method {
        Method::Underextrusion((gamma * 100.0).round() as u32)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Silpoxy => f.write_str("silpoxy"),
            Method::Underextrusion(p) => write!(f, "{p}%"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "");
        if key == "silpoxy" || key == "glue" {
            return Ok(Method::Silpoxy);
        }
        let gamma_text = key
            .strip_prefix("gamma=")
            .or_else(|| key.strip_prefix("underextrusion"))
            .unwrap_or(&key);
        parse_flow_fraction(gamma_text)
            .map(Method::from_gamma)
            .map_err(|_| BenchError::InvalidMetadata {
                key: "method",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub label: String,
    pub material: Option<Material>,
    pub test: Option<BondTest>,
    pub method: Option<Method>,
    pub gamma: Option<f64>,
    /// Unrecognized `#key=value` lines.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechTrace {
    pub kind: TraceKind,
    pub samples: Vec<(f64, f64)>,
    pub meta: TraceMeta,
}

impl MechTrace {
    /// Validates samples: abscissa strictly increasing, all values finite.
    /// Row numbers in errors are 1-based sample indices.
    pub fn new(kind: TraceKind, samples: Vec<(f64, f64)>, meta: TraceMeta) -> Result<Self, BenchError> {
        for (i, &(x, y)) in samples.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                return Err(BenchError::NonFinite { row: i + 1 });
            }
            if i > 0 && x <= samples[i - 1].0 {
                return Err(BenchError::NonMonotone { row: i + 1 });
            }
        }
        Ok(MechTrace { kind, samples, meta })
    }

    /// Bond test, falling back to ballooning pressure for pressure traces.
    pub fn test(&self) -> Option<BondTest> {
        self.meta.test.or(match self.kind {
            TraceKind::PressureTime => Some(BondTest::BalloonPressure),
            TraceKind::ForceDisplacement => None,
        })
    }
}

pub fn load_trace(path: &Path) -> Result<MechTrace, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_trace(&text, &label)
}

/// Parses trace CSV text: `#key=value` metadata lines, an
/// `abscissa,value` header and one sample per row.
pub fn parse_trace(text: &str, label: &str) -> Result<MechTrace, BenchError> {
    let mut raw_meta = BTreeMap::new();
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                raw_meta.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
            }
        }
    }

    let kind: TraceKind = raw_meta
        .remove("kind")
        .ok_or(BenchError::MissingMetadata("kind"))?
        .parse()?;
    let material = raw_meta.remove("material").map(|m| Material::parse(&m));
    let test = raw_meta.remove("test").map(|t| t.parse()).transpose()?;
    let gamma = raw_meta
        .remove("gamma")
        .map(|g| {
            parse_flow_fraction(&g).map_err(|_| BenchError::InvalidMetadata {
                key: "gamma",
                value: g.clone(),
            })
        })
        .transpose()?;
    let method = match raw_meta.remove("method") {
        Some(m) if m.trim().eq_ignore_ascii_case("underextrusion") => match gamma {
            Some(g) => Some(Method::from_gamma(g)),
            None => return Err(BenchError::MissingMetadata("gamma")),
        },
        Some(m) => Some(m.parse()?),
        None => gamma.map(Method::from_gamma),
    };
    let label = raw_meta.remove("label").unwrap_or_else(|| label.to_string());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| BenchError::Csv(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "abscissa" || &headers[1] != "value" {
        return Err(BenchError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| BenchError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        let field = |k: usize| -> Result<f64, BenchError> {
            let s = record.get(k).unwrap_or("");
            let v: f64 = s.parse().map_err(|_| BenchError::MalformedRow {
                row,
                reason: format!("`{s}` is not a number"),
            })?;
            if v.is_nan() {
                return Err(BenchError::NonFinite { row });
            }
            Ok(v)
        };
        samples.push((field(0)?, field(1)?));
    }

    MechTrace::new(
        kind,
        samples,
        TraceMeta {
            label,
            material,
            test,
            method,
            gamma,
            extra: raw_meta,
        },
    )
}

/// Writes a trace in the CSV format read by [`parse_trace`].
pub fn trace_to_csv(trace: &MechTrace) -> String {
    let mut out = String::new();
    let kind = match trace.kind {
        TraceKind::ForceDisplacement => "force_displacement",
        TraceKind::PressureTime => "pressure_time",
    };
    out.push_str(&format!("#kind={kind}\n"));
    out.push_str(&format!("#label={}\n", trace.meta.label));
    if let Some(m) = &trace.meta.material {
        out.push_str(&format!("#material={m}\n"));
    }
    if let Some(t) = trace.meta.test {
        out.push_str(&format!("#test={t}\n"));
    }
    match trace.meta.method {
        Some(Method::Silpoxy) => out.push_str("#method=silpoxy\n"),
        Some(Method::Underextrusion(p)) => out.push_str(&format!("#method=underextrusion\n#gamma={p}%\n")),
        None => {}
    }
    out.push_str("abscissa,value\n");
    for (x, y) in &trace.samples {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "#kind=force_displacement\n#material=Ecoflex 00-10\n#method=underextrusion\n#gamma=30%\n#test=lap_shear\nabscissa,value\n0,0\n1,5\n2,12.45\n3,4\n";

    #[test]
    fn well_formed_file() {
        let t = parse_trace(GOOD, "a").unwrap();
        assert_eq!(t.samples.len(), 4);
        assert_eq!(t.kind, TraceKind::ForceDisplacement);
        assert_eq!(t.meta.material, Some(Material::Ecoflex));
        assert_eq!(t.meta.method, Some(Method::Underextrusion(30)));
        assert_eq!(t.test(), Some(BondTest::LapShear));
    }

    #[test]
    fn decreasing_abscissa_names_the_row() {
        let err = parse_trace("#kind=pressure_time\nabscissa,value\n0,1\n2,2\n1,3\n", "x").unwrap_err();
        assert_eq!(err, BenchError::NonMonotone { row: 3 });
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn missing_kind() {
        assert_eq!(
            parse_trace("abscissa,value\n0,1\n", "x").unwrap_err(),
            BenchError::MissingMetadata("kind")
        );
    }

    #[test]
    fn nan_value_is_rejected() {
        let err = parse_trace("#kind=pressure_time\nabscissa,value\n0,1\n1,NaN\n", "x").unwrap_err();
        assert_eq!(err, BenchError::NonFinite { row: 2 });
    }

    #[test]
    fn method_spellings() {
        assert_eq!("Sil-Poxy".parse::<Method>(), Ok(Method::Silpoxy));
        assert_eq!("gamma=0.1".parse::<Method>(), Ok(Method::Underextrusion(10)));
        assert_eq!("50%".parse::<Method>(), Ok(Method::Underextrusion(50)));
        assert!("granite".parse::<Method>().is_err());
    }

    #[test]
    fn csv_writer_is_readable() {
        let t = parse_trace(GOOD, "a").unwrap();
        let back = parse_trace(&trace_to_csv(&t), "b").unwrap();
        assert_eq!(back.samples, t.samples);
        assert_eq!(back.meta.method, t.meta.method);
    }
}
