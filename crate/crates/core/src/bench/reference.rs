//! Published bond-strength, pressure and deflection values for
//! rubber-to-PLA interfaces made by underextrusion or silicone adhesive.

use serde::Serialize;

use super::{BenchError, BondTest, Material, Method, Summary};

/// Default relative tolerance on the mean for a reference comparison.
pub const DEFAULT_REFERENCE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RefValue {
    MeanStd { mean: f64, std: f64, decimals: usize },
    /// A single reported value without spread.
    Single { value: f64, decimals: usize },
    /// Only an upper bound was reported.
    UpperBound { value: f64, decimals: usize },
}

impl RefValue {
    pub fn mean(&self) -> f64 {
        match *self {
            RefValue::MeanStd { mean, .. } => mean,
            RefValue::Single { value, .. } | RefValue::UpperBound { value, .. } => value,
        }
    }

    pub fn std(&self) -> Option<f64> {
        match *self {
            RefValue::MeanStd { std, .. } => Some(std),
            _ => None,
        }
    }

    /// The value as it is quoted, e.g. `12.45 ± 1.22`, `5`, `< 8`.
    pub fn formatted(&self) -> String {
        match *self {
            RefValue::MeanStd { mean, std, decimals } => format!("{mean:.decimals$} ± {std:.decimals$}"),
            RefValue::Single { value, decimals } => format!("{value:.decimals$}"),
            RefValue::UpperBound { value, decimals } => format!("< {value:.decimals$}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub material: Material,
    pub test: BondTest,
    pub method: Method,
    pub value: RefValue,
}

fn ms(mean: f64, std: f64, decimals: usize) -> RefValue {
    RefValue::MeanStd { mean, std, decimals }
}

/// The embedded reference table.
pub fn bond_reference() -> Vec<ReferenceRow> {
    use BondTest::*;
    use Method::*;
    let eco = Material::Ecoflex;
    let ds = Material::DragonSkin;
    let rows = [
        (eco.clone(), LapShear, Underextrusion(30), ms(12.45, 1.22, 2)),
        (eco.clone(), LapShear, Underextrusion(10), ms(10.46, 2.87, 2)),
        (eco.clone(), LapShear, Underextrusion(50), ms(9.57, 0.38, 2)),
        (eco.clone(), LapShear, Silpoxy, ms(6.03, 1.08, 2)),
        (eco.clone(), Peel, Underextrusion(30), ms(10.41, 1.35, 2)),
        (eco.clone(), Peel, Underextrusion(10), ms(4.14, 0.82, 2)),
        (eco.clone(), Peel, Underextrusion(50), ms(7.44, 1.55, 2)),
        (eco.clone(), Peel, Silpoxy, ms(3.18, 1.39, 2)),
        (ds.clone(), LapShear, Underextrusion(30), ms(34.82, 5.29, 2)),
        (ds.clone(), LapShear, Underextrusion(10), ms(24.64, 6.13, 2)),
        (ds.clone(), LapShear, Underextrusion(50), ms(30.11, 1.12, 2)),
        (ds.clone(), LapShear, Silpoxy, ms(20.74, 1.56, 2)),
        (ds.clone(), Peel, Underextrusion(30), ms(14.20, 2.03, 2)),
        (ds.clone(), Peel, Underextrusion(10), ms(6.09, 0.51, 2)),
        (ds.clone(), Peel, Underextrusion(50), ms(9.45, 2.12, 2)),
        (ds.clone(), Peel, Silpoxy, ms(3.72, 0.46, 2)),
        (eco.clone(), BalloonPressure, Underextrusion(30), ms(8.2, 0.4, 1)),
        (eco.clone(), BalloonPressure, Underextrusion(50), ms(7.6, 0.8, 1)),
        (
            eco.clone(),
            BalloonPressure,
            Silpoxy,
            RefValue::Single {
                value: 5.0,
                decimals: 0,
            },
        ),
        (ds.clone(), BalloonPressure, Underextrusion(30), ms(36.6, 0.4, 1)),
        (ds.clone(), BalloonPressure, Underextrusion(50), ms(18.0, 2.6, 1)),
        (
            ds.clone(),
            BalloonPressure,
            Silpoxy,
            RefValue::UpperBound {
                value: 8.0,
                decimals: 0,
            },
        ),
        (eco.clone(), BalloonDeflection, Underextrusion(30), ms(46.90, 0.66, 2)),
        (eco, BalloonDeflection, Underextrusion(50), ms(40.22, 6.84, 2)),
        (ds.clone(), BalloonDeflection, Underextrusion(30), ms(33.14, 1.63, 2)),
        (ds.clone(), BalloonDeflection, Underextrusion(50), ms(14.82, 1.90, 2)),
        (ds, BalloonDeflection, Silpoxy, ms(9.54, 1.56, 2)),
    ];
    rows.into_iter()
        .map(|(material, test, method, value)| ReferenceRow {
            material,
            test,
            method,
            value,
        })
        .collect()
}

pub fn find_reference(material: &Material, test: BondTest, method: Method) -> Result<ReferenceRow, BenchError> {
    bond_reference()
        .into_iter()
        .find(|r| &r.material == material && r.test == test && r.method == method)
        .ok_or_else(|| BenchError::UnknownReference(format!("({material}, {test}, {method})")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceComparison {
    pub material: Material,
    pub test: BondTest,
    pub method: Method,
    pub computed_mean: f64,
    pub computed_std: f64,
    pub reference: String,
    pub reference_mean: f64,
    pub reference_std: Option<f64>,
    pub abs_deviation: f64,
    pub rel_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares a computed summary with one reference row. A mean within
/// `tolerance` (relative) passes; against an upper bound the computed mean
/// must stay below the bound.
pub fn compare_to_reference(summary: &Summary, row: &ReferenceRow, tolerance: f64) -> ReferenceComparison {
    let reference_mean = row.value.mean();
    let abs_deviation = (summary.mean - reference_mean).abs();
    let rel_deviation = abs_deviation / reference_mean.abs();
    let pass = match row.value {
        RefValue::UpperBound { value, .. } => summary.mean < value,
        _ => rel_deviation <= tolerance,
    };
    ReferenceComparison {
        material: row.material.clone(),
        test: row.test,
        method: row.method,
        computed_mean: summary.mean,
        computed_std: summary.std,
        reference: row.value.formatted(),
        reference_mean,
        reference_std: row.value.std(),
        abs_deviation,
        rel_deviation,
        tolerance,
        pass,
    }
}

/// Looks up the summary's key in the embedded table and compares.
pub fn compare_to_embedded(summary: &Summary, tolerance: f64) -> Result<ReferenceComparison, BenchError> {
    let k = &summary.key;
    let (Some(material), Some(test), Some(method)) = (&k.material, k.test, k.method) else {
        return Err(BenchError::UnknownReference(super::stats::describe(k)));
    };
    let row = find_reference(material, test, method)?;
    Ok(compare_to_reference(summary, &row, tolerance))
}

/// CSV mirror of the reference table.
pub fn reference_csv() -> String {
    let mut out = String::from("material,test,method,unit,kind,mean,std,quoted\n");
    for r in bond_reference() {
        let (kind, std) = match r.value {
            RefValue::MeanStd { std, .. } => ("mean_std", std.to_string()),
            RefValue::Single { .. } => ("single", String::new()),
            RefValue::UpperBound { .. } => ("upper_bound", String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.material,
            r.test,
            r.method,
            r.test.unit(),
            kind,
            r.value.mean(),
            std,
            r.value.formatted()
        ));
    }
    out
}
