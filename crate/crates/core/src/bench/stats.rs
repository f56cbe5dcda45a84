use serde::Serialize;

use super::{BenchError, BondTest, Material, MechTrace, Method, TraceKind};

/// Default drop that ends a loading phase for [`onset_estimate`].
pub const DEFAULT_ONSET_DROP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FailurePoint {
    pub abscissa: f64,
    pub value: f64,
    pub index: usize,
}

/// Global maximum of the value series; ties go to the earliest sample.
pub fn failure_point(trace: &MechTrace) -> Result<FailurePoint, BenchError> {
    if trace.samples.len() < 2 {
        return Err(BenchError::TooFewSamples(trace.samples.len()));
    }
    let mut best = 0;
    for (i, s) in trace.samples.iter().enumerate() {
        if s.1 > trace.samples[best].1 {
            best = i;
        }
    }
    let (abscissa, value) = trace.samples[best];
    if value <= 0.0 {
        return Err(BenchError::NoLoad);
    }
    Ok(FailurePoint {
        abscissa,
        value,
        index: best,
    })
}

/// First running maximum that is followed by a fall of more than `drop`
/// (fraction of that maximum) before being exceeded. A rough marker for
/// the initiation of breakage; `None` when no such fall occurs.
pub fn onset_estimate(trace: &MechTrace, drop: f64) -> Option<FailurePoint> {
    let mut best: Option<usize> = None;
    for (i, &(_, v)) in trace.samples.iter().enumerate() {
        match best {
            Some(b) if v <= trace.samples[b].1 => {
                let peak = trace.samples[b].1;
                if peak > 0.0 && v < (1.0 - drop) * peak {
                    let (abscissa, value) = trace.samples[b];
                    return Some(FailurePoint {
                        abscissa,
                        value,
                        index: b,
                    });
                }
            }
            _ => best = Some(i),
        }
    }
    None
}

/// Grouping key of a specimen set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GroupKey {
    pub material: Option<Material>,
    pub test: Option<BondTest>,
    pub method: Option<Method>,
}

impl GroupKey {
    pub fn of(trace: &MechTrace) -> GroupKey {
        GroupKey {
            material: trace.meta.material.clone(),
            test: trace.test(),
            method: trace.meta.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub key: GroupKey,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub n: usize,
    pub peaks: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> Result<(f64, f64), BenchError> {
    let n = values.len();
    if n < 2 {
        return Err(BenchError::TooFewTraces(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

/// Mean and sample std of the failure peaks of a homogeneous specimen set.
pub fn summarize(traces: &[MechTrace]) -> Result<Summary, BenchError> {
    let first = traces.first().ok_or(BenchError::TooFewTraces(0))?;
    let key = GroupKey::of(first);
    for t in &traces[1..] {
        let k = GroupKey::of(t);
        if k != key || t.kind != first.kind {
            return Err(BenchError::Mixed(format!(
                "`{}` ({}) does not match `{}` ({})",
                t.meta.label,
                describe(&k),
                first.meta.label,
                describe(&key)
            )));
        }
    }
    let peaks = traces
        .iter()
        .map(|t| failure_point(t).map(|p| p.value))
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, std) = mean_std(&peaks)?;
    Ok(Summary {
        key,
        mean,
        std,
        n: peaks.len(),
        peaks,
    })
}

pub(crate) fn describe(k: &GroupKey) -> String {
    let part = |s: Option<String>| s.unwrap_or_else(|| "?".into());
    format!(
        "{}/{}/{}",
        part(k.material.as_ref().map(|m| m.to_string())),
        part(k.test.map(|t| t.to_string())),
        part(k.method.map(|m| m.to_string()))
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    /// `(a - b) / b * 100`.
    pub percent: f64,
    /// `a / b * 100`.
    pub ratio_percent: f64,
}

pub fn improvement(mean_a: f64, mean_b: f64) -> Result<Improvement, BenchError> {
    if !(mean_b > 0.0) {
        return Err(BenchError::NonPositiveBaseline(mean_b));
    }
    Ok(Improvement {
        percent: (mean_a - mean_b) / mean_b * 100.0,
        ratio_percent: mean_a / mean_b * 100.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleDrift {
    pub peaks: Vec<f64>,
    pub first: f64,
    pub last: f64,
    /// `(last - first) / first * 100`.
    pub drift_percent: f64,
}

/// Per-cycle peaks of a pressure trace. Cycle `k` spans
/// `[boundaries[k], boundaries[k + 1])`; the last one includes its end.
pub fn cycle_drift(trace: &MechTrace, boundaries: &[f64]) -> Result<CycleDrift, BenchError> {
    if trace.kind != TraceKind::PressureTime {
        return Err(BenchError::WrongKind);
    }
    if boundaries.len() < 3 {
        return Err(BenchError::TooFewCycles(boundaries.len().saturating_sub(1)));
    }
    if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(BenchError::BadBoundaries);
    }
    let cycles = boundaries.len() - 1;
    let mut peaks = vec![f64::NEG_INFINITY; cycles];
    let mut seen = vec![false; cycles];
    let mut k = 0;
    for &(x, v) in &trace.samples {
        if x < boundaries[0] {
            continue;
        }
        while k < cycles && x >= boundaries[k + 1] && !(k == cycles - 1 && x == boundaries[cycles]) {
            k += 1;
        }
        if k == cycles {
            break;
        }
        peaks[k] = peaks[k].max(v);
        seen[k] = true;
    }
    if let Some(empty) = seen.iter().position(|s| !s) {
        return Err(BenchError::EmptyCycle(empty + 1));
    }
    let first = peaks[0];
    let last = peaks[cycles - 1];
    Ok(CycleDrift {
        drift_percent: (last - first) / first * 100.0,
        first,
        last,
        peaks,
    })
}

/// `count + 1` evenly spaced boundaries for `count` cycles.
pub fn uniform_boundaries(start: f64, period: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| start + k as f64 * period).collect()
}
