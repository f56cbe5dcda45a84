use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::describe;
use super::{
    compare_to_embedded, failure_point, improvement, onset_estimate, summarize, BenchError, GroupKey,
    Improvement, MechTrace, Method, ReferenceComparison, Summary,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisOptions {
    /// Relative tolerance for reference comparisons.
    pub tolerance: f64,
    /// Drop fraction for the onset estimate.
    pub onset_drop: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tolerance: super::DEFAULT_REFERENCE_TOLERANCE,
            onset_drop: super::DEFAULT_ONSET_DROP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileOutcome {
    pub source: String,
    pub label: Option<String>,
    pub peak: Option<f64>,
    pub onset: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub group: String,
    pub key: GroupKey,
    pub summary: Option<Summary>,
    /// Against the adhesive group of the same material and test.
    pub improvement_vs_silpoxy: Option<Improvement>,
    pub reference: Option<ReferenceComparison>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub files: Vec<FileOutcome>,
    pub groups: Vec<GroupReport>,
    pub loaded: usize,
    pub failed: usize,
}

/// Groups loaded traces by (material, test, method) and summarizes each
/// group. Per-file load errors are recorded, not fatal; the result is an
/// error only when nothing loaded.
pub fn analyze_traces(
    inputs: Vec<(String, Result<MechTrace, BenchError>)>,
    options: &AnalysisOptions,
) -> Result<BenchReport, BenchError> {
    let mut files = Vec::with_capacity(inputs.len());
    let mut groups: BTreeMap<GroupKey, Vec<MechTrace>> = BTreeMap::new();
    for (source, result) in inputs {
        match result {
            Ok(trace) => {
                let peak = failure_point(&trace);
                files.push(FileOutcome {
                    source,
                    label: Some(trace.meta.label.clone()),
                    peak: peak.as_ref().ok().map(|p| p.value),
                    onset: onset_estimate(&trace, options.onset_drop).map(|p| p.value),
                    error: peak.err().map(|e| e.to_string()),
                });
                groups.entry(GroupKey::of(&trace)).or_default().push(trace);
            }
            Err(e) => files.push(FileOutcome {
                source,
                label: None,
                peak: None,
                onset: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let failed = files.iter().filter(|f| f.error.is_some()).count();
    let loaded = files.len() - failed;
    if loaded == 0 {
        return Err(BenchError::NothingToAnalyze(files.len()));
    }

    let mut summaries: BTreeMap<GroupKey, Result<Summary, BenchError>> = BTreeMap::new();
    for (key, mut traces) in groups {
        // keep only traces with a usable peak; their errors are on the file
        traces.retain(|t| failure_point(t).is_ok());
        // order by label so results do not depend on input order
        traces.sort_by(|a, b| a.meta.label.cmp(&b.meta.label));
        summaries.insert(key, summarize(&traces));
    }

    let mut reports = Vec::with_capacity(summaries.len());
    for (key, result) in &summaries {
        let mut notes = Vec::new();
        let summary = match result {
            Ok(s) => Some(s.clone()),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        let baseline = GroupKey {
            method: Some(Method::Silpoxy),
            ..key.clone()
        };
        let improvement_vs_silpoxy = match (&summary, summaries.get(&baseline)) {
            (Some(s), Some(Ok(b))) if key.method != Some(Method::Silpoxy) => match improvement(s.mean, b.mean) {
                Ok(i) => Some(i),
                Err(e) => {
                    notes.push(e.to_string());
                    None
                }
            },
            _ => None,
        };
        let reference = match &summary {
            Some(s) => match compare_to_embedded(s, options.tolerance) {
                Ok(c) => Some(c),
                Err(e) => {
                    notes.push(e.to_string());
                    None
                }
            },
            None => None,
        };
        reports.push(GroupReport {
            group: describe(key),
            key: key.clone(),
            summary,
            improvement_vs_silpoxy,
            reference,
            notes,
        });
    }

    Ok(BenchReport {
        files,
        groups: reports,
        loaded,
        failed,
    })
}
