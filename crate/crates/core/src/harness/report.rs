use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{boxplot_stats, BoxplotStats};
use super::EvalMode;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::Metric;

/// Effective settings, echoed so a report is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mode: EvalMode,
    pub metrics: Vec<Metric>,
    pub patch_size: u32,
    pub min_valid_fraction: f64,
    pub seed: u64,
    /// False when every view was scored against a model that may have seen
    /// it.
    pub cross_validation: bool,
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewResult {
    pub view_id: String,
    pub fold: usize,
    pub completeness: f64,
    /// Mean error per metric; `None` when no pixel was defined.
    pub errors: BTreeMap<Metric, Option<f64>>,
}

/// Per-view equal-weight means over a set of views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub views: usize,
    pub completeness: f64,
    /// Mean over the views whose error is defined.
    pub errors: BTreeMap<Metric, Option<f64>>,
    /// Views excluded from each metric's mean.
    pub null_views: BTreeMap<Metric, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub eval_ids: Vec<String>,
    pub aggregate: Aggregate,
}

/// Spread of the per-fold aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossFoldStats {
    pub completeness: BoxplotStats,
    /// `None` when no fold has a defined mean for the metric.
    pub errors: BTreeMap<Metric, Option<BoxplotStats>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub per_view: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ReportConfig,
    /// Ordered by fold, then by evaluation order within the fold.
    pub per_view: Vec<ViewResult>,
    pub per_fold: Vec<FoldResult>,
    pub aggregate: Aggregate,
    pub boxplot: CrossFoldStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Aggregates views in id order so the result does not depend on the order
/// views were listed or evaluated in.
fn aggregate(metrics: &[Metric], views: &[&ViewResult]) -> Aggregate {
    let mut sorted = views.to_vec();
    sorted.sort_by(|a, b| a.view_id.cmp(&b.view_id));
    let n = sorted.len();
    let completeness = sorted.iter().map(|v| v.completeness).sum::<f64>() / n as f64;
    let mut errors = BTreeMap::new();
    let mut null_views = BTreeMap::new();
    for &m in metrics {
        let defined: Vec<f64> = sorted.iter().filter_map(|v| v.errors.get(&m).copied().flatten()).collect();
        let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        errors.insert(m, mean);
        null_views.insert(m, n - defined.len());
    }
    Aggregate {
        views: n,
        completeness,
        errors,
        null_views,
    }
}

impl EvaluationReport {
    pub(crate) fn assemble(config: ReportConfig, per_view: Vec<ViewResult>, timings: Option<Timings>) -> Result<Self> {
        if per_view.is_empty() {
            return Err(Error::validation("no views to evaluate"));
        }
        let metrics = config.metrics.clone();
        let per_fold: Vec<FoldResult> = (0..config.n_folds)
            .map(|k| {
                let views: Vec<&ViewResult> = per_view.iter().filter(|v| v.fold == k).collect();
                if views.is_empty() {
                    return Err(Error::validation(format!("fold {k} has no views")));
                }
                Ok(FoldResult {
                    fold: k,
                    eval_ids: views.iter().map(|v| v.view_id.clone()).collect(),
                    aggregate: aggregate(&metrics, &views),
                })
            })
            .collect::<Result<_>>()?;
        let all: Vec<&ViewResult> = per_view.iter().collect();
        let aggregate = aggregate(&metrics, &all);
        let fold_completeness: Vec<f64> = per_fold.iter().map(|f| f.aggregate.completeness).collect();
        let boxplot = CrossFoldStats {
            completeness: boxplot_stats(&fold_completeness)?,
            errors: metrics
                .iter()
                .map(|&m| {
                    let vals: Vec<f64> = per_fold.iter().filter_map(|f| f.aggregate.errors[&m]).collect();
                    let stats = if vals.is_empty() { None } else { Some(boxplot_stats(&vals)?) };
                    Ok((m, stats))
                })
                .collect::<Result<_>>()?,
        };
        Ok(EvaluationReport {
            config,
            per_view,
            per_fold,
            aggregate,
            boxplot,
            timings,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Invariant(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// One row per view: id, fold, completeness, then one column per metric
    /// (empty when undefined).
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["view_id".to_string(), "fold".into(), "completeness".into()];
        header.extend(self.config.metrics.iter().map(|m| m.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for v in &self.per_view {
            let mut row = vec![v.view_id.clone(), v.fold.to_string(), v.completeness.to_string()];
            for m in &self.config.metrics {
                row.push(v.errors.get(m).copied().flatten().map(|e| e.to_string()).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Invariant(e.to_string()))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        io::write_bytes_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        io::write_bytes_atomic(path, &self.to_csv()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invariant(format!("csv encoding: {e}"))
}
