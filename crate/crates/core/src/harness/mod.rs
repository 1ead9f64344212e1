//! Cross-validated evaluation of reconstructions.
//!
//! A [`SplitPlan`] holds out every view exactly once. For each held-out view
//! the harness obtains a rephoto and its mask, either by rendering a model
//! or by loading files an external renderer produced, scores it against the
//! photo and aggregates per fold and overall into an [`EvaluationReport`].

mod report;
mod split;
mod stats;

pub use self::report::{Aggregate, EvaluationReport, FoldResult, ReportConfig, Timings, ViewResult};
pub use self::split::{split, Fold, SplitPlan};
pub use self::stats::{boxplot_stats, pearson, percentile, BoxplotStats};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Model;
use crate::metrics::{completeness, error_image, mean_error, ErrorImage, Metric, MetricConfig};
use crate::raster::{render_model, RenderOptions};
use crate::scene::{Mask, PinholeCamera, RgbImage, View, ViewManifest};

/// Replaced by the fold index in directory and model path patterns.
pub const FOLD_PLACEHOLDER: &str = "{fold}";

/// Where rephotos come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Render a triangle mesh.
    InternalMesh,
    /// Splat a point cloud.
    InternalPointcloud,
    /// Load `<id>.png` and `<id>_mask.png` produced elsewhere.
    External,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::InternalMesh => "internal-mesh",
            EvalMode::InternalPointcloud => "internal-pointcloud",
            EvalMode::External => "external",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "internal-mesh" => Ok(EvalMode::InternalMesh),
            "internal-pointcloud" => Ok(EvalMode::InternalPointcloud),
            "external" => Ok(EvalMode::External),
            other => Err(Error::validation(format!(
                "unknown mode {other:?} (expected internal-mesh, internal-pointcloud or external)"
            ))),
        }
    }
}

/// The reconstruction(s) being evaluated.
#[derive(Debug, Clone)]
pub enum RephotoSource {
    /// One model scored on every fold.
    Model(Model),
    /// One model per fold, in fold order.
    FoldModels(Vec<Model>),
    /// Directory of externally rendered rephotos and masks; may contain
    /// [`FOLD_PLACEHOLDER`].
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub metrics: Vec<Metric>,
    pub metric: MetricConfig,
    /// Echoed into the report.
    pub seed: u64,
    pub render: RenderOptions,
    /// Record wall-clock timings in the report.
    pub timings: bool,
    /// Write every error image as `<dir>/<id>_<metric>.pfm`.
    pub error_dir: Option<PathBuf>,
    /// Write every rephoto in the external layout.
    pub rephoto_dir: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalMode::InternalMesh,
            metrics: vec![Metric::Ncc, Metric::Cbcr],
            metric: MetricConfig::default(),
            seed: 0,
            render: RenderOptions::default(),
            timings: false,
            error_dir: None,
            rephoto_dir: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::validation("no metrics selected"));
        }
        let mut sorted = self.metrics.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.metrics.len() {
            return Err(Error::validation("metric listed twice"));
        }
        self.metric.validate()
    }
}

/// Substitutes the fold index into a path pattern.
pub fn fold_path(pattern: &Path, fold: usize) -> PathBuf {
    PathBuf::from(pattern.to_string_lossy().replace(FOLD_PLACEHOLDER, &fold.to_string()))
}

pub fn rephoto_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.png"))
}

pub fn mask_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_mask.png"))
}

pub fn error_path(dir: &Path, id: &str, metric: Metric) -> PathBuf {
    dir.join(format!("{id}_{metric}.pfm"))
}

/// Renders a rephoto and its mask. Colors are quantized to 8 bits so the
/// result survives a PNG round trip unchanged.
pub fn render_rephoto(model: &Model, camera: &PinholeCamera, opts: &RenderOptions) -> Result<(RgbImage, Mask)> {
    let out = render_model(model, camera, opts)?;
    Ok((out.color.quantize_8bit(), out.mask))
}

/// Loads an externally produced rephoto and mask for `view`.
pub fn load_rephoto(dir: &Path, view: &View) -> Result<(RgbImage, Mask)> {
    let img = RgbImage::load(&rephoto_path(dir, &view.id))?;
    let mask = Mask::load(&mask_path(dir, &view.id))?;
    let (w, h) = (view.camera.width, view.camera.height);
    if (img.width(), img.height()) != (w, h) || (mask.width(), mask.height()) != (w, h) {
        return Err(Error::DimensionMismatch(format!(
            "view {}: rephoto {}x{} and mask {}x{} must match camera {w}x{h}",
            view.id,
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    Ok((img, mask))
}

/// Computes every requested error image for one photo/rephoto pair.
pub fn score_pair(
    photo: &RgbImage,
    rephoto: &RgbImage,
    mask: &Mask,
    metrics: &[Metric],
    cfg: &MetricConfig,
) -> Result<Vec<(Metric, ErrorImage)>> {
    metrics
        .iter()
        .map(|&m| Ok((m, error_image(m, photo, rephoto, mask, cfg)?)))
        .collect()
}

fn check_source(mode: EvalMode, source: &RephotoSource, n_folds: usize) -> Result<()> {
    let models: &[Model] = match source {
        RephotoSource::Model(m) => std::slice::from_ref(m),
        RephotoSource::FoldModels(ms) => {
            if ms.len() != n_folds {
                return Err(Error::validation(format!("{} fold models for {n_folds} folds", ms.len())));
            }
            ms
        }
        RephotoSource::Directory(_) => {
            if mode != EvalMode::External {
                return Err(Error::validation(format!("mode {mode} needs a model, not a rephoto directory")));
            }
            return Ok(());
        }
    };
    for m in models {
        match (mode, m) {
            (EvalMode::InternalMesh, Model::Mesh(_)) => {}
            (EvalMode::InternalPointcloud, Model::Cloud(c)) => {
                if c.radii.is_none() {
                    return Err(Error::validation("point cloud has no splat radii"));
                }
            }
            (EvalMode::External, _) => {
                return Err(Error::validation("external mode needs a rephoto directory, not a model"));
            }
            (mode, _) => return Err(Error::validation(format!("model type does not match mode {mode}"))),
        }
    }
    Ok(())
}

fn evaluate_view(
    view: &View,
    fold: usize,
    source: &RephotoSource,
    cfg: &EvalConfig,
) -> Result<(ViewResult, f64)> {
    let start = Instant::now();
    let photo = view.load_photo()?;
    let (rephoto, mask) = match source {
        RephotoSource::Model(m) => render_rephoto(m, &view.camera, &cfg.render)?,
        RephotoSource::FoldModels(ms) => render_rephoto(&ms[fold], &view.camera, &cfg.render)?,
        RephotoSource::Directory(d) => load_rephoto(&fold_path(d, fold), view)?,
    };
    if let Some(dir) = &cfg.rephoto_dir {
        let dir = fold_path(dir, fold);
        rephoto.save(&rephoto_path(&dir, &view.id))?;
        mask.save(&mask_path(&dir, &view.id))?;
    }
    let images = score_pair(&photo, &rephoto, &mask, &cfg.metrics, &cfg.metric)?;
    if let Some(dir) = &cfg.error_dir {
        let dir = fold_path(dir, fold);
        for (m, img) in &images {
            img.save_pfm(&error_path(&dir, &view.id, *m))?;
        }
    }
    let errors: BTreeMap<Metric, Option<f64>> = images.iter().map(|(m, img)| (*m, mean_error(img))).collect();
    let result = ViewResult {
        view_id: view.id.clone(),
        fold,
        completeness: completeness(&mask),
        errors,
    };
    Ok((result, start.elapsed().as_secs_f64()))
}

/// Scores every held-out view. Without a plan all views are scored in a
/// single fold and the report is labeled as not cross-validated.
pub fn evaluate(
    manifest: &ViewManifest,
    source: &RephotoSource,
    plan: Option<&SplitPlan>,
    cfg: &EvalConfig,
) -> Result<EvaluationReport> {
    let start = Instant::now();
    cfg.validate()?;
    let folds: Vec<Vec<&View>> = match plan {
        Some(plan) => {
            plan.validate(manifest)?;
            plan.folds
                .iter()
                .map(|f| f.eval.iter().map(|id| manifest.get(id).expect("validated id")).collect())
                .collect()
        }
        None => vec![manifest.views().iter().collect()],
    };
    check_source(cfg.mode, source, folds.len())?;
    if let Some(dir) = &cfg.error_dir {
        for k in 0..folds.len() {
            crate::io::create_dir_all(&fold_path(dir, k))?;
        }
    }
    if let Some(dir) = &cfg.rephoto_dir {
        for k in 0..folds.len() {
            crate::io::create_dir_all(&fold_path(dir, k))?;
        }
    }

    let tasks: Vec<(usize, &View)> = folds
        .iter()
        .enumerate()
        .flat_map(|(k, views)| views.iter().map(move |v| (k, *v)))
        .collect();
    let results: Vec<(ViewResult, f64)> = tasks
        .par_iter()
        .map(|&(k, v)| evaluate_view(v, k, source, cfg))
        .collect::<Result<_>>()?;

    let timings = cfg.timings.then(|| Timings {
        total_seconds: start.elapsed().as_secs_f64(),
        per_view: results.iter().map(|(r, t)| (r.view_id.clone(), *t)).collect(),
    });
    let per_view: Vec<ViewResult> = results.into_iter().map(|(r, _)| r).collect();
    let config = ReportConfig {
        mode: cfg.mode,
        metrics: cfg.metrics.clone(),
        patch_size: cfg.metric.patch,
        min_valid_fraction: cfg.metric.min_valid_fraction,
        seed: cfg.seed,
        cross_validation: plan.is_some(),
        n_folds: folds.len(),
    };
    EvaluationReport::assemble(config, per_view, timings)
}

#[cfg(test)]
mod tests;
