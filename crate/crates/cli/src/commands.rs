use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rephoto::degrade::{degrade as degrade_mesh, DegradationParams};
use rephoto::errorproj::{export_error_mesh, project_errors};
use rephoto::geometry::{load_model, save_mesh_ply, Model, PlyFormat, PointCloud};
use rephoto::harness::{
    boxplot_stats, error_path, evaluate as run_evaluation, fold_path, mask_path, pearson, rephoto_path, render_rephoto,
    score_pair, split as split_views, EvalConfig, EvalMode, EvaluationReport, RephotoSource, SplitPlan,
    FOLD_PLACEHOLDER,
};
use rephoto::metrics::{completeness, mean_error, ErrorImage, Metric};
use rephoto::raster::{estimate_splat_radii, RenderOptions};
use rephoto::scene::{Mask, RgbImage, ViewManifest};
use rephoto::{io, Error};
use serde::Serialize;

use crate::config::Settings;
use crate::CliError;

type CmdResult = Result<(), CliError>;

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// View manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct RephotoArgs {
    /// View manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
    /// Mesh (PLY/OBJ) or point cloud (PLY)
    #[arg(long)]
    model: PathBuf,
    /// Neighbors used to estimate missing splat radii
    #[arg(long, default_value_t = 8)]
    splat_k: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    photo: PathBuf,
    #[arg(long)]
    rephoto: PathBuf,
    /// Completeness mask; every pixel counts as rendered without it
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// View manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
    /// Model to render; `{fold}` is replaced by the fold index
    #[arg(long, conflicts_with = "rephotos")]
    model: Option<PathBuf>,
    /// Directory of `<id>.png` and `<id>_mask.png` from an external renderer;
    /// `{fold}` is replaced by the fold index
    #[arg(long)]
    rephotos: Option<PathBuf>,
    /// Split plan from `rephoto split`; overrides --folds
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Neighbors used to estimate missing splat radii
    #[arg(long, default_value_t = 8)]
    splat_k: usize,
    /// Skip writing per-view error images
    #[arg(long)]
    no_error_images: bool,
    /// Also write the rendered rephotos and masks under `<out>/rephotos`
    #[arg(long)]
    save_rephotos: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// Second CSV joined on `view_id`; --y is read from it
    #[arg(long)]
    join: Option<PathBuf>,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// Input mesh (PLY/OBJ)
    #[arg(long)]
    model: PathBuf,
    /// Maximum per-channel color offset
    #[arg(long, default_value_t = 0.0)]
    n_tex: f64,
    /// Maximum displacement along the normal, as a fraction of the scene extent
    #[arg(long, default_value_t = 0.0)]
    n_geom: f64,
    /// Fraction of vertices to remove, in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    n_simp: f64,
    /// Noise cycles per bounding-box diagonal
    #[arg(long, default_value_t = 8.0)]
    frequency: f64,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Mesh the error images were computed for
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of `<id>_<metric>.pfm` files
    #[arg(long)]
    errors: PathBuf,
    /// Metric whose error images are projected
    #[arg(long, default_value = "ncc")]
    metric: Metric,
}

#[derive(Debug, Args)]
pub struct SynthArgs {}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Loads a model and shapes it for `mode`: meshes stay meshes, point-cloud
/// mode turns a mesh into its vertex cloud and estimates missing radii.
fn load_for_mode(path: &Path, mode: EvalMode, splat_k: usize) -> Result<Model, CliError> {
    let model = load_model(path)?;
    match mode {
        EvalMode::InternalMesh => Ok(Model::Mesh(model.into_mesh()?)),
        EvalMode::InternalPointcloud => {
            let cloud = match model {
                Model::Cloud(c) => c,
                Model::Mesh(m) => {
                    let colors = m
                        .colors
                        .ok_or_else(|| usage(format!("{}: mesh has no vertex colors to splat", path.display())))?;
                    PointCloud::new(m.vertices, colors)?
                }
            };
            let cloud = match cloud.radii {
                Some(_) => cloud,
                None => estimate_splat_radii(&cloud, splat_k, 1.0)?,
            };
            Ok(Model::Cloud(cloud))
        }
        EvalMode::External => Err(usage("external mode takes --rephotos, not --model")),
    }
}

pub fn split(args: &SplitArgs, s: &Settings) -> CmdResult {
    let folds = s.folds.ok_or_else(|| usage("split needs --folds"))?;
    let manifest = ViewManifest::load(&args.manifest)?;
    let plan = split_views(&manifest, folds, s.seed)?;
    let out = s.out_or("split.json");
    plan.save(&out)?;
    for (k, fold) in plan.folds.iter().enumerate() {
        eprintln!("fold {k}: {} eval, {} train", fold.eval.len(), fold.train.len());
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

pub fn rephoto_cmd(args: &RephotoArgs, s: &Settings) -> CmdResult {
    let manifest = ViewManifest::load(&args.manifest)?;
    let model = load_for_mode(&args.model, s.mode, args.splat_k)?;
    let out = s.out_or("rephotos");
    io::create_dir_all(&out)?;
    let opts = RenderOptions::default();
    for view in manifest.views() {
        let (img, mask) = render_rephoto(&model, &view.camera, &opts)?;
        img.save(&rephoto_path(&out, &view.id))?;
        mask.save(&mask_path(&out, &view.id))?;
        eprintln!("{}: completeness {:.4}", view.id, completeness(&mask));
    }
    eprintln!("wrote {} rephotos to {}", manifest.len(), out.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |v| v.to_string())
}

pub fn score(args: &ScoreArgs, s: &Settings) -> CmdResult {
    let photo = RgbImage::load(&args.photo)?;
    let rephoto = RgbImage::load(&args.rephoto)?;
    let mask = match &args.mask {
        Some(p) => Mask::load(p)?,
        None => Mask::new(rephoto.width(), rephoto.height(), true),
    };
    let images = score_pair(&photo, &rephoto, &mask, &s.metrics, &s.metric)?;
    println!("completeness {}", completeness(&mask));
    for (m, img) in &images {
        println!("{m} {}", fmt_opt(mean_error(img)));
    }
    if let Some(dir) = &s.out {
        io::create_dir_all(dir)?;
        for (m, img) in &images {
            img.save_pfm(&dir.join(format!("{m}.pfm")))?;
        }
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, s: &Settings) -> CmdResult {
    let manifest = ViewManifest::load(&args.manifest)?;
    let plan = match (&args.plan, s.folds) {
        (Some(p), _) => Some(SplitPlan::load(p)?),
        (None, Some(n)) => Some(split_views(&manifest, n, s.seed)?),
        (None, None) => None,
    };
    let n_folds = plan.as_ref().map_or(1, |p| p.folds.len());
    let source = match (&args.model, &args.rephotos) {
        (Some(model), None) => {
            if model.to_string_lossy().contains(FOLD_PLACEHOLDER) {
                let models = (0..n_folds)
                    .map(|k| load_for_mode(&fold_path(model, k), s.mode, args.splat_k))
                    .collect::<Result<_, _>>()?;
                RephotoSource::FoldModels(models)
            } else {
                RephotoSource::Model(load_for_mode(model, s.mode, args.splat_k)?)
            }
        }
        (None, Some(dir)) => RephotoSource::Directory(dir.clone()),
        _ => return Err(usage("evaluate needs --model or --rephotos")),
    };

    let out = s.out_or("evaluation");
    io::create_dir_all(&out)?;
    let cfg = EvalConfig {
        mode: s.mode,
        metrics: s.metrics.clone(),
        metric: s.metric,
        seed: s.seed,
        render: RenderOptions::default(),
        timings: s.timings,
        error_dir: (!args.no_error_images).then(|| out.join("errors")),
        rephoto_dir: args.save_rephotos.then(|| out.join("rephotos")),
    };
    let report = run_evaluation(&manifest, &source, plan.as_ref(), &cfg)?;
    report.save_json(&out.join("report.json"))?;
    report.save_csv(&out.join("report.csv"))?;
    print_summary(&report);
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn print_summary(report: &EvaluationReport) {
    for v in &report.per_view {
        let mut line = format!("{} fold {} completeness {:.4}", v.view_id, v.fold, v.completeness);
        for (m, e) in &v.errors {
            line.push_str(&format!(" {m} {}", e.map_or("null".into(), |e| format!("{e:.6}"))));
        }
        eprintln!("{line}");
    }
    let agg = &report.aggregate;
    eprintln!("aggregate over {} views", agg.views);
    eprintln!("  completeness {:.6}", agg.completeness);
    for (m, e) in &agg.errors {
        let nulls = agg.null_views.get(m).copied().unwrap_or(0);
        let e = e.map_or("null".into(), |e| format!("{e:.6}"));
        eprintln!("  {m:<12} {e} ({nulls} views without support)");
    }
}

type Table = Vec<BTreeMap<String, String>>;

fn read_table(path: &Path) -> Result<Table, CliError> {
    let bytes = io::read_bytes(path)?;
    let parse = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(parse)?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(parse)?;
        rows.push(headers.iter().zip(record.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect());
    }
    Ok(rows)
}

/// Parses one cell; empty cells are missing values.
fn cell(row: &BTreeMap<String, String>, column: &str, path: &Path) -> Result<Option<f64>, CliError> {
    let raw = row
        .get(column)
        .ok_or_else(|| usage(format!("{}: no column {column:?}", path.display())))?;
    if raw.trim().is_empty() || raw.trim() == "null" {
        return Ok(None);
    }
    raw.trim().parse().map(Some).map_err(|_| {
        Error::Parse {
            path: path.to_path_buf(),
            msg: format!("column {column:?}: {raw:?} is not a number"),
        }
        .into()
    })
}

#[derive(Serialize)]
struct StatsOutput {
    column: String,
    n: usize,
    missing: usize,
    #[serde(flatten)]
    stats: rephoto::harness::BoxplotStats,
}

pub fn stats(args: &StatsArgs, s: &Settings) -> CmdResult {
    let rows = read_table(&args.input)?;
    let mut values = Vec::new();
    let mut missing = 0;
    for row in &rows {
        match cell(row, &args.column, &args.input)? {
            Some(v) => values.push(v),
            None => missing += 1,
        }
    }
    let stats = boxplot_stats(&values)?;
    println!("n {}", values.len());
    println!("missing {missing}");
    println!("min {}", stats.min);
    println!("q1 {}", stats.q1);
    println!("median {}", stats.median);
    println!("q3 {}", stats.q3);
    println!("max {}", stats.max);
    if let Some(out) = &s.out {
        let body = StatsOutput {
            column: args.column.clone(),
            n: values.len(),
            missing,
            stats,
        };
        let mut json = serde_json::to_string_pretty(&body).map_err(|e| Error::Invariant(e.to_string()))?;
        json.push('\n');
        io::write_bytes_atomic(out, json.as_bytes())?;
    }
    Ok(())
}

pub fn correlate(args: &CorrelateArgs, _s: &Settings) -> CmdResult {
    let left = read_table(&args.input)?;
    let (xs, ys) = match &args.join {
        None => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for row in &left {
                if let (Some(x), Some(y)) = (cell(row, &args.x, &args.input)?, cell(row, &args.y, &args.input)?) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            (xs, ys)
        }
        Some(join) => {
            let right = read_table(join)?;
            let mut by_id = BTreeMap::new();
            for row in &right {
                let id = row.get("view_id").ok_or_else(|| usage(format!("{}: no view_id column", join.display())))?;
                by_id.insert(id.clone(), row);
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for row in &left {
                let id = row
                    .get("view_id")
                    .ok_or_else(|| usage(format!("{}: no view_id column", args.input.display())))?;
                let Some(other) = by_id.get(id) else { continue };
                if let (Some(x), Some(y)) = (cell(row, &args.x, &args.input)?, cell(other, &args.y, join)?) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            (xs, ys)
        }
    };
    let r = pearson(&xs, &ys)?;
    println!("pearson {r}");
    println!("n {}", xs.len());
    Ok(())
}

pub fn degrade(args: &DegradeArgs, s: &Settings) -> CmdResult {
    let mesh = load_model(&args.model)?.into_mesh()?;
    let params = DegradationParams {
        n_tex: args.n_tex,
        n_geom: args.n_geom,
        n_simp: args.n_simp,
        seed: s.seed,
        frequency: args.frequency,
    };
    let out_mesh = degrade_mesh(&mesh, &params)?;
    let out = s.out_or("degraded.ply");
    save_mesh_ply(&out_mesh, &out, PlyFormat::BinaryLittleEndian)?;
    eprintln!(
        "{} -> {} vertices, {} -> {} faces; wrote {}",
        mesh.vertices.len(),
        out_mesh.vertices.len(),
        mesh.faces.len(),
        out_mesh.faces.len(),
        out.display()
    );
    Ok(())
}

pub fn project(args: &ProjectArgs, s: &Settings) -> CmdResult {
    let mesh = load_model(&args.model)?.into_mesh()?;
    let manifest = ViewManifest::load(&args.manifest)?;
    let mut views = Vec::new();
    for view in manifest.views() {
        let path = error_path(&args.errors, &view.id, args.metric);
        if !path.exists() {
            continue;
        }
        views.push((view.camera.clone(), ErrorImage::load_pfm(&path)?));
    }
    if views.is_empty() {
        return Err(usage(format!(
            "no {} error images for this manifest in {}",
            args.metric,
            args.errors.display()
        )));
    }
    let model = Model::Mesh(mesh);
    let field = project_errors(&model, &views, &RenderOptions::default())?;
    let Model::Mesh(mesh) = model else { unreachable!() };
    let out = s.out_or("errors.ply");
    export_error_mesh(&mesh, &field, &out)?;
    eprintln!(
        "{} of {} vertices observed in {} views; wrote {}",
        field.covered_count(),
        field.len(),
        views.len(),
        out.display()
    );
    Ok(())
}

pub fn synth(_args: &SynthArgs, s: &Settings) -> CmdResult {
    let out = s.out_or("scene");
    let manifest = rephoto::synth::procedural_scene().write_dataset(&out)?;
    eprintln!("wrote model.ply, views.json and {} photos to {}", manifest.len(), out.display());
    Ok(())
}
