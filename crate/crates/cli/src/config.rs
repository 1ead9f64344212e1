//! Global flags, the optional JSON config file, and their merge.

use std::path::{Path, PathBuf};

use clap::Args;
use rephoto::harness::EvalMode;
use rephoto::metrics::{Metric, MetricConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Patch side length in pixels, odd and at least 3 [default: 15]
    #[arg(long, global = true, value_name = "N")]
    pub patch_size: Option<u32>,

    /// Minimum fraction of a patch that must be rendered [default: 0.5]
    #[arg(long, global = true, value_name = "F")]
    pub min_valid_fraction: Option<f64>,

    /// Comma-separated metrics from cbcr, ncc, zssd, dssim, census [default: ncc,cbcr]
    #[arg(long, global = true, value_name = "LIST")]
    pub metrics: Option<String>,

    /// Cross-validation folds; without it every view is scored in one
    /// fold and the report is marked as not cross-validated
    #[arg(long, global = true, value_name = "N")]
    pub folds: Option<usize>,

    /// Seed for fold shuffling and degradation noise [default: 0]
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,

    /// internal-mesh, internal-pointcloud or external [default: internal-mesh]
    #[arg(long, global = true, value_name = "MODE")]
    pub mode: Option<String>,

    /// Output file or directory, depending on the command
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// JSON file with defaults for any of these flags; flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Record wall-clock timings in reports
    #[arg(long, global = true)]
    pub timings: bool,
}

/// Config file contents. Keys mirror the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    patch_size: Option<u32>,
    min_valid_fraction: Option<f64>,
    metrics: Option<MetricList>,
    folds: Option<usize>,
    seed: Option<u64>,
    mode: Option<String>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    timings: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MetricList {
    Names(Vec<String>),
    Joined(String),
}

impl MetricList {
    fn joined(self) -> String {
        match self {
            MetricList::Names(v) => v.join(","),
            MetricList::Joined(s) => s,
        }
    }
}

/// Effective settings after merging defaults, config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub metric: MetricConfig,
    pub metrics: Vec<Metric>,
    pub folds: Option<usize>,
    pub seed: u64,
    pub mode: EvalMode,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timings: bool,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Settings, CliError> {
        let file = match &args.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let metrics = args
            .metrics
            .clone()
            .or(file.metrics.map(MetricList::joined))
            .unwrap_or_else(|| "ncc,cbcr".into());
        let mode = args.mode.clone().or(file.mode).unwrap_or_else(|| "internal-mesh".into());
        let settings = Settings {
            metric: MetricConfig {
                patch: args.patch_size.or(file.patch_size).unwrap_or(15),
                min_valid_fraction: args.min_valid_fraction.or(file.min_valid_fraction).unwrap_or(0.5),
            },
            metrics: Metric::parse_list(&metrics)?,
            folds: args.folds.or(file.folds),
            seed: args.seed.or(file.seed).unwrap_or(0),
            mode: mode.parse()?,
            out: args.out.clone().or(file.out),
            threads: args.threads.or(file.threads),
            timings: args.timings || file.timings.unwrap_or(false),
        };
        settings.metric.validate()?;
        if settings.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(settings)
    }

    pub fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| rephoto::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        rephoto::Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }
        .into()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = Settings::resolve(&GlobalArgs::default()).unwrap();
        assert_eq!(s.metric.patch, 15);
        assert_eq!(s.metrics, vec![Metric::Ncc, Metric::Cbcr]);
        assert_eq!(s.seed, 0);
        assert_eq!(s.mode, EvalMode::InternalMesh);
        assert_eq!(s.folds, None);
        assert!(!s.timings);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"patch-size": 7, "metrics": ["census"], "seed": 3, "folds": 4}"#).unwrap();
        let args = GlobalArgs {
            config: Some(path),
            seed: Some(9),
            ..Default::default()
        };
        let s = Settings::resolve(&args).unwrap();
        assert_eq!(s.metric.patch, 7);
        assert_eq!(s.metrics, vec![Metric::Census]);
        assert_eq!(s.seed, 9);
        assert_eq!(s.folds, Some(4));
    }

    #[test]
    fn rejects_bad_values() {
        let even = GlobalArgs {
            patch_size: Some(4),
            ..Default::default()
        };
        assert!(Settings::resolve(&even).is_err());
        let unknown = GlobalArgs {
            metrics: Some("ncc,psnr".into()),
            ..Default::default()
        };
        assert!(Settings::resolve(&unknown).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"patch_sizes": 7}"#).unwrap();
        let typo = GlobalArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(Settings::resolve(&typo), Err(CliError::Core(rephoto::Error::Parse { .. }))));
    }
}
