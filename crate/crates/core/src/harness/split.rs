use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::scene::ViewManifest;

/// One cross-validation fold: views the reconstruction may use and the
/// held-out views it is scored on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub eval: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Shuffles the view ids with `seed`, then deals them round-robin into
/// `n_folds` evaluation sets. Each fold trains on everything else.
pub fn split(manifest: &ViewManifest, n_folds: usize, seed: u64) -> Result<SplitPlan> {
    let n = manifest.len();
    if n_folds < 2 || n_folds > n {
        return Err(Error::validation(format!(
            "fold count {n_folds} out of range [2, {n}]"
        )));
    }
    let mut ids: Vec<&str> = manifest.ids();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut evals: Vec<HashSet<&str>> = vec![HashSet::new(); n_folds];
    for (i, id) in ids.iter().enumerate() {
        evals[i % n_folds].insert(id);
    }
    // Both lists keep manifest order.
    let folds = evals
        .iter()
        .map(|eval| {
            let (e, t): (Vec<&str>, Vec<&str>) = manifest.ids().into_iter().partition(|id| eval.contains(id));
            Fold {
                train: t.into_iter().map(String::from).collect(),
                eval: e.into_iter().map(String::from).collect(),
            }
        })
        .collect();
    Ok(SplitPlan { n_folds, seed, folds })
}

impl SplitPlan {
    /// Checks the plan is a partition of `manifest`'s views.
    pub fn validate(&self, manifest: &ViewManifest) -> Result<()> {
        if self.folds.len() != self.n_folds {
            return Err(Error::validation(format!(
                "plan declares {} folds but lists {}",
                self.n_folds,
                self.folds.len()
            )));
        }
        let all: HashSet<&str> = manifest.ids().into_iter().collect();
        let mut evaluated = HashSet::new();
        for (k, fold) in self.folds.iter().enumerate() {
            if fold.eval.is_empty() {
                return Err(Error::validation(format!("fold {k} has an empty evaluation set")));
            }
            let mut seen = HashSet::new();
            for id in fold.train.iter().chain(&fold.eval) {
                if !all.contains(id.as_str()) {
                    return Err(Error::validation(format!("fold {k}: unknown view {id:?}")));
                }
                if !seen.insert(id.as_str()) {
                    return Err(Error::validation(format!("fold {k}: view {id:?} listed twice")));
                }
            }
            if seen.len() != all.len() {
                return Err(Error::validation(format!("fold {k} does not cover every view")));
            }
            for id in &fold.eval {
                if !evaluated.insert(id.as_str()) {
                    return Err(Error::validation(format!("view {id:?} is evaluated in several folds")));
                }
            }
        }
        if evaluated.len() != all.len() {
            return Err(Error::validation("some views are never evaluated"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Invariant(e.to_string()))?;
        io::write_bytes_atomic(path, json.as_bytes())
    }
}
