//! Flat `key=value` experiment configuration.
//!
//! ```text
//! mechanism = h2o2_58.mech
//! conditions = sample:48
//! fuel = H2
//! oxidizer = O2
//! dt = 0.001
//! T = 200
//! substeps = 4
//! sigma = 0
//! seed = 7
//! holdout = 46,47
//! epsilons = 0.05,0.1,0.2
//! solver = relaxed
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use sparsemech_core::{
    Condition, ExactLimits, NoiseSpec, ReduceConfig, RelaxedSettings, Rounding, SimulationSettings, SolverChoice,
    ToleranceMode,
};

use crate::conditions::{ConditionGenerator, ConditionRanges, ConditionSource};
use crate::error::{read_to_string, Error, Result};
use crate::formats::parse_key_values;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Relaxed,
}

impl SolverKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(SolverKind::Exact),
            "relaxed" => Some(SolverKind::Relaxed),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Relaxed => "relaxed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mechanism_path: PathBuf,
    pub dt: f64,
    pub horizon: usize,
    pub substeps: usize,
    pub sigma: f64,
    pub seed: u64,
    pub conditions: ConditionSource,
    pub fuel: Option<String>,
    pub oxidizer: Option<String>,
    /// `None` means every condition not held out.
    pub train: Option<Vec<u64>>,
    /// `None` means the last two conditions.
    pub holdout: Option<Vec<u64>>,
    pub epsilons: Vec<f64>,
    pub solver: SolverKind,
    pub tolerance_mode: ToleranceMode,
    pub prune_min_count: usize,
    pub output_dir: PathBuf,
    pub node_limit: usize,
    pub relaxed_tol: f64,
    pub relaxed_max_iter: usize,
    /// 0 selects threshold rounding, otherwise the number of Bernoulli draws.
    pub rounding_draws: usize,
    /// Text the hash is computed from: every setting except the output directory.
    canonical: String,
}

const KEYS: &[&str] = &[
    "mechanism",
    "dt",
    "T",
    "substeps",
    "sigma",
    "seed",
    "conditions",
    "fuel",
    "oxidizer",
    "train",
    "holdout",
    "epsilons",
    "solver",
    "tolerance_mode",
    "prune_min_count",
    "output_dir",
    "node_limit",
    "relaxed_tol",
    "relaxed_max_iter",
    "rounding_draws",
];

fn parse_num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Config(format!("bad value for `{key}`: `{v}`"))),
    }
}

/// `0-3,7` expands to `0,1,2,3,7`.
pub fn parse_id_list(s: &str) -> Result<Vec<u64>> {
    let mut ids = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Config(format!("bad condition id list entry `{part}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                ids.extend(a..=b);
            }
            None => ids.push(part.parse().map_err(|_| bad())?),
        }
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

pub fn parse_epsilons(s: &str) -> Result<Vec<f64>> {
    let eps = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| Error::Config(format!("bad epsilon `{p}`"))))
        .collect::<Result<Vec<f64>>>()?;
    if eps.is_empty() {
        return Err(Error::Config("epsilons must be non-empty".into()));
    }
    if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Config(format!("epsilon {e} must be positive")));
    }
    let mut sorted = eps.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("epsilons must be distinct".into()));
    }
    Ok(eps)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base: &Path, what: &str) -> Result<Self> {
        let kv = parse_key_values(text, what)?;
        if let Some(k) = kv.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let need = |k: &str| kv.get(k).ok_or_else(|| Error::Config(format!("missing key `{k}`")));
        let mechanism_path = base.join(need("mechanism")?);
        if !mechanism_path.is_file() {
            return Err(Error::Config(format!("mechanism file {} not found", mechanism_path.display())));
        }
        let conditions = ConditionSource::parse(need("conditions")?, base)?;
        if let ConditionSource::File(p) = &conditions {
            if !p.is_file() {
                return Err(Error::Config(format!("conditions file {} not found", p.display())));
            }
        }
        let defaults = SimulationSettings::default();
        let solver = match kv.get("solver") {
            None => SolverKind::Relaxed,
            Some(s) => SolverKind::parse(s).ok_or_else(|| Error::Config(format!("unknown solver `{s}`")))?,
        };
        let tolerance_mode = match kv.get("tolerance_mode") {
            None => ToleranceMode::Relative,
            Some(s) => ToleranceMode::parse(s).ok_or_else(|| Error::Config(format!("unknown tolerance mode `{s}`")))?,
        };
        let relaxed = RelaxedSettings::default();
        let mut cfg = ExperimentConfig {
            mechanism_path,
            dt: parse_num(&kv, "dt", defaults.dt)?,
            horizon: parse_num(&kv, "T", defaults.horizon)?,
            substeps: parse_num(&kv, "substeps", defaults.substeps)?,
            sigma: parse_num(&kv, "sigma", 0.0)?,
            seed: parse_num(&kv, "seed", 0)?,
            conditions,
            fuel: kv.get("fuel").cloned(),
            oxidizer: kv.get("oxidizer").cloned(),
            train: kv.get("train").map(|s| parse_id_list(s)).transpose()?,
            holdout: kv.get("holdout").map(|s| parse_id_list(s)).transpose()?,
            epsilons: parse_epsilons(kv.get("epsilons").map_or("0.05,0.1,0.2", String::as_str))?,
            solver,
            tolerance_mode,
            prune_min_count: parse_num(&kv, "prune_min_count", 0)?,
            output_dir: base.join(kv.get("output_dir").map_or("out", String::as_str)),
            node_limit: parse_num(&kv, "node_limit", ExactLimits::default().node_limit)?,
            relaxed_tol: parse_num(&kv, "relaxed_tol", relaxed.tol)?,
            relaxed_max_iter: parse_num(&kv, "relaxed_max_iter", relaxed.max_iter)?,
            rounding_draws: parse_num(&kv, "rounding_draws", 0)?,
            canonical: String::new(),
        };
        cfg.settings().validate()?;
        if let (Some(train), Some(holdout)) = (&cfg.train, &cfg.holdout) {
            if let Some(id) = train.iter().find(|id| holdout.contains(id)) {
                return Err(Error::Config(format!("condition {id} is in both train and holdout")));
            }
        }
        if cfg.node_limit == 0 {
            return Err(Error::Config("node_limit must be positive".into()));
        }
        // hash over the file's own settings, paths as written
        let mut canonical = String::new();
        for (k, v) in kv.iter().filter(|(k, _)| k.as_str() != "output_dir") {
            let _ = writeln!(canonical, "{k}={v}");
        }
        cfg.canonical = canonical;
        cfg.refresh_canonical();
        Ok(cfg)
    }

    /// Re-derives the hashed text after command-line overrides.
    pub fn refresh_canonical(&mut self) {
        let mut kv: BTreeMap<String, String> = self
            .canonical
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        let eps: Vec<String> = self.epsilons.iter().map(|e| format!("{e:?}")).collect();
        kv.insert("epsilons".into(), eps.join(","));
        kv.insert("solver".into(), self.solver.as_str().into());
        kv.insert("tolerance_mode".into(), self.tolerance_mode.as_str().into());
        let mut text = String::new();
        for (k, v) in &kv {
            let _ = writeln!(text, "{k}={v}");
        }
        self.canonical = text;
    }

    pub fn config_sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical.as_bytes()))
    }

    pub fn settings(&self) -> SimulationSettings {
        SimulationSettings {
            dt: self.dt,
            horizon: self.horizon,
            substeps: self.substeps,
            noise: NoiseSpec { sigma: self.sigma, seed: self.seed },
            ..Default::default()
        }
    }

    pub fn generator(&self, mech: &sparsemech_core::Mechanism) -> Result<ConditionGenerator> {
        let find = |name: &Option<String>, default: usize, key: &str| -> Result<usize> {
            match name {
                None => Ok(default.min(mech.n_species() - 1)),
                Some(n) => mech
                    .species_index(n)
                    .ok_or_else(|| Error::Config(format!("`{key}` species `{n}` not in mechanism"))),
            }
        };
        Ok(ConditionGenerator {
            fuel: find(&self.fuel, 0, "fuel")?,
            oxidizer: find(&self.oxidizer, 1, "oxidizer")?,
            seed: self.seed,
            ranges: ConditionRanges::default(),
        })
    }

    pub fn solver_choice(&self) -> SolverChoice {
        match self.solver {
            SolverKind::Exact => SolverChoice::Exact(ExactLimits { node_limit: self.node_limit, ..Default::default() }),
            SolverKind::Relaxed => SolverChoice::Relaxed {
                settings: RelaxedSettings {
                    tol: self.relaxed_tol,
                    max_iter: self.relaxed_max_iter,
                    ..Default::default()
                },
                rounding: if self.rounding_draws == 0 {
                    Rounding::default()
                } else {
                    Rounding::Randomized { draws: self.rounding_draws, seed: self.seed }
                },
            },
        }
    }

    pub fn reduce_config(&self) -> ReduceConfig {
        ReduceConfig {
            epsilon: self.epsilons[0],
            tolerance_mode: self.tolerance_mode,
            solver: self.solver_choice(),
            prune_min_count: self.prune_min_count,
        }
    }

    /// Resolves the train and holdout id lists against the generated conditions.
    pub fn split(&self, conds: &[Condition]) -> Result<(Vec<u64>, Vec<u64>)> {
        let mut all: Vec<u64> = conds.iter().map(|c| c.id).collect();
        all.sort_unstable();
        let holdout = match &self.holdout {
            Some(h) => h.clone(),
            None => all.iter().rev().take(2.min(all.len().saturating_sub(1))).rev().copied().collect(),
        };
        let train = match &self.train {
            Some(t) => t.clone(),
            None => all.iter().copied().filter(|id| !holdout.contains(id)).collect(),
        };
        if let Some(id) = train.iter().chain(&holdout).find(|id| !all.contains(id)) {
            return Err(Error::Config(format!("condition id {id} is not among the generated conditions")));
        }
        if let Some(id) = train.iter().find(|id| holdout.contains(id)) {
            return Err(Error::Config(format!("condition {id} is in both train and holdout")));
        }
        Ok((train, holdout))
    }
}
