//! Generated operating conditions.
//!
//! A condition abstracts temperature, pressure and mixture ratio: the
//! temperature-like value `theta` multiplies each rate constant by
//! `exp(a_i (1 - 1/theta))` with a per-reaction activation `a_i`, the
//! pressure-like value scales every initial concentration, and the
//! equivalence-like value scales the fuel species.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sparsemech_core::{Condition, Mechanism};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionSource {
    /// `sample:N`, uniformly random in the configured ranges.
    Sample(usize),
    /// `grid:AxBxC`, evenly spaced temperature x pressure x equivalence levels.
    Grid(usize, usize, usize),
    /// `inline:x x x | x x x`, initial states with unit rate multipliers.
    Inline(Vec<Vec<f64>>),
    /// CSV with header `id,X_<species>...` and optional `scale_<i>` columns.
    File(std::path::PathBuf),
}

impl ConditionSource {
    pub fn parse(s: &str, base: &Path) -> Result<Self> {
        let s = s.trim();
        let bad = |msg: String| Error::Config(format!("conditions `{s}`: {msg}"));
        if let Some(n) = s.strip_prefix("sample:") {
            let n: usize = n.trim().parse().map_err(|_| bad("expected sample:<count>".into()))?;
            if n == 0 {
                return Err(bad("count must be positive".into()));
            }
            return Ok(ConditionSource::Sample(n));
        }
        if let Some(g) = s.strip_prefix("grid:") {
            let dims: Vec<usize> = g
                .split('x')
                .map(|d| d.trim().parse().map_err(|_| bad("expected grid:AxBxC".into())))
                .collect::<Result<_>>()?;
            return match dims.as_slice() {
                [a, b, c] if *a > 0 && *b > 0 && *c > 0 => Ok(ConditionSource::Grid(*a, *b, *c)),
                _ => Err(bad("expected three positive grid sizes".into())),
            };
        }
        if let Some(list) = s.strip_prefix("inline:") {
            let states = list
                .split('|')
                .map(|row| {
                    row.split_whitespace()
                        .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}`"))))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(ConditionSource::Inline(states));
        }
        Ok(ConditionSource::File(base.join(s)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRanges {
    pub theta: (f64, f64),
    pub pressure: (f64, f64),
    pub equivalence: (f64, f64),
    pub activation: (f64, f64),
    /// Initial concentration of every species other than fuel and oxidizer, before pressure scaling.
    pub trace: f64,
}

impl Default for ConditionRanges {
    fn default() -> Self {
        Self { theta: (0.85, 1.2), pressure: (0.5, 2.0), equivalence: (0.5, 2.0), activation: (0.0, 4.0), trace: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionGenerator {
    pub fuel: usize,
    pub oxidizer: usize,
    pub seed: u64,
    pub ranges: ConditionRanges,
}

impl ConditionGenerator {
    fn build(&self, mech: &Mechanism, id: u64, activation: &[f64], theta: f64, p: f64, phi: f64) -> Condition {
        let mut x = vec![self.ranges.trace * p; mech.n_species()];
        x[self.fuel] = p * phi;
        x[self.oxidizer] = p;
        let rate_scale = activation.iter().map(|a| (a * (1.0 - 1.0 / theta)).exp()).collect();
        Condition { id, initial_concentrations: x, rate_scale }
    }

    fn activations(&self, rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
        let (lo, hi) = self.ranges.activation;
        (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
    }
}

fn level(range: (f64, f64), i: usize, n: usize) -> f64 {
    if n == 1 {
        0.5 * (range.0 + range.1)
    } else {
        range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
    }
}

/// Expands `source` into conditions with ids `0..n` (files keep their own ids).
pub fn generate_conditions(
    mech: &Mechanism,
    source: &ConditionSource,
    gen: &ConditionGenerator,
) -> Result<Vec<Condition>> {
    let mut rng = ChaCha20Rng::seed_from_u64(gen.seed ^ 0x636f_6e64_6974_696f);
    let nr = mech.n_reactions();
    let r = &gen.ranges;
    let conds = match source {
        ConditionSource::Sample(n) => {
            let act = gen.activations(&mut rng, nr);
            let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
            (0..*n as u64)
                .map(|id| {
                    let (theta, p, phi) = (draw(r.theta), draw(r.pressure), draw(r.equivalence));
                    gen.build(mech, id, &act, theta, p, phi)
                })
                .collect()
        }
        ConditionSource::Grid(a, b, c) => {
            let act = gen.activations(&mut rng, nr);
            let mut out = Vec::with_capacity(a * b * c);
            for i in 0..*a {
                for j in 0..*b {
                    for k in 0..*c {
                        let id = out.len() as u64;
                        out.push(gen.build(
                            mech,
                            id,
                            &act,
                            level(r.theta, i, *a),
                            level(r.pressure, j, *b),
                            level(r.equivalence, k, *c),
                        ));
                    }
                }
            }
            out
        }
        ConditionSource::Inline(states) => {
            states.iter().enumerate().map(|(id, x)| Condition::new(id as u64, x.clone(), nr)).collect()
        }
        ConditionSource::File(path) => parse_conditions_csv(mech, &read_to_string(path)?, &path.display().to_string())?,
    };
    for c in &conds {
        c.validate(mech)?;
    }
    Ok(conds)
}

pub fn parse_conditions_csv(mech: &Mechanism, text: &str, what: &str) -> Result<Vec<Condition>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(what, 1, "empty conditions file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"id") {
        return Err(Error::parse(what, hl + 1, "first column must be `id`"));
    }
    let mut species_col = vec![None; mech.n_species()];
    let mut scale_col = vec![None; mech.n_reactions()];
    for (c, name) in cols.iter().enumerate().skip(1) {
        if let Some(s) = name.strip_prefix("X_") {
            let i =
                mech.species_index(s).ok_or_else(|| Error::parse(what, hl + 1, format!("unknown species `{s}`")))?;
            species_col[i] = Some(c);
        } else if let Some(r) = name.strip_prefix("scale_") {
            let i: usize = r.parse().map_err(|_| Error::parse(what, hl + 1, format!("bad column `{name}`")))?;
            if i == 0 || i > mech.n_reactions() {
                return Err(Error::parse(
                    what,
                    hl + 1,
                    format!("column `{name}` out of range (reactions are 1-based)"),
                ));
            }
            scale_col[i - 1] = Some(c);
        } else {
            return Err(Error::parse(what, hl + 1, format!("unknown column `{name}`")));
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(Error::parse(what, n, format!("expected {} fields, found {}", cols.len(), cells.len())));
        }
        let num =
            |c: usize| cells[c].parse::<f64>().map_err(|_| Error::parse(what, n, format!("bad number `{}`", cells[c])));
        let id: u64 = cells[0].parse().map_err(|_| Error::parse(what, n, "bad id"))?;
        let x = species_col.iter().map(|c| c.map_or(Ok(0.0), num)).collect::<Result<Vec<f64>>>()?;
        let rate_scale = scale_col.iter().map(|c| c.map_or(Ok(1.0), num)).collect::<Result<Vec<f64>>>()?;
        out.push(Condition { id, initial_concentrations: x, rate_scale });
    }
    if out.is_empty() {
        return Err(Error::parse(what, 0, "no conditions"));
    }
    Ok(out)
}
