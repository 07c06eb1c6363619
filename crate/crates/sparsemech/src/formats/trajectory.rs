//! Trajectory CSV plus key=value sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sparsemech_core::{Mechanism, SimulationSettings, Trajectory};

use crate::error::{Error, Result};
use crate::formats::{parse_key_values, Provenance};

/// Sidecar contents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub condition_id: u64,
    pub dt: f64,
    pub horizon: usize,
    pub substeps: usize,
    pub sigma: f64,
    /// Noise seed actually used for this condition.
    pub seed: u64,
    pub mechanism_sha256: String,
    pub clipped: usize,
}

impl TrajectoryMeta {
    pub fn new(tr: &Trajectory, settings: &SimulationSettings, mechanism_sha256: &str) -> Self {
        Self {
            condition_id: tr.condition_id,
            dt: tr.dt,
            horizon: tr.horizon(),
            substeps: settings.substeps,
            sigma: settings.noise.sigma,
            seed: settings.noise.for_condition(tr.condition_id).seed,
            mechanism_sha256: mechanism_sha256.to_string(),
            clipped: tr.clipped,
        }
    }
}

pub fn write_trajectory_csv(mech: &Mechanism, tr: &Trajectory) -> String {
    let mut out = String::from("t");
    for s in mech.species() {
        let _ = write!(out, ",X_{}", s.name);
    }
    for i in 1..=mech.n_reactions() {
        let _ = write!(out, ",r_{i}");
    }
    out.push('\n');
    for (k, x) in tr.states.iter().enumerate() {
        let _ = write!(out, "{}", k + 1);
        for v in x {
            let _ = write!(out, ",{v:?}");
        }
        match tr.rates.get(k) {
            Some(r) => {
                for v in r {
                    let _ = write!(out, ",{v:?}");
                }
            }
            None => out.push_str(&",".repeat(mech.n_reactions())),
        }
        out.push('\n');
    }
    out
}

pub fn write_sidecar(meta: &TrajectoryMeta, prov: &Provenance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "condition_id={}", meta.condition_id);
    let _ = writeln!(out, "dt={:?}", meta.dt);
    let _ = writeln!(out, "T={}", meta.horizon);
    let _ = writeln!(out, "substeps={}", meta.substeps);
    let _ = writeln!(out, "sigma={:?}", meta.sigma);
    let _ = writeln!(out, "seed={}", meta.seed);
    let _ = writeln!(out, "mechanism_sha256={}", meta.mechanism_sha256);
    let _ = writeln!(out, "clipped={}", meta.clipped);
    prov.write_key_values(&mut out);
    out
}

fn field<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str, what: &str) -> Result<T> {
    let v = kv.get(key).ok_or_else(|| Error::parse(what, 0, format!("missing key `{key}`")))?;
    v.parse().map_err(|_| Error::parse(what, 0, format!("bad value for `{key}`: `{v}`")))
}

pub fn parse_sidecar(text: &str, what: &str) -> Result<TrajectoryMeta> {
    let kv = parse_key_values(text, what)?;
    Ok(TrajectoryMeta {
        condition_id: field(&kv, "condition_id", what)?,
        dt: field(&kv, "dt", what)?,
        horizon: field(&kv, "T", what)?,
        substeps: field(&kv, "substeps", what)?,
        sigma: field(&kv, "sigma", what)?,
        seed: field(&kv, "seed", what)?,
        mechanism_sha256: field(&kv, "mechanism_sha256", what)?,
        clipped: field(&kv, "clipped", what)?,
    })
}

/// Reads a trajectory written by [`write_trajectory_csv`].
pub fn parse_trajectory_csv(mech: &Mechanism, text: &str, meta: &TrajectoryMeta, what: &str) -> Result<Trajectory> {
    let ns = mech.n_species();
    let nr = mech.n_reactions();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(what, 1, "empty file"))?;
    let mut expect = vec!["t".to_string()];
    expect.extend(mech.species().iter().map(|s| format!("X_{}", s.name)));
    expect.extend((1..=nr).map(|i| format!("r_{i}")));
    if header.split(',').map(str::trim).ne(expect.iter().map(String::as_str)) {
        return Err(Error::parse(what, 1, "header does not match the mechanism"));
    }
    let mut states = Vec::new();
    let mut rates = Vec::new();
    let mut saw_last = false;
    for (i, line) in lines {
        let n = i + 1;
        if saw_last {
            return Err(Error::parse(what, n, "row after the final state"));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 1 + ns + nr {
            return Err(Error::parse(what, n, format!("expected {} fields, found {}", 1 + ns + nr, cells.len())));
        }
        let t: usize = cells[0].trim().parse().map_err(|_| Error::parse(what, n, "bad time index"))?;
        if t != states.len() + 1 {
            return Err(Error::parse(what, n, format!("expected t={}, found {t}", states.len() + 1)));
        }
        let num = |c: &str| -> Result<f64> {
            c.trim().parse::<f64>().map_err(|_| Error::parse(what, n, format!("bad number `{c}`")))
        };
        let x = cells[1..=ns].iter().map(|c| num(c)).collect::<Result<Vec<f64>>>()?;
        states.push(x);
        let rate_cells = &cells[1 + ns..];
        if rate_cells.iter().all(|c| c.trim().is_empty()) {
            saw_last = true;
        } else {
            rates.push(rate_cells.iter().map(|c| num(c)).collect::<Result<Vec<f64>>>()?);
        }
    }
    if !saw_last || rates.is_empty() {
        return Err(Error::parse(what, 0, "trajectory needs at least one step and a final state row"));
    }
    if rates.len() != meta.horizon {
        return Err(Error::parse(what, 0, format!("sidecar says T={}, file has {} steps", meta.horizon, rates.len())));
    }
    Ok(Trajectory { condition_id: meta.condition_id, dt: meta.dt, states, rates, clipped: meta.clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::parse_mechanism;
    use sparsemech_core::{simulate_trajectory, Condition, NoiseSpec};

    #[test]
    fn round_trip() {
        let m = parse_mechanism("species: A B\nA -> B ; k=2\nB -> A ; k=0.5\n").unwrap();
        let c = Condition::new(4, vec![1.0, 0.1], 2);
        let s = SimulationSettings {
            dt: 0.01,
            horizon: 5,
            substeps: 2,
            noise: NoiseSpec { sigma: 1e-3, seed: 9 },
            ..Default::default()
        };
        let tr = simulate_trajectory(&m, &c, &s).unwrap();
        let csv = write_trajectory_csv(&m, &tr);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("t,X_A,X_B,r_1,r_2\n"));
        assert!(csv.lines().last().unwrap().ends_with(",,"));
        let meta = TrajectoryMeta::new(&tr, &s, "abc");
        let side = write_sidecar(&meta, &Provenance::new("cfg"));
        let back_meta = parse_sidecar(&side, "meta").unwrap();
        assert_eq!(back_meta, meta);
        assert_eq!(parse_trajectory_csv(&m, &csv, &back_meta, "csv").unwrap(), tr);
    }
}
