//! Mass-action rate evaluation and sub-stepped explicit Euler trajectories.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::powi;
use crate::mechanism::Mechanism;

/// One point of the parameter sweep: an initial state plus per-reaction
/// rate multipliers standing in for temperature, pressure and mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: u64,
    pub initial_concentrations: Vec<f64>,
    pub rate_scale: Vec<f64>,
}

impl Condition {
    /// Condition with unit rate multipliers.
    pub fn new(id: u64, initial_concentrations: Vec<f64>, n_reactions: usize) -> Self {
        Self { id, initial_concentrations, rate_scale: vec![1.0; n_reactions] }
    }

    pub fn validate(&self, mech: &Mechanism) -> Result<()> {
        if self.initial_concentrations.len() != mech.n_species() {
            return Err(Error::DimensionMismatch {
                expected: mech.n_species(),
                found: self.initial_concentrations.len(),
                what: "initial concentrations",
            });
        }
        if self.rate_scale.len() != mech.n_reactions() {
            return Err(Error::DimensionMismatch {
                expected: mech.n_reactions(),
                found: self.rate_scale.len(),
                what: "rate scale",
            });
        }
        if let Some(x) = self.initial_concentrations.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "condition {}: initial concentration {x} is not a finite nonnegative number",
                self.id
            )));
        }
        if let Some(s) = self.rate_scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidArgument(format!("condition {}: rate scale {s} must be positive", self.id)));
        }
        Ok(())
    }
}

/// Additive Gaussian state noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma: 0.0, seed: 0 };

    /// Per-condition stream: `seed XOR condition id`.
    pub fn for_condition(&self, condition_id: u64) -> NoiseSpec {
        NoiseSpec { sigma: self.sigma, seed: self.seed ^ condition_id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    /// Sampling time between recorded states.
    pub dt: f64,
    /// Number of recorded steps `T`; `T + 1` states are stored.
    pub horizon: usize,
    /// Internal Euler steps per sampling interval.
    pub substeps: usize,
    pub noise: NoiseSpec,
    /// Abort when any concentration magnitude exceeds this.
    pub overflow_bound: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 200, substeps: 1, noise: NoiseSpec::NONE, overflow_bound: 1e12 }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon T must be at least 1".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be at least 1".into()));
        }
        if !(self.noise.sigma.is_finite() && self.noise.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise sigma must be nonnegative, got {}", self.noise.sigma)));
        }
        Ok(())
    }
}

/// Recorded states and rates of one condition.
///
/// `states[k]` is the state at time index `k + 1`; `rates[k]` are the rates
/// evaluated at `states[k]`. There is one more state than rate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub condition_id: u64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    /// Number of concentrations clipped at zero during integration or noise.
    pub clipped: usize,
}

impl Trajectory {
    /// Number of recorded steps `T`.
    pub fn horizon(&self) -> usize {
        self.rates.len()
    }

    /// `X_t` for `1 <= t <= T + 1`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t - 1]
    }

    /// `r_t` for `1 <= t <= T`.
    pub fn rate(&self, t: usize) -> &[f64] {
        &self.rates[t - 1]
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon() {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon() });
        }
        Ok(())
    }
}

/// Mass-action rates `r_i = scale_i * k_i * prod_s X_s^{nu_si}`.
pub fn reaction_rates(mech: &Mechanism, x: &[f64], cond: &Condition) -> Result<Vec<f64>> {
    if x.len() != mech.n_species() {
        return Err(Error::DimensionMismatch { expected: mech.n_species(), found: x.len(), what: "state" });
    }
    if cond.rate_scale.len() != mech.n_reactions() {
        return Err(Error::DimensionMismatch {
            expected: mech.n_reactions(),
            found: cond.rate_scale.len(),
            what: "rate scale",
        });
    }
    if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("state entry {v} is not finite and nonnegative")));
    }
    let mut out = vec![0.0; mech.n_reactions()];
    rates_into(mech, x, &cond.rate_scale, &mut out);
    Ok(out)
}

fn rates_into(mech: &Mechanism, x: &[f64], scale: &[f64], out: &mut [f64]) {
    for (i, rxn) in mech.reactions().iter().enumerate() {
        let mut r = scale[i] * rxn.rate_constant;
        for (&s, &order) in &rxn.reactants {
            r *= powi(x[s], order);
        }
        out[i] = r;
    }
}

/// `delta_s = sum_i M_si * r_i * h`, summed in reaction order.
fn euler_increment(mech: &Mechanism, rates: &[f64], h: f64, delta: &mut [f64]) {
    let m = mech.stoich();
    for (s, d) in delta.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, r) in rates.iter().enumerate() {
            acc += m.get(s, i) as f64 * r * h;
        }
        *d = acc;
    }
}

/// Integrates one condition with explicit Euler at `dt / substeps`,
/// recording every `dt`.
pub fn simulate_trajectory(mech: &Mechanism, cond: &Condition, settings: &SimulationSettings) -> Result<Trajectory> {
    settings.validate()?;
    cond.validate(mech)?;
    let ns = mech.n_species();
    let nr = mech.n_reactions();
    let h = settings.dt / settings.substeps as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(settings.noise.seed);

    let mut states = Vec::with_capacity(settings.horizon + 1);
    let mut rates = Vec::with_capacity(settings.horizon);
    let mut clipped = 0usize;
    let mut x = cond.initial_concentrations.clone();
    let mut r = vec![0.0; nr];
    let mut delta = vec![0.0; ns];

    for t in 1..=settings.horizon {
        let mut recorded = vec![0.0; nr];
        rates_into(mech, &x, &cond.rate_scale, &mut recorded);
        let mut y = x.clone();
        for sub in 0..settings.substeps {
            if sub == 0 {
                r.copy_from_slice(&recorded);
            } else {
                rates_into(mech, &y, &cond.rate_scale, &mut r);
            }
            euler_increment(mech, &r, h, &mut delta);
            for (ys, ds) in y.iter_mut().zip(&delta) {
                *ys += ds;
                if *ys < 0.0 {
                    *ys = 0.0;
                    clipped += 1;
                }
            }
            if y.iter().any(|v| !v.is_finite() || v.abs() > settings.overflow_bound) {
                return Err(Error::Divergence { condition_id: cond.id, t });
            }
        }
        if settings.noise.sigma > 0.0 {
            for ys in y.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *ys += settings.noise.sigma * z;
                if *ys < 0.0 {
                    *ys = 0.0;
                    clipped += 1;
                }
            }
        }
        states.push(core::mem::replace(&mut x, y));
        rates.push(recorded);
    }
    states.push(x);
    Ok(Trajectory { condition_id: cond.id, dt: settings.dt, states, rates, clipped })
}

/// One trajectory per condition, each with its own noise stream.
pub fn generate_dataset(
    mech: &Mechanism,
    conds: &[Condition],
    settings: &SimulationSettings,
) -> Result<Vec<Trajectory>> {
    if conds.is_empty() {
        return Err(Error::EmptyInput("condition list"));
    }
    conds.iter().map(|c| simulate_condition(mech, c, settings)).collect()
}

/// Simulates `cond` with the per-condition noise seed used by [`generate_dataset`].
pub fn simulate_condition(mech: &Mechanism, cond: &Condition, settings: &SimulationSettings) -> Result<Trajectory> {
    let per = SimulationSettings { noise: settings.noise.for_condition(cond.id), ..*settings };
    simulate_trajectory(mech, cond, &per)
}
