//! Monte-Carlo oracle for time-changed polynomial processes.
//!
//! Each path draws a stable subordinator `σ` on an operational-time grid,
//! inverts it to the clock `L_t` by first passage, and runs the outer model
//! in operational time up to the needed `L` values. Every path owns its own
//! random stream (master seed plus path index), and results are reduced in
//! path order, so estimates do not depend on the thread count.

mod dynamics;
mod subordinator;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::polybasis::PolyVec;

pub use dynamics::{Dynamics, GuardStats, InitialCondition, State, GUARD_WARN_RATE};
pub use subordinator::{invert_path, simulate_stable_increments, stable_unit};

use subordinator::{check_alpha, FirstPassage};

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Euler step of the outer process in operational time.
    pub dt_operational: f64,
    /// Subordinator step at unit calendar horizon; see [`SimConfig::subordinator_step`].
    pub dt_subordinator: f64,
    pub seed: u64,
    /// Largest calendar time any query may ask for.
    pub horizon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_paths: 100_000, dt_operational: 1e-3, dt_subordinator: 1e-3, seed: 0, horizon: 100.0 }
    }
}

const MIN_PATHS: usize = 100;
const MAX_SUBORDINATOR_STEPS: u64 = 50_000_000;

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::InvalidParameter(format!("need at least {MIN_PATHS} paths, got {}", self.n_paths)));
        }
        for (name, v) in [
            ("dt_operational", self.dt_operational),
            ("dt_subordinator", self.dt_subordinator),
            ("horizon", self.horizon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Operational step for a subordinator that must reach calendar time
    /// `t_max`. Beyond unit horizon the step grows like `t_max^α`; by
    /// self-similarity this is the unit-horizon problem at `dt_subordinator`,
    /// rescaled.
    pub fn subordinator_step(&self, alpha: f64, t_max: f64) -> f64 {
        self.dt_subordinator * t_max.max(1.0).powf(alpha)
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        if t > self.horizon {
            return Err(Error::PathTruncated { t, horizon: self.horizon });
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Fraction of Euler steps where a guard fired.
    pub guard_rate: f64,
}

impl Estimate {
    /// `|reference − value| / std_error`; infinite when the error is zero
    /// and the values differ.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (reference - self.value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn summarise(values: &[f64], stats: GuardStats) -> Estimate {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Estimate { value: mean, std_error: (var / n as f64).sqrt(), n_paths: n, guard_rate: stats.rate() }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// What to estimate.
#[derive(Debug, Clone)]
pub enum Query {
    /// `E_x[p(X_{L_t})]`.
    Moment { p: PolyVec, x0: Vec<f64>, t: f64 },
    /// `E_μ[p(X_{L_{t+s}}) q(X_{L_t})]` with a stationary start.
    CrossMoment { p: PolyVec, q: PolyVec, s: f64, t: f64 },
    /// `E[e^{−β(L_{t+s} − L_t)}]`; needs no outer model.
    IncrementLaplace { beta: f64, s: f64, t: f64 },
}

/// Estimator for one model and one stable index.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    dynamics: Option<Dynamics>,
    alpha: f64,
    cfg: SimConfig,
}

// Per-path output: one value per requested functional, plus guard stats.
type PathOutput = (Vec<f64>, GuardStats);

impl MonteCarlo {
    pub fn new(model: Option<&ModelSpec>, alpha: f64, cfg: SimConfig) -> Result<Self> {
        check_alpha(alpha)?;
        cfg.validate()?;
        let dynamics = model.map(Dynamics::new).transpose()?;
        Ok(MonteCarlo { dynamics, alpha, cfg })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn dynamics(&self) -> Result<&Dynamics> {
        self.dynamics.as_ref().ok_or(Error::InvalidParameter("this query needs an outer model".into()))
    }

    // Runs `per_path` on every path index and reduces column-wise.
    fn run<F>(&self, width: usize, per_path: F) -> Result<(Vec<Estimate>, GuardStats)>
    where
        F: Fn(&mut ChaCha8Rng) -> Result<PathOutput> + Sync,
    {
        let outputs: Vec<PathOutput> = (0..self.cfg.n_paths)
            .into_par_iter()
            .map(|i| per_path(&mut path_rng(self.cfg.seed, i)))
            .collect::<Result<_>>()?;
        let stats = outputs.iter().fold(GuardStats::default(), |a, (_, s)| a.merge(*s));
        let mut column = vec![0.0; outputs.len()];
        let estimates = (0..width)
            .map(|j| {
                for (c, (vals, _)) in column.iter_mut().zip(&outputs) {
                    *c = vals[j];
                }
                summarise(&column, stats)
            })
            .collect();
        Ok((estimates, stats))
    }

    /// `E_x[p(X_{L_t})]` for several `t`, sharing paths.
    pub fn moments(&self, p: &PolyVec, x0: &[f64], ts: &[f64]) -> Result<Vec<Estimate>> {
        let dyn_ = self.dynamics()?;
        if p.basis().dim() != dyn_.dim() {
            return Err(Error::DimensionMismatch { expected: dyn_.dim(), got: p.basis().dim() });
        }
        let (order, levels) = sorted_levels(ts)?;
        let t_max = *levels.last().unwrap_or(&0.0);
        self.cfg.check_horizon(t_max)?;
        let fp = FirstPassage::new(self.alpha, self.cfg.dt_subordinator, MAX_SUBORDINATOR_STEPS)?;
        let init = InitialCondition::Fixed(x0.to_vec());
        let dt = self.cfg.dt_operational;
        let (est, stats) = self.run(ts.len(), |rng| {
            let mut l = Vec::with_capacity(levels.len());
            fp.passages(&levels, rng, &mut l)?;
            let mut stats = GuardStats::default();
            let mut x = dyn_.initialise(&init, dt, rng, &mut stats)?;
            let mut clock = 0.0;
            let mut at_level = Vec::with_capacity(levels.len());
            for &lj in &l {
                dyn_.advance(&mut x, lj - clock, dt, rng, &mut stats);
                clock = clock.max(lj);
                at_level.push(p.evaluate(&x[..dyn_.dim()])?);
            }
            Ok((order.iter().map(|&k| at_level[k]).collect(), stats))
        })?;
        stats.report("moment simulation");
        Ok(est)
    }

    pub fn moment(&self, p: &PolyVec, x0: &[f64], t: f64) -> Result<Estimate> {
        Ok(self.moments(p, x0, &[t])?[0])
    }

    /// `E_μ[p(X_{L_{t+s}}) q(X_{L_t})]` from a stationary start.
    pub fn cross_moment(&self, p: &PolyVec, q: &PolyVec, s: f64, t: f64) -> Result<Estimate> {
        let dyn_ = self.dynamics()?;
        check_times(s, t)?;
        self.cfg.check_horizon(t + s)?;
        let fp = FirstPassage::new(self.alpha, self.cfg.subordinator_step(self.alpha, t + s), MAX_SUBORDINATOR_STEPS)?;
        let dt = self.cfg.dt_operational;
        let levels = [t, t + s];
        let (est, stats) = self.run(1, |rng| {
            let mut l = Vec::with_capacity(2);
            fp.passages(&levels, rng, &mut l)?;
            let mut stats = GuardStats::default();
            let mut x = dyn_.initialise(&InitialCondition::Stationary, dt, rng, &mut stats)?;
            dyn_.advance(&mut x, l[0], dt, rng, &mut stats);
            let qv = q.evaluate(&x[..dyn_.dim()])?;
            dyn_.advance(&mut x, l[1] - l[0], dt, rng, &mut stats);
            let pv = p.evaluate(&x[..dyn_.dim()])?;
            Ok((vec![pv * qv], stats))
        })?;
        stats.report("cross-moment simulation");
        Ok(est[0])
    }

    /// `E[e^{−β(L_{t+s} − L_t)}]` for several `β`, sharing paths.
    pub fn increment_laplace(&self, betas: &[f64], s: f64, t: f64) -> Result<Vec<Estimate>> {
        check_times(s, t)?;
        if betas.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::InvalidParameter("β must be non-negative".into()));
        }
        self.cfg.check_horizon(t + s)?;
        let fp = FirstPassage::new(self.alpha, self.cfg.subordinator_step(self.alpha, t + s), MAX_SUBORDINATOR_STEPS)?;
        let levels = [t, t + s];
        let (est, _) = self.run(betas.len(), |rng| {
            let mut l = Vec::with_capacity(2);
            fp.passages(&levels, rng, &mut l)?;
            let inc = l[1] - l[0];
            Ok((betas.iter().map(|b| (-b * inc).exp()).collect(), GuardStats::default()))
        })?;
        Ok(est)
    }

    pub fn estimate(&self, query: &Query) -> Result<Estimate> {
        match query {
            Query::Moment { p, x0, t } => self.moment(p, x0, *t),
            Query::CrossMoment { p, q, s, t } => self.cross_moment(p, q, *s, *t),
            Query::IncrementLaplace { beta, s, t } => Ok(self.increment_laplace(&[*beta], *s, *t)?[0]),
        }
    }
}

/// One-shot estimate; see [`MonteCarlo`].
pub fn estimate(model: Option<&ModelSpec>, alpha: f64, query: &Query, cfg: &SimConfig) -> Result<Estimate> {
    MonteCarlo::new(model, alpha, *cfg)?.estimate(query)
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= 0.0) || !s.is_finite() || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("times must be finite and non-negative, got s={s}, t={t}")));
    }
    Ok(())
}

// Sorted copy of `ts` and, for each original position, its sorted index.
fn sorted_levels(ts: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    if ts.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter("times must be finite and non-negative".into()));
    }
    let mut idx: Vec<usize> = (0..ts.len()).collect();
    idx.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let levels: Vec<f64> = idx.iter().map(|&i| ts[i]).collect();
    let mut order = vec![0; ts.len()];
    for (rank, &i) in idx.iter().enumerate() {
        order[i] = rank;
    }
    Ok((order, levels))
}

/// A few full paths for inspection.
#[derive(Debug, Clone, Serialize)]
pub struct PathBundle {
    pub calendar_times: Vec<f64>,
    /// `l_samples[path][j] = L_{calendar_times[j]}`.
    pub l_samples: Vec<Vec<f64>>,
    /// `x_samples[path][j]` is the outer state at `L_{calendar_times[j]}`.
    pub x_samples: Vec<Vec<Vec<f64>>>,
}

/// Simulates `n_paths` time-changed paths observed on a sorted `t_grid`.
pub fn simulate_bundle(
    model: &ModelSpec,
    alpha: f64,
    init: &InitialCondition,
    t_grid: &[f64],
    n_paths: usize,
    cfg: &SimConfig,
) -> Result<PathBundle> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("calendar grid must be sorted".into()));
    }
    let dyn_ = Dynamics::new(model)?;
    let t_max = t_grid.last().copied().unwrap_or(0.0);
    cfg.check_horizon(t_max)?;
    let fp = FirstPassage::new(alpha, cfg.dt_subordinator, MAX_SUBORDINATOR_STEPS)?;
    let paths: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let mut l = Vec::new();
            fp.passages(t_grid, &mut rng, &mut l)?;
            let mut stats = GuardStats::default();
            let mut x = dyn_.initialise(init, cfg.dt_operational, &mut rng, &mut stats)?;
            let mut clock = 0.0;
            let mut xs = Vec::with_capacity(l.len());
            for &lj in &l {
                dyn_.advance(&mut x, lj - clock, cfg.dt_operational, &mut rng, &mut stats);
                clock = clock.max(lj);
                xs.push(x[..dyn_.dim()].to_vec());
            }
            Ok((l, xs))
        })
        .collect::<Result<_>>()?;
    let (l_samples, x_samples) = paths.into_iter().unzip();
    Ok(PathBundle { calendar_times: t_grid.to_vec(), l_samples, x_samples })
}

/// Outer process sampled on an operational-time grid.
#[derive(Debug, Clone, Serialize)]
pub struct OuterPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub guards: GuardStats,
}

/// Euler path of the un-time-changed model on `[0, horizon]`.
pub fn simulate_model<R: rand::Rng + ?Sized>(
    model: &ModelSpec,
    init: &InitialCondition,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<OuterPath> {
    if !(horizon >= 0.0 && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("need horizon ≥ 0 and dt > 0, got {horizon}, {dt}")));
    }
    let dyn_ = Dynamics::new(model)?;
    let mut guards = GuardStats::default();
    let mut x = dyn_.initialise(init, dt, rng, &mut guards)?;
    let n = (horizon / dt).ceil() as usize;
    let mut times = vec![0.0];
    let mut states = vec![x[..dyn_.dim()].to_vec()];
    let mut clock = 0.0;
    for _ in 0..n {
        let h = dt.min(horizon - clock);
        dyn_.advance(&mut x, h, dt, rng, &mut guards);
        clock += h;
        times.push(clock);
        states.push(x[..dyn_.dim()].to_vec());
    }
    guards.report(model.name());
    Ok(OuterPath { times, states, guards })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mittag::ml_real;
    use crate::polybasis::build_basis;

    fn cfg(n: usize) -> SimConfig {
        SimConfig { n_paths: n, dt_operational: 1e-2, dt_subordinator: 1e-2, seed: 11, horizon: 10.0 }
    }

    #[test]
    fn zero_lag_increment_is_exactly_one() {
        let mc = MonteCarlo::new(None, 0.5, cfg(500)).unwrap();
        let e = mc.increment_laplace(&[1.0], 0.0, 1.0).unwrap()[0];
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn inverse_clock_laplace() {
        // E[e^{−L_1}] = E_{1/2}(−1).
        let mc = MonteCarlo::new(None, 0.5, cfg(20_000)).unwrap();
        let e = mc.increment_laplace(&[1.0], 1.0, 0.0).unwrap()[0];
        let exact = ml_real(0.5, -1.0).unwrap();
        assert!(e.z_score(exact) < 3.5, "{e:?} vs {exact}");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = ModelSpec::Pearson { beta: 1.0, theta: 0.5, a0: 0.2, a1: 0.0, a2: 0.0 };
        let p = PolyVec::monomial(build_basis(1, 2).unwrap(), &[2]).unwrap();
        let a = MonteCarlo::new(Some(&m), 0.6, cfg(300)).unwrap().moments(&p, &[0.1], &[1.0, 0.5]).unwrap();
        let b = MonteCarlo::new(Some(&m), 0.6, cfg(300)).unwrap().moments(&p, &[0.1], &[1.0, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clock_is_monotone_and_jacobi_stays_inside() {
        let m = ModelSpec::JacobiJump { beta: 1.0, theta: 0.4, sigma: 0.8, lambda: 1.0 };
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let b = simulate_bundle(&m, 0.7, &InitialCondition::Fixed(vec![0.9]), &grid, 50, &cfg(100)).unwrap();
        for (l, xs) in b.l_samples.iter().zip(&b.x_samples) {
            assert!(l.windows(2).all(|w| w[1] >= w[0]));
            assert!(xs.iter().all(|x| (0.0..=1.0).contains(&x[0])));
        }
    }

    #[test]
    fn brownian_variance_in_operational_time() {
        let mut rng = path_rng(3, 0);
        let mut acc = Vec::new();
        for _ in 0..4000 {
            let path =
                simulate_model(&ModelSpec::BrownianMotion {}, &InitialCondition::Fixed(vec![0.0]), 1.0, 0.05, &mut rng)
                    .unwrap();
            acc.push(path.states.last().unwrap()[0].powi(2));
        }
        let e = summarise(&acc, GuardStats::default());
        assert!(e.z_score(1.0) < 3.5, "{e:?}");
    }
}
