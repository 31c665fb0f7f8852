//! Euler schemes and stationary samplers for the model zoo.

use log::warn;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, Poisson, StandardNormal};
use serde::Serialize;

use crate::equilibrium::stationary_vector;
use crate::error::{Error, Result};
use crate::models::{generator_matrix, ModelSpec};

/// Guard events above this fraction of steps are reported.
pub const GUARD_WARN_RATE: f64 = 0.01;

pub type State = [f64; 2];

/// How the outer process starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Fixed(Vec<f64>),
    Stationary,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Brownian,
    Pearson { beta: f64, theta: f64, a0: f64, a1: f64, a2: f64 },
    Jacobi { beta: f64, theta: f64, s2: f64, lambda: f64 },
    LevyOu { beta: f64, theta: f64, sigma: f64, b: f64, a: f64, rate: f64, jump_sd: f64 },
    // Y is an OU process; its Gaussian transition is sampled exactly.
    Qtsm { b: f64, beta: f64, sigma: f64, r0: f64, r1: f64, r2: f64 },
}

#[derive(Debug, Clone, Copy)]
enum StationaryLaw {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
    Beta { a: f64, b: f64 },
    // Start at the stationary mean and run for `time`.
    BurnIn { mean: State, time: f64 },
    None,
}

/// Per-model simulator in operational time.
#[derive(Debug, Clone)]
pub struct Dynamics {
    kind: Kind,
    dim: usize,
    stationary: StationaryLaw,
}

/// Counts of steps and of steps where a positivity or interval guard fired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GuardStats {
    pub steps: u64,
    pub guarded: u64,
}

impl GuardStats {
    pub fn merge(self, other: GuardStats) -> GuardStats {
        GuardStats { steps: self.steps + other.steps, guarded: self.guarded + other.guarded }
    }

    pub fn rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.guarded as f64 / self.steps as f64
        }
    }

    pub fn report(&self, what: &str) {
        if self.rate() > GUARD_WARN_RATE {
            warn!("{what}: guard engaged on {:.2}% of steps; reduce dt", 100.0 * self.rate());
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

impl Dynamics {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let kind = match *model {
            ModelSpec::BrownianMotion {} => Kind::Brownian,
            ModelSpec::Pearson { beta, theta, a0, a1, a2 } => Kind::Pearson { beta, theta, a0, a1, a2 },
            ModelSpec::JacobiJump { beta, theta, sigma, lambda } => {
                Kind::Jacobi { beta, theta, s2: sigma * sigma, lambda }
            }
            ModelSpec::LevyOu { beta, theta, sigma, levy_b, levy_a, levy_m2, jump_rate, .. } => Kind::LevyOu {
                beta,
                theta,
                sigma,
                b: levy_b,
                a: levy_a,
                rate: jump_rate,
                jump_sd: (levy_m2 / jump_rate).sqrt(),
            },
            ModelSpec::Qtsm { b, beta, sigma, r0, r1, r2 } => Kind::Qtsm { b, beta, sigma, r0, r1, r2 },
        };
        let stationary = stationary_law(model, &kind)?;
        Ok(Dynamics { kind, dim: model.state_dim(), stationary })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Advances `x` by `h`; returns whether a guard fired.
    pub fn step<R: Rng + ?Sized>(&self, x: &mut State, h: f64, rng: &mut R) -> bool {
        let sq = h.sqrt();
        match self.kind {
            Kind::Brownian => {
                x[0] += sq * normal(rng);
                false
            }
            Kind::Pearson { beta, theta, a0, a1, a2 } => {
                let v = x[0];
                let diff = a0 + a1 * v + a2 * v * v;
                x[0] = v - beta * (v - theta) * h + diff.max(0.0).sqrt() * sq * normal(rng);
                diff < 0.0
            }
            Kind::Jacobi { beta, theta, s2, lambda } => {
                let v = x[0];
                let diff = s2 * v * (1.0 - v);
                let mut next = v - beta * (v - theta) * h + diff.max(0.0).sqrt() * sq * normal(rng);
                let mut guarded = diff < 0.0;
                if !(0.0..=1.0).contains(&next) {
                    next = next.clamp(0.0, 1.0);
                    guarded = true;
                }
                if poisson(lambda * h, rng) % 2 == 1 {
                    next = 1.0 - next;
                }
                x[0] = next;
                guarded
            }
            Kind::LevyOu { beta, theta, sigma, b, a, rate, jump_sd } => {
                let v = x[0];
                let jumps = poisson(rate * h, rng);
                // Sum of `jumps` centred normals with variance m2/rate each.
                let jump = if jumps > 0 { jump_sd * (jumps as f64).sqrt() * normal(rng) } else { 0.0 };
                x[0] = v + (sigma * b - beta * (v - theta)) * h + sigma * a * sq * normal(rng) + sigma * jump;
                false
            }
            Kind::Qtsm { b, beta, sigma, r0, r1, r2 } => {
                let y = x[0];
                let next = if beta > 0.0 {
                    let decay = (-beta * h).exp();
                    let mean = b / beta + (y - b / beta) * decay;
                    let sd = sigma * ((1.0 - decay * decay) / (2.0 * beta)).sqrt();
                    mean + sd * normal(rng)
                } else {
                    y + b * h + sigma * sq * normal(rng)
                };
                x[0] = next;
                x[1] = r0 + r1 * next + r2 * next * next;
                false
            }
        }
    }

    /// Runs from the current state over operational duration `span`.
    pub fn advance<R: Rng + ?Sized>(&self, x: &mut State, span: f64, dt: f64, rng: &mut R, stats: &mut GuardStats) {
        let mut left = span;
        while left > 0.0 {
            let h = if left > dt * (1.0 + 1e-9) { dt } else { left };
            stats.steps += 1;
            if self.step(x, h, rng) {
                stats.guarded += 1;
            }
            left -= h;
        }
    }

    /// Sets `x` from an initial condition.
    pub fn initialise<R: Rng + ?Sized>(
        &self,
        init: &InitialCondition,
        dt: f64,
        rng: &mut R,
        stats: &mut GuardStats,
    ) -> Result<State> {
        match init {
            InitialCondition::Fixed(x0) => {
                if x0.len() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: x0.len() });
                }
                let mut x = [0.0; 2];
                x[..self.dim].copy_from_slice(x0);
                if let Kind::Qtsm { r0, r1, r2, .. } = self.kind {
                    x[1] = r0 + r1 * x[0] + r2 * x[0] * x[0];
                }
                Ok(x)
            }
            InitialCondition::Stationary => self.sample_stationary(dt, rng, stats),
        }
    }

    fn sample_stationary<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, stats: &mut GuardStats) -> Result<State> {
        let bad = |e: String| Error::InvalidParameter(e);
        let mut x = [0.0; 2];
        match self.stationary {
            StationaryLaw::Normal { mean, sd } => {
                x[0] = Normal::new(mean, sd).map_err(|e| bad(e.to_string()))?.sample(rng)
            }
            StationaryLaw::Gamma { shape, scale } => {
                x[0] = Gamma::new(shape, scale).map_err(|e| bad(e.to_string()))?.sample(rng)
            }
            StationaryLaw::Beta { a, b } => x[0] = Beta::new(a, b).map_err(|e| bad(e.to_string()))?.sample(rng),
            StationaryLaw::BurnIn { mean, time } => {
                x = mean;
                self.advance(&mut x, time, dt, rng, stats);
            }
            StationaryLaw::None => {
                return Err(Error::NotZeroStable("model has no stationary law to start from".into()));
            }
        }
        if let Kind::Qtsm { r0, r1, r2, .. } = self.kind {
            x[1] = r0 + r1 * x[0] + r2 * x[0] * x[0];
        }
        Ok(x)
    }
}

fn stationary_law(model: &ModelSpec, kind: &Kind) -> Result<StationaryLaw> {
    Ok(match *kind {
        Kind::Brownian => StationaryLaw::None,
        Kind::Pearson { beta, theta, a0, a1, a2 } if beta > 0.0 && a2 == 0.0 && a1 == 0.0 && a0 > 0.0 => {
            StationaryLaw::Normal { mean: theta, sd: (a0 / (2.0 * beta)).sqrt() }
        }
        Kind::Pearson { beta, theta, a0, a1, a2 }
            if beta > 0.0 && a0 == 0.0 && a2 == 0.0 && a1 > 0.0 && theta > 0.0 =>
        {
            StationaryLaw::Gamma { shape: 2.0 * beta * theta / a1, scale: a1 / (2.0 * beta) }
        }
        Kind::Jacobi { beta, theta, s2, lambda }
            if lambda == 0.0 && beta > 0.0 && s2 > 0.0 && theta > 0.0 && theta < 1.0 =>
        {
            StationaryLaw::Beta { a: 2.0 * beta * theta / s2, b: 2.0 * beta * (1.0 - theta) / s2 }
        }
        Kind::Qtsm { b, beta, sigma, .. } if beta > 0.0 && sigma > 0.0 => {
            StationaryLaw::Normal { mean: b / beta, sd: sigma / (2.0 * beta).sqrt() }
        }
        _ => burn_in(model)?,
    })
}

fn burn_in(model: &ModelSpec) -> Result<StationaryLaw> {
    let Ok(v) = generator_matrix(model, 1).and_then(|g| stationary_vector(&g)) else {
        return Ok(StationaryLaw::None);
    };
    let g2 = generator_matrix(model, 2)?;
    let slowest = g2
        .eigenvalues()?
        .iter()
        .map(|z| z.re.abs())
        .filter(|&r| r > 1e-9 * g2.matrix().amax())
        .fold(f64::INFINITY, f64::min);
    if !slowest.is_finite() {
        return Ok(StationaryLaw::None);
    }
    let mut mean = [0.0; 2];
    for i in 0..model.state_dim() {
        mean[i] = v[1 + i];
    }
    Ok(StationaryLaw::BurnIn { mean, time: 20.0 / slowest })
}
