//! Stable subordinator paths and their first-passage inverses.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};

use crate::error::{Error, Result};

/// One draw of `σ_1` for the standard positive `α`-stable law with
/// `E[e^{−λσ_1}] = e^{−λ^α}` (Kanter's representation).
pub fn stable_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let o: f64 = Open01.sample(rng);
    let u = PI * o;
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// `n` i.i.d. increments `σ_{s+ds} − σ_s`, each `ds^{1/α}` times a unit draw.
pub fn simulate_stable_increments<R: Rng + ?Sized>(alpha: f64, n: usize, ds: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {ds}")));
    }
    let scale = ds.powf(1.0 / alpha);
    Ok((0..n).map(|_| scale * stable_unit(alpha, rng)).collect())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("stable index must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `L_t = inf{s : σ_s > t}` on `t_grid` from a sampled path `σ(op_times)`.
///
/// The crossing is located linearly between the bracketing samples.
pub fn invert_path(op_times: &[f64], sigma: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    if op_times.len() != sigma.len() || sigma.is_empty() {
        return Err(Error::DimensionMismatch { expected: op_times.len(), got: sigma.len() });
    }
    if sigma.windows(2).any(|w| w[1] < w[0]) || op_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("subordinator path must be non-decreasing in increasing time".into()));
    }
    let last = *sigma.last().unwrap_or(&0.0);
    t_grid
        .iter()
        .map(|&t| {
            if t < sigma[0] {
                return Ok(op_times[0]);
            }
            if t >= last {
                return Err(Error::PathTruncated { t, horizon: last });
            }
            // First index with σ > t.
            let i = sigma.partition_point(|&v| v <= t);
            Ok(crossing(op_times[i - 1], op_times[i], sigma[i - 1], sigma[i], t))
        })
        .collect()
}

fn crossing(s0: f64, s1: f64, v0: f64, v1: f64, t: f64) -> f64 {
    s0 + (s1 - s0) * (t - v0) / (v1 - v0)
}

/// Streams `σ` forward and records first passages above sorted levels.
pub(crate) struct FirstPassage {
    alpha: f64,
    ds: f64,
    scale: f64,
    max_steps: u64,
}

impl FirstPassage {
    pub(crate) fn new(alpha: f64, ds: f64, max_steps: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(ds > 0.0) {
            return Err(Error::InvalidParameter(format!("subordinator step must be positive, got {ds}")));
        }
        Ok(FirstPassage { alpha, ds, scale: ds.powf(1.0 / alpha), max_steps })
    }

    /// `levels` must be sorted ascending; output is aligned with it.
    pub(crate) fn passages<R: Rng + ?Sized>(&self, levels: &[f64], rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let (mut s_prev, mut v_prev) = (0.0, 0.0);
        let mut steps = 0u64;
        let mut v_cur = 0.0;
        for &t in levels {
            if t <= 0.0 {
                out.push(0.0);
                continue;
            }
            while v_cur <= t {
                s_prev = steps as f64 * self.ds;
                v_prev = v_cur;
                v_cur += self.scale * stable_unit(self.alpha, rng);
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::PathTruncated { t, horizon: v_cur });
                }
            }
            out.push(crossing(s_prev, s_prev + self.ds, v_prev, v_cur, t));
        }
        Ok(())
    }
}
