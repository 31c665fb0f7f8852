//! Closed-form values checked against Monte Carlo at `|z| ≤ 3`.

use fracpoly::equilibrium::fhat_scalar;
use fracpoly::fracmoments::moment_fractional;
use fracpoly::models::ModelSpec;
use fracpoly::montecarlo::{MonteCarlo, SimConfig};
use fracpoly::polybasis::{build_basis, PolyVec};

use crate::config::{JobConfig, Suite};
use crate::error::CliError;
use crate::jobs::{alpha_ok, grid};
use crate::output::{format_sig, Table};

pub const Z_THRESHOLD: f64 = 3.0;

pub const DEFAULT_MOMENT_ALPHAS: [f64; 1] = [0.5];
pub const DEFAULT_MOMENT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_INCREMENT_ALPHAS: [f64; 3] = [0.3, 0.5, 0.8];
pub const DEFAULT_INCREMENT_LAGS: [f64; 3] = [0.5, 5.0, 50.0];
pub const DEFAULT_INCREMENT_TIMES: [f64; 1] = [1.0];
pub const INCREMENT_BETAS: [f64; 2] = [0.5, 2.0];

/// A moment check: model, start, and the monomial degrees to test.
#[derive(Debug, Clone)]
pub struct MomentCase {
    pub label: String,
    pub model: ModelSpec,
    pub x0: Vec<f64>,
    pub degrees: Vec<u32>,
}

/// Brownian motion, an Ornstein–Uhlenbeck and a CIR Pearson diffusion, and a Jacobi model with jumps.
pub fn default_cases() -> Vec<MomentCase> {
    vec![
        MomentCase {
            label: "brownian_motion".into(),
            model: ModelSpec::BrownianMotion {},
            x0: vec![0.0],
            degrees: vec![2],
        },
        MomentCase {
            label: "pearson_ou".into(),
            model: ModelSpec::Pearson { beta: 1.0, theta: 0.5, a0: 0.25, a1: 0.0, a2: 0.0 },
            x0: vec![1.0],
            degrees: vec![1, 2],
        },
        MomentCase {
            label: "cir".into(),
            model: ModelSpec::Pearson { beta: 1.0, theta: 1.0, a0: 0.0, a1: 0.5, a2: 0.0 },
            x0: vec![0.5],
            degrees: vec![1, 2],
        },
        MomentCase {
            label: "jacobi_jump".into(),
            model: ModelSpec::JacobiJump { beta: 1.0, theta: 0.4, sigma: 0.5, lambda: 0.5 },
            x0: vec![0.3],
            degrees: vec![1],
        },
    ]
}

pub struct ValidationOutcome {
    pub table: Table,
    pub failed: usize,
}

fn table() -> Table {
    Table::new(vec!["quantity", "closed_form", "estimate", "std_error", "z_score", "pass_fail"])
}

fn push(table: &mut Table, quantity: String, closed: f64, est: &fracpoly::montecarlo::Estimate) -> bool {
    let z = est.z_score(closed);
    let pass = z <= Z_THRESHOLD;
    table.push(vec![
        quantity.into(),
        closed.into(),
        est.value.into(),
        est.std_error.into(),
        z.into(),
        (if pass { "pass" } else { "fail" }).into(),
    ]);
    pass
}

fn grid_or(
    cfg_grid: &crate::config::GridSpec,
    key: &str,
    default: &[f64],
    check: impl Fn(f64) -> bool,
    what: &str,
) -> Result<Vec<f64>, CliError> {
    if cfg_grid.is_empty() {
        Ok(default.to_vec())
    } else {
        grid(cfg_grid, key, check, what)
    }
}

pub fn run(
    cfg: &JobConfig,
    suites: &[Suite],
    x0: Option<&[f64]>,
    sim: &SimConfig,
) -> Result<ValidationOutcome, CliError> {
    let mut table = table();
    let mut failed = 0;
    if suites.is_empty() {
        return Err(CliError::config("query.suites", "no suites selected"));
    }

    if suites.contains(&Suite::Moments) {
        let cases = match &cfg.model {
            Some(model) => {
                let x0 =
                    x0.ok_or_else(|| CliError::config("query.x0", "required when validating a configured model"))?;
                if x0.len() != model.state_dim() {
                    return Err(CliError::config("query.x0", format!("expected {} coordinates", model.state_dim())));
                }
                vec![MomentCase {
                    label: model.name().into(),
                    model: model.clone(),
                    x0: x0.to_vec(),
                    degrees: vec![1, 2],
                }]
            }
            None => default_cases(),
        };
        let alphas = grid_or(&cfg.grids.alpha, "grids.alpha", &DEFAULT_MOMENT_ALPHAS, alpha_ok, "in (0, 1)")?;
        let ts = grid_or(&cfg.grids.t, "grids.t", &DEFAULT_MOMENT_TIMES, |t| t >= 0.0, "a non-negative time")?;
        for case in &cases {
            failed += moment_checks(&mut table, case, &alphas, &ts, cfg.max_degree, sim)?;
        }
    }

    if suites.contains(&Suite::Increments) {
        let alphas = grid_or(&cfg.grids.alpha, "grids.alpha", &DEFAULT_INCREMENT_ALPHAS, alpha_ok, "in (0, 1)")?;
        let ss = grid_or(&cfg.grids.s, "grids.s", &DEFAULT_INCREMENT_LAGS, |s| s >= 0.0, "a non-negative lag")?;
        let ts = grid_or(&cfg.grids.t, "grids.t", &DEFAULT_INCREMENT_TIMES, |t| t >= 0.0, "a non-negative time")?;
        for &a in &alphas {
            let mc = MonteCarlo::new(None, a, *sim)
                .map_err(|e| CliError::numerical("monte_carlo", format!("alpha={a}"), e))?;
            for &t in &ts {
                for &s in &ss {
                    let inputs = || format!("alpha={a}, s={s}, t={t}");
                    let est = mc
                        .increment_laplace(&INCREMENT_BETAS, s, t)
                        .map_err(|e| CliError::numerical("increment_laplace", inputs(), e))?;
                    for (&beta, e) in INCREMENT_BETAS.iter().zip(&est) {
                        let closed =
                            fhat_scalar(a, beta, s, t).map_err(|e| CliError::numerical("fhat_scalar", inputs(), e))?;
                        let q = format!(
                            "increment_laplace alpha={} beta={} s={} t={}",
                            format_sig(a),
                            format_sig(beta),
                            format_sig(s),
                            format_sig(t)
                        );
                        failed += usize::from(!push(&mut table, q, closed, e));
                    }
                }
            }
        }
    }
    Ok(ValidationOutcome { table, failed })
}

fn moment_checks(
    table: &mut Table,
    case: &MomentCase,
    alphas: &[f64],
    ts: &[f64],
    max_degree: usize,
    sim: &SimConfig,
) -> Result<usize, CliError> {
    let dim = case.model.state_dim();
    let mut failed = 0;
    for &a in alphas {
        let mc = MonteCarlo::new(Some(&case.model), a, *sim)
            .map_err(|e| CliError::numerical("monte_carlo", format!("model={}, alpha={a}", case.label), e))?;
        for &deg in &case.degrees {
            if deg as usize > max_degree {
                return Err(CliError::config("max_degree", format!("validation needs degree {deg}")));
            }
            let basis = build_basis(dim, deg as usize).map_err(|e| CliError::config("model", e))?;
            let mut e = vec![0; dim];
            e[0] = deg;
            let p = PolyVec::monomial(basis, &e).map_err(|e| CliError::config("model", e))?;
            let inputs = || format!("model={}, p=x^{deg}, alpha={a}", case.label);
            let est =
                mc.moments(&p, &case.x0, ts).map_err(|e| CliError::numerical("monte_carlo_moments", inputs(), e))?;
            for (&t, e) in ts.iter().zip(&est) {
                let closed = moment_fractional(&case.model, &p, &case.x0, t, a)
                    .map_err(|e| CliError::numerical("moment_fractional", format!("{} t={t}", inputs()), e))?;
                let x0: Vec<String> = case.x0.iter().map(|&v| format_sig(v)).collect();
                let q = format!(
                    "{} E[x^{deg}] x0={} alpha={} t={}",
                    case.label,
                    x0.join(";"),
                    format_sig(a),
                    format_sig(t)
                );
                failed += usize::from(!push(table, q, closed, e));
            }
        }
    }
    Ok(failed)
}
