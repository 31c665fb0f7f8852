//! One function per query kind, each producing a [`Table`].

use fracpoly::equilibrium::{correlation, cross_moment, lrd_asymptote, EquilibriumContext};
use fracpoly::fracmoments::MomentSolver;
use fracpoly::models::ModelSpec;
use fracpoly::montecarlo::{simulate_bundle, InitialCondition, SimConfig};
use rayon::prelude::*;

use crate::config::{GridSpec, JobConfig, PolySpec};
use crate::error::CliError;
use crate::output::{format_sig, Cell, Table};

pub(crate) fn require_model(cfg: &JobConfig) -> Result<&ModelSpec, CliError> {
    cfg.model.as_ref().ok_or_else(|| CliError::config("model", "this query needs a [model] section"))
}

/// Non-empty grid of values accepted by `check`.
pub(crate) fn grid(spec: &GridSpec, key: &str, check: impl Fn(f64) -> bool, what: &str) -> Result<Vec<f64>, CliError> {
    let v = spec.values(key)?;
    if v.is_empty() {
        return Err(CliError::config(key, "grid is empty"));
    }
    if let Some(bad) = v.iter().find(|&&x| !check(x)) {
        return Err(CliError::config(key, format!("{} is not {what}", format_sig(*bad))));
    }
    Ok(v)
}

pub(crate) fn alpha_ok(a: f64) -> bool {
    a > 0.0 && a < 1.0
}

fn time_ok(t: f64) -> bool {
    t >= 0.0
}

fn check_state(model: &ModelSpec, x: &[f64], key: &str) -> Result<(), CliError> {
    if x.len() != model.state_dim() {
        return Err(CliError::config(key, format!("expected {} coordinates, got {}", model.state_dim(), x.len())));
    }
    Ok(())
}

pub fn moments(cfg: &JobConfig, p: &PolySpec, x0: &[f64]) -> Result<Table, CliError> {
    let model = require_model(cfg)?;
    check_state(model, x0, "query.x0")?;
    let p = p.to_polyvec(model.state_dim(), cfg.max_degree, "query.polynomial")?;
    let ts = grid(&cfg.grids.t, "grids.t", time_ok, "a non-negative time")?;
    let alphas = grid(&cfg.grids.alpha, "grids.alpha", |a| a > 0.0 && a <= 1.0, "in (0, 1]")?;
    let solver = MomentSolver::new(model, p.degree().max(1))
        .map_err(|e| CliError::numerical("generator_matrix", format!("model={}", model.name()), e))?;

    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| ts.iter().map(move |&t| (t, a))).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(t, a)| {
            let r = if a == 1.0 { solver.classical(&p, x0, t) } else { solver.fractional(&p, x0, t, a) };
            r.map_err(|e| CliError::numerical("moment", format!("model={}, t={t}, alpha={a}", model.name()), e))
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(vec!["t", "alpha", "value"]);
    for (&(t, a), v) in points.iter().zip(values) {
        table.push(vec![t.into(), a.into(), v.into()]);
    }
    Ok(table)
}

pub fn correlations(cfg: &JobConfig) -> Result<Table, CliError> {
    let model = require_model(cfg)?;
    if model.state_dim() != 1 {
        return Err(CliError::config("model", "correlation needs a one-dimensional model"));
    }
    let ss = grid(&cfg.grids.s, "grids.s", time_ok, "a non-negative lag")?;
    let ts = grid(&cfg.grids.t, "grids.t", time_ok, "a non-negative time")?;
    let alphas = grid(&cfg.grids.alpha, "grids.alpha", alpha_ok, "in (0, 1)")?;
    let ctx = EquilibriumContext::new(model, 1)
        .map_err(|e| CliError::numerical("equilibrium", format!("model={}", model.name()), e))?;

    let mut points = Vec::with_capacity(alphas.len() * ts.len() * ss.len());
    for &a in &alphas {
        for &t in &ts {
            points.extend(ss.iter().map(|&s| (s, t, a)));
        }
    }
    let rows: Vec<[f64; 3]> = points
        .par_iter()
        .map(|&(s, t, a)| {
            let inputs = || format!("model={}, s={s}, t={t}, alpha={a}", model.name());
            let rep = correlation(&ctx, s, t, Some(a)).map_err(|e| CliError::numerical("correlation", inputs(), e))?;
            let lrd =
                lrd_asymptote(a, rep.beta, s, t).map_err(|e| CliError::numerical("lrd_asymptote", inputs(), e))?;
            Ok([rep.correlation, lrd, rep.correlation / lrd])
        })
        .collect::<Result<_, CliError>>()?;

    let mut table = Table::new(vec!["s", "t", "alpha", "corr", "lrd_asymptote", "ratio"]);
    for (&(s, t, a), [c, l, r]) in points.iter().zip(rows) {
        table.push(vec![s.into(), t.into(), a.into(), c.into(), l.into(), r.into()]);
    }
    Ok(table)
}

pub fn cross_moments(cfg: &JobConfig, p: &PolySpec, q: &PolySpec) -> Result<Table, CliError> {
    let model = require_model(cfg)?;
    let dim = model.state_dim();
    let p = p.to_polyvec(dim, cfg.max_degree, "query.p")?;
    let q = q.to_polyvec(dim, cfg.max_degree, "query.q")?;
    let ss = grid(&cfg.grids.s, "grids.s", time_ok, "a non-negative lag")?;
    let ts = grid(&cfg.grids.t, "grids.t", time_ok, "a non-negative time")?;
    let alphas = grid(&cfg.grids.alpha, "grids.alpha", alpha_ok, "in (0, 1)")?;
    let [alpha] = alphas[..] else {
        return Err(CliError::config("grids.alpha", "cross-moments takes exactly one alpha"));
    };
    let k = p.degree().max(q.degree()).max(1);
    let ctx = EquilibriumContext::new(model, k)
        .map_err(|e| CliError::numerical("equilibrium", format!("model={}, degree={k}", model.name()), e))?;

    let points: Vec<(f64, f64)> = ts.iter().flat_map(|&t| ss.iter().map(move |&s| (s, t))).collect();
    let rows: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(s, t)| {
            let inputs = || format!("model={}, s={s}, t={t}, alpha={alpha}", model.name());
            let frac = cross_moment(&ctx, &p, &q, s, t, Some(alpha))
                .map_err(|e| CliError::numerical("cross_moment", inputs(), e))?;
            let classical =
                cross_moment(&ctx, &p, &q, s, t, None).map_err(|e| CliError::numerical("cross_moment", inputs(), e))?;
            Ok((frac, classical))
        })
        .collect::<Result<_, CliError>>()?;

    let mut table = Table::new(vec!["s", "t", "value_fractional", "value_classical"]);
    for (&(s, t), (f, c)) in points.iter().zip(rows) {
        table.push(vec![s.into(), t.into(), f.into(), c.into()]);
    }
    Ok(table)
}

pub fn simulate(cfg: &JobConfig, x0: Option<&[f64]>, sim: &SimConfig) -> Result<Table, CliError> {
    let model = require_model(cfg)?;
    let init = match x0 {
        Some(x) => {
            check_state(model, x, "query.x0")?;
            InitialCondition::Fixed(x.to_vec())
        }
        None => InitialCondition::Stationary,
    };
    let ts = grid(&cfg.grids.t, "grids.t", time_ok, "a non-negative time")?;
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::config("grids.t", "simulation grid must be sorted"));
    }
    let alphas = grid(&cfg.grids.alpha, "grids.alpha", alpha_ok, "in (0, 1)")?;
    let columns = match model.state_dim() {
        1 => vec!["path", "alpha", "t", "l", "x1"],
        _ => vec!["path", "alpha", "t", "l", "x1", "x2"],
    };
    let mut table = Table::new(columns);
    for &a in &alphas {
        let bundle = simulate_bundle(model, a, &init, &ts, sim.n_paths, sim)
            .map_err(|e| CliError::numerical("simulate", format!("model={}, alpha={a}", model.name()), e))?;
        for (i, (ls, xs)) in bundle.l_samples.iter().zip(&bundle.x_samples).enumerate() {
            for ((&t, &l), x) in ts.iter().zip(ls).zip(xs) {
                let mut row = vec![Cell::Int(i as u64), a.into(), t.into(), l.into()];
                row.extend(x.iter().map(|&v| Cell::Num(v)));
                table.push(row);
            }
        }
    }
    Ok(table)
}
