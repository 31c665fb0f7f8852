//! Job files: TOML (preferred) or JSON, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fracpoly::models::ModelSpec;
use fracpoly::montecarlo::SimConfig;
use fracpoly::polybasis::{build_basis, parse_exponent_key, PolyVec};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_MAX_DEGREE: usize = 6;

fn default_max_degree() -> usize {
    DEFAULT_MAX_DEGREE
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Required by every job except `validate`, which falls back to its built-in cases.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    pub query: QuerySpec,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub sim: SimSection,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuerySpec {
    /// `E_x[p(X_{L_t})]` on `grids.t × grids.alpha`; `alpha = 1` is the classical clock.
    Moments { polynomial: PolySpec, x0: Vec<f64> },
    /// Equilibrium correlation of a scalar model on `grids.s × grids.t × grids.alpha`.
    Correlation {},
    /// `E_μ[p(X_{L_{t+s}}) q(X_{L_t})]` on `grids.s × grids.t` at the single `grids.alpha`.
    CrossMoments { p: PolySpec, q: PolySpec },
    /// Sample paths of the time-changed process on `grids.t`.
    Simulate {
        /// Start state; omitted means a stationary start.
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    /// Closed forms against Monte Carlo.
    Validate {
        #[serde(default = "all_suites")]
        suites: Vec<Suite>,
        /// Start state for the moment checks of a configured model.
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Moments,
    Increments,
}

fn all_suites() -> Vec<Suite> {
    vec![Suite::Moments, Suite::Increments]
}

/// Polynomial as `{ "[i,j]" = coefficient, … }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(transparent)]
pub struct PolySpec(pub BTreeMap<String, f64>);

impl PolySpec {
    pub fn to_polyvec(&self, dim: usize, max_degree: usize, key: &str) -> Result<PolyVec, CliError> {
        if self.0.is_empty() {
            return Err(CliError::config(key, "polynomial has no terms"));
        }
        let mut terms = Vec::with_capacity(self.0.len());
        for (k, &c) in &self.0 {
            let m = parse_exponent_key(k).map_err(|e| CliError::config(&format!("{key}.\"{k}\""), e))?;
            if m.dim() != dim {
                return Err(CliError::config(
                    &format!("{key}.\"{k}\""),
                    format!("exponent tuple has {} entries, model dimension is {dim}", m.dim()),
                ));
            }
            if m.degree() > max_degree {
                return Err(CliError::config(
                    &format!("{key}.\"{k}\""),
                    format!("degree {} exceeds max_degree {max_degree}", m.degree()),
                ));
            }
            terms.push((m.exponents().to_vec(), c));
        }
        let degree = terms.iter().map(|(e, _)| e.iter().sum::<u32>() as usize).max().unwrap_or(0);
        let basis = build_basis(dim, degree.max(1)).map_err(|e| CliError::config(key, e))?;
        PolyVec::from_terms(Arc::clone(&basis), terms).map_err(|e| CliError::config(key, e))
    }
}

/// A grid given as a list, or generated by `{ linspace = [a, b, n] }` / `{ logspace = [a, b, n] }`
/// (endpoints inclusive; `logspace` takes the endpoints themselves, not their logarithms).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Linspace { linspace: (f64, f64, usize) },
    Logspace { logspace: (f64, f64, usize) },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::List(Vec::new())
    }
}

impl GridSpec {
    pub fn values(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = match *self {
            GridSpec::List(ref v) => v.clone(),
            GridSpec::Linspace { linspace: (a, b, n) } => spaced(a, b, n, key, |x| x, |x| x)?,
            GridSpec::Logspace { logspace: (a, b, n) } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(CliError::config(key, "logspace endpoints must be positive"));
                }
                spaced(a, b, n, key, f64::ln, f64::exp)?
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config(key, "grid values must be finite"));
        }
        Ok(v)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, GridSpec::List(v) if v.is_empty())
    }
}

fn spaced(a: f64, b: f64, n: usize, key: &str, to: fn(f64) -> f64, from: fn(f64) -> f64) -> Result<Vec<f64>, CliError> {
    if n < 2 {
        return Err(CliError::config(key, "a generated grid needs at least 2 points"));
    }
    let (lo, hi) = (to(a), to(b));
    let mut v: Vec<f64> = (0..n).map(|i| from(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect();
    // Pin the endpoints so they survive the round trip exactly.
    v[0] = a;
    v[n - 1] = b;
    Ok(v)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default)]
    pub t: GridSpec,
    #[serde(default)]
    pub s: GridSpec,
    #[serde(default)]
    pub alpha: GridSpec,
}

/// [`SimConfig`] with every field optional; missing fields take its defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_paths: Option<usize>,
    pub dt_operational: Option<f64>,
    pub dt_subordinator: Option<f64>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
}

impl SimSection {
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<SimConfig, CliError> {
        let d = SimConfig::default();
        let cfg = SimConfig {
            n_paths: self.n_paths.unwrap_or(d.n_paths),
            dt_operational: self.dt_operational.unwrap_or(d.dt_operational),
            dt_subordinator: self.dt_subordinator.unwrap_or(d.dt_subordinator),
            seed: seed_override.or(self.seed).unwrap_or(d.seed),
            horizon: self.horizon.unwrap_or(d.horizon),
        };
        cfg.validate().map_err(|e| CliError::config("sim", e))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

/// Parses TOML, or JSON when the file name ends in `.json`.
pub fn parse_config(text: &str, path: &Path) -> Result<JobConfig, CliError> {
    let cfg: JobConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| CliError::config(&e.path().to_string(), e.inner()))?
    } else {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::config(&e.path().to_string(), e.inner().message()))?
    };
    if cfg.max_degree == 0 {
        return Err(CliError::config("max_degree", "must be at least 1"));
    }
    if let Some(model) = &cfg.model {
        model.validate().map_err(|e| CliError::config("model", e))?;
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<JobConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path)
}
