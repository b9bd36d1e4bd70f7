//! Run configuration: command-line flags merged over an optional JSON file.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use cadlag_qv::mc::{JumpLaw, Metric, ModelKind};
use cadlag_qv::{LimitOptions, PartitionScheme};
use clap::Args;
use serde::Deserialize;

use crate::CliError;

/// Every option any command reads. Commands check the ones they need.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// CSV path file (`t,v` or `t,v1,...,vm`).
    #[arg(long)]
    pub path: Option<PathBuf>,
    #[arg(long)]
    pub x: Option<PathBuf>,
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// `dyadic`, `uniform` or `file:<path>`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Inclusive level range `a..b`.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    /// `q`, `s` or `p`.
    #[arg(long)]
    pub mode: Option<String>,
    /// `poly:c0,c1,...` or `square`.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// e.g. `brownian:sigma=1` or `poisson:lambda=2,jump=1`.
    #[arg(long)]
    pub model: Option<String>,
    /// Dyadic level of the simulation grid.
    #[arg(long)]
    pub resolution: Option<u32>,
    /// `j1` or `uniform`.
    #[arg(long)]
    pub metric: Option<String>,
    /// JSON report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV plot data destination.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Also run the discretized time-change search.
    #[arg(long)]
    #[serde(default)]
    pub oracle: bool,
    /// Exit 1 when the verdict is non-convergence.
    #[arg(long)]
    #[serde(default)]
    pub strict: bool,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($field:ident),*) => {
        RunConfig {
            $($field: $flags.$field.or($file.$field),)*
            oracle: $flags.oracle || $file.oracle,
            strict: $flags.strict || $file.strict,
        }
    };
}

impl RunConfig {
    /// Flags win over the file.
    pub fn over(self, file: RunConfig) -> RunConfig {
        let flags = self;
        overlay!(flags, file; path, x, y, scheme, levels, t, mode, f, horizon, tol, atol,
            eps, delta, seed, paths, model, resolution, metric, out, plot)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn require<'a, T>(&self, name: &str, v: &'a Option<T>) -> Result<&'a T, CliError> {
        v.as_ref().ok_or_else(|| CliError::Config(format!("--{name} is required")))
    }

    pub fn levels(&self) -> Result<RangeInclusive<usize>, CliError> {
        parse_levels(self.require("levels", &self.levels)?)
    }

    pub fn scheme(&self, horizon: f64) -> Result<PartitionScheme, CliError> {
        parse_scheme(self.scheme.as_deref().unwrap_or("dyadic"), horizon)
    }

    pub fn limit_options(&self) -> Result<LimitOptions, CliError> {
        let d = LimitOptions::default();
        LimitOptions::new(self.tol.unwrap_or(d.tol), self.atol.unwrap_or(d.atol))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn positive(&self, name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
        match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(CliError::Config(format!("--{name} must be positive, got {x}")))
            }
            _ => Ok(v),
        }
    }
}

pub fn parse_levels(s: &str) -> Result<RangeInclusive<usize>, CliError> {
    let bad = || CliError::Config(format!("levels `{s}`: expected `a..b`"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(CliError::Config(format!("level range `{s}` is empty")));
    }
    Ok(a..=b)
}

pub fn parse_scheme(s: &str, horizon: f64) -> Result<PartitionScheme, CliError> {
    match s {
        "dyadic" => PartitionScheme::dyadic(horizon).map_err(|e| CliError::Config(e.to_string())),
        "uniform" => PartitionScheme::uniform(horizon).map_err(|e| CliError::Config(e.to_string())),
        _ => match s.strip_prefix("file:") {
            Some(file) => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| CliError::Format(format!("{file}: {e}")))?;
                PartitionScheme::parse_explicit(&text)
                    .map_err(|e| CliError::Format(format!("{file}: {e}")))
            }
            None => Err(CliError::Config(format!(
                "scheme `{s}`: expected dyadic, uniform or file:<path>"
            ))),
        },
    }
}

pub fn parse_metric(s: &str) -> Result<Metric, CliError> {
    match s {
        "j1" => Ok(Metric::J1),
        "uniform" => Ok(Metric::Uniform),
        _ => Err(CliError::Config(format!("metric `{s}`: expected j1 or uniform"))),
    }
}

/// `name:key=value,...`. Missing keys take unit defaults.
pub fn parse_model(s: &str) -> Result<ModelKind, CliError> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = Vec::new();
    for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("model parameter `{kv}`: expected key=value")))?;
        params.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut used = vec![false; params.len()];
    let mut get = |key: &str, default: f64| -> Result<f64, CliError> {
        match params.iter().position(|(k, _)| k == key) {
            Some(i) => {
                used[i] = true;
                params[i]
                    .1
                    .parse()
                    .map_err(|_| CliError::Config(format!("model parameter {key} = `{}`", params[i].1)))
            }
            None => Ok(default),
        }
    };
    let kind = match name {
        "brownian" => ModelKind::Brownian { sigma: get("sigma", 1.0)? },
        "white-noise" => ModelKind::WhiteNoise { sigma: get("sigma", 1.0)? },
        "poisson" => ModelKind::Poisson {
            lambda: get("lambda", 1.0)?,
            jump: get("jump", 1.0)?,
        },
        "compound-poisson" => ModelKind::CompoundPoisson {
            lambda: get("lambda", 1.0)?,
            sizes: jump_law(&params, &mut get)?,
        },
        "jump-diffusion" => ModelKind::JumpDiffusion {
            sigma: get("sigma", 1.0)?,
            lambda: get("lambda", 1.0)?,
            sizes: jump_law(&params, &mut get)?,
        },
        _ => {
            return Err(CliError::Config(format!(
                "model `{name}`: expected brownian, poisson, compound-poisson, jump-diffusion or white-noise"
            )))
        }
    };
    if let Some(i) = used.iter().position(|u| !u) {
        if params[i].0 != "law" {
            return Err(CliError::Config(format!("model `{name}` has no parameter `{}`", params[i].0)));
        }
    }
    Ok(kind)
}

fn jump_law(
    params: &[(String, String)],
    get: &mut impl FnMut(&str, f64) -> Result<f64, CliError>,
) -> Result<JumpLaw, CliError> {
    let law = params
        .iter()
        .find(|(k, _)| k == "law")
        .map(|(_, v)| v.as_str())
        .unwrap_or("normal");
    match law {
        "constant" => Ok(JumpLaw::Constant { size: get("size", 1.0)? }),
        "normal" => Ok(JumpLaw::Normal {
            mean: get("mean", 0.0)?,
            sd: get("sd", 1.0)?,
        }),
        "uniform" => Ok(JumpLaw::Uniform {
            lo: get("lo", -1.0)?,
            hi: get("hi", 1.0)?,
        }),
        _ => Err(CliError::Config(format!("jump law `{law}`: expected constant, normal or uniform"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("4..10").unwrap(), 4..=10);
        assert_eq!(parse_levels("4..=4").unwrap(), 4..=4);
        assert!(matches!(parse_levels("5..4"), Err(CliError::Config(_))));
        assert!(parse_levels("4-10").is_err());
    }

    #[test]
    fn models() {
        assert_eq!(
            parse_model("poisson:lambda=2,jump=1").unwrap(),
            ModelKind::Poisson { lambda: 2.0, jump: 1.0 }
        );
        assert_eq!(parse_model("brownian").unwrap(), ModelKind::Brownian { sigma: 1.0 });
        assert_eq!(
            parse_model("jump-diffusion:sigma=0.5,law=uniform,lo=0,hi=2").unwrap(),
            ModelKind::JumpDiffusion {
                sigma: 0.5,
                lambda: 1.0,
                sizes: JumpLaw::Uniform { lo: 0.0, hi: 2.0 }
            }
        );
        assert!(parse_model("brownian:lambda=2").is_err());
        assert!(parse_model("levy").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfig =
            serde_json::from_str(r#"{"levels": "4..8", "tol": 0.5, "strict": true}"#).unwrap();
        let flags = RunConfig {
            levels: Some("6..9".into()),
            ..RunConfig::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.levels.as_deref(), Some("6..9"));
        assert_eq!(merged.tol, Some(0.5));
        assert!(merged.strict);
    }
}
