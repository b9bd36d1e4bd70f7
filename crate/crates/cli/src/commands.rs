use std::io::Write;

use cadlag_qv::calculus::{ito_terms, SmoothFunction};
use cadlag_qv::io::{read_path_file, read_vector_path_file};
use cadlag_qv::mc::{
    cauchy_in_probability, prob_convergence_estimate, Ensemble, ModelKind, ProcessModel,
    MAX_RESOLUTION,
};
use cadlag_qv::multidim::MatrixStepPath;
use cadlag_qv::skorokhod::oracle::{j1_grid, DEFAULT_STEP};
use cadlag_qv::skorokhod::uniform_distance;
use cadlag_qv::{
    j1_distance_compact, matrix_qv_limit, p_n, q_n, s_n, CadlagPath, PartitionScheme,
};
use serde_json::{json, Value};

use crate::config::{parse_metric, parse_model, RunConfig};
use crate::{CliError, Verdict};

const SCHEMA: u32 = 1;

fn verdict(settled: bool) -> Verdict {
    if settled {
        Verdict::Settled
    } else {
        Verdict::Unsettled
    }
}

fn report(command: &str, mut body: Value) -> Value {
    let mut out = json!({ "schema": SCHEMA, "command": command });
    out.as_object_mut()
        .unwrap()
        .append(body.as_object_mut().expect("report body is an object"));
    out
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// To `--out` when given, otherwise stdout.
fn emit(c: &RunConfig, report: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("reports serialize") + "\n";
    match &c.out {
        Some(p) => write_file(p, &text),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn scalar_path(c: &RunConfig, name: &str, v: &Option<std::path::PathBuf>) -> Result<CadlagPath, CliError> {
    read_path_file(c.require(name, v)?).map_err(|e| CliError::Format(e.to_string()))
}

fn time(c: &RunConfig, x: &CadlagPath) -> Result<f64, CliError> {
    let t = c.t.unwrap_or(x.horizon());
    if !(0.0..=x.horizon()).contains(&t) {
        return Err(CliError::Config(format!("--t {t} outside [0, {}]", x.horizon())));
    }
    Ok(t)
}

fn knots(x: &CadlagPath) -> Value {
    x.knots().iter().map(|k| json!([k.time, k.value])).collect()
}

fn matrix_at(m: &MatrixStepPath, t: f64) -> Result<Value, CliError> {
    let a = m.evaluate(t)?;
    Ok((0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect::<Vec<_>>())
        .collect())
}

pub fn qv_compute(c: &RunConfig) -> Result<Verdict, CliError> {
    let x = scalar_path(c, "path", &c.path)?;
    let scheme = c.scheme(x.horizon())?;
    let levels = c.levels()?;
    let t = time(c, &x)?;
    let mode = c.mode.as_deref().unwrap_or("q");
    if !matches!(mode, "q" | "s" | "p") {
        return Err(CliError::Config(format!("mode `{mode}`: expected q, s or p")));
    }
    let mut rows = Vec::new();
    for n in levels {
        let p = scheme.generate(n)?;
        let v = match mode {
            "q" => q_n(&x, &p)?.path().evaluate(t)?,
            "s" => s_n(&x, &p, t)?,
            _ => p_n(&x, &p)?.path().evaluate(t)?,
        };
        println!("{n} {v}");
        rows.push(json!({ "level": n, "mesh": p.mesh(x.horizon()), "value": v }));
    }
    if c.out.is_some() {
        emit(c, &report("qv compute", json!({ "mode": mode, "t": t, "levels": rows })))?;
    }
    Ok(Verdict::Settled)
}

pub fn qv_limit(c: &RunConfig) -> Result<Verdict, CliError> {
    let x = scalar_path(c, "path", &c.path)?;
    let scheme = c.scheme(x.horizon())?;
    let levels = c.levels()?;
    let t = time(c, &x)?;
    let out = cadlag_qv::qv_limit(&x, &scheme, levels.clone(), &c.limit_options()?)?;
    let r = &out.report;
    let values = r
        .levels
        .iter()
        .map(|&n| Ok(q_n(&x, &scheme.generate(n)?)?.path().evaluate(t)?))
        .collect::<Result<Vec<f64>, CliError>>()?;
    if let Some(plot) = &c.plot {
        let mut csv = String::from("level,j1_distance,uniform_distance,value_at_t\n");
        for (k, n) in r.levels.iter().enumerate() {
            csv.push_str(&format!(
                "{n},{:?},{:?},{:?}\n",
                r.j1_to_limit[k], r.uniform_to_limit[k], values[k]
            ));
        }
        write_file(plot, &csv)?;
    }
    let decomposition = out.decomposition.as_ref().map(|d| {
        json!({
            "jump_part": d.jump_part().iter().map(|&(s, m)| json!([s, m])).collect::<Value>(),
            "continuous_part": knots(d.continuous_part()),
        })
    });
    let body = json!({
        "t": t,
        "report": r,
        "value_at_t": values,
        "limit": out.limit.as_ref().map(|l| knots(l.path())),
        "decomposition": decomposition,
        "violation": out.violation.as_ref().map(|e| e.to_string()),
    });
    emit(c, &report("qv limit", body))?;
    Ok(verdict(r.converged))
}

pub fn qv_matrix(c: &RunConfig) -> Result<Verdict, CliError> {
    let path = c.require("path", &c.path)?;
    let x = read_vector_path_file(path).map_err(|e| CliError::Format(e.to_string()))?;
    let scheme = c.scheme(x.horizon())?;
    let out = matrix_qv_limit(&x, &scheme, c.levels()?, &c.limit_options()?)?;
    let modes: Vec<Value> = out
        .entries
        .iter()
        .map(|e| json!({ "i": e.i, "j": e.j, "mode": e.report.mode, "converged": e.report.converged }))
        .collect();
    let horizon = x.horizon();
    let body = json!({
        "dimension": x.dimension(),
        "horizon": horizon,
        "converged": out.converged,
        "modes": modes,
        "entries": out.entries,
        "limit_at_horizon": out.limit.as_ref().map(|m| matrix_at(m, horizon)).transpose()?,
        "continuous_at_horizon": out.continuous.as_ref().map(|m| matrix_at(m, horizon)).transpose()?,
    });
    emit(c, &report("qv matrix", body))?;
    Ok(verdict(out.converged))
}

pub fn dist(c: &RunConfig) -> Result<Verdict, CliError> {
    let x = scalar_path(c, "x", &c.x)?;
    let y = scalar_path(c, "y", &c.y)?;
    let horizon = c
        .positive("horizon", c.horizon)?
        .unwrap_or(x.horizon().min(y.horizon()));
    let (d, lambda) = j1_distance_compact(&x, &y, horizon)?;
    let mut body = json!({
        "horizon": horizon,
        "distance": d,
        "uniform_distance": uniform_distance(&x, &y, horizon)?,
        "lambda_anchors": lambda.anchors().iter().map(|&(s, u)| json!([s, u])).collect::<Value>(),
    });
    if c.oracle {
        body["oracle"] = json!({
            "distance": j1_grid(&x, &y, horizon, DEFAULT_STEP)?,
            "step": DEFAULT_STEP,
        });
    }
    emit(c, &report("dist", body))?;
    Ok(Verdict::Settled)
}

fn smooth_function(spec: &str) -> Result<SmoothFunction, CliError> {
    if spec == "square" {
        return Ok(SmoothFunction::square());
    }
    let coeffs = spec
        .strip_prefix("poly:")
        .ok_or_else(|| CliError::Config(format!("--f `{spec}`: expected poly:c0,c1,... or square")))?
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("--f coefficient `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    SmoothFunction::polynomial(&coeffs).map_err(|e| CliError::Config(e.to_string()))
}

pub fn ito(c: &RunConfig) -> Result<Verdict, CliError> {
    let x = scalar_path(c, "path", &c.path)?;
    let f = smooth_function(c.require("f", &c.f)?)?;
    let scheme = c.scheme(x.horizon())?;
    let t = time(c, &x)?;
    let tol = c.positive("tol", c.tol)?.unwrap_or(1e-9);
    let terms = c
        .levels()?
        .map(|n| ito_terms(&f, &x, &scheme, n, t))
        .collect::<Result<Vec<_>, _>>()?;
    let last = terms.last().expect("level range is non-empty");
    let settled = last.residual.abs() <= tol * last.increment.abs().max(1.0);
    let body = json!({ "f": f.label(), "t": t, "tol": tol, "terms": terms, "settled": settled });
    emit(c, &report("ito", body))?;
    Ok(verdict(settled))
}

/// Coarsest simulation grid that the finest level still aggregates.
fn default_resolution(scheme: &PartitionScheme, top: usize, horizon: f64) -> Result<u32, CliError> {
    let mesh = scheme.generate(top)?.mesh(horizon);
    let r = (4.0 / mesh).log2().ceil().max(0.0) as u32;
    Ok(r.min(MAX_RESOLUTION))
}

pub fn mc_run(c: &RunConfig) -> Result<Verdict, CliError> {
    let seed = *c.require("seed", &c.seed)?;
    let kind = parse_model(c.require("model", &c.model)?)?;
    let horizon = c.positive("horizon", c.horizon)?.unwrap_or(1.0);
    let scheme = c.scheme(horizon)?;
    let levels = c.levels()?;
    let eps = c.positive("eps", c.eps)?.ok_or_else(|| CliError::Config("--eps is required".into()))?;
    let delta = c.positive("delta", c.delta)?.unwrap_or(0.05);
    let metric = parse_metric(c.metric.as_deref().unwrap_or("j1"))?;
    let paths = c.paths.unwrap_or(100);
    let resolution = match c.resolution {
        Some(r) => r,
        None => default_resolution(&scheme, *levels.end(), horizon)?,
    };
    let config = |e: cadlag_qv::Error| CliError::Config(e.to_string());
    let model = ProcessModel::new(kind, horizon, resolution).map_err(config)?;
    model.check_levels(&scheme, &levels).map_err(config)?;
    let e = Ensemble::new(model, paths, seed).map_err(config)?;
    let cauchy = cauchy_in_probability(&e, &scheme, levels.clone(), eps, delta, metric)?;
    let target = |x: &CadlagPath| e.model.qv_target(x);
    let probability = match kind {
        ModelKind::WhiteNoise { .. } => None,
        _ => Some(prob_convergence_estimate(&e, &scheme, levels, &target, eps, metric)?),
    };
    let body = json!({
        "model": model,
        "paths": paths,
        "seed": seed,
        "cauchy": cauchy,
        "probability": probability,
    });
    emit(c, &report("mc run", body))?;
    Ok(verdict(cauchy.passed))
}
