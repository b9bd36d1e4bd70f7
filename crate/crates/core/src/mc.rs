//! Ensembles of simulated paths and convergence-in-probability diagnostics.
//!
//! Every path `i` of an ensemble is drawn from its own ChaCha8 stream: the
//! generator is seeded with the base seed and switched to stream `i`, so a
//! path never depends on how many others were drawn or in which order.
//! Diffusive parts live on a dyadic grid of `2^-resolution`; jump times are
//! continuous reals and so miss every partition point almost surely.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::convergence::{non_increasing, tail};
use crate::error::{Error, Result};
use crate::multidim::matrix_q_n;
use crate::partitions::{Partition, PartitionScheme};
use crate::paths::{CadlagPath, VectorCadlagPath};
use crate::qv::{cumulative, level_list, q_n};
use crate::skorokhod::{j1_within, uniform_distance};

/// Finest supported simulation grid.
pub const MAX_RESOLUTION: u32 = 24;

/// Partition cells must span at least this many simulation cells.
pub const MIN_AGGREGATION: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum JumpLaw {
    Constant { size: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl JumpLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::Constant { size } => size.is_finite(),
            JumpLaw::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            JumpLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("jump law {self:?}")))
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            JumpLaw::Constant { size } => size,
            JumpLaw::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            JumpLaw::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Brownian { sigma: f64 },
    Poisson { lambda: f64, jump: f64 },
    CompoundPoisson { lambda: f64, sizes: JumpLaw },
    JumpDiffusion { sigma: f64, lambda: f64, sizes: JumpLaw },
    /// Independent `N(0, σ²)` values at every grid point. Its `q_n` grows
    /// without bound.
    WhiteNoise { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProcessModel {
    pub kind: ModelKind,
    pub horizon: f64,
    /// Dyadic level of the simulation grid.
    pub resolution: u32,
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be finite and ≥ 0")))
    }
}

impl ProcessModel {
    pub fn new(kind: ModelKind, horizon: f64, resolution: u32) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        if resolution > MAX_RESOLUTION {
            return Err(Error::InvalidParameter(format!(
                "resolution {resolution} above {MAX_RESOLUTION}"
            )));
        }
        match kind {
            ModelKind::Brownian { sigma } | ModelKind::WhiteNoise { sigma } => {
                check_nonneg("sigma", sigma)?
            }
            ModelKind::Poisson { lambda, jump } => {
                check_nonneg("lambda", lambda)?;
                JumpLaw::Constant { size: jump }.validate()?;
            }
            ModelKind::CompoundPoisson { lambda, sizes } => {
                check_nonneg("lambda", lambda)?;
                sizes.validate()?;
            }
            ModelKind::JumpDiffusion { sigma, lambda, sizes } => {
                check_nonneg("sigma", sigma)?;
                check_nonneg("lambda", lambda)?;
                sizes.validate()?;
            }
        }
        Ok(ProcessModel {
            kind,
            horizon,
            resolution,
        })
    }

    pub fn brownian(sigma: f64, horizon: f64, resolution: u32) -> Result<Self> {
        Self::new(ModelKind::Brownian { sigma }, horizon, resolution)
    }

    pub fn poisson(lambda: f64, jump: f64, horizon: f64, resolution: u32) -> Result<Self> {
        Self::new(ModelKind::Poisson { lambda, jump }, horizon, resolution)
    }

    pub fn compound_poisson(lambda: f64, sizes: JumpLaw, horizon: f64, resolution: u32) -> Result<Self> {
        Self::new(ModelKind::CompoundPoisson { lambda, sizes }, horizon, resolution)
    }

    pub fn jump_diffusion(
        sigma: f64,
        lambda: f64,
        sizes: JumpLaw,
        horizon: f64,
        resolution: u32,
    ) -> Result<Self> {
        Self::new(ModelKind::JumpDiffusion { sigma, lambda, sizes }, horizon, resolution)
    }

    pub fn white_noise(sigma: f64, horizon: f64, resolution: u32) -> Result<Self> {
        Self::new(ModelKind::WhiteNoise { sigma }, horizon, resolution)
    }

    fn grid(&self) -> Partition {
        PartitionScheme::dyadic(self.horizon)
            .and_then(|s| s.generate(self.resolution as usize))
            .expect("validated horizon and resolution")
    }

    /// Rejects analysis levels whose cells are not at least
    /// [`MIN_AGGREGATION`] simulation cells wide.
    pub fn check_levels(&self, scheme: &PartitionScheme, levels: &RangeInclusive<usize>) -> Result<()> {
        let finest = scheme.generate(*levels.end())?;
        let cell = (-(self.resolution as f64)).exp2();
        let mesh = finest.mesh(self.horizon);
        if mesh < MIN_AGGREGATION * cell {
            return Err(Error::InvalidParameter(format!(
                "level {} (mesh {mesh:e}) is too fine for simulation resolution {} (cell {cell:e})",
                levels.end(),
                self.resolution
            )));
        }
        Ok(())
    }

    fn gaussian(&self, sigma: f64, rng: &mut ChaCha8Rng, walk: bool) -> Result<CadlagPath> {
        let grid = self.grid();
        let pts = grid.points();
        let mut values = Vec::with_capacity(pts.len());
        values.push(if walk { 0.0 } else { sigma * rng.sample::<f64, _>(StandardNormal) });
        for w in pts.windows(2) {
            let z: f64 = rng.sample(StandardNormal);
            let prev = *values.last().unwrap();
            values.push(if walk {
                prev + sigma * (w[1] - w[0]).sqrt() * z
            } else {
                sigma * z
            });
        }
        CadlagPath::sampled(pts, &values)
    }

    fn jumps(&self, lambda: f64, sizes: JumpLaw, rng: &mut ChaCha8Rng) -> Result<CadlagPath> {
        let mut jumps = Vec::new();
        if lambda > 0.0 {
            let gap = Exp::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut t = 0.0;
            loop {
                t += gap.sample(rng);
                if t >= self.horizon {
                    break;
                }
                jumps.push((t, sizes.draw(rng)));
            }
        }
        CadlagPath::step(self.horizon, 0.0, &jumps)
    }

    /// One sample path drawn from `rng`.
    pub fn sample_with(&self, rng: &mut ChaCha8Rng) -> Result<CadlagPath> {
        match self.kind {
            ModelKind::Brownian { sigma } => self.gaussian(sigma, rng, true),
            ModelKind::WhiteNoise { sigma } => self.gaussian(sigma, rng, false),
            ModelKind::Poisson { lambda, jump } => {
                self.jumps(lambda, JumpLaw::Constant { size: jump }, rng)
            }
            ModelKind::CompoundPoisson { lambda, sizes } => self.jumps(lambda, sizes, rng),
            ModelKind::JumpDiffusion { sigma, lambda, sizes } => {
                let w = self.gaussian(sigma, rng, true)?;
                let j = self.jumps(lambda, sizes, rng)?;
                CadlagPath::pointwise_combine(&w, &j, (1.0, 1.0))
            }
        }
    }

    fn sigma(&self) -> f64 {
        match self.kind {
            ModelKind::Brownian { sigma } | ModelKind::JumpDiffusion { sigma, .. } => sigma,
            _ => 0.0,
        }
    }

    /// Known quadratic variation of a path drawn from this model:
    /// `σ²t + Σ_{s ≤ t} (Δx(s))²`, with `σ²t` on the simulation grid.
    /// White noise has none.
    pub fn qv_target(&self, path: &CadlagPath) -> Result<CadlagPath> {
        if let ModelKind::WhiteNoise { .. } = self.kind {
            return Err(Error::InvalidParameter(
                "white noise has no quadratic variation".into(),
            ));
        }
        let squares: Vec<(f64, f64)> = path.jumps().map(|(t, d)| (t, d * d)).collect();
        let jumps = cumulative(&squares, self.horizon, true);
        let s2 = self.sigma().powi(2);
        if s2 == 0.0 {
            return Ok(jumps);
        }
        let pts = self.grid().points().to_vec();
        let drift: Vec<f64> = pts.iter().map(|&t| s2 * t).collect();
        CadlagPath::pointwise_combine(&CadlagPath::sampled(&pts, &drift)?, &jumps, (1.0, 1.0))
    }
}

/// Generator of path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `sample_path` for a single seed: stream 0 of that seed.
pub fn sample_path(model: &ProcessModel, seed: u64) -> Result<CadlagPath> {
    model.sample_with(&mut path_rng(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub model: ProcessModel,
    pub paths: usize,
    pub seed: u64,
}

impl Ensemble {
    pub fn new(model: ProcessModel, paths: usize, seed: u64) -> Result<Self> {
        if paths == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one path".into()));
        }
        Ok(Ensemble { model, paths, seed })
    }

    pub fn path(&self, index: usize) -> Result<CadlagPath> {
        self.model.sample_with(&mut path_rng(self.seed, index as u64))
    }

    /// All paths, in index order.
    pub fn sample(&self) -> Result<Vec<CadlagPath>> {
        (0..self.paths).into_par_iter().map(|i| self.path(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    J1,
    Uniform,
}

fn exceeds(metric: Metric, a: &CadlagPath, b: &CadlagPath, eps: f64) -> Result<bool> {
    let h = a.horizon();
    match metric {
        Metric::J1 => Ok(!j1_within(a, b, h, eps)?),
        Metric::Uniform => Ok(uniform_distance(a, b, h)? > eps),
    }
}

/// Last [`WINDOW`](crate::convergence::WINDOW) fractions non-increasing and
/// the final one at most `delta`.
pub fn fractions_decay(fractions: &[f64], delta: f64) -> bool {
    fractions.last().is_some_and(|&f| f <= delta) && non_increasing(tail(fractions))
}

fn fractions(flags: &[Vec<bool>], paths: usize) -> Vec<f64> {
    let width = flags.first().map_or(0, Vec::len);
    (0..width)
        .map(|k| flags.iter().filter(|f| f[k]).count() as f64 / paths as f64)
        .collect()
}

fn check_tolerances(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0) || !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} must be > 0 and delta = {delta} in [0, 1]"
        )));
    }
    Ok(())
}

fn partitions(scheme: &PartitionScheme, list: &[usize]) -> Result<Vec<Partition>> {
    list.iter().map(|&n| scheme.generate(n)).collect()
}

fn qn_paths(x: &CadlagPath, parts: &[Partition]) -> Result<Vec<CadlagPath>> {
    parts.iter().map(|p| Ok(q_n(x, p)?.into_path())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyReport {
    pub metric: Metric,
    pub pairs: Vec<(usize, usize)>,
    /// Fraction of paths with `d(q_n, q_{n+1}) > eps`, per pair.
    pub fractions: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub passed: bool,
}

/// Empirical `P(d(q_n, q_{n+1}) > eps)` over consecutive levels.
pub fn cauchy_in_probability(
    e: &Ensemble,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    eps: f64,
    delta: f64,
    metric: Metric,
) -> Result<CauchyReport> {
    check_tolerances(eps, delta)?;
    let list = level_list(&levels)?;
    e.model.check_levels(scheme, &levels)?;
    let parts = partitions(scheme, &list)?;
    let flags = (0..e.paths)
        .into_par_iter()
        .map(|i| {
            let qs = qn_paths(&e.path(i)?, &parts)?;
            qs.windows(2)
                .map(|w| exceeds(metric, &w[0], &w[1], eps))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let fractions = fractions(&flags, e.paths);
    Ok(CauchyReport {
        metric,
        pairs: list.windows(2).map(|w| (w[0], w[1])).collect(),
        passed: fractions_decay(&fractions, delta),
        fractions,
        eps,
        delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityReport {
    pub metric: Metric,
    pub levels: Vec<usize>,
    /// Fraction of paths with `d(q_n, target) > eps`, per level.
    pub fractions: Vec<f64>,
    /// Ensemble mean of `q_n(T)`, per level.
    pub terminal_mean: Vec<f64>,
    /// Unbiased ensemble variance of `q_n(T)`, per level.
    pub terminal_variance: Vec<f64>,
    pub eps: f64,
}

fn moments(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var)
}

/// Empirical `P(d(q_n, target(x)) > eps)` per level.
pub fn prob_convergence_estimate(
    e: &Ensemble,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    target: &(dyn Fn(&CadlagPath) -> Result<CadlagPath> + Sync),
    eps: f64,
    metric: Metric,
) -> Result<ProbabilityReport> {
    check_tolerances(eps, 1.0)?;
    let list = level_list(&levels)?;
    e.model.check_levels(scheme, &levels)?;
    let parts = partitions(scheme, &list)?;
    let h = e.model.horizon;
    let rows = (0..e.paths)
        .into_par_iter()
        .map(|i| {
            let x = e.path(i)?;
            let goal = target(&x)?;
            let qs = qn_paths(&x, &parts)?;
            let flags = qs
                .iter()
                .map(|q| exceeds(metric, q, &goal, eps))
                .collect::<Result<Vec<bool>>>()?;
            let ends: Vec<f64> = qs.iter().map(|q| q.value_at(h)).collect();
            Ok((flags, ends))
        })
        .collect::<Result<Vec<_>>>()?;
    let flags: Vec<Vec<bool>> = rows.iter().map(|r| r.0.clone()).collect();
    let (mut terminal_mean, mut terminal_variance) = (Vec::new(), Vec::new());
    for k in 0..list.len() {
        let (m, v) = moments(rows.iter().map(|r| r.1[k]), e.paths);
        terminal_mean.push(m);
        terminal_variance.push(v);
    }
    Ok(ProbabilityReport {
        metric,
        levels: list,
        fractions: fractions(&flags, e.paths),
        terminal_mean,
        terminal_variance,
        eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "UCP")]
    Ucp,
    #[serde(rename = "J1-only")]
    J1Only,
    #[serde(rename = "none")]
    Neither,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Ucp => "UCP",
            Verdict::J1Only => "J1-only",
            Verdict::Neither => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UcpReport {
    pub levels: Vec<usize>,
    pub uniform: Vec<f64>,
    pub j1: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub verdict: Verdict,
}

/// Distances of `q_n` to the model's quadratic variation under both
/// metrics. "UCP" when the uniform fractions decay, "J1-only" when only the
/// J1 fractions do.
pub fn ucp_vs_j1(
    e: &Ensemble,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    eps: f64,
    delta: f64,
) -> Result<UcpReport> {
    check_tolerances(eps, delta)?;
    let target = |x: &CadlagPath| e.model.qv_target(x);
    let list = level_list(&levels)?;
    e.model.check_levels(scheme, &levels)?;
    let parts = partitions(scheme, &list)?;
    let rows = (0..e.paths)
        .into_par_iter()
        .map(|i| {
            let x = e.path(i)?;
            let goal = target(&x)?;
            let mut row = Vec::with_capacity(2 * parts.len());
            for q in qn_paths(&x, &parts)? {
                let far = exceeds(Metric::Uniform, &q, &goal, eps)?;
                // J1 ≤ uniform, so a close uniform distance settles both
                row.push(far);
                row.push(far && exceeds(Metric::J1, &q, &goal, eps)?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let all = fractions(&rows, e.paths);
    let uniform: Vec<f64> = all.iter().step_by(2).copied().collect();
    let j1: Vec<f64> = all.iter().skip(1).step_by(2).copied().collect();
    let verdict = if fractions_decay(&uniform, delta) {
        Verdict::Ucp
    } else if fractions_decay(&j1, delta) {
        Verdict::J1Only
    } else {
        Verdict::Neither
    };
    Ok(UcpReport {
        levels: list,
        uniform,
        j1,
        eps,
        delta,
        verdict,
    })
}

/// How component `i` of a vector model is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "component", rename_all = "snake_case")]
pub enum ComponentSpec {
    Independent { model: ProcessModel },
    CopyOf { index: usize },
    Negated { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorEnsemble {
    pub components: Vec<ComponentSpec>,
    pub paths: usize,
    pub seed: u64,
}

impl VectorEnsemble {
    pub fn new(components: Vec<ComponentSpec>, paths: usize, seed: u64) -> Result<Self> {
        if paths == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one path".into()));
        }
        let mut horizon = None;
        for (i, c) in components.iter().enumerate() {
            match *c {
                ComponentSpec::Independent { model } => match horizon {
                    None => horizon = Some(model.horizon),
                    Some(h) if h != model.horizon => {
                        return Err(Error::HorizonMismatch {
                            left: h,
                            right: model.horizon,
                        })
                    }
                    _ => {}
                },
                ComponentSpec::CopyOf { index } | ComponentSpec::Negated { index } => {
                    if index >= i {
                        return Err(Error::InvalidParameter(format!(
                            "component {i} refers to component {index}, which is not earlier"
                        )));
                    }
                }
            }
        }
        if horizon.is_none() {
            return Err(Error::InvalidParameter(
                "at least one component must be independent".into(),
            ));
        }
        Ok(VectorEnsemble {
            components,
            paths,
            seed,
        })
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn path(&self, index: usize) -> Result<VectorCadlagPath> {
        let mut rng = path_rng(self.seed, index as u64);
        let mut out: Vec<CadlagPath> = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let next = match *c {
                ComponentSpec::Independent { model } => model.sample_with(&mut rng)?,
                ComponentSpec::CopyOf { index } => out[index].clone(),
                ComponentSpec::Negated { index } => {
                    CadlagPath::pointwise_combine(&out[index], &out[index], (-1.0, 0.0))?
                }
            };
            out.push(next);
        }
        VectorCadlagPath::new(out)
    }

    fn check_levels(&self, scheme: &PartitionScheme, levels: &RangeInclusive<usize>) -> Result<()> {
        for c in &self.components {
            if let ComponentSpec::Independent { model } = c {
                model.check_levels(scheme, levels)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryFractions {
    pub i: usize,
    pub j: usize,
    pub fractions: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentwiseReport {
    pub pairs: Vec<(usize, usize)>,
    pub entries: Vec<EntryFractions>,
    pub eps: f64,
    pub delta: f64,
    /// Every entry passed.
    pub passed: bool,
}

/// [`cauchy_in_probability`] (J1) on every entry `i ≤ j` of `𝐪_n`.
pub fn componentwise_reduction(
    e: &VectorEnsemble,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    eps: f64,
    delta: f64,
) -> Result<ComponentwiseReport> {
    check_tolerances(eps, delta)?;
    let m = e.dimension();
    if m < 2 {
        return Err(Error::Dimension { expected: 2, got: m });
    }
    let list = level_list(&levels)?;
    e.check_levels(scheme, &levels)?;
    let parts = partitions(scheme, &list)?;
    let idx: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let flags = (0..e.paths)
        .into_par_iter()
        .map(|k| {
            let x = e.path(k)?;
            let mats = parts
                .iter()
                .map(|p| matrix_q_n(&x, p))
                .collect::<Result<Vec<_>>>()?;
            let mut row = Vec::with_capacity(idx.len() * (mats.len() - 1));
            for &(i, j) in &idx {
                for w in mats.windows(2) {
                    row.push(exceeds(Metric::J1, w[0].entry(i, j), w[1].entry(i, j), eps)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let all = fractions(&flags, e.paths);
    let width = list.len() - 1;
    let entries: Vec<EntryFractions> = idx
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let fr = all[k * width..(k + 1) * width].to_vec();
            EntryFractions {
                i,
                j,
                passed: fractions_decay(&fr, delta),
                fractions: fr,
            }
        })
        .collect();
    Ok(ComponentwiseReport {
        pairs: list.windows(2).map(|w| (w[0], w[1])).collect(),
        passed: entries.iter().all(|e| e.passed),
        entries,
        eps,
        delta,
    })
}
