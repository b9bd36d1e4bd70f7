//! Discrete quadratic-variation approximants and their limit.
//!
//! Along a partition `π_n = (t_i)` of `[0, T]`, with increments
//! `δ_i = x(t_{i+1}) - x(t_i)`:
//!
//! | object | definition |
//! |---|---|
//! | [`q_n`] | `Σ_{t_i ≤ t} δ_i²`, the forward increment counted at `t_i` |
//! | [`s_n`] | `Σ_i (x(t_{i+1} ∧ t) - x(t_i ∧ t))²` |
//! | [`p_n`] | `Σ_{t_{i+1} ≤ t} δ_i²`, counted only once the interval closes |
//! | [`mu_n`] | `Σ_i δ_i² δ(t_i)`, whose distribution function is `q_n` |
//!
//! `q_n` and `p_n` are step functions; `s_n` moves continuously inside the
//! last interval and is therefore exposed pointwise.

use std::ops::{Deref, RangeInclusive};

use rayon::prelude::*;
use serde::Serialize;

use crate::convergence::{settles, tail, Mode, WINDOW};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::partitions::{Partition, PartitionScheme};
use crate::paths::{CadlagPath, Knot};
use crate::skorokhod::{classify, j1_distance_compact, uniform_distance};

/// A non-negative, non-decreasing step path.
///
/// The value at 0 need not vanish: `q_n(0) = δ_0²` already counts the first
/// increment.
#[derive(Debug, Clone, PartialEq)]
pub struct StepIncreasing(CadlagPath);

impl StepIncreasing {
    pub fn new(path: CadlagPath) -> Result<Self> {
        let knots = path.knots();
        if knots[0].value < 0.0 {
            return Err(Error::NotMonotone {
                t: 0.0,
                drop: -knots[0].value,
            });
        }
        if let Some(w) = knots.windows(2).find(|w| w[1].value < w[0].value) {
            return Err(Error::NotMonotone {
                t: w[1].time,
                drop: w[0].value - w[1].value,
            });
        }
        Ok(StepIncreasing(path))
    }

    pub fn path(&self) -> &CadlagPath {
        &self.0
    }

    pub fn into_path(self) -> CadlagPath {
        self.0
    }
}

impl Deref for StepIncreasing {
    type Target = CadlagPath;

    fn deref(&self) -> &CadlagPath {
        &self.0
    }
}

impl AsRef<CadlagPath> for StepIncreasing {
    fn as_ref(&self) -> &CadlagPath {
        &self.0
    }
}

fn check_cover(x: &CadlagPath, p: &Partition) -> Result<()> {
    if p.last() < x.horizon() {
        return Err(Error::HorizonMismatch {
            left: p.last(),
            right: x.horizon(),
        });
    }
    Ok(())
}

fn check_time(x: &CadlagPath, t: f64) -> Result<()> {
    if (0.0..=x.horizon()).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain {
            t,
            lo: 0.0,
            hi: x.horizon(),
        })
    }
}

/// `(t_i, x(t_{i+1}) - x(t_i))` for every partition point `t_i ≤ T`.
pub(crate) fn increments(x: &CadlagPath, p: &Partition) -> Result<Vec<(f64, f64)>> {
    check_cover(x, p)?;
    let pts = p.points();
    let mut out = Vec::with_capacity(pts.len());
    for (i, &t) in pts.iter().enumerate() {
        if t > x.horizon() {
            break;
        }
        let next = pts.get(i + 1).copied().unwrap_or(t);
        out.push((t, x.value_at(next) - x.value_at(t)));
    }
    Ok(out)
}

/// Cumulative sum `Σ_{t_i ≤ t} m_i` as a path on `[0, horizon]`. Nonzero
/// masses after 0 are declared jumps when `declare` is set, plain steps
/// otherwise.
pub(crate) fn cumulative(masses: &[(f64, f64)], horizon: f64, declare: bool) -> CadlagPath {
    let mut knots = vec![Knot::new(0.0, 0.0)];
    let mut level = 0.0;
    for &(t, m) in masses {
        if m == 0.0 {
            continue;
        }
        let before = level;
        level += m;
        if t == 0.0 {
            knots[0].value = level;
        } else if knots.last().unwrap().time == t {
            knots.last_mut().unwrap().value = level;
        } else {
            if declare {
                knots.push(Knot::new(t, before));
            }
            knots.push(Knot::new(t, level));
        }
    }
    CadlagPath::new(knots, horizon).expect("cumulative sums are valid paths")
}

/// `q_n(t) = Σ_{π_n ∋ t_i ≤ t} (x(t_{i+1}) - x(t_i))²`. Every nonzero step
/// is a declared jump.
///
/// ```
/// use cadlag_qv::{q_n, CadlagPath, PartitionScheme};
///
/// let t0 = 2f64.sqrt() / 2.0;
/// let x = CadlagPath::step(1.0, 0.0, &[(t0, 1.0)])?;
/// let p = PartitionScheme::dyadic(1.0)?.generate(6)?;
/// let q = q_n(&x, &p)?;
/// assert_eq!(q.evaluate(t0)?, 1.0);
/// // the covering increment is already counted at the last point before t0
/// assert_eq!(q.jump_times(), vec![p.last_strictly_before(t0)?]);
/// # Ok::<(), cadlag_qv::Error>(())
/// ```
pub fn q_n(x: &CadlagPath, p: &Partition) -> Result<StepIncreasing> {
    let squares: Vec<(f64, f64)> = increments(x, p)?
        .into_iter()
        .map(|(t, d)| (t, d * d))
        .collect();
    StepIncreasing::new(cumulative(&squares, x.horizon(), true))
}

/// `s_n(t) = Σ_i (x(t_{i+1} ∧ t) - x(t_i ∧ t))²`.
pub fn s_n(x: &CadlagPath, p: &Partition, t: f64) -> Result<f64> {
    check_cover(x, p)?;
    check_time(x, t)?;
    let pts = p.points();
    let k = p.index_at_or_before(t);
    let mut sum = 0.0;
    for w in pts[..=k].windows(2) {
        let d = x.value_at(w[1]) - x.value_at(w[0]);
        sum += d * d;
    }
    let d = x.value_at(t) - x.value_at(pts[k]);
    Ok(sum + d * d)
}

/// `p_n(t) = Σ_{π_n ∋ t_{i+1} ≤ t} (x(t_{i+1}) - x(t_i))²`.
pub fn p_n(x: &CadlagPath, p: &Partition) -> Result<StepIncreasing> {
    let pts = p.points();
    let squares: Vec<(f64, f64)> = increments(x, p)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, (_, d))| pts.get(i + 1).map(|&t| (t, d * d)))
        .filter(|&(t, _)| t <= x.horizon())
        .collect();
    StepIncreasing::new(cumulative(&squares, x.horizon(), true))
}

/// `μ_n = Σ_i (x(t_{i+1}) - x(t_i))² δ(t_i)`; zero masses are dropped.
pub fn mu_n(x: &CadlagPath, p: &Partition) -> Result<DiscreteMeasure> {
    let atoms = increments(x, p)?
        .into_iter()
        .map(|(t, d)| (t, d * d))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    DiscreteMeasure::new(atoms)
}

/// `Σ_{π_n ∋ t_i ≤ t} (x(t_{i+1}) - x(t_i))⁴`, the sum of squared jumps of
/// `q_n` up to `t`.
pub fn quartic_jump_sum(x: &CadlagPath, p: &Partition, t: f64) -> Result<f64> {
    check_time(x, t)?;
    Ok(increments(x, p)?
        .into_iter()
        .take_while(|&(s, _)| s <= t)
        .map(|(_, d)| d.powi(4))
        .sum())
}

/// `|s_n(t) - q_n(t)|`, checked against the closed form
/// `|a² + 2ab|` with `a = x(t_{i+1}) - x(t)`, `b = x(t) - x(t_i)` and
/// `t_i` the last partition point `≤ t`.
pub fn sn_qn_discrepancy(x: &CadlagPath, p: &Partition, t: f64) -> Result<f64> {
    let s = s_n(x, p, t)?;
    let q = q_n(x, p)?.value_at(t);
    let ti = p.last_at_or_before(t);
    let tnext = p.successor(ti)?;
    let a = x.value_at(tnext) - x.value_at(t);
    let b = x.value_at(t) - x.value_at(ti);
    let closed = (a * a + 2.0 * a * b).abs();
    let observed = (s - q).abs();
    let scale = q.abs().max(s.abs()).max(1.0);
    if (observed - closed).abs() > 1e-12 * scale {
        return Err(Error::Consistency(format!(
            "|s_n - q_n| = {observed} but a² + 2ab gives {closed} at t = {t}"
        )));
    }
    Ok(observed)
}

/// The finest-level estimate of `[x]`: `q_n` with the increment covering
/// each declared jump of `x` moved from the partition point before the jump
/// to the jump time itself, where it becomes a declared jump. Everything
/// else stays where `q_n` puts it, as undeclared steps. This is a time
/// change of `q_n` by less than the mesh.
pub fn limit_estimate(x: &CadlagPath, p: &Partition) -> Result<StepIncreasing> {
    let squares: Vec<(f64, f64)> = increments(x, p)?
        .into_iter()
        .map(|(t, d)| (t, d * d))
        .collect();
    StepIncreasing::new(retimed(&squares, &x.jump_times(), p, x.horizon()))
}

/// Cumulative sum of per-point masses, with the mass of the interval
/// covering each of `jump_times` moved to the jump and declared there. When
/// one interval covers several jumps, its mass goes to the first.
pub(crate) fn retimed(masses: &[(f64, f64)], jump_times: &[f64], p: &Partition, horizon: f64) -> CadlagPath {
    let mut moved = vec![None; masses.len()];
    for &s in jump_times {
        let i = p.index_strictly_before(s);
        if i < moved.len() && moved[i].is_none() {
            moved[i] = Some(s);
        }
    }
    // (time, mass, declared)
    let mut events: Vec<(f64, f64, bool)> = masses
        .iter()
        .zip(&moved)
        .map(|(&(t, m), mv)| match mv {
            Some(s) => (*s, m, true),
            None => (t, m, false),
        })
        .filter(|e| e.1 != 0.0)
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut knots = vec![Knot::new(0.0, 0.0)];
    let mut level = 0.0;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        let mut mass = 0.0;
        let mut declared = false;
        while i < events.len() && events[i].0 == t {
            mass += events[i].1;
            declared |= events[i].2;
            i += 1;
        }
        let before = level;
        level += mass;
        if t == 0.0 {
            knots[0].value = level;
            continue;
        }
        if declared {
            knots.push(Knot::new(t, before));
        }
        knots.push(Knot::new(t, level));
    }
    CadlagPath::new(knots, horizon).expect("re-timed sums are valid paths")
}

/// Stopping and tolerance parameters of [`qv_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitOptions {
    /// Bound on the trailing J1 gaps.
    pub tol: f64,
    /// Mass tolerance of the Lebesgue decomposition.
    pub atol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tol: 1e-3,
            atol: 1e-6,
        }
    }
}

impl LimitOptions {
    pub fn new(tol: f64, atol: f64) -> Result<Self> {
        if !(tol > 0.0) || !(atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (tol = {tol}, atol = {atol})"
            )));
        }
        Ok(LimitOptions { tol, atol })
    }
}

/// Per-level diagnostics of a limit computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<usize>,
    pub meshes: Vec<f64>,
    /// `d_J1(q_n, q_{n+1})` for consecutive levels.
    pub distances: Vec<f64>,
    pub uniform_to_limit: Vec<f64>,
    pub j1_to_limit: Vec<f64>,
    pub converged: bool,
    pub mode: Mode,
}

/// `[x] = [x]^c + Σ (Δx)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QVDecomposition {
    total: StepIncreasing,
    continuous_part: CadlagPath,
    jump_part: Vec<(f64, f64)>,
}

impl QVDecomposition {
    pub fn total(&self) -> &StepIncreasing {
        &self.total
    }

    /// Non-decreasing up to the decomposition tolerance, no declared jumps.
    pub fn continuous_part(&self) -> &CadlagPath {
        &self.continuous_part
    }

    /// `(s, Δx(s)²)` for every declared jump of the path.
    pub fn jump_part(&self) -> &[(f64, f64)] {
        &self.jump_part
    }

    pub fn jump_mass_up_to(&self, t: f64) -> f64 {
        self.jump_part
            .iter()
            .take_while(|(s, _)| *s <= t)
            .map(|(_, m)| m)
            .sum()
    }
}

/// Outcome of [`qv_limit`].
#[derive(Debug, Clone, PartialEq)]
pub struct QvLimit {
    pub report: ConvergenceReport,
    /// Present when the levels converged.
    pub limit: Option<StepIncreasing>,
    pub decomposition: Option<QVDecomposition>,
    /// The reason the decomposition is missing despite convergence.
    pub violation: Option<Error>,
}

impl QvLimit {
    pub fn require_limit(&self) -> Result<&StepIncreasing> {
        self.limit.as_ref().ok_or_else(|| {
            Error::Undecided(format!(
                "q_n did not settle over levels {:?} (last gaps {:?})",
                self.report.levels,
                tail(&self.report.distances)
            ))
        })
    }

    pub fn require_decomposition(&self) -> Result<&QVDecomposition> {
        self.require_limit()?;
        match (&self.decomposition, &self.violation) {
            (Some(d), _) => Ok(d),
            (None, Some(e)) => Err(e.clone()),
            (None, None) => Err(Error::Undecided("no decomposition".into())),
        }
    }
}

pub(crate) fn level_list(levels: &RangeInclusive<usize>) -> Result<Vec<usize>> {
    let list: Vec<usize> = levels.clone().collect();
    if list.len() < WINDOW {
        return Err(Error::InvalidParameter(format!(
            "need at least {WINDOW} levels, got {}..={}",
            levels.start(),
            levels.end()
        )));
    }
    Ok(list)
}

/// Consecutive J1 gaps all below `tol` over the last few levels, and the
/// distances to the finest estimate settled as well.
pub(crate) fn cauchy_settled(distances: &[f64], to_limit: &[f64], tol: f64) -> bool {
    let gaps = tail(distances);
    !gaps.is_empty() && gaps.iter().all(|&g| g <= tol) && settles(to_limit, tol)
}

/// Distances of a sequence of approximants (one per level) to each other
/// and to `limit`, and the resulting verdict.
pub(crate) fn sequence_report(
    levels: Vec<usize>,
    meshes: Vec<f64>,
    qs: &[CadlagPath],
    limit: &CadlagPath,
    tol: f64,
) -> Result<ConvergenceReport> {
    let horizon = limit.horizon();
    let distances = qs
        .par_windows(2)
        .map(|w| Ok(j1_distance_compact(&w[0], &w[1], horizon)?.0))
        .collect::<Result<Vec<_>>>()?;
    let (uniform_to_limit, j1_to_limit): (Vec<f64>, Vec<f64>) = qs
        .par_iter()
        .map(|q| {
            Ok((
                uniform_distance(q, limit, horizon)?,
                j1_distance_compact(q, limit, horizon)?.0,
            ))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let mode = if cauchy_settled(&distances, &j1_to_limit, tol) {
        classify(&uniform_to_limit, &j1_to_limit, tol)
    } else {
        Mode::Divergent
    };
    Ok(ConvergenceReport {
        levels,
        meshes,
        distances,
        uniform_to_limit,
        j1_to_limit,
        converged: mode != Mode::Divergent,
        mode,
    })
}

/// Computes `q_n` over `levels`, decides convergence, and decomposes the
/// finest-level estimate.
///
/// ```
/// use cadlag_qv::{qv_limit, CadlagPath, LimitOptions, Mode, PartitionScheme};
///
/// let t0 = 2f64.sqrt() / 2.0;
/// let x = CadlagPath::step(1.0, 0.0, &[(t0, 1.0)])?;
/// let out = qv_limit(&x, &PartitionScheme::dyadic(1.0)?, 8..=14, &LimitOptions::default())?;
/// assert_eq!(out.report.mode, Mode::J1);
/// let dec = out.require_decomposition()?;
/// assert_eq!(dec.jump_part(), &[(t0, 1.0)]);
/// assert_eq!(dec.continuous_part().sup_norm(), 0.0);
/// # Ok::<(), cadlag_qv::Error>(())
/// ```
pub fn qv_limit(
    x: &CadlagPath,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    opts: &LimitOptions,
) -> Result<QvLimit> {
    let levels = level_list(&levels)?;
    let horizon = x.horizon();
    let parts = levels
        .iter()
        .map(|&n| scheme.generate(n))
        .collect::<Result<Vec<_>>>()?;
    let qs = parts
        .par_iter()
        .map(|p| q_n(x, p))
        .collect::<Result<Vec<_>>>()?;
    let meshes: Vec<f64> = parts.iter().map(|p| p.mesh(horizon)).collect();
    let limit = limit_estimate(x, parts.last().unwrap())?;
    let paths: Vec<CadlagPath> = qs.into_iter().map(StepIncreasing::into_path).collect();
    let report = sequence_report(levels, meshes, &paths, &limit, opts.tol)?;
    if !report.converged {
        return Ok(QvLimit {
            report,
            limit: None,
            decomposition: None,
            violation: None,
        });
    }
    let (decomposition, violation) = match lebesgue_decompose(&limit, x, opts.atol) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e)),
    };
    Ok(QvLimit {
        report,
        limit: Some(limit),
        decomposition,
        violation,
    })
}

/// Splits `limit` into `Σ (Δx)²` over the declared jumps of `x` and a
/// remainder, and checks that the remainder is continuous and increasing:
/// every declared jump of `limit` must sit at a jump of `x` with mass within
/// `atol` of `(Δx)²`, every jump of `x` above `atol` must show up in
/// `limit`, and the remainder may not drop by more than `atol`.
pub fn lebesgue_decompose(limit: &StepIncreasing, x: &CadlagPath, atol: f64) -> Result<QVDecomposition> {
    let (continuous_part, jump_part) = decompose_entry(limit, x, x, atol, true)?;
    Ok(QVDecomposition {
        total: limit.clone(),
        continuous_part,
        jump_part,
    })
}

/// Decomposition of a (co)variation limit against `Δu·Δv`. Declared jumps
/// of `limit` must sit at jumps of `u` or `v` with mass within `atol` of
/// `Δu·Δv`; products above `atol` must appear in `limit`. The remainder is
/// checked for monotonicity when `monotone` is set.
pub(crate) fn decompose_entry(
    limit: &CadlagPath,
    u: &CadlagPath,
    v: &CadlagPath,
    atol: f64,
    monotone: bool,
) -> Result<(CadlagPath, Vec<(f64, f64)>)> {
    for other in [u, v] {
        if limit.horizon() != other.horizon() {
            return Err(Error::HorizonMismatch {
                left: limit.horizon(),
                right: other.horizon(),
            });
        }
    }
    let times = crate::paths::merge_sorted(&u.jump_times(), &v.jump_times());
    let products: Vec<(f64, f64)> = times
        .iter()
        .map(|&s| {
            let du = u.value_at(s) - u.left_value_at(s);
            let dv = v.value_at(s) - v.left_value_at(s);
            (s, du * dv)
        })
        .collect();
    let lj: Vec<(f64, f64)> = limit.jumps().collect();
    for &(t, m) in &lj {
        let Ok(i) = products.binary_search_by(|(s, _)| s.total_cmp(&t)) else {
            return Err(Error::LebesgueViolation {
                t,
                limit_mass: m,
                jump_square: 0.0,
            });
        };
        if (m - products[i].1).abs() > atol {
            return Err(Error::LebesgueViolation {
                t,
                limit_mass: m,
                jump_square: products[i].1,
            });
        }
    }
    for &(s, prod) in &products {
        if prod.abs() > atol && lj.binary_search_by(|(t, _)| t.total_cmp(&s)).is_err() {
            return Err(Error::LebesgueViolation {
                t: s,
                limit_mass: 0.0,
                jump_square: prod,
            });
        }
    }
    let products: Vec<(f64, f64)> = products.into_iter().filter(|p| p.1 != 0.0).collect();
    let jumps = cumulative(&products, limit.horizon(), true);
    let continuous = CadlagPath::pointwise_combine(limit, &jumps, (1.0, -1.0))?.undeclared();
    if monotone {
        let mut peak = f64::NEG_INFINITY;
        for k in continuous.knots() {
            if k.value < peak - atol {
                return Err(Error::ContinuousPartDecreasing {
                    t: k.time,
                    drop: peak - k.value,
                });
            }
            peak = peak.max(k.value);
        }
    }
    Ok((continuous, products))
}
