//! Skorokhod J1 distances between step functions and the convergence
//! diagnostics built on them.
//!
//! On `[0, T]` the distance is
//!
//! ```text
//! d(x, y) = inf_λ max(‖λ - id‖, sup_t |x(λ(t)) - y(t)|)
//! ```
//!
//! over continuous strictly increasing bijections `λ` of `[0, T]`. For step
//! functions the infimum is computed exactly (see [`j1_distance_compact`]).
//! Distances look at the *step view* of a path: every change of value is a
//! discontinuity, declared or not, which is what the topology sees.

mod solver;
pub mod oracle;

use serde::Serialize;

use crate::convergence::{settles, Mode};
use crate::error::{Error, Result};
use crate::partitions::PartitionScheme;
use crate::paths::CadlagPath;
use crate::qv::{q_n, qv_limit, LimitOptions};

/// Values of a path on `[0, T]` as a step function: `values[k]` holds on
/// `[times[k-1], times[k])`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StepView {
    pub(crate) times: Vec<f64>,
    pub(crate) values: Vec<f64>,
}

impl StepView {
    pub(crate) fn new(path: &CadlagPath, horizon: f64) -> Self {
        let knots = path.knots();
        let mut values = vec![knots[0].value];
        let mut times = Vec::new();
        for k in &knots[1..] {
            if k.time > horizon {
                break;
            }
            let last = values.last_mut().unwrap();
            if k.value == *last {
                continue;
            }
            if times.last() == Some(&k.time) {
                *last = k.value;
                if values[values.len() - 2] == k.value {
                    values.pop();
                    times.pop();
                }
            } else {
                times.push(k.time);
                values.push(k.value);
            }
        }
        StepView { times, values }
    }

    fn changes_near(&self, t: f64, radius: f64) -> bool {
        let i = self.times.partition_point(|&s| s < t - radius);
        self.times.get(i).is_some_and(|&s| s <= t + radius)
    }
}

fn check_horizon(x: &CadlagPath, y: &CadlagPath, horizon: f64) -> Result<()> {
    let hi = x.horizon().min(y.horizon());
    if !(horizon > 0.0 && horizon <= hi) {
        return Err(Error::Domain {
            t: horizon,
            lo: 0.0,
            hi,
        });
    }
    Ok(())
}

/// A piecewise-linear, strictly increasing bijection of `[0, T]`, stored as
/// anchors `(t, λ(t))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChange {
    anchors: Vec<(f64, f64)>,
}

impl TimeChange {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("time change: {m}")));
        let (Some(first), Some(last)) = (anchors.first(), anchors.last()) else {
            return bad("no anchors");
        };
        if *first != (0.0, 0.0) {
            return bad("must start at (0, 0)");
        }
        if last.0 != last.1 || last.0 <= 0.0 {
            return bad("must end at (T, T)");
        }
        if anchors.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1) {
            return bad("anchors must increase strictly in both coordinates");
        }
        Ok(TimeChange { anchors })
    }

    pub fn identity(horizon: f64) -> Self {
        TimeChange {
            anchors: vec![(0.0, 0.0), (horizon, horizon)],
        }
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn horizon(&self) -> f64 {
        self.anchors.last().unwrap().0
    }

    fn interpolate(pairs: &[(f64, f64)], t: f64, forward: bool) -> f64 {
        let key = |p: &(f64, f64)| if forward { p.0 } else { p.1 };
        let val = |p: &(f64, f64)| if forward { p.1 } else { p.0 };
        let i = pairs.partition_point(|p| key(p) < t);
        if i == 0 {
            return val(&pairs[0]);
        }
        if i == pairs.len() {
            return val(&pairs[i - 1]);
        }
        let (lo, hi) = (&pairs[i - 1], &pairs[i]);
        if key(hi) == t {
            return val(hi);
        }
        let w = (t - key(lo)) / (key(hi) - key(lo));
        val(lo) + w * (val(hi) - val(lo))
    }

    /// `λ(t)`, clamped to `[0, T]`.
    pub fn apply(&self, t: f64) -> f64 {
        Self::interpolate(&self.anchors, t, true)
    }

    /// `λ⁻¹(u)`; exact at anchors.
    pub fn inverse(&self, u: f64) -> f64 {
        Self::interpolate(&self.anchors, u, false)
    }

    /// `‖λ - id‖_∞`, attained at an anchor.
    pub fn sup_displacement(&self) -> f64 {
        self.anchors
            .iter()
            .map(|(t, l)| (t - l).abs())
            .fold(0.0, f64::max)
    }

    /// Turns the solver's event list into anchors. Events can coincide in
    /// one coordinate (several jumps handled at one instant, which the
    /// infimum allows but a bijection does not); such runs are spread by a
    /// negligible amount around the member whose coordinate is an actual
    /// jump time.
    pub(crate) fn from_events(events: &[solver::Event], horizon: f64) -> Self {
        let mut ev: Vec<solver::Event> = Vec::with_capacity(events.len());
        for e in events {
            match ev.last_mut() {
                Some(last) if last.t == e.t && last.lambda == e.lambda => {
                    last.t_exact |= e.t_exact;
                    last.lambda_exact |= e.lambda_exact;
                }
                _ => ev.push(*e),
            }
        }
        let delta = 1e-12 * horizon.max(1.0);
        spread(&mut ev, delta, horizon, |e| &mut e.t, |e| e.t_exact);
        spread(&mut ev, delta, horizon, |e| &mut e.lambda, |e| e.lambda_exact);
        let mut anchors: Vec<(f64, f64)> = Vec::with_capacity(ev.len());
        for e in ev {
            let ok = anchors
                .last()
                .is_none_or(|&(t, l)| e.t > t && e.lambda > l);
            if ok {
                anchors.push((e.t, e.lambda));
            }
        }
        if anchors.last() != Some(&(horizon, horizon)) {
            anchors.retain(|&(t, l)| t < horizon && l < horizon);
            anchors.push((horizon, horizon));
        }
        TimeChange { anchors }
    }
}

fn spread(
    ev: &mut [solver::Event],
    delta: f64,
    horizon: f64,
    coord: impl Fn(&mut solver::Event) -> &mut f64,
    exact: impl Fn(&solver::Event) -> bool,
) {
    let mut i = 0;
    while i < ev.len() {
        let c = *coord(&mut ev[i]);
        let mut j = i + 1;
        while j < ev.len() && *coord(&mut ev[j]) == c {
            j += 1;
        }
        if j - i > 1 {
            let prev = if i > 0 { *coord(&mut ev[i - 1]) } else { 0.0 };
            let next = if j < ev.len() { *coord(&mut ev[j]) } else { horizon };
            let n = (j - i) as f64;
            let room = |gap: f64| if gap > 0.0 { gap / (2.0 * n) } else { delta };
            let d = delta.min(room(c - prev)).min(room(next - c));
            let pivot = if c == horizon {
                j - 1
            } else if c == 0.0 {
                i
            } else {
                (i..j).find(|&k| exact(&ev[k])).unwrap_or(i)
            };
            for k in i..j {
                *coord(&mut ev[k]) = c + (k as f64 - pivot as f64) * d;
            }
        }
        i = j;
    }
}

/// `max(‖λ - id‖, sup_t |x(λ(t)) - y(t)|)` on `[0, T]`, `T` the horizon of
/// `lambda`.
pub fn objective(x: &CadlagPath, y: &CadlagPath, lambda: &TimeChange) -> Result<f64> {
    let horizon = lambda.horizon();
    check_horizon(x, y, horizon)?;
    let (xv, yv) = (StepView::new(x, horizon), StepView::new(y, horizon));
    // times in y's clock at which x∘λ changes
    let moved: Vec<f64> = xv.times.iter().map(|&s| lambda.inverse(s)).collect();
    let mut best = lambda.sup_displacement();
    let (mut i, mut j) = (0, 0);
    best = best.max((xv.values[0] - yv.values[0]).abs());
    while i < moved.len() || j < yv.times.len() {
        let ti = moved.get(i).copied().unwrap_or(f64::INFINITY);
        let tj = yv.times.get(j).copied().unwrap_or(f64::INFINITY);
        if ti <= tj {
            i += 1;
        }
        if tj <= ti {
            j += 1;
        }
        best = best.max((xv.values[i] - yv.values[j]).abs());
    }
    Ok(best)
}

/// Exact J1 distance on `[0, T]` with a witnessing time change.
///
/// ```
/// use cadlag_qv::{skorokhod::j1_distance_compact, CadlagPath};
///
/// let x = CadlagPath::step(1.0, 0.0, &[(0.3, 1.0)])?;
/// let y = CadlagPath::step(1.0, 0.0, &[(0.4, 1.0)])?;
/// let (d, lambda) = j1_distance_compact(&x, &y, 1.0)?;
/// assert!((d - 0.1).abs() < 1e-12);
/// assert!((lambda.sup_displacement() - 0.1).abs() < 1e-9);
/// # Ok::<(), cadlag_qv::Error>(())
/// ```
pub fn j1_distance_compact(x: &CadlagPath, y: &CadlagPath, horizon: f64) -> Result<(f64, TimeChange)> {
    check_horizon(x, y, horizon)?;
    let (xv, yv) = (StepView::new(x, horizon), StepView::new(y, horizon));
    Ok(solver::solve(&xv, &yv, horizon))
}

/// `d_J1(x, y) ≤ eps` on `[0, T]`, without computing the distance.
pub fn j1_within(x: &CadlagPath, y: &CadlagPath, horizon: f64, eps: f64) -> Result<bool> {
    check_horizon(x, y, horizon)?;
    let (xv, yv) = (StepView::new(x, horizon), StepView::new(y, horizon));
    Ok(solver::within(&xv, &yv, horizon, eps))
}

/// `sup_{[0,T]} |x - y|`.
pub fn uniform_distance(x: &CadlagPath, y: &CadlagPath, horizon: f64) -> Result<f64> {
    check_horizon(x, y, horizon)?;
    Ok(solver::uniform_steps(
        &StepView::new(x, horizon),
        &StepView::new(y, horizon),
    ))
}

/// Offset applied to integer horizons that sit within it of a jump.
pub const HALFLINE_OFFSET: f64 = 1e-6;

/// `Σ_{k=1}^{⌊H⌋} 2⁻ᵏ min(1, d_J1 on [0, T_k])` with `T_k = k`, or
/// `k - eps_h` when either path moves within `eps_h` of `k`.
pub fn j1_distance_halfline(x: &CadlagPath, y: &CadlagPath, eps_h: f64) -> Result<f64> {
    if x.horizon() != y.horizon() {
        return Err(Error::HorizonMismatch {
            left: x.horizon(),
            right: y.horizon(),
        });
    }
    if !(eps_h > 0.0 && eps_h < 0.5) {
        return Err(Error::InvalidParameter(format!("eps_h = {eps_h} outside (0, 0.5)")));
    }
    let h = x.horizon();
    let (xv, yv) = (StepView::new(x, h), StepView::new(y, h));
    let mut total = 0.0;
    for k in 1..=(h.floor() as usize) {
        let mut tk = k as f64;
        if xv.changes_near(tk, eps_h) || yv.changes_near(tk, eps_h) {
            tk -= eps_h;
        }
        let (d, _) = j1_distance_compact(x, y, tk)?;
        total += (k as f64).exp2().recip() * d.min(1.0);
    }
    Ok(total)
}

/// Distances from a sequence to a candidate limit and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub uniform: Vec<f64>,
    pub j1: Vec<f64>,
    pub mode: Mode,
}

/// `uniform` when the uniform distances settle below `tol`, else `j1` when
/// the J1 distances do, else `divergent`.
pub fn classify_convergence_mode(
    seq: &[CadlagPath],
    candidate: &CadlagPath,
    horizon: f64,
    tol: f64,
) -> Result<ModeReport> {
    if seq.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "classification needs at least 3 levels, got {}",
            seq.len()
        )));
    }
    let uniform = seq
        .iter()
        .map(|q| uniform_distance(q, candidate, horizon))
        .collect::<Result<Vec<_>>>()?;
    let j1 = seq
        .iter()
        .map(|q| Ok(j1_distance_compact(q, candidate, horizon)?.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeReport {
        mode: classify(&uniform, &j1, tol),
        uniform,
        j1,
    })
}

pub(crate) fn classify(uniform: &[f64], j1: &[f64], tol: f64) -> Mode {
    if settles(uniform, tol) {
        Mode::Uniform
    } else if settles(j1, tol) {
        Mode::J1
    } else {
        Mode::Divergent
    }
}

/// The four ways of approaching `t` through partition points, relative to
/// `t'_n`, the last point strictly before `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OneSidedCase {
    /// `t_n = t'_n`, observe `q_n(t_n-)`; expect `[x](t-)`.
    LeftLimitAtOrBefore,
    /// `t_n` the point before `t'_n`, observe `q_n(t_n)`; expect `[x](t-)`.
    ValueStrictlyBefore,
    /// `t_n = t'_n`, observe `q_n(t_n)`; expect `[x](t)`.
    ValueAtOrAfter,
    /// `t_n` the point after `t'_n`, observe `q_n(t_n-)`; expect `[x](t)`.
    LeftLimitAfter,
}

impl OneSidedCase {
    pub const ALL: [OneSidedCase; 4] = [
        OneSidedCase::LeftLimitAtOrBefore,
        OneSidedCase::ValueStrictlyBefore,
        OneSidedCase::ValueAtOrAfter,
        OneSidedCase::LeftLimitAfter,
    ];

    fn expects_left_limit(self) -> bool {
        matches!(
            self,
            OneSidedCase::LeftLimitAtOrBefore | OneSidedCase::ValueStrictlyBefore
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneSidedReport {
    pub case: OneSidedCase,
    pub t: f64,
    pub levels: Vec<usize>,
    pub t_n: Vec<f64>,
    pub observed: Vec<f64>,
    pub target: f64,
    pub gaps: Vec<f64>,
    pub passed: bool,
}

fn left_or_value(path: &CadlagPath, t: f64) -> f64 {
    if t == 0.0 {
        path.value_at(0.0)
    } else {
        path.left_value_at(t)
    }
}

/// Checks one of the one-sided limit statements at `t` against the
/// estimated limit of `q_n`.
pub fn one_sided_limit_check(
    x: &CadlagPath,
    scheme: &PartitionScheme,
    t: f64,
    levels: std::ops::RangeInclusive<usize>,
    case: OneSidedCase,
    opts: &LimitOptions,
) -> Result<OneSidedReport> {
    if !(t > 0.0 && t <= x.horizon()) {
        return Err(Error::Domain {
            t,
            lo: 0.0,
            hi: x.horizon(),
        });
    }
    let limit = qv_limit(x, scheme, levels.clone(), opts)?;
    let lim = limit.require_limit()?;
    let target = if case.expects_left_limit() {
        lim.left_value_at(t)
    } else {
        lim.value_at(t)
    };
    let mut t_n = Vec::new();
    let mut observed = Vec::new();
    for n in levels.clone() {
        let p = scheme.generate(n)?;
        let q = q_n(x, &p)?;
        let prime = p.last_strictly_before(t)?;
        let (tn, value) = match case {
            OneSidedCase::LeftLimitAtOrBefore => (prime, left_or_value(&q, prime)),
            OneSidedCase::ValueStrictlyBefore => {
                let tn = p.predecessor(prime)?;
                (tn, q.value_at(tn))
            }
            OneSidedCase::ValueAtOrAfter => (prime, q.value_at(prime)),
            OneSidedCase::LeftLimitAfter => {
                let tn = p.successor(prime)?;
                (tn, left_or_value(&q, tn))
            }
        };
        t_n.push(tn);
        observed.push(value);
    }
    let gaps: Vec<f64> = observed.iter().map(|v| (v - target).abs()).collect();
    Ok(OneSidedReport {
        case,
        t,
        levels: levels.collect(),
        t_n,
        passed: settles(&gaps, opts.tol),
        observed,
        target,
        gaps,
    })
}

/// Result of searching, level by level, for the partition points at which
/// `q_n` splits `[x](t-)` from `[x](t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPointReport {
    pub t: f64,
    pub jump: f64,
    pub levels: Vec<usize>,
    /// `t'_n`.
    pub expected: Vec<f64>,
    /// Every partition point `τ` near `t` with `q_n(τ-) ≈ [x](t-)` and
    /// `q_n(τ) ≈ [x](t)`.
    pub found: Vec<Vec<f64>>,
    /// First level from which `found == [t'_n]` at every later level.
    pub unique_from: Option<usize>,
}

/// Points examined on each side of `t`, in units of the local mesh.
pub const SPLIT_WINDOW: f64 = 4.0;

/// Exhaustive search near `t` for points other than `t'_n` that separate the
/// left limit of `[x]` at `t` from its value.
pub fn split_point_search(
    x: &CadlagPath,
    scheme: &PartitionScheme,
    t: f64,
    levels: std::ops::RangeInclusive<usize>,
    opts: &LimitOptions,
) -> Result<SplitPointReport> {
    if !(t > 0.0 && t <= x.horizon()) {
        return Err(Error::Domain {
            t,
            lo: 0.0,
            hi: x.horizon(),
        });
    }
    let limit = qv_limit(x, scheme, levels.clone(), opts)?;
    let lim = limit.require_limit()?;
    let (before, after) = (lim.left_value_at(t), lim.value_at(t));
    let mut expected = Vec::new();
    let mut found = Vec::new();
    for n in levels.clone() {
        let p = scheme.generate(n)?;
        let q = q_n(x, &p)?;
        let radius = SPLIT_WINDOW * p.mesh(x.horizon());
        let hits: Vec<f64> = p
            .points()
            .iter()
            .copied()
            .filter(|&tau| (tau - t).abs() <= radius)
            .filter(|&tau| {
                (left_or_value(&q, tau) - before).abs() <= opts.tol
                    && (q.value_at(tau) - after).abs() <= opts.tol
            })
            .collect();
        expected.push(p.last_strictly_before(t)?);
        found.push(hits);
    }
    let levels: Vec<usize> = levels.collect();
    let mut unique_from = None;
    for i in (0..levels.len()).rev() {
        if found[i].len() == 1 && found[i][0] == expected[i] {
            unique_from = Some(levels[i]);
        } else {
            break;
        }
    }
    Ok(SplitPointReport {
        t,
        jump: after - before,
        levels,
        expected,
        found,
        unique_from,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub values: Vec<f64>,
    pub candidate_value: f64,
    pub gaps: Vec<f64>,
}

/// Tabulates `F(q_n)` against `F(candidate)`. Continuity of `F` in J1 is the
/// caller's claim; nothing here checks it.
pub fn functional_limit(
    f: impl Fn(&CadlagPath) -> f64,
    seq: &[CadlagPath],
    candidate: &CadlagPath,
) -> FunctionalReport {
    let values: Vec<f64> = seq.iter().map(&f).collect();
    let candidate_value = f(candidate);
    FunctionalReport {
        gaps: values.iter().map(|v| (v - candidate_value).abs()).collect(),
        values,
        candidate_value,
    }
}
