//! Discrete measures on `[0, ∞)` and numerical vague / weak convergence.
//!
//! Vague convergence tests against compactly supported continuous
//! functions; weak convergence on `[0, T]` tests against every bounded
//! continuous function on `[0, T]`, which is only equivalent when `T`
//! carries no mass of the limit. The weak check brackets each integral
//! with the two tapered extensions of the test function.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::convergence::settles;
use crate::error::{Error, Result};
use crate::paths::CadlagPath;
use crate::qv::{cumulative, StepIncreasing};

/// Finitely many atoms `(time, mass)` with sorted, distinct times and
/// non-negative masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(t, m)) in atoms.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) || !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "atom {i} = ({t}, {m}) needs a time ≥ 0 and a mass ≥ 0"
                )));
            }
        }
        if atoms.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("atom times must increase strictly".into()));
        }
        Ok(DiscreteMeasure { atoms })
    }

    pub fn zero() -> Self {
        DiscreteMeasure { atoms: Vec::new() }
    }

    /// The measure whose distribution function is `f`, i.e. `f(0)` at 0
    /// and every upward step of `f` as an atom.
    pub fn from_distribution(f: &CadlagPath) -> Result<Self> {
        let knots = f.knots();
        let mut atoms = Vec::new();
        if knots[0].value != 0.0 {
            atoms.push((0.0, knots[0].value));
        }
        for w in knots.windows(2) {
            let step = w[1].value - w[0].value;
            if step < 0.0 {
                return Err(Error::NotMonotone {
                    t: w[1].time,
                    drop: -step,
                });
            }
            if step > 0.0 {
                match atoms.last_mut() {
                    Some((t, m)) if *t == w[1].time => *m += step,
                    _ => atoms.push((w[1].time, step)),
                }
            }
        }
        DiscreteMeasure::new(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `μ([0, t])`.
    pub fn mass_up_to(&self, t: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= t).map(|a| a.1).sum()
    }

    pub fn is_atom(&self, t: f64) -> bool {
        self.atoms
            .binary_search_by(|a| a.0.total_cmp(&t))
            .is_ok_and(|i| self.atoms[i].1 > 0.0)
    }

    /// `t ↦ μ([0, t])` on `[0, horizon]`.
    pub fn distribution_function(&self, horizon: f64) -> Result<StepIncreasing> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        let inside: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .copied()
            .filter(|a| a.0 <= horizon)
            .collect();
        StepIncreasing::new(cumulative(&inside, horizon, true))
    }
}

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous function on `[0, ∞)` vanishing beyond `support_bound`
/// (`f64::INFINITY` when it does not vanish).
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    support_bound: f64,
    f: Func,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("support_bound", &self.support_bound)
            .finish()
    }
}

/// Points sampled when a property of a test function is checked.
pub const SAMPLES: usize = 1000;

impl TestFunction {
    /// Samples `f` on its support (on `[0, 1]` when unbounded) and rejects
    /// non-finite values.
    pub fn new(
        label: impl Into<String>,
        support_bound: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let label = label.into();
        if !(support_bound >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "test function `{label}`: support bound {support_bound}"
            )));
        }
        let reach = if support_bound.is_finite() { support_bound } else { 1.0 };
        for k in 0..=SAMPLES {
            let t = reach * k as f64 / SAMPLES as f64;
            if !f(t).is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "test function `{label}` is not finite at {t}"
                )));
            }
        }
        Ok(TestFunction {
            label,
            support_bound,
            f: Arc::new(f),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn is_compactly_supported(&self) -> bool {
        self.support_bound.is_finite()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t > self.support_bound || t < 0.0 {
            0.0
        } else {
            (self.f)(t)
        }
    }

    /// Constant `c` on `[0, ∞)`.
    pub fn constant(c: f64) -> Self {
        TestFunction {
            label: format!("const({c})"),
            support_bound: f64::INFINITY,
            f: Arc::new(move |_| c),
        }
    }

    /// Tent of height 1 at `center` with half-width `width`.
    pub fn hat(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || center < 0.0 {
            return Err(Error::InvalidParameter(format!("hat({center}, {width})")));
        }
        Self::new(format!("hat({center}, {width})"), center + width, move |t| {
            (1.0 - (t - center).abs() / width).max(0.0)
        })
    }

    /// `max(0, 1 - t/end)`: Lipschitz, decreasing to 0 at `end`.
    pub fn ramp(end: f64) -> Result<Self> {
        if !(end > 0.0) {
            return Err(Error::InvalidParameter(format!("ramp({end})")));
        }
        Self::new(format!("ramp({end})"), end, move |t| (1.0 - t / end).max(0.0))
    }
}

/// `Σ f(t_i) m_i`.
pub fn integrate(f: &TestFunction, m: &DiscreteMeasure) -> f64 {
    m.atoms.iter().map(|&(t, w)| f.eval(t) * w).sum()
}

/// `∫_{[0,T]} f dμ`.
pub fn integrate_to(f: &TestFunction, m: &DiscreteMeasure, horizon: f64) -> f64 {
    m.atoms
        .iter()
        .take_while(|a| a.0 <= horizon)
        .map(|&(t, w)| f.eval(t) * w)
        .sum()
}

/// The extensions of `f·1_{[0,T]}` from above and below:
///
/// ```text
/// upper(t) = f(t) on [0, T],  f(T)(1 + (T - t)/ε) on (T, T + ε],  0 after
/// lower(t) = f(t) on [0, T - ε],  f(t)(T - t)/ε on (T - ε, T],  0 after
/// ```
///
/// For `f ≥ 0` on `[0, T]`: `0 ≤ lower ≤ f·1_{[0,T]} ≤ upper`.
pub fn taper_extensions(f: &TestFunction, horizon: f64, eps: f64) -> Result<(TestFunction, TestFunction)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("taper width {eps} must be positive")));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("taper horizon {horizon}")));
    }
    let (fu, fl) = (f.clone(), f.clone());
    let at_end = f.eval(horizon);
    let upper = TestFunction::new(
        format!("{}^+({horizon}, {eps})", f.label),
        horizon + eps,
        move |t| {
            if t <= horizon {
                fu.eval(t)
            } else if t <= horizon + eps {
                at_end * (1.0 + (horizon - t) / eps)
            } else {
                0.0
            }
        },
    )?;
    let lower = TestFunction::new(format!("{}_-({horizon}, {eps})", f.label), horizon, move |t| {
        if t <= horizon - eps {
            fl.eval(t)
        } else if t <= horizon {
            fl.eval(t) * (horizon - t) / eps
        } else {
            0.0
        }
    })?;
    Ok((upper, lower))
}

/// Checks `0 ≤ lower ≤ f·1_{[0,T]} ≤ upper` at [`SAMPLES`] points of
/// `[0, T + 2ε]`; returns the first offending time.
pub fn check_sandwich(f: &TestFunction, horizon: f64, eps: f64) -> Result<Option<f64>> {
    let (upper, lower) = taper_extensions(f, horizon, eps)?;
    let reach = horizon + 2.0 * eps;
    for k in 0..=SAMPLES {
        let t = reach * k as f64 / SAMPLES as f64;
        let mid = if t <= horizon { f.eval(t) } else { 0.0 };
        let (lo, hi) = (lower.eval(t), upper.eval(t));
        let slack = 1e-12 * (1.0 + mid.abs());
        if lo < -slack || lo > mid + slack || mid > hi + slack {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Hats of half-width 1/8 centred at the multiples of 1/8 inside
/// `(0, horizon)`, ramps ending at 1/4, 1/2 and 1, and the upper taper of
/// the constant 1 at the largest multiple of 1/2 below `horizon`.
pub fn default_battery(horizon: f64) -> Vec<TestFunction> {
    let mut fns: Vec<TestFunction> = (1..)
        .map(|k| k as f64 / 8.0)
        .take_while(|&c| c < horizon)
        .map(|c| TestFunction::hat(c, 0.125).expect("valid hat"))
        .collect();
    for end in [0.25_f64, 0.5, 1.0] {
        fns.push(TestFunction::ramp(end.min(horizon)).expect("valid ramp"));
    }
    let cut = ((horizon * 2.0).ceil() - 1.0).max(0.0) / 2.0;
    if cut > 0.0 {
        let (upper, _) = taper_extensions(&TestFunction::constant(1.0), cut, 0.125).expect("valid taper");
        fns.push(upper);
    }
    fns
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionGaps {
    pub label: String,
    pub gaps: Vec<f64>,
    pub passed: bool,
    /// Tapered brackets of `∫_{[0,T]} f dμ_n` per level (weak check, `f ≥ 0`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brackets: Option<Vec<Bracket>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub functions: Vec<FunctionGaps>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn need_three(seq: &[DiscreteMeasure]) -> Result<()> {
    if seq.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a convergence check needs at least 3 measures, got {}",
            seq.len()
        )));
    }
    Ok(())
}

/// `|∫f dμ_n - ∫f dμ|` per function; passes when every gap sequence
/// settles below `tol`.
pub fn vague_convergence_check(
    seq: &[DiscreteMeasure],
    target: &DiscreteMeasure,
    fns: &[TestFunction],
    tol: f64,
) -> Result<ConvergenceCheck> {
    need_three(seq)?;
    if let Some(f) = fns.iter().find(|f| !f.is_compactly_supported()) {
        return Err(Error::InvalidParameter(format!(
            "vague convergence needs compactly supported functions; `{}` is not",
            f.label
        )));
    }
    let functions: Vec<FunctionGaps> = fns
        .iter()
        .map(|f| {
            let want = integrate(f, target);
            let gaps: Vec<f64> = seq.iter().map(|m| (integrate(f, m) - want).abs()).collect();
            FunctionGaps {
                label: f.label.clone(),
                passed: settles(&gaps, tol),
                gaps,
                brackets: None,
            }
        })
        .collect();
    Ok(ConvergenceCheck {
        passed: functions.iter().all(|f| f.passed),
        functions,
        horizon: None,
    })
}

/// Weak convergence on `[0, T]`: gaps of `∫_{[0,T]} f dμ_n`. Refused when
/// `T` is an atom of `target`.
pub fn weak_convergence_check(
    seq: &[DiscreteMeasure],
    target: &DiscreteMeasure,
    horizon: f64,
    fns: &[TestFunction],
    tol: f64,
) -> Result<ConvergenceCheck> {
    need_three(seq)?;
    if target.is_atom(horizon) {
        return Err(Error::AtomHorizon { t: horizon });
    }
    // taper width: keep clear of the target's atoms around T
    let clearance = target
        .atoms
        .iter()
        .filter(|a| a.1 > 0.0)
        .map(|a| (a.0 - horizon).abs())
        .fold(f64::INFINITY, f64::min);
    let eps = (0.1 * horizon).min(0.5 * clearance);
    let functions = fns
        .iter()
        .map(|f| {
            let want = integrate_to(f, target, horizon);
            let values: Vec<f64> = seq.iter().map(|m| integrate_to(f, m, horizon)).collect();
            let gaps: Vec<f64> = values.iter().map(|v| (v - want).abs()).collect();
            let non_negative = (0..=SAMPLES).all(|k| f.eval(horizon * k as f64 / SAMPLES as f64) >= 0.0);
            let brackets = if non_negative {
                let (upper, lower) = taper_extensions(f, horizon, eps)?;
                Some(
                    seq.iter()
                        .zip(&values)
                        .map(|(m, &value)| Bracket {
                            lower: integrate(&lower, m),
                            value,
                            upper: integrate(&upper, m),
                        })
                        .collect(),
                )
            } else {
                None
            };
            Ok(FunctionGaps {
                label: f.label.clone(),
                passed: settles(&gaps, tol),
                gaps,
                brackets,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceCheck {
        passed: functions.iter().all(|f| f.passed),
        functions,
        horizon: Some(horizon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: f64 = 0.70710678;

    fn m(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec()).unwrap()
    }

    #[test]
    fn integrals() {
        let one = TestFunction::new("one", 1.0, |_| 1.0).unwrap();
        assert_eq!(integrate(&one, &m(&[(0.5, 2.0)])), 2.0);
        assert_eq!(integrate(&one, &DiscreteMeasure::zero()), 0.0);
        let id = TestFunction::new("id", 1.0, |t| t).unwrap();
        assert_eq!(integrate(&id, &m(&[(0.25, 1.0), (0.75, 2.0)])), 1.75);
    }

    #[test]
    fn tapers() {
        let one = TestFunction::constant(1.0);
        let (upper, lower) = taper_extensions(&one, 1.0, 0.1).unwrap();
        assert!((upper.eval(1.05) - 0.5).abs() < 1e-12);
        assert!((lower.eval(0.95) - 0.5).abs() < 1e-12);
        assert_eq!(upper.eval(0.5), 1.0);
        assert_eq!(upper.eval(1.2), 0.0);
        assert!(taper_extensions(&one, 1.0, 0.0).is_err());
        assert_eq!(check_sandwich(&one, 1.0, 0.1).unwrap(), None);
        let wave = TestFunction::new("wave", f64::INFINITY, |t| 1.0 + (7.0 * t).sin()).unwrap();
        assert_eq!(check_sandwich(&wave, 1.3, 0.05).unwrap(), None);
    }

    #[test]
    fn distribution_roundtrip() {
        let mu = m(&[(0.0, 0.5), (0.25, 1.0), (0.75, 2.0)]);
        let f = mu.distribution_function(1.0).unwrap();
        assert_eq!(f.evaluate(0.0).unwrap(), 0.5);
        assert_eq!(f.evaluate(0.8).unwrap(), 3.5);
        assert_eq!(DiscreteMeasure::from_distribution(&f).unwrap(), mu);
    }

    #[test]
    fn vague_and_weak() {
        let seq: Vec<DiscreteMeasure> = (6..=12)
            .map(|n| {
                let s = 2f64.powi(n);
                m(&[((T0 * s).floor() / s, 1.0)])
            })
            .collect();
        let target = m(&[(T0, 1.0)]);
        let fns = default_battery(1.0);
        assert!(vague_convergence_check(&seq, &target, &fns, 1e-1).unwrap().passed);
        assert!(weak_convergence_check(&seq, &target, 1.0, &fns, 1e-1).unwrap().passed);
        assert!(matches!(
            weak_convergence_check(&seq, &target, T0, &fns, 1e-1),
            Err(Error::AtomHorizon { .. })
        ));
        let heavy = m(&[(T0, 2.0)]);
        let same = vec![target.clone(); 3];
        assert!(!vague_convergence_check(&same, &heavy, &fns, 1e-3).unwrap().passed);
        assert!(vague_convergence_check(&same, &target, &fns, 1e-12).unwrap().passed);
        let zeros = vec![DiscreteMeasure::zero(); 3];
        assert!(weak_convergence_check(&zeros, &DiscreteMeasure::zero(), 1.0, &fns, 1e-12).unwrap().passed);
    }
}
