//! Pathwise integrals and the pathwise Itô formula at a fixed level.
//!
//! At level `n` and time `t`, with `t* = successor(last_at_or_before(t))`
//! the right end of the interval holding `t`, the pieces are
//!
//! ```text
//! f(x(t*)) - f(x(0))
//!   = Σ_{t_j ≤ t} f'(x(t_j)) δ_j                  Föllmer sum
//!   + ½ Σ_{t_j ≤ t} f''(x(t_j)) (δ_j² - J_j)       continuous-part proxy
//!   + Σ_{s ≤ t*} [f(x(s)) - f(x(s-)) - f'(x(s-)) Δx(s)]
//!   + residual
//! ```
//!
//! where `J_j` collects `Δx(s)²` of the declared jumps `s` inside
//! `(t_j, t_{j+1}]`. The sums follow the `q_n` convention of counting the
//! forward increment from `t_j` as soon as `t_j ≤ t`, which is why the left
//! side is evaluated at `t*`. For `f(v) = v²` the residual vanishes
//! identically.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partitions::{Partition, PartitionScheme};
use crate::paths::CadlagPath;
use crate::qv::increments;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `f` with its first two derivatives.
#[derive(Clone)]
pub struct SmoothFunction {
    label: String,
    f: Func,
    df: Func,
    d2f: Func,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SmoothFunction").field(&self.label).finish()
    }
}

/// Points at which derivatives are compared with central differences.
const CHECK_POINTS: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];

impl SmoothFunction {
    /// Rejects derivatives that disagree with central differences of the
    /// function (and of `f'`) on a few points of `[-2, 2]`.
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let label = label.into();
        let h = 1e-4;
        for v in CHECK_POINTS {
            for (name, g, dg) in [("f'", &f as &dyn Fn(f64) -> f64, &df as &dyn Fn(f64) -> f64), ("f''", &df, &d2f)] {
                let fd = (g(v + h) - g(v - h)) / (2.0 * h);
                let exact = dg(v);
                let scale = 1.0 + g(v).abs() + exact.abs();
                if !(exact.is_finite() && (fd - exact).abs() <= 1e-5 * scale) {
                    return Err(Error::InvalidParameter(format!(
                        "`{label}`: {name}({v}) = {exact} but a central difference gives {fd}"
                    )));
                }
            }
        }
        Ok(SmoothFunction {
            label,
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        })
    }

    /// `Σ c_k v^k`, derivatives taken exactly.
    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("polynomial coefficients {coeffs:?}")));
        }
        let c0: Vec<f64> = coeffs.to_vec();
        let c1: Vec<f64> = c0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let c2: Vec<f64> = c1.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let label = format!("poly{coeffs:?}");
        Ok(SmoothFunction {
            label,
            f: Arc::new(move |v| horner(&c0, v)),
            df: Arc::new(move |v| horner(&c1, v)),
            d2f: Arc::new(move |v| horner(&c2, v)),
        })
    }

    pub fn square() -> Self {
        Self::polynomial(&[0.0, 0.0, 1.0]).expect("valid coefficients")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn f(&self, v: f64) -> f64 {
        (self.f)(v)
    }

    pub fn df(&self, v: f64) -> f64 {
        (self.df)(v)
    }

    pub fn d2f(&self, v: f64) -> f64 {
        (self.d2f)(v)
    }
}

fn horner(c: &[f64], v: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &c| acc * v + c)
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

/// Left Riemann sum `Σ_{t_j ≤ t} g(x(t_j)) (x(t_{j+1}) - x(t_j))`.
pub fn follmer_integral(g: impl Fn(f64) -> f64, x: &CadlagPath, p: &Partition, t: f64) -> Result<f64> {
    check_time(x, t)?;
    Ok(increments(x, p)?
        .into_iter()
        .take_while(|&(s, _)| s <= t)
        .map(|(s, d)| g(x.value_at(s)) * d)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StieltjesValue {
    pub value: f64,
    /// Largest oscillation of `h(x(·))` between consecutive steps of the
    /// integrator, times its total mass on `[0, t]`. Bounds the error
    /// against any non-decreasing integrator that agrees with the step one
    /// at its step times.
    pub error_bound: f64,
}

/// `∫_{[0,t]} h(x(s)) da(s)` for a non-decreasing step function `a`, with
/// `a(0-) = 0` so that `a(0)` is an atom at 0.
pub fn stieltjes_integral(
    h: impl Fn(f64) -> f64,
    x: &CadlagPath,
    a: &CadlagPath,
    t: f64,
) -> Result<StieltjesValue> {
    check_time(a, t)?;
    check_time(x, t)?;
    let knots = a.knots();
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut prev = 0.0;
    for k in knots.iter().take_while(|k| k.time <= t) {
        let m = k.value - prev;
        if m < 0.0 {
            return Err(Error::NotMonotone { t: k.time, drop: -m });
        }
        if m > 0.0 {
            match steps.last_mut() {
                Some(last) if last.0 == k.time => last.1 += m,
                _ => steps.push((k.time, m)),
            }
        }
        prev = k.value;
    }
    let value = steps.iter().map(|&(s, m)| h(x.value_at(s)) * m).sum();
    let mass: f64 = steps.iter().map(|s| s.1).sum();
    let xt = x.knot_times();
    let mut osc: f64 = 0.0;
    for (i, &(s, _)) in steps.iter().enumerate() {
        let end = steps.get(i + 1).map_or(t, |n| n.0);
        let first = xt.partition_point(|&u| u <= s);
        let last = xt.partition_point(|&u| u < end);
        let (mut lo, mut hi) = (h(x.value_at(s)), h(x.value_at(s)));
        for &u in &xt[first..last.max(first)] {
            let v = h(x.value_at(u));
            lo = lo.min(v);
            hi = hi.max(v);
        }
        osc = osc.max(hi - lo);
    }
    Ok(StieltjesValue {
        value,
        error_bound: osc * mass,
    })
}

/// `Σ_{s ≤ t} f(x(s)) - f(x(s-)) - f'(x(s-)) Δx(s)` over declared jumps.
pub fn jump_compensator(f: &SmoothFunction, x: &CadlagPath, t: f64) -> Result<f64> {
    Ok(x.jumps_up_to(t)?
        .into_iter()
        .map(|(s, d)| {
            let before = x.left_value_at(s);
            f.f(before + d) - f.f(before) - f.df(before) * d
        })
        .sum())
}

/// The terms of the level-`n` Itô formula at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ItoTerms {
    pub level: usize,
    pub t: f64,
    /// Right end of the partition interval containing `t`.
    pub t_star: f64,
    /// `f(x(t*)) - f(x(0))`.
    pub increment: f64,
    pub follmer: f64,
    /// `½ ∫ f'' d(proxy of [x]^c)`.
    pub continuous: f64,
    pub compensator: f64,
    pub residual: f64,
}

pub fn ito_terms(f: &SmoothFunction, x: &CadlagPath, scheme: &PartitionScheme, n: usize, t: f64) -> Result<ItoTerms> {
    check_time(x, t)?;
    let p = scheme.generate(n)?;
    let incs = increments(x, &p)?;
    let t_star = p.successor(p.last_at_or_before(t))?.min(x.horizon());
    let increment = f.f(x.value_at(t_star)) - f.f(x.value_at(0.0));
    let follmer = follmer_integral(|v| f.df(v), x, &p, t)?;
    let mut continuous = 0.0;
    for &(s, d) in incs.iter().take_while(|(s, _)| *s <= t) {
        continuous += f.d2f(x.value_at(s)) * d * d;
    }
    for (s, d) in x.jumps_up_to(t_star)? {
        let tj = p.last_strictly_before(s)?;
        continuous -= f.d2f(x.value_at(tj)) * d * d;
    }
    continuous *= 0.5;
    let compensator = jump_compensator(f, x, t_star)?;
    Ok(ItoTerms {
        level: n,
        t,
        t_star,
        increment,
        follmer,
        continuous,
        compensator,
        residual: increment - follmer - continuous - compensator,
    })
}

/// Signed residual of the level-`n` Itô formula at `t`.
///
/// ```
/// use cadlag_qv::{calculus::{ito_residual, SmoothFunction}, CadlagPath, PartitionScheme};
///
/// let x = CadlagPath::step(1.0, 0.5, &[(0.3, 1.0), (0.8, -2.0)])?;
/// let r = ito_residual(&SmoothFunction::square(), &x, &PartitionScheme::dyadic(1.0)?, 5, 0.9)?;
/// assert!(r.abs() < 1e-12);
/// # Ok::<(), cadlag_qv::Error>(())
/// ```
pub fn ito_residual(f: &SmoothFunction, x: &CadlagPath, scheme: &PartitionScheme, n: usize, t: f64) -> Result<f64> {
    Ok(ito_terms(f, x, scheme, n, t)?.residual)
}
