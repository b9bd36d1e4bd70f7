//! Real- and vector-valued càdlàg paths with explicit jump bookkeeping.
//!
//! A [`CadlagPath`] is a finite list of knots `(time, value)` read as a
//! right-continuous step function: between knots the path holds the value of
//! the preceding knot. A time that appears twice encodes a jump, the first
//! occurrence holding the left limit `x(t-)` and the second the value `x(t)`.
//!
//! Only duplicated knots are *declared* jumps. A densely sampled continuous
//! path has no duplicated knots and therefore an empty jump set, even though
//! its step representation moves at every knot.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knot {
    pub time: f64,
    pub value: f64,
}

impl Knot {
    pub fn new(time: f64, value: f64) -> Self {
        Knot { time, value }
    }
}

impl From<(f64, f64)> for Knot {
    fn from((time, value): (f64, f64)) -> Self {
        Knot { time, value }
    }
}

/// A càdlàg function on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    knots: Vec<Knot>,
    horizon: f64,
    /// Index of the post-jump knot of every declared jump.
    jumps: Vec<usize>,
}

impl CadlagPath {
    /// Builds a path from knots sorted by time. A time may appear at most
    /// twice; a repeated time with identical values is collapsed.
    pub fn new<K: Into<Knot>>(knots: impl IntoIterator<Item = K>, horizon: f64) -> Result<Self> {
        let raw: Vec<Knot> = knots.into_iter().map(Into::into).collect();
        if raw.is_empty() {
            return Err(Error::InvalidPath("no knots".into()));
        }
        if raw[0].time != 0.0 {
            return Err(Error::InvalidPath(format!(
                "first knot must sit at t = 0, found {}",
                raw[0].time
            )));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidPath(format!("horizon {horizon} must be positive")));
        }
        let mut knots: Vec<Knot> = Vec::with_capacity(raw.len());
        let mut jumps = Vec::new();
        for (i, k) in raw.iter().enumerate() {
            if !k.time.is_finite() || !k.value.is_finite() {
                return Err(Error::InvalidPath(format!("non-finite knot at index {i}")));
            }
            if let Some(prev) = knots.last() {
                if k.time < prev.time {
                    return Err(Error::InvalidPath(format!(
                        "knot times decrease at index {i} ({} after {})",
                        k.time, prev.time
                    )));
                }
                if k.time == prev.time {
                    if k.time == 0.0 {
                        return Err(Error::InvalidPath("a jump at t = 0 has no left limit".into()));
                    }
                    let n = knots.len();
                    if n >= 2 && knots[n - 2].time == k.time {
                        return Err(Error::InvalidPath(format!(
                            "time {} appears more than twice",
                            k.time
                        )));
                    }
                    if k.value == prev.value {
                        continue;
                    }
                    jumps.push(knots.len());
                }
            }
            knots.push(*k);
        }
        let last = knots.last().map(|k| k.time).unwrap_or(0.0);
        if horizon < last {
            return Err(Error::InvalidPath(format!(
                "horizon {horizon} precedes the last knot at {last}"
            )));
        }
        Ok(CadlagPath {
            knots,
            horizon,
            jumps,
        })
    }

    pub fn constant(horizon: f64, value: f64) -> Result<Self> {
        CadlagPath::new([(0.0, value)], horizon)
    }

    /// Pure-jump path: `initial + Σ size·1_{[time, ∞)}`.
    pub fn step(horizon: f64, initial: f64, jumps: &[(f64, f64)]) -> Result<Self> {
        let mut knots = vec![Knot::new(0.0, initial)];
        let mut level = initial;
        for &(t, size) in jumps {
            if t <= 0.0 || t > horizon {
                return Err(Error::InvalidPath(format!(
                    "jump time {t} outside (0, {horizon}]"
                )));
            }
            knots.push(Knot::new(t, level));
            level += size;
            knots.push(Knot::new(t, level));
        }
        CadlagPath::new(knots, horizon)
    }

    /// Continuous path sampled at `times`; no declared jumps.
    pub fn sampled(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("sample times must increase strictly".into()));
        }
        let horizon = *times.last().unwrap_or(&0.0);
        CadlagPath::new(times.iter().zip(values).map(|(&t, &v)| (t, v)), horizon)
    }

    /// Samples `f` on the uniform grid `k·horizon/cells`, `k = 0..=cells`.
    pub fn from_fn(horizon: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell".into()));
        }
        let times: Vec<f64> = (0..=cells)
            .map(|k| k as f64 * horizon / cells as f64)
            .collect();
        let values: Vec<f64> = times.iter().map(|&t| f(t)).collect();
        CadlagPath::sampled(&times, &values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::Domain {
                t,
                lo: 0.0,
                hi: self.horizon,
            })
        }
    }

    /// Right-continuous evaluation `x(t)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.value_at(t))
    }

    /// Evaluation without domain checks: frozen at `x(0)` before 0 and at
    /// the last knot value after the horizon.
    pub(crate) fn value_at(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|k| k.time <= t);
        if idx == 0 {
            self.knots[0].value
        } else {
            self.knots[idx - 1].value
        }
    }

    pub(crate) fn left_value_at(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|k| k.time < t);
        if idx + 1 < self.knots.len()
            && self.knots[idx].time == t
            && self.knots[idx + 1].time == t
        {
            self.knots[idx].value
        } else {
            self.value_at(t)
        }
    }

    /// `x(t-)`: the stored pre-jump value at a declared jump, `x(t)` elsewhere.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(Error::NoLeftLimit);
        }
        self.check_domain(t)?;
        Ok(self.left_value_at(t))
    }

    /// `Δx(t) = x(t) - x(t-)`.
    pub fn jump_at(&self, t: f64) -> Result<f64> {
        let left = self.left_limit(t)?;
        Ok(self.value_at(t) - left)
    }

    /// Declared jumps as `(time, size)` pairs, sorted by time.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.jumps.iter().map(move |&i| {
            let k = self.knots[i];
            (k.time, k.value - self.knots[i - 1].value)
        })
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps().map(|(t, _)| t).collect()
    }

    pub fn jumps_up_to(&self, t: f64) -> Result<Vec<(f64, f64)>> {
        self.check_domain(t)?;
        Ok(self.jumps().take_while(|&(s, _)| s <= t).collect())
    }

    pub fn has_jumps(&self) -> bool {
        !self.jumps.is_empty()
    }

    /// Distinct knot times, sorted.
    pub fn knot_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.knots.iter().map(|k| k.time).collect();
        times.dedup();
        times
    }

    /// `w₁·a + w₂·b`, with duplicated knots at the union of both jump sets.
    pub fn pointwise_combine(a: &CadlagPath, b: &CadlagPath, weights: (f64, f64)) -> Result<Self> {
        if a.horizon != b.horizon {
            return Err(Error::HorizonMismatch {
                left: a.horizon,
                right: b.horizon,
            });
        }
        let (w1, w2) = weights;
        let times = merge_sorted(&a.knot_times(), &b.knot_times());
        let ja = a.jump_times();
        let jb = b.jump_times();
        let mut knots = Vec::with_capacity(times.len() + ja.len() + jb.len());
        for &t in &times {
            let value = w1 * a.value_at(t) + w2 * b.value_at(t);
            let jumps_here =
                t > 0.0 && (ja.binary_search_by(|s| s.total_cmp(&t)).is_ok()
                    || jb.binary_search_by(|s| s.total_cmp(&t)).is_ok());
            if jumps_here {
                let left = w1 * a.left_value_at(t) + w2 * b.left_value_at(t);
                knots.push(Knot::new(t, left));
            }
            knots.push(Knot::new(t, value));
        }
        CadlagPath::new(knots, a.horizon)
    }

    /// Same path, declared on the longer horizon `horizon` (frozen after the
    /// current one).
    pub fn extend_to(&self, horizon: f64) -> Result<Self> {
        CadlagPath::new(self.knots.iter().copied(), horizon)
    }

    /// The same step function with every declared jump removed from the
    /// bookkeeping (values unchanged): duplicated knots become a single
    /// knot holding the post-jump value.
    pub fn undeclared(&self) -> Self {
        let mut knots: Vec<Knot> = Vec::with_capacity(self.knots.len());
        for k in &self.knots {
            match knots.last_mut() {
                Some(last) if last.time == k.time => last.value = k.value,
                _ => knots.push(*k),
            }
        }
        CadlagPath {
            knots,
            horizon: self.horizon,
            jumps: Vec::new(),
        }
    }

    /// Supremum of `|x(t)|` over `[0, horizon]`.
    pub fn sup_norm(&self) -> f64 {
        self.knots.iter().map(|k| k.value.abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if out.last() != Some(&next) {
            out.push(next);
        }
    }
    out
}

/// An `m`-dimensional càdlàg path; all components share one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorCadlagPath {
    components: Vec<CadlagPath>,
}

impl VectorCadlagPath {
    pub fn new(components: Vec<CadlagPath>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidPath("a vector path needs at least one component".into()))?;
        for c in &components[1..] {
            if c.horizon != first.horizon {
                return Err(Error::HorizonMismatch {
                    left: first.horizon,
                    right: c.horizon,
                });
            }
        }
        Ok(VectorCadlagPath { components })
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn horizon(&self) -> f64 {
        self.components[0].horizon
    }

    pub fn components(&self) -> &[CadlagPath] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &CadlagPath {
        &self.components[i]
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.evaluate(t)).collect()
    }

    /// Union of the component jump times.
    pub fn jump_times(&self) -> Vec<f64> {
        self.components
            .iter()
            .fold(Vec::new(), |acc, c| merge_sorted(&acc, &c.jump_times()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: f64 = 0.70710678;

    fn unit_step() -> CadlagPath {
        CadlagPath::step(1.0, 0.0, &[(T0, 1.0)]).unwrap()
    }

    fn two_jumps() -> CadlagPath {
        CadlagPath::step(1.0, 0.0, &[(0.25, 1.0), (0.75, 2.0)]).unwrap()
    }

    #[test]
    fn evaluate_is_right_continuous() {
        let x = unit_step();
        assert_eq!(x.evaluate(T0).unwrap(), 1.0);
        assert_eq!(x.evaluate(0.5).unwrap(), 0.0);
        assert!(matches!(x.evaluate(1.5), Err(Error::Domain { .. })));
        assert!(x.evaluate(-0.1).is_err());
    }

    #[test]
    fn evaluate_sampled_line() {
        let x = CadlagPath::from_fn(1.0, 1024, |t| t).unwrap();
        assert!((x.evaluate(0.5).unwrap() - 0.5).abs() <= 1.0 / 1024.0);
        assert!((x.evaluate(0.5004).unwrap() - 0.5).abs() <= 1.0 / 1024.0);
    }

    #[test]
    fn left_limits() {
        let x = unit_step();
        assert_eq!(x.left_limit(T0).unwrap(), 0.0);
        assert_eq!(x.left_limit(0.9).unwrap(), 1.0);
        assert_eq!(two_jumps().left_limit(0.75).unwrap(), 1.0);
        assert_eq!(x.left_limit(0.0), Err(Error::NoLeftLimit));
    }

    #[test]
    fn jump_sizes() {
        assert_eq!(unit_step().jump_at(T0).unwrap(), 1.0);
        assert_eq!(unit_step().jump_at(0.3).unwrap(), 0.0);
        assert_eq!(two_jumps().jump_at(0.75).unwrap(), 2.0);
        assert!(unit_step().jump_at(0.0).is_err());
    }

    #[test]
    fn jumps_up_to_horizon() {
        let x = two_jumps();
        assert_eq!(x.jumps_up_to(1.0).unwrap(), vec![(0.25, 1.0), (0.75, 2.0)]);
        assert_eq!(x.jumps_up_to(0.5).unwrap(), vec![(0.25, 1.0)]);
        let line = CadlagPath::from_fn(1.0, 64, |t| t).unwrap();
        assert!(line.jumps_up_to(1.0).unwrap().is_empty());
    }

    #[test]
    fn combine_cancels_and_scales() {
        let x = two_jumps();
        let zero = CadlagPath::pointwise_combine(&x, &x, (1.0, -1.0)).unwrap();
        assert!(zero.knots().iter().all(|k| k.value == 0.0));
        assert!(!zero.has_jumps());

        let a = CadlagPath::step(1.0, 0.0, &[(0.3, 1.0)]).unwrap();
        let b = CadlagPath::step(1.0, 0.0, &[(0.6, 1.0)]).unwrap();
        let sum = CadlagPath::pointwise_combine(&a, &b, (1.0, 1.0)).unwrap();
        assert_eq!(sum.jumps().collect::<Vec<_>>(), vec![(0.3, 1.0), (0.6, 1.0)]);

        let z = CadlagPath::constant(1.0, 0.0).unwrap();
        let doubled = CadlagPath::pointwise_combine(&x, &z, (2.0, 0.0)).unwrap();
        assert_eq!(doubled.jump_times(), x.jump_times());
        assert_eq!(doubled.evaluate(0.8).unwrap(), 6.0);
    }

    #[test]
    fn combine_rejects_horizon_mismatch() {
        let a = CadlagPath::constant(1.0, 0.0).unwrap();
        let b = CadlagPath::constant(2.0, 0.0).unwrap();
        assert!(matches!(
            CadlagPath::pointwise_combine(&a, &b, (1.0, 1.0)),
            Err(Error::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(CadlagPath::new([(0.1, 0.0)], 1.0).is_err());
        assert!(CadlagPath::new([(0.0, 0.0), (0.5, 1.0), (0.4, 1.0)], 1.0).is_err());
        assert!(CadlagPath::new([(0.0, 0.0), (0.5, 1.0), (0.5, 2.0), (0.5, 3.0)], 1.0).is_err());
        assert!(CadlagPath::new([(0.0, 0.0), (0.0, 1.0)], 1.0).is_err());
        assert!(CadlagPath::new([(0.0, 0.0), (2.0, 1.0)], 1.0).is_err());
        // an equal-valued duplicate is not a jump
        let p = CadlagPath::new([(0.0, 0.0), (0.5, 1.0), (0.5, 1.0)], 1.0).unwrap();
        assert!(!p.has_jumps());
    }

    #[test]
    fn vector_jump_union() {
        let v = VectorCadlagPath::new(vec![unit_step(), two_jumps()]).unwrap();
        assert_eq!(v.jump_times(), vec![0.25, T0, 0.75]);
        assert_eq!(v.evaluate(0.8).unwrap(), vec![1.0, 3.0]);
        let short = CadlagPath::constant(2.0, 0.0).unwrap();
        assert!(VectorCadlagPath::new(vec![unit_step(), short]).is_err());
    }
}
