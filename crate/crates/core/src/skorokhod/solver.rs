//! Exact J1 distance between step functions.
//!
//! For a threshold `ε`, a time change `λ` with `‖λ - id‖ ≤ ε` and
//! `‖x∘λ - y‖ ≤ ε` exists iff there is a monotone path through the grid of
//! segment pairs `(k, l)` (x in its k-th constant piece, y in its l-th) such
//! that every visited pair has values within `ε`, and every jump event can be
//! placed in time: an x-jump at `s` happens at some y-time `τ ∈ [s-ε, s+ε]`,
//! a y-jump at `u` at some x-time `σ ∈ [u-ε, u+ε]`, a simultaneous jump needs
//! `|s - u| ≤ ε`. Events must be ordered in both coordinates. The decision is
//! a dynamic program over the grid that keeps, per pair, the earliest
//! reachable frontier for each way of entering it.
//!
//! Every constraint is of the form `|s_i - u_j| ≤ ε` or `|a_k - b_l| ≤ ε`, so
//! the optimal `ε` is one of those differences; the search bisects until few
//! candidates remain and then finishes exactly over them.

use super::{StepView, TimeChange};

/// A point `(t, λ(t))` the time change must pass through. `t_exact` marks a
/// jump time of `y`, `lambda_exact` one of `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub(crate) t: f64,
    pub(crate) lambda: f64,
    pub(crate) t_exact: bool,
    pub(crate) lambda_exact: bool,
}

impl Event {
    fn fixed(t: f64) -> Self {
        Event {
            t,
            lambda: t,
            t_exact: true,
            lambda_exact: true,
        }
    }
}

/// A time of the form `max(fixed, shifted - ε)`; `shifted = -∞` when unused.
#[derive(Debug, Clone, Copy)]
struct Coord {
    fixed: f64,
    shifted: f64,
}

/// Marks an unreachable entry.
const UNSET: Coord = Coord {
    fixed: f64::INFINITY,
    shifted: f64::NEG_INFINITY,
};

impl Coord {
    fn is_set(self) -> bool {
        self.fixed != f64::INFINITY
    }

    fn fixed(t: f64) -> Self {
        Coord {
            fixed: t,
            shifted: f64::NEG_INFINITY,
        }
    }

    fn value(self, eps: f64) -> f64 {
        self.fixed.max(self.shifted - eps)
    }

    /// `self ≤ c`, evaluated in difference form.
    fn le(self, c: f64, eps: f64) -> bool {
        self.fixed <= c && (self.shifted == f64::NEG_INFINITY || self.shifted - c <= eps)
    }
}

const NONE: u8 = 0;
const ORIGIN: u8 = 1;
// back-pointer codes: 2 + 2·move + source entry
const MOVE_X: u8 = 0;
const MOVE_Y: u8 = 1;
const MOVE_D: u8 = 2;

fn code(mv: u8, src: u8) -> u8 {
    2 + 2 * mv + src
}

#[derive(Debug, Clone, Copy)]
struct State {
    /// Entered by an x-jump: x-time is the segment start, y-time stored.
    xe: Coord,
    /// Entered by a y-jump: y-time is the segment start, x-time stored.
    ye: Coord,
    back: [u8; 2],
}

const EMPTY: State = State {
    xe: UNSET,
    ye: UNSET,
    back: [NONE, NONE],
};

struct Row {
    lo: usize,
    states: Vec<State>,
}

impl Row {
    fn get_mut(&mut self, l: usize) -> Option<&mut State> {
        if l < self.lo {
            return None;
        }
        self.states.get_mut(l - self.lo)
    }
}

fn offer(slot: &mut Coord, back: &mut u8, c: Coord, eps: f64, code: u8) {
    if !slot.is_set() || slot.value(eps) > c.value(eps) {
        *slot = c;
        *back = code;
    }
}

pub(crate) struct Problem<'a> {
    /// `xs[0] = 0`, `xs[1..=p]` jump times, `xs[p+1] = T`.
    xs: Vec<f64>,
    ys: Vec<f64>,
    a: &'a [f64],
    b: &'a [f64],
    horizon: f64,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(x: &'a StepView, y: &'a StepView, horizon: f64) -> Self {
        let frame = |v: &StepView| {
            let mut t = Vec::with_capacity(v.times.len() + 2);
            t.push(0.0);
            t.extend_from_slice(&v.times);
            t.push(horizon);
            t
        };
        Problem {
            xs: frame(x),
            ys: frame(y),
            a: &x.values,
            b: &y.values,
            horizon,
        }
    }

    fn p(&self) -> usize {
        self.a.len() - 1
    }

    fn q(&self) -> usize {
        self.b.len() - 1
    }

    /// Range of y-segments that can be current while x sits in segment `k`.
    fn window(&self, k: usize, eps: f64) -> (usize, usize) {
        let slack = eps + 1e-12 * (1.0 + eps + self.horizon);
        let q = self.q();
        let from = self.xs[k] - slack;
        let to = self.xs[k + 1] + slack;
        // first l with ys[l+1] >= from
        let lo = self.ys[1..=q + 1].partition_point(|&u| u < from);
        // last l with ys[l] <= to
        let hi = self.ys[..=q].partition_point(|&u| u <= to).saturating_sub(1);
        (lo.min(q), hi.max(lo.min(q)))
    }

    /// Decides `d_J1 ≤ eps`; with `record` also returns the events of a
    /// witnessing time change.
    pub(crate) fn decide(&self, eps: f64, record: bool) -> Option<Vec<Event>> {
        let (p, q, t_end) = (self.p(), self.q(), self.horizon);
        let (a, b, xs, ys) = (self.a, self.b, &self.xs, &self.ys);
        if (a[0] - b[0]).abs() > eps {
            return None;
        }
        let mut rows: Vec<Row> = Vec::new();
        let (lo, hi) = self.window(0, eps);
        let mut cur = Row {
            lo,
            states: vec![EMPTY; hi + 1 - lo],
        };
        match cur.get_mut(0) {
            Some(s) => {
                *s = State {
                    xe: Coord::fixed(0.0),
                    ye: Coord::fixed(0.0),
                    back: [ORIGIN, ORIGIN],
                }
            }
            None => return None,
        }
        let mut spare: Vec<State> = Vec::new();
        for k in 0..=p {
            // nothing in the next row lies left of this row's first reachable entry
            let first = cur
                .states
                .iter()
                .position(|st| st.xe.is_set() || st.ye.is_set())
                .map_or(usize::MAX, |i| cur.lo + i);
            let mut next = if k < p {
                let (lo, hi) = self.window(k + 1, eps);
                let lo = lo.max(first.min(hi));
                let mut states = if record { Vec::new() } else { std::mem::take(&mut spare) };
                states.clear();
                states.resize(hi + 1 - lo, EMPTY);
                Some(Row { lo, states })
            } else {
                None
            };
            let mut any = false;
            for idx in 0..cur.states.len() {
                let l = cur.lo + idx;
                let st = cur.states[idx];
                if !st.xe.is_set() && !st.ye.is_set() {
                    continue;
                }
                let frontiers = [
                    st.xe.is_set().then(|| (st.xe, Coord::fixed(xs[k]), 0u8)),
                    st.ye.is_set().then(|| (Coord::fixed(ys[l]), st.ye, 1u8)),
                ];
                for (yc, xc, src) in frontiers.into_iter().flatten() {
                    any = true;
                    // x jumps next
                    if k < p {
                        let s = xs[k + 1];
                        let ybound = ys[l + 1];
                        let tau = if s == t_end {
                            (ybound == t_end).then_some(Coord::fixed(t_end))
                        } else {
                            let ok = yc.fixed - s <= eps
                                && yc.fixed <= ybound
                                && s - ybound <= eps;
                            ok.then_some(Coord {
                                fixed: yc.fixed,
                                shifted: s,
                            })
                        };
                        if let Some(tau) = tau {
                            if (a[k + 1] - b[l]).abs() <= eps {
                                if let Some(ns) = next.as_mut().and_then(|r| r.get_mut(l)) {
                                    offer(&mut ns.xe, &mut ns.back[0], tau, eps, code(MOVE_X, src));
                                }
                            }
                        }
                    }
                    // y jumps next
                    if l < q {
                        let u = ys[l + 1];
                        let xbound = xs[k + 1];
                        let sigma = if u == t_end {
                            (xbound == t_end).then_some(Coord::fixed(t_end))
                        } else {
                            let ok = xc.fixed - u <= eps
                                && xc.le(xbound, eps)
                                && u - xbound <= eps;
                            ok.then_some(Coord {
                                fixed: xc.fixed,
                                shifted: u,
                            })
                        };
                        if let Some(sigma) = sigma {
                            if (a[k] - b[l + 1]).abs() <= eps {
                                if let Some(ns) = cur.get_mut(l + 1) {
                                    offer(&mut ns.ye, &mut ns.back[1], sigma, eps, code(MOVE_Y, src));
                                }
                            }
                        }
                    }
                    // both jump together
                    if k < p && l < q {
                        let (s, u) = (xs[k + 1], ys[l + 1]);
                        if (s == t_end) == (u == t_end)
                            && (s - u).abs() <= eps
                            && (a[k + 1] - b[l + 1]).abs() <= eps
                        {
                            if let Some(ns) = next.as_mut().and_then(|r| r.get_mut(l + 1)) {
                                let c = code(MOVE_D, src);
                                offer(&mut ns.xe, &mut ns.back[0], Coord::fixed(u), eps, c);
                                offer(&mut ns.ye, &mut ns.back[1], Coord::fixed(s), eps, c);
                            }
                        }
                    }
                }
            }
            if !any {
                return None;
            }
            match next {
                Some(n) => {
                    let done = std::mem::replace(&mut cur, n);
                    if record {
                        rows.push(done);
                    } else {
                        spare = done.states;
                    }
                }
                None => break,
            }
        }
        let last = cur.get_mut(q).copied()?;
        if !last.xe.is_set() && !last.ye.is_set() {
            return None;
        }
        if !record {
            return Some(Vec::new());
        }
        rows.push(cur);
        Some(self.backtrack(&rows, eps))
    }

    fn backtrack(&self, rows: &[Row], eps: f64) -> Vec<Event> {
        let (mut k, mut l) = (self.p(), self.q());
        let state = |k: usize, l: usize| rows[k].states[l - rows[k].lo];
        let mut entry = if state(k, l).xe.is_set() { 0 } else { 1 };
        let mut events = vec![Event::fixed(self.horizon)];
        loop {
            let st = state(k, l);
            let back = st.back[entry];
            if back == ORIGIN {
                break;
            }
            let mv = (back - 2) / 2;
            let src = (back - 2) % 2;
            let ev = if entry == 0 {
                Event {
                    t: st.xe.value(eps),
                    lambda: self.xs[k],
                    t_exact: mv == MOVE_D,
                    lambda_exact: true,
                }
            } else {
                Event {
                    t: self.ys[l],
                    lambda: st.ye.value(eps),
                    t_exact: true,
                    lambda_exact: mv == MOVE_D,
                }
            };
            events.push(ev);
            match mv {
                MOVE_X => k -= 1,
                MOVE_Y => l -= 1,
                _ => {
                    k -= 1;
                    l -= 1;
                }
            }
            entry = src as usize;
        }
        events.push(Event::fixed(0.0));
        events.reverse();
        events
    }

    fn time_points(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }
}

/// Distances `|v - w|` with `v ∈ left`, `w ∈ right` (both sorted) lying in
/// `(lo, hi]`.
fn pair_differences(left: &[f64], right: &[f64], lo: f64, hi: f64, out: &mut Vec<f64>) {
    let pad = 1e-12 * (1.0 + hi.abs());
    for &v in left {
        for (from, to) in [(v - hi - pad, v - lo + pad), (v + lo - pad, v + hi + pad)] {
            let i = right.partition_point(|&w| w < from);
            let j = right.partition_point(|&w| w <= to);
            for &w in &right[i..j.max(i)] {
                let d = (v - w).abs();
                if d > lo && d <= hi {
                    out.push(d);
                }
            }
        }
    }
}

/// Approximate number of pairs counted by [`pair_differences`], without
/// visiting them.
fn pair_count(left: &[f64], right: &[f64], lo: f64, hi: f64) -> usize {
    let mut count = 0;
    for &v in left {
        for (from, to) in [(v - hi, v - lo), (v + lo, v + hi)] {
            let i = right.partition_point(|&w| w < from);
            let j = right.partition_point(|&w| w <= to);
            count += j.saturating_sub(i);
        }
    }
    count
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub(crate) fn uniform_steps(x: &StepView, y: &StepView) -> f64 {
    let mut best = (x.values[0] - y.values[0]).abs();
    let (mut i, mut j) = (0, 0);
    while i < x.times.len() || j < y.times.len() {
        let ti = x.times.get(i).copied().unwrap_or(f64::INFINITY);
        let tj = y.times.get(j).copied().unwrap_or(f64::INFINITY);
        if ti <= tj {
            i += 1;
        }
        if tj <= ti {
            j += 1;
        }
        best = best.max((x.values[i] - y.values[j]).abs());
    }
    best
}

const EXACT_BATCH: usize = 64;
const DEDUP_LIMIT: usize = 1 << 16;

/// Exact `d_J1` on `[0, horizon]` and a witnessing time change.
pub(crate) fn solve(x: &StepView, y: &StepView, horizon: f64) -> (f64, TimeChange) {
    let hi0 = uniform_steps(x, y);
    if hi0 == 0.0 {
        return (0.0, TimeChange::identity(horizon));
    }
    let problem = Problem::new(x, y, horizon);
    let (tx, ty) = problem.time_points();
    let (va, vb) = (sorted_unique(&x.values), sorted_unique(&y.values));
    let collect = |lo: f64, hi: f64| {
        let mut cands = Vec::new();
        pair_differences(tx, ty, lo, hi, &mut cands);
        pair_differences(&va, &vb, lo, hi, &mut cands);
        cands
    };
    let (mut lo, mut hi) = (0.0_f64, hi0);
    let mut rounds = 0;
    while rounds < 200 && hi - lo > 1e-15 * hi {
        let count = pair_count(tx, ty, lo, hi) + pair_count(&va, &vb, lo, hi);
        // lattice-like inputs repeat the same difference many times
        if count <= EXACT_BATCH
            || (count <= DEDUP_LIMIT && sorted_unique(&collect(lo, hi)).len() <= EXACT_BATCH)
        {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if problem.decide(mid, false).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
        rounds += 1;
    }
    let mut cands = collect(lo, hi);
    cands.push(hi);
    let cands = sorted_unique(&cands);
    // smallest feasible candidate; the last one (hi) is feasible
    let (mut left, mut right) = (0usize, cands.len() - 1);
    while left < right {
        let mid = (left + right) / 2;
        if problem.decide(cands[mid], false).is_some() {
            right = mid;
        } else {
            left = mid + 1;
        }
    }
    let eps = cands[left];
    match problem.decide(eps, true) {
        Some(events) => (eps, TimeChange::from_events(&events, horizon)),
        None => (hi0, TimeChange::identity(horizon)),
    }
}

/// `d_J1 ≤ eps`, with the identity and a cheap necessary condition tried
/// before the dynamic program.
pub(crate) fn within(x: &StepView, y: &StepView, horizon: f64, eps: f64) -> bool {
    if uniform_steps(x, y) <= eps {
        return true;
    }
    if (x.values[0] - y.values[0]).abs() > eps
        || (x.values.last().unwrap() - y.values.last().unwrap()).abs() > eps
    {
        return false;
    }
    Problem::new(x, y, horizon).decide(eps, false).is_some()
}
