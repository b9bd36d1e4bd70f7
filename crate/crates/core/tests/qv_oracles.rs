//! `q_n`, `s_n`, `p_n` and `μ_n` against direct sums over the partition.

mod common;

use cadlag_qv::calculus::{ito_residual, SmoothFunction};
use cadlag_qv::qv::{quartic_jump_sum, sn_qn_discrepancy};
use cadlag_qv::{mu_n, p_n, q_n, s_n, CadlagPath, Partition, PartitionScheme};
use common::step_path;
use proptest::prelude::*;

fn dyadic(n: usize) -> Partition {
    PartitionScheme::dyadic(1.0).unwrap().generate(n).unwrap()
}

fn incs(x: &CadlagPath, p: &Partition) -> Vec<(f64, f64)> {
    p.points()
        .windows(2)
        .map(|w| (w[0], x.evaluate(w[1]).unwrap() - x.evaluate(w[0]).unwrap()))
        .collect()
}

/// `Σ_{t_i ≤ t} δ_i²`.
fn q_direct(x: &CadlagPath, p: &Partition, t: f64) -> f64 {
    incs(x, p).iter().filter(|(s, _)| *s <= t).map(|(_, d)| d * d).sum()
}

/// `Σ_{t_{i+1} ≤ t} δ_i²`.
fn p_direct(x: &CadlagPath, p: &Partition, t: f64) -> f64 {
    let pts = p.points();
    incs(x, p)
        .iter()
        .enumerate()
        .filter(|(i, _)| pts[i + 1] <= t)
        .map(|(_, (_, d))| d * d)
        .sum()
}

fn s_direct(x: &CadlagPath, p: &Partition, t: f64) -> f64 {
    p.points()
        .windows(2)
        .map(|w| {
            let d = x.evaluate(w[1].min(t)).unwrap() - x.evaluate(w[0].min(t)).unwrap();
            d * d
        })
        .sum()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn direct_sums_agree(x in step_path(), n in 1usize..9, t in 0.0f64..=1.0) {
        let p = dyadic(n);
        let q = q_n(&x, &p).unwrap();
        let pn = p_n(&x, &p).unwrap();
        prop_assert!(close(q.evaluate(t).unwrap(), q_direct(&x, &p, t)));
        prop_assert!(close(pn.evaluate(t).unwrap(), p_direct(&x, &p, t)));
        prop_assert!(close(s_n(&x, &p, t).unwrap(), s_direct(&x, &p, t)));
        // ordering
        let (qv, sv, pv) = (q.evaluate(t).unwrap(), s_n(&x, &p, t).unwrap(), pn.evaluate(t).unwrap());
        prop_assert!(pv <= sv + 1e-12 && pv <= qv + 1e-12);
    }

    #[test]
    fn measure_distribution_is_q_n(x in step_path(), n in 1usize..9, t in 0.0f64..=1.0) {
        let p = dyadic(n);
        let m = mu_n(&x, &p).unwrap();
        prop_assert_eq!(m.mass_up_to(t), q_n(&x, &p).unwrap().evaluate(t).unwrap());
    }

    #[test]
    fn q_n_moves_only_on_partition_points(x in step_path(), n in 1usize..9, t in 0.0001f64..1.0) {
        let p = dyadic(n);
        let q = q_n(&x, &p).unwrap();
        if !p.contains(t) {
            prop_assert_eq!(q.jump_at(t).unwrap(), 0.0);
            prop_assert_eq!(q.evaluate(t).unwrap(), q.evaluate(p.last_at_or_before(t)).unwrap());
        }
    }

    #[test]
    fn discrepancy_identity(x in step_path(), n in 1usize..9, t in 0.0f64..=1.0) {
        // s_n(t) - q_n(t) = (x(t) - x(t_k))² - δ_k², t_k the last point ≤ t
        let p = dyadic(n);
        let k = p.last_at_or_before(t);
        let succ = p.successor(k).map(|s| s.min(1.0)).unwrap_or(1.0);
        let partial = x.evaluate(t).unwrap() - x.evaluate(k).unwrap();
        let full = x.evaluate(succ).unwrap() - x.evaluate(k).unwrap();
        let want = partial * partial - full * full;
        let signed = s_n(&x, &p, t).unwrap() - q_n(&x, &p).unwrap().evaluate(t).unwrap();
        prop_assert!(close(signed, want), "{signed} vs {want}");
        let got = sn_qn_discrepancy(&x, &p, t).unwrap();
        prop_assert!(close(got, want.abs()), "{got} vs {}", want.abs());
    }

    #[test]
    fn quartic_bound(x in step_path(), n in 1usize..9, t in 0.0f64..=1.0) {
        let p = dyadic(n);
        let biggest = incs(&x, &p).iter().map(|(_, d)| d * d).fold(0.0, f64::max);
        let q = q_n(&x, &p).unwrap().evaluate(t).unwrap();
        prop_assert!(quartic_jump_sum(&x, &p, t).unwrap() <= biggest * q * (1.0 + 1e-12));
    }

    #[test]
    fn square_ito_identity(x in step_path(), n in 1usize..10, k in 0usize..1024) {
        let p = dyadic(n);
        let t = p.points()[k % p.len()];
        let r = ito_residual(&SmoothFunction::square(), &x, &PartitionScheme::dyadic(1.0).unwrap(), n, t)
            .unwrap();
        let scale = 1.0 + x.sup_norm().powi(2) + q_n(&x, &p).unwrap().evaluate(1.0).unwrap();
        prop_assert!(r.abs() <= 1e-10 * scale);
    }

    #[test]
    fn linear_ito_telescopes(x in step_path(), n in 1usize..10, k in 0usize..1024, c in -3.0f64..3.0) {
        let p = dyadic(n);
        let t = p.points()[k % p.len()];
        let f = SmoothFunction::polynomial(&[0.5, c]).unwrap();
        let r = ito_residual(&f, &x, &PartitionScheme::dyadic(1.0).unwrap(), n, t).unwrap();
        prop_assert!(r.abs() <= 1e-10 * (1.0 + c.abs() * x.sup_norm()));
    }
}

#[test]
fn isolated_jumps_are_recovered() {
    let jumps = [(0.1234, 1.5), (0.4567, -0.7), (0.789, 0.3)];
    let x = CadlagPath::step(1.0, 0.0, &jumps).unwrap();
    let want: f64 = jumps.iter().map(|j| j.1 * j.1).sum();
    for n in 6..=14 {
        assert!(close(q_n(&x, &dyadic(n)).unwrap().evaluate(1.0).unwrap(), want));
    }
}
