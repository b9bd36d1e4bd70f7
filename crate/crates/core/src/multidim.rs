//! Matrix-valued quadratic variation of vector paths.
//!
//! `𝐪_n(t) = Σ_{t_i ≤ t} δ_i δ_iᵀ` with `δ_i = 𝐱(t_{i+1}) - 𝐱(t_i)`. Entry
//! `(i, j)` is the cross sum `q_n^{(xⁱ, xʲ)}`. Convergence is tested entry
//! by entry. Addition of paths is not continuous in J1, so sums `x + y`
//! built for polarization are only ever compared level by level.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::convergence::Mode;
use crate::error::{Error, Result};
use crate::partitions::{Partition, PartitionScheme};
use crate::paths::{merge_sorted, CadlagPath, VectorCadlagPath};
use crate::qv::{
    cumulative, decompose_entry, increments, level_list, q_n, qv_limit, retimed, sequence_report,
    ConvergenceReport, LimitOptions,
};

/// A symmetric `m × m` matrix of step paths on a common horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStepPath {
    dim: usize,
    entries: Vec<CadlagPath>,
}

impl MatrixStepPath {
    /// `entries` in row-major order. Checks symmetry at every knot and that
    /// the diagonal does not decrease.
    pub fn new(dim: usize, entries: Vec<CadlagPath>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let horizon = entries[0].horizon();
        if let Some(e) = entries.iter().find(|e| e.horizon() != horizon) {
            return Err(Error::HorizonMismatch {
                left: horizon,
                right: e.horizon(),
            });
        }
        let m = MatrixStepPath { dim, entries };
        let times = m.knot_times();
        for i in 0..dim {
            for j in i + 1..dim {
                let (a, b) = (m.entry(i, j), m.entry(j, i));
                if let Some(&t) = times.iter().find(|&&t| a.value_at(t) != b.value_at(t)) {
                    return Err(Error::InvalidParameter(format!(
                        "entries ({i},{j}) and ({j},{i}) differ at t = {t}"
                    )));
                }
            }
            let d = m.entry(i, i);
            if let Some(w) = d.knots().windows(2).find(|w| w[1].value < w[0].value) {
                return Err(Error::NotMonotone {
                    t: w[1].time,
                    drop: w[0].value - w[1].value,
                });
            }
        }
        Ok(m)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.entries[0].horizon()
    }

    pub fn entry(&self, i: usize, j: usize) -> &CadlagPath {
        &self.entries[i * self.dim + j]
    }

    /// Union of the knot times of all entries.
    pub fn knot_times(&self) -> Vec<f64> {
        self.entries
            .iter()
            .fold(Vec::new(), |acc, e| merge_sorted(&acc, &e.knot_times()))
    }

    pub fn evaluate(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::Domain {
                t,
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        Ok(self.at(t))
    }

    fn at(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).value_at(t))
    }
}

/// `q_n^{(x,y)}(t) = Σ_{t_i ≤ t} (x(t_{i+1}) - x(t_i))(y(t_{i+1}) - y(t_i))`.
pub fn cross_q_n(x: &CadlagPath, y: &CadlagPath, p: &Partition) -> Result<CadlagPath> {
    if x.horizon() != y.horizon() {
        return Err(Error::HorizonMismatch {
            left: x.horizon(),
            right: y.horizon(),
        });
    }
    Ok(cumulative(&cross_products(x, y, p)?, x.horizon(), true))
}

fn cross_products(x: &CadlagPath, y: &CadlagPath, p: &Partition) -> Result<Vec<(f64, f64)>> {
    Ok(increments(x, p)?
        .into_iter()
        .zip(increments(y, p)?)
        .map(|((t, dx), (_, dy))| (t, dx * dy))
        .collect())
}

/// Outer-product sums of the increments of `x` along `p`.
pub fn matrix_q_n(x: &VectorCadlagPath, p: &Partition) -> Result<MatrixStepPath> {
    let m = x.dimension();
    let incs = x
        .components()
        .iter()
        .map(|c| increments(c, p))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = vec![None; m * m];
    for i in 0..m {
        for j in i..m {
            let masses: Vec<(f64, f64)> = incs[i]
                .iter()
                .zip(&incs[j])
                .map(|(&(t, a), &(_, b))| (t, a * b))
                .collect();
            let e = cumulative(&masses, x.horizon(), true);
            entries[j * m + i] = Some(e.clone());
            entries[i * m + j] = Some(e);
        }
    }
    Ok(MatrixStepPath {
        dim: m,
        entries: entries.into_iter().map(Option::unwrap).collect(),
    })
}

/// Relative tolerance of the per-level polarization identity.
pub const POLARIZATION_RTOL: f64 = 1e-12;

/// Largest relative defect of `q_n^{(x+y)} = q_n^{(x)} + q_n^{(y)} + 2 q_n^{(x,y)}`
/// over the partition points.
pub fn polarization_defect(x: &CadlagPath, y: &CadlagPath, p: &Partition) -> Result<f64> {
    let sum = CadlagPath::pointwise_combine(x, y, (1.0, 1.0))?;
    let (qs, qx, qy) = (q_n(&sum, p)?, q_n(x, p)?, q_n(y, p)?);
    let qxy = cross_q_n(x, y, p)?;
    let mut worst: f64 = 0.0;
    for &t in p.points().iter().take_while(|&&t| t <= x.horizon()) {
        let (a, b, c, d) = (qs.value_at(t), qx.value_at(t), qy.value_at(t), qxy.value_at(t));
        let scale = (a.abs() + b.abs() + c.abs() + 2.0 * d.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((a - b - c - 2.0 * d).abs() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariation {
    /// `½([x+y] - [x] - [y])`.
    pub path: CadlagPath,
    /// Finest-level direct cross sum, re-timed at the jumps of `x` and `y`.
    pub direct: CadlagPath,
    /// Per-level relative defect of the polarization identity.
    pub defects: Vec<f64>,
}

/// The covariation `[x, y]` by polarization, after checking the algebraic
/// identity behind it at every level.
pub fn covariation_polarization(
    x: &CadlagPath,
    y: &CadlagPath,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    opts: &LimitOptions,
) -> Result<Covariation> {
    let list = level_list(&levels)?;
    let defects = list
        .iter()
        .map(|&n| polarization_defect(x, y, &scheme.generate(n)?))
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, d)) = defects.iter().enumerate().find(|(_, &d)| d > POLARIZATION_RTOL) {
        return Err(Error::Consistency(format!(
            "polarization identity off by {d:e} (relative) at level {}",
            list[i]
        )));
    }
    let sum = CadlagPath::pointwise_combine(x, y, (1.0, 1.0))?;
    let lx = qv_limit(x, scheme, levels.clone(), opts)?;
    let ly = qv_limit(y, scheme, levels.clone(), opts)?;
    let ls = qv_limit(&sum, scheme, levels, opts)?;
    let (lx, ly, ls) = (lx.require_limit()?, ly.require_limit()?, ls.require_limit()?);
    let partial = CadlagPath::pointwise_combine(ls, lx, (0.5, -0.5))?;
    let path = CadlagPath::pointwise_combine(&partial, ly, (1.0, -0.5))?;
    let finest = scheme.generate(*list.last().unwrap())?;
    let jumps = merge_sorted(&x.jump_times(), &y.jump_times());
    let direct = retimed(&cross_products(x, y, &finest)?, &jumps, &finest, x.horizon());
    Ok(Covariation {
        path,
        direct,
        defects,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryReport {
    pub i: usize,
    pub j: usize,
    pub report: ConvergenceReport,
    /// Why the entry fails the decomposition, when it does.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixQvLimit {
    /// Entries with `i ≤ j`.
    pub entries: Vec<EntryReport>,
    pub converged: bool,
    /// Finest-level estimate, present when every entry converged.
    pub limit: Option<MatrixStepPath>,
    /// Continuous parts of the entries, present when every decomposition
    /// succeeded.
    pub continuous: Option<MatrixStepPath>,
}

impl MatrixQvLimit {
    pub fn require_limit(&self) -> Result<&MatrixStepPath> {
        self.limit.as_ref().ok_or_else(|| {
            let bad: Vec<String> = self
                .entries
                .iter()
                .filter(|e| !e.report.converged)
                .map(|e| format!("({},{})", e.i, e.j))
                .collect();
            Error::Undecided(format!("entries {} did not settle", bad.join(", ")))
        })
    }
}

/// Entrywise limit of `𝐪_n` with the decomposition
/// `[xⁱ,xʲ](t) = [xⁱ,xʲ]^c(t) + Σ_{s ≤ t} Δxⁱ(s) Δxʲ(s)` checked per entry.
pub fn matrix_qv_limit(
    x: &VectorCadlagPath,
    scheme: &PartitionScheme,
    levels: RangeInclusive<usize>,
    opts: &LimitOptions,
) -> Result<MatrixQvLimit> {
    let list = level_list(&levels)?;
    let m = x.dimension();
    let horizon = x.horizon();
    let parts = list
        .iter()
        .map(|&n| scheme.generate(n))
        .collect::<Result<Vec<_>>>()?;
    let mats = parts
        .par_iter()
        .map(|p| matrix_q_n(x, p))
        .collect::<Result<Vec<_>>>()?;
    let meshes: Vec<f64> = parts.iter().map(|p| p.mesh(horizon)).collect();
    let finest = parts.last().unwrap();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let results = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (u, v) = (x.component(i), x.component(j));
            let seq: Vec<CadlagPath> = mats.iter().map(|q| q.entry(i, j).clone()).collect();
            let jumps = merge_sorted(&u.jump_times(), &v.jump_times());
            let limit = retimed(&cross_products(u, v, finest)?, &jumps, finest, horizon);
            let report = sequence_report(list.clone(), meshes.clone(), &seq, &limit, opts.tol)?;
            let decomposition = report
                .converged
                .then(|| decompose_entry(&limit, u, v, opts.atol, i == j));
            Ok((i, j, report, limit, decomposition))
        })
        .collect::<Result<Vec<_>>>()?;
    let converged = results.iter().all(|r| r.2.converged);
    let mut limits = vec![None; m * m];
    let mut conts = vec![None; m * m];
    let mut entries = Vec::with_capacity(results.len());
    for (i, j, report, limit, dec) in results {
        let mut violation = None;
        match dec {
            Some(Ok((c, _))) => {
                conts[i * m + j] = Some(c.clone());
                conts[j * m + i] = Some(c);
            }
            Some(Err(e)) => violation = Some(e.to_string()),
            None => {}
        }
        limits[i * m + j] = Some(limit.clone());
        limits[j * m + i] = Some(limit);
        entries.push(EntryReport {
            i,
            j,
            report,
            violation,
        });
    }
    let assemble = |v: Vec<Option<CadlagPath>>| -> Option<MatrixStepPath> {
        let all: Option<Vec<CadlagPath>> = v.into_iter().collect();
        all.map(|entries| MatrixStepPath { dim: m, entries })
    };
    Ok(MatrixQvLimit {
        limit: if converged { assemble(limits) } else { None },
        continuous: if converged { assemble(conts) } else { None },
        converged,
        entries,
    })
}

impl MatrixQvLimit {
    pub fn entry_mode(&self, i: usize, j: usize) -> Option<Mode> {
        let (i, j) = (i.min(j), i.max(j));
        self.entries
            .iter()
            .find(|e| e.i == i && e.j == j)
            .map(|e| e.report.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdReport {
    pub pairs: usize,
    pub min_eigenvalue: f64,
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen().eigenvalues.min()
}

/// Smallest eigenvalue of `q(t_{k+1}) - q(t_k)` over consecutive `times`;
/// fails when one drops below `-atol`.
pub fn psd_increment_check(q: &MatrixStepPath, times: &[f64], atol: f64) -> Result<PsdReport> {
    let mut lowest = f64::INFINITY;
    for w in times.windows(2) {
        let inc = q.evaluate(w[1])? - q.evaluate(w[0])?;
        let e = min_eigenvalue(inc);
        if e < -atol {
            return Err(Error::NotPsd {
                from: w[0],
                to: w[1],
                eigenvalue: e,
            });
        }
        lowest = lowest.min(e);
    }
    Ok(PsdReport {
        pairs: times.len().saturating_sub(1),
        min_eigenvalue: lowest,
    })
}

/// [`psd_increment_check`] over every knot of `q`, including `q(0)` itself
/// as the increment from the zero matrix.
pub fn psd_all_increments(q: &MatrixStepPath, atol: f64) -> Result<PsdReport> {
    let at_zero = min_eigenvalue(q.at(0.0));
    if at_zero < -atol {
        return Err(Error::NotPsd {
            from: 0.0,
            to: 0.0,
            eigenvalue: at_zero,
        });
    }
    let r = psd_increment_check(q, &q.knot_times(), atol)?;
    Ok(PsdReport {
        pairs: r.pairs + 1,
        min_eigenvalue: r.min_eigenvalue.min(at_zero),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub t: f64,
    pub levels: Vec<usize>,
    /// `t'_n`, shared by all entries.
    pub t_n: Vec<f64>,
    /// Row-major `Δq_n^{(i,j)}(t'_n)` per level.
    pub observed: Vec<Vec<f64>>,
    /// Row-major jumps of the limit entries at `t`.
    pub target: Vec<f64>,
    pub max_gap: Vec<f64>,
    pub passed: bool,
}

/// Jumps of every entry of `𝐪_n` at the single sequence `t'_n` against the
/// jumps of the limit at `t`.
pub fn jump_alignment_check(
    x: &VectorCadlagPath,
    scheme: &PartitionScheme,
    t: f64,
    levels: RangeInclusive<usize>,
    opts: &LimitOptions,
) -> Result<AlignmentReport> {
    if !(t > 0.0 && t <= x.horizon()) {
        return Err(Error::Domain {
            t,
            lo: 0.0,
            hi: x.horizon(),
        });
    }
    let lim = matrix_qv_limit(x, scheme, levels.clone(), opts)?;
    let lim = lim.require_limit()?;
    let m = x.dimension();
    let target: Vec<f64> = (0..m * m)
        .map(|k| {
            let e = lim.entry(k / m, k % m);
            e.value_at(t) - e.left_value_at(t)
        })
        .collect();
    let mut t_n = Vec::new();
    let mut observed = Vec::new();
    let mut max_gap = Vec::new();
    for n in levels.clone() {
        let p = scheme.generate(n)?;
        let tp = p.last_strictly_before(t)?;
        let i = p.index_of(tp).expect("t'_n is a partition point");
        let deltas: Vec<f64> = x
            .components()
            .iter()
            .map(|c| Ok(increments(c, &p)?[i].1))
            .collect::<Result<Vec<_>>>()?;
        let obs: Vec<f64> = (0..m * m).map(|k| deltas[k / m] * deltas[k % m]).collect();
        max_gap.push(
            obs.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        t_n.push(tp);
        observed.push(obs);
    }
    Ok(AlignmentReport {
        t,
        levels: levels.collect(),
        t_n,
        observed,
        target,
        passed: crate::convergence::settles(&max_gap, opts.tol),
        max_gap,
    })
}
