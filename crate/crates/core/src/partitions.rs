//! Partition sequences `π = (π_n)` of `[0, horizon]`.
//!
//! Dyadic points are computed as `k / 2ⁿ`, which is exact in binary
//! floating point, so membership tests such as "is `t` a partition point"
//! are exact comparisons. Schemes need not be refining.

use crate::error::{Error, Result};

/// Strictly increasing times `0 = t₀ < t₁ < … < t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        match points.first() {
            None => return Err(Error::InvalidPartition("empty partition".into())),
            Some(&p) if p != 0.0 => {
                return Err(Error::InvalidPartition(format!("must start at 0, starts at {p}")))
            }
            _ => {}
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPartition("non-finite point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPartition(format!(
                "points must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Partition { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.points.last().expect("partitions are non-empty")
    }

    /// Largest spacing among the intervals `[t_i, t_{i+1}]` that meet
    /// `[0, t]` in more than a point (the first interval when `t = 0`).
    pub fn mesh(&self, t: f64) -> f64 {
        let mut mesh: f64 = 0.0;
        for (i, w) in self.points.windows(2).enumerate() {
            if w[0] < t || i == 0 {
                mesh = mesh.max(w[1] - w[0]);
            } else {
                break;
            }
        }
        mesh
    }

    /// Index of the largest point `≤ t` (0 when `t < t₁`).
    pub fn index_at_or_before(&self, t: f64) -> usize {
        self.points.partition_point(|&p| p <= t).saturating_sub(1)
    }

    /// Index of the largest point `< t` (0 when none but `t₀` qualifies).
    pub fn index_strictly_before(&self, t: f64) -> usize {
        self.points.partition_point(|&p| p < t).saturating_sub(1)
    }

    /// `max(π ∩ [0, t])`, with `max ∅ := 0`.
    pub fn last_at_or_before(&self, t: f64) -> f64 {
        self.points[self.index_at_or_before(t)]
    }

    /// `t'_n = max{t_i < t}`.
    pub fn last_strictly_before(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "last point strictly before {t} needs t > 0"
            )));
        }
        Ok(self.points[self.index_strictly_before(t)])
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.binary_search_by(|p| p.total_cmp(&t)).ok()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.index_of(t).is_some()
    }

    /// Next partition point; the last point maps to itself.
    pub fn successor(&self, t: f64) -> Result<f64> {
        let i = self.index_of(t).ok_or(Error::NotAPartitionPoint { t })?;
        Ok(self.points[(i + 1).min(self.points.len() - 1)])
    }

    /// Point preceding `t_i` (`t₀` maps to itself).
    pub fn predecessor(&self, t: f64) -> Result<f64> {
        let i = self.index_of(t).ok_or(Error::NotAPartitionPoint { t })?;
        Ok(self.points[i.saturating_sub(1)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    /// `k·2⁻ⁿ` up to the horizon.
    Dyadic,
    /// `k·horizon/(n+1)`, `k = 0..=n+1`.
    Uniform,
    /// One user-supplied partition per level.
    Explicit(Vec<Partition>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionScheme {
    kind: SchemeKind,
    horizon: f64,
}

impl PartitionScheme {
    pub fn dyadic(horizon: f64) -> Result<Self> {
        Self::checked(SchemeKind::Dyadic, horizon)
    }

    pub fn uniform(horizon: f64) -> Result<Self> {
        Self::checked(SchemeKind::Uniform, horizon)
    }

    /// Every level must end at the same point, which becomes the horizon.
    pub fn explicit(levels: Vec<Partition>) -> Result<Self> {
        let horizon = levels
            .first()
            .map(Partition::last)
            .ok_or_else(|| Error::InvalidPartition("no explicit levels".into()))?;
        if let Some((n, p)) = levels.iter().enumerate().find(|(_, p)| p.last() != horizon) {
            return Err(Error::InvalidPartition(format!(
                "level {n} ends at {} but level 0 ends at {horizon}",
                p.last()
            )));
        }
        Self::checked(SchemeKind::Explicit(levels), horizon)
    }

    /// Parses one partition per line, comma-separated times. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse_explicit(text: &str) -> Result<Self> {
        let mut levels = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let points = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Format(format!("partition line {}: `{}`: {e}", no + 1, s.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            levels.push(Partition::new(points)?);
        }
        Self::explicit(levels)
    }

    fn checked(kind: SchemeKind, horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidPartition(format!("horizon {horizon} must be positive")));
        }
        Ok(PartitionScheme { kind, horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> &SchemeKind {
        &self.kind
    }

    /// The same scheme on another horizon. Explicit schemes keep theirs.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        match self.kind {
            SchemeKind::Explicit(_) => Ok(self.clone()),
            _ => Self::checked(self.kind.clone(), horizon),
        }
    }

    /// `π_n`. Dyadic partitions append the horizon when it is not itself a
    /// multiple of `2⁻ⁿ`.
    pub fn generate(&self, n: usize) -> Result<Partition> {
        match &self.kind {
            SchemeKind::Dyadic => {
                if n > 40 {
                    return Err(Error::LevelUnavailable {
                        level: n,
                        reason: "dyadic levels above 40 are not supported".into(),
                    });
                }
                let scale = (n as f64).exp2();
                let count = (self.horizon * scale).floor() as usize;
                let mut points: Vec<f64> = (0..=count).map(|k| k as f64 / scale).collect();
                if *points.last().unwrap() < self.horizon {
                    points.push(self.horizon);
                }
                Partition::new(points)
            }
            SchemeKind::Uniform => {
                let cells = n + 1;
                let mut points: Vec<f64> = (0..cells)
                    .map(|k| k as f64 * self.horizon / cells as f64)
                    .collect();
                points.push(self.horizon);
                Partition::new(points)
            }
            SchemeKind::Explicit(levels) => {
                levels.get(n).cloned().ok_or_else(|| Error::LevelUnavailable {
                    level: n,
                    reason: format!("only {} explicit levels", levels.len()),
                })
            }
        }
    }

    /// `|π_n|` on `[0, horizon]` for each requested level.
    pub fn mesh_profile(&self, levels: impl IntoIterator<Item = usize>) -> Result<Vec<f64>> {
        levels
            .into_iter()
            .map(|n| Ok(self.generate(n)?.mesh(self.horizon)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: f64 = 0.7071;

    fn dyadic(n: usize) -> Partition {
        PartitionScheme::dyadic(1.0).unwrap().generate(n).unwrap()
    }

    #[test]
    fn generation() {
        assert_eq!(dyadic(1).points(), &[0.0, 0.5, 1.0]);
        assert_eq!(dyadic(2).points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let u = PartitionScheme::uniform(1.0).unwrap().generate(3).unwrap();
        assert_eq!(u.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let odd = PartitionScheme::dyadic(1.3).unwrap().generate(1).unwrap();
        assert_eq!(odd.points(), &[0.0, 0.5, 1.0, 1.3]);
    }

    #[test]
    fn explicit_levels() {
        let s = PartitionScheme::parse_explicit("0,0.5,1\n# finer\n0,0.25,0.5,1\n").unwrap();
        assert_eq!(s.horizon(), 1.0);
        assert_eq!(s.generate(1).unwrap().points(), &[0.0, 0.25, 0.5, 1.0]);
        assert!(matches!(s.generate(2), Err(Error::LevelUnavailable { .. })));
        assert!(PartitionScheme::parse_explicit("0.1,0.5,1\n").is_err());
        assert!(PartitionScheme::parse_explicit("0,0.5,0.5,1\n").is_err());
        assert!(PartitionScheme::parse_explicit("0,0.5,1\n0,2\n").is_err());
        assert!(PartitionScheme::parse_explicit("0,x\n").is_err());
    }

    #[test]
    fn mesh_values() {
        assert_eq!(dyadic(3).mesh(1.0), 0.125);
        let p = Partition::new(vec![0.0, 0.1, 1.0]).unwrap();
        assert_eq!(p.mesh(1.0), 0.9);
        assert_eq!(p.mesh(0.05), 0.1);
    }

    #[test]
    fn dyadic_mesh_halves() {
        let s = PartitionScheme::dyadic(1.0).unwrap();
        let m = s.mesh_profile(0..12).unwrap();
        for w in m.windows(2) {
            assert_eq!(w[1], w[0] / 2.0);
        }
    }

    #[test]
    fn lookups() {
        let p = dyadic(2);
        assert_eq!(p.last_at_or_before(T0), 0.5);
        assert_eq!(p.last_at_or_before(0.25), 0.25);
        assert_eq!(p.last_at_or_before(0.1), 0.0);
        assert_eq!(p.last_strictly_before(0.25).unwrap(), 0.0);
        assert_eq!(p.last_strictly_before(T0).unwrap(), 0.5);
        assert_eq!(p.last_strictly_before(0.26).unwrap(), 0.25);
        assert!(p.last_strictly_before(0.0).is_err());
    }

    #[test]
    fn successors() {
        assert_eq!(dyadic(1).successor(0.5).unwrap(), 1.0);
        assert_eq!(dyadic(1).successor(1.0).unwrap(), 1.0);
        assert_eq!(dyadic(3).successor(0.125).unwrap(), 0.25);
        assert!(matches!(
            dyadic(3).successor(0.3),
            Err(Error::NotAPartitionPoint { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ordering_of_lookups(n in 0usize..10, t in 0.0001f64..1.0) {
                let p = dyadic(n);
                let strict = p.last_strictly_before(t).unwrap();
                let weak = p.last_at_or_before(t);
                prop_assert!(strict <= weak && weak <= t);
                prop_assert_eq!(strict == weak, !p.contains(t));
                prop_assert!(p.successor(weak).unwrap() >= t);
            }

            #[test]
            fn uniform_mesh_non_increasing(n in 0usize..200) {
                let s = PartitionScheme::uniform(3.0).unwrap();
                let a = s.generate(n).unwrap().mesh(3.0);
                let b = s.generate(n + 1).unwrap().mesh(3.0);
                prop_assert!(b <= a);
            }
        }
    }
}
