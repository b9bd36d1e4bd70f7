//! Finite-level stopping rules.
//!
//! A computation only ever sees finitely many partition levels, so "the
//! sequence converges" is replaced everywhere by the same proxy: the last
//! three entries of a gap sequence are below the tolerance and the window
//! ends no higher than it starts. Level-to-level monotonicity is not
//! required: gaps that follow the binary digits of a jump time, or the noise
//! of a sampled path, wobble inside the window while still shrinking.

use serde::Serialize;

/// How a sequence of approximants approaches its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Uniform on `[0, T]` (and therefore also J1).
    Uniform,
    /// Skorokhod J1 only.
    J1,
    /// Neither rule settled over the observed levels.
    Divergent,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Uniform => "uniform",
            Mode::J1 => "j1",
            Mode::Divergent => "divergent",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of trailing entries inspected by [`settles`].
pub const WINDOW: usize = 3;

/// True when the last [`WINDOW`] entries are all `≤ tol` and the last is no
/// larger than the first of them.
pub fn settles(gaps: &[f64], tol: f64) -> bool {
    let tail = tail(gaps);
    !tail.is_empty() && tail.iter().all(|&g| g <= tol) && tail[tail.len() - 1] <= tail[0]
}

pub fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

pub(crate) fn tail(values: &[f64]) -> &[f64] {
    &values[values.len().saturating_sub(WINDOW)..]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule() {
        assert!(settles(&[5.0, 0.3, 0.2, 0.2], 0.5));
        assert!(settles(&[0.3, 0.2, 0.25], 0.5));
        assert!(!settles(&[0.2, 0.1, 0.25], 0.5));
        assert!(!settles(&[0.3, 0.2, 0.6], 0.5));
        assert!(!settles(&[], 0.5));
        assert!(settles(&[0.0, 0.0], 0.0));
    }
}
