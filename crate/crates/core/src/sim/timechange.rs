/// T(t) = time spent in V_⋆ up to t, and its generalized inverse S(t) = sup{s : T(s) ≤ t}.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    /// Disjoint, ascending [start, end) intervals spent in V_⋆.
    intervals: Vec<(f64, f64)>,
}

impl TimeChange {
    /// Intervals must be ascending and non-overlapping; empty ones are dropped.
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        let intervals: Vec<(f64, f64)> = intervals.into_iter().filter(|(a, b)| b > a).collect();
        debug_assert!(intervals.windows(2).all(|w| w[0].1 <= w[1].0));
        Self { intervals }
    }

    pub fn total(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn occupation(&self, t: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| (b.min(t) - a).max(0.0))
            .sum()
    }

    /// +∞ once t reaches the total occupation time.
    pub fn inverse(&self, t: f64) -> f64 {
        let mut cum = 0.0;
        for &(a, b) in &self.intervals {
            let len = b - a;
            if cum + len > t {
                return a + (t - cum).max(0.0);
            }
            cum += len;
        }
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_interval_indicator() {
        let tc = TimeChange::new(vec![(0.0, 1.0), (2.0, 3.0)]);
        assert_eq!(tc.inverse(0.5), 0.5);
        assert_eq!(tc.inverse(1.5), 2.5);
        assert_eq!(tc.inverse(1.0), 2.0);
        assert_eq!(tc.occupation(2.5), 1.5);
        assert_eq!(tc.inverse(2.0), f64::INFINITY);
    }

    #[test]
    fn identity_when_always_inside() {
        let tc = TimeChange::new(vec![(0.0, 10.0)]);
        for t in [0.0, 1.25, 9.5] {
            assert_eq!(tc.inverse(tc.occupation(t)), t);
        }
    }

    #[test]
    fn inverse_dominates_argument() {
        let tc = TimeChange::new(vec![(0.1, 0.4), (0.7, 0.75), (1.0, 2.0)]);
        for k in 0..200 {
            let t = k as f64 * 0.01;
            assert!(tc.inverse(tc.occupation(t)) >= t - 1e-15);
        }
    }
}
