//! The obstacle `G(x) = 2 * int_0^x (F_nu - F_mu)`.
//!
//! Both CDFs are piecewise linear, so `G` is an exact piecewise quadratic
//! between consecutive breakpoints of the two measures.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::extended::Extended;
use crate::measures::{ProbabilityMeasure, SupportSummary};

/// Relative tolerance for calling `G(+inf)` and `G(-inf)` equal.
pub const BALANCE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PayoffCurve {
    nu: ProbabilityMeasure,
    mu: ProbabilityMeasure,
    breakpoints: Vec<f64>,
    // G(b_j), right slope at b_j, and G'' on (b_j, b_{j+1}).
    values: Vec<f64>,
    slopes: Vec<f64>,
    curvatures: Vec<f64>,
    a0: Option<f64>,
}

pub fn build_payoff(nu: &ProbabilityMeasure, mu: &ProbabilityMeasure) -> PayoffCurve {
    PayoffCurve::new(nu, mu)
}

impl PayoffCurve {
    pub fn new(nu: &ProbabilityMeasure, mu: &ProbabilityMeasure) -> Self {
        let mut bps: Vec<f64> = nu
            .breakpoints()
            .into_iter()
            .chain(mu.breakpoints())
            .chain(std::iter::once(0.0))
            .collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();

        let n = bps.len();
        let slopes: Vec<f64> = bps
            .iter()
            .map(|&x| 2.0 * (nu.cdf(x) - mu.cdf(x)))
            .collect();
        let curvatures: Vec<f64> = (0..n)
            .map(|j| {
                if j + 1 < n {
                    let mid = 0.5 * (bps[j] + bps[j + 1]);
                    2.0 * (nu.density_at(mid) - mu.density_at(mid))
                } else {
                    0.0
                }
            })
            .collect();
        let increment = |j: usize| {
            let h = bps[j + 1] - bps[j];
            slopes[j] * h + 0.5 * curvatures[j] * h * h
        };
        let zero = bps.iter().position(|&x| x == 0.0).expect("0 is a breakpoint");
        let mut values = vec![0.0; n];
        for j in zero..n - 1 {
            values[j + 1] = values[j] + increment(j);
        }
        for j in (0..zero).rev() {
            values[j] = values[j + 1] - increment(j);
        }

        let mut curve = PayoffCurve {
            nu: nu.clone(),
            mu: mu.clone(),
            breakpoints: bps,
            values,
            slopes,
            curvatures,
            a0: None,
        };
        curve.a0 = curve.compute_a0();
        curve
    }

    pub fn nu(&self) -> &ProbabilityMeasure {
        &self.nu
    }

    pub fn mu(&self) -> &ProbabilityMeasure {
        &self.mu
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Piece index `j` with `b_j <= x < b_{j+1}`, or the end pieces.
    fn piece(&self, x: f64) -> usize {
        self.breakpoints
            .partition_point(|&b| b <= x)
            .saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.breakpoints.len();
        if x <= self.breakpoints[0] {
            return self.values[0];
        }
        if x >= self.breakpoints[n - 1] {
            return self.values[n - 1];
        }
        let j = self.piece(x);
        let h = x - self.breakpoints[j];
        self.values[j] + self.slopes[j] * h + 0.5 * self.curvatures[j] * h * h
    }

    /// `(G'(x+), G'(x-))`.
    pub fn derivatives(&self, x: f64) -> (f64, f64) {
        (
            2.0 * (self.nu.cdf(x) - self.mu.cdf(x)),
            2.0 * (self.nu.cdf_left(x) - self.mu.cdf_left(x)),
        )
    }

    pub fn g_plus_inf(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn g_minus_inf(&self) -> f64 {
        self.values[0]
    }

    /// Leftmost minimizer of `G`, defined when `mu` charges both closed
    /// half-lines outside the initial support hull.
    pub fn a0(&self) -> Option<f64> {
        self.a0
    }

    fn compute_a0(&self) -> Option<f64> {
        let (lo, hi) = self.nu.support();
        let left = self.mu.cdf(lo);
        let right = 1.0 - self.mu.cdf_left(hi);
        if left <= 0.0 || right <= 0.0 {
            return None;
        }
        let mut best = (f64::INFINITY, 0.0);
        let n = self.breakpoints.len();
        for j in 0..n {
            let b = self.breakpoints[j];
            let cand = self.values[j];
            if cand < best.0 {
                best = (cand, b);
            }
            // Interior vertex of a convex piece.
            if j + 1 < n && self.curvatures[j] > 0.0 {
                let h = -self.slopes[j] / self.curvatures[j];
                if h > 0.0 && b + h < self.breakpoints[j + 1] {
                    let v = self.values[j] + self.slopes[j] * h + 0.5 * self.curvatures[j] * h * h;
                    if v < best.0 {
                        best = (v, b + h);
                    }
                }
            }
        }
        Some(best.1)
    }

    /// Larger of the limits of `G` at the two ends; this is `sup G` when the
/// gap condition holds.
    pub fn sup(&self) -> f64 {
        self.g_plus_inf().max(self.g_minus_inf())
    }

    /// CSV of `(x, G, G'+, G'-)` on `n` equally spaced points.
    pub fn to_csv(&self, lo: f64, hi: f64, n: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# payoff G(x); x in space units; grid lo={lo} hi={hi} points={n}");
        out.push_str("x,g,g_right,g_left\n");
        let n = n.max(2);
        for k in 0..n {
            let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let (r, l) = self.derivatives(x);
            let _ = writeln!(out, "{x:.12},{:.15},{r:.15},{l:.15}", self.eval(x));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonCase {
    /// `G(+inf) = G(-inf) = +inf`; cannot occur with compact supports.
    Unbounded,
    RightDominant,
    LeftDominant,
    Balanced,
}

/// Value and continuation interval of the infinite-horizon problem.
///
/// `c_inf_lo` is `-b^inf_-` and `c_inf_hi` is `b^inf_+`; `Infinite` on
/// `c_inf_lo` stands for `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteHorizonResult {
    pub v: f64,
    pub b_inf_minus: Extended,
    pub b_inf_plus: Extended,
    pub case: HorizonCase,
}

impl InfiniteHorizonResult {
    /// Endpoints `(-b^inf_-, b^inf_+)` as floats, with infinities.
    pub fn interval(&self) -> (f64, f64) {
        (
            self.b_inf_minus.finite().map_or(f64::NEG_INFINITY, |b| -b),
            self.b_inf_plus.finite().unwrap_or(f64::INFINITY),
        )
    }
}

pub fn infinite_horizon(p: &PayoffCurve, summary: &SupportSummary) -> InfiniteHorizonResult {
    let gp = p.g_plus_inf();
    let gm = p.g_minus_inf();
    let scale = 1.0f64.max(gp.abs()).max(gm.abs());
    let case = if (gp - gm).abs() <= BALANCE_TOLERANCE * scale {
        HorizonCase::Balanced
    } else if gp > gm {
        HorizonCase::RightDominant
    } else {
        HorizonCase::LeftDominant
    };
    let (b_inf_minus, b_inf_plus) = match case {
        HorizonCase::RightDominant => (Extended::Infinite, summary.mu_plus),
        HorizonCase::LeftDominant => (summary.mu_minus, Extended::Infinite),
        HorizonCase::Balanced => (summary.mu_minus, summary.mu_plus),
        HorizonCase::Unbounded => (Extended::Infinite, Extended::Infinite),
    };
    InfiniteHorizonResult {
        v: gp.max(gm),
        b_inf_minus,
        b_inf_plus,
        case,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::support_summary;

    fn delta0() -> ProbabilityMeasure {
        ProbabilityMeasure::dirac(0.0).unwrap()
    }

    fn two_point() -> ProbabilityMeasure {
        ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn two_point_is_min_abs_one() {
        let g = PayoffCurve::new(&delta0(), &two_point());
        for k in -300..=300 {
            let x = k as f64 * 0.01;
            assert!((g.eval(x) - x.abs().min(1.0)).abs() < 1e-15, "x={x}");
        }
        assert_eq!(g.eval(0.5), 0.5);
        assert_eq!(g.eval(2.0), 1.0);
        assert_eq!(g.derivatives(0.0), (1.0, -1.0));
        assert_eq!(g.derivatives(0.5), (1.0, 1.0));
        assert_eq!(g.derivatives(-5.0), (0.0, 0.0));
    }

    #[test]
    fn gap_violating_pair() {
        let g = PayoffCurve::new(&two_point(), &ProbabilityMeasure::uniform(-0.5, 0.5).unwrap());
        assert_eq!(g.eval(0.0), 0.0);
        assert!((g.eval(2.0) + 0.75).abs() < 1e-15);
        assert!((g.eval(-2.0) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn equal_measures_give_zero() {
        let m = ProbabilityMeasure::uniform(-1.0, 2.0).unwrap();
        let g = PayoffCurve::new(&m, &m);
        for k in -30..=30 {
            assert_eq!(g.eval(k as f64 * 0.1), 0.0);
        }
    }

    #[test]
    fn uniform_closed_form() {
        let g = PayoffCurve::new(&delta0(), &ProbabilityMeasure::uniform(-1.0, 1.0).unwrap());
        for k in -100..=100 {
            let x = k as f64 * 0.01;
            assert!((g.eval(x) - (x.abs() - 0.5 * x * x)).abs() < 1e-15);
        }
        assert_eq!(g.a0(), Some(0.0));
    }

    #[test]
    fn infinite_horizon_cases() {
        let cases = [
            (two_point(), 1.0, HorizonCase::Balanced, (-1.0, 1.0)),
            (
                ProbabilityMeasure::uniform(-1.0, 1.0).unwrap(),
                0.5,
                HorizonCase::Balanced,
                (-1.0, 1.0),
            ),
            (
                ProbabilityMeasure::uniform(1.0, 2.0).unwrap(),
                3.0,
                HorizonCase::RightDominant,
                (f64::NEG_INFINITY, 2.0),
            ),
        ];
        for (mu, v, case, interval) in cases {
            let g = PayoffCurve::new(&delta0(), &mu);
            let s = support_summary(&delta0(), &mu).unwrap();
            let r = infinite_horizon(&g, &s);
            assert!((r.v - v).abs() < 1e-15);
            assert_eq!(r.case, case);
            assert_eq!(r.interval(), interval);
        }
    }

    #[test]
    fn leftmost_minimizer_on_flat() {
        // G = |x| near 0 and flat minimum only at 0; shift nu to get a flat.
        let nu = ProbabilityMeasure::uniform(-0.5, 0.5).unwrap();
        let mu = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let g = PayoffCurve::new(&nu, &mu);
        let a0 = g.a0().unwrap();
        assert!((-0.5..=0.5).contains(&a0));
        assert!(g.eval(a0) <= g.eval(0.0) + 1e-15);
    }
}
