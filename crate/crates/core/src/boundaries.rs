//! Stopping boundaries, their time reversal and structural detectors.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::extended::Extended;
use crate::measures::{ProbabilityMeasure, SupportSummary};
use crate::solver::ValueSurface;

/// `b_+(t_k)` and `b_-(t_k)` for `k = 0..=N`. Entry `N` holds the terminal
/// limit `bhat`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub dt: f64,
    pub dx: f64,
    pub horizon: f64,
    pub b_plus: Vec<Extended>,
    pub b_minus: Vec<Extended>,
    /// Largest upward move of the raw boundary before the isotonic pass.
    pub raw_violation_plus: f64,
    pub raw_violation_minus: f64,
}

impl BoundarySet {
    pub fn steps(&self) -> usize {
        self.b_plus.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn side(&self, side: Side) -> &[Extended] {
        match side {
            Side::Upper => &self.b_plus,
            Side::Lower => &self.b_minus,
        }
    }

    /// Row governing time `t` under right continuity: `floor(t / dt)`.
    pub fn row_at(&self, t: f64) -> usize {
        let k = (t / self.dt + 1e-9).floor().max(0.0) as usize;
        k.min(self.steps())
    }

    /// `x` in `(-b_-(t), b_+(t))`.
    pub fn contains(&self, t: f64, x: f64) -> bool {
        let k = self.row_at(t);
        self.b_plus[k].exceeds(x) && self.b_minus[k].exceeds(-x)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# stopping boundaries; t in time units, b in space units; dt={} dx={} T={} rows={}",
            self.dt,
            self.dx,
            self.horizon,
            self.b_plus.len()
        );
        out.push_str("t,b_plus,b_minus\n");
        for k in 0..self.b_plus.len() {
            let _ = writeln!(
                out,
                "{:.12},{},{}",
                self.time(k),
                self.b_plus[k].to_cell(12),
                self.b_minus[k].to_cell(12)
            );
        }
        out
    }
}

/// Reads `b_+` as the last continuation node plus `dx/2` (and `b_-`
/// symmetrically) on every step, then projects each finite side onto
/// non-increasing sequences.
///
/// Sides whose target law misses the half-line entirely are set to the
/// infinite sentinel on every row; the mask is never used to decide that.
/// A row without continuation nodes falls back to the initial support hull.
///
/// Each level is floored at `bhat`: the strip `(-bhat_-, bhat_+)` lies in
/// the continuation set for every `t < T`, but the lattice front spreads
/// one node per step from the kinks of `G`, so near `T` the mask alone
/// sees much less of it.
pub fn extract_boundaries(s: &ValueSurface, summary: &SupportSummary) -> Result<BoundarySet> {
    let l = &s.lattice;
    let n = s.steps();
    let floor = |v: f64, bhat: Extended| bhat.finite().map_or(v, |h| v.max(h));
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for k in 0..n {
        match s.continuation_range(k) {
            Some((a, b)) => {
                if summary.bhat_plus.is_finite() && b + 2 >= l.n_nodes {
                    return Err(Error::ClassificationConflict { side: Side::Upper });
                }
                if summary.bhat_minus.is_finite() && a <= 1 {
                    return Err(Error::ClassificationConflict { side: Side::Lower });
                }
                plus.push(floor(l.x(b) + 0.5 * l.dx, summary.bhat_plus));
                minus.push(floor(-(l.x(a) - 0.5 * l.dx), summary.bhat_minus));
            }
            None => {
                plus.push(floor(summary.a_plus, summary.bhat_plus));
                minus.push(floor(summary.a_minus, summary.bhat_minus));
            }
        }
    }

    let finish = |raw: Vec<f64>, bhat: Extended, side: Side| -> Result<(Vec<Extended>, f64)> {
        if bhat.is_infinite() {
            return Ok((vec![Extended::Infinite; n + 1], 0.0));
        }
        let violation = raw_violation(&raw);
        if violation > l.dx * (1.0 + 1e-9) {
            return Err(Error::MonotonicityViolation { side, violation, dx: l.dx });
        }
        let mut out: Vec<Extended> = isotonic_non_increasing(&raw).into_iter().map(Extended::Finite).collect();
        out.push(bhat);
        Ok((out, violation))
    };
    let (b_plus, vp) = finish(plus, summary.bhat_plus, Side::Upper)?;
    let (b_minus, vm) = finish(minus, summary.bhat_minus, Side::Lower)?;
    Ok(BoundarySet {
        dt: l.dt,
        dx: l.dx,
        horizon: l.horizon,
        b_plus,
        b_minus,
        raw_violation_plus: vp,
        raw_violation_minus: vm,
    })
}

/// `max_{j > k} (b_j - b_k)` over the sequence, zero for non-increasing input.
pub fn raw_violation(b: &[f64]) -> f64 {
    let mut suffix_max = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in b.iter().rev() {
        worst = worst.max(suffix_max - v);
        suffix_max = suffix_max.max(v);
    }
    worst
}

/// Least-squares projection onto non-increasing sequences (pool adjacent
/// violators).
pub fn isotonic_non_increasing(b: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count); merge while a later block exceeds an earlier one.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(b.len());
    for &v in b {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s2 / c2 as f64 > s1 / c1 as f64 {
                blocks.pop();
                blocks.pop();
                blocks.push((s1 + s2, c1 + c2));
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(b.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat_n(s / c as f64, c));
    }
    // Guard against rounding in the block means.
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] = out[k].max(out[k + 1]);
    }
    out
}

/// Increasing barrier `s_+(t)`, `s_-(t)` on knots `t_j = j * dt`,
/// left-continuous: `s(t) = s_j` for `t` in `(t_{j-1}, t_j]`.
///
/// Knot 0 carries `bhat` as a label; everything that looks at `t > 0`
/// (membership, the inverse, absorption) reads knots `j >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversedBarrier {
    pub dt: f64,
    pub s_plus: Vec<Extended>,
    pub s_minus: Vec<Extended>,
}

impl ReversedBarrier {
    pub fn new(dt: f64, s_plus: Vec<Extended>, s_minus: Vec<Extended>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidBarrier("knot spacing must be positive".into()));
        }
        if s_plus.len() != s_minus.len() || s_plus.len() < 2 {
            return Err(Error::InvalidBarrier("need matching knot sequences of length >= 2".into()));
        }
        for (name, s) in [("s_+", &s_plus), ("s_-", &s_minus)] {
            if let Some(j) = (1..s.len() - 1).find(|&j| s[j + 1] < s[j]) {
                return Err(Error::InvalidBarrier(format!("{name} decreases after knot {j}")));
            }
            if s.iter().any(|v| v.finite().is_some_and(|x| !x.is_finite())) {
                return Err(Error::InvalidBarrier(format!("{name} has a non-finite level")));
            }
        }
        if let Some(j) = (1..s_plus.len()).find(|&j| s_plus[j].is_infinite() && s_minus[j].is_infinite()) {
            return Err(Error::InvalidBarrier(format!(
                "both barrier sides are infinite at t = {}",
                j as f64 * dt
            )));
        }
        Ok(ReversedBarrier { dt, s_plus, s_minus })
    }

    /// Flat barrier on `knots` intervals of width `dt`.
    pub fn constant(plus: Extended, minus: Extended, dt: f64, knots: usize) -> Result<Self> {
        Self::new(dt, vec![plus; knots + 1], vec![minus; knots + 1])
    }

    pub fn knots(&self) -> usize {
        self.s_plus.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.knots() as f64 * self.dt
    }

    pub fn knot_time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// Knot governing time `t > 0`; flat beyond the last knot.
    pub fn knot_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let j = (t / self.dt - 1e-9).ceil().max(1.0) as usize;
        j.min(self.knots())
    }

    /// Last knot of the initial run in which some side rises at every knot.
    ///
    /// The lattice front spreads one node per step from `bhat`, so right
    /// after time 0 the barrier rises at lattice speed and sits below the
    /// true levels until the front slows down. Returns 1 when the barrier
    /// starts flat.
    pub fn onset_knots(&self) -> usize {
        let rises = |s: &[Extended], j: usize| matches!((s[j].finite(), s[j + 1].finite()), (Some(a), Some(b)) if b > a);
        let mut j = 1;
        while j < self.knots() && (rises(&self.s_plus, j) || rises(&self.s_minus, j)) {
            j += 1;
        }
        j
    }

    pub fn upper(&self, t: f64) -> Extended {
        self.s_plus[self.knot_index(t)]
    }

    pub fn lower(&self, t: f64) -> Extended {
        self.s_minus[self.knot_index(t)]
    }

    pub fn side(&self, side: Side) -> &[Extended] {
        match side {
            Side::Upper => &self.s_plus,
            Side::Lower => &self.s_minus,
        }
    }

    /// `x` in `(-s_-(t), s_+(t))`; at `t <= 0` the levels at `0+` apply.
    pub fn contains(&self, t: f64, x: f64) -> bool {
        let j = self.knot_index(t).max(1);
        self.s_plus[j].exceeds(x) && self.s_minus[j].exceeds(-x)
    }

    /// The boundary set this barrier was reversed from.
    pub fn re_reverse(&self) -> (Vec<Extended>, Vec<Extended>) {
        let mut p = self.s_plus.clone();
        let mut m = self.s_minus.clone();
        p.reverse();
        m.reverse();
        (p, m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# reversed barrier, left-continuous on knots; t in time units, s in space units; dt={} knots={}",
            self.dt,
            self.s_plus.len()
        );
        out.push_str("t,s_plus,s_minus\n");
        for j in 0..self.s_plus.len() {
            let _ = writeln!(
                out,
                "{:.12},{},{}",
                self.knot_time(j),
                self.s_plus[j].to_cell(12),
                self.s_minus[j].to_cell(12)
            );
        }
        out
    }
}

/// `s_+(t) = b_+(T - t)` on the knot grid, so `s(0) = bhat`.
pub fn reverse(b: &BoundarySet) -> Result<ReversedBarrier> {
    let mut p = b.b_plus.clone();
    let mut m = b.b_minus.clone();
    p.reverse();
    m.reverse();
    ReversedBarrier::new(b.dt, p, m)
}

/// `phi(x) = inf {t > 0 : x in (-s_-(t), s_+(t))}` evaluated on knots, and
/// `T_*(x) = T - phi(x)`.
#[derive(Clone, Debug)]
pub struct InverseBarrier {
    barrier: ReversedBarrier,
}

pub fn generalized_inverse(r: &ReversedBarrier) -> InverseBarrier {
    InverseBarrier { barrier: r.clone() }
}

impl InverseBarrier {
    /// First time the level on one side exceeds `level`: `t_{j-1}` for the
    /// first knot `j >= 1` with `s_j > level`, zero when knot 1 already does.
    fn first_exceed(s: &[Extended], level: f64, dt: f64) -> Extended {
        let tail = &s[1..];
        let idx = tail.partition_point(|v| !v.exceeds(level));
        if idx == tail.len() {
            Extended::Infinite
        } else {
            Extended::Finite(idx as f64 * dt)
        }
    }

    pub fn phi(&self, x: f64) -> Extended {
        let r = &self.barrier;
        let up = Self::first_exceed(&r.s_plus, x, r.dt);
        let down = Self::first_exceed(&r.s_minus, -x, r.dt);
        up.max(down)
    }

    /// `T - phi(x)` on `[-s_-(T), s_+(T)]` for the barrier's own horizon;
    /// `None` outside or where `phi` is infinite.
    pub fn t_star(&self, x: f64) -> Option<f64> {
        let r = &self.barrier;
        let last = r.knots();
        if !(Extended::Finite(x) <= r.s_plus[last] && Extended::Finite(-x) <= r.s_minus[last]) {
            return None;
        }
        self.phi(x).finite().map(|p| r.horizon() - p)
    }

    /// CSV of `phi` on `n` equally spaced points of `[lo, hi]`.
    pub fn to_csv(&self, lo: f64, hi: f64, n: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# generalized inverse phi(x); x in space units, phi in time units; lo={lo} hi={hi} points={n}");
        out.push_str("x,phi\n");
        let n = n.max(2);
        for k in 0..n {
            let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let _ = writeln!(out, "{x:.12},{}", self.phi(x).to_cell(12));
        }
        out
    }
}

/// Stretch of knots on which one side stays within a level tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flat {
    pub side: Side,
    /// Signed location: `s_+` on the upper side, `-s_-` on the lower.
    pub location: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Flat {
    pub fn width(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Greedy maximal runs of finite knots `j >= 1` whose spread is at most
/// `level_tol` and whose time span `(t_{j0-1}, t_{j1}]` is at least
/// `min_width`.
pub fn detect_flats(r: &ReversedBarrier, level_tol: f64, min_width: f64) -> Vec<Flat> {
    let mut flats = Vec::new();
    for side in [Side::Upper, Side::Lower] {
        let s = r.side(side);
        let sign = if side == Side::Upper { 1.0 } else { -1.0 };
        let mut j = 1;
        while j < s.len() {
            let Some(start) = s[j].finite() else {
                j += 1;
                continue;
            };
            let mut end = j;
            while end + 1 < s.len() && s[end + 1].finite().is_some_and(|v| v - start <= level_tol) {
                end += 1;
            }
            let t_start = r.knot_time(j - 1);
            let t_end = r.knot_time(end);
            if t_end - t_start >= min_width - 1e-12 {
                let top = s[end].finite().unwrap();
                flats.push(Flat {
                    side,
                    location: sign * 0.5 * (start + top),
                    t_start,
                    t_end,
                });
            }
            j = end + 1;
        }
    }
    flats
}

/// Rise of one side across a run of consecutive increasing knots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub side: Side,
    pub t: f64,
    /// Level before the rise (`s(t)`) and after it (`s(t+)`).
    pub from: f64,
    pub to: f64,
}

impl Jump {
    /// The jumped-over open interval in signed coordinates.
    pub fn interval(&self) -> (f64, f64) {
        match self.side {
            Side::Upper => (self.from, self.to),
            Side::Lower => (-self.to, -self.from),
        }
    }

    pub fn size(&self) -> f64 {
        self.to - self.from
    }
}

/// Jumps of size above `jump_tol`.
///
/// The lattice front moves at most one node per step, so a jump shows up
/// as a ramp of rises of one node each, separated by a few knots without
/// change where the excess is still tiny. Rises at most `ramp_gap` knots
/// apart are merged into one ramp. A ramp that starts within `ramp_gap`
/// knots of time 0 is the onset out of `s(0) = bhat`, which is continuous
/// but steeper than the lattice can resolve, and is not reported.
pub fn detect_jumps(r: &ReversedBarrier, jump_tol: f64, ramp_gap: usize) -> Vec<Jump> {
    let mut jumps = Vec::new();
    for side in [Side::Upper, Side::Lower] {
        let s = r.side(side);
        let rises: Vec<usize> = (1..s.len().saturating_sub(1))
            .filter(|&k| matches!((s[k].finite(), s[k + 1].finite()), (Some(a), Some(b)) if b > a))
            .collect();
        let mut i = 0;
        while i < rises.len() {
            let first = rises[i];
            let mut last = first;
            while i + 1 < rises.len() && rises[i + 1] - last <= ramp_gap && s[last + 1..=rises[i + 1]].iter().all(|v| v.is_finite()) {
                i += 1;
                last = rises[i];
            }
            i += 1;
            if first - 1 <= ramp_gap {
                continue;
            }
            let from = s[first].finite().unwrap();
            let to = s[last + 1].finite().unwrap();
            if to - from > jump_tol {
                jumps.push(Jump { side, t: r.knot_time(first), from, to });
            }
        }
    }
    jumps
}

/// Detector output with the measure cross-checks attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub flats: Vec<FlatCheck>,
    pub jumps: Vec<JumpCheck>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatCheck {
    pub flat: Flat,
    /// Target mass within the tolerance window around the flat's level.
    pub mu_mass_near: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpCheck {
    pub jump: Jump,
    /// Target mass of the jumped-over open interval, shrunk by `tol` at
    /// both ends.
    pub mu_mass_inside: f64,
}

pub fn cross_check(mu: &ProbabilityMeasure, flats: &[Flat], jumps: &[Jump], tol: f64) -> DetectorReport {
    DetectorReport {
        flats: flats
            .iter()
            .map(|&flat| FlatCheck {
                flat,
                mu_mass_near: mu.mass_closed(flat.location - tol, flat.location + tol),
            })
            .collect(),
        jumps: jumps
            .iter()
            .map(|&jump| {
                let (lo, hi) = jump.interval();
                JumpCheck { jump, mu_mass_inside: mu.mass_open(lo + tol, hi - tol) }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(v: &[f64]) -> Vec<Extended> {
        v.iter().map(|&x| Extended::Finite(x)).collect()
    }

    #[test]
    fn pava_projects() {
        let b = [3.0, 1.0, 2.0, 0.5];
        let p = isotonic_non_increasing(&b);
        assert_eq!(p, vec![3.0, 1.5, 1.5, 0.5]);
        assert_eq!(raw_violation(&b), 1.0);
        assert_eq!(raw_violation(&[3.0, 2.0, 1.0]), 0.0);
    }

    #[test]
    fn round_trip_is_exact() {
        let r = ReversedBarrier::new(0.1, fin(&[1.0, 0.9, 1.0, 1.2]), vec![Extended::Infinite; 4]).unwrap();
        let (p, m) = r.re_reverse();
        let b = BoundarySet {
            dt: 0.1,
            dx: 0.01,
            horizon: 0.3,
            b_plus: p,
            b_minus: m,
            raw_violation_plus: 0.0,
            raw_violation_minus: 0.0,
        };
        assert_eq!(reverse(&b).unwrap(), r);
    }

    #[test]
    fn rejects_doubly_infinite() {
        let r = ReversedBarrier::new(0.1, vec![Extended::Infinite; 3], vec![Extended::Infinite; 3]);
        assert!(r.is_err());
        let r = ReversedBarrier::new(0.1, fin(&[1.0, 2.0, 1.5]), fin(&[1.0; 3]));
        assert!(r.is_err());
    }

    #[test]
    fn inverse_examples() {
        let r = ReversedBarrier::constant(Extended::Finite(1.0), Extended::Finite(1.0), 0.01, 100).unwrap();
        let inv = generalized_inverse(&r);
        assert_eq!(inv.phi(0.3), Extended::Finite(0.0));
        assert_eq!(inv.phi(1.5), Extended::Infinite);
        assert_eq!(inv.phi(-1.0), Extended::Infinite);

        let r = ReversedBarrier::new(0.5, fin(&[0.0, 0.5, 1.0, 1.5]), fin(&[0.0, 0.5, 1.0, 1.5])).unwrap();
        let inv = generalized_inverse(&r);
        assert_eq!(inv.phi(0.7), Extended::Finite(0.5));
        assert_eq!(inv.phi(1.0), Extended::Finite(1.0));
        assert_eq!(inv.t_star(0.7), Some(1.0));
        assert!(r.contains(0.75, 0.7) && !r.contains(0.5, 0.7));
    }

    #[test]
    fn flat_and_jump() {
        let mut s = vec![0.7];
        s.extend(std::iter::repeat_n(0.7, 50));
        s.extend((1..=80).flat_map(|k| [0.7 + k as f64 * 0.01; 3]));
        s.extend(std::iter::repeat_n(1.5, 50));
        let r = ReversedBarrier::new(0.01, fin(&s), fin(&vec![1.0; s.len()])).unwrap();
        let flats = detect_flats(&r, 0.015, 0.1);
        assert!(flats.iter().any(|f| f.side == Side::Upper && (f.location - 0.7).abs() < 0.01));
        let jumps = detect_jumps(&r, 0.05, 4);
        assert_eq!(jumps.len(), 1);
        assert!(detect_jumps(&r, 0.05, 2).is_empty());
        assert!((jumps[0].from - 0.7).abs() < 1e-12 && (jumps[0].to - 1.5).abs() < 1e-9);
    }
}
