//! Brute-force stopping values on tiny symmetric random-walk trees.
//!
//! Every `f64` is a dyadic rational, and the walk only halves and adds, so
//! all values here are computed exactly.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::payoff::PayoffCurve;
use crate::solver::{solve_obstacle, Lattice, Parallelism, SolveOptions};

pub const MAX_DEPTH: usize = 4;

/// Exact value `numerator * 2^exponent`.
#[derive(Clone, Debug)]
pub struct Dyadic {
    numerator: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { numerator: BigInt::zero(), exponent: 0 }
    }

    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "dyadic conversion of a non-finite value");
        if v == 0.0 {
            return Self::zero();
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if exp_bits == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_bits - 1075)
        };
        Dyadic { numerator: BigInt::from(mantissa) * sign, exponent }.normalized()
    }

    fn normalized(mut self) -> Self {
        if self.numerator.is_zero() {
            return Self::zero();
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.numerator >>= tz as usize;
            self.exponent += tz as i64;
        }
        self
    }

    /// Numerator over `2^exponent` for an exponent not above our own.
    fn scaled_to(&self, exponent: i64) -> BigInt {
        debug_assert!(exponent <= self.exponent || self.numerator.is_zero());
        if self.numerator.is_zero() {
            return BigInt::zero();
        }
        &self.numerator << (self.exponent - exponent) as usize
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        if self.numerator.is_zero() {
            return other.clone();
        }
        if other.numerator.is_zero() {
            return self.clone();
        }
        let e = self.exponent.min(other.exponent);
        Dyadic { numerator: self.scaled_to(e) + other.scaled_to(e), exponent: e }.normalized()
    }

    pub fn half(&self) -> Dyadic {
        if self.numerator.is_zero() {
            return Self::zero();
        }
        Dyadic { numerator: self.numerator.clone(), exponent: self.exponent - 1 }
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.numerator.is_zero() {
            return 0.0;
        }
        let bits = self.numerator.bits() as i64;
        // Keep 64 significant bits before the final rounding.
        let shift = (bits - 64).max(0);
        let top = (&self.numerator >> shift as usize).to_f64().unwrap_or(f64::NAN);
        ldexp(top, self.exponent + shift)
    }
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Dyadic {}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.min(other.exponent);
        self.scaled_to(e).cmp(&other.scaled_to(e))
    }
}

/// Symmetric `+-dx` walk from `x0` over `depth` steps of `dt = dx^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TinyTree {
    pub depth: usize,
    pub dx: f64,
    pub x0: f64,
}

impl TinyTree {
    pub fn new(depth: usize, dx: f64, x0: f64) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthExceeded { depth, max: MAX_DEPTH });
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidConfig("tree spacing must be positive".into()));
        }
        Ok(TinyTree { depth, dx, x0 })
    }

    pub fn dt(&self) -> f64 {
        self.dx * self.dx
    }

    /// Nodes of the recombining lattice, `(depth + 1)(depth + 2) / 2`.
    pub fn node_count(&self) -> usize {
        (self.depth + 1) * (self.depth + 2) / 2
    }

    /// `x0 + j * dx` for `j = -depth..=depth`, same formula as the lattice.
    fn level(&self, j: i64) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    /// Obstacle at levels `-depth..=depth`, exactly.
    fn obstacle(&self, p: &PayoffCurve) -> Vec<Dyadic> {
        let d = self.depth as i64;
        (-d..=d).map(|j| Dyadic::from_f64(p.eval(self.level(j)))).collect()
    }
}

/// Maximum over every adapted stop/continue rule on the non-recombining
/// tree of the expected obstacle value.
pub fn oracle_enumerate(p: &PayoffCurve, tree: &TinyTree) -> Result<Dyadic> {
    if tree.depth > MAX_DEPTH {
        return Err(Error::DepthExceeded { depth: tree.depth, max: MAX_DEPTH });
    }
    let g = tree.obstacle(p);
    let d = tree.depth;
    if d == 0 {
        return Ok(g[0].clone());
    }
    // Common denominator 2^(e_min - d): a leaf at depth m carries weight
    // 2^(d - m) in numerator units.
    let e_min = g.iter().filter(|v| !v.numerator.is_zero()).map(|v| v.exponent).min().unwrap_or(0);
    let base: Vec<BigInt> = g.iter().map(|v| v.scaled_to(e_min)).collect();
    let denominator_exp = e_min - d as i64;

    let small: Option<Vec<i128>> = if base.iter().all(|b| b.abs().bits() < 100) {
        Some(base.iter().map(|b| b.to_i128().unwrap()).collect())
    } else {
        None
    };

    // Decision nodes in heap order: node n has children 2n+1, 2n+2; the
    // root is 0 and nodes up to 2^d - 2 sit above the leaves.
    let decisions = (1usize << d) - 1;
    let rules = 1u64 << decisions;
    let best = match small {
        Some(vals) => {
            let mut best = i128::MIN;
            for rule in 0..rules {
                best = best.max(rule_value_i128(&vals, rule, d));
            }
            BigInt::from(best)
        }
        None => {
            let mut best: Option<BigInt> = None;
            for rule in 0..rules {
                let v = rule_value_big(&base, rule, d);
                if best.as_ref().is_none_or(|b| v > *b) {
                    best = Some(v);
                }
            }
            best.unwrap()
        }
    };
    Ok(Dyadic { numerator: best, exponent: denominator_exp }.normalized())
}

// Walk the tree depth-first; `level` is the offset index into the obstacle.
fn rule_value_i128(g: &[i128], rule: u64, d: usize) -> i128 {
    fn go(g: &[i128], rule: u64, d: usize, node: usize, depth: usize, pos: i64) -> i128 {
        let idx = (pos + d as i64) as usize;
        if depth == d || rule >> node & 1 == 1 {
            return g[idx] << (d - depth);
        }
        go(g, rule, d, 2 * node + 1, depth + 1, pos - 1) + go(g, rule, d, 2 * node + 2, depth + 1, pos + 1)
    }
    go(g, rule, d, 0, 0, 0)
}

fn rule_value_big(g: &[BigInt], rule: u64, d: usize) -> BigInt {
    fn go(g: &[BigInt], rule: u64, d: usize, node: usize, depth: usize, pos: i64) -> BigInt {
        let idx = (pos + d as i64) as usize;
        if depth == d || rule >> node & 1 == 1 {
            return &g[idx] << (d - depth);
        }
        go(g, rule, d, 2 * node + 1, depth + 1, pos - 1) + go(g, rule, d, 2 * node + 2, depth + 1, pos + 1)
    }
    go(g, rule, d, 0, 0, 0)
}

/// Snell envelope on the recombining tree in exact arithmetic.
pub fn backward_induction_exact(p: &PayoffCurve, tree: &TinyTree) -> Dyadic {
    let g = tree.obstacle(p);
    let d = tree.depth;
    let mut v = g.clone();
    for _ in 0..d {
        let mut next = v.clone();
        for j in 1..2 * d {
            next[j] = g[j].clone().max(v[j - 1].add(&v[j + 1]).half());
        }
        v = next;
    }
    v[d].clone()
}

/// The floating-point solver run on a lattice that reproduces the tree:
/// centred at `x0`, `dt = dx^2`, edges beyond the walk's reach.
pub fn solver_on_tree(p: &PayoffCurve, tree: &TinyTree) -> Result<f64> {
    if tree.depth == 0 {
        return Ok(p.eval(tree.x0));
    }
    let side = tree.depth + 1;
    let horizon = tree.depth as f64 * tree.dt();
    let lattice = Lattice::new(tree.x0, tree.dx, side, side, horizon, 0.5)?.with_edges(true, true);
    if lattice.steps != tree.depth {
        return Err(Error::GridMismatch(format!(
            "lattice took {} steps for a depth-{} tree",
            lattice.steps, tree.depth
        )));
    }
    let g = (0..lattice.n_nodes).map(|i| p.eval(lattice.x(i))).collect();
    let opts = SolveOptions { eps_stop: Some(0.0), store_stride: Some(1), parallelism: Parallelism::Sequential, ..Default::default() };
    let s = solve_obstacle(g, &lattice, &opts)?;
    Ok(s.v(0, lattice.origin).unwrap())
}
