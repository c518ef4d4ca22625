//! Explicit monotone backward induction for
//! `V(t, x) = sup_{tau <= T - t} E_x G(B_tau)`.
//!
//! Each step applies
//! `V[k][i] = max(G_i, lam * (V[k+1][i-1] + V[k+1][i+1]) + (1 - 2 lam) * V[k+1][i])`
//! with edge nodes clamped to `G`. Only nodes that can differ from `G` are
//! updated: a node leaves the obstacle only if a neighbour already has, or if
//! the stencil applied to `G` itself exceeds `G` there. The result is
//! bitwise identical to a full sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::measures::SupportSummary;
use crate::payoff::PayoffCurve;

/// Uniform space-time grid. Node `i` sits at `center + (i - origin) * dx`,
/// so any point on the `dx` grid through `center` is a node exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub center: f64,
    pub dx: f64,
    pub origin: usize,
    pub n_nodes: usize,
    pub horizon: f64,
    pub steps: usize,
    pub dt: f64,
    pub lambda: f64,
    /// The boundary on this side is classified infinite, so the
    /// continuation region may reach the edge.
    pub lower_unbounded: bool,
    pub upper_unbounded: bool,
}

impl Lattice {
    /// `nodes_below` and `nodes_above` count nodes on each side of `center`.
    /// `dt` is the largest step not above `2 * lambda * dx^2` that divides
    /// the horizon.
    pub fn new(
        center: f64,
        dx: f64,
        nodes_below: usize,
        nodes_above: usize,
        horizon: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidConfig(format!("dx = {dx} must be positive")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon = {horizon} must be positive")));
        }
        if !(lambda > 0.0 && lambda <= 0.5) {
            return Err(Error::InvalidConfig(format!("lambda = {lambda} must lie in (0, 1/2]")));
        }
        if nodes_below < 2 || nodes_above < 2 {
            return Err(Error::InvalidConfig("lattice needs at least two nodes per side".into()));
        }
        let steps = ((horizon / (2.0 * lambda * dx * dx)) - 1e-9).ceil().max(1.0) as usize;
        let dt = horizon / steps as f64;
        let mut lambda_eff = (dt / (2.0 * dx * dx)).min(lambda);
        if lambda - lambda_eff <= 1e-12 * lambda {
            lambda_eff = lambda;
        }
        Ok(Lattice {
            center,
            dx,
            origin: nodes_below,
            n_nodes: nodes_below + nodes_above + 1,
            horizon,
            steps,
            dt,
            lambda: lambda_eff,
            lower_unbounded: false,
            upper_unbounded: false,
        })
    }

    /// Grid covering the supports of both measures widened by
    /// `margin * sqrt(T)`, centred at 0, with edge permissions taken from
    /// the support classification.
    pub fn for_problem(
        summary: &SupportSummary,
        horizon: f64,
        dx: f64,
        lambda: f64,
        margin: f64,
    ) -> Result<Self> {
        let mu_lo = summary.mu_minus.finite().map_or(0.0, |m| -m);
        let mu_hi = summary.mu_plus.finite().unwrap_or(0.0);
        let lo = (-summary.a_minus).min(mu_lo).min(0.0) - margin * horizon.sqrt();
        let hi = summary.a_plus.max(mu_hi).max(0.0) + margin * horizon.sqrt();
        let below = ((-lo / dx).ceil() as usize).max(2);
        let above = ((hi / dx).ceil() as usize).max(2);
        let mut l = Self::new(0.0, dx, below, above, horizon, lambda)?;
        l.lower_unbounded = summary.bhat_minus.is_infinite();
        l.upper_unbounded = summary.bhat_plus.is_infinite();
        Ok(l)
    }

    /// Same nodes and time step, different horizon. The new horizon must be
    /// a whole number of steps.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let steps = (horizon / self.dt).round();
        if steps < 1.0 || (steps * self.dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "horizon {horizon} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(Lattice {
            horizon,
            steps: steps as usize,
            ..self.clone()
        })
    }

    pub fn with_edges(mut self, lower_unbounded: bool, upper_unbounded: bool) -> Self {
        self.lower_unbounded = lower_unbounded;
        self.upper_unbounded = upper_unbounded;
        self
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center + (i as i64 - self.origin as i64) as f64 * self.dx
    }

    pub fn x_lo(&self) -> f64 {
        self.x(0)
    }

    pub fn x_hi(&self) -> f64 {
        self.x(self.n_nodes - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Node nearest to `x`, clamped to the grid.
    pub fn nearest_node(&self, x: f64) -> usize {
        let k = ((x - self.center) / self.dx).round() as i64 + self.origin as i64;
        k.clamp(0, self.n_nodes as i64 - 1) as usize
    }

    /// Step index nearest to `t`, clamped to `[0, steps]`.
    pub fn nearest_step(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.steps)
    }

    pub fn same_nodes(&self, other: &Lattice) -> bool {
        self.center == other.center
            && self.dx == other.dx
            && self.origin == other.origin
            && self.n_nodes == other.n_nodes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    Sequential,
    /// Split a step into chunks of at least this many nodes.
    Chunked(usize),
}

impl Default for Parallelism {
    fn default() -> Self {
        Parallelism::Chunked(1 << 15)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Threshold on `U = V - G` for the continuation mask; defaults to
    /// `10 * f64::EPSILON * max |G|`.
    pub eps_stop: Option<f64>,
    /// Rows are stored every `stride` steps plus the terminal row. Defaults
    /// to the smallest even stride keeping at most `max_stored_rows` rows.
    pub store_stride: Option<usize>,
    pub max_stored_rows: usize,
    pub parallelism: Parallelism,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_stop: None,
            store_stride: None,
            max_stored_rows: 2049,
            parallelism: Parallelism::default(),
        }
    }
}

/// A stored time row. Values outside `[lo, lo + values.len())` equal `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredRow {
    pub step: usize,
    pub lo: usize,
    pub values: Vec<f64>,
}

/// Invariant monitors accumulated over every step of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// `min (V - G)`; never negative for a correct sweep.
    pub min_v_minus_g: f64,
    /// `max (V[k+1][i] - V[k][i])`; zero or negative by monotonicity in time.
    pub max_time_increase: f64,
    pub max_spatial_increment: f64,
    /// Amount by which a value exceeded both `G` and the largest stencil parent.
    pub max_principle_excess: f64,
    /// Stopping nodes strictly inside a row's continuation range.
    pub mask_holes: usize,
    pub max_window: usize,
}

#[derive(Clone, Debug)]
pub struct ValueSurface {
    pub lattice: Lattice,
    pub g: Vec<f64>,
    pub eps_stop: f64,
    pub stride: usize,
    rows: Vec<StoredRow>,
    /// Per step `k = 0..=N`, the first and last node with `U > eps_stop`.
    continuation: Vec<Option<(usize, usize)>>,
    pub diagnostics: SolveDiagnostics,
}

#[inline]
fn stencil(prev: &[f64], i: usize, lam: f64, mid: f64) -> f64 {
    lam * (prev[i - 1] + prev[i + 1]) + mid * prev[i]
}

/// Rows `lo..=hi` of the next step into `out[lo..=hi]`.
fn step_window(prev: &[f64], g: &[f64], out: &mut [f64], lo: usize, hi: usize, lam: f64, par: Parallelism) {
    let mid = 1.0 - 2.0 * lam;
    let width = hi + 1 - lo;
    let target = &mut out[lo..=hi];
    match par {
        Parallelism::Chunked(chunk) if width >= 2 * chunk.max(1) => {
            target
                .par_chunks_mut(chunk.max(1))
                .enumerate()
                .for_each(|(c, slice)| {
                    let base = lo + c * chunk.max(1);
                    for (j, v) in slice.iter_mut().enumerate() {
                        let i = base + j;
                        *v = g[i].max(stencil(prev, i, lam, mid));
                    }
                });
        }
        _ => {
            for (j, v) in target.iter_mut().enumerate() {
                let i = lo + j;
                *v = g[i].max(stencil(prev, i, lam, mid));
            }
        }
    }
}

pub fn solve(payoff: &PayoffCurve, lattice: &Lattice) -> Result<ValueSurface> {
    solve_with(payoff, lattice, &SolveOptions::default())
}

pub fn solve_with(payoff: &PayoffCurve, lattice: &Lattice, opts: &SolveOptions) -> Result<ValueSurface> {
    let g: Vec<f64> = (0..lattice.n_nodes).map(|i| payoff.eval(lattice.x(i))).collect();
    solve_obstacle(g, lattice, opts)
}

/// Backward induction for an arbitrary obstacle sampled on the nodes.
pub fn solve_obstacle(g: Vec<f64>, lattice: &Lattice, opts: &SolveOptions) -> Result<ValueSurface> {
    let n = lattice.n_nodes;
    if g.len() != n {
        return Err(Error::GridMismatch(format!("obstacle has {} values for {n} nodes", g.len())));
    }
    let steps = lattice.steps;
    let lam = lattice.lambda;
    let mid = 1.0 - 2.0 * lam;
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = opts.eps_stop.unwrap_or(10.0 * f64::EPSILON * gmax);

    let stride = match opts.store_stride {
        Some(s) if s >= 1 => s,
        _ => {
            let rows = opts.max_stored_rows.max(2);
            let s = steps.div_ceil(rows - 1).max(1);
            if s > 1 && s % 2 == 1 {
                s + 1
            } else {
                s
            }
        }
    };

    // Nodes where the stencil applied to G itself lifts above G.
    let mut static_lo = usize::MAX;
    let mut static_hi = 0usize;
    for i in 1..n - 1 {
        if stencil(&g, i, lam, mid) > g[i] {
            static_lo = static_lo.min(i);
            static_hi = static_hi.max(i);
        }
    }
    let g_increment = g.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs()));

    let mut diag = SolveDiagnostics {
        min_v_minus_g: 0.0,
        max_time_increase: 0.0,
        max_spatial_increment: g_increment,
        max_principle_excess: 0.0,
        mask_holes: 0,
        max_window: 0,
    };
    let mut continuation = vec![None; steps + 1];
    let mut rows = Vec::with_capacity(steps / stride + 2);
    rows.push(StoredRow { step: steps, lo: 0, values: Vec::new() });

    let mut prev = g.clone();
    let mut cur = g.clone();
    // Ranges (inclusive) where each buffer may differ from G.
    let mut prev_dirty: Option<(usize, usize)> = None;
    let mut cur_dirty: Option<(usize, usize)> = None;

    for k in (0..steps).rev() {
        let window = {
            let mut w: Option<(usize, usize)> = prev_dirty.map(|(a, b)| (a.saturating_sub(1).max(1), (b + 1).min(n - 2)));
            if static_lo <= static_hi {
                w = Some(match w {
                    Some((a, b)) => (a.min(static_lo), b.max(static_hi)),
                    None => (static_lo, static_hi),
                });
            }
            w
        };

        // Reset stale entries of the buffer we are about to overwrite.
        if let Some((a, b)) = cur_dirty {
            for i in a..=b {
                if window.is_none_or(|(wa, wb)| i < wa || i > wb) {
                    cur[i] = g[i];
                }
            }
        }

        let mut range: Option<(usize, usize)> = None;
        let mut dirty: Option<(usize, usize)> = None;
        if let Some((wa, wb)) = window {
            step_window(&prev, &g, &mut cur, wa, wb, lam, opts.parallelism);
            diag.max_window = diag.max_window.max(wb + 1 - wa);
            for i in wa..=wb {
                let v = cur[i];
                let u = v - g[i];
                if u != 0.0 {
                    dirty = Some(dirty.map_or((i, i), |(a, _)| (a, i)));
                }
                if u > eps {
                    range = Some(range.map_or((i, i), |(a, _)| (a, i)));
                }
                diag.min_v_minus_g = diag.min_v_minus_g.min(u);
                diag.max_time_increase = diag.max_time_increase.max(prev[i] - v);
                let parent = prev[i - 1].max(prev[i]).max(prev[i + 1]).max(g[i]);
                diag.max_principle_excess = diag.max_principle_excess.max(v - parent);
            }
            for i in wa.saturating_sub(1)..=wb.min(n - 2) {
                diag.max_spatial_increment = diag.max_spatial_increment.max((cur[i + 1] - cur[i]).abs());
            }
            if let Some((a, b)) = range {
                diag.mask_holes += (a..=b).filter(|&i| cur[i] - g[i] <= eps).count();
            }
        }

        if let Some((a, b)) = range {
            let t = lattice.time(k);
            if a <= 1 && !lattice.lower_unbounded {
                return Err(Error::DomainTooNarrow { side: Side::Lower, t });
            }
            if b >= n - 2 && !lattice.upper_unbounded {
                return Err(Error::DomainTooNarrow { side: Side::Upper, t });
            }
        }
        continuation[k] = range;

        if k % stride == 0 {
            let row = match dirty {
                Some((a, b)) => StoredRow { step: k, lo: a, values: cur[a..=b].to_vec() },
                None => StoredRow { step: k, lo: 0, values: Vec::new() },
            };
            rows.push(row);
        }

        cur_dirty = dirty;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_dirty, &mut cur_dirty);
    }

    rows.reverse();
    Ok(ValueSurface {
        lattice: lattice.clone(),
        g,
        eps_stop: eps,
        stride,
        rows,
        continuation,
        diagnostics: diag,
    })
}

impl ValueSurface {
    pub fn steps(&self) -> usize {
        self.lattice.steps
    }

    pub fn stored_rows(&self) -> &[StoredRow] {
        &self.rows
    }

    pub fn stored_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|r| r.step)
    }

    pub fn row(&self, k: usize) -> Option<&StoredRow> {
        self.rows
            .binary_search_by_key(&k, |r| r.step)
            .ok()
            .map(|j| &self.rows[j])
    }

    pub fn is_stored(&self, k: usize) -> bool {
        self.row(k).is_some()
    }

    pub fn v(&self, k: usize, i: usize) -> Option<f64> {
        let r = self.row(k)?;
        Some(if i >= r.lo && i < r.lo + r.values.len() {
            r.values[i - r.lo]
        } else {
            self.g[i]
        })
    }

    pub fn u(&self, k: usize, i: usize) -> Option<f64> {
        self.v(k, i).map(|v| v - self.g[i])
    }

    /// Dense `V` on a stored row.
    pub fn v_row(&self, k: usize) -> Option<Vec<f64>> {
        let r = self.row(k)?;
        let mut out = self.g.clone();
        out[r.lo..r.lo + r.values.len()].copy_from_slice(&r.values);
        Some(out)
    }

    pub fn continuation_range(&self, k: usize) -> Option<(usize, usize)> {
        self.continuation.get(k).copied().flatten()
    }

    pub fn continuation_ranges(&self) -> &[Option<(usize, usize)>] {
        &self.continuation
    }

    /// Mask `U > eps_stop` on a stored row.
    pub fn is_continuation(&self, k: usize, i: usize) -> Option<bool> {
        self.u(k, i).map(|u| u > self.eps_stop)
    }

    /// Stored step nearest to `t`.
    pub fn nearest_stored_step(&self, t: f64) -> usize {
        let target = t / self.lattice.dt;
        self.rows
            .iter()
            .map(|r| r.step)
            .min_by(|a, b| {
                (*a as f64 - target)
                    .abs()
                    .total_cmp(&(*b as f64 - target).abs())
            })
            .unwrap_or(0)
    }

    /// Interpolated `V(t, x)` from the nearest stored row, linear in `x`.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        let k = self.nearest_stored_step(t);
        let l = &self.lattice;
        let pos = (x - l.x_lo()) / l.dx;
        let i = (pos.floor().max(0.0) as usize).min(l.n_nodes - 2);
        let w = (pos - i as f64).clamp(0.0, 1.0);
        let a = self.v(k, i).unwrap();
        let b = self.v(k, i + 1).unwrap();
        a + w * (b - a)
    }

    /// `-U_t = -V_t` at `(t, x)` by central differences over the rows one
    /// stride either side of the nearest interior stored row.
    pub fn minus_ut(&self, t: f64, x: f64) -> Option<f64> {
        let s = self.stride;
        let k = self.nearest_stored_step(t);
        if k < s || k + s > self.steps() {
            return None;
        }
        let i = self.lattice.nearest_node(x);
        let before = self.v(k - s, i)?;
        let after = self.v(k + s, i)?;
        Some((before - after) / (2.0 * s as f64 * self.lattice.dt))
    }

    /// CSV with one column per requested time (nearest stored rows) of `V`
    /// or, with `excess`, of `U = V - G`.
    pub fn slices_csv(&self, times: &[f64], excess: bool) -> String {
        let l = &self.lattice;
        let ks: Vec<usize> = times.iter().map(|&t| self.nearest_stored_step(t)).collect();
        let mut out = String::new();
        let what = if excess { "U = V - G" } else { "V" };
        let _ = writeln!(
            out,
            "# {what}; x in space units, columns at times t; dx={} dt={} nodes={} x_lo={}",
            l.dx,
            l.dt,
            l.n_nodes,
            l.x_lo()
        );
        out.push('x');
        for &k in &ks {
            let _ = write!(out, ",t={}", l.time(k));
        }
        out.push('\n');
        let dense: Vec<Vec<f64>> = ks.iter().map(|&k| self.v_row(k).unwrap()).collect();
        for i in 0..l.n_nodes {
            let _ = write!(out, "{:.12}", l.x(i));
            for row in &dense {
                let v = if excess { row[i] - self.g[i] } else { row[i] };
                let _ = write!(out, ",{v:.15e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn metadata(&self) -> SolveMetadata {
        SolveMetadata {
            lattice: self.lattice.clone(),
            x_lo: self.lattice.x_lo(),
            x_hi: self.lattice.x_hi(),
            eps_stop: self.eps_stop,
            stride: self.stride,
            stored_rows: self.rows.len(),
            diagnostics: self.diagnostics,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveMetadata {
    pub lattice: Lattice,
    pub x_lo: f64,
    pub x_hi: f64,
    pub eps_stop: f64,
    pub stride: usize,
    pub stored_rows: usize,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonConsistency {
    pub max_deviation: f64,
    pub rows_compared: usize,
    pub range_mismatches: usize,
}

/// Compares `V^{T2}(t + T2 - T1, .)` with `V^{T1}(t, .)` on every pair of
/// stored rows the two surfaces share, and the continuation ranges on every
/// step.
pub fn horizon_consistency_check(short: &ValueSurface, long: &ValueSurface) -> Result<HorizonConsistency> {
    let (a, b) = (&short.lattice, &long.lattice);
    if !a.same_nodes(b) {
        return Err(Error::GridMismatch("lattices do not share x-nodes".into()));
    }
    if a.dt != b.dt || a.lambda != b.lambda {
        return Err(Error::GridMismatch(format!("time steps differ: {} vs {}", a.dt, b.dt)));
    }
    if b.steps <= a.steps {
        return Err(Error::GridMismatch("second horizon must be longer".into()));
    }
    if short.eps_stop != long.eps_stop {
        return Err(Error::GridMismatch("surfaces use different stopping thresholds".into()));
    }
    let shift = b.steps - a.steps;
    let mut max_deviation = 0.0f64;
    let mut rows_compared = 0;
    for r in short.stored_rows() {
        let k2 = r.step + shift;
        if !long.is_stored(k2) {
            continue;
        }
        rows_compared += 1;
        let v1 = short.v_row(r.step).unwrap();
        let v2 = long.v_row(k2).unwrap();
        for (x, y) in v1.iter().zip(&v2) {
            max_deviation = max_deviation.max((x - y).abs());
        }
    }
    if rows_compared == 0 {
        return Err(Error::GridMismatch("no stored rows in common".into()));
    }
    let range_mismatches = (0..=a.steps)
        .filter(|&k| short.continuation_range(k) != long.continuation_range(k + shift))
        .count();
    Ok(HorizonConsistency {
        max_deviation,
        rows_compared,
        range_mismatches,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VtProbe {
    /// Largest `|V_t|` at the first and last continuation node of a row.
    pub max_boundary_vt: f64,
    /// Largest `|V_t + V_xx / 2|` at continuation nodes two or more nodes
    /// inside the boundary.
    pub max_interior_residual: f64,
    /// Largest `|V_t|` at stopping nodes away from the boundary.
    pub max_stopping_vt: f64,
    pub rows_used: usize,
}

/// Finite-difference `V_t` on stored rows with `t` in `[t_from, t_to]`.
/// Uses rows one stride apart, so `t_to` should stay a few strides below
/// the horizon where `V_t` blows up at atoms of the initial law.
pub fn vt_continuity_probe(s: &ValueSurface, t_from: f64, t_to: f64) -> VtProbe {
    let l = &s.lattice;
    let st = s.stride;
    let h = 2.0 * st as f64 * l.dt;
    let mut probe = VtProbe {
        max_boundary_vt: 0.0,
        max_interior_residual: 0.0,
        max_stopping_vt: 0.0,
        rows_used: 0,
    };
    for r in s.stored_rows() {
        let k = r.step;
        let t = l.time(k);
        if k < st || k + st > l.steps || t < t_from || t > t_to {
            continue;
        }
        let (Some(before), Some(now), Some(after)) = (s.v_row(k - st), s.v_row(k), s.v_row(k + st)) else {
            continue;
        };
        probe.rows_used += 1;
        let vt = |i: usize| (after[i] - before[i]) / h;
        let range = s.continuation_range(k);
        for i in 1..l.n_nodes - 1 {
            match range {
                Some((a, b)) if i == a || i == b => {
                    probe.max_boundary_vt = probe.max_boundary_vt.max(vt(i).abs());
                }
                Some((a, b)) if i >= a + 2 && i + 2 <= b => {
                    let vxx = (now[i + 1] - 2.0 * now[i] + now[i - 1]) / (l.dx * l.dx);
                    probe.max_interior_residual = probe.max_interior_residual.max((vt(i) + 0.5 * vxx).abs());
                }
                Some((a, b)) if i + 1 < a || i > b + 1 => {
                    probe.max_stopping_vt = probe.max_stopping_vt.max(vt(i).abs());
                }
                None => probe.max_stopping_vt = probe.max_stopping_vt.max(vt(i).abs()),
                _ => {}
            }
        }
    }
    probe
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{support_summary, ProbabilityMeasure};

    fn two_point_surface(horizon: f64, dx: f64) -> ValueSurface {
        let nu = ProbabilityMeasure::dirac(0.0).unwrap();
        let mu = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let p = PayoffCurve::new(&nu, &mu);
        let s = support_summary(&nu, &mu).unwrap();
        let l = Lattice::for_problem(&s, horizon, dx, 0.5, 5.0).unwrap();
        solve(&p, &l).unwrap()
    }

    #[test]
    fn terminal_row_is_obstacle() {
        let s = two_point_surface(1.0, 0.02);
        assert_eq!(s.v_row(s.steps()).unwrap(), s.g);
    }

    #[test]
    fn far_field_is_stopping() {
        let s = two_point_surface(1.0, 0.02);
        for r in s.stored_rows() {
            for i in 0..s.lattice.n_nodes {
                if s.lattice.x(i).abs() >= 1.0 {
                    assert_eq!(s.v(r.step, i).unwrap(), 1.0);
                }
            }
        }
    }

    #[test]
    fn lattice_step_respects_lambda() {
        let l = Lattice::new(0.0, 0.01, 10, 10, 2.0, 0.5).unwrap();
        assert_eq!(l.steps, 20000);
        assert!(l.lambda <= 0.5);
        assert_eq!(l.x(l.origin), 0.0);
        let l = Lattice::new(0.0, 0.01, 10, 10, 1.0, 0.3).unwrap();
        assert!(l.lambda <= 0.3 && l.lambda > 0.299);
    }

    #[test]
    fn parallel_sweep_is_bitwise_identical() {
        let nu = ProbabilityMeasure::dirac(0.0).unwrap();
        let mu = ProbabilityMeasure::uniform(-1.0, 1.0).unwrap();
        let p = PayoffCurve::new(&nu, &mu);
        let s = support_summary(&nu, &mu).unwrap();
        let l = Lattice::for_problem(&s, 0.5, 0.01, 0.5, 5.0).unwrap();
        let seq = solve_with(
            &p,
            &l,
            &SolveOptions { parallelism: Parallelism::Sequential, store_stride: Some(10), ..Default::default() },
        )
        .unwrap();
        let par = solve_with(
            &p,
            &l,
            &SolveOptions { parallelism: Parallelism::Chunked(3), store_stride: Some(10), ..Default::default() },
        )
        .unwrap();
        for r in seq.stored_rows() {
            let a = seq.v_row(r.step).unwrap();
            let b = par.v_row(r.step).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(seq.continuation_ranges(), par.continuation_ranges());
    }

    #[test]
    fn window_matches_full_sweep() {
        let nu = ProbabilityMeasure::dirac(0.0).unwrap();
        let mu = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (0.7, 0.25), (1.5, 0.25)]).unwrap();
        let p = PayoffCurve::new(&nu, &mu);
        let s = support_summary(&nu, &mu).unwrap();
        let l = Lattice::for_problem(&s, 0.5, 0.02, 0.5, 3.0).unwrap();
        let surf = solve_with(&p, &l, &SolveOptions { store_stride: Some(1), ..Default::default() }).unwrap();
        // Naive full sweep.
        let mut v = surf.g.clone();
        for k in (0..l.steps).rev() {
            let mut next = v.clone();
            for i in 1..l.n_nodes - 1 {
                next[i] = surf.g[i].max(l.lambda * (v[i - 1] + v[i + 1]) + (1.0 - 2.0 * l.lambda) * v[i]);
            }
            v = next;
            assert_eq!(surf.v_row(k).unwrap(), v, "step {k}");
        }
    }

    #[test]
    fn horizon_shift_is_exact() {
        let nu = ProbabilityMeasure::dirac(0.0).unwrap();
        let mu = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let p = PayoffCurve::new(&nu, &mu);
        let s = support_summary(&nu, &mu).unwrap();
        let long_l = Lattice::for_problem(&s, 2.0, 0.02, 0.5, 5.0).unwrap();
        let short_l = long_l.with_horizon(1.0).unwrap();
        let opts = SolveOptions { store_stride: Some(50), ..Default::default() };
        let a = solve_with(&p, &short_l, &opts).unwrap();
        let b = solve_with(&p, &long_l, &opts).unwrap();
        let c = horizon_consistency_check(&a, &b).unwrap();
        assert_eq!(c.max_deviation, 0.0);
        assert_eq!(c.range_mismatches, 0);
        assert!(c.rows_compared > 1);

        let other = Lattice::for_problem(&s, 2.0, 0.025, 0.5, 5.0).unwrap();
        let d = solve_with(&p, &other, &opts).unwrap();
        assert!(matches!(horizon_consistency_check(&a, &d), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn narrow_grid_errors() {
        let nu = ProbabilityMeasure::dirac(0.0).unwrap();
        let mu = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let p = PayoffCurve::new(&nu, &mu);
        let l = Lattice::new(0.0, 0.05, 10, 10, 1.0, 0.5).unwrap();
        assert!(matches!(solve(&p, &l), Err(Error::DomainTooNarrow { .. })));
    }

    #[test]
    fn stopping_region_has_zero_vt() {
        let s = two_point_surface(1.0, 0.02);
        let probe = vt_continuity_probe(&s, 0.0, 0.8);
        assert_eq!(probe.max_stopping_vt, 0.0);
        assert!(probe.rows_used > 0);
    }
}
