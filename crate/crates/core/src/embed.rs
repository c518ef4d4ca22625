//! Monte Carlo: the embedding stopping time, killed transition densities and
//! the duality and time-derivative checks built on them.
//!
//! Every path draws from its own ChaCha8 stream, selected by the path index
//! under a shared seed. Paths run in parallel and are collected in index
//! order before any reduction, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{BoundarySet, ReversedBarrier};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::measures::ProbabilityMeasure;
use crate::solver::ValueSurface;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub n_paths: usize,
    pub dt_sim: f64,
    pub t_max: f64,
    pub seed: u64,
    #[serde(default)]
    pub bridge_correction: bool,
}

impl PathConfig {
    /// `dt_sim` must be a whole multiple or a whole fraction of `knot_dt`, so
    /// every simulation step sees a single knot interval or a union of them.
    pub fn validate(&self, knot_dt: f64) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be positive".into()));
        }
        if !(self.dt_sim > 0.0 && self.dt_sim.is_finite()) {
            return Err(Error::InvalidConfig("dt_sim must be positive".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidConfig("t_max must be positive".into()));
        }
        let r = if self.dt_sim >= knot_dt { self.dt_sim / knot_dt } else { knot_dt / self.dt_sim };
        if (r - r.round()).abs() > 1e-6 * r {
            return Err(Error::InvalidConfig(format!(
                "dt_sim = {} and knot spacing {knot_dt} are not commensurate",
                self.dt_sim
            )));
        }
        Ok(())
    }
}

/// Generator for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generalized inverse-CDF sample of `nu` at `u` in `[0, 1)`.
pub fn sample_initial(nu: &ProbabilityMeasure, u: f64) -> f64 {
    nu.quantile(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub absorbed: bool,
    pub sigma: f64,
    pub w: f64,
}

/// Probability that a Brownian bridge from `a` to `b` over `dt` touches
/// `level`, both endpoints below it.
#[inline]
fn bridge_cross(level: f64, a: f64, b: f64, dt: f64) -> f64 {
    (-2.0 * (level - a) * (level - b) / dt).exp()
}

fn run_sigma_star(r: &ReversedBarrier, x0: f64, cfg: &PathConfig, rng: &mut ChaCha8Rng) -> PathOutcome {
    if !r.contains(0.0, x0) {
        return PathOutcome { absorbed: true, sigma: 0.0, w: x0 };
    }
    let h = cfg.dt_sim;
    // The first step jumps over the onset knots when they span more than one step.
    let first = (r.onset_knots() as f64 * r.dt).max(h).min(cfg.t_max);
    let n_steps = ((cfg.t_max - first) / h).round().max(0.0) as u64 + 1;
    let mut w = x0;
    for n in 1..=n_steps {
        let (t, dt) = if n == 1 { (first, first) } else { (first + (n - 1) as f64 * h, h) };
        let j = r.knot_index(t);
        let (up, down) = (r.s_plus[j], r.s_minus[j]);
        let z: f64 = rng.sample(StandardNormal);
        let prev = w;
        w += dt.sqrt() * z;
        if let Extended::Finite(s) = up {
            if w >= s {
                return PathOutcome { absorbed: true, sigma: t, w: s };
            }
        }
        if let Extended::Finite(s) = down {
            if w <= -s {
                return PathOutcome { absorbed: true, sigma: t, w: -s };
            }
        }
        if cfg.bridge_correction {
            if let Extended::Finite(s) = up {
                if rng.random::<f64>() < bridge_cross(s, prev, w, dt) {
                    return PathOutcome { absorbed: true, sigma: t, w: s };
                }
            }
            if let Extended::Finite(s) = down {
                if rng.random::<f64>() < bridge_cross(s, -prev, -w, dt) {
                    return PathOutcome { absorbed: true, sigma: t, w: -s };
                }
            }
        }
    }
    PathOutcome { absorbed: false, sigma: cfg.t_max, w }
}

/// First exit of `(-s_-(t), s_+(t))` on the simulation grid. The first
/// step ends after the barrier's onset knots (see
/// [`ReversedBarrier::onset_knots`]) if that is later than `dt_sim`.
///
/// An absorbed path reports the barrier level it crossed rather than the
/// overshooting Euler position. A start outside the levels at `0+` exits at
/// time 0 where it stands.
pub fn simulate_sigma_star(r: &ReversedBarrier, x0: f64, cfg: &PathConfig, path_index: u64) -> PathOutcome {
    let mut rng = path_rng(cfg.seed, path_index);
    run_sigma_star(r, x0, cfg, &mut rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFrequency {
    pub location: f64,
    pub target_mass: f64,
    pub frequency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaQuantiles {
    pub p10: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub n_paths: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub absorbed_fraction: f64,
    pub unabsorbed_fraction: f64,
    pub ks_distance: f64,
    /// Standard deviation scale of the KS statistic, `0.5 / sqrt(n)`.
    pub ks_sigma: f64,
    pub atom_frequencies: Vec<AtomFrequency>,
    pub sigma_star_quantiles: SigmaQuantiles,
    /// `E[sigma* ^ t_max]` over all paths.
    pub mean_truncated_sigma: f64,
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let idx = ((v.len() - 1) as f64 * p).round() as usize;
    v[idx]
}

/// `sup |F_emp - F_mu|` over right values and left limits at every sample
/// and every breakpoint of `mu`, which is the exact supremum for a step
/// function against a piecewise-linear CDF.
pub fn ks_distance(sorted: &[f64], mu: &ProbabilityMeasure) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < n {
        let x = sorted[i];
        let below = i;
        let mut j = i;
        while j < n && sorted[j] == x {
            j += 1;
        }
        worst = worst
            .max((below as f64 / nf - mu.cdf_left(x)).abs())
            .max((j as f64 / nf - mu.cdf(x)).abs());
        i = j;
    }
    for x in mu.breakpoints() {
        let left = sorted.partition_point(|&s| s < x) as f64 / nf;
        let right = sorted.partition_point(|&s| s <= x) as f64 / nf;
        worst = worst
            .max((left - mu.cdf_left(x)).abs())
            .max((right - mu.cdf(x)).abs());
    }
    worst
}

/// Runs `cfg.n_paths` paths from `nu` against `r` and compares the exit law
/// with `mu`. Unabsorbed paths are left out of the law and reported
/// separately. Exit values within `atom_window` of an atom of `mu` are
/// counted at the atom.
pub fn verify_embedding(
    r: &ReversedBarrier,
    nu: &ProbabilityMeasure,
    mu: &ProbabilityMeasure,
    cfg: &PathConfig,
    atom_window: f64,
) -> Result<EmbeddingReport> {
    cfg.validate(r.dt)?;
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let x0 = sample_initial(nu, rng.random::<f64>());
            run_sigma_star(r, x0, cfg, &mut rng)
        })
        .collect();

    let atoms = mu.atoms();
    let snap = |w: f64| -> f64 {
        atoms
            .iter()
            .filter(|a| (a.location - w).abs() <= atom_window)
            .min_by(|a, b| (a.location - w).abs().total_cmp(&(b.location - w).abs()))
            .map_or(w, |a| a.location)
    };
    let mut samples = Vec::with_capacity(outcomes.len());
    let mut sigmas = Vec::with_capacity(outcomes.len());
    let mut truncated = 0.0;
    for o in &outcomes {
        truncated += o.sigma.min(cfg.t_max);
        if o.absorbed {
            samples.push(snap(o.w));
            sigmas.push(o.sigma);
        }
    }
    let n = cfg.n_paths as f64;
    let absorbed = samples.len();
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    sigmas.sort_by(f64::total_cmp);
    let atom_frequencies = atoms
        .iter()
        .map(|a| {
            let count = sorted.partition_point(|&s| s <= a.location) - sorted.partition_point(|&s| s < a.location);
            AtomFrequency {
                location: a.location,
                target_mass: a.mass,
                frequency: if absorbed == 0 { 0.0 } else { count as f64 / absorbed as f64 },
            }
        })
        .collect();
    Ok(EmbeddingReport {
        n_paths: cfg.n_paths,
        absorbed_fraction: absorbed as f64 / n,
        unabsorbed_fraction: (cfg.n_paths - absorbed) as f64 / n,
        ks_distance: ks_distance(&sorted, mu),
        ks_sigma: 0.5 / (absorbed.max(1) as f64).sqrt(),
        atom_frequencies,
        sigma_star_quantiles: SigmaQuantiles {
            p10: quantile_sorted(&sigmas, 0.10),
            p25: quantile_sorted(&sigmas, 0.25),
            p50: quantile_sorted(&sigmas, 0.50),
            p75: quantile_sorted(&sigmas, 0.75),
            p90: quantile_sorted(&sigmas, 0.90),
            max: sigmas.last().copied().unwrap_or(f64::NAN),
        },
        mean_truncated_sigma: truncated / n,
        samples,
    })
}

/// Region a killed path must stay in.
#[derive(Clone, Copy, Debug)]
pub enum KillingDomain<'a> {
    /// `(-b_-(t), b_+(t))` in forward time, `b` right-continuous.
    Forward(&'a BoundarySet),
    /// `(-s_-(t), s_+(t))` in reversed time, `s` left-continuous.
    Reverse(&'a ReversedBarrier),
    Free,
}

impl KillingDomain<'_> {
    #[inline]
    fn levels(&self, t: f64) -> (Extended, Extended) {
        match self {
            KillingDomain::Forward(b) => {
                let k = b.row_at(t);
                (b.b_plus[k], b.b_minus[k])
            }
            KillingDomain::Reverse(r) => {
                let j = r.knot_index(t).max(1);
                (r.s_plus[j], r.s_minus[j])
            }
            KillingDomain::Free => (Extended::Infinite, Extended::Infinite),
        }
    }
}

/// Which grid times are checked against the domain. With `ExcludeStart` a
/// path is checked after each step; with `ExcludeEnd` before each step.
/// The two are transposes of each other on the simulation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    ExcludeStart,
    ExcludeEnd,
}

/// Starting law of a killed-density run.
#[derive(Clone, Copy, Debug)]
pub enum Start<'a> {
    Point(f64),
    Uniform(f64, f64),
    Measure(&'a ProbabilityMeasure),
}

impl Start<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Start::Point(x) => x,
            Start::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
            Start::Measure(m) => sample_initial(m, rng.random::<f64>()),
        }
    }
}

fn alive(levels: (Extended, Extended), x: f64) -> bool {
    levels.0.exceeds(x) && levels.1.exceeds(-x)
}

/// One killed path from `(t0, x0)`. The position at each of the ascending
/// `record` step indices is written to `out` if the path is still alive.
#[allow(clippy::too_many_arguments)]
fn run_killed(
    domain: &KillingDomain,
    t0: f64,
    x0: f64,
    h: f64,
    n_steps: usize,
    monitor: Monitoring,
    bridge: bool,
    rng: &mut ChaCha8Rng,
    record: &[usize],
    out: &mut [Option<f64>],
) {
    let sd = h.sqrt();
    let mut x = x0;
    let mut next = 0;
    while next < record.len() && record[next] == 0 {
        let start_ok = monitor == Monitoring::ExcludeStart || alive(domain.levels(t0), x0);
        out[next] = start_ok.then_some(x0);
        next += 1;
    }
    for n in 1..=n_steps {
        let check_t = match monitor {
            Monitoring::ExcludeStart => t0 + n as f64 * h,
            Monitoring::ExcludeEnd => t0 + (n - 1) as f64 * h,
        };
        let lv = domain.levels(check_t);
        if monitor == Monitoring::ExcludeEnd && !alive(lv, x) {
            return;
        }
        let prev = x;
        let z: f64 = rng.sample(StandardNormal);
        x += sd * z;
        if monitor == Monitoring::ExcludeStart && !alive(lv, x) {
            return;
        }
        if bridge {
            if let Extended::Finite(s) = lv.0 {
                if x < s && prev < s && rng.random::<f64>() < bridge_cross(s, prev, x, h) {
                    return;
                }
            }
            if let Extended::Finite(s) = lv.1 {
                if -x < s && -prev < s && rng.random::<f64>() < bridge_cross(s, -prev, -x, h) {
                    return;
                }
            }
        }
        while next < record.len() && record[next] == n {
            out[next] = Some(x);
            next += 1;
        }
        if next == record.len() {
            return;
        }
    }
}

/// Histogram bins on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn edges(&self, j: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + j as f64 * w, self.lo + (j + 1) as f64 * w)
    }

    pub fn center(&self, j: usize) -> f64 {
        let (a, b) = self.edges(j);
        0.5 * (a + b)
    }

    pub fn index(&self, y: f64) -> Option<usize> {
        if y < self.lo || y >= self.hi {
            return None;
        }
        Some((((y - self.lo) / self.width()) as usize).min(self.count - 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KilledDensityEstimate {
    pub direction: Direction,
    pub bins: Bins,
    /// Survivor density per bin (mass in the bin over its width).
    pub density: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Fraction of paths alive at the end, in any bin or outside all bins.
    pub survivor_mass: f64,
}

impl KilledDensityEstimate {
    pub fn bin_mass(&self, j: usize) -> f64 {
        self.density[j] * self.bins.width()
    }
}

fn steps_between(t0: f64, t1: f64, dt_sim: f64) -> Result<(usize, f64)> {
    if !(t1 > t0) {
        return Err(Error::InvalidConfig(format!("end time {t1} must exceed start time {t0}")));
    }
    let n = ((t1 - t0) / dt_sim - 1e-9).ceil().max(1.0) as usize;
    Ok((n, (t1 - t0) / n as f64))
}

/// Histogram at time `to_time` of paths started at `from_time` from `start`
/// that stayed inside `domain`.
pub fn killed_density_mc(
    domain: KillingDomain,
    from_time: f64,
    start: Start,
    to_time: f64,
    bins: Bins,
    cfg: &PathConfig,
    monitor: Monitoring,
) -> Result<KilledDensityEstimate> {
    let (n_steps, h) = steps_between(from_time, to_time, cfg.dt_sim)?;
    let ends: Vec<Option<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let x0 = start.draw(&mut rng);
            let mut out = [None];
            run_killed(&domain, from_time, x0, h, n_steps, monitor, cfg.bridge_correction, &mut rng, &[n_steps], &mut out);
            out[0]
        })
        .collect();
    let mut counts = vec![0usize; bins.count];
    let mut survivors = 0usize;
    for y in ends.iter().flatten() {
        survivors += 1;
        if let Some(j) = bins.index(*y) {
            counts[j] += 1;
        }
    }
    let n = cfg.n_paths as f64;
    let w = bins.width();
    let density = counts.iter().map(|&c| c as f64 / (n * w)).collect();
    let std_err = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            (p * (1.0 - p) / n).sqrt() / w
        })
        .collect();
    Ok(KilledDensityEstimate {
        direction: match domain {
            KillingDomain::Forward(_) => Direction::Forward,
            KillingDomain::Reverse(_) => Direction::Reverse,
            KillingDomain::Free => Direction::Free,
        },
        bins,
        density,
        std_err,
        survivor_mass: survivors as f64 / n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub t: f64,
    pub x: f64,
    pub x_window: f64,
    pub s: f64,
    pub forward: KilledDensityEstimate,
    pub reverse: KilledDensityEstimate,
    pub z: Vec<f64>,
    pub max_abs_z: f64,
}

/// Forward killed density from `(t, x)` to time `s` against the reverse
/// killed density from `(T - s, y)` back to `(T - t, x)`, bin by bin.
///
/// The forward run starts uniformly in `x +- x_window / 2` and is binned in
/// `y`; for each bin the reverse run starts uniformly in the bin and counts
/// landings in the `x` window. Both estimate the same double average of the
/// killed kernel. `fwd.n_paths` paths go forward and `rev.n_paths` in total
/// are split evenly over the bins.
#[allow(clippy::too_many_arguments)]
pub fn check_duality(
    b: &BoundarySet,
    r: &ReversedBarrier,
    horizon: f64,
    (t, x): (f64, f64),
    x_window: f64,
    s: f64,
    bins: Bins,
    fwd: &PathConfig,
    rev: &PathConfig,
) -> Result<DualityReport> {
    duality_between(KillingDomain::Forward(b), KillingDomain::Reverse(r), horizon, (t, x), x_window, s, bins, fwd, rev)
}

#[allow(clippy::too_many_arguments)]
pub fn duality_between(
    forward_domain: KillingDomain,
    reverse_domain: KillingDomain,
    horizon: f64,
    (t, x): (f64, f64),
    x_window: f64,
    s: f64,
    bins: Bins,
    fwd: &PathConfig,
    rev: &PathConfig,
) -> Result<DualityReport> {
    let lo = x - 0.5 * x_window;
    let hi = x + 0.5 * x_window;
    let forward = killed_density_mc(forward_domain, t, Start::Uniform(lo, hi), s, bins, fwd, Monitoring::ExcludeStart)?;

    let per_bin = (rev.n_paths / bins.count).max(1);
    let (n_steps, h) = steps_between(horizon - s, horizon - t, rev.dt_sim)?;
    let hits: Vec<bool> = (0..(per_bin * bins.count) as u64)
        .into_par_iter()
        .map(|i| {
            let j = i as usize / per_bin;
            let (a, c) = bins.edges(j);
            let mut rng = path_rng(rev.seed, i);
            let y0 = a + (c - a) * rng.random::<f64>();
            let mut out = [None];
            run_killed(
                &reverse_domain,
                horizon - s,
                y0,
                h,
                n_steps,
                Monitoring::ExcludeEnd,
                rev.bridge_correction,
                &mut rng,
                &[n_steps],
                &mut out,
            );
            out[0].is_some_and(|v| v >= lo && v < hi)
        })
        .collect();
    let mut density = Vec::with_capacity(bins.count);
    let mut std_err = Vec::with_capacity(bins.count);
    for j in 0..bins.count {
        let c = hits[j * per_bin..(j + 1) * per_bin].iter().filter(|&&v| v).count();
        let p = c as f64 / per_bin as f64;
        density.push(p / x_window);
        std_err.push((p * (1.0 - p) / per_bin as f64).sqrt() / x_window);
    }
    let survivor_mass = hits.iter().filter(|&&v| v).count() as f64 / hits.len() as f64;
    let reverse = KilledDensityEstimate {
        direction: match reverse_domain {
            KillingDomain::Free => Direction::Free,
            _ => Direction::Reverse,
        },
        bins,
        density,
        std_err,
        survivor_mass,
    };
    let z: Vec<f64> = (0..bins.count)
        .map(|j| {
            let se = (forward.std_err[j].powi(2) + reverse.std_err[j].powi(2)).sqrt();
            let d = forward.density[j] - reverse.density[j];
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DualityReport { t, x, x_window, s, forward, reverse, z, max_abs_z })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtCheck {
    pub t: f64,
    pub x: f64,
    /// `-U_t` from central differences on the solved surface.
    pub finite_difference: f64,
    /// Box-kernel estimate of the reverse killed density from `nu`.
    pub monte_carlo: f64,
    pub mc_std_err: f64,
    pub relative_error: f64,
}

/// Compares `-U_t(t, x)` from the surface with the reverse killed density
/// at `(T - t, x)` of paths started from `nu` at time 0, for each probe.
/// One set of paths serves all probes. `half_width` is the box kernel half
/// width and `floor` bounds the relative error denominator from below.
pub fn check_ut_representation(
    surface: &ValueSurface,
    r: &ReversedBarrier,
    nu: &ProbabilityMeasure,
    probes: &[(f64, f64)],
    half_width: f64,
    floor: f64,
    cfg: &PathConfig,
) -> Result<Vec<UtCheck>> {
    let horizon = surface.lattice.horizon;
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| (horizon - probes[a].0).total_cmp(&(horizon - probes[b].0)));
    let t_end = horizon - probes.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let (n_steps, h) = steps_between(0.0, t_end, cfg.dt_sim)?;
    let record: Vec<usize> = order
        .iter()
        .map(|&p| (((horizon - probes[p].0) / h).round() as usize).min(n_steps))
        .collect();

    let results: Vec<Vec<Option<f64>>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let y0 = sample_initial(nu, rng.random::<f64>());
            let mut out = vec![None; record.len()];
            run_killed(
                &KillingDomain::Reverse(r),
                0.0,
                y0,
                h,
                n_steps,
                Monitoring::ExcludeStart,
                cfg.bridge_correction,
                &mut rng,
                &record,
                &mut out,
            );
            out
        })
        .collect();

    let n = cfg.n_paths as f64;
    let mut checks = vec![None; probes.len()];
    for (slot, &p) in order.iter().enumerate() {
        let (t, x) = probes[p];
        let c = results
            .iter()
            .filter(|o| o[slot].is_some_and(|v| (v - x).abs() <= half_width))
            .count();
        let prob = c as f64 / n;
        let mc = prob / (2.0 * half_width);
        let se = (prob * (1.0 - prob) / n).sqrt() / (2.0 * half_width);
        let fd = surface
            .minus_ut(t, x)
            .ok_or_else(|| Error::InvalidConfig(format!("probe time {t} has no stored neighbours")))?;
        checks[p] = Some(UtCheck {
            t,
            x,
            finite_difference: fd,
            monte_carlo: mc,
            mc_std_err: se,
            relative_error: (fd - mc).abs() / fd.abs().max(floor),
        });
    }
    Ok(checks.into_iter().map(Option::unwrap).collect())
}
