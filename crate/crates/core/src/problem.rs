//! Problem specs and the end-to-end pipeline.

use serde::{Deserialize, Serialize};

use crate::boundaries::{
    cross_check, detect_flats, detect_jumps, extract_boundaries, generalized_inverse, reverse, BoundarySet,
    DetectorReport, ReversedBarrier,
};
use crate::embed::{check_duality, check_ut_representation, verify_embedding, Bins, DualityReport, EmbeddingReport, PathConfig, UtCheck};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::measures::{support_summary, validate, MeasureSpec, ProbabilityMeasure, SnapRecord, SupportSummary, ValidationReport};
use crate::payoff::{infinite_horizon, InfiniteHorizonResult, PayoffCurve};
use crate::solver::{horizon_consistency_check, solve_with, HorizonConsistency, Lattice, SolveOptions, ValueSurface};

fn default_lambda() -> f64 {
    0.5
}

fn default_margin() -> f64 {
    5.0
}

/// Tolerance overrides. Unset entries default to multiples of `dx`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub eps_stop: Option<f64>,
    /// Flat detection spread; default `2 dx`.
    pub level_tol: Option<f64>,
    /// Jump detection size; default `5 dx`.
    pub jump_tol: Option<f64>,
    /// Shortest reported flat; default `0.1`.
    pub min_flat_width: Option<f64>,
    /// Most knots between rises merged into one jump ramp; default 8.
    pub ramp_gap: Option<usize>,
    /// Exit values this close to a target atom count at the atom; default `2 dx`.
    pub atom_window: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualitySpec {
    pub t: f64,
    pub x: f64,
    pub x_window: f64,
    pub s: f64,
    pub bins: (f64, f64, usize),
    pub n_paths: usize,
    pub dt_sim: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtSpec {
    pub probes: Vec<(f64, f64)>,
    pub n_paths: usize,
    pub dt_sim: f64,
    pub seed: u64,
    pub half_width: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub bridge_correction: bool,
}

fn default_floor() -> f64 {
    1e-3
}

/// Pass thresholds for `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Criteria {
    pub ks_max: f64,
    pub atom_tol: f64,
    pub absorbed_min: f64,
    pub z_max: f64,
    pub ut_rel_max: f64,
}

impl Default for Criteria {
    fn default() -> Self {
        Criteria { ks_max: 0.02, atom_tol: 0.005, absorbed_min: 0.99, z_max: 4.0, ut_rel_max: 0.10 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub duality: Option<DualitySpec>,
    pub ut: Option<UtSpec>,
    #[serde(default)]
    pub criteria: Criteria,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub nu: MeasureSpec,
    pub mu: MeasureSpec,
    pub horizon: f64,
    pub dx: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub embed: Option<PathConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub verify: Option<VerifySpec>,
}

impl ProblemSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let positive = [("horizon", self.horizon), ("dx", self.dx), ("lambda", self.lambda), ("margin", self.margin)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Measures after snapping atoms onto the `dx` grid through 0.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub nu: ProbabilityMeasure,
    pub mu: ProbabilityMeasure,
    pub snapping: Vec<SnapRecord>,
}

/// Surface, boundaries and barrier from one solve.
#[derive(Clone, Debug)]
pub struct Solved {
    pub summary: SupportSummary,
    pub surface: ValueSurface,
    pub boundaries: BoundarySet,
    pub barrier: ReversedBarrier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult { name: name.into(), value, threshold, pass: value <= threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult { name: name.into(), value, threshold, pass: value >= threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub min_v_minus_g: f64,
    pub max_time_increase: f64,
    pub max_spatial_increment: f64,
    pub raw_violation_plus: f64,
    pub raw_violation_minus: f64,
    pub terminal_gap_plus: Option<f64>,
    pub terminal_gap_minus: Option<f64>,
    pub horizon_consistency: Option<HorizonConsistency>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub validation: ValidationReport,
    pub infinite_horizon: InfiniteHorizonResult,
    pub invariants: InvariantReport,
    pub embedding: Option<EmbeddingReport>,
    pub duality: Option<DualityReport>,
    pub ut: Option<Vec<UtCheck>>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseReport {
    pub detectors: DetectorReport,
    pub level_tol: f64,
    pub jump_tol: f64,
    pub min_flat_width: f64,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let nu = ProbabilityMeasure::from_spec(&spec.nu)?;
        let mu = ProbabilityMeasure::from_spec(&spec.mu)?;
        let (nu, mut snapping) = nu.snapped_to_grid(0.0, spec.dx)?;
        let (mu, more) = mu.snapped_to_grid(0.0, spec.dx)?;
        snapping.extend(more);
        Ok(Problem { spec, nu, mu, snapping })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::new(ProblemSpec::from_json(s)?)
    }

    pub fn dx(&self) -> f64 {
        self.spec.dx
    }

    pub fn level_tol(&self) -> f64 {
        self.spec.tolerances.level_tol.unwrap_or(2.0 * self.dx())
    }

    pub fn jump_tol(&self) -> f64 {
        self.spec.tolerances.jump_tol.unwrap_or(5.0 * self.dx())
    }

    pub fn min_flat_width(&self) -> f64 {
        self.spec.tolerances.min_flat_width.unwrap_or(0.1)
    }

    pub fn ramp_gap(&self) -> usize {
        self.spec.tolerances.ramp_gap.unwrap_or(8)
    }

    pub fn atom_window(&self) -> f64 {
        self.spec.tolerances.atom_window.unwrap_or(2.0 * self.dx())
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.nu, &self.mu)
    }

    pub fn payoff(&self) -> PayoffCurve {
        PayoffCurve::new(&self.nu, &self.mu)
    }

    /// Summary after both assumptions pass; the first failure otherwise.
    pub fn checked_summary(&self) -> Result<SupportSummary> {
        let summary = support_summary(&self.nu, &self.mu)?;
        let report = self.validate();
        if !report.d2_ok {
            return Err(Error::AtomAtGapEdge(report.messages.join("; ")));
        }
        Ok(summary)
    }

    pub fn lattice(&self, horizon: f64) -> Result<Lattice> {
        let summary = self.checked_summary()?;
        Lattice::for_problem(&summary, horizon, self.dx(), self.spec.lambda, self.spec.margin)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { eps_stop: self.spec.tolerances.eps_stop, ..Default::default() }
    }

    pub fn solve_on(&self, lattice: &Lattice) -> Result<Solved> {
        let summary = self.checked_summary()?;
        let surface = solve_with(&self.payoff(), lattice, &self.solve_options())?;
        let boundaries = extract_boundaries(&surface, &summary)?;
        let barrier = reverse(&boundaries)?;
        Ok(Solved { summary, surface, boundaries, barrier })
    }

    pub fn solve(&self, horizon: f64) -> Result<Solved> {
        self.solve_on(&self.lattice(horizon)?)
    }

    /// Horizon for the embedding barrier: one solve long enough to cover
    /// `t_max` replaces stitching shorter horizons together.
    pub fn embedding_horizon(&self) -> f64 {
        self.spec.embed.map_or(self.spec.horizon, |e| e.t_max.max(self.spec.horizon))
    }

    pub fn detectors(&self, barrier: &ReversedBarrier) -> ReverseReport {
        let flats = detect_flats(barrier, self.level_tol(), self.min_flat_width());
        let jumps = detect_jumps(barrier, self.jump_tol(), self.ramp_gap());
        ReverseReport {
            detectors: cross_check(&self.mu, &flats, &jumps, self.level_tol()),
            level_tol: self.level_tol(),
            jump_tol: self.jump_tol(),
            min_flat_width: self.min_flat_width(),
        }
    }

    pub fn embed(&self, barrier: &ReversedBarrier) -> Result<EmbeddingReport> {
        let cfg = self
            .spec
            .embed
            .ok_or_else(|| Error::InvalidConfig("spec has no embed section".into()))?;
        verify_embedding(barrier, &self.nu, &self.mu, &cfg, self.atom_window())
    }

    pub fn infinite_horizon(&self) -> Result<InfiniteHorizonResult> {
        Ok(infinite_horizon(&self.payoff(), &self.checked_summary()?))
    }

    pub fn invariants(&self, solved: &Solved, consistency: Option<HorizonConsistency>) -> InvariantReport {
        let d = &solved.surface.diagnostics;
        let b = &solved.boundaries;
        let n = b.steps();
        let gap = |side: &[Extended], bhat: Extended| match (side[n - 1], bhat) {
            (Extended::Finite(v), Extended::Finite(h)) => Some((v - h).abs()),
            _ => None,
        };
        InvariantReport {
            min_v_minus_g: d.min_v_minus_g,
            max_time_increase: d.max_time_increase,
            max_spatial_increment: d.max_spatial_increment,
            raw_violation_plus: b.raw_violation_plus,
            raw_violation_minus: b.raw_violation_minus,
            terminal_gap_plus: gap(&b.b_plus, solved.summary.bhat_plus),
            terminal_gap_minus: gap(&b.b_minus, solved.summary.bhat_minus),
            horizon_consistency: consistency,
        }
    }

    /// Full pipeline with every configured check.
    pub fn verify(&self) -> Result<VerifyReport> {
        let validation = self.validate();
        let criteria = self.spec.verify.as_ref().map(|v| v.criteria).unwrap_or_default();
        let dx = self.dx();
        let long_h = self.embedding_horizon();
        let long_lattice = self.lattice(long_h)?;
        let solved = self.solve_on(&long_lattice)?;

        // Horizon shift against a solve at the problem horizon on the same nodes.
        let consistency = if long_h > self.spec.horizon {
            let short = long_lattice.with_horizon(self.spec.horizon).ok();
            match short {
                Some(l) => {
                    let s = solve_with(&self.payoff(), &l, &self.solve_options())?;
                    horizon_consistency_check(&s, &solved.surface).ok()
                }
                None => None,
            }
        } else {
            None
        };
        let invariants = self.invariants(&solved, consistency);

        let mut checks = vec![
            CheckResult::at_least("v_dominates_g", invariants.min_v_minus_g, -1e-12),
            CheckResult::at_most("time_monotone", invariants.max_time_increase, 0.0),
            CheckResult::at_most("spatial_lipschitz", invariants.max_spatial_increment, 2.0 * dx + 1e-9),
            CheckResult::at_most(
                "raw_monotonicity",
                invariants.raw_violation_plus.max(invariants.raw_violation_minus),
                dx,
            ),
        ];
        let terminal = invariants
            .terminal_gap_plus
            .into_iter()
            .chain(invariants.terminal_gap_minus)
            .fold(0.0f64, f64::max);
        checks.push(CheckResult::at_most("terminal_limit", terminal, 2.0 * dx));
        if let Some(c) = consistency {
            checks.push(CheckResult::at_most("horizon_consistency", c.max_deviation, 0.0));
        }

        let embedding = match self.spec.embed {
            Some(_) => Some(self.embed(&solved.barrier)?),
            None => None,
        };
        if let Some(e) = &embedding {
            checks.push(CheckResult::at_least("absorbed_fraction", e.absorbed_fraction, criteria.absorbed_min));
            checks.push(CheckResult::at_most("ks_distance", e.ks_distance, criteria.ks_max));
            for a in &e.atom_frequencies {
                checks.push(CheckResult::at_most(
                    &format!("atom_frequency_{}", a.location),
                    (a.frequency - a.target_mass).abs(),
                    criteria.atom_tol,
                ));
            }
        }

        let mut duality = None;
        let mut ut = None;
        if let Some(v) = &self.spec.verify {
            if let Some(d) = v.duality {
                let fwd = PathConfig { n_paths: d.n_paths, dt_sim: d.dt_sim, t_max: long_h, seed: d.seed, bridge_correction: false };
                let rev = PathConfig { seed: d.seed ^ 0x9e37_79b9_7f4a_7c15, ..fwd };
                let bins = Bins { lo: d.bins.0, hi: d.bins.1, count: d.bins.2 };
                let r = check_duality(&solved.boundaries, &solved.barrier, long_h, (d.t, d.x), d.x_window, d.s, bins, &fwd, &rev)?;
                checks.push(CheckResult::at_most("duality_max_z", r.max_abs_z, criteria.z_max));
                duality = Some(r);
            }
            if let Some(u) = &v.ut {
                // The long surface is the short one shifted by long_h - T.
                let shift = long_h - self.spec.horizon;
                let probes: Vec<(f64, f64)> = u.probes.iter().map(|&(t, x)| (t + shift, x)).collect();
                let cfg = PathConfig {
                    n_paths: u.n_paths,
                    dt_sim: u.dt_sim,
                    t_max: long_h,
                    seed: u.seed,
                    bridge_correction: u.bridge_correction,
                };
                let mut res = check_ut_representation(&solved.surface, &solved.barrier, &self.nu, &probes, u.half_width, u.floor, &cfg)?;
                for (c, &(t, _)) in res.iter_mut().zip(&u.probes) {
                    c.t = t;
                }
                for c in &res {
                    checks.push(CheckResult::at_most(&format!("ut_relative_error_t{}_x{}", c.t, c.x), c.relative_error, criteria.ut_rel_max));
                }
                ut = Some(res);
            }
        }

        let pass = validation.ok() && checks.iter().all(|c| c.pass);
        Ok(VerifyReport {
            validation,
            infinite_horizon: self.infinite_horizon()?,
            invariants,
            embedding,
            duality,
            ut,
            checks,
            pass,
        })
    }

    pub fn inverse_csv(&self, barrier: &ReversedBarrier, points: usize) -> String {
        let last = barrier.knots();
        let hi = barrier.s_plus[last].finite().unwrap_or(2.0) + 0.25;
        let lo = -(barrier.s_minus[last].finite().unwrap_or(2.0) + 0.25);
        generalized_inverse(barrier).to_csv(lo, hi, points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_and_errors() {
        let s = r#"{"nu":{"atoms":[[0,1]]},"mu":{"atoms":[[-1,0.5],[1,0.5]]},"horizon":1,"dx":0.05}"#;
        let spec = ProblemSpec::from_json(s).unwrap();
        assert_eq!(spec.lambda, 0.5);
        assert_eq!(spec.margin, 5.0);
        assert!(matches!(ProblemSpec::from_json("{"), Err(Error::Parse(_))));
        let bad = r#"{"nu":{"atoms":[[0,1]]},"mu":{"atoms":[[1,1]]},"horizon":-1,"dx":0.05}"#;
        assert!(matches!(ProblemSpec::from_json(bad), Err(Error::Parse(_))));
    }

    #[test]
    fn gap_violation_is_rejected_before_solving() {
        let s = r#"{"nu":{"atoms":[[-1,0.5],[1,0.5]]},"mu":{"pieces":[[-0.5,0.5,1]]},"horizon":1,"dx":0.05}"#;
        let p = Problem::from_json(s).unwrap();
        assert!(!p.validate().d1_ok);
        assert!(matches!(p.solve(1.0), Err(Error::NoGap { .. })));
    }
}
