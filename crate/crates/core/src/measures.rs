//! Probability measures with finitely many atoms and piecewise-constant
//! densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;

/// Tolerance on the total mass at construction.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

impl DensityPiece {
    pub fn mass(&self) -> f64 {
        self.density * (self.hi - self.lo)
    }
}

/// JSON form: `{"atoms": [[x, w], ...], "pieces": [[lo, hi, density], ...]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub pieces: Vec<[f64; 3]>,
}

/// A probability measure on the line, immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMeasure {
    atoms: Vec<Atom>,
    pieces: Vec<DensityPiece>,
    // Sorted breakpoints with F(x-) and F(x) at each, for quantiles.
    knots: Vec<f64>,
    cdf_left_at: Vec<f64>,
    cdf_at: Vec<f64>,
}

impl ProbabilityMeasure {
    /// Validates and sorts the input. Rejects total mass off by more than
    /// [`MASS_TOLERANCE`]; nothing is renormalized.
    pub fn new(mut atoms: Vec<Atom>, mut pieces: Vec<DensityPiece>) -> Result<Self> {
        for a in &atoms {
            if !a.location.is_finite() || !a.mass.is_finite() || a.mass <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom ({}, {}) needs a finite location and positive mass",
                    a.location, a.mass
                )));
            }
        }
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.density.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite density piece".into()));
            }
            if p.lo >= p.hi || p.density < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "density piece [{}, {}] with density {} needs lo < hi and density >= 0",
                    p.lo, p.hi, p.density
                )));
            }
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if let Some(w) = atoms.windows(2).find(|w| w[0].location >= w[1].location) {
            return Err(Error::InvalidMeasure(format!(
                "duplicate atom location {}",
                w[1].location
            )));
        }
        if let Some(w) = pieces.windows(2).find(|w| w[0].hi > w[1].lo) {
            return Err(Error::InvalidMeasure(format!(
                "density pieces [{}, {}] and [{}, {}] overlap",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            )));
        }
        let total: f64 =
            atoms.iter().map(|a| a.mass).sum::<f64>() + pieces.iter().map(|p| p.mass()).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not 1")));
        }

        let mut m = ProbabilityMeasure {
            atoms,
            pieces,
            knots: Vec::new(),
            cdf_left_at: Vec::new(),
            cdf_at: Vec::new(),
        };
        m.knots = m.breakpoints();
        m.cdf_left_at = m.knots.iter().map(|&x| m.cdf_left(x)).collect();
        m.cdf_at = m.knots.iter().map(|&x| m.cdf(x)).collect();
        Ok(m)
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        let atoms = spec
            .atoms
            .iter()
            .map(|&[location, mass]| Atom { location, mass })
            .collect();
        let pieces = spec
            .pieces
            .iter()
            .map(|&[lo, hi, density]| DensityPiece { lo, hi, density })
            .collect();
        Self::new(atoms, pieces)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            atoms: self.atoms.iter().map(|a| [a.location, a.mass]).collect(),
            pieces: self.pieces.iter().map(|p| [p.lo, p.hi, p.density]).collect(),
        }
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![Atom { location: x, mass: 1.0 }], Vec::new())
    }

    pub fn discrete(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            points
                .iter()
                .map(|&(location, mass)| Atom { location, mass })
                .collect(),
            Vec::new(),
        )
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            Vec::new(),
            vec![DensityPiece {
                lo,
                hi,
                density: 1.0 / (hi - lo),
            }],
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    /// `m((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location <= x)
            .map(|a| a.mass)
            .sum();
        (atoms + self.density_mass_below(x)).min(1.0)
    }

    /// `m((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location < x)
            .map(|a| a.mass)
            .sum();
        (atoms + self.density_mass_below(x)).min(1.0)
    }

    fn density_mass_below(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .take_while(|p| p.lo < x)
            .map(|p| p.density * (p.hi.min(x) - p.lo))
            .sum()
    }

    pub fn atom_mass(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.location == x)
            .map_or(0.0, |a| a.mass)
    }

    /// Density of the absolutely continuous part at `x`; at a shared piece
    /// endpoint the right piece wins.
    pub fn density_at(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .rev()
            .find(|p| p.lo <= x && x < p.hi)
            .map_or(0.0, |p| p.density)
    }

    /// `m((a, b))` by direct summation.
    pub fn mass_open(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|at| at.location > a && at.location < b)
            .map(|at| at.mass)
            .sum();
        let dens: f64 = self
            .pieces
            .iter()
            .map(|p| p.density * (p.hi.min(b) - p.lo.max(a)).max(0.0))
            .sum();
        atoms + dens
    }

    /// `m([a, b])`.
    pub fn mass_closed(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        if a == b {
            return self.atom_mass(a);
        }
        self.mass_open(a, b) + self.atom_mass(a) + self.atom_mass(b)
    }

    /// Closed support hull `[inf supp m, sup supp m]`; zero-density pieces
    /// do not count.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.location);
            hi = hi.max(a.location);
        }
        for p in self.pieces.iter().filter(|p| p.density > 0.0) {
            lo = lo.min(p.lo);
            hi = hi.max(p.hi);
        }
        (lo, hi)
    }

    /// Sorted, deduplicated atom locations and piece endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.location)
            .chain(self.pieces.iter().flat_map(|p| [p.lo, p.hi]))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Generalized inverse `inf {x : F(x) > u}` for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let n = self.knots.len();
        // First knot whose F exceeds u.
        let j = self.cdf_at.partition_point(|&f| f <= u).min(n - 1);
        if j == 0 || self.cdf_left_at[j] <= u {
            return self.knots[j];
        }
        // Linear on (knots[j-1], knots[j]).
        let (x0, x1) = (self.knots[j - 1], self.knots[j]);
        let (f0, f1) = (self.cdf_at[j - 1], self.cdf_left_at[j]);
        let x = x0 + (u - f0) / (f1 - f0) * (x1 - x0);
        x.clamp(x0, x1)
    }

    /// Moves every atom onto the nearest node `center + k * dx`, merging
    /// atoms that land on the same node. Density pieces are left alone.
    pub fn snapped_to_grid(&self, center: f64, dx: f64) -> Result<(Self, Vec<SnapRecord>)> {
        let mut records = Vec::new();
        let mut atoms: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let k = ((a.location - center) / dx).round();
            let snapped = center + k * dx;
            if snapped != a.location {
                records.push(SnapRecord {
                    original: a.location,
                    snapped,
                    mass: a.mass,
                });
            }
            match atoms.last_mut() {
                Some(last) if last.location == snapped => last.mass += a.mass,
                _ => atoms.push(Atom {
                    location: snapped,
                    mass: a.mass,
                }),
            }
        }
        Ok((Self::new(atoms, self.pieces.clone())?, records))
    }
}

/// One atom moved by grid snapping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapRecord {
    pub original: f64,
    pub snapped: f64,
    pub mass: f64,
}

/// Support descriptors of a pair `(nu, mu)`.
///
/// `a_plus`, `a_minus` are the endpoints of `supp nu` (as `sup` and
/// `-inf`). `bhat_plus`, `bhat_minus` bound the largest open interval
/// around `(-a_minus, a_plus)` carrying no `mu` mass, `Infinite` when `mu`
/// misses that half-line entirely.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSummary {
    pub a_plus: f64,
    pub a_minus: f64,
    pub mu_plus: Extended,
    pub mu_minus: Extended,
    pub bhat_plus: Extended,
    pub bhat_minus: Extended,
}

impl SupportSummary {
    /// Initial support hull `[-a_minus, a_plus]`.
    pub fn initial_hull(&self) -> (f64, f64) {
        (-self.a_minus, self.a_plus)
    }
}

/// Computes the support descriptors. Fails with [`Error::NoGap`] when `mu`
/// charges the open interval `(-a_minus, a_plus)`.
pub fn support_summary(nu: &ProbabilityMeasure, mu: &ProbabilityMeasure) -> Result<SupportSummary> {
    let (nu_lo, nu_hi) = nu.support();
    let a_plus = nu_hi;
    let a_minus = -nu_lo;
    if a_plus < 0.0 || a_minus < 0.0 {
        return Err(Error::OriginOutsideInitialHull { a_plus, a_minus });
    }
    let gap_mass = mu.mass_open(-a_minus, a_plus);
    if gap_mass > 0.0 {
        return Err(Error::NoGap {
            lo: -a_minus,
            hi: a_plus,
            mass: gap_mass,
        });
    }

    let mut plus: Option<f64> = None;
    let mut minus: Option<f64> = None;
    let mut take_plus = |c: f64| plus = Some(plus.map_or(c, |p: f64| p.min(c)));
    for a in mu.atoms().iter().filter(|a| a.location >= a_plus) {
        take_plus(a.location);
    }
    for p in mu.pieces().iter().filter(|p| p.density > 0.0 && p.hi >= a_plus) {
        take_plus(p.lo.max(a_plus));
    }
    let mut take_minus = |c: f64| minus = Some(minus.map_or(c, |m: f64| m.max(c)));
    for a in mu.atoms().iter().filter(|a| a.location <= -a_minus) {
        take_minus(a.location);
    }
    for p in mu.pieces().iter().filter(|p| p.density > 0.0 && p.lo <= -a_minus) {
        take_minus(p.hi.min(-a_minus));
    }

    let (mu_lo, mu_hi) = mu.support();
    Ok(SupportSummary {
        a_plus,
        a_minus,
        mu_plus: Extended::Finite(mu_hi),
        mu_minus: Extended::Finite(-mu_lo),
        bhat_plus: plus.map_or(Extended::Infinite, Extended::Finite),
        bhat_minus: minus.map_or(Extended::Infinite, |m| Extended::Finite(-m)),
    })
}

/// Result of checking the standing assumptions on a pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub d1_ok: bool,
    pub d2_ok: bool,
    pub connected_ok: bool,
    pub messages: Vec<String>,
    pub summary: Option<SupportSummary>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.d1_ok && self.d2_ok && self.connected_ok
    }
}

/// Checks D.1 (a zero-mass interval around the initial support) and D.2
/// (no target atom at a gap edge that coincides with the initial support
/// edge). Never fails; problems are reported in the flags and messages.
/// D.2 is reported as failing when D.1 fails, since it cannot be checked.
pub fn validate(nu: &ProbabilityMeasure, mu: &ProbabilityMeasure) -> ValidationReport {
    let summary = match support_summary(nu, mu) {
        Ok(s) => s,
        Err(e) => {
            return ValidationReport {
                d1_ok: false,
                d2_ok: false,
                connected_ok: false,
                messages: vec![e.to_string(), "D.2 not checked because D.1 fails".into()],
                summary: None,
            }
        }
    };
    let mut messages = Vec::new();
    let mut d2_ok = true;
    if let Extended::Finite(b) = summary.bhat_plus {
        if b == summary.a_plus && mu.atom_mass(b) > 0.0 {
            d2_ok = false;
            messages.push(
                Error::AtomAtGapEdge(format!(
                    "bhat_+ = a_+ = {b} but mu has an atom of mass {} there",
                    mu.atom_mass(b)
                ))
                .to_string(),
            );
        }
    }
    if let Extended::Finite(b) = summary.bhat_minus {
        if b == summary.a_minus && mu.atom_mass(-b) > 0.0 {
            d2_ok = false;
            messages.push(
                Error::AtomAtGapEdge(format!(
                    "bhat_- = a_- = {b} but mu has an atom of mass {} at {}",
                    mu.atom_mass(-b),
                    -b
                ))
                .to_string(),
            );
        }
    }
    ValidationReport {
        d1_ok: true,
        d2_ok,
        connected_ok: true,
        messages,
        summary: Some(summary),
    }
}
