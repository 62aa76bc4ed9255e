//! Locating eigenvalues: grid scans of the residual, refinement of its local
//! minima and the parity of the resulting forms.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::automorphy::{Setup, SolveResult};
use crate::bessel::BesselEvaluator;
use crate::error::{MaassError, Result};
use crate::group::{Character, Family, GroupPresentation};
use crate::hyperbolic::UpperHalfPoint;

/// Grid minima deeper than this fraction of the scan median are refined.
pub const BRACKET_FRACTION: f64 = 0.25;
/// Parity tolerance on `f(-x + iy) = ±f(x + iy)`, relative to `max |f|`.
pub const PARITY_TOL: f64 = 1e-4;

const GOLDEN_TOL: f64 = 1e-5;
const PARABOLIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        })
    }
}

/// An accepted eigenvalue with its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MaassCandidate {
    pub family: Family,
    pub params: Vec<f64>,
    pub character: Character,
    pub r: f64,
    /// `a_n` for `n = -M..M` at slot `n + M`, in units of the scaled expansion.
    pub coefficients: Vec<Complex64>,
    pub residual: f64,
    pub parity: Parity,
    pub m: usize,
    pub n_points: usize,
    pub y0: f64,
    pub eps: f64,
    /// Index fixed to 1 (normally 1).
    pub normalization: i64,
}

impl MaassCandidate {
    pub fn from_solution(setup: &Setup, sol: &SolveResult) -> Self {
        let parity = classify_parity_of(&setup.group, sol);
        Self {
            family: setup.group.family,
            params: setup.group.params.clone(),
            character: setup.group.character.clone(),
            r: sol.r,
            coefficients: sol.coefficients.clone(),
            residual: sol.residual,
            parity,
            m: sol.m,
            n_points: sol.n_points,
            y0: sol.y0,
            eps: setup.settings.eps,
            normalization: sol.normalization,
        }
    }

    /// `λ = 1/4 + R²`.
    pub fn lambda(&self) -> f64 {
        0.25 + self.r * self.r
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        let mi = self.m as i64;
        if n.abs() > mi {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[(n + mi) as usize]
        }
    }

    /// Coefficients divided by `a_1`, the usual arithmetic normalization.
    pub fn normalized_coeff(&self, n: i64) -> Complex64 {
        self.coeff(n) / self.coeff(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub mid: f64,
    pub hi: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// `(R, residual)` on the grid.
    pub grid: Vec<(f64, f64)>,
    pub brackets: Vec<Bracket>,
    pub median: f64,
}

pub fn grid_points(r_lo: f64, r_hi: f64, step: f64) -> Vec<f64> {
    let n = ((r_hi - r_lo) / step).round() as usize;
    (0..=n).map(|i| r_lo + i as f64 * step).collect()
}

/// Residual on the grid `r_lo, r_lo + step, .., r_hi` and the local minima
/// lying below [`BRACKET_FRACTION`] of the median.
pub fn scan(setup: &Setup, r_lo: f64, r_hi: f64, step: f64) -> Result<ScanResult> {
    if !(r_lo < r_hi) || !(step > 0.0) {
        return Err(MaassError::Domain(format!(
            "scan needs r_lo < r_hi and step > 0 (got [{r_lo}, {r_hi}], {step})"
        )));
    }
    let rs = grid_points(r_lo, r_hi, step);
    let grid: Vec<(f64, f64)> = rs.par_iter().map(|&r| (r, setup.residual_at(r))).collect();
    let mut sorted: Vec<f64> = grid.iter().map(|g| g.1).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let brackets = grid
        .windows(3)
        .filter(|w| w[1].1 < w[0].1 && w[1].1 <= w[2].1 && w[1].1 < BRACKET_FRACTION * median)
        .map(|w| Bracket {
            lo: w[0].0,
            mid: w[1].0,
            hi: w[2].0,
            residual: w[1].1,
        })
        .collect();
    Ok(ScanResult {
        grid,
        brackets,
        median,
    })
}

/// Golden-section search on the bracket, then parabolic steps on the squared
/// residual (which is locally quadratic in `R`).
pub fn minimize_residual(setup: &Setup, bracket: &Bracket) -> (f64, f64) {
    let f = |r: f64| setup.residual_at(r);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (mut x, mut fx) = if fc < fd { (c, fc) } else { (d, fd) };
    let mut h = 0.5 * GOLDEN_TOL;
    for _ in 0..8 {
        let (fl, fr) = (f(x - h), f(x + h));
        let (ql, q0, qr) = (fl * fl, fx * fx, fr * fr);
        let curv = ql - 2.0 * q0 + qr;
        if !(curv > 0.0) {
            break;
        }
        let shift = 0.5 * h * (ql - qr) / curv;
        let shift = shift.clamp(-4.0 * h, 4.0 * h);
        let fx_new = f(x + shift);
        if fx_new > fx {
            h *= 0.5;
            if h < PARABOLIC_TOL {
                break;
            }
            continue;
        }
        x += shift;
        fx = fx_new;
        if shift.abs() < PARABOLIC_TOL {
            break;
        }
        h = (2.0 * shift.abs()).clamp(PARABOLIC_TOL, h);
    }
    (x, fx)
}

/// Refines a bracket into a candidate, or `NotConverged` when the minimum is
/// above the detection threshold.
pub fn refine(setup: &Setup, bracket: &Bracket) -> Result<MaassCandidate> {
    let (r, residual) = minimize_residual(setup, bracket);
    let threshold = setup.settings.threshold();
    if !(residual < threshold) {
        return Err(MaassError::NotConverged {
            r,
            residual,
            threshold,
        });
    }
    let sol = setup.solve_at(r)?;
    Ok(MaassCandidate::from_solution(setup, &sol))
}

/// Scans `[r_near - width, r_near + width]` finely and refines the deepest
/// minimum.
pub fn refine_near(setup: &Setup, r_near: f64, width: f64) -> Result<MaassCandidate> {
    let step = width / 10.0;
    let s = scan(setup, r_near - width, r_near + width, step)?;
    let best = s
        .grid
        .windows(3)
        .filter(|w| w[1].1 < w[0].1 && w[1].1 <= w[2].1)
        .min_by(|u, v| u[1].1.total_cmp(&v[1].1))
        .map(|w| Bracket {
            lo: w[0].0,
            mid: w[1].0,
            hi: w[2].0,
            residual: w[1].1,
        })
        .ok_or_else(|| MaassError::NotConverged {
            r: r_near,
            residual: s.median,
            threshold: setup.settings.threshold(),
        })?;
    refine(setup, &best)
}

/// Scan plus refinement of every bracket; spurious brackets are discarded.
pub fn census(setup: &Setup, r_lo: f64, r_hi: f64, step: f64) -> Result<Vec<MaassCandidate>> {
    let s = scan(setup, r_lo, r_hi, step)?;
    let mut found: Vec<MaassCandidate> = s
        .brackets
        .par_iter()
        .filter_map(|b| refine(setup, b).ok())
        .collect();
    found.sort_by(|a, b| a.r.total_cmp(&b.r));
    found.dedup_by(|a, b| (a.r - b.r).abs() < 1e-5);
    Ok(found)
}

fn parity_samples(y0: f64) -> Vec<UpperHalfPoint> {
    (0..8)
        .map(|j| UpperHalfPoint::new(0.03 + 0.06 * j as f64, 1.5 * y0).expect("positive height"))
        .collect()
}

fn classify_parity_of(group: &GroupPresentation, sol: &SolveResult) -> Parity {
    if !group.has_mirror_symmetry() {
        return Parity::None;
    }
    let bessel = BesselEvaluator::new(sol.r);
    let mut even_defect: f64 = 0.0;
    let mut odd_defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for z in parity_samples(sol.y0) {
        let (Ok(f), Ok(g)) = (sol.evaluate(&bessel, z), sol.evaluate(&bessel, z.mirror())) else {
            return Parity::None;
        };
        even_defect = even_defect.max((f - g).norm());
        odd_defect = odd_defect.max((f + g).norm());
        scale = scale.max(f.norm()).max(g.norm());
    }
    if even_defect <= PARITY_TOL * scale {
        Parity::Even
    } else if odd_defect <= PARITY_TOL * scale {
        Parity::Odd
    } else {
        Parity::None
    }
}

/// Parity under `x -> -x` from function values, `None` off the mirror locus.
pub fn classify_parity(group: &GroupPresentation, candidate: &MaassCandidate) -> Parity {
    let sol = SolveResult {
        r: candidate.r,
        m: candidate.m,
        n_points: candidate.n_points,
        y0: candidate.y0,
        coefficients: candidate.coefficients.clone(),
        constant_term: None,
        residual: candidate.residual,
        residual_vector: nalgebra::DVector::zeros(0),
        normalization: candidate.normalization,
        rank: 0,
    };
    classify_parity_of(group, &sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automorphy::SolverSettings;
    use crate::group::gamma222;

    fn setup5(r_max: f64) -> Setup {
        let chi = Character::new(Family::Gamma222, vec![-1, 1, -1]).unwrap();
        let g = gamma222(5.0, 0.0).unwrap().with_character(chi).unwrap();
        Setup::new(g, SolverSettings::default(), r_max).unwrap()
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid_points(11.0, 12.0, 0.005);
        assert_eq!(g.len(), 201);
        assert!((g[200] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn finds_level_five_anchor() {
        let s = setup5(5.5);
        let c = refine_near(&s, 5.436, 0.01).unwrap();
        assert!((c.r - 5.436180461).abs() < 1e-5, "{}", c.r);
        assert!(c.residual < 1e-4);
        assert!(c.lambda() > 0.25);
        assert_eq!(c.parity, Parity::Even);
    }

    #[test]
    fn false_bracket_is_rejected() {
        let s = setup5(6.5);
        let b = Bracket {
            lo: 6.20,
            mid: 6.21,
            hi: 6.22,
            residual: 1.0,
        };
        assert!(matches!(refine(&s, &b), Err(MaassError::NotConverged { .. })));
    }

    #[test]
    fn no_parity_off_the_mirror_locus() {
        let s = setup5(5.5);
        let c = refine_near(&s, 5.436, 0.01).unwrap();
        let g = gamma222(5.0, 0.05).unwrap();
        assert_eq!(classify_parity(&g, &c), Parity::None);
    }
}
