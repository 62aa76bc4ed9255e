//! Following a form through the family.
//!
//! Existence of a cusp form is (generically) a codimension-one condition on
//! the group parameters, so a form at one point persists along a hypersurface
//! and `R` changes smoothly along it. A curve on that hypersurface is traced
//! by secant prediction and a two-variable correction in one transverse
//! parameter and `R`.

use nalgebra::{DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::automorphy::{
    assemble_with, homogeneous_singular_values, solve, Column, Mode, Setup, SolverSettings,
};
use crate::bessel::BesselEvaluator;
use crate::error::{MaassError, Result};
use crate::group::{build_with_character, Family};
use crate::search::{minimize_residual, Bracket, MaassCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial: 0.005,
            min: 1e-5,
            max: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Boundary,
    Lost,
    MaxSteps,
    ClosedLoop,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Boundary => "boundary",
            Termination::Lost => "lost",
            Termination::MaxSteps => "max_steps",
            Termination::ClosedLoop => "closed_loop",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationCurve {
    pub family: Family,
    pub free_axes: Vec<usize>,
    pub points: Vec<MaassCandidate>,
    pub step_policy: StepPolicy,
    pub termination: Termination,
}

impl DeformationCurve {
    /// `(params[axis], R)` for every point.
    pub fn profile(&self, axis: usize) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.params[axis], p.r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOptions {
    pub policy: StepPolicy,
    pub max_steps: usize,
    /// Box `[lo, hi]` per parameter; leaving it ends the curve at `Boundary`.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Fixed transverse axis; by default the free axis least aligned with
    /// the current direction.
    pub transverse: Option<usize>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            policy: StepPolicy::default(),
            max_steps: 200,
            bounds: None,
            transverse: None,
        }
    }
}

const LM_ITERATIONS: usize = 15;
/// Largest change of the normalized `a_n`, `n ≤ COEFF_CONTINUITY_N`, between
/// consecutive curve points.
pub const COEFF_CONTINUITY: f64 = 0.1;
const COEFF_CONTINUITY_N: i64 = 10;
const NORMALIZATION_CHOICES: i64 = 3;

/// Result of one corrector solve.
#[derive(Debug, Clone)]
pub struct Correction {
    pub params: Vec<f64>,
    pub r: f64,
    /// Residual of a fresh solve at the corrected point.
    pub residual: f64,
    pub iterations: usize,
    pub setup: Setup,
}

/// Settings that keep the truncation of `start` while tracking it.
pub fn tracking_settings(start: &MaassCandidate) -> SolverSettings {
    SolverSettings {
        eps: start.eps,
        m: Some(start.m),
        ..SolverSettings::default()
    }
}

/// Fresh collocation for a candidate.
pub fn setup_for(candidate: &MaassCandidate) -> Result<Setup> {
    let group = build_with_character(candidate.family, &candidate.params, &candidate.character)?;
    Setup::new(group, tracking_settings(candidate), candidate.r)
}

struct FrozenResidual<'a> {
    base: &'a Setup,
    params: Vec<f64>,
    transverse: usize,
    normalization: i64,
}

impl FrozenResidual<'_> {
    /// Least-squares residual vector divided by `‖b‖₂`, which removes the
    /// dependence on how the right-hand side happens to be scaled.
    fn eval(&self, u: Vector2<f64>) -> Result<DVector<f64>> {
        let mut p = self.params.clone();
        p[self.transverse] = u[0];
        let s = self.base.with_params(&p)?;
        let bessel = BesselEvaluator::new(u[1]);
        let sys = assemble_with(&s.group, u[1], &s.coll, &bessel, Mode::Cusp, Some(self.normalization), None)?;
        let norm = sys.rhs.norm();
        Ok(solve(&sys)?.residual_vector / norm)
    }
}

/// Levenberg-Marquardt on the relative residual vector over
/// `(params[transverse], R)` with the other parameters held at `params`.
/// The pullback words are those of `base`, so the residual is smooth in both
/// unknowns.
fn lm_frozen(
    base: &Setup,
    params: &[f64],
    r: f64,
    transverse: usize,
    normalization: i64,
) -> Result<(Vector2<f64>, usize)> {
    let f = FrozenResidual {
        base,
        params: params.to_vec(),
        transverse,
        normalization,
    };
    let mut u = Vector2::new(params[transverse], r);
    let mut fu = f.eval(u)?;
    let mut cost = fu.norm_squared();
    let mut mu = 1e-4;
    let mut iterations = 0;
    let h = Vector2::new(1e-6, 1e-6);
    'outer: for _ in 0..LM_ITERATIONS {
        iterations += 1;
        let mut jac = nalgebra::DMatrix::<f64>::zeros(fu.len(), 2);
        for k in 0..2 {
            let mut v = u;
            v[k] += h[k];
            let fv = f.eval(v)?;
            jac.set_column(k, &((fv - &fu) / h[k]));
        }
        let jtj: Matrix2<f64> = (jac.transpose() * &jac).fixed_view::<2, 2>(0, 0).into_owned();
        let g = Vector2::from_iterator((jac.transpose() * &fu).iter().copied());
        loop {
            let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * mu;
            let Some(delta) = damped.lu().solve(&(-g)) else {
                break 'outer;
            };
            let trial = u + delta;
            let accepted = match f.eval(trial) {
                Ok(ft) => {
                    let c = ft.norm_squared();
                    if c < cost {
                        let small = delta[0].abs() < 1e-11 && delta[1].abs() < 1e-10;
                        let flat = cost - c < 1e-12 * cost;
                        u = trial;
                        fu = ft;
                        cost = c;
                        mu = (mu / 3.0).max(1e-12);
                        if small || flat {
                            break 'outer;
                        }
                        true
                    } else {
                        false
                    }
                }
                Err(MaassError::Domain(_)) | Err(MaassError::InvalidPoint(_)) => false,
                Err(e) => return Err(e),
            };
            if accepted {
                break;
            }
            mu *= 4.0;
            if mu > 1e8 {
                break 'outer;
            }
        }
    }
    Ok((u, iterations))
}

/// Corrector: rounds of [`lm_frozen`], rebuilding the collocation at the
/// current iterate between rounds. Words chosen for a distant member of the
/// family can leave images below `y0`, where the truncated expansion is no
/// longer accurate, so the frozen residual is only trusted locally.
pub fn correct(base: &Setup, params: &[f64], r: f64, transverse: usize) -> Result<Correction> {
    correct_normalized(base, params, r, transverse, 1)
}

/// [`correct`] with `a_{normalization} = 1` in place of `a_1 = 1`.
pub fn correct_normalized(
    base: &Setup,
    params: &[f64],
    r: f64,
    transverse: usize,
    normalization: i64,
) -> Result<Correction> {
    let mut p = params.to_vec();
    let mut r = r;
    let mut local = base.with_params(&p)?;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for round in 0..6 {
        let (u, it) = lm_frozen(&local, &p, r, transverse, normalization)?;
        iterations += it;
        let moved = (u[0] - p[transverse]).abs().max((u[1] - r).abs());
        p[transverse] = u[0];
        r = u[1];
        let group = build_with_character(base.group.family, &p, &base.group.character)?;
        local = Setup::new(group, base.settings.clone(), r)?;
        residual = local.residual_normalized(r, normalization);
        if round > 0 && moved < 1e-9 {
            break;
        }
        if round > 0 && residual > 100.0 * base.settings.threshold() {
            break; // wandered into another valley
        }
    }
    Ok(Correction {
        params: p,
        r,
        residual,
        iterations,
        setup: local,
    })
}

/// Moves `start` to `target` along a straight line in the non-transverse
/// parameters, correcting `(params[transverse], R)` at each of `steps`
/// stations. The transverse entry of `target` is ignored.
pub fn continue_to(
    start: &MaassCandidate,
    target: &[f64],
    transverse: usize,
    steps: usize,
) -> Result<MaassCandidate> {
    let mut setup = setup_for(start)?;
    let mut prev: Option<(Vec<f64>, f64)> = None;
    let mut cur = (start.params.clone(), start.r);
    let threshold = setup.settings.threshold();
    for k in 1..=steps.max(1) {
        let t = k as f64 / steps.max(1) as f64;
        let mut p: Vec<f64> = start
            .params
            .iter()
            .zip(target)
            .map(|(s, e)| s + t * (e - s))
            .collect();
        let mut r = cur.1;
        p[transverse] = cur.0[transverse];
        if let Some((pp, pr)) = &prev {
            // secant in the transverse coordinate and R
            p[transverse] = 2.0 * cur.0[transverse] - pp[transverse];
            r = 2.0 * cur.1 - pr;
        }
        let c = correct(&setup, &p, r, transverse)?;
        if !(c.residual < threshold) {
            return Err(MaassError::NotConverged {
                r: c.r,
                residual: c.residual,
                threshold,
            });
        }
        prev = Some(cur);
        cur = (c.params.clone(), c.r);
        setup = c.setup;
    }
    let sol = setup.solve_at(cur.1)?;
    Ok(MaassCandidate::from_solution(&setup, &sol))
}

/// Multi-start correction at fixed non-transverse parameters: the corrector
/// is seeded at `starts` values of the transverse parameter spread over
/// `center ± half_width`, and the converged point whose `R` is closest to
/// `r` is kept. Used when the target is too far from the known form for a
/// single corrector solve.
pub fn correct_seeded(
    start: &MaassCandidate,
    target: &[f64],
    transverse: usize,
    half_width: f64,
    starts: usize,
) -> Result<MaassCandidate> {
    let base_setup = setup_for(start)?;
    let threshold = base_setup.settings.threshold();
    let center = start.params[transverse];
    let seeds: Vec<f64> = (0..starts.max(1))
        .map(|k| {
            if starts <= 1 {
                center
            } else {
                center - half_width + 2.0 * half_width * k as f64 / (starts - 1) as f64
            }
        })
        .collect();
    let mut p0 = target.to_vec();
    p0[transverse] = center;
    let group = build_with_character(start.family, &p0, &start.character)?;
    let local = Setup::new(group, base_setup.settings.clone(), start.r)?;
    let found: Vec<Correction> = seeds
        .par_iter()
        .filter_map(|&seed| {
            let mut p = target.to_vec();
            p[transverse] = seed;
            correct(&local, &p, start.r, transverse).ok()
        })
        .filter(|c| c.residual < threshold)
        .collect();
    let best = found
        .into_iter()
        .min_by(|x, y| (x.r - start.r).abs().total_cmp(&(y.r - start.r).abs()))
        .ok_or(MaassError::NotConverged {
            r: start.r,
            residual: f64::INFINITY,
            threshold,
        })?;
    let sol = best.setup.solve_at(best.r)?;
    Ok(MaassCandidate::from_solution(&best.setup, &sol))
}

fn free_distance(a: &[f64], b: &[f64], free: &[usize]) -> f64 {
    free.iter().map(|&i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

fn in_bounds(p: &[f64], bounds: &Option<Vec<(f64, f64)>>) -> bool {
    bounds
        .as_ref()
        .map_or(true, |b| p.iter().zip(b).all(|(v, (lo, hi))| v >= lo && v <= hi))
}

/// Traces a curve from `start`, leaving along `direction` (a unit vector
/// supported on `free_axes`).
pub fn continue_curve(
    start: &MaassCandidate,
    direction: &[f64],
    free_axes: &[usize],
    options: &TrackOptions,
) -> Result<DeformationCurve> {
    continue_curve_with(start, direction, free_axes, options, |_| Ok(()))
}

/// [`continue_curve`], calling `on_point` for every accepted point (the start
/// included) as soon as it is found.
pub fn continue_curve_with(
    start: &MaassCandidate,
    direction: &[f64],
    free_axes: &[usize],
    options: &TrackOptions,
    mut on_point: impl FnMut(&MaassCandidate) -> Result<()>,
) -> Result<DeformationCurve> {
    let n = start.params.len();
    if direction.len() != n || free_axes.is_empty() || free_axes.iter().any(|&i| i >= n) {
        return Err(MaassError::Domain("direction or free axes do not match the family".into()));
    }
    let norm = free_axes.iter().map(|&i| direction[i].powi(2)).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(MaassError::Domain("direction has no component on the free axes".into()));
    }
    let policy = options.policy;
    let mut setup = setup_for(start)?;
    let threshold = setup.settings.threshold();
    let mut points = vec![start.clone()];
    on_point(start)?;
    let mut n0 = pick_normalization(start, start.normalization);
    // unit tangent in (free params, R), R-component per unit parameter step
    let mut tangent: Vec<f64> = direction.iter().map(|d| d / norm).collect();
    let mut dr_ds = 0.0;
    let mut step = policy.initial;
    let mut streak = 0;
    let termination = loop {
        if points.len() > options.max_steps {
            break Termination::MaxSteps;
        }
        let last = points.last().expect("nonempty").clone();
        let transverse = options.transverse.unwrap_or_else(|| {
            *free_axes
                .iter()
                .min_by(|&&i, &&j| tangent[i].abs().total_cmp(&tangent[j].abs()))
                .expect("nonempty")
        });
        let mut first_try = true;
        let accepted = loop {
            let pred: Vec<f64> = (0..n).map(|i| last.params[i] + step * tangent[i]).collect();
            let r_pred = last.r + step * dr_ds;
            if !in_bounds(&pred, &options.bounds) {
                break None;
            }
            match correct_normalized(&setup, &pred, r_pred, transverse, n0) {
                Ok(c)
                    if c.residual < threshold
                        && free_distance(&c.params, &last.params, free_axes) <= policy.max * 1.5
                        && (c.r - last.r).abs()
                            <= 50.0 * free_distance(&c.params, &last.params, free_axes).max(1e-12) =>
                {
                    break Some(c);
                }
                Ok(_) | Err(MaassError::NotConverged { .. }) | Err(MaassError::RankDeficiency { .. }) => {}
                Err(MaassError::Domain(_)) | Err(MaassError::InvalidPoint(_)) => break None,
                Err(e) => return Err(e),
            }
            first_try = false;
            step *= 0.5;
            if step < policy.min {
                break None;
            }
        };
        let Some(c) = accepted else {
            break if step < policy.min { Termination::Lost } else { Termination::Boundary };
        };
        if !in_bounds(&c.params, &options.bounds) {
            break Termination::Boundary;
        }
        let ds = free_distance(&c.params, &last.params, free_axes);
        tangent = (0..n)
            .map(|i| if free_axes.contains(&i) { (c.params[i] - last.params[i]) / ds } else { 0.0 })
            .collect();
        dr_ds = (c.r - last.r) / ds;
        let sol = c.setup.solve_normalized(c.r, n0)?;
        let point = MaassCandidate::from_solution(&c.setup, &sol);
        if branch_agreement_in(&point, &last, COEFF_CONTINUITY_N, n0) > COEFF_CONTINUITY {
            // landed on a neighbouring form
            step *= 0.5;
            streak = 0;
            if step < policy.min {
                break Termination::Lost;
            }
            continue;
        }
        n0 = pick_normalization(&point, n0);
        on_point(&point)?;
        points.push(point);
        setup = c.setup;
        if first_try {
            streak += 1;
            if streak >= 3 {
                step = (step * 1.5).min(policy.max);
                streak = 0;
            }
        } else {
            streak = 0;
        }
        if points.len() > 10 {
            let p = points.last().expect("nonempty");
            let d = free_distance(&p.params, &start.params, free_axes);
            if d.hypot(p.r - start.r) < 2.0 * step {
                break Termination::ClosedLoop;
            }
        }
    };
    Ok(DeformationCurve {
        family: start.family,
        free_axes: free_axes.to_vec(),
        points,
        step_policy: policy,
        termination,
    })
}

/// Smallest residual over `R` near `r0` at the given parameters, using the
/// words of `base`.
fn best_residual_near(base: &Setup, params: &[f64], r0: f64, width: f64) -> (f64, f64) {
    let Ok(s) = base.with_params(params) else {
        return (r0, f64::INFINITY);
    };
    let b = Bracket {
        lo: r0 - width,
        mid: r0,
        hi: r0 + width,
        residual: f64::NAN,
    };
    minimize_residual(&s, &b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    /// Angles in `[0, π)` of the distinct tangent lines.
    pub lines: Vec<f64>,
    /// Accepted directions in `[0, 2π)`.
    pub directions: Vec<f64>,
    /// `(angle, best residual)` for every sampled direction.
    pub profile: Vec<(f64, f64)>,
}

impl ProbeResult {
    pub fn count(&self) -> usize {
        self.lines.len()
    }
}

/// Radius of the probing circle.
pub const PROBE_RADIUS: f64 = 1e-3;

/// Tries a step of [`PROBE_RADIUS`] in `samples` directions of the
/// `(a, b)` plane and groups the directions in which the form survives into
/// tangent lines.
pub fn probe_directions(candidate: &MaassCandidate, samples: usize) -> Result<ProbeResult> {
    if candidate.params.len() != 2 || samples < 8 {
        return Err(MaassError::Domain("probing needs a two-parameter family and ≥ 8 samples".into()));
    }
    let base = setup_for(candidate)?;
    let threshold = base.settings.threshold();
    let width = 50.0 * PROBE_RADIUS;
    let at = |phi: f64| -> f64 {
        let p = [
            candidate.params[0] + PROBE_RADIUS * phi.cos(),
            candidate.params[1] + PROBE_RADIUS * phi.sin(),
        ];
        best_residual_near(&base, &p, candidate.r, width).1
    };
    let angles: Vec<f64> = (0..samples).map(|j| 2.0 * PI * j as f64 / samples as f64).collect();
    let values: Vec<f64> = angles.par_iter().map(|&phi| at(phi)).collect();
    let profile: Vec<(f64, f64)> = angles.iter().copied().zip(values.iter().copied()).collect();

    let d_phi = 2.0 * PI / samples as f64;
    let mut directions = Vec::new();
    for j in 0..samples {
        let (prev, next) = (values[(j + samples - 1) % samples], values[(j + 1) % samples]);
        if !(values[j] <= prev && values[j] < next) {
            continue;
        }
        // golden section in the angle
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (angles[j] - d_phi, angles[j] + d_phi);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (at(c), at(d));
        while b - a > 1e-4 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = at(d);
            }
        }
        let (phi, val) = if fc < fd { (c, fc) } else { (d, fd) };
        if val < threshold {
            directions.push(phi.rem_euclid(2.0 * PI));
        }
    }
    let mut lines: Vec<f64> = Vec::new();
    for &phi in &directions {
        let l = phi.rem_euclid(PI);
        let close = |m: &f64| {
            let diff = (l - m).rem_euclid(PI);
            diff.min(PI - diff) < 2.0 * d_phi
        };
        if !lines.iter().any(close) {
            lines.push(l);
        }
    }
    Ok(ProbeResult {
        lines,
        directions,
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub min_gap: f64,
    pub location: f64,
    pub window: (f64, f64),
}

fn interpolate(profile: &[(f64, f64)], x: f64) -> f64 {
    let i = profile.partition_point(|p| p.0 < x).clamp(1, profile.len() - 1);
    let (x0, y0) = profile[i - 1];
    let (x1, y1) = profile[i];
    if x1 == x0 {
        y0
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

fn sorted_profile(curve: &DeformationCurve, axis: usize) -> Vec<(f64, f64)> {
    let mut p = curve.profile(axis);
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p
}

/// Minimum of `|R₁ - R₂|` over the common range of `axis`.
pub fn gap_profile(c1: &DeformationCurve, c2: &DeformationCurve, axis: usize) -> Result<Gap> {
    let (p1, p2) = (sorted_profile(c1, axis), sorted_profile(c2, axis));
    if p1.len() < 2 || p2.len() < 2 {
        return Err(MaassError::NoOverlap);
    }
    let lo = p1[0].0.max(p2[0].0);
    let hi = p1[p1.len() - 1].0.min(p2[p2.len() - 1].0);
    if !(lo < hi) {
        return Err(MaassError::NoOverlap);
    }
    let n = 400;
    let (min_gap, location) = (0..=n)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            ((interpolate(&p1, x) - interpolate(&p2, x)).abs(), x)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty grid");
    Ok(Gap {
        min_gap,
        location,
        window: (lo, hi),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityReport {
    /// Smallest singular values of the homogeneous system, ascending.
    pub singular_values: Vec<f64>,
    /// Complex dimension of the numerical null space.
    pub multiplicity: usize,
    /// Residual with `a_1 = 0`, `a_2 = 1`; small only if a second,
    /// independent form (or one with vanishing `a_1`) exists.
    pub second_solution_residual: f64,
    pub threshold: f64,
}

impl MultiplicityReport {
    pub fn is_simple(&self) -> bool {
        self.multiplicity <= 1 && self.second_solution_residual >= self.threshold
    }
}

/// Each complex null vector of the system gives two real ones.
pub fn multiplicity_from_singular_values(sv: &[f64], tol: f64) -> usize {
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s < tol * top).count() / 2
}

pub fn multiplicity_check(candidate: &MaassCandidate) -> Result<MultiplicityReport> {
    let setup = setup_for(candidate)?;
    let threshold = setup.settings.threshold();
    let bessel = BesselEvaluator::new(candidate.r);
    let sv = homogeneous_singular_values(&setup.group, candidate.r, &setup.coll, &bessel)?;
    let multiplicity = multiplicity_from_singular_values(&sv, threshold);
    let sys = assemble_with(&setup.group, candidate.r, &setup.coll, &bessel, Mode::Cusp, Some(2), None)?;
    let pinned = sys.pin(Column::Re(1), 0.0)?.pin(Column::Im(1), 0.0)?;
    let second_solution_residual = solve(&pinned).map(|s| s.residual).unwrap_or(f64::INFINITY);
    Ok(MultiplicityReport {
        singular_values: sv.into_iter().take(8).collect(),
        multiplicity,
        second_solution_residual,
        threshold,
    })
}

/// Largest difference of `a_n / a_1`, `1 ≤ n ≤ n_max`, between two candidates
/// (the limits of two branches meeting at a point).
pub fn branch_agreement(c1: &MaassCandidate, c2: &MaassCandidate, n_max: i64) -> f64 {
    branch_agreement_in(c1, c2, n_max, 1)
}

/// [`branch_agreement`] with both coefficient sequences divided by `a_{n0}`.
pub fn branch_agreement_in(c1: &MaassCandidate, c2: &MaassCandidate, n_max: i64, n0: i64) -> f64 {
    let (s1, s2) = (c1.coeff(n0), c2.coeff(n0));
    (1..=n_max)
        .map(|n| (c1.coeff(n) / s1 - c2.coeff(n) / s2).norm())
        .fold(0.0, f64::max)
}

/// Normalizing index for the next solve: stays at `current` unless
/// `|a_current|` has dropped below half of the largest of `|a_1|, |a_2|, |a_3|`.
pub fn pick_normalization(c: &MaassCandidate, current: i64) -> i64 {
    let top = (c.m as i64).min(NORMALIZATION_CHOICES);
    let best = (1..=top)
        .max_by(|&i, &j| c.coeff(i).norm().total_cmp(&c.coeff(j).norm()))
        .unwrap_or(1);
    if (1..=top).contains(&current) && c.coeff(current).norm() >= 0.5 * c.coeff(best).norm() {
        current
    } else {
        best
    }
}

/// Least-squares fit of `y - y₀ = α b² + γ b⁴`; returns `(α, γ)`.
pub fn fit_even_quartic(samples: &[(f64, f64)], y0: f64) -> (f64, f64) {
    let (mut s44, mut s46, mut s66, mut t4, mut t6) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(b, y) in samples {
        let (b2, b4) = (b * b, b * b * b * b);
        s44 += b2 * b2;
        s46 += b2 * b4;
        s66 += b4 * b4;
        t4 += b2 * (y - y0);
        t6 += b4 * (y - y0);
    }
    let det = s44 * s66 - s46 * s46;
    ((t4 * s66 - t6 * s46) / det, (s44 * t6 - s46 * t4) / det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::Parity;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn normalization_moves_off_a_vanishing_coefficient() {
        let with = |a: [f64; 3]| {
            let mut coefficients = vec![Complex64::new(0.0, 0.0); 7];
            for (k, v) in a.iter().enumerate() {
                coefficients[4 + k] = Complex64::new(*v, 0.0);
                coefficients[2 - k] = Complex64::new(-*v, 0.0);
            }
            MaassCandidate {
                family: Family::Gamma222,
                params: vec![5.0, 0.0],
                character: crate::group::Character::trivial(Family::Gamma222),
                r: 11.0,
                coefficients,
                residual: 0.0,
                parity: Parity::Odd,
                m: 3,
                n_points: 19,
                y0: 0.1,
                eps: 1e-6,
                normalization: 1,
            }
        };
        assert_eq!(pick_normalization(&with([1.0, 1.5, 0.2]), 1), 1);
        assert_eq!(pick_normalization(&with([0.4, 1.0, 0.2]), 1), 2);
        assert_eq!(pick_normalization(&with([0.4, 1.0, 1.1]), 2), 2);
        let (c1, c2) = (with([1.0, 2.0, 3.0]), with([2.0, 4.0, 6.0]));
        assert!(branch_agreement_in(&c1, &c2, 3, 1) < 1e-15);
        assert!(branch_agreement_in(&c1, &c2, 3, 3) < 1e-15);
    }

    #[test]
    fn gap_of_identical_curves_is_zero() {
        let mk = |shift: f64| DeformationCurve {
            family: Family::Gamma222,
            free_axes: vec![0, 1],
            points: (0..5)
                .map(|k| MaassCandidate {
                    family: Family::Gamma222,
                    params: vec![5.0 + 0.01 * k as f64, 0.0],
                    character: crate::group::Character::trivial(Family::Gamma222),
                    r: 11.0 + 0.1 * k as f64 + shift,
                    coefficients: vec![],
                    residual: 0.0,
                    parity: Parity::Odd,
                    m: 0,
                    n_points: 0,
                    y0: 0.1,
                    eps: 1e-6,
                    normalization: 1,
                })
                .collect(),
            step_policy: StepPolicy::default(),
            termination: Termination::MaxSteps,
        };
        let g = gap_profile(&mk(0.0), &mk(0.0), 0).unwrap();
        assert_eq!(g.min_gap, 0.0);
        let g = gap_profile(&mk(0.0), &mk(0.25), 0).unwrap();
        assert!((g.min_gap - 0.25).abs() < 1e-12);
        let mut far = mk(0.0);
        for p in &mut far.points {
            p.params[0] += 1.0;
        }
        assert_eq!(gap_profile(&mk(0.0), &far, 0), Err(MaassError::NoOverlap));
    }

    #[test]
    fn synthetic_rank_two() {
        // 4 real null directions = 2 complex ones
        let a = DMatrix::from_fn(30, 10, |i, j| {
            if j < 6 { ((i * i * 7 + j * j * j * 13 + i * j * 5) % 17) as f64 } else { 0.0 }
        });
        let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
        sv.sort_by(|x, y| x.total_cmp(y));
        assert_eq!(multiplicity_from_singular_values(&sv, 1e-8), 2);
    }

    #[test]
    fn quartic_fit_recovers_coefficients() {
        let pts: Vec<(f64, f64)> = (-10..=10)
            .map(|k| {
                let b = 0.002 * k as f64;
                (b, 5.0 + 66.7 * b * b - 2.1e4 * b.powi(4))
            })
            .collect();
        let (alpha, gamma) = fit_even_quartic(&pts, 5.0);
        assert!((alpha - 66.7).abs() < 1e-6 && (gamma + 2.1e4).abs() < 1e-3);
    }
}
