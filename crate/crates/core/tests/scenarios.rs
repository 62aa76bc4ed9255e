//! Worked scenarios beyond the acceptance criteria.

use maass_core::automorphy::{Setup, SolverSettings};
use maass_core::deform::{continue_curve, multiplicity_check, probe_directions, StepPolicy, Termination, TrackOptions};
use maass_core::group::{gamma222, Character, Family};
use maass_core::search::{refine_near, MaassCandidate, Parity};
use maass_core::verify::{eisenstein_discrimination, verify};

fn level5_anchor() -> (Setup, MaassCandidate) {
    let chi = Character::new(Family::Gamma222, vec![-1, 1, -1]).unwrap();
    let g = gamma222(5.0, 0.0).unwrap().with_character(chi).unwrap();
    let s = Setup::new(g, SolverSettings::default(), 5.5).unwrap();
    let c = refine_near(&s, 5.436, 0.01).unwrap();
    (s, c)
}

fn double_point() -> MaassCandidate {
    let s = Setup::new(gamma222(5.53487, 0.0).unwrap(), SolverSettings::default(), 11.6).unwrap();
    refine_near(&s, 11.547, 0.01).unwrap()
}

#[test]
fn off_spectrum_solution_fails_verification() {
    let (s, c) = level5_anchor();
    let tol = 100.0 * c.eps;
    assert!(verify(&c, 20, false).unwrap().passes(tol));
    let sol = s.solve_at(c.r + 0.05).unwrap();
    let fake = MaassCandidate::from_solution(&s, &sol);
    let rep = verify(&fake, 20, false).unwrap();
    assert!(rep.hecke_defect.unwrap() > 1e-2, "{rep:?}");
    assert!(!rep.passes(tol));
}

#[test]
fn point_sets_agree_away_from_the_spectrum() {
    let (s, _) = level5_anchor();
    let e = eisenstein_discrimination(&s, 5.2).unwrap();
    assert!(e.point_set_variation < 1e-4, "{e:?}");
}

#[test]
fn double_point_form_is_simple() {
    let c = double_point();
    assert!((c.r - 11.54705).abs() < 1e-4, "{}", c.r);
    assert_eq!(c.parity, Parity::Odd);
    let m = multiplicity_check(&c).unwrap();
    assert!(m.is_simple(), "{m:?}");
}

#[test]
#[ignore = "long-running"]
fn double_point_has_two_tangent_lines() {
    let c = double_point();
    let probe = probe_directions(&c, 24).unwrap();
    assert_eq!(probe.lines.len(), 2, "{:?}", probe.lines);
}

/// The lower odd form near `a = 4.83` has `a_1` passing through zero; the
/// tracker must renormalize rather than stall.
#[test]
fn tracking_through_a_vanishing_first_coefficient() {
    let s = Setup::new(gamma222(4.83, 0.0).unwrap(), SolverSettings::default(), 15.0).unwrap();
    let c = refine_near(&s, 14.5459, 0.002).unwrap();
    let options = TrackOptions {
        policy: StepPolicy {
            initial: 0.001,
            min: 1e-6,
            max: 0.01,
        },
        max_steps: 60,
        bounds: Some(vec![(4.815, 5.05), (-1.0, 1.0)]),
        transverse: Some(1),
    };
    let curve = continue_curve(&c, &[-1.0, 0.0], &[0, 1], &options).unwrap();
    assert_eq!(curve.termination, Termination::Boundary);
    assert!(curve.points.iter().any(|p| p.normalization != 1));
    let end = curve.points.last().unwrap();
    assert!(end.params[0] < 4.822 && end.r < 14.54, "{:?} {}", end.params, end.r);
}
