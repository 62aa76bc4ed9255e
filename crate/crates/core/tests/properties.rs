use maass_core::automorphy::choose_points;
use maass_core::group::{gamma222, gamma2222, validate, Character, Family};
use maass_core::io::{CandidateRecord, Provenance};
use maass_core::search::{MaassCandidate, Parity};
use maass_core::{BesselEvaluator, Moebius};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gamma222_relations(a in 4.2f64..12.0, b in -0.3f64..0.3) {
        let g = gamma222(a, b);
        prop_assume!(g.is_ok());
        let v = validate(&g.unwrap());
        prop_assert!(v.max_deviation < 1e-10, "{v:?}");
    }

    #[test]
    fn gamma2222_relations(
        a in -0.45f64..-0.2,
        b in -0.05f64..0.05,
        c in 0.2f64..0.45,
        d in 0.08f64..0.3,
    ) {
        let g = gamma2222(a, b, c, d);
        prop_assume!(g.is_ok());
        let v = validate(&g.unwrap());
        prop_assert!(v.max_deviation < 1e-10, "{v:?}");
    }

    /// `x -> -x` carries `Γ(a,b)` onto `Γ(a,-b)`: `g_1 -> h_1`,
    /// `g_3 -> T⁻¹ h_3 T`, and `g_2 = g_1 T⁻¹ g_3` follows.
    #[test]
    fn reflected_group_is_the_mirror_image(a in 4.5f64..10.0, b in 0.001f64..0.2) {
        let (g, h) = (gamma222(a, b), gamma222(a, -b));
        prop_assume!(g.is_ok() && h.is_ok());
        let (g, h) = (g.unwrap(), h.unwrap());
        let mirror = |m: &Moebius| {
            let [p, q, r, s] = m.entries();
            Moebius::new(p, -q, -r, s).unwrap()
        };
        let t = Moebius::t();
        prop_assert!(mirror(&g.elliptic[0]).approx_eq(&h.elliptic[0], 1e-10));
        let h3 = t.inverse().compose(&h.elliptic[2]).compose(&t);
        prop_assert!(mirror(&g.elliptic[2]).approx_eq(&h3, 1e-10));
        let g2 = g.elliptic[0].compose(&t.inverse()).compose(&g.elliptic[2]);
        prop_assert!(g2.approx_eq(&g.elliptic[1], 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Trapezoid and Gauss-Legendre on the shifted contour agree. In the
    /// oscillatory range `u < R` the comparison scale is the envelope
    /// `√(2π) (R² - u²)^{-1/4}` of the scaled function.
    #[test]
    fn bessel_dual_quadrature(r in 0.0f64..20.0, u in 0.01f64..60.0) {
        let ev = BesselEvaluator::new(r);
        let a = ev.k_scaled_uncached(u).unwrap();
        let b = ev.k_scaled_gauss(u).unwrap();
        let envelope = if u < r {
            (2.0 * std::f64::consts::PI).sqrt() / (r * r - u * u).max(1.0).powf(0.25)
        } else {
            0.0
        };
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(envelope), "R={r} u={u}: {a} {b}");
    }

    #[test]
    fn record_round_trip(
        r in 0.1f64..30.0,
        params in proptest::collection::vec(-1.0f64..1.0, 4),
        coeffs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 6),
        residual in 0.0f64..1.0,
        y0 in 1e-3f64..0.5,
    ) {
        let m = coeffs.len() / 2;
        let mut coefficients: Vec<Complex64> = coeffs.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        coefficients.insert(m, Complex64::new(0.0, 0.0));
        let c = MaassCandidate {
            family: Family::Gamma2222,
            params,
            character: Character::new(Family::Gamma2222, vec![-1, 1, -1, 1]).unwrap(),
            r,
            coefficients,
            residual,
            parity: Parity::Odd,
            m,
            n_points: 4 * m + 7,
            y0,
            eps: 1e-6,
            normalization: 1,
        };
        let rec = CandidateRecord::new(&c, None, Provenance::new("2026-01-01T00:00:00Z"));
        let line = serde_json::to_string(&rec).unwrap();
        let back: CandidateRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(back.candidate().unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every stored word maps its collocation point to the stored image.
    #[test]
    fn words_match_images(a in 4.5f64..8.0, b in -0.1f64..0.1, m in 6usize..16) {
        let g = gamma222(a, b);
        prop_assume!(g.is_ok());
        let g = g.unwrap();
        let y0 = 0.8 * g.min_elliptic_height();
        let coll = choose_points(&g, m, 1.25, y0).unwrap();
        for (z, im) in coll.points.iter().zip(&coll.images) {
            let w = im.word.matrix(&g).apply(*z);
            prop_assert!((w.x() - im.point.x()).abs() < 1e-9 && (w.y() - im.point.y()).abs() < 1e-9);
            prop_assert!(im.point.y() > y0);
        }
    }
}
