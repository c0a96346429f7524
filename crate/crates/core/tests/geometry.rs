use std::f64::consts::PI;

use gbx_core::field::ScalarField;
use gbx_core::frames::{
    blend_vertical_form, circle_vertical_form, frame_from_metric, projective_alpha, BumpWeights,
    DerivativeOptions, FrameConnection, CIRCLE_NORMALIZATION, PROJECTIVE_NORMALIZATION,
};
use gbx_core::geom::{integrate_2form, transition_map, ChartedSurface, Gluing, Metric};
use gbx_core::scenarios;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bumpy() -> ChartedSurface {
    scenarios::load("bumpy-sphere")
        .unwrap()
        .unwrap()
        .surface()
        .unwrap()
}

proptest! {
    #[test]
    fn sphere_transition_is_an_involution(r in 0.41f64..2.4, phi in 0.0f64..(2.0 * PI)) {
        let (u, v) = (r * phi.cos(), r * phi.sin());
        let t = transition_map(Gluing::SphereStereographicPair, 0, u, v).unwrap();
        let back = transition_map(Gluing::SphereStereographicPair, 1, t.point.0, t.point.1).unwrap();
        prop_assert!((back.point.0 - u).abs() < 1e-12 && (back.point.1 - v).abs() < 1e-12);
        let j = t.jacobian;
        prop_assert!(j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0);
        // Jacobians of inverse maps multiply to the identity
        let k = back.jacobian;
        let prod = [
            [k[0][0] * j[0][0] + k[0][1] * j[1][0], k[0][0] * j[0][1] + k[0][1] * j[1][1]],
            [k[1][0] * j[0][0] + k[1][1] * j[1][0], k[1][0] * j[0][1] + k[1][1] * j[1][1]],
        ];
        prop_assert!((prod[0][0] - 1.0).abs() < 1e-10 && prod[0][1].abs() < 1e-10);
        prop_assert!(prod[1][0].abs() < 1e-10 && (prod[1][1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gram_schmidt_is_orthonormal_and_oriented(
        a in 0.1f64..10.0, c in 0.1f64..10.0, t in -0.95f64..0.95,
    ) {
        let b = t * (a * c).sqrt();
        let g = [a, b, c];
        let f = frame_from_metric(g);
        let inner = |x: [f64; 2], y: [f64; 2]| g[0] * x[0] * y[0] + g[1] * (x[0] * y[1] + x[1] * y[0]) + g[2] * x[1] * y[1];
        prop_assert!((inner(f.e1, f.e1) - 1.0).abs() < 1e-12);
        prop_assert!((inner(f.e2, f.e2) - 1.0).abs() < 1e-12);
        prop_assert!(inner(f.e1, f.e2).abs() < 1e-12);
        prop_assert!(f.e1[0] * f.e2[1] - f.e1[1] * f.e2[0] > 0.0);
    }

    #[test]
    fn connection_is_invariant_under_constant_scaling(c in 0.2f64..20.0, u in -1.5f64..1.5, v in -1.5f64..1.5) {
        let base = bumpy();
        let scaled = ChartedSurface::sphere("scaled", base.charts[0].metric.scaled(c), base.charts[1].metric.scaled(c));
        let opts = DerivativeOptions::finite_difference();
        let (a, b) = (FrameConnection::new(&base, opts), FrameConnection::new(&scaled, opts));
        let (ga, gb) = (a.connection(0, u, v).unwrap(), b.connection(0, u, v).unwrap());
        prop_assert!((ga[0] - gb[0]).abs() < 1e-8 && (ga[1] - gb[1]).abs() < 1e-8);
    }
}

#[test]
fn analytic_and_difference_modes_agree_on_bumpy_sphere() {
    let s = bumpy();
    let a = FrameConnection::new(&s, DerivativeOptions::default());
    let b = FrameConnection::new(&s, DerivativeOptions::finite_difference());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (u, v) = (rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
        for chart in 0..2 {
            let (ga, gb) = (
                a.connection(chart, u, v).unwrap(),
                b.connection(chart, u, v).unwrap(),
            );
            assert!((ga[0] - gb[0]).abs() < 1e-8 && (ga[1] - gb[1]).abs() < 1e-8);
            let (ka, kb) = (
                a.curvature(chart, u, v).unwrap(),
                b.curvature(chart, u, v).unwrap(),
            );
            assert!((ka - kb).abs() < 1e-4, "{ka} vs {kb}");
        }
    }
}

#[test]
fn total_curvature_is_metric_independent() {
    // Gauss–Bonnet oracle: both spheres integrate K dσ to 4π.
    for s in [ChartedSurface::round_sphere(), bumpy()] {
        let conn = FrameConnection::new(&s, DerivativeOptions::default());
        let total = integrate_2form(&s, &conn.curvature_density_fields(), 256).unwrap();
        assert!((total - 4.0 * PI).abs() < 4e-3 * PI, "{total}");
    }
}

#[test]
fn sheared_torus_has_zero_total_curvature() {
    let m = Metric::General {
        g11: ScalarField::parse("2 + sin(u)*cos(v)").unwrap(),
        g12: ScalarField::parse("0.3*sin(u+v)").unwrap(),
        g22: ScalarField::parse("1.5 + 0.4*cos(2*v)").unwrap(),
    };
    let t = ChartedSurface::torus("shear", m);
    t.validate().unwrap();
    let conn = FrameConnection::new(&t, DerivativeOptions::default());
    let total = integrate_2form(&t, &conn.curvature_density_fields(), 96).unwrap();
    assert!(total.abs() < 1e-6, "{total}");
}

#[test]
fn blended_circle_form_has_unit_fiber_integral() {
    let s = bumpy();
    let conn = FrameConnection::new(&s, DerivativeOptions::default());
    let forms = [
        circle_vertical_form(&conn, CIRCLE_NORMALIZATION),
        circle_vertical_form(&conn, CIRCLE_NORMALIZATION),
    ];
    let blend = blend_vertical_form(
        &s,
        &forms,
        BumpWeights::CosineTaper {
            inner: 0.8,
            outer: 1.25,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let r: f64 = rng.gen_range(0.0..2.3);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let i = blend
            .fiber_integral(r * phi.cos(), r * phi.sin(), 64)
            .unwrap();
        assert!((i - 1.0).abs() < 1e-12, "{i}");
    }
}

#[test]
fn blended_projective_form_matches_chart_form() {
    let s = bumpy();
    let conn = FrameConnection::new(&s, DerivativeOptions::default());
    let forms = [
        projective_alpha(&conn, PROJECTIVE_NORMALIZATION),
        projective_alpha(&conn, PROJECTIVE_NORMALIZATION),
    ];
    let blend = blend_vertical_form(
        &s,
        &forms,
        BumpWeights::CosineTaper {
            inner: 0.8,
            outer: 1.25,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let r: f64 = rng.gen_range(0.5..2.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let psi: f64 = rng.gen_range(0.0..PI);
        let (u, v) = (r * phi.cos(), r * phi.sin());
        let a = blend.eval(u, v, psi).unwrap();
        let b = forms[0].eval(0, u, v, psi).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-6, "{a:?} vs {b:?}");
        }
        assert!((blend.fiber_integral(u, v, 32).unwrap() - 0.5).abs() < 1e-12);
    }
}
