use std::f64::consts::PI;

use gbx_core::error::GbxError;
use gbx_core::field::ScalarField;
use gbx_core::frames::{frame_from_metric, Frame};
use gbx_core::geom::{ChartedSurface, Metric};
use gbx_core::scenarios;
use gbx_core::sections::{angle_in_frame, blowup_loop, SectionKind, SectionSpec, SingularPoint};
use gbx_core::winding::{
    index_at, loop_winding, total_index, unwrap_angles, HalfInteger, IndexOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(a: &str, b: &str) -> [ScalarField; 2] {
    [
        ScalarField::parse(a).unwrap(),
        ScalarField::parse(b).unwrap(),
    ]
}

/// `(cos nφ, sin nφ)` around `(π, π)` on the flat torus chart.
fn example_one(n: i32) -> SectionSpec {
    SectionSpec::vector_field(
        vec![pair(
            &format!("cos({n}*atan2(v - pi, u - pi))"),
            &format!("sin({n}*atan2(v - pi, u - pi))"),
        )],
        vec![SingularPoint::new("torus", PI, PI, 1)],
    )
}

fn opts(n: usize) -> IndexOptions {
    IndexOptions {
        loop_samples: n,
        ..Default::default()
    }
}

#[test]
fn example_one_family_is_exact() {
    let torus = ChartedSurface::flat_torus();
    for n in -3..=3 {
        let s = example_one(n);
        for samples in [512, 4096] {
            for radius in [0.1, 0.05] {
                let p = SingularPoint::new("torus", PI, PI, 1).with_radius(radius);
                let r = index_at(&s, 0, &torus, &p, &opts(samples)).unwrap();
                assert_eq!(r.index, HalfInteger::from_integer(n as i64));
            }
        }
    }
}

#[test]
fn fake_singularity_has_index_zero() {
    let torus = ChartedSurface::flat_torus();
    let s = SectionSpec::vector_field(vec![pair("1", "0")], vec![]);
    let p = SingularPoint::new("torus", 1.0, 2.0, 1);
    assert_eq!(
        index_at(&s, 0, &torus, &p, &opts(512)).unwrap().index,
        HalfInteger::ZERO
    );
}

#[test]
fn half_angle_line_field_has_index_one_half() {
    let torus = ChartedSurface::flat_torus();
    let s = SectionSpec::line_field(
        vec![pair(
            "cos(atan2(v - pi, u - pi)/2)",
            "sin(atan2(v - pi, u - pi)/2)",
        )],
        vec![SingularPoint::new("torus", PI, PI, 1)],
    );
    let r = index_at(&s, 0, &torus, &s.singular_points[0], &opts(512)).unwrap();
    assert_eq!(r.index, HalfInteger::from_halves(1));
    assert!(r.max_step < PI / 4.0);
}

#[test]
fn reversed_loops_negate_the_index() {
    let torus = ChartedSurface::flat_torus();
    for n in [-2, 1, 3] {
        let s = example_one(n);
        let lp = blowup_loop(&s.singular_points[0], &torus.charts[0], 512).unwrap();
        let (fwd, _) = loop_winding(&s, 0, &torus, &lp, 6).unwrap();
        let (bwd, _) = loop_winding(&s, 0, &torus, &lp.reversed(), 6).unwrap();
        assert_eq!(bwd, -fwd);
    }
}

#[test]
fn coarse_loops_are_refined() {
    let torus = ChartedSurface::flat_torus();
    let s = example_one(5);
    let p = &s.singular_points[0];
    // 16 samples step 1.96 rad per sample for a winding of 5, past the refinement threshold
    let r = index_at(&s, 0, &torus, p, &opts(16)).unwrap();
    assert_eq!(r.index, HalfInteger::from_integer(5));
    assert!(r.refinements > 0 && r.loop_samples > 16);
    let capped = IndexOptions {
        loop_samples: 16,
        max_refinements: 0,
        check_stability: true,
    };
    let err = index_at(&s, 0, &torus, p, &capped).unwrap_err();
    assert_eq!(err.to_string(), "loop under-resolved at point i=1");
}

#[test]
fn nearby_undeclared_zero_makes_the_index_unstable() {
    let torus = ChartedSurface::flat_torus();
    // zeros at (π, π) and (π + 0.07, π): the r = 0.1 loop sees both, r/2 only one
    let s = SectionSpec::vector_field(
        vec![pair(
            "(u - pi)*(u - pi - 0.07) - (v - pi)^2",
            "(v - pi)*(2*(u - pi) - 0.07)",
        )],
        vec![SingularPoint::new("torus", PI, PI, 1)],
    );
    let err = index_at(&s, 0, &torus, &s.singular_points[0], &opts(512)).unwrap_err();
    assert!(
        matches!(err, GbxError::IndexUnstable { label: 1, .. }),
        "{err}"
    );
}

#[test]
fn index_is_the_same_in_either_chart() {
    let sphere = ChartedSurface::round_sphere();
    let s = scenarios::load("sphere-dipole")
        .unwrap()
        .unwrap()
        .section()
        .unwrap();
    let north = SingularPoint::new("north", -1.0, 0.0, 7);
    let south = SingularPoint::new("south", -1.0, 0.0, 7);
    let a = index_at(&s, 0, &sphere, &north, &opts(512)).unwrap().index;
    let b = index_at(&s, 0, &sphere, &south, &opts(512)).unwrap().index;
    assert_eq!(a, b);
    assert_eq!(a, HalfInteger::from_integer(1));

    let lf = scenarios::load("sphere-linefield")
        .unwrap()
        .unwrap()
        .section()
        .unwrap();
    // w = 2 in the south chart is z = 1/2 in the north chart
    let a = index_at(
        &lf,
        0,
        &sphere,
        &SingularPoint::new("north", 0.5, 0.0, 1),
        &opts(512),
    )
    .unwrap()
    .index;
    let b = index_at(
        &lf,
        0,
        &sphere,
        &SingularPoint::new("south", 2.0, 0.0, 1),
        &opts(512),
    )
    .unwrap()
    .index;
    assert_eq!(a, b);
    assert_eq!(a, HalfInteger::from_halves(1));
}

#[test]
fn bundled_indices_do_not_depend_on_radius_or_samples() {
    for name in [
        "sphere-hopf",
        "bumpy-sphere",
        "sphere-linefield",
        "sphere-dipole",
        "torus-saddles",
        "torus-linefield",
    ] {
        let cfg = scenarios::load(name).unwrap().unwrap();
        let (surface, section) = (cfg.surface().unwrap(), cfg.section().unwrap());
        let reference = total_index(&section, &surface, &opts(512)).unwrap();
        let dense = total_index(&section, &surface, &opts(4096)).unwrap();
        let halved = SectionSpec {
            singular_points: section
                .singular_points
                .iter()
                .map(|p| SingularPoint {
                    radius: p.radius / 2.0,
                    ..p.clone()
                })
                .collect(),
            ..section.clone()
        };
        let small = total_index(&halved, &surface, &opts(512)).unwrap();
        let idx = |t: &(HalfInteger, Vec<gbx_core::winding::IndexResult>)| {
            t.1.iter().map(|r| r.index).collect::<Vec<_>>()
        };
        assert_eq!(idx(&reference), idx(&dense), "{name}");
        assert_eq!(idx(&reference), idx(&small), "{name}");
    }
}

#[test]
fn line_field_of_a_vector_field_has_the_same_index() {
    let sphere = ChartedSurface::round_sphere();
    let rot = vec![pair("-v", "u"), pair("v", "-u")];
    let pts = vec![
        SingularPoint::new("north", 0.0, 0.0, 1),
        SingularPoint::new("south", 0.0, 0.0, 2),
    ];
    let vf = SectionSpec::vector_field(rot.clone(), pts.clone());
    let lf = SectionSpec::line_field(rot, pts);
    let (a, ta) = total_index(&vf, &sphere, &opts(512)).unwrap();
    let (b, tb) = total_index(&lf, &sphere, &opts(512)).unwrap();
    assert_eq!(a, b);
    for (x, y) in ta.iter().zip(&tb) {
        assert_eq!(x.index, y.index);
        assert!(y.index.is_integer());
    }
}

#[test]
fn torus_saddle_indices() {
    let cfg = scenarios::load("torus-saddles").unwrap().unwrap();
    let (total, table) =
        total_index(&cfg.section().unwrap(), &cfg.surface().unwrap(), &opts(512)).unwrap();
    let got: Vec<i64> = table.iter().map(|r| r.index.halves()).collect();
    assert_eq!(got, vec![2, -2, -2, 2]);
    assert_eq!(total, HalfInteger::ZERO);
}

proptest! {
    #[test]
    fn unwrapped_winding_is_a_multiple_of_the_period(
        k in -4i32..=4, noise in prop::collection::vec(-0.2f64..0.2, 64), line in any::<bool>(),
    ) {
        let period = if line { PI } else { 2.0 * PI };
        let n = noise.len();
        let samples: Vec<f64> = (0..n)
            .map(|j| (k as f64 * period * j as f64 / n as f64 + noise[j] * period / 4.0).rem_euclid(period))
            .collect();
        if let Ok((d, _)) = unwrap_angles(&samples, period) {
            prop_assert!((d - (d / period).round() * period).abs() < 1e-9);
        }
    }

    #[test]
    fn rotating_the_frame_shifts_the_angle(
        beta in -3.0f64..3.0, x in -2.0f64..2.0, y in -2.0f64..2.0,
        a in 0.2f64..5.0, c in 0.2f64..5.0, t in -0.9f64..0.9,
    ) {
        prop_assume!(x.hypot(y) > 1e-3);
        let g = [a, t * (a * c).sqrt(), c];
        let f = frame_from_metric(g);
        let rotated: Frame = f.rotated(beta);
        let p0 = angle_in_frame(SectionKind::VectorField, [x, y], g, &f).unwrap();
        let p1 = angle_in_frame(SectionKind::VectorField, [x, y], g, &rotated).unwrap();
        let d = (p1 - p0 + beta).rem_euclid(2.0 * PI);
        prop_assert!(d < 1e-10 || 2.0 * PI - d < 1e-10);
    }

    #[test]
    fn line_angles_ignore_the_sign(x in -2.0f64..2.0, y in -2.0f64..2.0, a in 0.2f64..5.0, c in 0.2f64..5.0) {
        prop_assume!(x.hypot(y) > 1e-3);
        let g = [a, 0.1 * (a * c).sqrt(), c];
        let f = frame_from_metric(g);
        let p = angle_in_frame(SectionKind::LineField, [x, y], g, &f).unwrap();
        let q = angle_in_frame(SectionKind::LineField, [-x, -y], g, &f).unwrap();
        let d = (p - q).rem_euclid(PI);
        prop_assert!(d < 1e-12 || PI - d < 1e-12);
    }
}

#[test]
fn frame_covariance_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = scenarios::load("bumpy-sphere").unwrap().unwrap();
    let surface = s.surface().unwrap();
    let section = s.section().unwrap();
    for _ in 0..100 {
        let (u, v): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if u.hypot(v) < 0.2 {
            continue;
        }
        let beta: f64 = rng.gen_range(-PI..PI);
        let g = surface.charts[0].eval_metric(u, v).unwrap();
        let f = frame_from_metric(g);
        let val = section.value(0, 0, u, v);
        let p0 = angle_in_frame(SectionKind::VectorField, val, g, &f).unwrap();
        let p1 = angle_in_frame(SectionKind::VectorField, val, g, &f.rotated(beta)).unwrap();
        let d = (p1 - p0 + beta).rem_euclid(2.0 * PI);
        assert!(d < 1e-10 || 2.0 * PI - d < 1e-10);
    }
}

#[test]
fn sign_flips_on_a_region_leave_line_indices_alone() {
    let torus = ChartedSurface::torus("flat", Metric::flat());
    // sign of sin(3u + 2v) flips the representative on alternating bands
    let sign = "(sin(3*u + 2*v)/abs(sin(3*u + 2*v)))";
    let base = SectionSpec::line_field(
        vec![pair(
            "cos(atan2(v - pi, u - pi)/2)",
            "sin(atan2(v - pi, u - pi)/2)",
        )],
        vec![SingularPoint::new("torus", PI, PI, 1)],
    );
    let flipped = SectionSpec::line_field(
        vec![pair(
            &format!("{sign}*cos(atan2(v - pi, u - pi)/2)"),
            &format!("{sign}*sin(atan2(v - pi, u - pi)/2)"),
        )],
        base.singular_points.clone(),
    );
    let a = index_at(&base, 0, &torus, &base.singular_points[0], &opts(512)).unwrap();
    let b = index_at(&flipped, 0, &torus, &base.singular_points[0], &opts(512)).unwrap();
    assert_eq!(a.index, b.index);
    let lp = blowup_loop(&base.singular_points[0], &torus.charts[0], 512).unwrap();
    for &(u, v) in &lp.samples {
        let x = base.angle(0, &torus, 0, u, v).unwrap();
        let y = flipped.angle(0, &torus, 0, u, v).unwrap();
        let d = (x - y).rem_euclid(PI);
        assert!(d < 1e-12 || PI - d < 1e-12);
    }
}
