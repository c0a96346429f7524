//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use gbx_core::cech::{
    build_cocycle, check_cocycle, coboundary, mat_mul, obstruction_class, quarter_turn_lifts,
    rotation_lifts, solve_coboundary, LiftAssignment, Nerve, Obstruction, Z2Cochain,
};
use gbx_core::config::{Outcome, ScenarioConfig};
use gbx_core::field::ScalarField;
use gbx_core::frames::{
    DerivativeOptions, FormKind, FrameConnection, CIRCLE_NORMALIZATION, PROJECTIVE_NORMALIZATION,
};
use gbx_core::geom::ChartedSurface;
use gbx_core::scenarios;
use gbx_core::sections::{SectionSpec, SingularPoint};
use gbx_core::verify::{
    deformation_invariance_check, normalized_curvature_integral, structure_check_for,
    VerificationReport, VerifyOptions,
};
use gbx_core::winding::{index_at, HalfInteger, IndexOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn scenario(name: &str) -> ScenarioConfig {
    scenarios::load(name).expect("bundled").expect("parses")
}

fn verification(cfg: &ScenarioConfig) -> Result<VerificationReport, String> {
    match cfg.run().map_err(|e| e.to_string())? {
        Outcome::Verification(r) => Ok(*r),
        Outcome::Cech(_) => Err(format!("{} is not a verification scenario", cfg.name)),
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> (T, Duration) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    pool.install(|| {
        let t = Instant::now();
        let out = f();
        (out, t.elapsed())
    })
}

fn exact(r: &VerificationReport, num: i64, den: i64) -> bool {
    r.rhs.numerator == num && r.rhs.denominator == den
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn classical_sphere() -> Verdict {
    let (r, t) = single_threaded(|| verification(&scenario("sphere-hopf")));
    let r = r?;
    let err = (r.lhs - 2.0).abs();
    check(
        exact(&r, 2, 1)
            && err < 1e-3
            && r.parameters.resolution == 256
            && t < Duration::from_secs(10),
        format!(
            "rhs={}/{} |lhs-2|={err:.3e} (< 1e-3) time={:.2}s (< 10s, 1 thread)",
            r.rhs.numerator,
            r.rhs.denominator,
            t.as_secs_f64()
        ),
    )
}

fn flat_torus() -> Verdict {
    let t = Instant::now();
    let r = verification(&scenario("torus-flat"))?;
    let t = t.elapsed();
    check(
        exact(&r, 0, 1) && r.lhs.abs() < 1e-9 && t < Duration::from_secs(2),
        format!(
            "rhs={} |lhs|={:.3e} (< 1e-9) time={:.3}s (< 2s)",
            r.rhs.numerator,
            r.lhs.abs(),
            t.as_secs_f64()
        ),
    )
}

fn metric_independence() -> Verdict {
    let cfg = scenario("bumpy-sphere");
    let r = verification(&cfg)?;
    let overlap = r
        .checks
        .iter()
        .find(|c| c.name == "overlap_consistency")
        .map(|c| c.value)
        .unwrap_or(f64::NAN);
    let surface = cfg.surface().map_err(|e| e.to_string())?;
    let conn = FrameConnection::new(&surface, DerivativeOptions::default());
    let residuals: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| normalized_curvature_integral(&conn, n).map(|l| (l - 2.0).abs()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let err = (r.lhs - 2.0).abs();
    check(
        exact(&r, 2, 1) && err < 1e-3 && overlap < 1e-9 && orders.iter().all(|o| (1.5..=2.5).contains(o)),
        format!(
            "rhs=2 |lhs-2|={err:.3e} overlap={overlap:.1e} residuals(64,128,256)={:.2e},{:.2e},{:.2e} orders={:.3},{:.3}",
            residuals[0], residuals[1], residuals[2], orders[0], orders[1]
        ),
    )
}

fn projective() -> Verdict {
    let r = verification(&scenario("sphere-linefield"))?;
    let halves = r.points.len() == 4
        && r.points
            .iter()
            .all(|p| p.index == HalfInteger::from_halves(1));
    let err = (r.lhs - 2.0).abs();
    let d = verification(&scenario("sphere-rotation-linefield"))?;
    let doubled = d.points.len() == 2
        && d.points
            .iter()
            .all(|p| p.index == HalfInteger::from_integer(1));
    check(
        halves && exact(&r, 2, 1) && err < 1e-3 && doubled && exact(&d, 2, 1) && d.pass,
        format!(
            "four 1/2 points: {halves}, rhs=2 |lhs-2|={err:.3e}; rotational line field: two index-1 points {doubled}, rhs={}",
            d.rhs.numerator
        ),
    )
}

fn structure() -> Verdict {
    let opts = VerifyOptions::default();
    let surfaces = [
        ChartedSurface::round_sphere(),
        ChartedSurface::flat_torus(),
        scenario("torus-saddles")
            .surface()
            .map_err(|e| e.to_string())?,
    ];
    let mut worst: f64 = 0.0;
    let mut worst_mixed: f64 = 0.0;
    let mut ok = opts.h_structure == 1e-3;
    for s in &surfaces {
        for (kind, n) in [
            (FormKind::Circle, CIRCLE_NORMALIZATION),
            (FormKind::Projective, PROJECTIVE_NORMALIZATION),
        ] {
            let r =
                structure_check_for("acceptance", s, kind, n, &opts).map_err(|e| e.to_string())?;
            let mixed = r
                .checks
                .iter()
                .find(|c| c.name == "mixed_components")
                .map(|c| c.value)
                .unwrap_or(f64::NAN);
            ok &= r.residual < 1e-5 && mixed < 1e-10;
            worst = worst.max(r.residual);
            worst_mixed = worst_mixed.max(mixed);
        }
    }
    check(ok, format!("max residual={worst:.3e} (< 1e-5) max mixed={worst_mixed:.3e} (< 1e-10), h=1e-3, sphere + two tori"))
}

fn whitney() -> Verdict {
    let pair = verification(&scenario("whitney-pair"))?;
    let coincident = verification(&scenario("whitney-coincident"))?;
    let hopf = verification(&scenario("sphere-hopf"))?;
    let single = verification(&scenario("whitney-single"))?;
    let identical = hopf.lhs.to_bits() == single.lhs.to_bits()
        && hopf.rhs == single.rhs
        && hopf.residual.to_bits() == single.residual.to_bits()
        && hopf.tolerance.to_bits() == single.tolerance.to_bits()
        && hopf.points == single.points
        && hopf.checks == single.checks;
    check(
        pair.pass && coincident.pass && pair.residual < 2e-3 && coincident.residual < 2e-3 && identical,
        format!(
            "disjoint residual={:.3e} coincident residual={:.3e} (< 2e-3); k=1 bit-identical to classical: {identical}",
            pair.residual, coincident.residual
        ),
    )
}

fn deformation() -> Verdict {
    let pair = |a: &str, b: &str| {
        [
            ScalarField::parse(a).unwrap(),
            ScalarField::parse(b).unwrap(),
        ]
    };
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for name in ["sphere-linefield", "torus-linefield"] {
        let cfg = scenario(name);
        let surface = cfg.surface().map_err(|e| e.to_string())?;
        let section = cfg.section().map_err(|e| e.to_string())?;
        for xi in [pair("0", "0"), pair("1", "0"), pair("sin(u)", "cos(v)")] {
            let r = deformation_invariance_check(
                name,
                &surface,
                &section,
                &[xi],
                &VerifyOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            let unchanged = r
                .checks
                .iter()
                .any(|c| c.name == "indices_unchanged" && c.pass);
            let delta = r
                .checks
                .iter()
                .find(|c| c.name == "residual_delta")
                .map(|c| c.value)
                .unwrap_or(f64::NAN);
            ok &= unchanged && delta < 1e-6;
            worst = worst.max(delta);
        }
    }
    check(ok, format!("indices unchanged for xi in {{0, (1,0), (sin u, cos v)}} on sphere and torus; max delta={worst:.3e} (< 1e-6)"))
}

fn index_exactness() -> Verdict {
    let torus = ChartedSurface::flat_torus();
    let mut runs = 0;
    for n in -3..=3 {
        let s = SectionSpec::vector_field(
            vec![[
                ScalarField::parse(&format!("cos({n}*atan2(v - pi, u - pi))")).unwrap(),
                ScalarField::parse(&format!("sin({n}*atan2(v - pi, u - pi))")).unwrap(),
            ]],
            vec![],
        );
        for samples in [512, 4096] {
            for r in [0.1, 0.05] {
                let p = SingularPoint::new("torus", PI, PI, 1).with_radius(r);
                let opts = IndexOptions {
                    loop_samples: samples,
                    ..Default::default()
                };
                let got = index_at(&s, 0, &torus, &p, &opts)
                    .map_err(|e| e.to_string())?
                    .index;
                if got != HalfInteger::from_integer(n) {
                    return Err(format!("n={n} N={samples} r={r}: got {got}"));
                }
                runs += 1;
            }
        }
    }
    Ok(format!(
        "{runs} runs, n in -3..3, N in {{512, 4096}}, r in {{0.1, 0.05}}: all exact"
    ))
}

fn coboundary_image(nerve: &Nerve) -> HashSet<Vec<u8>> {
    (0u64..1 << nerve.edges.len())
        .map(|bits| {
            let mut u = Z2Cochain::zero(nerve, 1);
            for (k, v) in u.values.iter_mut().enumerate() {
                *v = ((bits >> k) & 1) as u8;
            }
            coboundary(nerve, &u).values
        })
        .collect()
}

fn triangle_residual(nerve: &Nerve, lifts: &LiftAssignment) -> f64 {
    let mut worst: f64 = 0.0;
    for &[i, j, k] in &nerve.triangles {
        let p = mat_mul(
            &mat_mul(
                &lifts.get(nerve, i, j).unwrap(),
                &lifts.get(nerve, j, k).unwrap(),
            ),
            &lifts.get(nerve, k, i).unwrap(),
        );
        worst = worst
            .max((p[0][0] - 1.0).abs())
            .max(p[0][1].abs())
            .max(p[1][0].abs())
            .max((p[1][1] - 1.0).abs());
    }
    worst
}

fn cech() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut random_lifts = |nerve: &Nerve| {
        let theta: Vec<f64> = (0..nerve.vertices.len())
            .map(|_| rng.gen_range(-PI..PI))
            .collect();
        let signs: Vec<bool> = (0..nerve.edges.len()).map(|_| rng.gen()).collect();
        rotation_lifts(nerve, &theta, &signs)
    };
    let tetra = Nerve::tetrahedron(true);
    let cocycles = (0..100).all(|_| {
        build_cocycle(&tetra, &random_lifts(&tetra))
            .map(|z| check_cocycle(&z, &tetra))
            .unwrap_or(false)
    });

    let nerves = [
        Nerve::tetrahedron(true),
        Nerve::tetrahedron(false),
        Nerve::octahedron(),
    ];
    let mut enumerated = 0;
    let mut brute = true;
    for nerve in &nerves {
        let image = coboundary_image(nerve);
        for bits in 0u64..1 << nerve.triangles.len() {
            let mut z = Z2Cochain::zero(nerve, 2);
            for (k, v) in z.values.iter_mut().enumerate() {
                *v = ((bits >> k) & 1) as u8;
            }
            if !check_cocycle(&z, nerve) {
                continue;
            }
            enumerated += 1;
            brute &= match solve_coboundary(&z, nerve) {
                Ok(Some(u)) => {
                    image.contains(&z.values) && coboundary(nerve, &u).values == z.values
                }
                Ok(None) => !image.contains(&z.values),
                Err(_) => false,
            };
        }
    }

    let rp2 = Nerve::projective_plane();
    let twisted = quarter_turn_lifts(
        &rp2,
        &[0.1, 0.5, -0.3, 1.2, 2.0, -0.8],
        &[[0, 2], [0, 3], [1, 2], [1, 4], [3, 4]],
    );
    let mut cases: Vec<(Nerve, LiftAssignment)> = nerves
        .iter()
        .map(|n| (n.clone(), random_lifts(n)))
        .collect();
    cases.push((rp2.clone(), twisted));
    let mut gauge = true;
    let mut residual: f64 = 0.0;
    for (nerve, lifts) in &cases {
        let verdict = |l: &LiftAssignment| {
            build_cocycle(nerve, l)
                .and_then(|z| obstruction_class(&z, nerve, Some(l)))
                .map_err(|e| e.to_string())
        };
        let base = verdict(lifts)?;
        if let Obstruction::Trivial {
            corrected_lifts: Some(c),
            ..
        } = &base
        {
            let entries: Vec<_> = c.iter().map(|c| (c.i, c.j, c.matrix)).collect();
            let fixed =
                LiftAssignment::from_oriented(nerve, &entries).map_err(|e| e.to_string())?;
            residual = residual.max(triangle_residual(nerve, &fixed));
        }
        for e in 0..nerve.edges.len() {
            gauge &= verdict(&lifts.flipped(e))?.is_trivial() == base.is_trivial();
        }
    }
    check(
        cocycles && brute && gauge && residual < 1e-9,
        format!(
            "100 random lifts are cocycles: {cocycles}; solver = enumeration on {enumerated} cocycles of 3 nerves: {brute}; \
             verdict flip-invariant: {gauge}; corrected lift residual={residual:.1e} (< 1e-9)"
        ),
    )
}

fn determinism() -> Verdict {
    let mut count = 0;
    for name in scenarios::names() {
        let mut texts = Vec::new();
        for _ in 0..2 {
            let cfg = scenario(name);
            let outcome = cfg.run().map_err(|e| format!("{name}: {e}"))?;
            let config = serde_json::to_value(&cfg).map_err(|e| e.to_string())?;
            let mut doc = gbx_cli::report_document(&outcome, &config).map_err(|e| e.to_string())?;
            doc.as_object_mut()
                .ok_or("report is not an object")?
                .remove("metadata");
            texts.push(serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?);
        }
        if texts[0] != texts[1] {
            return Err(format!("{name}: reports differ"));
        }
        count += 1;
    }
    Ok(format!(
        "{count} bundled demos run twice: byte-identical apart from metadata"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("classical identity on the round sphere", classical_sphere),
        ("flat torus", flat_torus),
        (
            "metric independence and second-order convergence",
            metric_independence,
        ),
        ("projective identity with half-integer indices", projective),
        ("structure equations", structure),
        ("Whitney sums", whitney),
        ("deformation invariance", deformation),
        ("index exactness", index_exactness),
        ("Čech obstruction", cech),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{}] {title}: {detail}", k + 1);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
