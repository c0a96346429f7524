use std::fs;
use std::path::Path;

use gbx_cli::{run, EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERICAL, EXIT_PASS};
use serde_json::Value;
use tempfile::TempDir;

fn gbx(args: &[&str]) -> i32 {
    run(std::iter::once("gbx").chain(args.iter().copied()))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn winding_five(max_refinements: u32) -> String {
    format!(
        r#"{{
  "name": "coarse-loop",
  "surface": {{"gluing": "torus-periodic", "euler_char": 0, "charts": [{{"id": "torus", "metric": "flat"}}]}},
  "section": {{
    "kind": "vector-field",
    "components": [["cos(5*atan2(v - pi, u - pi))", "sin(5*atan2(v - pi, u - pi))"]],
    "singular_points": [{{"chart": "torus", "u": 3.141592653589793, "v": 3.141592653589793, "label": 1}}]
  }},
  "run": {{"identity": "hopf", "resolution": 32, "loop_samples": 16, "max_refinements": {max_refinements}}}
}}"#
    )
}

#[test]
fn torus_demo_reports_zero() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        gbx(&["demo", "run", "torus-flat", "--out", out.to_str().unwrap()]),
        EXIT_PASS
    );
    let r = read_json(&out);
    assert_eq!(r["schema"], "gbx_report_v1");
    assert_eq!(r["rhs"]["numerator"], 0);
    assert_eq!(r["lhs"].as_f64().unwrap(), 0.0);
    assert_eq!(r["config"]["name"], "torus-flat");
    assert!(r["metadata"]["timestamp"].is_string());
}

#[test]
fn sphere_demo_reports_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        gbx(&["demo", "run", "sphere-hopf", "--out", out.to_str().unwrap()]),
        EXIT_PASS
    );
    let r = read_json(&out);
    assert_eq!(
        (
            r["rhs"]["numerator"].as_i64(),
            r["rhs"]["denominator"].as_i64()
        ),
        (Some(2), Some(1))
    );
    assert!(r["residual"].as_f64().unwrap() < 1e-3);
    assert_eq!(r["points"].as_array().unwrap().len(), 2);
}

#[test]
fn capped_refinement_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("coarse.json");
    fs::write(&cfg, winding_five(0)).unwrap();
    assert_eq!(
        gbx(&["verify", "--config", cfg.to_str().unwrap()]),
        EXIT_NUMERICAL
    );
    fs::write(&cfg, winding_five(6)).unwrap();
    // refinement recovers the index, and the flat torus has no curvature
    // to balance the lone +5 point
    assert_eq!(
        gbx(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "/dev/null"
        ]),
        EXIT_FAIL
    );
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"name": "x", "surface": {"gluing": "torus-periodic"}, "bogus": 1}"#,
    )
    .unwrap();
    assert_eq!(
        gbx(&["verify", "--config", cfg.to_str().unwrap()]),
        EXIT_CONFIG
    );
    assert_eq!(
        gbx(&["verify", "--config", "/nonexistent/file.json"]),
        EXIT_CONFIG
    );
    assert_eq!(gbx(&["demo", "run", "no-such-demo"]), EXIT_CONFIG);
    assert_eq!(gbx(&["frobnicate"]), EXIT_CONFIG);
    let bad_expr = winding_five(6).replace("cos(5*", "cos(5**");
    fs::write(&cfg, bad_expr).unwrap();
    assert_eq!(
        gbx(&["verify", "--config", cfg.to_str().unwrap()]),
        EXIT_CONFIG
    );
}

#[test]
fn tolerance_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let code = gbx(&[
        "demo",
        "run",
        "sphere-hopf",
        "--tolerance",
        "1e-12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FAIL);
    let r = read_json(&out);
    assert_eq!(r["tolerance"].as_f64(), Some(1e-12));
    assert_eq!(r["config"]["run"]["tolerance"].as_f64(), Some(1e-12));
    assert_eq!(r["pass"], false);
}

#[test]
fn structure_command_runs_on_any_surface_scenario() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(&cfg, gbx_core::scenarios::source("bumpy-sphere").unwrap()).unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        gbx(&[
            "structure",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_PASS
    );
    let r = read_json(&out);
    assert_eq!(r["identity"], "structure");
    assert!(r["residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn cech_accepts_bare_documents_and_scenarios() {
    let dir = TempDir::new().unwrap();
    let scenario: Value =
        serde_json::from_str(gbx_core::scenarios::source("rp2-obstruction").unwrap()).unwrap();
    let bare = dir.path().join("rp2.json");
    fs::write(&bare, serde_json::to_string(&scenario["cech"]).unwrap()).unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        gbx(&[
            "cech",
            "--input",
            bare.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_PASS
    );
    let r = read_json(&out);
    assert_eq!(r["name"], "rp2");
    assert_eq!(r["obstruction"]["verdict"], "nontrivial");

    let full = dir.path().join("tetra.json");
    fs::write(
        &full,
        gbx_core::scenarios::source("tetra-obstruction").unwrap(),
    )
    .unwrap();
    assert_eq!(
        gbx(&[
            "cech",
            "--input",
            full.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_PASS
    );
    assert_eq!(read_json(&out)["obstruction"]["verdict"], "trivial");

    let mut broken = scenario["cech"].clone();
    broken["edges"][0]["matrix"] = serde_json::json!([[2.0, 0.0], [0.0, 1.0]]);
    fs::write(&bare, serde_json::to_string(&broken).unwrap()).unwrap();
    assert_eq!(
        gbx(&["cech", "--input", bare.to_str().unwrap()]),
        EXIT_CONFIG
    );
}

#[test]
fn dump_writes_curvature_and_loop_traces() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("dump");
    let o = out.to_str().unwrap();
    assert_eq!(
        gbx(&[
            "dump",
            "--demo",
            "sphere-linefield",
            "--out",
            o,
            "--resolution",
            "16"
        ]),
        EXIT_PASS
    );
    let curvature = fs::read_to_string(out.join("curvature.csv")).unwrap();
    let mut lines = curvature.lines();
    assert_eq!(lines.next(), Some("chart,u,v,k,area_density"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let k: f64 = cols[3].parse().unwrap();
        assert!((k - 1.0).abs() < 1e-6, "{line}");
    }
    for label in 1..=4 {
        let trace = fs::read_to_string(out.join(format!("loop_{label}.csv"))).unwrap();
        let rows: Vec<Vec<f64>> = trace
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 512);
        // a half-index point turns the line by about π over the loop
        let turn = rows.last().unwrap()[1] - rows[0][1];
        assert!((turn - std::f64::consts::PI).abs() < 0.1, "{turn}");
    }

    let w = dir.path().join("w");
    assert_eq!(
        gbx(&[
            "dump",
            "--demo",
            "whitney-coincident",
            "--out",
            w.to_str().unwrap()
        ]),
        EXIT_PASS
    );
    assert!(w.join("loop_1_f0.csv").exists() && w.join("loop_1_f1.csv").exists());
    assert_eq!(
        gbx(&[
            "dump",
            "--demo",
            "rp2-obstruction",
            "--out",
            w.to_str().unwrap()
        ]),
        EXIT_CONFIG
    );
}

#[test]
fn repeated_runs_differ_only_in_metadata() {
    let dir = TempDir::new().unwrap();
    let strip = |p: &Path| {
        let mut v = read_json(p);
        v.as_object_mut().unwrap().remove("metadata");
        serde_json::to_string(&v).unwrap()
    };
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for name in ["bumpy-sphere", "whitney-pair", "tetra-obstruction"] {
        assert_eq!(
            gbx(&["demo", "run", name, "--out", a.to_str().unwrap()]),
            EXIT_PASS
        );
        assert_eq!(
            gbx(&["demo", "run", name, "--out", b.to_str().unwrap()]),
            EXIT_PASS
        );
        assert_eq!(strip(&a), strip(&b), "{name}");
    }
}
