//! `gbx` command-line front end.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 configuration or parse
//! error, 3 numerical failure. Errors print one line on stderr of the form
//! `gbx: error[<kind>]: <message>`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use gbx_core::cech::{run_document, CechDocument, Obstruction};
use gbx_core::config::{Outcome, Overrides, ScenarioConfig};
use gbx_core::error::{ErrorClass, GbxError, Result};
use gbx_core::frames::FrameConnection;
use gbx_core::geom::{ChartedSurface, Region};
use gbx_core::scenarios;
use gbx_core::sections::{blowup_loop, SectionKind};
use gbx_core::winding::{loop_angles, unwrap_trace};
use serde_json::{json, Map, Value};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "GBX_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "gbx",
    version,
    about = "Verify index/curvature identities for sections of surface bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the identity configured in a scenario file.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Check the structure equation of the vertical form on a scenario's surface.
    Structure {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Classify the lifting obstruction of a nerve with lifts or a cochain.
    Cech {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundled scenarios.
    Demo {
        #[command(subcommand)]
        action: DemoAction,
    },
    /// Write curvature samples and loop traces as CSV.
    Dump {
        #[arg(long, conflicts_with = "demo", required_unless_present = "demo")]
        config: Option<PathBuf>,
        /// Bundled scenario to dump instead of a config file.
        #[arg(long)]
        demo: Option<String>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Samples per axis of each chart's curvature grid.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long)]
        loop_samples: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum DemoAction {
    List,
    Run {
        name: String,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct RunFlags {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    loop_samples: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            resolution: self.resolution,
            loop_samples: self.loop_samples,
            tolerance: self.tolerance,
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => return report_error(&e),
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            GbxError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{raw}'"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| GbxError::Config(format!("thread pool: {e}")))
}

fn report_error(e: &GbxError) -> i32 {
    eprintln!(
        "gbx: error[{}]: {}",
        e.kind(),
        e.to_string().replace('\n', " ")
    );
    match e.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Verify { config, run } => {
            let cfg = load_config(&config, &run)?;
            finish(&cfg, cfg.run()?, run.out.as_deref())
        }
        Command::Structure { config, run } => {
            let cfg = load_config(&config, &run)?;
            finish(&cfg, cfg.run_structure()?, run.out.as_deref())
        }
        Command::Cech { input, out } => cech(&input, out.as_deref()),
        Command::Demo {
            action: DemoAction::List,
        } => {
            for name in scenarios::names() {
                let cfg = scenarios::load(name).expect("bundled")?;
                println!("{name}\t{}", cfg.description.unwrap_or_default());
            }
            Ok(EXIT_PASS)
        }
        Command::Demo {
            action: DemoAction::Run { name, run },
        } => {
            let source = scenarios::source(&name).ok_or_else(|| {
                let known: Vec<_> = scenarios::names().collect();
                GbxError::Config(format!(
                    "unknown demo '{name}'; known: {}",
                    known.join(", ")
                ))
            })?;
            let mut cfg = ScenarioConfig::parse(source)?;
            cfg.apply(run.overrides());
            finish(&cfg, cfg.run()?, run.out.as_deref())
        }
        Command::Dump {
            config,
            demo,
            out,
            resolution,
            loop_samples,
        } => {
            let cfg = match (config, demo) {
                (Some(path), _) => ScenarioConfig::parse(&read(&path)?)?,
                (None, Some(name)) => scenarios::load(&name)
                    .ok_or_else(|| GbxError::Config(format!("unknown demo '{name}'")))??,
                (None, None) => unreachable!("clap requires one"),
            };
            dump(&cfg, &out, resolution, loop_samples)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| GbxError::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path, flags: &RunFlags) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::parse(&read(path)?)?;
    cfg.apply(flags.overrides());
    Ok(cfg)
}

/// Report document: the outcome's fields, the resolved config under
/// `config`, and the run timestamp under `metadata`.
pub fn report_document(outcome: &Outcome, config: &Value) -> Result<Value> {
    let mut doc = match serde_json::to_value(outcome)? {
        Value::Object(map) => map,
        other => Map::from_iter([("report".to_string(), other)]),
    };
    doc.insert("config".into(), config.clone());
    doc.insert("metadata".into(), metadata());
    Ok(Value::Object(doc))
}

fn metadata() -> Value {
    json!({
        "timestamp": humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        "gbx_version": env!("CARGO_PKG_VERSION"),
    })
}

fn finish(cfg: &ScenarioConfig, outcome: Outcome, out: Option<&Path>) -> Result<i32> {
    let doc = report_document(&outcome, &serde_json::to_value(cfg)?)?;
    emit(&doc, out, &summary(&cfg.name, &outcome))?;
    Ok(if outcome.pass() { EXIT_PASS } else { EXIT_FAIL })
}

fn emit(doc: &Value, out: Option<&Path>, summary: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    match out {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| GbxError::Config(format!("cannot write {}: {e}", path.display())))?;
            println!("{summary}");
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// One-line human summary printed when the report goes to a file.
pub fn summary(name: &str, outcome: &Outcome) -> String {
    match outcome {
        Outcome::Verification(r) => {
            let rhs = if r.rhs.denominator == 1 {
                r.rhs.numerator.to_string()
            } else {
                format!("{}/{}", r.rhs.numerator, r.rhs.denominator)
            };
            let identity = serde_json::to_value(r.identity)
                .ok()
                .and_then(|v| v.as_str().map(String::from));
            format!(
                "{} {name} {} lhs={:.9} rhs={rhs} residual={:.3e} tolerance={:.1e}",
                if r.pass { "PASS" } else { "FAIL" },
                identity.unwrap_or_default(),
                r.lhs,
                r.residual,
                r.tolerance
            )
        }
        Outcome::Cech(c) => {
            let verdict = match c.obstruction {
                Obstruction::Trivial { .. } => "trivial",
                Obstruction::Nontrivial { .. } => "nontrivial",
            };
            format!(
                "DONE {name} cech verdict={verdict} cocycle={}",
                c.is_cocycle
            )
        }
    }
}

fn cech(input: &Path, out: Option<&Path>) -> Result<i32> {
    let text = read(input)?;
    let value: Value = serde_json::from_str(&text)?;
    // a scenario file with a `cech` block, or a bare nerve document
    let cfg = if value.get("cech").is_some() {
        ScenarioConfig::parse(&text)?
    } else {
        let name = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "cech".into());
        let doc = CechDocument::parse(&text)?;
        ScenarioConfig {
            name,
            description: None,
            surface: None,
            section: None,
            run: None,
            cech: Some(doc),
        }
    };
    let doc = cfg
        .cech
        .as_ref()
        .ok_or_else(|| GbxError::Config("input has no Čech document".into()))?;
    let outcome = Outcome::Cech(Box::new(run_document(&cfg.name, doc)?));
    finish(&cfg, outcome, out)
}

/// Writes `curvature.csv` and one `loop_<label>.csv` per singular point
/// (`loop_<label>_f<j>.csv` per factor for Whitney sections).
fn dump(
    cfg: &ScenarioConfig,
    out: &Path,
    resolution: usize,
    loop_samples: Option<usize>,
) -> Result<i32> {
    if cfg.is_cech() {
        return Err(GbxError::Config("dump needs a surface scenario".into()));
    }
    if resolution < 2 {
        return Err(GbxError::Config(
            "dump resolution must be at least 2".into(),
        ));
    }
    fs::create_dir_all(out)
        .map_err(|e| GbxError::Config(format!("cannot create {}: {e}", out.display())))?;
    let surface = cfg.surface()?;
    let opts = cfg.run.as_ref().map(|r| r.options()).unwrap_or_default();
    let conn = FrameConnection::new(&surface, opts.derivative);
    write(
        &out.join("curvature.csv"),
        &curvature_csv(&surface, &conn, resolution)?,
    )?;
    let mut written = 1;

    if cfg.section.is_some() {
        let section = cfg.section()?;
        section.validate(&surface)?;
        let n = loop_samples.unwrap_or(opts.index.loop_samples);
        let points = match section.kind {
            SectionKind::Whitney => section.union_points(&surface)?,
            _ => section.singular_points.clone(),
        };
        for p in &points {
            let chart = surface.chart(&p.chart)?;
            let lp = blowup_loop(p, chart, n)?;
            let phases = lp.phases();
            for j in 0..section.factor_count() {
                let psi = unwrap_trace(
                    &loop_angles(&section, j, &surface, &lp)?,
                    section.factor_kind().angle_period(),
                );
                let mut csv = String::from("phi,psi_unwrapped\n");
                for (phi, psi) in phases.iter().zip(&psi) {
                    let _ = writeln!(csv, "{phi:.17e},{psi:.17e}");
                }
                let file = if section.kind == SectionKind::Whitney {
                    format!("loop_{}_f{j}.csv", p.label)
                } else {
                    format!("loop_{}.csv", p.label)
                };
                write(&out.join(file), &csv)?;
                written += 1;
            }
        }
    }
    println!("wrote {written} files to {}", out.display());
    Ok(EXIT_PASS)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| GbxError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Cell-centred samples over each chart's own region.
fn curvature_csv(
    surface: &ChartedSurface,
    conn: &FrameConnection,
    resolution: usize,
) -> Result<String> {
    let mut csv = String::from("chart,u,v,k,area_density\n");
    for (c, chart) in surface.charts.iter().enumerate() {
        let (u0, u1, v0, v1) = match chart.own_region {
            Region::Rect(r) => (r.u_min, r.u_max, r.v_min, r.v_max),
            Region::Disk { center, radius } => (
                center.0 - radius,
                center.0 + radius,
                center.1 - radius,
                center.1 + radius,
            ),
        };
        let inside = |u: f64, v: f64| match chart.own_region {
            Region::Rect(_) => true,
            Region::Disk { center, radius } => (u - center.0).hypot(v - center.1) <= radius,
        };
        for i in 0..resolution {
            for j in 0..resolution {
                let u = u0 + (i as f64 + 0.5) * (u1 - u0) / resolution as f64;
                let v = v0 + (j as f64 + 0.5) * (v1 - v0) / resolution as f64;
                if !inside(u, v) {
                    continue;
                }
                let k = conn.curvature(c, u, v)?;
                let a = chart.area_density(u, v)?;
                let _ = writeln!(csv, "{},{u:.17e},{v:.17e},{k:.17e},{a:.17e}", chart.id);
            }
        }
    }
    Ok(csv)
}
