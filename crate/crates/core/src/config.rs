//! JSON scenario descriptions and the runner that turns them into reports.

use serde::{Deserialize, Serialize};

use crate::cech::{run_document, CechDocument, CechReport};
use crate::error::{GbxError, Result};
use crate::field::{GridField, ScalarField};
use crate::frames::{
    DerivativeMode, DerivativeOptions, FormKind, CIRCLE_NORMALIZATION, DEFAULT_H_G, DEFAULT_H_K,
    DEFAULT_H_STRUCTURE, PROJECTIVE_NORMALIZATION,
};
use crate::geom::{Chart, ChartedSurface, Gluing, Metric};
use crate::sections::{
    SectionKind, SectionSpec, SingularPoint, DEFAULT_EXCISION_RADIUS, DEFAULT_LOOP_SAMPLES,
};
use crate::verify::{
    deformation_invariance_check, structure_check_for, verify_hopf, verify_projective,
    verify_whitney, Identity, VerificationReport, VerifyOptions,
};
use crate::winding::{IndexOptions, DEFAULT_MAX_REFINEMENTS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldConfig {
    Number(f64),
    Expr(String),
    Grid { grid: GridConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub nu: usize,
    pub nv: usize,
    pub values: Vec<f64>,
}

impl FieldConfig {
    pub fn build(&self) -> Result<ScalarField> {
        match self {
            FieldConfig::Number(x) => Ok(ScalarField::constant(*x)),
            FieldConfig::Expr(s) => ScalarField::parse(s),
            FieldConfig::Grid { grid: g } => Ok(ScalarField::grid(GridField::new(
                g.u_range,
                g.v_range,
                g.nu,
                g.nv,
                g.values.clone(),
            )?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Flat,
    Conformal(FieldConfig),
    General {
        g11: FieldConfig,
        g12: FieldConfig,
        g22: FieldConfig,
    },
}

impl MetricConfig {
    pub fn build(&self) -> Result<Metric> {
        Ok(match self {
            MetricConfig::Flat => Metric::flat(),
            MetricConfig::Conformal(l) => Metric::Conformal(l.build()?),
            MetricConfig::General { g11, g12, g22 } => Metric::General {
                g11: g11.build()?,
                g12: g12.build()?,
                g22: g22.build()?,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub metric: MetricConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub gluing: Gluing,
    pub euler_char: i64,
    pub charts: Vec<ChartConfig>,
}

impl SurfaceConfig {
    pub fn build(&self, name: &str) -> Result<ChartedSurface> {
        self.build_with(name, None)
    }

    /// Builds the surface, optionally replacing every chart metric.
    fn build_with(&self, name: &str, metrics: Option<&[MetricConfig]>) -> Result<ChartedSurface> {
        let (expected_charts, chi, defaults): (usize, i64, &[&str]) = match self.gluing {
            Gluing::TorusPeriodic => (1, 0, &["torus"]),
            Gluing::SphereStereographicPair => (2, 2, &["north", "south"]),
        };
        if self.charts.len() != expected_charts {
            return Err(GbxError::Config(format!(
                "{:?} gluing needs {expected_charts} chart(s), got {}",
                self.gluing,
                self.charts.len()
            )));
        }
        if self.euler_char != chi {
            return Err(GbxError::Config(format!(
                "declared Euler characteristic {} does not match the gluing (expected {chi})",
                self.euler_char
            )));
        }
        if let Some(m) = metrics {
            if m.len() != expected_charts {
                return Err(GbxError::Config(format!(
                    "factor metric lists {} charts, expected {expected_charts}",
                    m.len()
                )));
            }
        }
        let mut charts = Vec::new();
        for (k, c) in self.charts.iter().enumerate() {
            let id = c.id.clone().unwrap_or_else(|| defaults[k].to_string());
            let metric = match metrics {
                Some(m) => m[k].build()?,
                None => c.metric.build()?,
            };
            charts.push(match self.gluing {
                Gluing::TorusPeriodic => Chart::torus(&id, metric),
                Gluing::SphereStereographicPair => Chart::stereographic(&id, metric),
            });
        }
        if charts.len() == 2 && charts[0].id == charts[1].id {
            return Err(GbxError::Config("chart ids must be distinct".into()));
        }
        Ok(ChartedSurface {
            name: name.to_string(),
            gluing: self.gluing,
            charts,
            euler_char: self.euler_char,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub chart: String,
    pub u: f64,
    pub v: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
}

fn default_radius() -> f64 {
    DEFAULT_EXCISION_RADIUS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub components: Vec<[FieldConfig; 2]>,
    #[serde(default)]
    pub singular_points: Vec<PointConfig>,
    /// Per-chart metric of this factor's bundle; defaults to the surface metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<MetricConfig>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub kind: SectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<[FieldConfig; 2]>>,
    #[serde(default)]
    pub singular_points: Vec<PointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<FactorConfig>>,
}

fn build_components(c: &[[FieldConfig; 2]]) -> Result<Vec<[ScalarField; 2]>> {
    c.iter()
        .map(|[a, b]| Ok([a.build()?, b.build()?]))
        .collect()
}

impl SectionConfig {
    pub fn build(&self) -> Result<SectionSpec> {
        let mut next_label = 1;
        let mut points = |list: &[PointConfig]| -> Vec<SingularPoint> {
            list.iter()
                .map(|p| {
                    let label = p.label.unwrap_or(next_label);
                    next_label = label.max(next_label) + 1;
                    SingularPoint::new(&p.chart, p.u, p.v, label).with_radius(p.radius)
                })
                .collect()
        };
        match self.kind {
            SectionKind::VectorField | SectionKind::LineField => {
                if self.factors.is_some() {
                    return Err(GbxError::Config(
                        "only whitney sections take factors".into(),
                    ));
                }
                let comps = self
                    .components
                    .as_ref()
                    .ok_or_else(|| GbxError::Config("section needs components".into()))?;
                let pts = points(&self.singular_points);
                let comps = build_components(comps)?;
                Ok(if self.kind == SectionKind::VectorField {
                    SectionSpec::vector_field(comps, pts)
                } else {
                    SectionSpec::line_field(comps, pts)
                })
            }
            SectionKind::Whitney => {
                if self.components.is_some() || !self.singular_points.is_empty() {
                    return Err(GbxError::Config(
                        "whitney sections list components and points per factor".into(),
                    ));
                }
                let factors = self
                    .factors
                    .as_ref()
                    .filter(|f| !f.is_empty())
                    .ok_or_else(|| {
                        GbxError::Config("whitney section needs at least one factor".into())
                    })?;
                let mut specs = Vec::new();
                for f in factors {
                    let pts = points(&f.singular_points);
                    specs.push(SectionSpec::vector_field(
                        build_components(&f.components)?,
                        pts,
                    ));
                }
                SectionSpec::whitney(specs)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub identity: Identity,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_loop_samples")]
    pub loop_samples: usize,
    #[serde(default = "default_refinements")]
    pub max_refinements: u32,
    #[serde(default = "yes")]
    pub stability_check: bool,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_mode")]
    pub derivative: DerivativeMode,
    #[serde(default = "default_h_g")]
    pub h_g: f64,
    #[serde(default = "default_h_k")]
    pub h_k: f64,
    #[serde(default = "default_h_structure")]
    pub h_structure: f64,
    /// Fiber form for structure checks.
    #[serde(default)]
    pub form: Option<FormKind>,
    #[serde(default)]
    pub normalization: Option<f64>,
    /// Deformation covector: one `[ξ1, ξ2]` pair, or one per chart.
    #[serde(default)]
    pub xi: Option<Vec<[FieldConfig; 2]>>,
}

fn default_resolution() -> usize {
    256
}
fn default_loop_samples() -> usize {
    DEFAULT_LOOP_SAMPLES
}
fn default_refinements() -> u32 {
    DEFAULT_MAX_REFINEMENTS
}
fn yes() -> bool {
    true
}
fn default_mode() -> DerivativeMode {
    DerivativeMode::Analytic
}
fn default_h_g() -> f64 {
    DEFAULT_H_G
}
fn default_h_k() -> f64 {
    DEFAULT_H_K
}
fn default_h_structure() -> f64 {
    DEFAULT_H_STRUCTURE
}

impl RunConfig {
    pub fn options(&self) -> VerifyOptions {
        VerifyOptions {
            resolution: self.resolution,
            index: IndexOptions {
                loop_samples: self.loop_samples,
                max_refinements: self.max_refinements,
                check_stability: self.stability_check,
            },
            derivative: DerivativeOptions {
                mode: self.derivative,
                h_g: self.h_g,
                h_k: self.h_k,
            },
            tolerance: self.tolerance,
            h_structure: self.h_structure,
        }
    }
}

/// One scenario: a surface with a section and a run block, or a Čech problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cech: Option<CechDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Verification(Box<VerificationReport>),
    Cech(Box<CechReport>),
}

impl Outcome {
    /// Verification outcomes pass on tolerance; a Čech run always succeeds
    /// once it has produced a verdict.
    pub fn pass(&self) -> bool {
        match self {
            Outcome::Verification(r) => r.pass,
            Outcome::Cech(_) => true,
        }
    }
}

/// Overrides applied on top of a scenario's run block.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub resolution: Option<usize>,
    pub loop_samples: Option<usize>,
    pub tolerance: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    fn check_shape(&self) -> Result<()> {
        let geometric = self.surface.is_some() || self.section.is_some() || self.run.is_some();
        match (geometric, self.cech.is_some()) {
            (true, true) => Err(GbxError::Config(
                "a scenario is either a surface run or a cech run, not both".into(),
            )),
            (false, false) => Err(GbxError::Config(
                "scenario has neither a surface run nor a cech block".into(),
            )),
            (false, true) => Ok(()),
            (true, false) => {
                if self.surface.is_none() || self.run.is_none() {
                    return Err(GbxError::Config(
                        "surface runs need 'surface' and 'run' blocks".into(),
                    ));
                }
                let identity = self.run.as_ref().map(|r| r.identity);
                if self.section.is_none() && identity != Some(Identity::Structure) {
                    return Err(GbxError::Config(
                        "this identity needs a 'section' block".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(run) = self.run.as_mut() {
            if let Some(r) = o.resolution {
                run.resolution = r;
            }
            if let Some(n) = o.loop_samples {
                run.loop_samples = n;
            }
            if let Some(t) = o.tolerance {
                run.tolerance = Some(t);
            }
        }
    }

    pub fn is_cech(&self) -> bool {
        self.cech.is_some()
    }

    pub fn surface(&self) -> Result<ChartedSurface> {
        self.surface
            .as_ref()
            .ok_or_else(|| GbxError::Config("scenario has no surface".into()))?
            .build(&self.name)
    }

    pub fn section(&self) -> Result<SectionSpec> {
        self.section
            .as_ref()
            .ok_or_else(|| GbxError::Config("scenario has no section".into()))?
            .build()
    }

    /// Factor surfaces of a Whitney section (one per factor).
    pub fn factor_surfaces(&self) -> Result<Vec<ChartedSurface>> {
        let surface = self
            .surface
            .as_ref()
            .ok_or_else(|| GbxError::Config("scenario has no surface".into()))?;
        let factors = self
            .section
            .as_ref()
            .and_then(|s| s.factors.as_ref())
            .ok_or_else(|| GbxError::Config("scenario has no whitney factors".into()))?;
        factors
            .iter()
            .map(|f| surface.build_with(&self.name, f.metric.as_deref()))
            .collect()
    }

    /// Checks that every referenced chart exists and all expressions parse.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if let Some(doc) = &self.cech {
            doc.load()?;
            return Ok(());
        }
        let surface = self.surface()?;
        if let Some(section) = &self.section {
            let spec = section.build()?;
            for p in &spec.singular_points {
                surface.chart(&p.chart)?;
            }
            if section.kind == SectionKind::Whitney {
                self.factor_surfaces()?;
            }
        }
        if let Some(xi) = self.run.as_ref().and_then(|r| r.xi.as_ref()) {
            build_components(xi)?;
        }
        Ok(())
    }

    /// Runs the configured identity.
    pub fn run(&self) -> Result<Outcome> {
        self.validate()?;
        if let Some(doc) = &self.cech {
            return Ok(Outcome::Cech(Box::new(run_document(&self.name, doc)?)));
        }
        let run = self.run.as_ref().expect("shape checked");
        let opts = run.options();
        let surface = self.surface()?;
        let report = match run.identity {
            Identity::Hopf => verify_hopf(&self.name, &surface, &self.section()?, &opts)?,
            Identity::Projective => {
                verify_projective(&self.name, &surface, &self.section()?, &opts)?
            }
            Identity::Whitney => verify_whitney(
                &self.name,
                &self.factor_surfaces()?,
                &self.section()?,
                &opts,
            )?,
            Identity::Structure => return self.run_structure(),
            Identity::Deformation => {
                let xi = match &run.xi {
                    Some(x) => build_components(x)?,
                    None => vec![[ScalarField::constant(0.0), ScalarField::constant(0.0)]],
                };
                deformation_invariance_check(&self.name, &surface, &self.section()?, &xi, &opts)?
            }
        };
        Ok(Outcome::Verification(Box::new(report)))
    }

    /// Structure-equation check on the scenario's surface, whatever its identity.
    pub fn run_structure(&self) -> Result<Outcome> {
        if self.is_cech() {
            return Err(GbxError::Config(
                "structure checks need a surface scenario".into(),
            ));
        }
        let run = self
            .run
            .as_ref()
            .ok_or_else(|| GbxError::Config("scenario has no run block".into()))?;
        let surface = self.surface()?;
        let kind = run.form.unwrap_or(match run.identity {
            Identity::Projective | Identity::Deformation => FormKind::Projective,
            _ => FormKind::Circle,
        });
        let n = run.normalization.unwrap_or(match kind {
            FormKind::Circle => CIRCLE_NORMALIZATION,
            FormKind::Projective => PROJECTIVE_NORMALIZATION,
        });
        let report = structure_check_for(&self.name, &surface, kind, n, &run.options())?;
        Ok(Outcome::Verification(Box::new(report)))
    }
}
