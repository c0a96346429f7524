//! Curvature integrals against index sums, and structure-equation residuals.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GbxError, Result};
use crate::field::ScalarField;
use crate::frames::{
    circle_vertical_form, curvature_matrix, projective_alpha, DeformedConnection,
    DerivativeOptions, FormKind, FrameConnection, LinearConnection, VerticalForm,
    DEFAULT_H_STRUCTURE, PI_PERIOD_NORMALIZATION, PROJECTIVE_NORMALIZATION,
};
use crate::geom::{check_overlap_consistency, integrate_2form, ChartedSurface, Gluing, Region};
use crate::sections::{SectionKind, SectionSpec};
use crate::winding::{paired_index, total_index_over, HalfInteger, IndexOptions, IndexResult};

pub const REPORT_SCHEMA: &str = "gbx_report_v1";
pub const SPHERE_TOLERANCE: f64 = 1e-3;
pub const WHITNEY_SPHERE_TOLERANCE: f64 = 2e-3;
pub const TORUS_TOLERANCE: f64 = 1e-9;
pub const STRUCTURE_TOLERANCE: f64 = 1e-5;
pub const MIXED_TOLERANCE: f64 = 1e-10;
pub const DEFORMATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Hopf,
    Projective,
    Whitney,
    Structure,
    Deformation,
}

/// An exact rational together with its floating-point value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub numerator: i64,
    pub denominator: i64,
    pub value: f64,
}

impl From<HalfInteger> for ExactValue {
    fn from(h: HalfInteger) -> Self {
        let (numerator, denominator) = h.reduced();
        ExactValue {
            numerator,
            denominator,
            value: h.value(),
        }
    }
}

/// A named side condition with its own tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check {
            name: name.to_string(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParameters {
    pub resolution: usize,
    pub loop_samples: usize,
    pub max_refinements: u32,
    pub stability_check: bool,
    pub radii: Vec<f64>,
    pub derivative_mode: crate::frames::DerivativeMode,
    pub h_g: f64,
    pub h_k: f64,
    pub h_structure: f64,
    pub form_normalization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub scenario: String,
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: ExactValue,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub normalization: String,
    pub parameters: ReportParameters,
    pub points: Vec<IndexResult>,
    pub checks: Vec<Check>,
    pub extras: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn finish(mut self) -> Self {
        self.pass = self.residual <= self.tolerance && self.checks.iter().all(|c| c.pass);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub resolution: usize,
    pub index: IndexOptions,
    pub derivative: DerivativeOptions,
    /// Overrides the identity's default tolerance.
    pub tolerance: Option<f64>,
    pub h_structure: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            resolution: 256,
            index: IndexOptions::default(),
            derivative: DerivativeOptions::default(),
            tolerance: None,
            h_structure: DEFAULT_H_STRUCTURE,
        }
    }
}

fn default_tolerance(surface: &ChartedSurface, identity: Identity) -> f64 {
    match (surface.gluing, identity) {
        (_, Identity::Structure) => STRUCTURE_TOLERANCE,
        (Gluing::TorusPeriodic, _) => TORUS_TOLERANCE,
        (Gluing::SphereStereographicPair, Identity::Whitney) => WHITNEY_SPHERE_TOLERANCE,
        (Gluing::SphereStereographicPair, _) => SPHERE_TOLERANCE,
    }
}

fn parameters(
    opts: &VerifyOptions,
    points: &[IndexResult],
    form_normalization: f64,
) -> ReportParameters {
    ReportParameters {
        resolution: opts.resolution,
        loop_samples: opts.index.loop_samples,
        max_refinements: opts.index.max_refinements,
        stability_check: opts.index.check_stability,
        radii: points.iter().map(|r| r.radius).collect(),
        derivative_mode: opts.derivative.mode,
        h_g: opts.derivative.h_g,
        h_k: opts.derivative.h_k,
        h_structure: opts.h_structure,
        form_normalization,
    }
}

/// `(1/2π) ∫ K dσ` over the surface.
pub fn normalized_curvature_integral(conn: &FrameConnection, resolution: usize) -> Result<f64> {
    Ok(integrate_2form(conn.surface(), &conn.curvature_density_fields(), resolution)? / (2.0 * PI))
}

fn surface_checks(surface: &ChartedSurface) -> Result<Vec<Check>> {
    surface.validate()?;
    Ok(match surface.gluing {
        Gluing::SphereStereographicPair => {
            vec![Check::new(
                "overlap_consistency",
                check_overlap_consistency(surface, 48)?,
                crate::geom::GLUING_TOLERANCE,
            )]
        }
        Gluing::TorusPeriodic => Vec::new(),
    })
}

/// Shared path for the classical and Whitney-sum identities: one surface
/// (and hence one connection) per factor, indices of every factor at every
/// point of the combined singular set.
fn curvature_against_indices(
    scenario: &str,
    identity: Identity,
    surfaces: &[ChartedSurface],
    section: &SectionSpec,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if surfaces.len() != section.factor_count() {
        return Err(GbxError::Config(format!(
            "{} factor surfaces given for {} section factors",
            surfaces.len(),
            section.factor_count()
        )));
    }
    let base = &surfaces[0];
    for s in surfaces {
        if s.gluing != base.gluing
            || s.charts.len() != base.charts.len()
            || s.euler_char != base.euler_char
        {
            return Err(GbxError::Config(
                "whitney factors must live on the same charted surface".into(),
            ));
        }
    }
    let mut checks = Vec::new();
    for s in surfaces {
        checks.extend(surface_checks(s)?);
    }
    checks.dedup_by(|a, b| {
        if a.name == b.name {
            b.value = b.value.max(a.value);
            b.pass &= a.pass;
            true
        } else {
            false
        }
    });
    section.validate(base)?;
    let points = section.union_points(base)?;

    let mut lhs = 0.0;
    let mut rhs = HalfInteger::ZERO;
    let mut table = Vec::new();
    let mut extras = BTreeMap::new();
    let mut notes = Vec::new();
    let k = surfaces.len();
    for (j, surface) in surfaces.iter().enumerate() {
        let conn = FrameConnection::new(surface, opts.derivative);
        let lhs_j = normalized_curvature_integral(&conn, opts.resolution)?;
        let (rhs_j, rows) = total_index_over(section, j, surface, &points, &opts.index)?;
        if conn.stencil_shrunk() {
            notes.push(format!(
                "factor {j}: difference stencils shrunk near a chart edge"
            ));
        }
        if k > 1 {
            extras.insert(format!("factor_{j}_lhs"), lhs_j);
            extras.insert(format!("factor_{j}_rhs"), rhs_j.value());
        }
        lhs += lhs_j;
        rhs = rhs + rhs_j;
        table.extend(rows);
    }
    table.sort_by_key(|r| (r.point.label, r.factor));
    checks.push(Check::flag(
        "euler_characteristic",
        rhs == HalfInteger::from_integer(k as i64 * base.euler_char),
    ));

    let residual = (lhs - rhs.value()).abs();
    let normalization = match identity {
        Identity::Whitney => "lhs = sum over factors of (1/2π)∫ K_j dσ_j; rhs = sum over points and factors of ind_x(s_j)",
        _ => "lhs = (1/2π)∫ K dσ; rhs = sum of indices",
    };
    Ok(VerificationReport {
        schema: REPORT_SCHEMA.into(),
        scenario: scenario.into(),
        identity,
        lhs,
        rhs: rhs.into(),
        residual,
        // a one-factor sum is the classical identity and keeps its tolerance
        tolerance: opts.tolerance.unwrap_or_else(|| {
            default_tolerance(
                base,
                if surfaces.len() == 1 {
                    Identity::Hopf
                } else {
                    identity
                },
            )
        }),
        pass: false,
        normalization: normalization.into(),
        parameters: parameters(opts, &table, crate::frames::CIRCLE_NORMALIZATION),
        points: table,
        checks,
        extras,
        notes,
    }
    .finish())
}

pub fn verify_hopf(
    scenario: &str,
    surface: &ChartedSurface,
    section: &SectionSpec,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if section.kind != SectionKind::VectorField {
        return Err(GbxError::Config(
            "the classical identity needs a vector field".into(),
        ));
    }
    curvature_against_indices(
        scenario,
        Identity::Hopf,
        std::slice::from_ref(surface),
        section,
        opts,
    )
}

/// Whitney sum of `surfaces.len()` rank-2 bundles; factor `j` carries the
/// Levi-Civita connection of `surfaces[j]`.
pub fn verify_whitney(
    scenario: &str,
    surfaces: &[ChartedSurface],
    section: &SectionSpec,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if section.kind != SectionKind::Whitney {
        return Err(GbxError::Config(
            "the Whitney identity needs a whitney section".into(),
        ));
    }
    if surfaces.is_empty() {
        return Err(GbxError::Config(
            "whitney section needs at least one factor".into(),
        ));
    }
    curvature_against_indices(scenario, Identity::Whitney, surfaces, section, opts)
}

pub fn verify_projective(
    scenario: &str,
    surface: &ChartedSurface,
    section: &SectionSpec,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if section.kind != SectionKind::LineField {
        return Err(GbxError::Config(
            "the projective identity needs a line field".into(),
        ));
    }
    let mut checks = surface_checks(surface)?;
    section.validate(surface)?;
    let conn = FrameConnection::new(surface, opts.derivative);
    let lhs = normalized_curvature_integral(&conn, opts.resolution)?;
    let (rhs, table) =
        total_index_over(section, 0, surface, &section.singular_points, &opts.index)?;
    checks.push(Check::flag(
        "euler_characteristic",
        rhs == HalfInteger::from_integer(surface.euler_char),
    ));

    let alpha = projective_alpha(&conn, PROJECTIVE_NORMALIZATION);
    let paired: Vec<(HalfInteger, f64)> = section
        .singular_points
        .par_iter()
        .map(|p| paired_index(&alpha, section, 0, surface, p, &opts.index))
        .collect::<Result<_>>()?;
    let mut paired_by_label: Vec<(i64, HalfInteger)> = section
        .singular_points
        .iter()
        .zip(&paired)
        .map(|(p, (h, _))| (p.label, *h))
        .collect();
    paired_by_label.sort_by_key(|x| x.0);
    let agree = paired_by_label
        .iter()
        .zip(&table)
        .all(|((_, h), r)| *h == r.index);
    checks.push(Check::flag("paired_indices_match_winding", agree));

    let mut extras = BTreeMap::new();
    let integral = lhs * 2.0 * PI;
    let half_turns = rhs.halves();
    // under the π-period normalization the curvature side is (n/2)∫K dσ
    extras.insert(
        "pi_period_lhs".into(),
        0.5 * PI_PERIOD_NORMALIZATION * integral,
    );
    extras.insert("pi_period_rhs".into(), PI * half_turns as f64);
    extras.insert(
        "normalized_fiber_integral".into(),
        alpha.fiber_integral(0, 0.0, 0.0, 16).unwrap_or(f64::NAN),
    );
    extras.insert(
        "pi_period_fiber_integral".into(),
        projective_alpha(&conn, PI_PERIOD_NORMALIZATION)
            .fiber_integral(0, 0.0, 0.0, 16)
            .unwrap_or(f64::NAN),
    );
    for (p, (_, raw)) in section.singular_points.iter().zip(&paired) {
        extras.insert(format!("paired_integral_i{}", p.label), *raw);
    }
    let mut notes = Vec::new();
    if conn.stencil_shrunk() {
        notes.push("difference stencils shrunk near a chart edge".into());
    }

    Ok(VerificationReport {
        schema: REPORT_SCHEMA.into(),
        scenario: scenario.into(),
        identity: Identity::Projective,
        lhs,
        rhs: rhs.into(),
        residual: (lhs - rhs.value()).abs(),
        tolerance: opts
            .tolerance
            .unwrap_or_else(|| default_tolerance(surface, Identity::Projective)),
        pass: false,
        normalization:
            "generator of H¹(RP¹) integrates to 1/2 per half turn (n = 1/π); lhs = (1/2π)∫ K dσ; \
                        extras give the π-period pair ((n/2)∫ K dσ, π · half turns) with n = 2"
                .into(),
        parameters: parameters(opts, &table, PROJECTIVE_NORMALIZATION),
        points: table,
        checks,
        extras,
        notes,
    }
    .finish())
}

/// Base sample points (chart, u, v) inside each chart's own region.
fn structure_samples(surface: &ChartedSurface, n: usize) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (ci, chart) in surface.charts.iter().enumerate() {
        for i in 0..n {
            for k in 0..n {
                let (s, t) = ((i as f64 + 0.5) / n as f64, (k as f64 + 0.5) / n as f64);
                out.push(match chart.own_region {
                    Region::Rect(r) => (
                        ci,
                        r.u_min + s * (r.u_max - r.u_min),
                        r.v_min + t * (r.v_max - r.v_min),
                    ),
                    Region::Disk { center, radius } => {
                        let (rr, phi) = (radius * s, 2.0 * PI * t);
                        (ci, center.0 + rr * phi.cos(), center.1 + rr * phi.sin())
                    }
                });
            }
        }
    }
    out
}

/// Finite-difference `dα` against the curvature term on a base × fiber grid.
///
/// The `du ∧ dv` coefficient must equal `-c n K √det(g)` (`c = 1` circle,
/// `c = 1/2` line bundle); the `dψ ∧ du`, `dψ ∧ dv` coefficients must vanish.
pub fn structure_check(
    scenario: &str,
    form: &VerticalForm<'_>,
    conn: &FrameConnection,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let surface = conn.surface();
    surface.validate()?;
    let h = opts.h_structure;
    let base = structure_samples(surface, 12);
    let fiber = 8;
    let results: Vec<(f64, f64)> = base
        .par_iter()
        .map(|&(c, u, v)| {
            let expected = form.expected_curvature_term(conn, c, u, v)?;
            let mut main: f64 = 0.0;
            let mut mixed: f64 = 0.0;
            for k in 0..fiber {
                let psi = (k as f64 + 0.5) * form.fiber_period / fiber as f64;
                let d = form.exterior_derivative(c, u, v, psi, h)?;
                main = main.max((d[2] - expected).abs());
                mixed = mixed.max(d[0].abs()).max(d[1].abs());
            }
            Ok((main, mixed))
        })
        .collect::<Result<_>>()?;
    let main = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let mixed = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let kind = match form.kind {
        FormKind::Circle => "circle",
        FormKind::Projective => "projective",
    };
    let expected = match form.kind {
        FormKind::Circle => "dα = -n K dσ",
        FormKind::Projective => "dα = -(n/2) K dσ",
    };
    let mut extras = BTreeMap::new();
    extras.insert("sample_points".into(), (base.len() * fiber) as f64);
    Ok(VerificationReport {
        schema: REPORT_SCHEMA.into(),
        scenario: scenario.into(),
        identity: Identity::Structure,
        lhs: main,
        rhs: HalfInteger::ZERO.into(),
        residual: main,
        tolerance: opts.tolerance.unwrap_or(STRUCTURE_TOLERANCE),
        pass: false,
        normalization: format!(
            "{kind} form, n = {}; {expected} with K the Gaussian curvature",
            form.normalization
        ),
        parameters: parameters(opts, &[], form.normalization),
        points: Vec::new(),
        checks: vec![Check::new("mixed_components", mixed, MIXED_TOLERANCE)],
        extras,
        notes: Vec::new(),
    }
    .finish())
}

/// Structure check for the Levi-Civita connection of `surface`.
pub fn structure_check_for(
    scenario: &str,
    surface: &ChartedSurface,
    kind: FormKind,
    normalization: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let conn = FrameConnection::new(surface, opts.derivative);
    let form = match kind {
        FormKind::Circle => circle_vertical_form(&conn, normalization),
        FormKind::Projective => projective_alpha(&conn, normalization),
    };
    structure_check(scenario, &form, &conn, opts)
}

/// `-(1/2π) ∫ R^2_1(∂u, ∂v) du dv` for a linear connection; for a metric
/// connection this is `(1/2π)∫ K dσ`, and trace deformations leave it alone.
fn projective_curvature_integral(
    conn: Arc<dyn LinearConnection>,
    h: f64,
    resolution: usize,
) -> Result<f64> {
    let n = conn.surface().charts.len();
    let fields: Vec<ScalarField> = (0..n)
        .map(|c| {
            let conn = Arc::clone(&conn);
            ScalarField::from_fn(move |u, v| {
                curvature_matrix(conn.as_ref(), c, u, v, h)
                    .map(|r| -r[1][0])
                    .unwrap_or(f64::NAN)
            })
        })
        .collect();
    Ok(integrate_2form(conn.surface(), &fields, resolution)? / (2.0 * PI))
}

/// Replaces the Levi-Civita connection by `Γ + ξ ⊗ δ` and recomputes the
/// projective identity through the deformed connection: indices by pairing
/// with the deformed projective form, the curvature side from the deformed
/// curvature matrix. Both must match the undeformed computation.
///
/// `xi` holds one `(ξ1, ξ2)` pair per chart, or a single pair used in every chart.
pub fn deformation_invariance_check(
    scenario: &str,
    surface: &ChartedSurface,
    section: &SectionSpec,
    xi: &[[ScalarField; 2]],
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if section.kind != SectionKind::LineField {
        return Err(GbxError::Config(
            "deformation invariance is checked on line fields".into(),
        ));
    }
    let xi: Vec<[ScalarField; 2]> = match xi.len() {
        1 => vec![xi[0].clone(); surface.charts.len()],
        n if n == surface.charts.len() => xi.to_vec(),
        n => {
            return Err(GbxError::Config(format!(
                "{n} deformation covectors for {} charts",
                surface.charts.len()
            )))
        }
    };
    let mut checks = surface_checks(surface)?;
    section.validate(surface)?;
    let base = FrameConnection::new(surface, opts.derivative);
    let deformed = DeformedConnection {
        base: base.clone(),
        xi,
    };
    let h = opts.derivative.h_k;

    let (rhs, table) =
        total_index_over(section, 0, surface, &section.singular_points, &opts.index)?;
    let lhs_base = projective_curvature_integral(Arc::new(base.clone()), h, opts.resolution)?;
    let lhs = projective_curvature_integral(Arc::new(deformed.clone()), h, opts.resolution)?;
    let residual_base = (lhs_base - rhs.value()).abs();
    let residual = (lhs - rhs.value()).abs();

    let alpha = projective_alpha(&base, PROJECTIVE_NORMALIZATION);
    let alpha_xi = projective_alpha(&deformed, PROJECTIVE_NORMALIZATION);
    let mut unchanged = true;
    let mut extras = BTreeMap::new();
    for r in &table {
        let (a, _) = paired_index(&alpha, section, 0, surface, &r.point, &opts.index)?;
        let (b, raw) = paired_index(&alpha_xi, section, 0, surface, &r.point, &opts.index)?;
        unchanged &= a == r.index && b == r.index;
        extras.insert(format!("deformed_paired_integral_i{}", r.point.label), raw);
    }
    checks.push(Check::flag("indices_unchanged", unchanged));
    checks.push(Check::new(
        "residual_delta",
        (residual - residual_base).abs(),
        DEFORMATION_TOLERANCE,
    ));
    extras.insert("undeformed_lhs".into(), lhs_base);
    extras.insert("undeformed_residual".into(), residual_base);

    Ok(VerificationReport {
        schema: REPORT_SCHEMA.into(),
        scenario: scenario.into(),
        identity: Identity::Deformation,
        lhs,
        rhs: rhs.into(),
        residual,
        tolerance: opts
            .tolerance
            .unwrap_or_else(|| default_tolerance(surface, Identity::Projective)),
        pass: false,
        normalization:
            "lhs = -(1/2π)∫ R'^2_1 du dv for the deformed connection; indices paired with the \
                        deformed projective form (n = 1/π)"
                .into(),
        parameters: parameters(opts, &table, PROJECTIVE_NORMALIZATION),
        points: table,
        checks,
        extras,
        notes: Vec::new(),
    }
    .finish())
}
