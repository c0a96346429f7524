//! Sections with isolated singularities, their blow-up loops and frame angles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GbxError, Result};
use crate::field::ScalarField;
use crate::frames::{frame_from_metric, Frame};
use crate::geom::{transition_map, Chart, ChartedSurface, Rect, Region, GLUING_TOLERANCE};

pub const DEFAULT_EXCISION_RADIUS: f64 = 0.1;
pub const DEFAULT_LOOP_SAMPLES: usize = 512;
pub const MIN_LOOP_SAMPLES: usize = 16;
/// Below this norm a section value counts as vanishing.
pub const VANISHING_THRESHOLD: f64 = 1e-12;
const CONSISTENCY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionKind {
    VectorField,
    LineField,
    Whitney,
}

impl SectionKind {
    /// Period of the frame angle: `2π` for vectors, `π` for lines.
    pub fn angle_period(self) -> f64 {
        match self {
            SectionKind::LineField => PI,
            _ => 2.0 * PI,
        }
    }
}

/// A declared singular point with its excision disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub chart: String,
    pub u: f64,
    pub v: f64,
    pub radius: f64,
    pub label: i64,
    /// Owning factor of a Whitney section; `None` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<usize>,
}

impl SingularPoint {
    pub fn new(chart: &str, u: f64, v: f64, label: i64) -> Self {
        SingularPoint {
            chart: chart.to_string(),
            u,
            v,
            radius: DEFAULT_EXCISION_RADIUS,
            label,
            factor: None,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_factor(mut self, factor: usize) -> Self {
        self.factor = Some(factor);
        self
    }
}

/// Counterclockwise circle samples around a singular point.
#[derive(Clone, Debug, PartialEq)]
pub struct BlowupLoop {
    pub center: SingularPoint,
    pub radius: f64,
    pub samples: Vec<(f64, f64)>,
    pub n: usize,
    /// Traversed clockwise (used to check orientation behaviour).
    pub reversed: bool,
}

impl BlowupLoop {
    pub fn reversed(&self) -> BlowupLoop {
        let mut samples = self.samples.clone();
        samples.reverse();
        BlowupLoop {
            samples,
            reversed: !self.reversed,
            ..self.clone()
        }
    }

    /// Loop parameter `φ_j` of each sample.
    pub fn phases(&self) -> Vec<f64> {
        let step = 2.0 * PI / self.n as f64;
        let mut phi: Vec<f64> = (0..self.n).map(|j| j as f64 * step).collect();
        if self.reversed {
            phi.reverse();
        }
        phi
    }
}

pub fn blowup_loop(p: &SingularPoint, chart: &Chart, n: usize) -> Result<BlowupLoop> {
    if n < MIN_LOOP_SAMPLES {
        return Err(GbxError::Config(format!(
            "blow-up loop needs at least {MIN_LOOP_SAMPLES} samples, got {n}"
        )));
    }
    check_disk(p, chart)?;
    let step = 2.0 * PI / n as f64;
    let samples = (0..n)
        .map(|j| {
            let (s, c) = (j as f64 * step).sin_cos();
            (p.u + p.radius * c, p.v + p.radius * s)
        })
        .collect();
    Ok(BlowupLoop {
        center: p.clone(),
        radius: p.radius,
        samples,
        n,
        reversed: false,
    })
}

fn check_disk(p: &SingularPoint, chart: &Chart) -> Result<()> {
    if !(p.radius > 0.0 && p.radius.is_finite()) {
        return Err(GbxError::Config(format!(
            "point i={} has non-positive excision radius {}",
            p.label, p.radius
        )));
    }
    if chart.periodic {
        return Ok(());
    }
    let d = &chart.domain;
    if p.u - p.radius <= d.u_min
        || p.u + p.radius >= d.u_max
        || p.v - p.radius <= d.v_min
        || p.v + p.radius >= d.v_max
    {
        return Err(GbxError::Config(format!(
            "excision disk of point i={} (radius {}) exits chart '{}'",
            p.label, p.radius, chart.id
        )));
    }
    Ok(())
}

/// `ψ = atan2(g(v, e2), g(v, e1))`, reduced mod `π` for line fields.
pub fn angle_in_frame(
    kind: SectionKind,
    value: [f64; 2],
    g: [f64; 3],
    frame: &Frame,
) -> Result<f64> {
    let inner = |a: [f64; 2], b: [f64; 2]| {
        g[0] * a[0] * b[0] + g[1] * (a[0] * b[1] + a[1] * b[0]) + g[2] * a[1] * b[1]
    };
    let x = inner(value, frame.e1);
    let y = inner(value, frame.e2);
    if x.hypot(y).is_nan() || x.hypot(y) < VANISHING_THRESHOLD {
        return Err(GbxError::VanishingSection {
            chart: String::new(),
            u: f64::NAN,
            v: f64::NAN,
        });
    }
    let psi = y.atan2(x);
    Ok(match kind {
        SectionKind::LineField => psi.rem_euclid(PI),
        _ => psi,
    })
}

/// A section with singularities, given per chart.
///
/// `components[factor][chart]` holds `(v¹, v²)`. Vector and line fields have a
/// single factor; a Whitney section has one factor per summand.
#[derive(Clone, Debug)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub components: Vec<Vec<[ScalarField; 2]>>,
    pub singular_points: Vec<SingularPoint>,
}

impl SectionSpec {
    pub fn vector_field(per_chart: Vec<[ScalarField; 2]>, points: Vec<SingularPoint>) -> Self {
        SectionSpec {
            kind: SectionKind::VectorField,
            components: vec![per_chart],
            singular_points: points,
        }
    }

    pub fn line_field(per_chart: Vec<[ScalarField; 2]>, points: Vec<SingularPoint>) -> Self {
        SectionSpec {
            kind: SectionKind::LineField,
            components: vec![per_chart],
            singular_points: points,
        }
    }

    /// Whitney section from vector-field factors; each factor's points are tagged with it.
    pub fn whitney(factors: Vec<SectionSpec>) -> Result<Self> {
        let mut components = Vec::new();
        let mut points = Vec::new();
        for (j, f) in factors.into_iter().enumerate() {
            if f.kind != SectionKind::VectorField {
                return Err(GbxError::Config(
                    "whitney factors must be vector fields".into(),
                ));
            }
            components.push(f.components.into_iter().next().unwrap_or_default());
            points.extend(f.singular_points.into_iter().map(|p| p.with_factor(j)));
        }
        Ok(SectionSpec {
            kind: SectionKind::Whitney,
            components,
            singular_points: points,
        })
    }

    pub fn factor_count(&self) -> usize {
        self.components.len()
    }

    /// Kind of the angle read off factor `factor`.
    pub fn factor_kind(&self) -> SectionKind {
        match self.kind {
            SectionKind::Whitney => SectionKind::VectorField,
            k => k,
        }
    }

    /// Single-factor view of a Whitney section, carrying that factor's points.
    pub fn factor(&self, j: usize) -> SectionSpec {
        SectionSpec {
            kind: self.factor_kind(),
            components: vec![self.components[j].clone()],
            singular_points: self
                .singular_points
                .iter()
                .filter(|p| self.kind != SectionKind::Whitney || p.factor == Some(j))
                .cloned()
                .collect(),
        }
    }

    pub fn value(&self, factor: usize, chart: usize, u: f64, v: f64) -> [f64; 2] {
        let c = &self.components[factor][chart];
        [c[0].eval(u, v), c[1].eval(u, v)]
    }

    /// Value used for zero scans: line fields are doubled so that the
    /// arbitrary sign of the components drops out.
    fn scan_value(&self, factor: usize, chart: usize, u: f64, v: f64) -> [f64; 2] {
        let a = self.value(factor, chart, u, v);
        if self.kind == SectionKind::LineField {
            [a[0] * a[0] - a[1] * a[1], 2.0 * a[0] * a[1]]
        } else {
            a
        }
    }

    /// Frame angle of factor `factor` in the Gram–Schmidt frame of `chart`.
    pub fn angle(
        &self,
        factor: usize,
        surface: &ChartedSurface,
        chart: usize,
        u: f64,
        v: f64,
    ) -> Result<f64> {
        let c = &surface.charts[chart];
        let g = c.eval_metric(u, v)?;
        let value = self.value(factor, chart, u, v);
        if !(value[0].is_finite() && value[1].is_finite()) {
            return Err(GbxError::NonFinite {
                chart: c.id.clone(),
                u,
                v,
                value: value[0] + value[1],
            });
        }
        angle_in_frame(self.factor_kind(), value, g, &frame_from_metric(g)).map_err(|e| match e {
            GbxError::VanishingSection { .. } => GbxError::VanishingSection {
                chart: c.id.clone(),
                u,
                v,
            },
            e => e,
        })
    }

    /// Points of `Σ = ∪ Σ_j` with coincident declarations merged.
    ///
    /// Two points coincide when they agree (possibly after a chart transition)
    /// within the gluing tolerance; the merged point keeps the first label and
    /// the smaller radius. Disks that overlap without coinciding are rejected.
    pub fn union_points(&self, surface: &ChartedSurface) -> Result<Vec<SingularPoint>> {
        let mut out: Vec<SingularPoint> = Vec::new();
        for p in &self.singular_points {
            let mut merged = false;
            for q in out.iter_mut() {
                let d = point_distance(surface, p, q)?;
                if d <= GLUING_TOLERANCE {
                    q.radius = q.radius.min(p.radius);
                    q.factor = None;
                    merged = true;
                    break;
                }
                if d < p.radius + q.radius {
                    return Err(GbxError::Config(format!(
                        "excision disks of points i={} and i={} overlap; shrink the radii or separate the points",
                        q.label, p.label
                    )));
                }
            }
            if !merged {
                let mut p = p.clone();
                p.factor = None;
                out.push(p);
            }
        }
        out.sort_by_key(|p| p.label);
        Ok(out)
    }

    /// Checks chart coverage, disk validity, nonvanishing away from the declared
    /// points, and agreement of the chart representations on overlaps.
    pub fn validate(&self, surface: &ChartedSurface) -> Result<()> {
        if self.components.is_empty() {
            return Err(GbxError::Config("section has no components".into()));
        }
        if self.kind != SectionKind::Whitney && self.components.len() != 1 {
            return Err(GbxError::Config(
                "vector and line fields have exactly one factor".into(),
            ));
        }
        for f in &self.components {
            if f.len() != surface.charts.len() {
                return Err(GbxError::Config(format!(
                    "section gives {} chart representations for {} charts",
                    f.len(),
                    surface.charts.len()
                )));
            }
        }
        let mut labels = std::collections::HashSet::new();
        for p in &self.singular_points {
            let chart = surface.chart(&p.chart)?;
            check_disk(p, chart)?;
            if !labels.insert(p.label) {
                return Err(GbxError::Config(format!(
                    "duplicate singular point label i={}",
                    p.label
                )));
            }
            if let Some(j) = p.factor {
                if j >= self.components.len() {
                    return Err(GbxError::Config(format!(
                        "point i={} names missing factor {j}",
                        p.label
                    )));
                }
            }
        }
        if self.kind == SectionKind::Whitney {
            self.union_points(surface)?;
            for j in 0..self.factor_count() {
                let f = self.factor(j);
                f.check_disjoint(surface)?;
                f.check_nonvanishing(surface, 0)?;
                f.check_overlap(surface, 0)?;
            }
        } else {
            self.check_disjoint(surface)?;
            self.check_nonvanishing(surface, 0)?;
            self.check_overlap(surface, 0)?;
        }
        Ok(())
    }

    fn check_disjoint(&self, surface: &ChartedSurface) -> Result<()> {
        let pts = &self.singular_points;
        for (a, p) in pts.iter().enumerate() {
            for q in &pts[a + 1..] {
                if point_distance(surface, p, q)? < p.radius + q.radius {
                    return Err(GbxError::Config(format!(
                        "excision disks of points i={} and i={} overlap",
                        p.label, q.label
                    )));
                }
            }
        }
        Ok(())
    }

    fn excised(&self, surface: &ChartedSurface, chart: usize, u: f64, v: f64) -> bool {
        self.singular_points.iter().any(|p| {
            let Ok(pc) = surface.chart_index(&p.chart) else {
                return false;
            };
            let here = if pc == chart {
                Some((u, v))
            } else {
                transition_map(surface.gluing, chart, u, v)
                    .ok()
                    .map(|t| t.point)
            };
            here.is_some_and(|(x, y)| {
                let (dx, dy) = torus_delta(surface, pc, x - p.u, y - p.v);
                dx.hypot(dy) <= p.radius
            })
        })
    }

    fn check_nonvanishing(&self, surface: &ChartedSurface, factor: usize) -> Result<()> {
        let n = 96;
        for (ci, chart) in surface.charts.iter().enumerate() {
            for i in 0..n {
                for k in 0..n {
                    let (u, v) = match chart.own_region {
                        Region::Rect(r) => (
                            r.u_min + (i as f64 + 0.5) / n as f64 * (r.u_max - r.u_min),
                            r.v_min + (k as f64 + 0.5) / n as f64 * (r.v_max - r.v_min),
                        ),
                        Region::Disk { center, radius } => {
                            let r = radius * (i as f64 + 0.5) / n as f64;
                            let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                            (center.0 + r * phi.cos(), center.1 + r * phi.sin())
                        }
                    };
                    if self.excised(surface, ci, u, v) {
                        continue;
                    }
                    let val = self.value(factor, ci, u, v);
                    if !(val[0].is_finite() && val[1].is_finite()) {
                        return Err(GbxError::NonFinite {
                            chart: chart.id.clone(),
                            u,
                            v,
                            value: val[0] + val[1],
                        });
                    }
                    if val[0].hypot(val[1]) < VANISHING_THRESHOLD {
                        return Err(GbxError::VanishingSection {
                            chart: chart.id.clone(),
                            u,
                            v,
                        });
                    }
                }
            }
        }
        self.check_sign_changes(surface, factor)
    }

    /// Looks for undeclared zeros between samples: cells on which both
    /// components change sign are bisected, and a converged cell is reported.
    fn check_sign_changes(&self, surface: &ChartedSurface, factor: usize) -> Result<()> {
        let n = 64;
        for (ci, chart) in surface.charts.iter().enumerate() {
            let (bbox, disk) = match chart.own_region {
                Region::Rect(r) => (r, None),
                Region::Disk { center, radius } => (
                    Rect {
                        u_min: center.0 - radius,
                        u_max: center.0 + radius,
                        v_min: center.1 - radius,
                        v_max: center.1 + radius,
                    },
                    Some((center, radius)),
                ),
            };
            let du = (bbox.u_max - bbox.u_min) / n as f64;
            let dv = (bbox.v_max - bbox.v_min) / n as f64;
            let f = |u: f64, v: f64| self.scan_value(factor, ci, u, v);
            for i in 0..n {
                for k in 0..n {
                    let cell = Cell {
                        u0: bbox.u_min + i as f64 * du,
                        v0: bbox.v_min + k as f64 * dv,
                        du,
                        dv,
                    };
                    let (cu, cv) = cell.center();
                    if let Some(((x, y), r)) = disk {
                        if (cu - x).hypot(cv - y) > r {
                            continue;
                        }
                    }
                    let excised = std::iter::once((cu, cv))
                        .chain(cell.corners())
                        .any(|(u, v)| self.excised(surface, ci, u, v));
                    if excised || !straddles(&f, &cell) {
                        continue;
                    }
                    if let Some((u, v)) = bisect(&f, cell) {
                        if !self.excised(surface, ci, u, v) {
                            return Err(GbxError::VanishingSection {
                                chart: chart.id.clone(),
                                u,
                                v,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_overlap(&self, surface: &ChartedSurface, factor: usize) -> Result<()> {
        if surface.charts.len() < 2 {
            return Ok(());
        }
        let (nr, nphi) = (24, 64);
        for i in 0..nr {
            for k in 0..nphi {
                let r = 0.6 + 1.0 * i as f64 / (nr - 1) as f64;
                let phi = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                let (u, v) = (r * phi.cos(), r * phi.sin());
                if self.excised(surface, 0, u, v) {
                    continue;
                }
                let t = transition_map(surface.gluing, 0, u, v)?;
                let pushed = t.push(self.value(factor, 0, u, v));
                let other = self.value(factor, 1, t.point.0, t.point.1);
                let mismatch = if self.kind == SectionKind::LineField {
                    let (a, b) = (normalize(pushed), normalize(other));
                    (a[0] - b[0])
                        .hypot(a[1] - b[1])
                        .min((a[0] + b[0]).hypot(a[1] + b[1]))
                } else {
                    (pushed[0] - other[0]).hypot(pushed[1] - other[1])
                        / 1f64.max(other[0].hypot(other[1]))
                };
                if mismatch.is_nan() || mismatch > CONSISTENCY_TOLERANCE {
                    return Err(GbxError::Config(format!(
                        "section charts disagree on the overlap at ({u}, {v}): mismatch {mismatch:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn normalize(a: [f64; 2]) -> [f64; 2] {
    let n = a[0].hypot(a[1]);
    [a[0] / n, a[1] / n]
}

fn torus_delta(surface: &ChartedSurface, chart: usize, du: f64, dv: f64) -> (f64, f64) {
    if surface.charts[chart].periodic {
        let d = &surface.charts[chart].domain;
        let wrap = |x: f64, p: f64| x - p * (x / p).round();
        (wrap(du, d.u_max - d.u_min), wrap(dv, d.v_max - d.v_min))
    } else {
        (du, dv)
    }
}

/// Chart distance between two points, measured in the chart of `q`.
fn point_distance(surface: &ChartedSurface, p: &SingularPoint, q: &SingularPoint) -> Result<f64> {
    let pc = surface.chart_index(&p.chart)?;
    let qc = surface.chart_index(&q.chart)?;
    let (x, y) = if pc == qc {
        (p.u, p.v)
    } else {
        match transition_map(surface.gluing, pc, p.u, p.v) {
            Ok(t) => t.point,
            Err(_) => return Ok(f64::INFINITY),
        }
    };
    let (dx, dy) = torus_delta(surface, qc, x - q.u, y - q.v);
    Ok(dx.hypot(dy))
}

/// Advisory zero finder: grid scan plus quadrant bisection on cells where
/// both components change sign. Line fields are scanned through the doubled
/// vector `(v1² - v2², 2 v1 v2)`, which is sign-independent.
pub fn detect_singularities(
    section: &SectionSpec,
    surface: &ChartedSurface,
    chart: usize,
    region: Rect,
    grid_resolution: usize,
    threshold: f64,
) -> Result<Vec<SingularPoint>> {
    if section.kind == SectionKind::Whitney {
        return Err(GbxError::Unsupported(
            "detection unsupported for whitney".into(),
        ));
    }
    let f = |u: f64, v: f64| section.scan_value(0, chart, u, v);
    let small = |cell: &Cell| {
        cell.corners().iter().any(|&(u, v)| {
            let x = f(u, v);
            x[0].hypot(x[1]) < threshold
        })
    };

    let n = grid_resolution.max(2);
    let du = (region.u_max - region.u_min) / n as f64;
    let dv = (region.v_max - region.v_min) / n as f64;
    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for k in 0..n {
            let cell = Cell {
                u0: region.u_min + i as f64 * du,
                v0: region.v_min + k as f64 * dv,
                du,
                dv,
            };
            if !(straddles(&f, &cell) || small(&cell)) {
                continue;
            }
            if let Some((u, v)) = bisect(&f, cell) {
                if !found.iter().any(|&(a, b)| (a - u).hypot(b - v) < 1e-6) {
                    found.push((u, v));
                }
            }
        }
    }
    let id = &surface.charts[chart].id;
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(k, (u, v))| SingularPoint::new(id, u, v, k as i64 + 1))
        .collect())
}

fn straddles(f: &dyn Fn(f64, f64) -> [f64; 2], cell: &Cell) -> bool {
    let vals = cell.corners().map(|(u, v)| f(u, v));
    (0..2).all(|c| {
        let lo = vals.iter().map(|x| x[c]).fold(f64::INFINITY, f64::min);
        let hi = vals.iter().map(|x| x[c]).fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    })
}

/// Quadrant bisection towards a common sign change of both components.
fn bisect(f: &dyn Fn(f64, f64) -> [f64; 2], cell: Cell) -> Option<(f64, f64)> {
    let mut level = vec![cell];
    while level[0].du.max(level[0].dv) > 1e-10 {
        let mut next: Vec<Cell> = level
            .iter()
            .flat_map(Cell::quadrants)
            .filter(|c| straddles(f, c))
            .collect();
        next.truncate(16);
        if next.is_empty() {
            return None;
        }
        level = next;
    }
    Some(level[0].center())
}

#[derive(Clone, Copy)]
struct Cell {
    u0: f64,
    v0: f64,
    du: f64,
    dv: f64,
}

impl Cell {
    fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.u0, self.v0),
            (self.u0 + self.du, self.v0),
            (self.u0, self.v0 + self.dv),
            (self.u0 + self.du, self.v0 + self.dv),
        ]
    }

    fn center(&self) -> (f64, f64) {
        (self.u0 + 0.5 * self.du, self.v0 + 0.5 * self.dv)
    }

    fn quadrants(&self) -> [Cell; 4] {
        let (h, k) = (0.5 * self.du, 0.5 * self.dv);
        [
            Cell {
                u0: self.u0,
                v0: self.v0,
                du: h,
                dv: k,
            },
            Cell {
                u0: self.u0 + h,
                v0: self.v0,
                du: h,
                dv: k,
            },
            Cell {
                u0: self.u0,
                v0: self.v0 + k,
                du: h,
                dv: k,
            },
            Cell {
                u0: self.u0 + h,
                v0: self.v0 + k,
                du: h,
                dv: k,
            },
        ]
    }
}
