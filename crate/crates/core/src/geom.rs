//! Charted surfaces with Riemannian metrics, and quadrature of 2-forms.
//!
//! Two gluing types are built in. A periodic torus is a single chart on
//! `[0, 2π) × [0, 2π)`. A sphere is a pair of stereographic charts on
//! `[-2.5, 2.5]²` glued by the inversion `(u, v) ↦ (u, -v) / (u² + v²)`;
//! each chart owns the closed unit disk of its own coordinates for
//! integration, so the two disks meet along the equator.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GbxError, Result};
use crate::field::ScalarField;

pub const TWO_PI: f64 = 2.0 * PI;

/// Half-width of the square domain of each stereographic chart.
pub const SPHERE_CHART_HALF_WIDTH: f64 = 2.5;

/// Radii `[1/R, R]` of the annulus where both stereographic charts are valid.
pub const SPHERE_OVERLAP: (f64, f64) = (1.0 / SPHERE_CHART_HALF_WIDTH, SPHERE_CHART_HALF_WIDTH);

/// Seam and overlap tolerance applied by [`ChartedSurface::validate`].
pub const GLUING_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gluing {
    TorusPeriodic,
    SphereStereographicPair,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Rect {
    pub fn square(half_width: f64) -> Self {
        Rect {
            u_min: -half_width,
            u_max: half_width,
            v_min: -half_width,
            v_max: half_width,
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }
}

/// The part of a chart that contributes to global integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Rect(Rect),
    Disk { center: (f64, f64), radius: f64 },
}

#[derive(Clone, Debug)]
pub enum Metric {
    /// `g = λ² (du² + dv²)`; the field holds `λ`.
    Conformal(ScalarField),
    General {
        g11: ScalarField,
        g12: ScalarField,
        g22: ScalarField,
    },
}

impl Metric {
    pub fn flat() -> Self {
        Metric::Conformal(ScalarField::constant(1.0))
    }

    #[inline]
    pub fn components(&self, u: f64, v: f64) -> [f64; 3] {
        match self {
            Metric::Conformal(l) => {
                let l = l.eval(u, v);
                [l * l, 0.0, l * l]
            }
            Metric::General { g11, g12, g22 } => [g11.eval(u, v), g12.eval(u, v), g22.eval(u, v)],
        }
    }

    pub fn is_analytic(&self) -> bool {
        match self {
            Metric::Conformal(l) => l.is_analytic(),
            Metric::General { g11, g12, g22 } => {
                g11.is_analytic() && g12.is_analytic() && g22.is_analytic()
            }
        }
    }

    /// Multiply the metric by a positive constant.
    pub fn scaled(&self, c: f64) -> Metric {
        let mul = |f: &ScalarField, k: f64| {
            let f = f.clone();
            ScalarField::from_fn(move |u, v| k * f.eval(u, v))
        };
        match self {
            Metric::Conformal(l) => Metric::Conformal(mul(l, c.sqrt())),
            Metric::General { g11, g12, g22 } => Metric::General {
                g11: mul(g11, c),
                g12: mul(g12, c),
                g22: mul(g22, c),
            },
        }
    }
}

#[inline]
pub(crate) fn is_positive_definite(g: [f64; 3]) -> bool {
    g[0] > 0.0 && g[0] * g[2] - g[1] * g[1] > 0.0
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub id: String,
    pub domain: Rect,
    pub metric: Metric,
    pub own_region: Region,
    /// Coordinates wrap modulo the domain size (torus chart).
    pub periodic: bool,
}

impl Chart {
    pub fn torus(id: &str, metric: Metric) -> Self {
        Chart {
            id: id.to_string(),
            domain: Rect {
                u_min: 0.0,
                u_max: TWO_PI,
                v_min: 0.0,
                v_max: TWO_PI,
            },
            metric,
            own_region: Region::Rect(Rect {
                u_min: 0.0,
                u_max: TWO_PI,
                v_min: 0.0,
                v_max: TWO_PI,
            }),
            periodic: true,
        }
    }

    pub fn stereographic(id: &str, metric: Metric) -> Self {
        Chart {
            id: id.to_string(),
            domain: Rect::square(SPHERE_CHART_HALF_WIDTH),
            metric,
            own_region: Region::Disk {
                center: (0.0, 0.0),
                radius: 1.0,
            },
            periodic: false,
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.periodic || self.domain.contains(u, v)
    }

    pub fn check_point(&self, u: f64, v: f64) -> Result<()> {
        if self.contains(u, v) {
            Ok(())
        } else {
            Err(GbxError::OutOfDomain {
                chart: self.id.clone(),
                u,
                v,
            })
        }
    }

    pub fn eval_metric(&self, u: f64, v: f64) -> Result<[f64; 3]> {
        self.check_point(u, v)?;
        let g = self.metric.components(u, v);
        if !is_positive_definite(g) {
            return Err(GbxError::DegenerateMetric {
                chart: self.id.clone(),
                u,
                v,
            });
        }
        Ok(g)
    }

    pub fn area_density(&self, u: f64, v: f64) -> Result<f64> {
        let g = self.eval_metric(u, v)?;
        Ok((g[0] * g[2] - g[1] * g[1]).sqrt())
    }

    /// Inner product of two coordinate vectors at `(u, v)`.
    pub fn inner(&self, g: [f64; 3], a: [f64; 2], b: [f64; 2]) -> f64 {
        g[0] * a[0] * b[0] + g[1] * (a[0] * b[1] + a[1] * b[0]) + g[2] * a[1] * b[1]
    }
}

/// Metric components `(g11, g12, g22)` of `chart` at `(u, v)`.
pub fn eval_metric(chart: &Chart, u: f64, v: f64) -> Result<(f64, f64, f64)> {
    let [a, b, c] = chart.eval_metric(u, v)?;
    Ok((a, b, c))
}

/// `sqrt(det g)` of `chart` at `(u, v)`.
pub fn area_density(chart: &Chart, u: f64, v: f64) -> Result<f64> {
    chart.area_density(u, v)
}

#[derive(Clone, Debug)]
pub struct ChartedSurface {
    pub name: String,
    pub gluing: Gluing,
    pub charts: Vec<Chart>,
    pub euler_char: i64,
}

impl ChartedSurface {
    pub fn torus(name: &str, metric: Metric) -> Self {
        ChartedSurface {
            name: name.to_string(),
            gluing: Gluing::TorusPeriodic,
            charts: vec![Chart::torus("torus", metric)],
            euler_char: 0,
        }
    }

    pub fn sphere(name: &str, north: Metric, south: Metric) -> Self {
        ChartedSurface {
            name: name.to_string(),
            gluing: Gluing::SphereStereographicPair,
            charts: vec![
                Chart::stereographic("north", north),
                Chart::stereographic("south", south),
            ],
            euler_char: 2,
        }
    }

    /// Unit round sphere: `λ = 2 / (1 + u² + v²)` in both charts.
    pub fn round_sphere() -> Self {
        let lambda = || Metric::Conformal(ScalarField::parse("2/(1+u^2+v^2)").unwrap());
        Self::sphere("round-sphere", lambda(), lambda())
    }

    pub fn flat_torus() -> Self {
        Self::torus("flat-torus", Metric::flat())
    }

    pub fn chart_index(&self, id: &str) -> Result<usize> {
        self.charts
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| GbxError::Config(format!("unknown chart '{id}'")))
    }

    pub fn chart(&self, id: &str) -> Result<&Chart> {
        Ok(&self.charts[self.chart_index(id)?])
    }

    /// Check gluing and metric invariants.
    pub fn validate(&self) -> Result<()> {
        match self.gluing {
            Gluing::TorusPeriodic => {
                if self.charts.len() != 1 {
                    return Err(GbxError::Config(
                        "torus surface needs exactly one chart".into(),
                    ));
                }
                let seam = torus_seam_discrepancy(&self.charts[0], 64);
                if seam > GLUING_TOLERANCE {
                    return Err(GbxError::Config(format!(
                        "torus metric is not 2π-periodic (seam discrepancy {seam:e})"
                    )));
                }
            }
            Gluing::SphereStereographicPair => {
                if self.charts.len() != 2 {
                    return Err(GbxError::Config(
                        "sphere surface needs exactly two charts".into(),
                    ));
                }
                let d = check_overlap_consistency(self, 48)?;
                if d > GLUING_TOLERANCE {
                    return Err(GbxError::Config(format!(
                        "chart metrics disagree on the overlap (discrepancy {d:e})"
                    )));
                }
            }
        }
        for chart in &self.charts {
            let n = 41;
            for i in 0..n {
                for j in 0..n {
                    let u = chart.domain.u_min
                        + (chart.domain.u_max - chart.domain.u_min) * i as f64 / (n - 1) as f64;
                    let v = chart.domain.v_min
                        + (chart.domain.v_max - chart.domain.v_min) * j as f64 / (n - 1) as f64;
                    chart.eval_metric(u, v)?;
                }
            }
        }
        Ok(())
    }
}

fn torus_seam_discrepancy(chart: &Chart, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let t = TWO_PI * k as f64 / n as f64;
        for (a, b) in [((0.0, t), (TWO_PI, t)), ((t, 0.0), (t, TWO_PI))] {
            let ga = chart.metric.components(a.0, a.1);
            let gb = chart.metric.components(b.0, b.1);
            for c in 0..3 {
                worst = worst.max((ga[c] - gb[c]).abs());
            }
        }
    }
    worst
}

/// Image of a point under a chart transition, with the Jacobian
/// `∂(u', v') / ∂(u, v)` as a row-major 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub point: (f64, f64),
    pub jacobian: [[f64; 2]; 2],
}

impl Transition {
    pub fn push(&self, w: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            j[0][0] * w[0] + j[0][1] * w[1],
            j[1][0] * w[0] + j[1][1] * w[1],
        ]
    }
}

/// Transition from chart `from_chart` to the other chart of the gluing.
///
/// The sphere inversion is its own inverse, so the same formula serves both
/// directions. The torus transition is the identity modulo `2π`.
pub fn transition_map(gluing: Gluing, from_chart: usize, u: f64, v: f64) -> Result<Transition> {
    match gluing {
        Gluing::TorusPeriodic => {
            if from_chart != 0 {
                return Err(GbxError::Config(format!(
                    "torus has no chart #{from_chart}"
                )));
            }
            Ok(Transition {
                point: (u.rem_euclid(TWO_PI), v.rem_euclid(TWO_PI)),
                jacobian: [[1.0, 0.0], [0.0, 1.0]],
            })
        }
        Gluing::SphereStereographicPair => {
            if from_chart > 1 {
                return Err(GbxError::Config(format!(
                    "sphere has no chart #{from_chart}"
                )));
            }
            let r2 = u * u + v * v;
            let r = r2.sqrt();
            if r2 == 0.0 || r < SPHERE_OVERLAP.0 || r > SPHERE_OVERLAP.1 {
                return Err(GbxError::SingularTransition { u, v });
            }
            let r4 = r2 * r2;
            let a = (v * v - u * u) / r4;
            let b = 2.0 * u * v / r4;
            Ok(Transition {
                point: (u / r2, -v / r2),
                jacobian: [[a, -b], [b, a]],
            })
        }
    }
}

/// Largest metric disagreement on the sphere overlap.
///
/// Samples the annulus `1/2 ≤ r ≤ 2` of each chart on an `n × n` polar grid,
/// pulls the other chart's metric back through [`transition_map`] and returns
/// the maximum absolute component difference.
pub fn check_overlap_consistency(surface: &ChartedSurface, n_samples: usize) -> Result<f64> {
    if surface.charts.len() != 2 {
        return Err(GbxError::Config(
            "overlap check needs a two-chart surface".into(),
        ));
    }
    let n = n_samples.max(2);
    let mut worst: f64 = 0.0;
    for from in 0..2 {
        let here = &surface.charts[from];
        let there = &surface.charts[1 - from];
        for i in 0..n {
            let r = 0.5 + 1.5 * i as f64 / (n - 1) as f64;
            for k in 0..n {
                let phi = TWO_PI * (k as f64 + 0.5) / n as f64;
                let (u, v) = (r * phi.cos(), r * phi.sin());
                let t = transition_map(surface.gluing, from, u, v)?;
                let g = here.metric.components(u, v);
                let h = there.metric.components(t.point.0, t.point.1);
                let j = t.jacobian;
                // (J^T h J)_{ab}
                let pull = |a: usize, b: usize| {
                    h[0] * j[0][a] * j[0][b]
                        + h[1] * (j[0][a] * j[1][b] + j[1][a] * j[0][b])
                        + h[2] * j[1][a] * j[1][b]
                };
                let pulled = [pull(0, 0), pull(0, 1), pull(1, 1)];
                for c in 0..3 {
                    worst = worst.max((g[c] - pulled[c]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Midpoint-rule integral of a 2-form over the surface.
///
/// `density_per_chart[i]` is the coefficient of `du ∧ dv` on chart `i`. Each
/// chart contributes over its own region with `resolution × resolution`
/// cells: a tensor grid on rectangles, a polar `(r, φ)` grid on disks. Rows
/// are evaluated in parallel and summed in a fixed order.
pub fn integrate_2form(
    surface: &ChartedSurface,
    density_per_chart: &[ScalarField],
    resolution: usize,
) -> Result<f64> {
    if density_per_chart.len() != surface.charts.len() {
        return Err(GbxError::Config(format!(
            "expected {} densities, got {}",
            surface.charts.len(),
            density_per_chart.len()
        )));
    }
    if resolution == 0 {
        return Err(GbxError::Config(
            "quadrature resolution must be positive".into(),
        ));
    }
    let mut total = 0.0;
    for (chart, density) in surface.charts.iter().zip(density_per_chart) {
        total += integrate_region(chart, density, resolution)?;
    }
    Ok(total)
}

fn integrate_region(chart: &Chart, density: &ScalarField, n: usize) -> Result<f64> {
    let node = |u: f64, v: f64| -> Result<f64> {
        let x = density.eval(u, v);
        if x.is_finite() {
            Ok(x)
        } else {
            Err(GbxError::NonFinite {
                chart: chart.id.clone(),
                u,
                v,
                value: x,
            })
        }
    };
    let rows: Vec<Result<f64>> = match chart.own_region {
        Region::Rect(r) => {
            let du = (r.u_max - r.u_min) / n as f64;
            let dv = (r.v_max - r.v_min) / n as f64;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let u = r.u_min + (i as f64 + 0.5) * du;
                    let mut s = 0.0;
                    for j in 0..n {
                        s += node(u, r.v_min + (j as f64 + 0.5) * dv)?;
                    }
                    Ok(s * du * dv)
                })
                .collect()
        }
        Region::Disk { center, radius } => {
            let dr = radius / n as f64;
            let dphi = TWO_PI / n as f64;
            let trig: Vec<(f64, f64)> = (0..n)
                .map(|k| ((k as f64 + 0.5) * dphi).sin_cos())
                .collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let r = (i as f64 + 0.5) * dr;
                    let mut s = 0.0;
                    for &(sin, cos) in &trig {
                        s += node(center.0 + r * cos, center.1 + r * sin)?;
                    }
                    Ok(s * r * dr * dphi)
                })
                .collect()
        }
    };
    let mut total = 0.0;
    for row in rows {
        total += row?;
    }
    Ok(total)
}
