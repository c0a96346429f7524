//! Orthonormal frames, the Levi-Civita connection form and curvature, and
//! the vertical 1-forms on the circle and line bundles.
//!
//! Conventions: `e1 = ∂u / √g11` and `e2` completes a positively oriented
//! orthonormal frame. The connection form `G = G1 du + G2 dv` is defined by
//! `∇e1 = G e2`, `∇e2 = -G e1`. With `K` the Gaussian curvature this gives
//! `dG = -K √det(g) du ∧ dv`; for a conformal factor `λ`,
//! `G = -∂v(log λ) du + ∂u(log λ) dv` and `K = -λ⁻² Δ log λ`.
//!
//! Fiber coordinate `ψ` is the angle from `e1` towards `e2`. A vertical form
//! is `A_ψ dψ + A_u du + A_v dv` on a chart's piece of the bundle.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GbxError, Result};
use crate::field::ScalarField;
use crate::geom::{transition_map, Chart, ChartedSurface, Metric};
use crate::jet::{Jet, Real};

/// Fiber generator `[dψ / 2π]`: a full turn integrates to one.
pub const CIRCLE_NORMALIZATION: f64 = 1.0 / (2.0 * PI);
/// Line-bundle normalization: a full turn of `RP¹` integrates to one half.
pub const PROJECTIVE_NORMALIZATION: f64 = 1.0 / PI;
/// Normalization under which the `RP¹` generator integrates to `π`.
pub const PI_PERIOD_NORMALIZATION: f64 = 2.0;

pub const DEFAULT_H_G: f64 = 1e-5;
pub const DEFAULT_H_K: f64 = 1e-4;
pub const DEFAULT_H_STRUCTURE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Exact derivatives of expression fields where available.
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeOptions {
    pub mode: DerivativeMode,
    pub h_g: f64,
    pub h_k: f64,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        DerivativeOptions {
            mode: DerivativeMode::Analytic,
            h_g: DEFAULT_H_G,
            h_k: DEFAULT_H_K,
        }
    }
}

impl DerivativeOptions {
    pub fn finite_difference() -> Self {
        DerivativeOptions {
            mode: DerivativeMode::FiniteDifference,
            ..Default::default()
        }
    }
}

/// Frame vectors in the coordinate basis `(∂u, ∂v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub e1: [f64; 2],
    pub e2: [f64; 2],
}

impl Frame {
    /// The frame rotated by a constant angle `beta`.
    pub fn rotated(&self, beta: f64) -> Frame {
        let (s, c) = beta.sin_cos();
        Frame {
            e1: [
                c * self.e1[0] + s * self.e2[0],
                c * self.e1[1] + s * self.e2[1],
            ],
            e2: [
                -s * self.e1[0] + c * self.e2[0],
                -s * self.e1[1] + c * self.e2[1],
            ],
        }
    }
}

/// Gram–Schmidt on `(∂u, ∂v)` for metric components `(g11, g12, g22)`.
pub fn frame_from_metric(g: [f64; 3]) -> Frame {
    let s11 = g[0].sqrt();
    let sdet = (g[0] * g[2] - g[1] * g[1]).sqrt();
    Frame {
        e1: [1.0 / s11, 0.0],
        e2: [-g[1] / (s11 * sdet), g[0] / (s11 * sdet)],
    }
}

/// `e1`, `e2` coefficient fields of the Gram–Schmidt frame of `chart`.
pub struct FrameFields {
    pub e1: [ScalarField; 2],
    pub e2: [ScalarField; 2],
}

pub fn gram_schmidt_frame(chart: &Chart) -> FrameFields {
    let comp = |pick: fn(&Frame) -> f64| {
        let chart = chart.clone();
        ScalarField::from_fn(move |u, v| match chart.eval_metric(u, v) {
            Ok(g) => pick(&frame_from_metric(g)),
            Err(_) => f64::NAN,
        })
    };
    FrameFields {
        e1: [comp(|f| f.e1[0]), comp(|f| f.e1[1])],
        e2: [comp(|f| f.e2[0]), comp(|f| f.e2[1])],
    }
}

/// Connection coefficient fields `[G1, G2]` of the Levi-Civita connection.
pub fn levi_civita_g(chart: &Chart, opts: DerivativeOptions) -> [ScalarField; 2] {
    let conn = FrameConnection::new(&single_chart_surface(chart), opts);
    let c2 = conn.clone();
    [
        ScalarField::from_fn(move |u, v| {
            conn.connection(0, u, v).map(|g| g[0]).unwrap_or(f64::NAN)
        }),
        ScalarField::from_fn(move |u, v| c2.connection(0, u, v).map(|g| g[1]).unwrap_or(f64::NAN)),
    ]
}

/// Gaussian curvature field of `chart`.
pub fn curvature_k(chart: &Chart, opts: DerivativeOptions) -> ScalarField {
    let conn = FrameConnection::new(&single_chart_surface(chart), opts);
    ScalarField::from_fn(move |u, v| conn.curvature(0, u, v).unwrap_or(f64::NAN))
}

fn single_chart_surface(chart: &Chart) -> ChartedSurface {
    ChartedSurface {
        name: chart.id.clone(),
        gluing: crate::geom::Gluing::TorusPeriodic,
        charts: vec![chart.clone()],
        euler_char: 0,
    }
}

/// Frame, connection form and curvature for every chart of a surface.
#[derive(Clone, Debug)]
pub struct FrameConnection {
    surface: ChartedSurface,
    opts: DerivativeOptions,
    stencil_shrunk: Arc<AtomicBool>,
}

impl FrameConnection {
    pub fn new(surface: &ChartedSurface, opts: DerivativeOptions) -> Self {
        FrameConnection {
            surface: surface.clone(),
            opts,
            stencil_shrunk: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn surface(&self) -> &ChartedSurface {
        &self.surface
    }

    pub fn options(&self) -> DerivativeOptions {
        self.opts
    }

    /// Whether some difference stencil had to shrink near a chart boundary.
    pub fn stencil_shrunk(&self) -> bool {
        self.stencil_shrunk.load(Ordering::Relaxed)
    }

    fn chart(&self, chart: usize) -> &Chart {
        &self.surface.charts[chart]
    }

    pub fn frame(&self, chart: usize, u: f64, v: f64) -> Result<Frame> {
        Ok(frame_from_metric(self.chart(chart).eval_metric(u, v)?))
    }

    /// Largest deviation of `g(e_a, e_b)` from `δ_ab`.
    pub fn orthonormality_residual(&self, chart: usize, u: f64, v: f64) -> Result<f64> {
        let c = self.chart(chart);
        let g = c.eval_metric(u, v)?;
        let f = frame_from_metric(g);
        Ok([
            (c.inner(g, f.e1, f.e1) - 1.0).abs(),
            c.inner(g, f.e1, f.e2).abs(),
            (c.inner(g, f.e2, f.e2) - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max))
    }

    /// `[G1, G2]` at `(u, v)`.
    pub fn connection(&self, chart: usize, u: f64, v: f64) -> Result<[f64; 2]> {
        let c = self.chart(chart);
        c.check_point(u, v)?;
        let analytic = self.opts.mode == DerivativeMode::Analytic && c.metric.is_analytic();
        if analytic {
            if let Metric::Conformal(lambda) = &c.metric {
                let l = lambda.jet(u, v).expect("analytic field");
                if l.val.is_nan() || l.val <= 0.0 {
                    return Err(GbxError::DegenerateMetric {
                        chart: c.id.clone(),
                        u,
                        v,
                    });
                }
                let log = l.ln();
                return Ok([-log.grad[1], log.grad[0]]);
            }
            let jets = metric_jets(&c.metric, u, v);
            let g = [jets[0].val, jets[1].val, jets[2].val];
            let dg = [
                [jets[0].grad[0], jets[1].grad[0], jets[2].grad[0]],
                [jets[0].grad[1], jets[1].grad[1], jets[2].grad[1]],
            ];
            return connection_from_metric_derivatives(c, u, v, g, dg);
        }
        let g = c.eval_metric(u, v)?;
        let du = self.central(chart, u, v, self.opts.h_g, 0, |u, v| {
            Ok(c.eval_metric(u, v)?.to_vec())
        })?;
        let dv = self.central(chart, u, v, self.opts.h_g, 1, |u, v| {
            Ok(c.eval_metric(u, v)?.to_vec())
        })?;
        connection_from_metric_derivatives(
            c,
            u,
            v,
            g,
            [[du[0], du[1], du[2]], [dv[0], dv[1], dv[2]]],
        )
    }

    /// Gaussian curvature at `(u, v)`.
    pub fn curvature(&self, chart: usize, u: f64, v: f64) -> Result<f64> {
        let c = self.chart(chart);
        c.check_point(u, v)?;
        if self.opts.mode == DerivativeMode::Analytic {
            if let Metric::Conformal(lambda) = &c.metric {
                if let Some(l) = lambda.jet(u, v) {
                    if l.val.is_nan() || l.val <= 0.0 {
                        return Err(GbxError::DegenerateMetric {
                            chart: c.id.clone(),
                            u,
                            v,
                        });
                    }
                    let log = l.ln();
                    return Ok(-log.laplacian() / (l.val * l.val));
                }
            }
        }
        let sqrt_g = c.area_density(u, v)?;
        let dg_u = self.central(chart, u, v, self.opts.h_k, 0, |u, v| {
            Ok(self.connection(chart, u, v)?.to_vec())
        })?;
        let dg_v = self.central(chart, u, v, self.opts.h_k, 1, |u, v| {
            Ok(self.connection(chart, u, v)?.to_vec())
        })?;
        Ok(-(dg_u[1] - dg_v[0]) / sqrt_g)
    }

    /// `K √det(g)`, the density of `K dσ` against `du ∧ dv`.
    pub fn curvature_density(&self, chart: usize, u: f64, v: f64) -> Result<f64> {
        Ok(self.curvature(chart, u, v)? * self.chart(chart).area_density(u, v)?)
    }

    /// One `K √det(g)` field per chart; evaluation failures become NaN.
    pub fn curvature_density_fields(&self) -> Vec<ScalarField> {
        (0..self.surface.charts.len())
            .map(|i| {
                let me = self.clone();
                ScalarField::from_fn(move |u, v| me.curvature_density(i, u, v).unwrap_or(f64::NAN))
            })
            .collect()
    }

    /// Central difference along `axis`, shrinking the step at chart edges.
    pub(crate) fn central(
        &self,
        chart: usize,
        u: f64,
        v: f64,
        h: f64,
        axis: usize,
        f: impl Fn(f64, f64) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let c = self.chart(chart);
        let h = if c.periodic {
            h
        } else {
            let (x, lo, hi) = if axis == 0 {
                (u, c.domain.u_min, c.domain.u_max)
            } else {
                (v, c.domain.v_min, c.domain.v_max)
            };
            let room = (x - lo).min(hi - x);
            if room < 1e-12 {
                return Err(GbxError::StencilOutOfDomain {
                    chart: c.id.clone(),
                    u,
                    v,
                });
            }
            if room < h {
                self.stencil_shrunk.store(true, Ordering::Relaxed);
                room
            } else {
                h
            }
        };
        let (p, m) = if axis == 0 {
            (f(u + h, v)?, f(u - h, v)?)
        } else {
            (f(u, v + h)?, f(u, v - h)?)
        };
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    }
}

fn metric_jets(metric: &Metric, u: f64, v: f64) -> [Jet; 3] {
    match metric {
        Metric::Conformal(l) => {
            let l = l.jet(u, v).expect("analytic field");
            let g = l * l;
            [g, Jet::constant(0.0), g]
        }
        Metric::General { g11, g12, g22 } => [
            g11.jet(u, v).expect("analytic field"),
            g12.jet(u, v).expect("analytic field"),
            g22.jet(u, v).expect("analytic field"),
        ],
    }
}

/// `G_i = g(∇_i e1, e2)` from metric values and first derivatives.
///
/// With `e1 = a ∂u`, `g(∂u, e2) = 0` so `G_i = a e2^l Γ_{l,iu}`, where
/// `Γ_{l,ij}` are Christoffel symbols of the first kind. `dg[k]` holds the
/// `k`-th partial derivative of `(g11, g12, g22)`.
fn connection_from_metric_derivatives(
    chart: &Chart,
    u: f64,
    v: f64,
    g: [f64; 3],
    dg: [[f64; 3]; 2],
) -> Result<[f64; 2]> {
    if !crate::geom::is_positive_definite(g) {
        return Err(GbxError::DegenerateMetric {
            chart: chart.id.clone(),
            u,
            v,
        });
    }
    let idx = |a: usize, b: usize| if a == b { 2 * a } else { 1 };
    let d = |a: usize, b: usize, k: usize| dg[k][idx(a, b)];
    let christoffel = |l: usize, i: usize, j: usize| 0.5 * (d(l, j, i) + d(l, i, j) - d(i, j, l));
    let frame = frame_from_metric(g);
    let a = frame.e1[0];
    let mut out = [0.0; 2];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = a
            * (0..2)
                .map(|l| frame.e2[l] * christoffel(l, i, 0))
                .sum::<f64>();
    }
    Ok(out)
}

/// A linear connection on a rank-2 bundle, as matrices `Γ_i^a_b` in a
/// trivializing frame (`[i][a][b]`, `i` the base direction).
pub trait LinearConnection: Send + Sync {
    fn matrices(&self, chart: usize, u: f64, v: f64) -> Result<[[[f64; 2]; 2]; 2]>;
    fn surface(&self) -> &ChartedSurface;
}

impl LinearConnection for FrameConnection {
    fn matrices(&self, chart: usize, u: f64, v: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        let g = self.connection(chart, u, v)?;
        Ok([[[0.0, -g[0]], [g[0], 0.0]], [[0.0, -g[1]], [g[1], 0.0]]])
    }

    fn surface(&self) -> &ChartedSurface {
        &self.surface
    }
}

/// `Γ' = Γ + ξ ⊗ δ`: a deformation that induces the same projective connection.
#[derive(Clone, Debug)]
pub struct DeformedConnection {
    pub base: FrameConnection,
    /// `(ξ1, ξ2)` in each chart's coordinates.
    pub xi: Vec<[ScalarField; 2]>,
}

impl LinearConnection for DeformedConnection {
    fn matrices(&self, chart: usize, u: f64, v: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        let mut m = self.base.matrices(chart, u, v)?;
        for (i, mi) in m.iter_mut().enumerate() {
            let x = self.xi[chart][i].eval(u, v);
            mi[0][0] += x;
            mi[1][1] += x;
        }
        Ok(m)
    }

    fn surface(&self) -> &ChartedSurface {
        self.base.surface()
    }
}

/// `R_uv = ∂u Γ_v - ∂v Γ_u + [Γ_u, Γ_v]` by central differences of step `h`.
pub fn curvature_matrix(
    conn: &dyn LinearConnection,
    chart: usize,
    u: f64,
    v: f64,
    h: f64,
) -> Result<[[f64; 2]; 2]> {
    let c = &conn.surface().charts[chart];
    if !c.periodic && !(c.contains(u - h, v - h) && c.contains(u + h, v + h)) {
        return Err(GbxError::StencilOutOfDomain {
            chart: c.id.clone(),
            u,
            v,
        });
    }
    let g = conn.matrices(chart, u, v)?;
    let gv_p = conn.matrices(chart, u + h, v)?[1];
    let gv_m = conn.matrices(chart, u - h, v)?[1];
    let gu_p = conn.matrices(chart, u, v + h)?[0];
    let gu_m = conn.matrices(chart, u, v - h)?[0];
    let mut r = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let comm: f64 = (0..2)
                .map(|k| g[0][a][k] * g[1][k][b] - g[1][a][k] * g[0][k][b])
                .sum();
            r[a][b] = (gv_p[a][b] - gv_m[a][b]) / (2.0 * h) - (gu_p[a][b] - gu_m[a][b]) / (2.0 * h)
                + comm;
        }
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormKind {
    /// Unit circle bundle of a rank-2 bundle.
    Circle,
    /// Projectivization, fiber `RP¹`.
    Projective,
}

/// Vertical 1-form `A_ψ dψ + A_u du + A_v dv` built from a linear connection:
/// the normalized pull-back of `(-y² Dy¹ + y¹ Dy²) / |y|²`, halved on the
/// line bundle.
pub struct VerticalForm<'a> {
    pub kind: FormKind,
    pub normalization: f64,
    pub fiber_period: f64,
    connection: &'a dyn LinearConnection,
}

pub fn circle_vertical_form(conn: &dyn LinearConnection, normalization: f64) -> VerticalForm<'_> {
    VerticalForm {
        kind: FormKind::Circle,
        normalization,
        fiber_period: 2.0 * PI,
        connection: conn,
    }
}

pub fn projective_alpha(conn: &dyn LinearConnection, normalization: f64) -> VerticalForm<'_> {
    VerticalForm {
        kind: FormKind::Projective,
        normalization,
        fiber_period: PI,
        connection: conn,
    }
}

impl VerticalForm<'_> {
    pub fn connection(&self) -> &dyn LinearConnection {
        self.connection
    }

    fn scale(&self) -> f64 {
        match self.kind {
            FormKind::Circle => self.normalization,
            FormKind::Projective => 0.5 * self.normalization,
        }
    }

    /// `(A_ψ, A_u, A_v)` at base point `(u, v)` and fiber angle `psi`.
    pub fn eval(&self, chart: usize, u: f64, v: f64, psi: f64) -> Result<[f64; 3]> {
        let q = angular_drift(self.connection.matrices(chart, u, v)?, psi);
        let s = self.scale();
        Ok([s, s * q[0], s * q[1]])
    }

    /// `|α(X^h)|` over the horizontal lifts of `∂u` and `∂v`.
    ///
    /// The horizontal lift of `∂_i` through `ψ` is `∂_i - q_i ∂ψ`, where `q_i`
    /// is the rate at which parallel transport turns the fiber point.
    pub fn horizontal_residual(&self, chart: usize, u: f64, v: f64, psi: f64) -> Result<f64> {
        let a = self.eval(chart, u, v, psi)?;
        let m = self.connection.matrices(chart, u, v)?;
        let y = [psi.cos(), psi.sin()];
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            // dy/dt = -Γ_i y along the lift; dψ/dt = y¹ dy²/dt - y² dy¹/dt
            let dy = [
                -(m[i][0][0] * y[0] + m[i][0][1] * y[1]),
                -(m[i][1][0] * y[0] + m[i][1][1] * y[1]),
            ];
            let dpsi = y[0] * dy[1] - y[1] * dy[0];
            worst = worst.max((a[1 + i] + a[0] * dpsi).abs());
        }
        Ok(worst)
    }

    /// Midpoint integral of the form over the fiber through `(u, v)`.
    pub fn fiber_integral(&self, chart: usize, u: f64, v: f64, samples: usize) -> Result<f64> {
        let d = self.fiber_period / samples as f64;
        let mut s = 0.0;
        for k in 0..samples {
            s += self.eval(chart, u, v, (k as f64 + 0.5) * d)?[0] * d;
        }
        Ok(s)
    }

    /// Expected `du ∧ dv` coefficient of `dα`: `-c · n · K √det(g)` with
    /// `c = 1` on the circle bundle and `c = 1/2` on the line bundle.
    pub fn expected_curvature_term(
        &self,
        conn: &FrameConnection,
        chart: usize,
        u: f64,
        v: f64,
    ) -> Result<f64> {
        Ok(-self.scale() * conn.curvature_density(chart, u, v)?)
    }

    /// Central-difference exterior derivative at `(u, v, psi)`:
    /// `[dψ∧du, dψ∧dv, du∧dv]` coefficients.
    pub fn exterior_derivative(
        &self,
        chart: usize,
        u: f64,
        v: f64,
        psi: f64,
        h: f64,
    ) -> Result<[f64; 3]> {
        let c = &self.connection.surface().charts[chart];
        if !c.periodic
            && !(c.domain.contains(u - 2.0 * h, v - 2.0 * h)
                && c.domain.contains(u + 2.0 * h, v + 2.0 * h))
        {
            return Err(GbxError::StencilOutOfDomain {
                chart: c.id.clone(),
                u,
                v,
            });
        }
        // fourth-order five-point central differences with step h
        let d = |axis: usize| -> Result<[f64; 3]> {
            let at = |t: f64| {
                let mut x = [u, v, psi];
                x[axis] += t;
                self.eval(chart, x[0], x[1], x[2])
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            Ok(std::array::from_fn(|k| {
                (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h)
            }))
        };
        let (du, dv, dp) = (d(0)?, d(1)?, d(2)?);
        Ok([dp[1] - du[0], dp[2] - dv[0], du[2] - dv[1]])
    }
}

/// `q_i = (-y² (Γ_i y)¹ + y¹ (Γ_i y)²)` for the unit fiber point at angle `psi`.
fn angular_drift(m: [[[f64; 2]; 2]; 2], psi: f64) -> [f64; 2] {
    let y = [psi.cos(), psi.sin()];
    let mut q = [0.0; 2];
    for (i, qi) in q.iter_mut().enumerate() {
        let gy = [
            m[i][0][0] * y[0] + m[i][0][1] * y[1],
            m[i][1][0] * y[0] + m[i][1][1] * y[1],
        ];
        *qi = -y[1] * gy[0] + y[0] * gy[1];
    }
    q
}

/// Partition of unity on the sphere overlap, as weights `(ρ_north, ρ_south)`
/// in north-chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BumpWeights {
    /// `ρ_north = cos²(π/2 · t)` with `t` running from 0 at `inner` to 1 at `outer`.
    CosineTaper {
        inner: f64,
        outer: f64,
    },
    Constant(f64, f64),
}

impl BumpWeights {
    pub fn at(&self, u: f64, v: f64) -> (f64, f64) {
        match *self {
            BumpWeights::CosineTaper { inner, outer } => {
                let r = u.hypot(v);
                let t = ((r - inner) / (outer - inner)).clamp(0.0, 1.0);
                let (s, c) = (0.5 * PI * t).sin_cos();
                (c * c, s * s)
            }
            BumpWeights::Constant(a, b) => (a, b),
        }
    }
}

/// Blend of per-chart vertical forms, expressed in the first chart's
/// trivialization.
pub struct BlendedForm<'a> {
    forms: &'a [VerticalForm<'a>],
    weights: BumpWeights,
    frames: FrameConnection,
}

pub fn blend_vertical_form<'a>(
    surface: &ChartedSurface,
    forms: &'a [VerticalForm<'a>],
    weights: BumpWeights,
) -> Result<BlendedForm<'a>> {
    if surface.charts.len() != 2 || forms.len() != 2 {
        return Err(GbxError::Config(
            "blending needs a two-chart surface and two forms".into(),
        ));
    }
    if forms[0].kind != forms[1].kind {
        return Err(GbxError::Config(
            "cannot blend forms on different fiber types".into(),
        ));
    }
    let n = 64;
    for i in 0..n {
        for k in 0..n {
            let r = 2.4 * i as f64 / (n - 1) as f64;
            let phi = 2.0 * PI * k as f64 / n as f64;
            let (a, b) = weights.at(r * phi.cos(), r * phi.sin());
            if (a + b - 1.0).abs() > 1e-10 || a < 0.0 || b < 0.0 {
                return Err(GbxError::Config(format!(
                    "bump weights sum to {} at r = {r}",
                    a + b
                )));
            }
        }
    }
    if let BumpWeights::CosineTaper { inner, .. } = weights {
        if inner < crate::geom::SPHERE_OVERLAP.0 {
            return Err(GbxError::Config(
                "taper must stay inside the chart overlap".into(),
            ));
        }
    }
    Ok(BlendedForm {
        forms,
        weights,
        frames: FrameConnection::new(surface, DerivativeOptions::default()),
    })
}

impl BlendedForm<'_> {
    /// Angle of the south frame's `e1` measured in the north frame.
    fn frame_offset(&self, u: f64, v: f64) -> Result<f64> {
        let gluing = self.frames.surface().gluing;
        let t = transition_map(gluing, 0, u, v)?;
        let f_south = self.frames.frame(1, t.point.0, t.point.1)?;
        let j = t.jacobian;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let w = f_south.e1;
        let back = [
            (j[1][1] * w[0] - j[0][1] * w[1]) / det,
            (-j[1][0] * w[0] + j[0][0] * w[1]) / det,
        ];
        let north = &self.frames.surface().charts[0];
        let g = north.eval_metric(u, v)?;
        let f = frame_from_metric(g);
        Ok(north.inner(g, back, f.e2).atan2(north.inner(g, back, f.e1)))
    }

    /// `(A_ψ, A_u, A_v)` of the blend at north-chart point `(u, v)`.
    pub fn eval(&self, u: f64, v: f64, psi: f64) -> Result<[f64; 3]> {
        let (w0, w1) = self.weights.at(u, v);
        let mut out = [0.0; 3];
        if w0 != 0.0 {
            let a = self.forms[0].eval(0, u, v, psi)?;
            for k in 0..3 {
                out[k] += w0 * a[k];
            }
        }
        if w1 != 0.0 {
            let t = transition_map(self.frames.surface().gluing, 0, u, v)?;
            let beta = self.frame_offset(u, v)?;
            let h = 1e-5;
            let wrap = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
            let dbeta = [
                wrap(self.frame_offset(u + h, v)? - self.frame_offset(u - h, v)?) / (2.0 * h),
                wrap(self.frame_offset(u, v + h)? - self.frame_offset(u, v - h)?) / (2.0 * h),
            ];
            let a = self.forms[1].eval(1, t.point.0, t.point.1, psi - beta)?;
            let j = t.jacobian;
            out[0] += w1 * a[0];
            for b in 0..2 {
                out[1 + b] += w1 * (-a[0] * dbeta[b] + a[1] * j[0][b] + a[2] * j[1][b]);
            }
        }
        Ok(out)
    }

    pub fn fiber_integral(&self, u: f64, v: f64, samples: usize) -> Result<f64> {
        let period = self.forms[0].fiber_period;
        let d = period / samples as f64;
        let mut s = 0.0;
        for k in 0..samples {
            s += self.eval(u, v, (k as f64 + 0.5) * d)?[0] * d;
        }
        Ok(s)
    }
}
