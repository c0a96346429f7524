use std::fmt;
use std::sync::Arc;

use crate::error::{GbxError, Result};
use crate::expr::Expr;
use crate::jet::Jet;

/// Samples on a uniform grid over a rectangle, interpolated bilinearly.
///
/// `values[j * nu + i]` is the sample at `u_i`, `v_j`; samples sit on the
/// rectangle corners and are equally spaced in between.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub nu: usize,
    pub nv: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(
        u_range: (f64, f64),
        v_range: (f64, f64),
        nu: usize,
        nv: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if nu < 2 || nv < 2 {
            return Err(GbxError::Config(format!(
                "grid field needs at least 2 samples per axis, got {nu}x{nv}"
            )));
        }
        if values.len() != nu * nv {
            return Err(GbxError::Config(format!(
                "grid field expects {} values, got {}",
                nu * nv,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(GbxError::Config(format!(
                "grid field contains non-finite sample {bad}"
            )));
        }
        if !(u_range.1 > u_range.0 && v_range.1 > v_range.0) {
            return Err(GbxError::Config("grid field has an empty rectangle".into()));
        }
        Ok(GridField {
            u_range,
            v_range,
            nu,
            nv,
            values,
        })
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let locate = |x: f64, (lo, hi): (f64, f64), n: usize| {
            let t = ((x - lo) / (hi - lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            (i, t - i as f64)
        };
        let (i, s) = locate(u, self.u_range, self.nu);
        let (j, t) = locate(v, self.v_range, self.nv);
        let at = |i: usize, j: usize| self.values[j * self.nu + i];
        (1.0 - s) * (1.0 - t) * at(i, j)
            + s * (1.0 - t) * at(i + 1, j)
            + (1.0 - s) * t * at(i, j + 1)
            + s * t * at(i + 1, j + 1)
    }
}

type FieldFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A real function of the chart coordinates `(u, v)`.
#[derive(Clone)]
pub enum ScalarField {
    Expr { source: Arc<str>, expr: Arc<Expr> },
    Grid(Arc<GridField>),
    Func(Arc<FieldFn>),
}

impl ScalarField {
    pub fn parse(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        Ok(ScalarField::Expr {
            source: source.into(),
            expr: Arc::new(expr),
        })
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::Expr {
            source: format!("{c:?}").into(),
            expr: Arc::new(Expr::Num(c)),
        }
    }

    pub fn from_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Func(Arc::new(f))
    }

    pub fn grid(grid: GridField) -> Self {
        ScalarField::Grid(Arc::new(grid))
    }

    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            ScalarField::Expr { expr, .. } => expr.eval(u, v),
            ScalarField::Grid(g) => g.eval(u, v),
            ScalarField::Func(f) => f(u, v),
        }
    }

    /// Exact first and second derivatives, available for expression fields only.
    pub fn jet(&self, u: f64, v: f64) -> Option<Jet> {
        match self {
            ScalarField::Expr { expr, .. } => Some(expr.eval_jet(u, v)),
            _ => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, ScalarField::Expr { .. })
    }

    pub fn source(&self) -> Option<&str> {
        match self {
            ScalarField::Expr { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Expr { source, .. } => write!(f, "Expr({source:?})"),
            ScalarField::Grid(g) => write!(f, "Grid({}x{})", g.nu, g.nv),
            ScalarField::Func(_) => f.write_str("Func(..)"),
        }
    }
}
