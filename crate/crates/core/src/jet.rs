//! Second-order forward-mode derivatives in the two chart variables.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `(u, v)`. Expression trees are evaluated generically over the
//! [`Real`] trait so the same evaluator produces plain values or jets.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type an expression can be evaluated over.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn pow(self, e: Self) -> Self;
}

impl Real for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn pow(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

/// Value, gradient `[d/du, d/dv]` and Hessian `[uu, uv, vv]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub val: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl Jet {
    pub fn var_u(u: f64) -> Self {
        Jet {
            val: u,
            grad: [1.0, 0.0],
            hess: [0.0; 3],
        }
    }

    pub fn var_v(v: f64) -> Self {
        Jet {
            val: v,
            grad: [0.0, 1.0],
            hess: [0.0; 3],
        }
    }

    /// Laplacian `f_uu + f_vv`.
    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[2]
    }

    fn is_constant(&self) -> bool {
        self.grad == [0.0, 0.0] && self.hess == [0.0; 3]
    }

    /// Apply a scalar function given its first and second derivative at `val`.
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Jet {
        let [gu, gv] = self.grad;
        let [huu, huv, hvv] = self.hess;
        Jet {
            val: f,
            grad: [df * gu, df * gv],
            hess: [
                d2f * gu * gu + df * huu,
                d2f * gu * gv + df * huv,
                d2f * gv * gv + df * hvv,
            ],
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            val: self.val + o.val,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1]],
            hess: [
                self.hess[0] + o.hess[0],
                self.hess[1] + o.hess[1],
                self.hess[2] + o.hess[2],
            ],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            val: -self.val,
            grad: [-self.grad[0], -self.grad[1]],
            hess: [-self.hess[0], -self.hess[1], -self.hess[2]],
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self, o);
        Jet {
            val: a.val * b.val,
            grad: [
                a.grad[0] * b.val + a.val * b.grad[0],
                a.grad[1] * b.val + a.val * b.grad[1],
            ],
            hess: [
                a.hess[0] * b.val + 2.0 * a.grad[0] * b.grad[0] + a.val * b.hess[0],
                a.hess[1] * b.val
                    + a.grad[0] * b.grad[1]
                    + a.grad[1] * b.grad[0]
                    + a.val * b.hess[1],
                a.hess[2] * b.val + 2.0 * a.grad[1] * b.grad[1] + a.val * b.hess[2],
            ],
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let x = o.val;
        let recip = o.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
        self * recip
    }
}

impl Real for Jet {
    fn constant(c: f64) -> Self {
        Jet {
            val: c,
            grad: [0.0; 2],
            hess: [0.0; 3],
        }
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tan(self) -> Self {
        let t = self.val.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let x = self.val;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }
    fn abs(self) -> Self {
        let sign = if self.val < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.val.abs(), sign, 0.0)
    }
    fn atan2(self, x: Self) -> Self {
        let y = self;
        let r2 = x.val * x.val + y.val * y.val;
        // d(theta) = (x dy - y dx) / r2
        let num = [
            x.val * y.grad[0] - y.val * x.grad[0],
            x.val * y.grad[1] - y.val * x.grad[1],
        ];
        let dr2 = [
            2.0 * (x.val * x.grad[0] + y.val * y.grad[0]),
            2.0 * (x.val * x.grad[1] + y.val * y.grad[1]),
        ];
        // d_b(num_a) with Hessian index pairs (0,0), (0,1), (1,1)
        let dnum = |a: usize, b: usize, h: usize| {
            x.grad[b] * y.grad[a] + x.val * y.hess[h] - y.grad[b] * x.grad[a] - y.val * x.hess[h]
        };
        let second =
            |a: usize, b: usize, h: usize| (dnum(a, b, h) * r2 - num[a] * dr2[b]) / (r2 * r2);
        Jet {
            val: y.val.atan2(x.val),
            grad: [num[0] / r2, num[1] / r2],
            hess: [second(0, 0, 0), second(0, 1, 1), second(1, 1, 2)],
        }
    }
    fn pow(self, e: Self) -> Self {
        if e.is_constant() {
            let c = e.val;
            let x = self.val;
            let d1 = if c == 0.0 { 0.0 } else { c * x.powf(c - 1.0) };
            let d2 = if c == 0.0 || c == 1.0 {
                0.0
            } else {
                c * (c - 1.0) * x.powf(c - 2.0)
            };
            self.chain(x.powf(c), d1, d2)
        } else {
            (e * self.ln()).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet, Jet) -> Jet, g: impl Fn(f64, f64) -> f64, u: f64, v: f64) {
        let j = f(Jet::var_u(u), Jet::var_v(v));
        let h = 1e-4;
        let du = (g(u + h, v) - g(u - h, v)) / (2.0 * h);
        let dv = (g(u, v + h) - g(u, v - h)) / (2.0 * h);
        let duu = (g(u + h, v) - 2.0 * g(u, v) + g(u - h, v)) / (h * h);
        let dvv = (g(u, v + h) - 2.0 * g(u, v) + g(u, v - h)) / (h * h);
        let duv =
            (g(u + h, v + h) - g(u + h, v - h) - g(u - h, v + h) + g(u - h, v - h)) / (4.0 * h * h);
        assert!((j.val - g(u, v)).abs() < 1e-12);
        assert!((j.grad[0] - du).abs() < 1e-6, "du {} vs {}", j.grad[0], du);
        assert!((j.grad[1] - dv).abs() < 1e-6, "dv {} vs {}", j.grad[1], dv);
        assert!(
            (j.hess[0] - duu).abs() < 1e-4,
            "duu {} vs {}",
            j.hess[0],
            duu
        );
        assert!(
            (j.hess[1] - duv).abs() < 1e-4,
            "duv {} vs {}",
            j.hess[1],
            duv
        );
        assert!(
            (j.hess[2] - dvv).abs() < 1e-4,
            "dvv {} vs {}",
            j.hess[2],
            dvv
        );
    }

    #[test]
    fn products_and_quotients() {
        fd_check(
            |u, v| u * v * v / (Jet::constant(1.0) + u * u),
            |u, v| u * v * v / (1.0 + u * u),
            0.3,
            -0.7,
        );
    }

    #[test]
    fn transcendental_functions() {
        fd_check(
            |u, v| (u * v).sin() + v.cos().exp(),
            |u, v| (u * v).sin() + v.cos().exp(),
            0.4,
            1.1,
        );
        fd_check(
            |u, v| (u + v).tan() * (Jet::constant(2.0) + u).ln(),
            |u, v| (u + v).tan() * (2.0 + u).ln(),
            0.2,
            0.1,
        );
        fd_check(
            |u, v| (u * u + v * v + Jet::constant(1.0)).sqrt(),
            |u, v| (u * u + v * v + 1.0).sqrt(),
            -0.5,
            0.8,
        );
    }

    #[test]
    fn atan2_derivatives() {
        fd_check(|u, v| v.atan2(u), |u, v| v.atan2(u), 0.6, -0.9);
        fd_check(
            |u, v| (u * v).atan2(u - v * v),
            |u, v| (u * v).atan2(u - v * v),
            1.3,
            0.4,
        );
    }

    #[test]
    fn powers() {
        fd_check(|u, _| u.pow(Jet::constant(3.0)), |u, _| u.powi(3), 0.7, 0.0);
        fd_check(|u, v| u.pow(v), |u, v| u.powf(v), 1.4, 0.6);
        // x^1 at zero must not produce NaN in the Hessian
        let j = Jet::var_u(0.0).pow(Jet::constant(1.0));
        assert_eq!(j.hess, [0.0; 3]);
        let j = Jet::var_u(0.0).pow(Jet::constant(2.0));
        assert_eq!(j.hess[0], 2.0);
    }
}
