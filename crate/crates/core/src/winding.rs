//! Indices of singular points as winding numbers of frame angles.

use std::f64::consts::PI;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Neg};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GbxError, Result};
use crate::frames::VerticalForm;
use crate::geom::ChartedSurface;
use crate::sections::{blowup_loop, BlowupLoop, SectionSpec, SingularPoint, DEFAULT_LOOP_SAMPLES};

pub const DEFAULT_MAX_REFINEMENTS: u32 = 6;

/// An exact element of `½ Z`, stored as its numerator over 2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInteger(i64);

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger(0);

    pub fn from_integer(n: i64) -> Self {
        HalfInteger(2 * n)
    }

    pub fn from_halves(numerator: i64) -> Self {
        HalfInteger(numerator)
    }

    /// Numerator over denominator 2.
    pub fn halves(self) -> i64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// `(numerator, denominator)` in lowest terms.
    pub fn reduced(self) -> (i64, i64) {
        if self.is_integer() {
            (self.0 / 2, 1)
        } else {
            (self.0, 2)
        }
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl Add for HalfInteger {
    type Output = HalfInteger;
    fn add(self, o: HalfInteger) -> HalfInteger {
        HalfInteger(self.0 + o.0)
    }
}

impl Neg for HalfInteger {
    type Output = HalfInteger;
    fn neg(self) -> HalfInteger {
        HalfInteger(-self.0)
    }
}

impl Sum for HalfInteger {
    fn sum<I: Iterator<Item = HalfInteger>>(iter: I) -> HalfInteger {
        iter.fold(HalfInteger::ZERO, Add::add)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reduced() {
            (n, 1) => write!(f, "{n}"),
            (n, d) => write!(f, "{n}/{d}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Rational {
    numerator: i64,
    denominator: i64,
}

impl Serialize for HalfInteger {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (numerator, denominator) = self.reduced();
        Rational {
            numerator,
            denominator,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HalfInteger {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = Rational::deserialize(d)?;
        match r.denominator {
            1 => Ok(HalfInteger::from_integer(r.numerator)),
            2 => Ok(HalfInteger::from_halves(r.numerator)),
            other => Err(serde::de::Error::custom(format!(
                "denominator {other} is not 1 or 2"
            ))),
        }
    }
}

/// Adjacent samples differ by at least a quarter period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeedsRefinement {
    pub max_step: f64,
}

/// Continuous total change of a closed loop of angles sampled mod `period`.
///
/// Each step is taken on the nearest branch; the closing step from the last
/// sample back to the first is included, so the result is a multiple of
/// `period` up to rounding. Steps of a quarter period or more are refused.
pub fn unwrap_angles(samples: &[f64], period: f64) -> Result<(f64, f64), NeedsRefinement> {
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for (j, &a) in samples.iter().enumerate() {
        let b = samples[(j + 1) % samples.len()];
        let d = nearest_branch(b - a, period);
        max_step = max_step.max(d.abs());
        total += d;
    }
    if max_step >= period / 4.0 {
        return Err(NeedsRefinement { max_step });
    }
    Ok((total, max_step))
}

/// Continuous lift of the angle sequence, starting from the first sample.
pub fn unwrap_trace(samples: &[f64], period: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = match samples.first() {
        Some(&a) => a,
        None => return out,
    };
    out.push(acc);
    for w in samples.windows(2) {
        acc += nearest_branch(w[1] - w[0], period);
        out.push(acc);
    }
    out
}

fn nearest_branch(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexOptions {
    pub loop_samples: usize,
    pub max_refinements: u32,
    /// Re-run at half the radius and require the same index.
    pub check_stability: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            loop_samples: DEFAULT_LOOP_SAMPLES,
            max_refinements: DEFAULT_MAX_REFINEMENTS,
            check_stability: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub point: SingularPoint,
    /// Section factor the index belongs to (0 unless Whitney).
    pub factor: usize,
    pub index: HalfInteger,
    pub loop_samples: usize,
    pub radius: f64,
    pub refinements: u32,
    pub max_step: f64,
    /// Unwrapped change of the frame angle around the loop.
    pub total_variation: f64,
}

/// Frame angles of `factor` along the samples of `lp`.
pub fn loop_angles(
    section: &SectionSpec,
    factor: usize,
    surface: &ChartedSurface,
    lp: &BlowupLoop,
) -> Result<Vec<f64>> {
    let chart = surface.chart_index(&lp.center.chart)?;
    let domain = surface.charts[chart].domain;
    let periodic = surface.charts[chart].periodic;
    lp.samples
        .iter()
        .map(|&(u, v)| {
            let (u, v) = if periodic {
                (
                    wrap(u, domain.u_min, domain.u_max),
                    wrap(v, domain.v_min, domain.v_max),
                )
            } else {
                (u, v)
            };
            section.angle(factor, surface, chart, u, v)
        })
        .collect()
}

fn wrap(x: f64, lo: f64, hi: f64) -> f64 {
    lo + (x - lo).rem_euclid(hi - lo)
}

/// Winding of the frame angle on a single loop, doubling the sample count
/// while steps are too large.
pub fn loop_winding(
    section: &SectionSpec,
    factor: usize,
    surface: &ChartedSurface,
    lp: &BlowupLoop,
    max_refinements: u32,
) -> Result<(HalfInteger, IndexResult)> {
    let chart = surface.chart(&lp.center.chart)?;
    let period = section.factor_kind().angle_period();
    let mut lp = lp.clone();
    let mut refinements = 0;
    loop {
        let angles = loop_angles(section, factor, surface, &lp)?;
        match unwrap_angles(&angles, period) {
            Ok((total, max_step)) => {
                let index = HalfInteger::from_halves((total / PI).round() as i64);
                let result = IndexResult {
                    point: lp.center.clone(),
                    factor,
                    index,
                    loop_samples: lp.n,
                    radius: lp.radius,
                    refinements,
                    max_step,
                    total_variation: total,
                };
                return Ok((index, result));
            }
            Err(_) if refinements < max_refinements => {
                refinements += 1;
                let reversed = lp.reversed;
                lp = blowup_loop(&lp.center, chart, lp.n * 2)?;
                if reversed {
                    lp = lp.reversed();
                }
            }
            Err(_) => {
                return Err(GbxError::UnderResolved {
                    label: lp.center.label,
                })
            }
        }
    }
}

/// Index of `factor` at `p`, stable under halving the excision radius.
pub fn index_at(
    section: &SectionSpec,
    factor: usize,
    surface: &ChartedSurface,
    p: &SingularPoint,
    opts: &IndexOptions,
) -> Result<IndexResult> {
    let chart = surface.chart(&p.chart)?;
    let lp = blowup_loop(p, chart, opts.loop_samples)?;
    let (index, result) = loop_winding(section, factor, surface, &lp, opts.max_refinements)?;
    if opts.check_stability {
        let half = SingularPoint {
            radius: p.radius / 2.0,
            ..p.clone()
        };
        let lp = blowup_loop(&half, chart, opts.loop_samples)?;
        let (at_half, _) = loop_winding(section, factor, surface, &lp, opts.max_refinements)?;
        if at_half != index {
            return Err(GbxError::IndexUnstable {
                label: p.label,
                radius: p.radius,
                at_radius: index.to_string(),
                at_half: at_half.to_string(),
            });
        }
    }
    Ok(result)
}

/// Sum of indices of `factor` over `points`, with the per-point table ordered by label.
pub fn total_index_over(
    section: &SectionSpec,
    factor: usize,
    surface: &ChartedSurface,
    points: &[SingularPoint],
    opts: &IndexOptions,
) -> Result<(HalfInteger, Vec<IndexResult>)> {
    let mut table: Vec<IndexResult> = points
        .par_iter()
        .map(|p| index_at(section, factor, surface, p, opts))
        .collect::<Result<_>>()?;
    table.sort_by_key(|r| r.point.label);
    Ok((table.iter().map(|r| r.index).sum(), table))
}

/// Total index of a vector or line field over its declared points.
pub fn total_index(
    section: &SectionSpec,
    surface: &ChartedSurface,
    opts: &IndexOptions,
) -> Result<(HalfInteger, Vec<IndexResult>)> {
    total_index_over(section, 0, surface, &section.singular_points, opts)
}

/// `∮ γ*α` for the section curve over the blow-up loop of `p`, with the
/// section lifted to the bundle of `form`. Returns the nearest element of
/// `½ Z` and the raw integral.
///
/// Only the `dψ` part contributes topologically; the horizontal part is
/// `O(r²)` on small loops.
pub fn paired_index(
    form: &VerticalForm<'_>,
    section: &SectionSpec,
    factor: usize,
    surface: &ChartedSurface,
    p: &SingularPoint,
    opts: &IndexOptions,
) -> Result<(HalfInteger, f64)> {
    let chart_idx = surface.chart_index(&p.chart)?;
    let chart = &surface.charts[chart_idx];
    let period = section.factor_kind().angle_period();
    let mut n = opts.loop_samples;
    for _ in 0..=opts.max_refinements {
        let lp = blowup_loop(p, chart, n)?;
        let angles = loop_angles(section, factor, surface, &lp)?;
        if unwrap_angles(&angles, period).is_err() {
            n *= 2;
            continue;
        }
        let psi = unwrap_trace(&angles, period);
        let mut integral = 0.0;
        for j in 0..n {
            let k = (j + 1) % n;
            let (a, b) = (lp.samples[j], lp.samples[k]);
            let dpsi = if k == 0 {
                nearest_branch(angles[0] - angles[j], period)
            } else {
                psi[k] - psi[j]
            };
            let (mu, mv) = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
            let mpsi = psi[j] + 0.5 * dpsi;
            let c = form.eval(chart_idx, mu, mv, mpsi)?;
            integral += c[0] * dpsi + c[1] * (b.0 - a.0) + c[2] * (b.1 - a.1);
        }
        // the fiber generator integrates to 1 on the circle and 1/2 per half turn on RP¹
        let scale =
            1.0 / (form.fiber_integral(chart_idx, p.u, p.v, 8)? * 2.0 * PI / form.fiber_period);
        let value = integral * scale;
        return Ok((
            HalfInteger::from_halves((2.0 * value).round() as i64),
            value,
        ));
    }
    Err(GbxError::UnderResolved { label: p.label })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_arithmetic_and_display() {
        let h = HalfInteger::from_halves(1);
        assert_eq!((h + h + h + h), HalfInteger::from_integer(2));
        assert_eq!(h.to_string(), "1/2");
        assert_eq!(HalfInteger::from_halves(-3).to_string(), "-3/2");
        assert_eq!(HalfInteger::from_integer(-2).to_string(), "-2");
        assert_eq!(
            serde_json::to_string(&HalfInteger::from_integer(2)).unwrap(),
            r#"{"numerator":2,"denominator":1}"#
        );
        let back: HalfInteger =
            serde_json::from_str(r#"{"numerator":-1,"denominator":2}"#).unwrap();
        assert_eq!(back, HalfInteger::from_halves(-1));
        assert!(serde_json::from_str::<HalfInteger>(r#"{"numerator":1,"denominator":3}"#).is_err());
    }

    fn samples(f: impl Fn(f64) -> f64, n: usize, period: f64) -> Vec<f64> {
        (0..n)
            .map(|j| f(2.0 * PI * j as f64 / n as f64).rem_euclid(period))
            .collect()
    }

    #[test]
    fn unwrap_examples() {
        let (d, _) = unwrap_angles(&samples(|p| 2.0 * p, 64, 2.0 * PI), 2.0 * PI).unwrap();
        assert!((d - 4.0 * PI).abs() < 1e-12);
        assert_eq!(unwrap_angles(&[0.7; 10], 2.0 * PI).unwrap().0, 0.0);
        let (d, _) = unwrap_angles(&samples(|p| -p, 64, 2.0 * PI), 2.0 * PI).unwrap();
        assert!((d + 2.0 * PI).abs() < 1e-12);
        let (d, _) = unwrap_angles(&samples(|p| p / 2.0, 64, PI), PI).unwrap();
        assert!((d - PI).abs() < 1e-12);
    }

    #[test]
    fn coarse_sampling_requests_refinement() {
        let s = samples(|p| 5.0 * p, 16, 2.0 * PI);
        assert!(unwrap_angles(&s, 2.0 * PI).is_err());
        let s = samples(|p| 5.0 * p, 64, 2.0 * PI);
        assert!(unwrap_angles(&s, 2.0 * PI).is_ok());
    }

    #[test]
    fn trace_is_continuous() {
        let s = samples(|p| 3.0 * p, 100, 2.0 * PI);
        let t = unwrap_trace(&s, 2.0 * PI);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 3.0 * 2.0 * PI / 100.0).abs() < 1e-12);
        }
    }
}
