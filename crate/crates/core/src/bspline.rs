//! Clamped B-spline curves.
//!
//! # Indexing convention
//!
//! Throughout the crate a curve of polynomial degree `k` with `n` control
//! points `p_0 .. p_{n-1}` uses a knot vector of length `n + k + 1` whose
//! first `k + 1` and last `k + 1` entries are equal (the clamped form). The
//! active parameter span is `[knots[k], knots[n]]` and the curve interpolates
//! `p_0` at the start of the span and `p_{n-1}` at its end. Basis functions
//! `N_{i,k}` are indexed `i = 0 .. n-1` and supported on
//! `[knots[i], knots[i+k+1]]`.
//!
//! Interior knots produced by [`clamped_knots`] are uniformly spaced.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when testing whether a parameter lies inside the knot span.
const SPAN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("knot vector is not non-decreasing at index {0}")]
    DecreasingKnots(usize),
    #[error("knot vector is not clamped with multiplicity {0} at both ends")]
    NotClamped(usize),
    #[error("{got} control points given, degree {degree} needs at least {}", degree + 1)]
    TooFewControlPoints { got: usize, degree: usize },
    #[error("expected {expected} knots, got {got}")]
    KnotCount { expected: usize, got: usize },
    #[error("parameter {t} outside knot span [{lo}, {hi}]")]
    OutsideSpan { t: f64, lo: f64, hi: f64 },
    #[error("basis index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("derivative order {order} exceeds degree {degree}")]
    OrderTooHigh { order: usize, degree: usize },
    #[error("zero knot-span denominator at control index {0}")]
    DegenerateSpan(usize),
    #[error("control point dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty span: t0 = {t0}, tf = {tf}")]
    EmptySpan { t0: f64, tf: f64 },
    #[error("dimension must be positive")]
    ZeroDimension,
}

pub type Result<T> = std::result::Result<T, SplineError>;

/// A clamped, non-decreasing knot vector together with the degree it was
/// built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Validates a clamped knot vector of the given degree.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if let Some(i) = knots.windows(2).position(|w| !(w[0] <= w[1])) {
            return Err(SplineError::DecreasingKnots(i + 1));
        }
        let mult = degree + 1;
        if knots.len() < 2 * mult {
            return Err(SplineError::NotClamped(mult));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        let clamped = knots[..mult].iter().all(|&u| u == first)
            && knots[knots.len() - mult..].iter().all(|&u| u == last);
        if !clamped || !(last > first) {
            return Err(SplineError::NotClamped(mult));
        }
        Ok(Self { knots, degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Number of control points this knot vector supports: `len - degree - 1`.
    pub fn num_ctrl(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Active parameter interval `[knots[k], knots[n]]`.
    pub fn span(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.num_ctrl()])
    }

    fn check_param(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        let tol = SPAN_EPS * (1.0 + hi.abs().max(lo.abs()));
        if !(t >= lo - tol && t <= hi + tol) {
            return Err(SplineError::OutsideSpan { t, lo, hi });
        }
        Ok(t.clamp(lo, hi))
    }

    /// Index `s` with `knots[s] <= t < knots[s+1]` and `k <= s <= n-1`. The
    /// right end of the span maps to the last non-empty interval.
    pub fn find_span(&self, t: f64) -> Result<usize> {
        let t = self.check_param(t)?;
        let k = self.degree;
        let n = self.num_ctrl();
        if t >= self.knots[n] {
            return Ok(n - 1);
        }
        // first index with knots[idx] > t, minus one
        let idx = self.knots[k..=n].partition_point(|&u| u <= t) + k;
        Ok((idx - 1).clamp(k, n - 1))
    }
}

/// Builds a clamped knot vector on `[t0, tf]` for `num_ctrl` control points
/// of degree `k`, with `num_ctrl - k - 1` uniformly spaced interior knots.
pub fn clamped_knots(k: usize, num_ctrl: usize, t0: f64, tf: f64) -> Result<KnotVector> {
    if num_ctrl < k + 1 {
        return Err(SplineError::TooFewControlPoints {
            got: num_ctrl,
            degree: k,
        });
    }
    if !(tf > t0) {
        return Err(SplineError::EmptySpan { t0, tf });
    }
    let segments = num_ctrl - k;
    let mut knots = Vec::with_capacity(num_ctrl + k + 1);
    knots.extend(std::iter::repeat(t0).take(k + 1));
    for i in 1..segments {
        knots.push(t0 + (tf - t0) * i as f64 / segments as f64);
    }
    knots.extend(std::iter::repeat(tf).take(k + 1));
    KnotVector::new(knots, k)
}

/// Zeroth-degree basis with the right-endpoint convention: the last non-empty
/// interval is closed on the right.
fn basis_zero(i: usize, t: f64, u: &[f64]) -> f64 {
    if u[i] <= t && t < u[i + 1] {
        return 1.0;
    }
    let last = u[u.len() - 1];
    if t == last && u[i] < u[i + 1] && u[i + 1] == last {
        return 1.0;
    }
    0.0
}

fn cox_de_boor(i: usize, k: usize, t: f64, u: &[f64]) -> f64 {
    if k == 0 {
        return basis_zero(i, t, u);
    }
    let mut value = 0.0;
    let left = u[i + k] - u[i];
    if left > 0.0 {
        value += (t - u[i]) / left * cox_de_boor(i, k - 1, t, u);
    }
    let right = u[i + k + 1] - u[i + 1];
    if right > 0.0 {
        value += (u[i + k + 1] - t) / right * cox_de_boor(i + 1, k - 1, t, u);
    }
    value
}

/// The B-spline basis function `N_{i,k}(t)` over `knots`, evaluated with the
/// Cox-de Boor recursion (`0/0` terms are zero).
///
/// `k` may be lower than the knot vector's own degree; the index must satisfy
/// `i + k + 1 < knots.len()`.
pub fn basis(i: usize, k: usize, t: f64, knots: &KnotVector) -> Result<f64> {
    let t = knots.check_param(t)?;
    let u = knots.as_slice();
    if i + k + 1 >= u.len() {
        return Err(SplineError::IndexOutOfRange {
            index: i,
            max: u.len().saturating_sub(k + 2),
        });
    }
    Ok(cox_de_boor(i, k, t, u))
}

/// All `k + 1` non-vanishing basis values at `t` for span `s`, i.e.
/// `N_{s-k..=s, k}(t)`, computed with the triangular scheme.
pub(crate) fn nonzero_basis(s: usize, t: f64, k: usize, u: &[f64], out: &mut [f64]) {
    out[0] = 1.0;
    let mut left = [0.0f64; 32];
    let mut right = [0.0f64; 32];
    for j in 1..=k {
        left[j] = t - u[s + 1 - j];
        right[j] = u[s + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { out[r] / denom } else { 0.0 };
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Option<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return None;
        }
        Some(Self { lower, upper })
    }

    /// Smallest box containing every point of the iterator.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for p in it {
            for d in 0..lower.len() {
                lower[d] = lower[d].min(p[d]);
                upper[d] = upper[d].max(p[d]);
            }
        }
        Some(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_with_tol(p, 0.0)
    }

    pub fn contains_with_tol(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&l, &u))| x >= l - tol && x <= u + tol)
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|l| l - margin).collect(),
            upper: self.upper.iter().map(|u| u + margin).collect(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }
}

/// A clamped B-spline curve with control points stored row-major in a flat
/// buffer (`dim` values per point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineCurve {
    knots: KnotVector,
    points: Vec<f64>,
    dim: usize,
}

impl BSplineCurve {
    pub fn new(knots: KnotVector, points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SplineError::ZeroDimension);
        }
        if points.len() % dim != 0 {
            return Err(SplineError::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        let n = points.len() / dim;
        if n < knots.degree() + 1 {
            return Err(SplineError::TooFewControlPoints {
                got: n,
                degree: knots.degree(),
            });
        }
        if knots.num_ctrl() != n {
            return Err(SplineError::KnotCount {
                expected: n + knots.degree() + 1,
                got: knots.len(),
            });
        }
        Ok(Self { knots, points, dim })
    }

    /// Curve from a list of points with uniform clamped knots on `[t0, tf]`.
    pub fn from_points(degree: usize, points: &[Vec<f64>], t0: f64, tf: f64) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(SplineError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        let knots = clamped_knots(degree, points.len(), t0, tf)?;
        Self::new(knots, points.concat(), dim)
    }

    /// Uniform clamped curve on `[t0, tf]` from a flat point buffer.
    pub fn uniform(degree: usize, points: Vec<f64>, dim: usize, t0: f64, tf: f64) -> Result<Self> {
        if dim == 0 {
            return Err(SplineError::ZeroDimension);
        }
        let knots = clamped_knots(degree, points.len() / dim, t0, tf)?;
        Self::new(knots, points, dim)
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn num_ctrl(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn control_points(&self) -> Vec<Vec<f64>> {
        self.points.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn span(&self) -> (f64, f64) {
        self.knots.span()
    }

    /// Curve point at `t` via de Boor's algorithm.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(t, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let s = self.knots.find_span(t)?;
        let t = t.clamp(self.span().0, self.span().1);
        let k = self.degree();
        let u = self.knots.as_slice();
        let dim = self.dim;
        let mut d = vec![0.0; (k + 1) * dim];
        d.copy_from_slice(&self.points[(s - k) * dim..(s + 1) * dim]);
        for r in 1..=k {
            for j in (r..=k).rev() {
                let i = s - k + j;
                let denom = u[i + k + 1 - r] - u[i];
                let alpha = if denom > 0.0 { (t - u[i]) / denom } else { 0.0 };
                for c in 0..dim {
                    d[j * dim + c] = (1.0 - alpha) * d[(j - 1) * dim + c] + alpha * d[j * dim + c];
                }
            }
        }
        out.copy_from_slice(&d[k * dim..(k + 1) * dim]);
        Ok(())
    }

    /// Bounding box of the control points whose basis functions can be
    /// nonzero at `t`. The curve point at `t` lies in this box.
    pub fn active_hull_box(&self, t: f64) -> Result<BoundingBox> {
        let s = self.knots.find_span(t)?;
        let k = self.degree();
        Ok(BoundingBox::around((s - k..=s).map(|i| self.point(i)))
            .expect("span has k + 1 >= 1 points"))
    }

    /// Control points of the `j`-th derivative curve:
    /// `q_i^(r) = (k-r+1) / (u_{i+k+1} - u_{i+r}) * (q_{i+1}^(r-1) - q_i^(r-1))`.
    pub fn derivative_control_points(&self, j: usize) -> Result<Vec<Vec<f64>>> {
        let flat = self.derivative_points_flat(j)?;
        Ok(flat.chunks(self.dim).map(<[f64]>::to_vec).collect())
    }

    fn derivative_points_flat(&self, j: usize) -> Result<Vec<f64>> {
        let k = self.degree();
        if j > k {
            return Err(SplineError::OrderTooHigh { order: j, degree: k });
        }
        let u = self.knots.as_slice();
        let dim = self.dim;
        let mut q = self.points.clone();
        for r in 1..=j {
            let count = q.len() / dim - 1;
            let mut next = vec![0.0; count * dim];
            for i in 0..count {
                let denom = u[i + k + 1] - u[i + r];
                if denom <= 0.0 {
                    return Err(SplineError::DegenerateSpan(i));
                }
                let scale = (k - r + 1) as f64 / denom;
                for c in 0..dim {
                    next[i * dim + c] = scale * (q[(i + 1) * dim + c] - q[i * dim + c]);
                }
            }
            q = next;
        }
        Ok(q)
    }

    /// The `j`-th derivative as a curve of degree `k - j` on the inner knots.
    pub fn derivative_curve(&self, j: usize) -> Result<BSplineCurve> {
        let points = self.derivative_points_flat(j)?;
        let u = self.knots.as_slice();
        let knots = KnotVector::new(u[j..u.len() - j].to_vec(), self.degree() - j)?;
        BSplineCurve::new(knots, points, self.dim)
    }
}

/// Free-function form of [`BSplineCurve::evaluate`].
pub fn evaluate(curve: &BSplineCurve, t: f64) -> Result<Vec<f64>> {
    curve.evaluate(t)
}

/// Free-function form of [`BSplineCurve::derivative_control_points`].
pub fn derivative_control_points(curve: &BSplineCurve, j: usize) -> Result<Vec<Vec<f64>>> {
    curve.derivative_control_points(j)
}

/// Free-function form of [`BSplineCurve::derivative_curve`].
pub fn derivative_curve(curve: &BSplineCurve, j: usize) -> Result<BSplineCurve> {
    curve.derivative_curve(j)
}

/// Free-function form of [`BSplineCurve::active_hull_box`].
pub fn active_hull_box(curve: &BSplineCurve, t: f64) -> Result<BoundingBox> {
    curve.active_hull_box(t)
}

/// One sample of a reconstructed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
    pub jerk: Vec<f64>,
}

impl TrajectorySample {
    /// Time derivative of the given order (0 = position, up to 3 = jerk).
    pub fn derivative(&self, order: usize) -> &[f64] {
        match order {
            0 => &self.position,
            1 => &self.velocity,
            2 => &self.acceleration,
            3 => &self.jerk,
            _ => panic!("derivative order {order} not sampled"),
        }
    }
}

/// A curve in the trajectory coordinate `u in [0, 1]` together with its
/// derivative curves, ready for repeated time-scaled sampling.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    curves: Vec<Option<BSplineCurve>>,
    dim: usize,
}

impl Reconstruction {
    pub fn new(curve: &BSplineCurve) -> Result<Self> {
        let mut curves = vec![Some(curve.clone())];
        for j in 1..=3 {
            curves.push(if j <= curve.degree() {
                Some(curve.derivative_curve(j)?)
            } else {
                None
            });
        }
        Ok(Self {
            curves,
            dim: curve.dim(),
        })
    }

    /// `d^j psi / du^j` at `u`; zero when `j` exceeds the degree.
    pub fn parametric(&self, j: usize, u: f64, out: &mut [f64]) -> Result<()> {
        match &self.curves[j] {
            Some(c) => c.evaluate_into(u, out),
            None => {
                out.iter_mut().for_each(|x| *x = 0.0);
                Ok(())
            }
        }
    }

    /// Time-domain sample at `u` for duration `duration`, scaling the `j`-th
    /// parametric derivative by `1 / T^j`.
    pub fn sample(&self, u: f64, duration: f64) -> Result<TrajectorySample> {
        let mut vals: [Vec<f64>; 4] = Default::default();
        for (j, v) in vals.iter_mut().enumerate() {
            *v = vec![0.0; self.dim];
            self.parametric(j, u, v)?;
            if j > 0 {
                let scale = duration.powi(j as i32);
                v.iter_mut().for_each(|x| *x /= scale);
            }
        }
        let [position, velocity, acceleration, jerk] = vals;
        Ok(TrajectorySample {
            t: duration * u,
            position,
            velocity,
            acceleration,
            jerk,
        })
    }
}

/// Samples a trajectory `phi(t) = psi(t / T)` built from `control_points`
/// (uniform clamped knots on `u in [0, 1]`, degree `k`) at `samples + 1`
/// evenly spaced parameters `u_i = i / samples`. A grid with `samples = a`
/// is nested in a grid with `samples = a * b`.
pub fn reconstruct(
    control_points: &[Vec<f64>],
    duration: f64,
    k: usize,
    samples: usize,
) -> Result<Vec<TrajectorySample>> {
    if !(duration > 0.0) {
        return Err(SplineError::EmptySpan {
            t0: 0.0,
            tf: duration,
        });
    }
    let curve = BSplineCurve::from_points(k, control_points, 0.0, 1.0)?;
    reconstruct_curve(&curve, duration, samples)
}

pub fn reconstruct_curve(
    curve: &BSplineCurve,
    duration: f64,
    samples: usize,
) -> Result<Vec<TrajectorySample>> {
    let rec = Reconstruction::new(curve)?;
    let samples = samples.max(1);
    (0..=samples)
        .map(|i| rec.sample(i as f64 / samples as f64, duration))
        .collect()
}
