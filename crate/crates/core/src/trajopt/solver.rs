//! Augmented Lagrangian over B-spline control points with a projected
//! L-BFGS inner solver.
//!
//! Decision vector: the interior control points (flattened) followed by the
//! duration when it is free. Endpoints are pinned to the boundary states.

use std::collections::VecDeque;

use crate::bspline::{clamped_knots, nonzero_basis, BoundingBox};

use super::{Limits, OptimizerConfig};

#[derive(Debug, Clone, Copy)]
pub(crate) enum Objective {
    /// `w1 * T + w2 * sum sqrt(|dp|^2 + eps^2)`.
    TimeLength { w1: f64, w2: f64, eps: f64 },
    /// `w * sum |dp|^2`.
    Spread { w: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Duration {
    Free { t_min: f64, t_max: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct WaypointRow {
    /// `(control point index, basis value)` pairs with nonzero weight.
    pub basis: Vec<(usize, f64)>,
    pub target: Vec<f64>,
}

/// Margin applied to limits and boxes inside the solver so that iterates
/// meeting the solver tolerance satisfy the original constraints exactly.
const SHRINK: f64 = 2.0;

pub(crate) struct SplineNlp<'a> {
    pub dim: usize,
    pub n: usize,
    pub degree: usize,
    pub knots: Vec<f64>,
    pub start: &'a [f64],
    pub goal: &'a [f64],
    pub objective: Objective,
    pub duration: Duration,
    pub limits: &'a Limits,
    /// Highest constrained derivative order.
    pub orders: usize,
    pub containment: Option<BoundingBox>,
    pub waypoints: Vec<WaypointRow>,
    /// `scales[j - 1][i] = (k - j + 1) / (u_{i+k+1} - u_{i+j})`.
    scales: Vec<Vec<f64>>,
    /// Limits used inside the penalty terms.
    inner_limits: Vec<Vec<f64>>,
    inner_box: Option<BoundingBox>,
}

impl<'a> SplineNlp<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        degree: usize,
        start: &'a [f64],
        goal: &'a [f64],
        objective: Objective,
        duration: Duration,
        limits: &'a Limits,
        containment: Option<BoundingBox>,
        feas_tol: f64,
    ) -> Self {
        let dim = start.len();
        let knots = clamped_knots(degree, n, 0.0, 1.0)
            .expect("n > degree")
            .as_slice()
            .to_vec();
        let orders = limits.gamma().min(degree);
        let scales = (1..=orders)
            .map(|j| {
                (0..n - j)
                    .map(|i| {
                        let denom = knots[i + degree + 1] - knots[i + j];
                        (degree - j + 1) as f64 / denom
                    })
                    .collect()
            })
            .collect();
        let shrink = 1.0 - SHRINK * feas_tol;
        let inner_limits = limits
            .deriv_limits
            .iter()
            .map(|row| row.iter().map(|l| l * shrink).collect())
            .collect();
        let inner_box = containment.as_ref().map(|b| b.expanded(-SHRINK * feas_tol));
        Self {
            dim,
            n,
            degree,
            knots,
            start,
            goal,
            objective,
            duration,
            limits,
            orders,
            containment,
            waypoints: Vec::new(),
            scales,
            inner_limits,
            inner_box,
        }
    }

    pub fn add_waypoint(&mut self, u: f64, target: Vec<f64>) {
        let k = self.degree;
        let u = u.clamp(0.0, 1.0);
        let s = if u >= 1.0 {
            self.n - 1
        } else {
            let mut s = k;
            while s + 1 < self.n && self.knots[s + 1] <= u {
                s += 1;
            }
            s
        };
        let mut vals = [0.0; 32];
        nonzero_basis(s, u, k, &self.knots, &mut vals);
        let basis = (0..=k)
            .map(|r| (s - k + r, vals[r]))
            .filter(|(_, v)| *v != 0.0)
            .collect();
        self.waypoints.push(WaypointRow { basis, target });
    }

    pub fn free_duration(&self) -> bool {
        matches!(self.duration, Duration::Free { .. })
    }

    pub fn num_vars(&self) -> usize {
        (self.n - 2) * self.dim + usize::from(self.free_duration())
    }

    pub fn var_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let nv = self.num_vars();
        let mut lo = vec![f64::NEG_INFINITY; nv];
        let mut hi = vec![f64::INFINITY; nv];
        if let Duration::Free { t_min, t_max } = self.duration {
            lo[nv - 1] = t_min;
            hi[nv - 1] = t_max;
        }
        (lo, hi)
    }

    /// Full control-point array including the pinned endpoints.
    pub fn points(&self, x: &[f64], out: &mut Vec<f64>) {
        let dim = self.dim;
        out.clear();
        out.extend_from_slice(self.start);
        out.extend_from_slice(&x[..(self.n - 2) * dim]);
        out.extend_from_slice(self.goal);
    }

    pub fn duration_of(&self, x: &[f64]) -> f64 {
        match self.duration {
            Duration::Free { .. } => x[x.len() - 1],
            Duration::Fixed(t) => t,
        }
    }

    pub fn encode(&self, points: &[f64], duration: f64) -> Vec<f64> {
        let dim = self.dim;
        let mut x = points[dim..(self.n - 1) * dim].to_vec();
        if let Duration::Free { t_min, t_max } = self.duration {
            x.push(duration.clamp(t_min, t_max));
        }
        x
    }

    /// Derivative control points of orders `1..=orders`.
    pub fn derivative_points(&self, points: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.dim;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.orders);
        for j in 1..=self.orders {
            let prev = if j == 1 { points } else { &out[j - 2] };
            let count = self.n - j;
            let mut q = vec![0.0; count * dim];
            for i in 0..count {
                let s = self.scales[j - 1][i];
                for d in 0..dim {
                    q[i * dim + d] = s * (prev[(i + 1) * dim + d] - prev[i * dim + d]);
                }
            }
            out.push(q);
        }
        out
    }

    /// Smallest duration meeting the original derivative limits.
    pub fn required_duration(&self, points: &[f64]) -> f64 {
        let dim = self.dim;
        let mut t_req: f64 = 0.0;
        for (jm1, q) in self.derivative_points(points).iter().enumerate() {
            let j = jm1 + 1;
            for (idx, v) in q.iter().enumerate() {
                let ratio = v.abs() / self.limits.limit(j, idx % dim);
                if ratio > 0.0 {
                    t_req = t_req.max(ratio.powf(1.0 / j as f64));
                }
            }
        }
        t_req
    }

    pub fn objective_value(&self, points: &[f64], duration: f64) -> f64 {
        let mut grad = vec![0.0; points.len()];
        let mut gt = 0.0;
        self.objective_terms(points, duration, &mut grad, &mut gt)
    }

    fn objective_terms(&self, p: &[f64], t: f64, gp: &mut [f64], gt: &mut f64) -> f64 {
        let dim = self.dim;
        let mut val = 0.0;
        match self.objective {
            Objective::TimeLength { w1, w2, eps } => {
                val += w1 * t;
                *gt += w1;
                for i in 0..self.n - 1 {
                    let mut sq = eps * eps;
                    for d in 0..dim {
                        sq += (p[(i + 1) * dim + d] - p[i * dim + d]).powi(2);
                    }
                    let len = sq.sqrt();
                    val += w2 * len;
                    for d in 0..dim {
                        let g = w2 * (p[(i + 1) * dim + d] - p[i * dim + d]) / len;
                        gp[(i + 1) * dim + d] += g;
                        gp[i * dim + d] -= g;
                    }
                }
            }
            Objective::Spread { w } => {
                for i in 0..self.n - 1 {
                    for d in 0..dim {
                        let diff = p[(i + 1) * dim + d] - p[i * dim + d];
                        val += w * diff * diff;
                        gp[(i + 1) * dim + d] += 2.0 * w * diff;
                        gp[i * dim + d] -= 2.0 * w * diff;
                    }
                }
            }
        }
        val
    }

    pub fn new_multipliers(&self) -> Multipliers {
        let dim = self.dim;
        Multipliers {
            deriv: (1..=self.orders)
                .map(|j| vec![0.0; 2 * (self.n - j) * dim])
                .collect(),
            boxes: vec![0.0; if self.containment.is_some() { 2 * (self.n - 2) * dim } else { 0 }],
            eq: vec![0.0; self.waypoints.len() * dim],
        }
    }

    /// Augmented Lagrangian value and gradient.
    pub fn eval(&self, x: &[f64], rho: f64, mult: &Multipliers, grad: &mut [f64]) -> f64 {
        let dim = self.dim;
        let mut p = Vec::with_capacity(self.n * dim);
        self.points(x, &mut p);
        let t = self.duration_of(x);
        let mut gp = vec![0.0; self.n * dim];
        let mut gt = 0.0;
        let mut val = self.objective_terms(&p, t, &mut gp, &mut gt);

        let ineq = |lam: f64, g: f64| -> (f64, f64) {
            let mu = (lam + rho * g).max(0.0);
            ((mu * mu - lam * lam) / (2.0 * rho), mu)
        };

        // Derivative bounds: +-q / (T^j L) - 1 <= 0, gradients pulled back
        // through the difference recursion.
        let qs = self.derivative_points(&p);
        let mut adj: Vec<Vec<f64>> = qs.iter().map(|q| vec![0.0; q.len()]).collect();
        for (jm1, q) in qs.iter().enumerate() {
            let j = jm1 + 1;
            let tj = t.powi(j as i32);
            let lam = &mult.deriv[jm1];
            for (idx, &qv) in q.iter().enumerate() {
                let denom = tj * self.inner_limits[jm1][idx % dim];
                let c = qv / denom;
                for (s, sign) in [(0usize, 1.0f64), (1, -1.0)] {
                    let (v, mu) = ineq(lam[2 * idx + s], sign * c - 1.0);
                    val += v;
                    if mu > 0.0 {
                        adj[jm1][idx] += mu * sign / denom;
                        gt -= mu * sign * j as f64 * c / t;
                    }
                }
            }
        }
        for jm1 in (0..qs.len()).rev() {
            let count = self.n - (jm1 + 1);
            let (lower, upper) = adj.split_at_mut(jm1);
            let a = &upper[0];
            for i in 0..count {
                let s = self.scales[jm1][i];
                for d in 0..dim {
                    let g = s * a[i * dim + d];
                    if jm1 == 0 {
                        gp[(i + 1) * dim + d] += g;
                        gp[i * dim + d] -= g;
                    } else {
                        lower[jm1 - 1][(i + 1) * dim + d] += g;
                        lower[jm1 - 1][i * dim + d] -= g;
                    }
                }
            }
        }

        if let Some(bb) = &self.inner_box {
            for i in 1..self.n - 1 {
                for d in 0..dim {
                    let v = p[i * dim + d];
                    let base = 2 * ((i - 1) * dim + d);
                    let (a, mu_lo) = ineq(mult.boxes[base], bb.lower[d] - v);
                    let (b, mu_hi) = ineq(mult.boxes[base + 1], v - bb.upper[d]);
                    val += a + b;
                    gp[i * dim + d] += mu_hi - mu_lo;
                }
            }
        }

        for (w, row) in self.waypoints.iter().enumerate() {
            for d in 0..dim {
                let h = row.basis.iter().map(|&(i, b)| b * p[i * dim + d]).sum::<f64>() - row.target[d];
                let lam = mult.eq[w * dim + d];
                val += lam * h + 0.5 * rho * h * h;
                let g = lam + rho * h;
                for &(i, b) in &row.basis {
                    gp[i * dim + d] += g * b;
                }
            }
        }

        let m = (self.n - 2) * dim;
        grad[..m].copy_from_slice(&gp[dim..(self.n - 1) * dim]);
        if self.free_duration() {
            grad[m] = gt;
        }
        val
    }

    /// Multiplier update; returns the maximum normalized violation at `x`.
    pub fn update_multipliers(&self, x: &[f64], rho: f64, mult: &mut Multipliers) -> f64 {
        let dim = self.dim;
        let mut p = Vec::new();
        self.points(x, &mut p);
        let t = self.duration_of(x);
        let mut viol: f64 = 0.0;
        for (jm1, q) in self.derivative_points(&p).iter().enumerate() {
            let tj = t.powi(jm1 as i32 + 1);
            for (idx, &qv) in q.iter().enumerate() {
                let c = qv / (tj * self.inner_limits[jm1][idx % dim]);
                for (s, sign) in [(0usize, 1.0), (1, -1.0)] {
                    let g = sign * c - 1.0;
                    let lam = &mut mult.deriv[jm1][2 * idx + s];
                    *lam = (*lam + rho * g).max(0.0);
                    viol = viol.max(g);
                }
            }
        }
        if let Some(bb) = &self.inner_box {
            for i in 1..self.n - 1 {
                for d in 0..dim {
                    let v = p[i * dim + d];
                    let base = 2 * ((i - 1) * dim + d);
                    for (s, g) in [(0, bb.lower[d] - v), (1, v - bb.upper[d])] {
                        let lam = &mut mult.boxes[base + s];
                        *lam = (*lam + rho * g).max(0.0);
                        viol = viol.max(g);
                    }
                }
            }
        }
        for (w, row) in self.waypoints.iter().enumerate() {
            for d in 0..dim {
                let h = row.basis.iter().map(|&(i, b)| b * p[i * dim + d]).sum::<f64>() - row.target[d];
                mult.eq[w * dim + d] += rho * h;
                viol = viol.max(h.abs());
            }
        }
        viol
    }

    /// Largest waypoint residual of `points`.
    pub fn waypoint_error(&self, points: &[f64]) -> f64 {
        let dim = self.dim;
        let mut err: f64 = 0.0;
        for row in &self.waypoints {
            let mut sq = 0.0;
            for d in 0..dim {
                let h = row.basis.iter().map(|&(i, b)| b * points[i * dim + d]).sum::<f64>() - row.target[d];
                sq += h * h;
            }
            err = err.max(sq.sqrt());
        }
        err
    }

    pub fn inside_containment(&self, points: &[f64]) -> bool {
        match &self.containment {
            None => true,
            Some(bb) => points.chunks(self.dim).all(|p| bb.contains_with_tol(p, 1e-12)),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Multipliers {
    deriv: Vec<Vec<f64>>,
    boxes: Vec<f64>,
    eq: Vec<f64>,
}

/// What the caller wants after inspecting an accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Verdict {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum AlStatus {
    Converged,
    Stopped,
    IterationLimit,
}

pub(crate) struct AlResult {
    pub x: Vec<f64>,
    pub status: AlStatus,
    pub iterations: usize,
    pub violation: f64,
}

pub(crate) struct AlSettings {
    pub max_iters: usize,
    pub max_outer: usize,
    pub grad_tol: f64,
    pub feas_tol: f64,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
}

impl AlSettings {
    pub fn from_config(cfg: &OptimizerConfig) -> Self {
        Self {
            max_iters: cfg.max_iters,
            max_outer: cfg.max_outer_iters,
            grad_tol: cfg.convergence_tol,
            feas_tol: cfg.feasibility_tol,
            rho0: cfg.penalty_init,
            rho_growth: cfg.penalty_growth,
            rho_max: cfg.penalty_max,
        }
    }
}

/// Runs the augmented Lagrangian from `x0`. `monitor` sees every accepted
/// iterate (including the start) and may stop the solve.
pub(crate) fn solve_al(
    nlp: &SplineNlp<'_>,
    x0: Vec<f64>,
    settings: &AlSettings,
    monitor: &mut dyn FnMut(&[f64]) -> Verdict,
) -> AlResult {
    let (lo, hi) = nlp.var_bounds();
    let mut x = project(x0, &lo, &hi);
    let mut mult = nlp.new_multipliers();
    let mut rho = settings.rho0;
    let mut iterations = 0;
    let mut prev_viol = f64::INFINITY;
    if monitor(&x) == Verdict::Stop {
        return AlResult {
            violation: f64::INFINITY,
            x,
            status: AlStatus::Stopped,
            iterations,
        };
    }
    let mut violation = f64::INFINITY;
    for _ in 0..settings.max_outer {
        let inner = lbfgs_box(
            |z, g| nlp.eval(z, rho, &mult, g),
            &mut x,
            &lo,
            &hi,
            settings.grad_tol,
            settings.max_iters - iterations,
            &mut |z| monitor(z),
        );
        iterations += inner.iterations;
        if inner.stopped {
            return AlResult {
                x,
                status: AlStatus::Stopped,
                iterations,
                violation,
            };
        }
        violation = nlp.update_multipliers(&x, rho, &mut mult);
        if violation <= settings.feas_tol && inner.converged {
            return AlResult {
                x,
                status: AlStatus::Converged,
                iterations,
                violation,
            };
        }
        if iterations >= settings.max_iters {
            break;
        }
        if violation > 0.25 * prev_viol || violation > settings.feas_tol * 1e3 {
            rho = (rho * settings.rho_growth).min(settings.rho_max);
        }
        prev_viol = violation;
    }
    AlResult {
        x,
        status: AlStatus::IterationLimit,
        iterations,
        violation,
    }
}

fn project(mut x: Vec<f64>, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    x
}

pub(crate) struct InnerResult {
    pub iterations: usize,
    pub converged: bool,
    pub stopped: bool,
}

/// Projected L-BFGS for simple bounds. Variables at an active bound with the
/// gradient pushing outward are frozen for the step.
pub(crate) fn lbfgs_box(
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
    x: &mut Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_iters: usize,
    monitor: &mut dyn FnMut(&[f64]) -> Verdict,
) -> InnerResult {
    const MEMORY: usize = 8;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut iters = 0;
    let mut stalls = 0;
    loop {
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..n)
            .filter(|&i| free[i])
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        if pg_norm <= tol * (1.0 + fx.abs().min(1e6).sqrt()) {
            return InnerResult {
                iterations: iters,
                converged: true,
                stopped: false,
            };
        }
        if iters >= max_iters {
            return InnerResult {
                iterations: iters,
                converged: false,
                stopped: false,
            };
        }
        let mut d = two_loop(&g, &hist, &free);
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hist.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        let mut alpha = if hist.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                xn[i] = (x[i] + alpha * d[i]).clamp(lo[i], hi[i]);
            }
            let fnew = f(&xn, &mut gn);
            let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease {
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                let ss: f64 = s.iter().map(|a| a * a).sum();
                let yy: f64 = y.iter().map(|a| a * a).sum();
                if sy > 1e-12 * (ss * yy).sqrt() && sy > 0.0 {
                    if hist.len() == MEMORY {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, 1.0 / sy));
                }
                let improvement = fx - fnew;
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                fx = fnew;
                accepted = true;
                if improvement <= 1e-15 * (1.0 + fx.abs()) {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if hist.is_empty() {
                // Steepest descent failed: at numerical precision.
                return InnerResult {
                    iterations: iters,
                    converged: true,
                    stopped: false,
                };
            }
            hist.clear();
            continue;
        }
        iters += 1;
        if monitor(x) == Verdict::Stop {
            return InnerResult {
                iterations: iters,
                converged: false,
                stopped: true,
            };
        }
        if stalls >= 5 {
            return InnerResult {
                iterations: iters,
                converged: true,
                stopped: false,
            };
        }
    }
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let n = g.len();
    let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot_free(s, &q, free);
        for i in 0..n {
            if free[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let sy = dot_free(s, y, free);
        let yy = dot_free(y, y, free);
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
        let b = rho * dot_free(y, &q, free);
        for i in 0..n {
            if free[i] {
                q[i] += (a - b) * s[i];
            }
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot_free(a: &[f64], b: &[f64], free: &[bool]) -> f64 {
    (0..a.len()).filter(|&i| free[i]).map(|i| a[i] * b[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let r = lbfgs_box(
            |z, g| {
                let (a, b) = (z[0], z[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &mut x,
            &[f64::NEG_INFINITY; 2],
            &[f64::INFINITY; 2],
            1e-10,
            500,
            &mut |_| Verdict::Continue,
        );
        assert!(r.converged);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn lbfgs_respects_bounds() {
        let mut x = vec![0.0, 0.0];
        lbfgs_box(
            |z, g| {
                g[0] = 2.0 * (z[0] - 3.0);
                g[1] = 2.0 * (z[1] + 1.0);
                (z[0] - 3.0).powi(2) + (z[1] + 1.0).powi(2)
            },
            &mut x,
            &[-1.0, -0.5],
            &[2.0, 1.0],
            1e-12,
            100,
            &mut |_| Verdict::Continue,
        );
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12, "{x:?}");
    }

    fn fd_check(nlp: &SplineNlp<'_>, x: &[f64], rho: f64, mult: &Multipliers) {
        let mut g = vec![0.0; x.len()];
        nlp.eval(x, rho, mult, &mut g);
        let mut scratch = vec![0.0; x.len()];
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (nlp.eval(&xp, rho, mult, &mut scratch) - nlp.eval(&xm, rho, mult, &mut scratch)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-4 * (1.0 + fd.abs()),
                "var {i}: analytic {} vs fd {fd}",
                g[i]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let limits = Limits::uniform(2, &[1.0, 2.0, 5.0], 0.5, 5.0).unwrap();
        let start = [0.0, 0.0];
        let goal = [2.0, 1.0];
        let bb = BoundingBox::new(vec![-0.1, -0.2], vec![2.1, 0.9]).unwrap();
        let mut nlp = SplineNlp::new(
            7,
            3,
            &start,
            &goal,
            Objective::TimeLength { w1: 1.0, w2: 2.0, eps: 1e-3 },
            Duration::Free { t_min: 0.5, t_max: 5.0 },
            &limits,
            Some(bb),
            1e-7,
        );
        nlp.add_waypoint(0.4, vec![0.9, 0.7]);
        let x = vec![0.3, 0.5, 0.1, 1.2, 1.9, -0.4, 0.5, 0.0, 1.4, 1.1, 1.3];
        let mut mult = nlp.new_multipliers();
        fd_check(&nlp, &x, 3.0, &mult);
        nlp.update_multipliers(&x, 3.0, &mut mult);
        fd_check(&nlp, &x, 3.0, &mult);

        let fixed = SplineNlp::new(
            6,
            4,
            &start,
            &goal,
            Objective::Spread { w: 1.0 },
            Duration::Fixed(1.5),
            &limits,
            None,
            1e-7,
        );
        let x = vec![0.3, 0.5, 0.1, 1.2, 1.9, -0.4, 0.5, 0.0];
        fd_check(&fixed, &x, 7.0, &fixed.new_multipliers());
    }

    #[test]
    fn waypoint_basis_sums_to_one() {
        let limits = Limits::uniform(1, &[1.0], 0.5, 5.0).unwrap();
        let mut nlp = SplineNlp::new(
            8,
            3,
            &[0.0],
            &[1.0],
            Objective::Spread { w: 1.0 },
            Duration::Fixed(1.0),
            &limits,
            None,
            1e-7,
        );
        for u in [0.0, 0.13, 0.5, 0.99, 1.0] {
            nlp.add_waypoint(u, vec![0.0]);
            let row = nlp.waypoints.last().unwrap();
            let sum: f64 = row.basis.iter().map(|(_, b)| b).sum();
            assert!((sum - 1.0).abs() < 1e-12, "u={u}");
        }
    }
}
