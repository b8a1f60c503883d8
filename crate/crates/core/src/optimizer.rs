//! Limited-memory BFGS with a strong-Wolfe line search.

use serde::Deserialize;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A smooth scalar function of `dim` variables with an analytic gradient.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Returns `f(x)` and writes `∇f(x)` into `grad`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F> Objective for (usize, F)
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.1)(x, grad)
    }
}

pub const WOLFE_C1: f64 = 1e-4;
pub const WOLFE_C2: f64 = 0.9;
pub const MAX_LINE_SEARCH_TRIALS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    /// Number of correction pairs kept; 0 gives steepest descent.
    pub memory: usize,
    /// Stop when `‖∇f‖∞` falls to this value. `None` uses `1e-6·√dim`.
    pub grad_tol: Option<f64>,
    pub max_iters: usize,
    /// Stop (unconverged) when the relative decrease of an accepted step is
    /// at most this value.
    pub f_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: None,
            max_iters: 500,
            f_tol: 1e-15,
        }
    }
}

impl MinimizeOptions {
    pub fn grad_tol_for(&self, dim: usize) -> f64 {
        self.grad_tol.unwrap_or(1e-6 * (dim as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub evaluations: usize,
    pub final_energy: f64,
    /// `‖∇f‖∞` at the returned point.
    pub grad_norm: f64,
    pub converged: bool,
    /// Energy at the start and after every accepted step.
    pub history: Vec<f64>,
}

/// Minimizes from `x0` and returns the final point.
pub fn minimize(
    obj: &dyn Objective,
    x0: &[f64],
    opts: &MinimizeOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let mut x = x0.to_vec();
    let stats = minimize_in_place(obj, &mut x, opts)?;
    Ok((x, stats))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_finite(f: f64, g: &[f64], what: &str) -> Result<()> {
    if f.is_finite() && g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "objective or gradient is not finite at {what}"
        )))
    }
}

/// Minimizes in place. On a line-search failure `x` holds the last accepted
/// iterate.
pub fn minimize_in_place(
    obj: &dyn Objective,
    x: &mut [f64],
    opts: &MinimizeOptions,
) -> Result<SolveStats> {
    let n = obj.dim();
    if x.len() != n {
        return Err(Error::NonFinite(format!(
            "start point has length {} but dim is {n}",
            x.len()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("start point is not finite".into()));
    }
    let tol = opts.grad_tol_for(n);
    let mut g = vec![0.0; n];
    let mut f = obj.eval(x, &mut g);
    check_finite(f, &g, "the start point")?;
    let mut stats = SolveStats {
        iterations: 0,
        evaluations: 1,
        final_energy: f,
        grad_norm: inf_norm(&g),
        converged: false,
        history: vec![f],
    };
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut prev_f: Option<f64> = None;
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while stats.iterations < opts.max_iters {
        if stats.grad_norm <= tol {
            stats.converged = true;
            break;
        }
        two_loop(&g, &pairs, &mut d);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = dot(&g, &d);
        }
        let alpha0 = match prev_f {
            None => 1.0 / inf_norm(&d).max(1e-300),
            Some(pf) if pairs.is_empty() => {
                let guess = 1.01 * 2.0 * (f - pf) / slope;
                if guess > 0.0 && guess < 1.0 {
                    guess
                } else {
                    1.0
                }
            }
            Some(_) => 1.0,
        };
        let ls = line_search(obj, x, f, slope, &d, alpha0, &mut x_new, &mut g_new);
        stats.evaluations += ls.evaluations;
        let Some((_, f_new)) = ls.step else {
            if ls.stalled {
                // No representable decrease remains along this direction.
                break;
            }
            return Err(Error::LineSearch {
                iteration: stats.iterations,
                trials: ls.evaluations,
                energy: f,
            });
        };
        if opts.memory > 0 {
            let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                if pairs.len() == opts.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }
        }
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        prev_f = Some(f);
        let decrease = f - f_new;
        f = f_new;
        stats.iterations += 1;
        stats.final_energy = f;
        stats.grad_norm = inf_norm(&g);
        stats.history.push(f);
        if stats.grad_norm <= tol {
            stats.converged = true;
            break;
        }
        if opts.f_tol > 0.0 && decrease <= opts.f_tol * f.abs().max(1.0) {
            break;
        }
    }
    Ok(stats)
}

/// Writes `-H∇f` into `d` via the two-loop recursion.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, d: &mut [f64]) {
    for (di, gi) in d.iter_mut().zip(g) {
        *di = -gi;
    }
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, d);
        for (di, yi) in d.iter_mut().zip(y) {
            *di -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for di in d.iter_mut() {
            *di *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, d);
        for (di, si) in d.iter_mut().zip(s) {
            *di += (a - b) * si;
        }
    }
}

struct LineSearchResult {
    step: Option<(f64, f64)>,
    evaluations: usize,
    /// Every probe was indistinguishable from f0 by round-off.
    stalled: bool,
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    obj: &dyn Objective,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> LineSearchResult {
    let mut evaluations = 0;
    let mut all_noise = true;
    let mut probe = |alpha: f64, x_new: &mut [f64], g_new: &mut [f64]| -> Probe {
        for ((xn, xi), di) in x_new.iter_mut().zip(x).zip(d) {
            *xn = xi + alpha * di;
        }
        let f = obj.eval(x_new, g_new);
        evaluations += 1;
        all_noise &= (f - f0).abs() <= 1e-12 * f0.abs();
        if !f.is_finite() || !g_new.iter().all(|v| v.is_finite()) {
            // Treat as an overshoot so the bracket shrinks.
            return Probe {
                alpha,
                f: f64::INFINITY,
                slope: f64::INFINITY,
            };
        }
        Probe {
            alpha,
            f,
            slope: dot(g_new, d),
        }
    };
    let curvature = |p: &Probe| p.slope.abs() <= -WOLFE_C2 * slope0;
    // Function values within `noise` of f0 are indistinguishable from
    // round-off; there the search is steered by the directional derivative
    // alone, and a step is accepted when it does not increase f and meets
    // the curvature condition.
    let noise = 1e-12 * f0.abs();
    let in_noise = |p: &Probe| (p.f - f0).abs() <= noise;
    let sufficient = |p: &Probe| {
        p.f <= f0 + WOLFE_C1 * p.alpha * slope0 || (in_noise(p) && p.f <= f0 && curvature(p))
    };
    let accept = |p: &Probe, evaluations: usize| LineSearchResult {
        step: Some((p.alpha, p.f)),
        evaluations,
        stalled: false,
    };
    let fail = |evaluations: usize, stalled: bool| LineSearchResult {
        step: None,
        evaluations,
        stalled,
    };

    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
    };
    let mut alpha = alpha0;
    let mut trials = 0;
    let (mut lo, mut hi);
    loop {
        if trials >= MAX_LINE_SEARCH_TRIALS {
            return fail(evaluations, all_noise);
        }
        trials += 1;
        let p = probe(alpha, x_new, g_new);
        if sufficient(&p) && curvature(&p) {
            return accept(&p, evaluations);
        }
        if !sufficient(&p) && !(in_noise(&p) && p.slope < 0.0) || (trials > 1 && p.f > prev.f) {
            lo = prev;
            hi = p;
            break;
        }
        if p.slope >= 0.0 {
            lo = p;
            hi = prev;
            break;
        }
        prev = p;
        alpha *= 2.0;
    }

    // Zoom: `lo` is the best point seen that satisfies sufficient decrease.
    loop {
        if trials >= MAX_LINE_SEARCH_TRIALS {
            return fail(evaluations, all_noise);
        }
        trials += 1;
        let noisy = in_noise(&lo) && in_noise(&hi);
        let a = if noisy {
            secant(&lo, &hi)
        } else {
            interpolate(&lo, &hi)
        };
        let p = probe(a, x_new, g_new);
        if sufficient(&p) && curvature(&p) {
            return accept(&p, evaluations);
        }
        if noisy && in_noise(&p) {
            if p.slope * (hi.alpha - lo.alpha) < 0.0 {
                lo = p;
            } else {
                hi = p;
            }
        } else if !sufficient(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
        if (hi.alpha - lo.alpha).abs() <= f64::EPSILON * lo.alpha.abs().max(1e-300) {
            return fail(evaluations, all_noise);
        }
    }
}

/// Root of the linear model of the directional derivative, kept inside the
/// bracket.
fn secant(lo: &Probe, hi: &Probe) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let margin = 0.1 * (right - left);
    let t = a - lo.slope * (b - a) / (hi.slope - lo.slope);
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        0.5 * (a + b)
    }
}

/// Safeguarded cubic interpolation inside the bracket, bisection fallback.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let margin = 0.1 * (right - left);
    let mid = 0.5 * (a + b);
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        mid
    }
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences with step `h`, over all coordinates.
pub fn finite_difference_check(obj: &dyn Objective, x: &[f64], h: f64) -> Result<f64> {
    let n = obj.dim();
    let mut g = vec![0.0; n];
    let f = obj.eval(x, &mut g);
    check_finite(f, &g, "the check point")?;
    let mut scratch = vec![0.0; n];
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = obj.eval(&xp, &mut scratch);
        xp[i] = x[i] - h;
        let fm = obj.eval(&xp, &mut scratch);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective is not finite near coordinate {i}"
            )));
        }
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}
