//! Limited-memory BFGS with Armijo backtracking, used by the likelihood fits.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub history: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iterations: 10_000,
            gradient_tolerance: 1e-10,
            history: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The line search could not decrease the objective any further; the
    /// iterate is at the floating-point resolution of the objective.
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub reason: StopReason,
}

const MAX_HALVINGS: usize = 40;
const MAX_LINE_SEARCH_FAILURES: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns the value and gradient at a point. Non-finite
/// values are treated as outside the domain and rejected by the line search.
pub(crate) fn minimize(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    opts: LbfgsOptions,
) -> LbfgsResult {
    let mut x = x0;
    let (mut value, mut grad) = f(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut failures = 0;

    loop {
        let gnorm = norm(&grad);
        if gnorm < opts.gradient_tolerance {
            return LbfgsResult {
                x,
                value,
                gradient_norm: gnorm,
                iterations,
                reason: StopReason::GradientTolerance,
            };
        }
        if iterations >= opts.max_iterations {
            return LbfgsResult {
                x,
                value,
                gradient_norm: gnorm,
                iterations,
                reason: StopReason::MaxIterations,
            };
        }
        iterations += 1;

        // Two-loop recursion for the quasi-Newton direction.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / gnorm.max(1.0));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut direction: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&direction, &grad);
        if !(slope < 0.0) {
            history.clear();
            direction = grad.iter().map(|g| -g / gnorm.max(1.0)).collect();
            slope = dot(&direction, &grad);
        }

        // Backtracking until the Armijo condition holds.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
            let (v, g) = f(&trial);
            if v.is_finite() && v <= value + 1e-4 * step * slope {
                accepted = Some((trial, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            // A failed steepest-descent step, or repeated failures of the
            // quasi-Newton direction, mean the objective is resolved to
            // rounding and further iterations only cycle.
            failures += 1;
            let steepest = history.is_empty();
            history.clear();
            if steepest || failures >= MAX_LINE_SEARCH_FAILURES {
                return LbfgsResult {
                    x,
                    value,
                    gradient_norm: gnorm,
                    iterations,
                    reason: StopReason::Stalled,
                };
            }
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.history {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        value = v_new;
        grad = g_new;
    }
}
