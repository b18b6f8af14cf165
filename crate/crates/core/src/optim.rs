//! Dense BFGS with a backtracking Armijo line search.
//!
//! Every accepted step satisfies `f(x + a d) <= f(x) + c1 a g.d`, so the
//! objective never increases across iterations.

/// Stopping controls for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Sup-norm threshold on the gradient.
    pub gradient_tolerance: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient sup-norm fell below the tolerance.
    Converged,
    MaxIterations,
    /// No step along a steepest-descent direction decreased the objective.
    Stalled,
    /// The objective was not finite at the starting point.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_sup_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.2;
const MAX_BACKTRACKS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimises `f` from `x0`. The closure writes the gradient into its second
/// argument and returns the objective value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Minimum {
            gradient_sup_norm: f64::INFINITY,
            x,
            value: fx,
            iterations: 0,
            evaluations,
            termination: Termination::NonFinite,
        };
    }

    // inverse Hessian approximation, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut [f64]| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);
    let mut identity = true;
    let mut scaled = false;

    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hy = vec![0.0; n];

    let mut iterations = 0;
    let termination = loop {
        if sup_norm(&g) <= opts.gradient_tolerance {
            break Termination::Converged;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }

        for i in 0..n {
            d[i] = -dot(&h[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            reset(&mut h);
            identity = true;
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = -dot(&g, &g);
        }

        // before any curvature information, cap the first trial step length
        let mut alpha = if identity && !scaled {
            1.0f64.min(1.0 / dot(&d, &d).sqrt())
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut moved = false;
            for i in 0..n {
                x_new[i] = x[i] + alpha * d[i];
                moved |= x_new[i] != x[i];
            }
            if !moved {
                break;
            }
            let f_new = f(&x_new, &mut g_new);
            evaluations += 1;
            if f_new.is_finite()
                && g_new.iter().all(|v| v.is_finite())
                && f_new <= fx + ARMIJO_C1 * alpha * slope
            {
                accepted = Some(f_new);
                break;
            }
            alpha *= BACKTRACK;
        }

        let Some(f_new) = accepted else {
            if identity {
                break Termination::Stalled;
            }
            reset(&mut h);
            identity = true;
            continue;
        };
        iterations += 1;

        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;

        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-10 * (dot(&s, &s) * yy).sqrt() {
            if !scaled {
                // Shanno-Phua scaling of the initial approximation
                let gamma = sy / yy;
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            for i in 0..n {
                hy[i] = dot(&h[i * n..(i + 1) * n], &y);
            }
            let yhy = dot(&y, &hy);
            let a = (sy + yhy) / (sy * sy);
            for i in 0..n {
                let row = &mut h[i * n..(i + 1) * n];
                for j in 0..n {
                    row[j] += a * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
            identity = false;
        }
    };

    Minimum {
        gradient_sup_norm: sup_norm(&g),
        x,
        value: fx,
        iterations,
        evaluations,
        termination,
    }
}
