//! Quasi-Newton minimization with a strong-Wolfe line search.
//!
//! Values and gradients are requested separately so callers can count
//! objective calls and gradient-vector calls independently; a gradient is
//! only requested at points whose value has just been computed.

/// Objective with an analytic gradient.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    /// Convergence when the largest gradient component is at or below this.
    pub gtol: f64,
    /// Convergence when the largest step component is at or below this.
    pub xtol: f64,
    /// Iteration cap; `None` means `200 * n`.
    pub max_iter: Option<usize>,
    pub c1: f64,
    pub c2: f64,
}

impl BfgsOptions {
    /// Gradient tolerance `tol`, step tolerance `tol / 100`.
    pub fn from_tol(tol: f64) -> Self {
        Self {
            gtol: tol,
            xtol: tol * 1e-2,
            ..Self::default()
        }
    }
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-4,
            xtol: 1e-6,
            max_iter: None,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    /// The line search could not find an acceptable point; best so far kept.
    LineSearch,
    MaxIter,
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub value_calls: usize,
    pub gradient_calls: usize,
    pub termination: Termination,
}

impl BfgsResult {
    pub fn degraded(&self) -> bool {
        matches!(
            self.termination,
            Termination::LineSearch | Termination::MaxIter
        )
    }
}

struct Counted<'a, O: Objective> {
    obj: &'a mut O,
    values: usize,
    gradients: usize,
}

impl<O: Objective> Counted<'_, O> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.values += 1;
        self.obj.value(x)
    }
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        self.gradients += 1;
        self.obj.gradient(x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

/// Accepted line-search point.
struct Step {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
}

fn quadratic_min(lo: f64, hi: f64, f_lo: f64, f_hi: f64, d_lo: f64) -> f64 {
    let d = hi - lo;
    let denom = 2.0 * (f_hi - f_lo - d_lo * d);
    let mut a = if denom > 0.0 {
        lo - d_lo * d * d / denom
    } else {
        f64::NAN
    };
    let (a_min, a_max) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let margin = 0.1 * (a_max - a_min);
    if !a.is_finite() || a < a_min + margin || a > a_max - margin {
        a = 0.5 * (lo + hi);
    }
    a
}

#[allow(clippy::too_many_arguments)]
fn zoom<O: Objective>(
    obj: &mut Counted<O>,
    x: &[f64],
    p: &[f64],
    f0: f64,
    d0: f64,
    opts: &BfgsOptions,
    mut lo: (f64, f64, f64, Option<Vec<f64>>),
    mut hi: (f64, f64),
) -> Result<Step, Option<Step>> {
    for _ in 0..30 {
        let a = quadratic_min(lo.0, hi.0, lo.1, hi.1, lo.2);
        let fa = obj.value(&axpy(x, a, p));
        if fa > f0 + opts.c1 * a * d0 || fa >= lo.1 {
            hi = (a, fa);
        } else {
            let ga = obj.gradient(&axpy(x, a, p));
            let da = dot(&ga, p);
            if da.abs() <= -opts.c2 * d0 {
                return Ok(Step {
                    alpha: a,
                    f: fa,
                    g: ga,
                });
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = (lo.0, lo.1);
            }
            lo = (a, fa, da, Some(ga));
        }
        if (hi.0 - lo.0).abs() < 1e-14 {
            break;
        }
    }
    Err(lo.3.map(|g| Step {
        alpha: lo.0,
        f: lo.1,
        g,
    }))
}

/// Strong-Wolfe search along `p` (Nocedal and Wright, Algorithms 3.5/3.6).
/// On failure returns the best Armijo point found, if any.
fn line_search<O: Objective>(
    obj: &mut Counted<O>,
    x: &[f64],
    p: &[f64],
    f0: f64,
    d0: f64,
    alpha_init: f64,
    opts: &BfgsOptions,
) -> Result<Step, Option<Step>> {
    let mut prev = (0.0, f0, d0, None::<Vec<f64>>);
    let mut a = alpha_init;
    for i in 0..30 {
        let fa = obj.value(&axpy(x, a, p));
        if fa > f0 + opts.c1 * a * d0 || (i > 0 && fa >= prev.1) {
            return zoom(obj, x, p, f0, d0, opts, prev, (a, fa));
        }
        let ga = obj.gradient(&axpy(x, a, p));
        let da = dot(&ga, p);
        if da.abs() <= -opts.c2 * d0 {
            return Ok(Step {
                alpha: a,
                f: fa,
                g: ga,
            });
        }
        if da >= 0.0 {
            return zoom(
                obj,
                x,
                p,
                f0,
                d0,
                opts,
                (a, fa, da, Some(ga)),
                (prev.0, prev.1),
            );
        }
        prev = (a, fa, da, Some(ga));
        a *= 2.0;
    }
    Err(prev.3.map(|g| Step {
        alpha: prev.0,
        f: prev.1,
        g,
    }))
}

/// Minimizes `obj` from `x0` with an inverse-Hessian BFGS update started at
/// the identity.
pub fn minimize<O: Objective>(obj: &mut O, x0: &[f64], opts: &BfgsOptions) -> BfgsResult {
    let n = x0.len();
    let mut c = Counted {
        obj,
        values: 0,
        gradients: 0,
    };
    let mut x = x0.to_vec();
    let mut f = c.value(&x);
    if n == 0 {
        return BfgsResult {
            x,
            f,
            grad: Vec::new(),
            iterations: 0,
            value_calls: c.values,
            gradient_calls: c.gradients,
            termination: Termination::Gradient,
        };
    }
    let mut g = c.gradient(&x);
    let max_iter = opts.max_iter.unwrap_or(200 * n);
    let mut hinv = vec![0.0; n * n];
    for i in 0..n {
        hinv[i * n + i] = 1.0;
    }
    let mut f_prev = f64::NAN;
    let mut iterations = 0;
    let mut termination = Termination::MaxIter;
    while iterations < max_iter {
        if inf_norm(&g) <= opts.gtol {
            termination = Termination::Gradient;
            break;
        }
        let mut p: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let mut d0 = dot(&g, &p);
        if d0 >= 0.0 {
            // Not a descent direction: restart from steepest descent.
            hinv.iter_mut()
                .enumerate()
                .for_each(|(k, v)| *v = if k % (n + 1) == 0 { 1.0 } else { 0.0 });
            p = g.iter().map(|v| -v).collect();
            d0 = dot(&g, &p);
        }
        let alpha_init = if f_prev.is_nan() {
            (1.01 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            let a = 1.01 * 2.0 * (f - f_prev) / d0;
            if a.is_finite() && a > 0.0 {
                a.min(1.0)
            } else {
                1.0
            }
        };
        let step = match line_search(&mut c, &x, &p, f, d0, alpha_init, opts) {
            Ok(s) => s,
            Err(Some(s)) if s.f < f => s,
            Err(_) => {
                termination = Termination::LineSearch;
                break;
            }
        };
        iterations += 1;
        let s: Vec<f64> = p.iter().map(|v| v * step.alpha).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        x = axpy(&x, 1.0, &s);
        f_prev = f;
        f = step.f;
        g = step.g;
        if inf_norm(&s) <= opts.xtol {
            termination = if inf_norm(&g) <= opts.gtol {
                Termination::Gradient
            } else {
                Termination::Step
            };
            break;
        }
        let ys = dot(&y, &s);
        if ys > 1e-12 {
            let rho = 1.0 / ys;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| hinv[i * n + j] * y[j]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    BfgsResult {
        x,
        f,
        grad: g,
        iterations,
        value_calls: c.values,
        gradient_calls: c.gradients,
        termination,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        }
    }

    struct Quadratic;

    impl Objective for Quadratic {
        fn value(&mut self, x: &[f64]) -> f64 {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v * v)
                .sum()
        }
        fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
            x.iter()
                .enumerate()
                .map(|(i, v)| 2.0 * (i + 1) as f64 * v)
                .collect()
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let opts = BfgsOptions {
            gtol: 1e-8,
            xtol: 1e-12,
            ..Default::default()
        };
        let r = minimize(&mut Rosenbrock, &[-1.2, 1.0], &opts);
        assert_eq!(r.termination, Termination::Gradient);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
        assert!(r.value_calls >= r.gradient_calls);
    }

    #[test]
    fn quadratic_and_empty() {
        let r = minimize(&mut Quadratic, &[1.0, -2.0, 0.5], &BfgsOptions::default());
        assert!(r.f < 1e-8);
        assert!(!r.degraded());
        let r = minimize(&mut Quadratic, &[], &BfgsOptions::default());
        assert_eq!((r.iterations, r.value_calls, r.gradient_calls), (0, 1, 0));
    }
}
