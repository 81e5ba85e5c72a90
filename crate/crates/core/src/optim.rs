//! Derivative-free minimisation (Nelder–Mead with optional box bounds) and
//! finite-difference Hessians for standard errors.

use nalgebra::DMatrix;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Iteration cap per run; `None` means `500 · dim`.
    pub max_iter: Option<usize>,
    /// Relative spread of simplex values at which a run stops.
    pub ftol: f64,
    /// Initial simplex edge relative to `|x_i|` (absolute when `x_i ≈ 0`).
    pub initial_step: f64,
    /// Number of restarts from the incumbent after the first run converges.
    pub restarts: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: None,
            ftol: 1e-10,
            initial_step: 0.1,
            restarts: 1,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&i, &j| self.values[i].total_cmp(&self.values[j]));
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }
}

/// Minimises `f` from `x0`. Non-finite objective values are treated as `+∞`,
/// which is how callers express infeasible regions.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let bounds = opts.bounds.as_deref();
    let max_iter = opts.max_iter.unwrap_or(500 * n.max(1));
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best = x0.to_vec();
    project(&mut best, bounds);
    let mut best_val = eval(&best, &mut evals);
    let mut total_iter = 0;
    let mut converged = false;

    for run in 0..=opts.restarts {
        let mut points = vec![best.clone()];
        for i in 0..n {
            let mut p = best.clone();
            let step = if p[i].abs() > 1e-8 {
                opts.initial_step * p[i].abs()
            } else {
                opts.initial_step
            };
            p[i] += step;
            project(&mut p, bounds);
            if p[i] == best[i] {
                // pinned at an upper bound: step inward instead
                p[i] -= 2.0 * step;
                project(&mut p, bounds);
            }
            points.push(p);
        }
        let mut values = vec![best_val];
        for p in &points[1..] {
            values.push(eval(p, &mut evals));
        }
        let mut s = Simplex { points, values };
        let mut run_converged = false;
        let mut iter = 0;
        while iter < max_iter {
            s.sort();
            let lo = s.values[0];
            let hi = s.values[n];
            if lo.is_finite()
                && hi.is_finite()
                && 2.0 * (hi - lo).abs() <= opts.ftol * (hi.abs() + lo.abs()) + 1e-300
            {
                run_converged = true;
                break;
            }
            iter += 1;
            let mut centroid = vec![0.0; n];
            for p in &s.points[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                let mut x: Vec<f64> = centroid
                    .iter()
                    .zip(&s.points[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect();
                project(&mut x, bounds);
                x
            };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < s.values[0] {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    s.points[n] = xe;
                    s.values[n] = fe;
                } else {
                    s.points[n] = xr;
                    s.values[n] = fr;
                }
                continue;
            }
            if fr < s.values[n - 1] {
                s.points[n] = xr;
                s.values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < s.values[n] {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < s.values[n].min(fr) {
                s.points[n] = xc;
                s.values[n] = fc;
                continue;
            }
            // shrink towards the best vertex
            let x_best = s.points[0].clone();
            for i in 1..=n {
                let mut x: Vec<f64> = x_best
                    .iter()
                    .zip(&s.points[i])
                    .map(|(b, p)| b + 0.5 * (p - b))
                    .collect();
                project(&mut x, bounds);
                s.values[i] = eval(&x, &mut evals);
                s.points[i] = x;
            }
        }
        s.sort();
        total_iter += iter;
        let improved = s.values[0] < best_val;
        let gain = best_val - s.values[0];
        if improved {
            best = s.points[0].clone();
            best_val = s.values[0];
        }
        converged = run_converged;
        if !run_converged {
            break;
        }
        // a restart that does not move the optimum ends the search
        if run > 0 && gain <= opts.ftol * best_val.abs().max(1e-300) {
            break;
        }
    }

    Minimum {
        x: best,
        value: best_val,
        iterations: total_iter,
        evaluations: evals,
        converged,
    }
}

/// Central-difference step for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-5f64.max(1e-5 * x.abs())
}

/// Hessian of `f` at `x` by central differences; evaluations run in parallel.
pub fn numerical_hessian<F>(f: &F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|&v| fd_step(v)).collect();
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in moves {
            y[i] += s * steps[i];
        }
        y
    };
    let mut points = vec![x.to_vec()];
    for i in 0..n {
        points.push(shifted(&[(i, 1.0)]));
        points.push(shifted(&[(i, -1.0)]));
    }
    for i in 0..n {
        for j in 0..i {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                points.push(shifted(&[(i, si), (j, sj)]));
            }
        }
    }
    let vals: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    let f0 = vals[0];
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = vals[1 + 2 * i];
        let fm = vals[2 + 2 * i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
    }
    let mut k = 1 + 2 * n;
    for i in 0..n {
        for j in 0..i {
            let v = (vals[k] - vals[k + 1] - vals[k + 2] + vals[k + 3]) / (4.0 * steps[i] * steps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
            k += 4;
        }
    }
    h
}

/// `sqrt(diag(H⁻¹))` for a Hessian of a negative log-likelihood. Directions
/// with non-positive (or numerically zero) curvature make every coordinate
/// that loads on them non-finite instead of failing.
pub fn stderr_from_hessian(h: &DMatrix<f64>) -> Vec<f64> {
    let n = h.nrows();
    if h.iter().any(|v| !v.is_finite()) {
        return vec![f64::NAN; n];
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let good: Vec<bool> = eig
        .eigenvalues
        .iter()
        .map(|&v| v > 1e-10 * scale && v > 0.0)
        .collect();
    (0..n)
        .map(|i| {
            let mut var = 0.0;
            for (k, &ok) in good.iter().enumerate() {
                let w = eig.eigenvectors[(i, k)];
                if ok {
                    var += w * w / eig.eigenvalues[k];
                } else if w.abs() > 1e-6 {
                    return f64::NAN;
                }
            }
            var.sqrt()
        })
        .collect()
}
