//! Three-step estimation: quasi-maximum likelihood for the CARMA
//! coefficients, recovery of the driving increments, and a maximum-likelihood
//! fit of the noise law on the (aggregated) increments.

use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carma::{self, CarmaSpec};
use crate::error::{CarmaError, Result};
use crate::kalman::{self, Transition};
use crate::levy::{self, IncrementSeries, LevyFamily, LevyModel, NoiseFit, NoiseFitOptions};
use crate::linalg;
use crate::optim::{self, NelderMeadOptions};

/// Observations `values[k]` at times `t0 + k h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

/// Largest tolerated relative deviation of a time step from the mean step.
pub const SPACING_TOL: f64 = 1e-8;

impl TimeSeries {
    pub fn new(t0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CarmaError::Data(format!("step must be positive, got {h}")));
        }
        if values.is_empty() {
            return Err(CarmaError::Data("time series is empty".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(CarmaError::Data(format!("non-finite observation at row {k}")));
        }
        Ok(Self { t0, h, values })
    }

    /// Builds a series from explicit time stamps, which must be equally spaced.
    pub fn from_times(times: &[f64], values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(CarmaError::Data(format!(
                "{} time stamps for {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(CarmaError::Data("need at least two observations".into()));
        }
        let n = times.len() - 1;
        let h = (times[n] - times[0]) / n as f64;
        for (k, w) in times.windows(2).enumerate() {
            let d = w[1] - w[0];
            if !((d - h).abs() <= SPACING_TOL * h.abs()) {
                return Err(CarmaError::Data(format!(
                    "irregular spacing at row {}: step {d} vs mean step {h}",
                    k + 1
                )));
            }
        }
        Self::new(times[0], h, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|k| self.t0 + k as f64 * self.h)
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Time span covered, `(len − 1) h`.
    pub fn span(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.h
    }
}

/// Which of `σ` and `b₀` is pinned to 1; the likelihood only identifies `σb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `σ = 1`, all of `b` free.
    #[default]
    Sigma,
    /// `b₀ = 1`, `σ` free.
    B0,
}

impl FromStr for Normalization {
    type Err = CarmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigma" => Ok(Normalization::Sigma),
            "b0" => Ok(Normalization::B0),
            _ => Err(CarmaError::Input(format!(
                "unknown normalization '{s}' (expected sigma|b0)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RecoveryMode {
    /// Recover increments and, if a family is given, fit the noise law.
    #[default]
    ParamsAndIncrements,
    /// Recover increments but do not fit the noise law.
    IncrementsOnly,
    /// Coefficients only.
    ParamsOnly,
}

#[derive(Debug, Clone)]
pub struct QmleOptions {
    pub normalization: Normalization,
    /// Report `c₀ = ȳ − σ b₀ μ / a_p`; otherwise keep the initial value.
    pub fit_c0: bool,
    pub recovery_mode: RecoveryMode,
    /// State transition used by the filter; `Euler` for data on an Euler grid.
    pub transition: Transition,
    /// Time scale the increments are summed to before the noise fit.
    pub aggregate: Option<f64>,
    /// Leave out the burn-in increments in the noise fit.
    pub drop_burn_in: bool,
    pub optimizer: NelderMeadOptions,
    pub noise: NoiseFitOptions,
    pub noise_init: Option<LevyModel>,
}

impl Default for QmleOptions {
    fn default() -> Self {
        Self {
            normalization: Normalization::Sigma,
            fit_c0: true,
            recovery_mode: RecoveryMode::ParamsAndIncrements,
            transition: Transition::Exact,
            aggregate: Some(1.0),
            drop_burn_in: true,
            optimizer: NelderMeadOptions::default(),
            // recovered increments are never exactly zero
            noise: NoiseFitOptions {
                smooth_atom: true,
                ..Default::default()
            },
            noise_init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Sample summary in the layout `count, mean, sd, min, quartiles, max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let pos = p * (x.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    x[lo] + (pos - lo as f64) * (x[hi] - x[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            count: n,
            mean,
            sd,
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[n - 1],
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub spec_hat: CarmaSpec,
    pub normalization: Normalization,
    /// Standard errors of the free coefficients (plus `c0` when fitted);
    /// non-finite where the Hessian is degenerate.
    pub stderr: Vec<NamedValue>,
    pub loglik: f64,
    pub stationary: bool,
    /// `σ̂ ΔL̂` on the observation grid, with its burn-in flagged.
    pub increments: Option<IncrementSeries>,
    pub noise_fit: Option<NoiseFit>,
    pub recovery_mode: RecoveryMode,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn minus_two_loglik(&self) -> f64 {
        -2.0 * self.loglik
    }

    pub fn stderr_of(&self, name: &str) -> Option<f64> {
        self.stderr.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn increment_summary(&self) -> Option<Summary> {
        self.increments.as_ref().and_then(|i| Summary::of(&i.values))
    }
}

fn param_names(p: usize, q: usize, norm: Normalization) -> Vec<String> {
    let mut names: Vec<String> = (1..=p).map(|i| format!("a{i}")).collect();
    let first_b = match norm {
        Normalization::Sigma => 0,
        Normalization::B0 => 1,
    };
    names.extend((first_b..=q).map(|j| format!("b{j}")));
    if norm == Normalization::B0 {
        names.push("sigma".into());
    }
    names
}

fn pack(spec: &CarmaSpec, norm: Normalization) -> Vec<f64> {
    let mut theta = spec.ar().to_vec();
    let b = spec.ma_coeffs();
    match norm {
        Normalization::Sigma => {
            theta.extend(b.iter().map(|v| v * spec.sigma()));
        }
        Normalization::B0 => {
            theta.extend(b[1..].iter().map(|v| v / b[0]));
            theta.push(spec.sigma() * b[0].abs());
        }
    }
    theta
}

fn unpack(theta: &[f64], p: usize, q: usize, norm: Normalization, c0: f64) -> Result<CarmaSpec> {
    let a = theta[..p].to_vec();
    let (b, sigma) = match norm {
        Normalization::Sigma => (theta[p..p + q + 1].to_vec(), 1.0),
        Normalization::B0 => {
            let mut b = vec![1.0];
            b.extend_from_slice(&theta[p..p + q]);
            (b, theta[p + q].abs())
        }
    };
    CarmaSpec::from_parts(p, q, a, b, sigma, c0)
}

/// Standard errors `sqrt(diag(H⁻¹))` of a negative log-likelihood at its
/// minimiser, reported by name. Degenerate directions give `NaN`.
pub fn standard_errors<F>(objective: &F, theta_hat: &[f64], names: &[String]) -> Vec<NamedValue>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let h = optim::numerical_hessian(objective, theta_hat);
    optim::stderr_from_hessian(&h)
        .into_iter()
        .zip(names)
        .map(|(value, name)| NamedValue {
            name: name.clone(),
            value,
        })
        .collect()
}

/// Quasi-maximum likelihood fit of the CARMA coefficients, followed by
/// increment recovery and (optionally) a noise-law fit.
pub fn qmle(
    data: &TimeSeries,
    init: &CarmaSpec,
    family: Option<LevyFamily>,
    opts: &QmleOptions,
) -> Result<FitResult> {
    let p = init.p();
    let q = init.q();
    let dim = p + q + 1;
    if data.len() < 5 * dim {
        return Err(CarmaError::Data(format!(
            "need at least {} observations for {dim} free parameters, got {}",
            5 * dim,
            data.len()
        )));
    }
    if opts.normalization == Normalization::B0 && init.ma_coeffs()[0] == 0.0 {
        return Err(CarmaError::Spec("b0 = 0 cannot be normalised to 1".into()));
    }
    let norm = opts.normalization;
    let names = param_names(p, q, norm);
    let objective = |theta: &[f64]| -> f64 {
        match unpack(theta, p, q, norm, 0.0) {
            Ok(spec) => match kalman::filter_loglik_with(&spec, data, opts.transition) {
                Ok(out) => -out.loglik,
                Err(_) => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };
    let theta0 = pack(init, norm);
    if !objective(&theta0).is_finite() {
        return Err(CarmaError::NonStationary(format!(
            "initial specification has no finite likelihood (a = {:?})",
            init.ar()
        )));
    }
    let min = optim::nelder_mead(objective, &theta0, &opts.optimizer);
    if !min.converged {
        return Err(CarmaError::Fit {
            best_params: min.x,
            best_value: min.value,
            iterations: min.iterations,
        });
    }
    let mut warnings = Vec::new();
    let mut stderr = standard_errors(&objective, &min.x, &names);
    let fitted = unpack(&min.x, p, q, norm, 0.0)?;
    let loglik = kalman::filter_loglik_with(&fitted, data, opts.transition)?.loglik;
    let stationary = carma::is_stationary(&fitted).stationary;

    let mut increments = None;
    let mut noise_fit = None;
    if !stationary {
        let msg = "fitted coefficients are not stationary; increments were not recovered".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    } else if opts.recovery_mode != RecoveryMode::ParamsOnly {
        match recover_increments(&fitted, data) {
            Ok(mut inc) => {
                for v in inc.values.iter_mut() {
                    *v *= fitted.sigma();
                }
                if opts.recovery_mode == RecoveryMode::ParamsAndIncrements {
                    if let Some(fam) = family {
                        noise_fit = Some(fit_recovered(&inc, fam, opts)?);
                    }
                }
                increments = Some(inc);
            }
            Err(e) => {
                let msg = format!("increment recovery skipped: {e}");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let mut spec_hat = fitted;
    if opts.fit_c0 {
        // E[σ L₁] from the noise fit when there is one; σ ΔL̂ is what it was fitted on
        let drift = noise_fit.as_ref().map(|f| f.model.mean(1.0)).unwrap_or(0.0);
        let ap = spec_hat.ar()[p - 1];
        let b0 = spec_hat.ma_coeffs()[0];
        let c0 = data.mean() - b0 * drift / ap;
        spec_hat = spec_hat.with_c0(c0)?;
        // long-run variance of the sample mean with unit-variance noise
        let se = spec_hat.sigma() * b0.abs() / (ap.abs() * data.span().sqrt());
        stderr.push(NamedValue {
            name: "c0".into(),
            value: se,
        });
    } else {
        spec_hat = spec_hat.with_c0(init.c0())?;
    }

    Ok(FitResult {
        spec_hat,
        normalization: norm,
        stderr,
        loglik,
        stationary,
        increments,
        noise_fit,
        recovery_mode: opts.recovery_mode,
        iterations: min.iterations,
        warnings,
    })
}

/// The noise fit performed inside [`qmle`] on scaled recovered increments.
pub fn fit_recovered(
    increments: &IncrementSeries,
    family: LevyFamily,
    opts: &QmleOptions,
) -> Result<NoiseFit> {
    let settled = if opts.drop_burn_in {
        IncrementSeries::new(
            increments.time(increments.burn_in) - increments.h,
            increments.h,
            increments.settled().to_vec(),
        )?
    } else {
        let mut s = increments.clone();
        s.burn_in = 0;
        s
    };
    let series = match opts.aggregate {
        Some(dt) => aggregate(&settled, dt)?,
        None => settled,
    };
    levy::fit_noise(&series, family, opts.noise_init.as_ref(), &opts.noise)
}

/// Right-hand side companion of `dX̃ = B X̃ dt + e_q Y/b_q dt`.
fn ma_companion(b: &[f64]) -> DMatrix<f64> {
    let q = b.len() - 1;
    let mut m = DMatrix::zeros(q, q);
    for i in 0..q.saturating_sub(1) {
        m[(i, i + 1)] = 1.0;
    }
    for j in 0..q {
        m[(q - 1, j)] = -b[j] / b[q];
    }
    m
}

/// Number of increments [`recover_increments`] returns for `n_obs`
/// observations: one per interval, less one per differenced state component.
pub fn recovered_count(p: usize, q: usize, n_obs: usize) -> usize {
    (n_obs - 1).saturating_sub(p - q - 1)
}

/// Recovers `ΔL` on the observation grid from data and a (fitted) spec.
///
/// The first `q` state components come from integrating the MA ODE with
/// exponential stepping from zero; component `q` follows from the output
/// equation and the remaining ones from forward differences. Increment `k`
/// covers `[t_k, t_{k+1}]`, and the leading entries affected by the unknown
/// ODE start value are flagged in `burn_in`.
pub fn recover_increments(spec: &CarmaSpec, data: &TimeSeries) -> Result<IncrementSeries> {
    let p = spec.p();
    let q = spec.q();
    let h = data.h;
    let n_obs = data.len();
    if n_obs < p + 2 {
        return Err(CarmaError::Data(format!(
            "recovery needs at least {} observations, got {n_obs}",
            p + 2
        )));
    }
    let st = carma::is_stationary(spec);
    if !st.stationary {
        return Err(CarmaError::NonStationary(format!("a = {:?}", spec.ar())));
    }
    let dec = carma::spectral(spec)?;
    let scale = dec.lambdas.iter().map(|l| l.norm()).fold(1.0f64, f64::max);
    let r_star = dec
        .lambdas
        .iter()
        .enumerate()
        .filter(|(_, l)| l.im.abs() <= 1e-8 * scale)
        .max_by(|x, y| x.1.re.total_cmp(&y.1.re))
        .map(|(i, _)| i)
        .ok_or_else(|| CarmaError::Recovery("no real eigenvalue to select".into()))?;
    let alpha = dec.alphas[r_star];
    if alpha.norm() < 1e-12 {
        return Err(CarmaError::Recovery(format!(
            "selected eigenvalue {} is a root of the MA polynomial",
            dec.lambdas[r_star]
        )));
    }
    let lambda = dec.lambdas[r_star].re;

    let mean = data.mean();
    let z: Vec<f64> = data.values.iter().map(|y| (y - mean) / spec.sigma()).collect();
    let b = spec.ma_coeffs();

    // state components 0..=q on the full grid
    let mut comps: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut burn_in = 0usize;
    if q == 0 {
        comps.push(z.iter().map(|v| v / b[0]).collect());
    } else {
        let bm = ma_companion(b);
        let slowest = linalg::companion_eigvals(&b[..q].iter().rev().map(|v| v / b[q]).collect::<Vec<_>>())?
            .into_iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if slowest >= 0.0 {
            return Err(CarmaError::Recovery(format!(
                "MA polynomial is not invertible (root with real part {slowest})"
            )));
        }
        burn_in = (5.0 / (slowest.abs() * h)).ceil() as usize;
        let ebh = linalg::mat_exp(&bm, h)?;
        // trapezoid on the forcing: ∫₀ʰ e^{B(h−s)} e_q f(s) ds ≈ h/2 (e^{Bh} e_q f₀ + e_q f₁)
        let ebh_e = ebh.column(q - 1).into_owned();
        let mut xt = nalgebra::DVector::<f64>::zeros(q);
        let mut tilde: Vec<Vec<f64>> = vec![Vec::with_capacity(n_obs); q];
        for col in tilde.iter_mut() {
            col.push(0.0);
        }
        for k in 1..n_obs {
            let f0 = z[k - 1] / b[q];
            let f1 = z[k] / b[q];
            xt = &ebh * &xt + &ebh_e * (0.5 * h * f0);
            xt[q - 1] += 0.5 * h * f1;
            for j in 0..q {
                tilde[j].push(xt[j]);
            }
        }
        comps.extend(tilde);
        let xq: Vec<f64> = (0..n_obs)
            .map(|k| (z[k] - (0..q).map(|j| b[j] * comps[j][k]).sum::<f64>()) / b[q])
            .collect();
        comps.push(xq);
    }
    for j in q + 1..p {
        let prev = &comps[j - 1];
        let d: Vec<f64> = prev.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        comps.push(d);
    }
    let n_states = comps[p - 1].len();

    let canon = |k: usize| -> Complex64 {
        let x: Vec<f64> = (0..p).map(|j| comps[j][k]).collect();
        dec.canonical(&x)[r_star]
    };
    let ytil: Vec<Complex64> = (0..n_states).map(canon).collect();
    let mut values = Vec::with_capacity(n_states - 1);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for k in 1..n_states {
        let dl = (ytil[k] - ytil[k - 1] - lambda * 0.5 * h * (ytil[k] + ytil[k - 1])) / alpha;
        max_re = max_re.max(dl.re.abs());
        max_im = max_im.max(dl.im.abs());
        values.push(dl.re);
    }
    if max_im > 1e-6 * max_re.max(f64::MIN_POSITIVE) {
        return Err(CarmaError::numerical(format!(
            "recovered increments carry an imaginary residue of {max_im:e}"
        )));
    }
    let mut series = IncrementSeries::new(data.t0, h, values)?;
    series.burn_in = burn_in.min(series.len());
    Ok(series)
}

/// Sums consecutive blocks of `target_dt / h` increments.
pub fn aggregate(increments: &IncrementSeries, target_dt: f64) -> Result<IncrementSeries> {
    let ratio = target_dt / increments.h;
    let k = ratio.round();
    if !(k >= 1.0) || (k * increments.h - target_dt).abs() > 1e-9 * target_dt.abs() {
        return Err(CarmaError::Data(format!(
            "target step {target_dt} is not an integer multiple of h = {}",
            increments.h
        )));
    }
    let k = k as usize;
    if k == 1 {
        return Ok(increments.clone());
    }
    let blocks = increments.len() / k;
    if blocks == 0 {
        return Err(CarmaError::Data(format!(
            "{} increments are fewer than one block of {k}",
            increments.len()
        )));
    }
    let values: Vec<f64> = increments.values[..blocks * k]
        .chunks(k)
        .map(|c| c.iter().sum())
        .collect();
    let mut out = IncrementSeries::new(increments.t0, target_dt, values)?;
    out.burn_in = increments.burn_in.div_ceil(k).min(blocks);
    Ok(out)
}
