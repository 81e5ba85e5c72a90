//! Driving-noise families: increment sampling, characteristic functions,
//! densities (closed form and Fourier inversion) and maximum-likelihood fits.
//!
//! Parameterisations, with `t` the time span of an increment:
//!
//! * `Brownian(μ, σ)`: `L_t ~ N(μt, σ²t)`.
//! * `CompoundPoissonNormal(λ, μ, σ)`: `Poisson(λt)` jumps, each `N(μ, σ²)`.
//! * `VarianceGamma(λ, α, β, μ)`:
//!   `φ(u) = e^{iuμt} ((α²−β²) / (α² − (β+iu)²))^{λt}`, i.e. `μt + βG + √G Z`
//!   with `G ~ Gamma(shape λt, rate (α²−β²)/2)`.
//! * `NormalInverseGaussian(α, β, δ, μ)`:
//!   `φ(u) = exp(iuμt + δt(√(α²−β²) − √(α²−(β+iu)²)))`, i.e. `μt + βG + √G Z`
//!   with `G ~ IG(mean δt/√(α²−β²), shape δ²t²)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CarmaError, Result};
use crate::optim::{self, NelderMeadOptions};
use crate::quad;
use crate::special::{ln_bessel_k, ln_gamma};

/// Parametric driving Lévy process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum LevyModel {
    Brownian {
        mu: f64,
        sigma: f64,
    },
    #[serde(alias = "CP")]
    CompoundPoissonNormal {
        lambda: f64,
        mu: f64,
        sigma: f64,
    },
    #[serde(alias = "VG")]
    VarianceGamma {
        lambda: f64,
        alpha: f64,
        beta: f64,
        mu: f64,
    },
    #[serde(alias = "NIG")]
    NormalInverseGaussian {
        alpha: f64,
        beta: f64,
        delta: f64,
        mu: f64,
    },
}

/// Family tag without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevyFamily {
    Brownian,
    #[serde(alias = "CP")]
    CompoundPoissonNormal,
    #[serde(alias = "VG")]
    VarianceGamma,
    #[serde(alias = "NIG")]
    NormalInverseGaussian,
}

impl LevyFamily {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            LevyFamily::Brownian => &["mu", "sigma"],
            LevyFamily::CompoundPoissonNormal => &["lambda", "mu", "sigma"],
            LevyFamily::VarianceGamma => &["lambda", "alpha", "beta", "mu"],
            LevyFamily::NormalInverseGaussian => &["alpha", "beta", "delta", "mu"],
        }
    }

    /// Builds a model from parameters in [`param_names`](Self::param_names) order.
    /// Validity is not checked here.
    pub fn with_params(self, p: &[f64]) -> Result<LevyModel> {
        if p.len() != self.param_names().len() {
            return Err(CarmaError::Param(format!(
                "{self} takes {} parameters, got {}",
                self.param_names().len(),
                p.len()
            )));
        }
        Ok(match self {
            LevyFamily::Brownian => LevyModel::Brownian {
                mu: p[0],
                sigma: p[1],
            },
            LevyFamily::CompoundPoissonNormal => LevyModel::CompoundPoissonNormal {
                lambda: p[0],
                mu: p[1],
                sigma: p[2],
            },
            LevyFamily::VarianceGamma => LevyModel::VarianceGamma {
                lambda: p[0],
                alpha: p[1],
                beta: p[2],
                mu: p[3],
            },
            LevyFamily::NormalInverseGaussian => LevyModel::NormalInverseGaussian {
                alpha: p[0],
                beta: p[1],
                delta: p[2],
                mu: p[3],
            },
        })
    }

    /// Moment-matched starting values for a fit on increments of span `t`.
    pub fn default_init(self, increments: &IncrementSeries) -> LevyModel {
        let t = increments.h;
        let n = increments.values.len().max(1) as f64;
        let mean = increments.values.iter().sum::<f64>() / n;
        let var = (increments.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(1e-12);
        match self {
            LevyFamily::Brownian => LevyModel::Brownian {
                mu: mean / t,
                sigma: (var / t).sqrt(),
            },
            LevyFamily::CompoundPoissonNormal => LevyModel::CompoundPoissonNormal {
                lambda: 1.0,
                mu: mean / t,
                sigma: (var / t).sqrt(),
            },
            LevyFamily::VarianceGamma => LevyModel::VarianceGamma {
                lambda: 1.0,
                alpha: (2.0 * t / var).sqrt(),
                beta: 0.0,
                mu: mean / t,
            },
            LevyFamily::NormalInverseGaussian => LevyModel::NormalInverseGaussian {
                alpha: 1.0,
                beta: 0.0,
                delta: var / t,
                mu: mean / t,
            },
        }
    }
}

impl fmt::Display for LevyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LevyFamily::Brownian => "Brownian",
            LevyFamily::CompoundPoissonNormal => "CompoundPoissonNormal",
            LevyFamily::VarianceGamma => "VarianceGamma",
            LevyFamily::NormalInverseGaussian => "NormalInverseGaussian",
        };
        f.write_str(s)
    }
}

impl FromStr for LevyFamily {
    type Err = CarmaError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "brownian" | "bm" | "gaussian" => Ok(LevyFamily::Brownian),
            "compoundpoissonnormal" | "compoundpoisson" | "cp" => Ok(LevyFamily::CompoundPoissonNormal),
            "variancegamma" | "vg" => Ok(LevyFamily::VarianceGamma),
            "normalinversegaussian" | "nig" => Ok(LevyFamily::NormalInverseGaussian),
            _ => Err(CarmaError::Input(format!("unknown noise family '{s}'"))),
        }
    }
}

fn check_span(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CarmaError::Domain(format!("time span must be positive, got {t}")))
    }
}

impl LevyModel {
    pub fn family(&self) -> LevyFamily {
        match self {
            LevyModel::Brownian { .. } => LevyFamily::Brownian,
            LevyModel::CompoundPoissonNormal { .. } => LevyFamily::CompoundPoissonNormal,
            LevyModel::VarianceGamma { .. } => LevyFamily::VarianceGamma,
            LevyModel::NormalInverseGaussian { .. } => LevyFamily::NormalInverseGaussian,
        }
    }

    /// Parameters in [`LevyFamily::param_names`] order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            LevyModel::Brownian { mu, sigma } => vec![mu, sigma],
            LevyModel::CompoundPoissonNormal { lambda, mu, sigma } => vec![lambda, mu, sigma],
            LevyModel::VarianceGamma {
                lambda,
                alpha,
                beta,
                mu,
            } => vec![lambda, alpha, beta, mu],
            LevyModel::NormalInverseGaussian {
                alpha,
                beta,
                delta,
                mu,
            } => vec![alpha, beta, delta, mu],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(CarmaError::Param(format!("non-finite parameter in {self:?}")));
        }
        let ok = match *self {
            LevyModel::Brownian { sigma, .. } => sigma > 0.0,
            LevyModel::CompoundPoissonNormal { lambda, sigma, .. } => lambda > 0.0 && sigma > 0.0,
            LevyModel::VarianceGamma {
                lambda, alpha, beta, ..
            } => lambda > 0.0 && alpha > beta.abs(),
            LevyModel::NormalInverseGaussian {
                alpha, beta, delta, ..
            } => alpha > beta.abs() && delta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(CarmaError::Param(format!(
                "parameters violate family constraints: {self:?}"
            )))
        }
    }

    /// `E[L_t]`.
    pub fn mean(&self, t: f64) -> f64 {
        t * match *self {
            LevyModel::Brownian { mu, .. } => mu,
            LevyModel::CompoundPoissonNormal { lambda, mu, .. } => lambda * mu,
            LevyModel::VarianceGamma {
                lambda,
                alpha,
                beta,
                mu,
            } => mu + 2.0 * beta * lambda / (alpha * alpha - beta * beta),
            LevyModel::NormalInverseGaussian {
                alpha,
                beta,
                delta,
                mu,
            } => mu + delta * beta / (alpha * alpha - beta * beta).sqrt(),
        }
    }

    /// `Var[L_t]`.
    pub fn variance(&self, t: f64) -> f64 {
        t * match *self {
            LevyModel::Brownian { sigma, .. } => sigma * sigma,
            LevyModel::CompoundPoissonNormal { lambda, mu, sigma } => lambda * (sigma * sigma + mu * mu),
            LevyModel::VarianceGamma {
                lambda, alpha, beta, ..
            } => {
                let d = alpha * alpha - beta * beta;
                2.0 * lambda * (alpha * alpha + beta * beta) / (d * d)
            }
            LevyModel::NormalInverseGaussian {
                alpha, beta, delta, ..
            } => {
                let g = (alpha * alpha - beta * beta).sqrt();
                delta * alpha * alpha / (g * g * g)
            }
        }
    }

    /// Probability of an exactly-zero increment over span `t`.
    pub fn atom_mass(&self, t: f64) -> f64 {
        match *self {
            LevyModel::CompoundPoissonNormal { lambda, .. } => (-lambda * t).exp(),
            _ => 0.0,
        }
    }

    /// Characteristic function `E[exp(iuL_t)]`.
    pub fn char_fn(&self, u: f64, t: f64) -> Complex64 {
        let i = Complex64::i();
        match *self {
            LevyModel::Brownian { mu, sigma } => (i * u * mu * t - 0.5 * u * u * sigma * sigma * t).exp(),
            LevyModel::CompoundPoissonNormal { lambda, mu, sigma } => {
                let jump = (i * u * mu - 0.5 * u * u * sigma * sigma).exp();
                (lambda * t * (jump - 1.0)).exp()
            }
            LevyModel::VarianceGamma {
                lambda,
                alpha,
                beta,
                mu,
            } => {
                let bu = Complex64::new(beta, u);
                let denom = alpha * alpha - bu * bu;
                let num = Complex64::new(alpha * alpha - beta * beta, 0.0);
                (i * u * mu * t + lambda * t * (num.ln() - denom.ln())).exp()
            }
            LevyModel::NormalInverseGaussian {
                alpha,
                beta,
                delta,
                mu,
            } => {
                let gamma = (alpha * alpha - beta * beta).sqrt();
                let bu = Complex64::new(beta, u);
                let root = (alpha * alpha - bu * bu).sqrt();
                (i * u * mu * t + delta * t * (gamma - root)).exp()
            }
        }
    }

    /// Log of the closed-form density of `L_t` at `x` (continuous part only
    /// for the compound Poisson family).
    pub fn ln_density(&self, x: f64, t: f64) -> f64 {
        match *self {
            LevyModel::Brownian { mu, sigma } => {
                let v = sigma * sigma * t;
                -0.5 * (2.0 * PI * v).ln() - (x - mu * t).powi(2) / (2.0 * v)
            }
            LevyModel::CompoundPoissonNormal { lambda, mu, sigma } => {
                let lt = lambda * t;
                let terms = poisson_terms(lt);
                let mut max = f64::NEG_INFINITY;
                let logs: Vec<f64> = terms
                    .iter()
                    .map(|&(k, ln_pk)| {
                        let kf = k as f64;
                        let v = kf * sigma * sigma;
                        let l = ln_pk - 0.5 * (2.0 * PI * v).ln() - (x - kf * mu).powi(2) / (2.0 * v);
                        max = max.max(l);
                        l
                    })
                    .collect();
                if max == f64::NEG_INFINITY {
                    return max;
                }
                max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
            }
            LevyModel::VarianceGamma {
                lambda,
                alpha,
                beta,
                mu,
            } => {
                let lt = lambda * t;
                let nu = lt - 0.5;
                let d = x - mu * t;
                let y = d.abs();
                let head = lt * (alpha * alpha - beta * beta).ln()
                    - 0.5 * PI.ln()
                    - ln_gamma(lt)
                    - nu * (2.0 * alpha).ln()
                    + beta * d;
                let z = alpha * y;
                if z < 1e-12 {
                    if nu > 0.0 {
                        // y^ν K_ν(αy) → Γ(ν) 2^{ν−1} α^{−ν}
                        head + ln_gamma(nu) + (nu - 1.0) * 2f64.ln() - nu * alpha.ln()
                    } else {
                        f64::INFINITY
                    }
                } else {
                    head + nu * y.ln() + ln_bessel_k(nu, z)
                }
            }
            LevyModel::NormalInverseGaussian {
                alpha,
                beta,
                delta,
                mu,
            } => {
                let dt = delta * t;
                let d = x - mu * t;
                let s = (dt * dt + d * d).sqrt();
                let gamma = (alpha * alpha - beta * beta).sqrt();
                (alpha * dt / PI).ln() + ln_bessel_k(1.0, alpha * s) - s.ln() + dt * gamma + beta * d
            }
        }
    }

    /// Closed-form density of `L_t` at `x`; for the compound Poisson family
    /// this is the continuous part (total mass `1 − e^{−λt}`).
    pub fn density(&self, x: f64, t: f64) -> Result<f64> {
        self.validate()?;
        check_span(t)?;
        Ok(self.ln_density(x, t).exp())
    }

    /// Density by trapezoidal Fourier inversion of the characteristic
    /// function on `grid`; the compound Poisson atom is removed first.
    pub fn density_fourier(&self, x: f64, t: f64, grid: &FourierGrid) -> Result<f64> {
        self.validate()?;
        check_span(t)?;
        let atom = self.atom_mass(t);
        let du = grid.spacing();
        let half = grid.points / 2;
        let mut acc = 0.5 * (1.0 - atom);
        for k in 1..=half {
            let u = k as f64 * du;
            let phi = self.char_fn(u, t) - atom;
            let term = (Complex64::new(0.0, -u * x).exp() * phi).re;
            acc += if k == half { 0.5 * term } else { term };
        }
        let f = acc * du / PI;
        if !f.is_finite() {
            return Err(CarmaError::numerical(
                "Fourier inversion produced a non-finite value",
            ));
        }
        Ok(f.max(0.0))
    }

    /// Draws one increment over span `h`.
    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, h: f64) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        match *self {
            LevyModel::Brownian { mu, sigma } => mu * h + sigma * h.sqrt() * z,
            LevyModel::CompoundPoissonNormal { lambda, mu, sigma } => {
                let n: f64 = Poisson::new(lambda * h).expect("validated").sample(rng);
                if n == 0.0 {
                    0.0
                } else {
                    n * mu + sigma * n.sqrt() * z
                }
            }
            LevyModel::VarianceGamma {
                lambda,
                alpha,
                beta,
                mu,
            } => {
                let rate = 0.5 * (alpha * alpha - beta * beta);
                let g: f64 = Gamma::new(lambda * h, 1.0 / rate).expect("validated").sample(rng);
                mu * h + beta * g + g.sqrt() * z
            }
            LevyModel::NormalInverseGaussian {
                alpha,
                beta,
                delta,
                mu,
            } => {
                let gamma = (alpha * alpha - beta * beta).sqrt();
                let dh = delta * h;
                let g: f64 = InverseGaussian::new(dh / gamma, dh * dh)
                    .expect("validated")
                    .sample(rng);
                mu * h + beta * g + g.sqrt() * z
            }
        }
    }

    /// `n` independent increments over span `h`, drawn from `rng`.
    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R, h: f64, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        check_span(h)?;
        Ok((0..n).map(|_| self.draw(rng, h)).collect())
    }
}

/// `(k, ln P(K = k))` for `K ~ Poisson(m)`, `k ≥ 1`, truncated once the
/// remaining tail mass drops below `1e-12`.
fn poisson_terms(m: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let ln_m = m.ln();
    let mut cdf = (-m).exp();
    let mut k = 1usize;
    loop {
        let ln_pk = -m + k as f64 * ln_m - ln_gamma(k as f64 + 1.0);
        out.push((k, ln_pk));
        cdf += ln_pk.exp();
        if (1.0 - cdf < 1e-12 && k as f64 > m) || k > 10_000 {
            break;
        }
        k += 1;
    }
    out
}

/// Trapezoid grid for Fourier inversion: `points` nodes spanning `[-u_max, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierGrid {
    pub u_max: f64,
    pub points: usize,
}

impl Default for FourierGrid {
    fn default() -> Self {
        Self {
            u_max: 256.0,
            points: 1 << 14,
        }
    }
}

impl FourierGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.u_max / self.points as f64
    }
}

/// Consecutive increments `ΔL` over steps of length `h`. Increment `k`
/// covers `[t0 + k h, t0 + (k+1) h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    pub t0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    /// Leading entries contaminated by an unknown initial condition.
    #[serde(default)]
    pub burn_in: usize,
}

impl IncrementSeries {
    pub fn new(t0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        check_span(h)?;
        if values.is_empty() {
            return Err(CarmaError::Data("increment series is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CarmaError::Data("increment series has non-finite values".into()));
        }
        Ok(Self {
            t0,
            h,
            values,
            burn_in: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Right endpoint of increment `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + (k + 1) as f64 * self.h
    }

    /// Values after the flagged burn-in.
    pub fn settled(&self) -> &[f64] {
        &self.values[self.burn_in.min(self.values.len())..]
    }
}

/// `n` draws of `L_h − L_0`, deterministic in `seed`.
pub fn sample_increments(model: &LevyModel, h: f64, n: usize, seed: u64) -> Result<IncrementSeries> {
    if n == 0 {
        return Err(CarmaError::Data("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = model.sample_with(&mut rng, h, n)?;
    IncrementSeries::new(0.0, h, values)
}

/// How densities are evaluated inside the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum DensityMethod {
    #[default]
    ClosedForm,
    Fourier(FourierGrid),
}

#[derive(Debug, Clone)]
pub struct NoiseFitOptions {
    pub density: DensityMethod,
    /// Values with `|x| < atom_eps` count as the compound Poisson atom at zero.
    pub atom_eps: f64,
    /// Compound Poisson only: spread every mixture component, the atom
    /// included, by an extra `N(0, τ²)` with `τ` fitted. Recovered
    /// increments carry reconstruction error and are never exactly zero,
    /// so without this the atom is unreachable.
    pub smooth_atom: bool,
    pub optimizer: NelderMeadOptions,
}

impl Default for NoiseFitOptions {
    fn default() -> Self {
        Self {
            density: DensityMethod::ClosedForm,
            atom_eps: 1e-12,
            smooth_atom: false,
            optimizer: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseFit {
    pub model: LevyModel,
    pub names: Vec<String>,
    pub stderr: Vec<f64>,
    pub loglik: f64,
    /// Some parameter sits (numerically) on the boundary of its constraint set.
    pub at_boundary: bool,
    pub iterations: usize,
    /// Fitted `τ` and its standard error when the atom was smoothed.
    pub atom_sd: Option<(f64, f64)>,
}

impl NoiseFit {
    pub fn minus_two_loglik(&self) -> f64 {
        -2.0 * self.loglik
    }
}

/// Log-likelihood of `increments` under `model` (`-∞` for invalid parameters).
pub fn noise_loglik(model: &LevyModel, increments: &IncrementSeries, opts: &NoiseFitOptions) -> f64 {
    if model.validate().is_err() {
        return f64::NEG_INFINITY;
    }
    let t = increments.h;
    let atom = model.atom_mass(t);
    let ln_atom = atom.ln();
    let mut total = 0.0;
    for &x in &increments.values {
        let l = if atom > 0.0 && x.abs() < opts.atom_eps {
            ln_atom
        } else {
            match opts.density {
                DensityMethod::ClosedForm => model.ln_density(x, t),
                DensityMethod::Fourier(grid) => match model.density_fourier(x, t, &grid) {
                    Ok(f) => f.ln(),
                    Err(_) => f64::NEG_INFINITY,
                },
            }
        };
        total += l;
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// `ln Σ_{k≥0} Pois(k; λt) N(x; kμ, kσ² + τ²)`.
fn cp_smoothed_ln_density(lambda: f64, mu: f64, sigma: f64, tau: f64, x: f64, t: f64) -> f64 {
    let ln_norm = |m: f64, v: f64| -0.5 * (2.0 * PI * v).ln() - 0.5 * (x - m).powi(2) / v;
    let mut terms = vec![-lambda * t + ln_norm(0.0, tau * tau)];
    for (k, ln_pk) in poisson_terms(lambda * t) {
        let k = k as f64;
        terms.push(ln_pk + ln_norm(k * mu, k * sigma * sigma + tau * tau));
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}

fn smoothed_cp_loglik(theta: &[f64], increments: &IncrementSeries) -> f64 {
    let (lambda, mu, sigma, tau) = (theta[0], theta[1], theta[2], theta[3]);
    if !(lambda > 0.0 && sigma > 0.0 && tau > 0.0) {
        return f64::NEG_INFINITY;
    }
    let total: f64 = increments
        .values
        .iter()
        .map(|&x| cp_smoothed_ln_density(lambda, mu, sigma, tau, x, increments.h))
        .sum();
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

fn near_boundary(model: &LevyModel) -> bool {
    let tol = 1e-6;
    match *model {
        LevyModel::Brownian { sigma, .. } => sigma < tol,
        LevyModel::CompoundPoissonNormal { lambda, sigma, .. } => lambda < tol || sigma < tol,
        LevyModel::VarianceGamma {
            lambda, alpha, beta, ..
        } => lambda < tol || alpha - beta.abs() < tol,
        LevyModel::NormalInverseGaussian {
            alpha, beta, delta, ..
        } => delta < tol || alpha - beta.abs() < tol,
    }
}

/// Maximum-likelihood fit of a noise family to increments of span `increments.h`.
pub fn fit_noise(
    increments: &IncrementSeries,
    family: LevyFamily,
    init: Option<&LevyModel>,
    opts: &NoiseFitOptions,
) -> Result<NoiseFit> {
    if increments.len() < 20 {
        return Err(CarmaError::Data(format!(
            "noise fit needs at least 20 increments, got {}",
            increments.len()
        )));
    }
    let start = match init {
        Some(m) if m.family() == family => *m,
        Some(m) => {
            return Err(CarmaError::Param(format!(
                "initial model is {} but family {family} was requested",
                m.family()
            )))
        }
        None => family.default_init(increments),
    };
    start.validate()?;
    if opts.smooth_atom && family == LevyFamily::CompoundPoissonNormal {
        return fit_smoothed_cp(increments, &start, opts);
    }
    let objective = |p: &[f64]| match family.with_params(p) {
        Ok(m) => -noise_loglik(&m, increments, opts),
        Err(_) => f64::INFINITY,
    };
    let min = optim::nelder_mead(objective, &start.params(), &opts.optimizer);
    if !min.converged {
        return Err(CarmaError::Fit {
            best_params: min.x,
            best_value: min.value,
            iterations: min.iterations,
        });
    }
    let model = family.with_params(&min.x)?;
    let hess = optim::numerical_hessian(&objective, &min.x);
    let stderr = optim::stderr_from_hessian(&hess);
    Ok(NoiseFit {
        model,
        names: family.param_names().iter().map(|s| s.to_string()).collect(),
        stderr,
        loglik: -min.value,
        at_boundary: near_boundary(&model),
        iterations: min.iterations,
        atom_sd: None,
    })
}

fn fit_smoothed_cp(
    increments: &IncrementSeries,
    start: &LevyModel,
    opts: &NoiseFitOptions,
) -> Result<NoiseFit> {
    let n = increments.len() as f64;
    let mean = increments.values.iter().sum::<f64>() / n;
    let sd = (increments.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut x0 = start.params();
    x0.push(0.1 * sd.max(f64::MIN_POSITIVE));
    let objective = |p: &[f64]| -smoothed_cp_loglik(p, increments);
    let min = optim::nelder_mead(objective, &x0, &opts.optimizer);
    if !min.converged {
        return Err(CarmaError::Fit {
            best_params: min.x,
            best_value: min.value,
            iterations: min.iterations,
        });
    }
    let model = LevyFamily::CompoundPoissonNormal.with_params(&min.x[..3])?;
    let hess = optim::numerical_hessian(&objective, &min.x);
    let mut stderr = optim::stderr_from_hessian(&hess);
    let tau_se = stderr.pop().unwrap_or(f64::NAN);
    Ok(NoiseFit {
        model,
        names: LevyFamily::CompoundPoissonNormal
            .param_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        stderr,
        loglik: -min.value,
        at_boundary: near_boundary(&model) || min.x[3] < 1e-6,
        iterations: min.iterations,
        atom_sd: Some((min.x[3], tau_se)),
    })
}

/// Total probability mass of the density (plus atom) by adaptive quadrature;
/// a diagnostic used in tests and examples.
pub fn total_mass(model: &LevyModel, t: f64, half_width: f64) -> f64 {
    let c = model.mean(t);
    let cont = quad::integrate_pieces(
        |x| model.ln_density(x, t).exp(),
        &[c - half_width, c, c + half_width],
        1e-13,
        1e-12,
    );
    cont + model.atom_mass(t)
}
