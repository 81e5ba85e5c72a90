//! Sample paths of `Y` and the state `X` on an equally spaced grid.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::carma::{self, CarmaSpec};
use crate::error::{CarmaError, Result};
use crate::levy::{IncrementSeries, LevyModel};
use crate::linalg;

/// `n` steps of length `terminal / n` starting at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub terminal: f64,
    pub n: usize,
}

impl SamplingScheme {
    pub fn new(terminal: f64, n: usize) -> Result<Self> {
        if !(terminal > 0.0 && terminal.is_finite()) {
            return Err(CarmaError::Domain(format!(
                "terminal time must be positive, got {terminal}"
            )));
        }
        if n < 2 {
            return Err(CarmaError::Domain(format!("need at least 2 steps, got {n}")));
        }
        Ok(Self { terminal, n })
    }

    pub fn h(&self) -> f64 {
        self.terminal / self.n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n).map(|k| k as f64 * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMethod {
    #[default]
    Euler,
    /// Exact Gaussian transition; Brownian noise only.
    Exact,
}

impl FromStr for SimulationMethod {
    type Err = CarmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(SimulationMethod::Euler),
            "exact" => Ok(SimulationMethod::Exact),
            _ => Err(CarmaError::Input(format!("unknown simulation method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub scheme: SamplingScheme,
    pub seed: u64,
    pub method: SimulationMethod,
    /// Initial state; zero when absent.
    pub x0: Option<Vec<f64>>,
    /// Steps simulated and discarded before `t = 0`.
    pub burn_in: usize,
}

impl SimulationOptions {
    pub fn new(scheme: SamplingScheme, seed: u64) -> Self {
        Self {
            scheme,
            seed,
            method: SimulationMethod::Euler,
            x0: None,
            burn_in: 0,
        }
    }

    pub fn method(mut self, method: SimulationMethod) -> Self {
        self.method = method;
        self
    }

    pub fn x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn burn_in(mut self, steps: usize) -> Self {
        self.burn_in = steps;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub scheme: SamplingScheme,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    /// `(n+1) × p` state trajectory.
    pub x: DMatrix<f64>,
    /// The increments that drove the kept part of the path; entry `k`
    /// covers `[t_k, t_{k+1}]`.
    pub noise: IncrementSeries,
}

impl SimulatedPath {
    pub fn h(&self) -> f64 {
        self.scheme.h()
    }
}

fn initial_state(spec: &CarmaSpec, x0: Option<&[f64]>) -> Result<DVector<f64>> {
    match x0 {
        None => Ok(DVector::zeros(spec.p())),
        Some(v) if v.len() == spec.p() => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(CarmaError::Dimension(format!(
            "initial state has length {} but p = {}",
            v.len(),
            spec.p()
        ))),
    }
}

fn output(spec: &CarmaSpec, x: &DVector<f64>) -> f64 {
    let b = spec.ma();
    spec.c0() + spec.sigma() * x.iter().zip(b).map(|(xi, bi)| xi * bi).sum::<f64>()
}

fn assemble(
    spec: &CarmaSpec,
    scheme: SamplingScheme,
    states: Vec<DVector<f64>>,
    noise: Vec<f64>,
) -> Result<SimulatedPath> {
    let p = spec.p();
    let x = DMatrix::from_fn(states.len(), p, |k, j| states[k][j]);
    let y = states.iter().map(|s| output(spec, s)).collect();
    Ok(SimulatedPath {
        scheme,
        times: scheme.times(),
        y,
        x,
        noise: IncrementSeries::new(0.0, scheme.h(), noise)?,
    })
}

/// Euler path driven by the given increments (`increments.len()` must be `scheme.n`).
pub fn simulate_with_noise(
    spec: &CarmaSpec,
    increments: &[f64],
    scheme: SamplingScheme,
    x0: Option<&[f64]>,
) -> Result<SimulatedPath> {
    if increments.len() != scheme.n {
        return Err(CarmaError::Dimension(format!(
            "{} increments supplied for {} steps",
            increments.len(),
            scheme.n
        )));
    }
    let h = scheme.h();
    let a = spec.companion();
    let p = spec.p();
    let step = DMatrix::identity(p, p) + &a * h;
    let mut x = initial_state(spec, x0)?;
    let mut states = Vec::with_capacity(scheme.n + 1);
    states.push(x.clone());
    for (k, &dl) in increments.iter().enumerate() {
        x = &step * &x;
        x[p - 1] += dl;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CarmaError::numerical_at("state diverged", k + 1));
        }
        states.push(x.clone());
    }
    assemble(spec, scheme, states, increments.to_vec())
}

/// Joint law of `(∫₀ʰ e^{A(h−u)} e dW_u, W_h)` for a unit Brownian motion,
/// plus the drift response `(∫₀ʰ e^{As} e ds, h)`.
fn exact_step_law(a: &DMatrix<f64>, h: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = a.nrows();
    let m = p + 1;
    let mut at = DMatrix::zeros(m, m);
    at.view_mut((0, 0), (p, p)).copy_from(a);
    let mut et = DVector::zeros(m);
    et[p - 1] = 1.0;
    et[p] = 1.0;

    // Van Loan: exp([[-Ã, ẽẽᵀ], [0, Ãᵀ]] h) = [[·, F₁₂], [0, F₂₂]], cov = F₂₂ᵀ F₁₂
    let mut vl = DMatrix::zeros(2 * m, 2 * m);
    vl.view_mut((0, 0), (m, m)).copy_from(&(-&at));
    vl.view_mut((0, m), (m, m)).copy_from(&(&et * et.transpose()));
    vl.view_mut((m, m), (m, m)).copy_from(&at.transpose());
    let f = linalg::mat_exp(&vl, h)?;
    let f12 = f.view((0, m), (m, m)).into_owned();
    let f22 = f.view((m, m), (m, m)).into_owned();
    let cov = f22.transpose() * f12;
    let cov = (&cov + cov.transpose()) * 0.5;

    let mut aug = DMatrix::zeros(m + 1, m + 1);
    aug.view_mut((0, 0), (m, m)).copy_from(&at);
    aug.view_mut((0, m), (m, 1)).copy_from(&et);
    let g = linalg::mat_exp(&aug, h)?;
    let drift = g.view((0, m), (m, 1)).into_owned().column(0).into_owned();
    Ok((cov, drift))
}

fn simulate_exact(
    spec: &CarmaSpec,
    mu: f64,
    sigma_l: f64,
    opts: &SimulationOptions,
) -> Result<SimulatedPath> {
    let scheme = opts.scheme;
    let h = scheme.h();
    let p = spec.p();
    let a = spec.companion();
    let eah = linalg::mat_exp(&a, h)?;
    let (cov, drift) = exact_step_law(&a, h)?;
    let factor = linalg::psd_factor(&cov);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = initial_state(spec, opts.x0.as_deref())?;
    let mut states = Vec::with_capacity(scheme.n + 1);
    let mut noise = Vec::with_capacity(scheme.n);
    let total = opts.burn_in + scheme.n;
    if opts.burn_in == 0 {
        states.push(x.clone());
    }
    for k in 0..total {
        let z = DVector::from_fn(p + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let jump = &drift * mu + (&factor * z) * sigma_l;
        x = &eah * &x + jump.rows(0, p);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CarmaError::numerical_at("state diverged", k + 1));
        }
        if k + 1 >= opts.burn_in {
            if k + 1 > opts.burn_in {
                noise.push(jump[p]);
            }
            states.push(x.clone());
        }
    }
    assemble(spec, scheme, states, noise)
}

/// Simulates `Y` and `X` on `opts.scheme` driven by `model`.
pub fn simulate(spec: &CarmaSpec, model: &LevyModel, opts: &SimulationOptions) -> Result<SimulatedPath> {
    model.validate()?;
    if !carma::is_stationary(spec).stationary {
        log::warn!(
            "simulating a non-stationary CARMA specification (a = {:?})",
            spec.ar()
        );
    }
    match opts.method {
        SimulationMethod::Exact => match *model {
            LevyModel::Brownian { mu, sigma } => simulate_exact(spec, mu, sigma, opts),
            _ => Err(CarmaError::Unsupported(format!(
                "exact simulation requires Brownian noise, got {}",
                model.family()
            ))),
        },
        SimulationMethod::Euler => {
            let scheme = opts.scheme;
            let h = scheme.h();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let all = model.sample_with(&mut rng, h, opts.burn_in + scheme.n)?;
            let x0 = if opts.burn_in > 0 {
                let warm = SamplingScheme {
                    terminal: h * opts.burn_in as f64,
                    n: opts.burn_in,
                };
                let pre = simulate_with_noise(spec, &all[..opts.burn_in], warm, opts.x0.as_deref())?;
                Some(pre.x.row(opts.burn_in).iter().copied().collect::<Vec<_>>())
            } else {
                opts.x0.clone()
            };
            simulate_with_noise(spec, &all[opts.burn_in..], scheme, x0.as_deref())
        }
    }
}
