//! Kalman-filter innovations and Gaussian quasi-log-likelihood for
//! equally spaced observations of a CARMA process.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::carma::{self, CarmaSpec};
use crate::error::{CarmaError, Result};
use crate::estimator::TimeSeries;

/// Prior and posterior moments at one observation.
#[derive(Debug, Clone, Serialize)]
pub struct KalmanState {
    pub x_prior: Vec<f64>,
    pub p_prior: Vec<Vec<f64>>,
    pub x_post: Vec<f64>,
    pub p_post: Vec<Vec<f64>>,
    pub innovation: f64,
    pub innovation_var: f64,
    pub gain: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterOutput {
    pub loglik: f64,
    pub innovations: Vec<f64>,
    pub innovation_vars: Vec<f64>,
    pub states: Option<Vec<KalmanState>>,
}

impl FilterOutput {
    /// Innovations divided by their standard deviations.
    pub fn standardized(&self) -> Vec<f64> {
        self.innovations
            .iter()
            .zip(&self.innovation_vars)
            .map(|(u, v)| u / v.sqrt())
            .collect()
    }
}

/// How the state is advanced between observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    /// `e^{Ah}` with the exact innovation covariance.
    #[default]
    Exact,
    /// `I + Ah`, the law of the Euler simulation scheme.
    Euler,
}

impl std::str::FromStr for Transition {
    type Err = CarmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "euler" => Ok(Self::Euler),
            _ => Err(CarmaError::Input(format!(
                "unknown transition `{s}` (expected exact or euler)"
            ))),
        }
    }
}

/// Below this the innovation variance is treated as a numerical breakdown.
pub const MIN_INNOVATION_VAR: f64 = 1e-300;

pub fn filter_loglik(spec: &CarmaSpec, data: &TimeSeries) -> Result<FilterOutput> {
    run(spec, data, Transition::Exact, false)
}

pub fn filter_loglik_with(
    spec: &CarmaSpec,
    data: &TimeSeries,
    transition: Transition,
) -> Result<FilterOutput> {
    run(spec, data, transition, false)
}

/// Like [`filter_loglik`] but also records every [`KalmanState`].
pub fn filter_trace(spec: &CarmaSpec, data: &TimeSeries) -> Result<FilterOutput> {
    run(spec, data, Transition::Exact, true)
}

fn rows(m: &[f64], p: usize) -> Vec<Vec<f64>> {
    m.chunks(p).map(|r| r.to_vec()).collect()
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            out[i * p + j] = m[(i, j)];
        }
    }
    out
}

fn run(spec: &CarmaSpec, data: &TimeSeries, transition: Transition, trace: bool) -> Result<FilterOutput> {
    let p = spec.p();
    let n_obs = data.values.len();
    if n_obs < p + 2 {
        return Err(CarmaError::Data(format!(
            "filter needs at least p + 2 = {} observations, got {n_obs}",
            p + 2
        )));
    }
    let disc = match transition {
        Transition::Exact => carma::discretize(spec, data.h)?,
        Transition::Euler => carma::discretize_euler(spec, data.h)?,
    };
    // Row-major copies: the recursion is small and runs many times per fit.
    let f = flat(&disc.transition);
    let q = flat(&disc.q);
    let b: Vec<f64> = disc.b.iter().copied().collect();
    let mean = data.mean();

    let mut x = vec![0.0; p];
    let mut pm = flat(&disc.qinf);
    let mut xp = vec![0.0; p];
    let mut pp = vec![0.0; p * p];
    let mut tmp = vec![0.0; p * p];
    let mut pb = vec![0.0; p];

    let mut loglik = 0.0;
    let mut innovations = Vec::with_capacity(n_obs);
    let mut vars = Vec::with_capacity(n_obs);
    let mut states = trace.then(|| Vec::with_capacity(n_obs));

    for (n, &y) in data.values.iter().enumerate() {
        // predict
        for i in 0..p {
            xp[i] = (0..p).map(|k| f[i * p + k] * x[k]).sum();
        }
        for i in 0..p {
            for j in 0..p {
                tmp[i * p + j] = (0..p).map(|k| f[i * p + k] * pm[k * p + j]).sum();
            }
        }
        for i in 0..p {
            for j in 0..p {
                pp[i * p + j] = (0..p).map(|k| tmp[i * p + k] * f[j * p + k]).sum::<f64>() + q[i * p + j];
            }
        }
        for i in 0..p {
            for j in 0..i {
                let s = 0.5 * (pp[i * p + j] + pp[j * p + i]);
                pp[i * p + j] = s;
                pp[j * p + i] = s;
            }
        }
        // correct
        for i in 0..p {
            pb[i] = (0..p).map(|k| pp[i * p + k] * b[k]).sum();
        }
        let v: f64 = (0..p).map(|i| b[i] * pb[i]).sum();
        if !(v >= MIN_INNOVATION_VAR) {
            return Err(CarmaError::numerical_at(
                format!("innovation variance {v:e} is not positive"),
                n,
            ));
        }
        let u = (y - mean) - (0..p).map(|i| b[i] * xp[i]).sum::<f64>();
        for i in 0..p {
            x[i] = xp[i] + pb[i] * u / v;
        }
        for i in 0..p {
            for j in 0..=i {
                let s = pp[i * p + j] - pb[i] * pb[j] / v;
                pm[i * p + j] = s;
                pm[j * p + i] = s;
            }
        }
        loglik += -0.5 * (2.0 * PI * v).ln() - 0.5 * u * u / v;
        innovations.push(u);
        vars.push(v);
        if let Some(st) = states.as_mut() {
            st.push(KalmanState {
                x_prior: xp.clone(),
                p_prior: rows(&pp, p),
                x_post: x.clone(),
                p_post: rows(&pm, p),
                innovation: u,
                innovation_var: v,
                gain: pb.iter().map(|g| g / v).collect(),
            });
        }
    }
    if !loglik.is_finite() {
        return Err(CarmaError::numerical("log-likelihood is not finite"));
    }
    Ok(FilterOutput {
        loglik,
        innovations,
        innovation_vars: vars,
        states,
    })
}

/// Prior covariance at each step as an nalgebra matrix; convenience for
/// diagnostics on a traced run.
pub fn prior_covariances(out: &FilterOutput) -> Vec<DMatrix<f64>> {
    out.states
        .as_ref()
        .map(|st| {
            st.iter()
                .map(|s| {
                    let p = s.p_prior.len();
                    DMatrix::from_fn(p, p, |i, j| s.p_prior[i][j])
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Last posterior mean, useful for one-step-ahead forecasting.
pub fn final_state(out: &FilterOutput) -> Option<DVector<f64>> {
    out.states
        .as_ref()
        .and_then(|st| st.last())
        .map(|s| DVector::from_column_slice(&s.x_post))
}
