//! CARMA(p,q) specification and the structural objects derived from it:
//! companion state-space form, stationarity, kernel, autocovariance, the
//! canonical (spectral) decomposition and the sampled covariances `Q∞`, `Q`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CarmaError, Result};
use crate::linalg;

/// Largest admissible real part of an eigenvalue for a spec to count as stationary.
pub const STATIONARITY_MARGIN: f64 = -1e-10;

/// A CARMA(p,q) model `Y = c₀ + σ bᵀX`, `dX = AX dt + e dL`.
///
/// The MA vector is stored padded with zeros to length `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CarmaSpecDoc", into = "CarmaSpecDoc")]
pub struct CarmaSpec {
    p: usize,
    q: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: f64,
    c0: f64,
}

impl CarmaSpec {
    /// Builds a spec from the AR vector `(a₁, …, a_p)` and MA vector
    /// `(b₀, …, b_q)`; `q` is inferred from the length of `b`.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(CarmaError::Spec("MA vector must contain at least b0".into()));
        }
        let q = b.len() - 1;
        Self::from_parts(a.len(), q, a, b, 1.0, 0.0)
    }

    /// Full constructor with every invariant checked. `b` may be given with
    /// length between `q+1` and `p` (trailing entries must be zero).
    pub fn from_parts(p: usize, q: usize, a: Vec<f64>, mut b: Vec<f64>, sigma: f64, c0: f64) -> Result<Self> {
        if p == 0 {
            return Err(CarmaError::Spec("p must be positive".into()));
        }
        if p <= q {
            return Err(CarmaError::Spec(format!("p > q violated (p={p}, q={q})")));
        }
        if a.len() != p {
            return Err(CarmaError::Spec(format!(
                "AR vector has length {} but p={p}",
                a.len()
            )));
        }
        if b.len() < q + 1 || b.len() > p {
            return Err(CarmaError::Spec(format!(
                "MA vector has length {} but must hold b0..b{q} (at most p={p} entries)",
                b.len()
            )));
        }
        if b[q + 1..].iter().any(|&v| v != 0.0) {
            return Err(CarmaError::Spec(format!("b_j must be zero for j > q={q}")));
        }
        if b[q] == 0.0 {
            return Err(CarmaError::Spec(format!("b_q must be non-zero (q={q})")));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(CarmaError::Spec("coefficients must be finite".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CarmaError::Spec(format!("sigma must be positive, got {sigma}")));
        }
        if !c0.is_finite() {
            return Err(CarmaError::Spec("c0 must be finite".into()));
        }
        b.resize(p, 0.0);
        Ok(Self {
            p,
            q,
            a,
            b,
            sigma,
            c0,
        })
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self> {
        Self::from_parts(self.p, self.q, self.a, self.b, sigma, self.c0)
    }

    pub fn with_c0(self, c0: f64) -> Result<Self> {
        Self::from_parts(self.p, self.q, self.a, self.b, self.sigma, c0)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `(a₁, …, a_p)`.
    pub fn ar(&self) -> &[f64] {
        &self.a
    }

    /// `(b₀, …, b_{p-1})`, zero-padded beyond `q`.
    pub fn ma(&self) -> &[f64] {
        &self.b
    }

    /// `(b₀, …, b_q)`.
    pub fn ma_coeffs(&self) -> &[f64] {
        &self.b[..=self.q]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `b(z) = b₀ + b₁ z + … + b_q z^q`.
    pub fn ma_poly(&self, z: Complex64) -> Complex64 {
        self.ma_coeffs()
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Companion matrix `A`.
    pub fn companion(&self) -> DMatrix<f64> {
        linalg::companion_matrix(&self.a)
    }

    /// Unconditional mean of the state for a driver with `E[L₁] = mu`:
    /// `(mu / a_p)` in the first component, zero elsewhere.
    pub fn stationary_state_mean(&self, mu: f64) -> DVector<f64> {
        let mut m = DVector::zeros(self.p);
        m[0] = mu / self.a[self.p - 1];
        m
    }

    /// Unconditional mean of `Y` for a driver with `E[L₁] = mu`.
    pub fn stationary_mean(&self, mu: f64) -> f64 {
        self.c0 + self.sigma * self.b[0] * mu / self.a[self.p - 1]
    }
}

#[derive(Serialize, Deserialize)]
struct CarmaSpecDoc {
    p: usize,
    q: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    #[serde(default = "one")]
    sigma: f64,
    #[serde(default)]
    c0: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<CarmaSpecDoc> for CarmaSpec {
    type Error = CarmaError;

    fn try_from(d: CarmaSpecDoc) -> Result<Self> {
        CarmaSpec::from_parts(d.p, d.q, d.a, d.b, d.sigma, d.c0)
    }
}

impl From<CarmaSpec> for CarmaSpecDoc {
    fn from(s: CarmaSpec) -> Self {
        let b = s.ma_coeffs().to_vec();
        CarmaSpecDoc {
            p: s.p,
            q: s.q,
            a: s.a,
            b,
            sigma: s.sigma,
            c0: s.c0,
        }
    }
}

/// Companion state-space form of a spec.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub e: DVector<f64>,
    pub b: DVector<f64>,
}

impl StateSpace {
    /// Reads `(a₁, …, a_p)` back off the last row of `A`.
    pub fn ar_coeffs(&self) -> Vec<f64> {
        let p = self.a.nrows();
        (0..p).map(|k| -self.a[(p - 1, p - 1 - k)]).collect()
    }
}

pub fn build_state_space(spec: &CarmaSpec) -> StateSpace {
    let p = spec.p();
    let mut e = DVector::zeros(p);
    e[p - 1] = 1.0;
    StateSpace {
        a: spec.companion(),
        e,
        b: DVector::from_column_slice(spec.ma()),
    }
}

/// Stationarity verdict plus the eigenvalues it was based on.
#[derive(Debug, Clone)]
pub struct Stationarity {
    pub stationary: bool,
    pub distinct: bool,
    pub lambdas: Vec<Complex64>,
}

pub fn is_stationary(spec: &CarmaSpec) -> Stationarity {
    let lambdas = linalg::companion_eigvals(spec.ar()).expect("spec coefficients are finite");
    let stationary = lambdas.iter().all(|z| z.re < STATIONARITY_MARGIN);
    let distinct = linalg::eigenvalues_distinct(&lambdas);
    Stationarity {
        stationary,
        distinct,
        lambdas,
    }
}

fn require_stationary(spec: &CarmaSpec) -> Result<Stationarity> {
    let st = is_stationary(spec);
    if !st.stationary {
        let max_re = st.lambdas.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        return Err(CarmaError::NonStationary(format!(
            "max Re(λ) = {max_re} (a = {:?})",
            spec.ar()
        )));
    }
    Ok(st)
}

/// CARMA kernel `g(t) = bᵀ e^{At} e` for `t ≥ 0`, zero for `t < 0`.
pub fn kernel(spec: &CarmaSpec, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Ok(0.0);
    }
    let ss = build_state_space(spec);
    let eat = linalg::mat_exp(&ss.a, t)?;
    Ok(ss.b.dot(&(eat * &ss.e)))
}

/// Unit-scale stationary covariance `∫₀^∞ e^{Au} e eᵀ e^{Aᵀu} du · scale2`.
fn stationary_cov(a: &DMatrix<f64>, scale2: f64) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    let mut c = DMatrix::zeros(p, p);
    c[(p - 1, p - 1)] = scale2;
    linalg::lyapunov_solve(a, &c)
}

/// `γ_Y(h) = bᵀ e^{A|h|} Q∞ b` with `Q∞` solving `AQ∞ + Q∞Aᵀ = -σ² e eᵀ`.
pub fn autocovariance(spec: &CarmaSpec, h: f64) -> Result<f64> {
    require_stationary(spec)?;
    let ss = build_state_space(spec);
    let qinf = stationary_cov(&ss.a, spec.sigma() * spec.sigma())?;
    let eah = linalg::mat_exp(&ss.a, h.abs())?;
    Ok(ss.b.dot(&(eah * qinf * &ss.b)))
}

/// `(Q∞, Q)` for sampling step `h`, where `Q = Q∞ − e^{Ah} Q∞ e^{Aᵀh}`.
pub fn sampled_covariances(spec: &CarmaSpec, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(CarmaError::Domain(format!("step h must be positive, got {h}")));
    }
    require_stationary(spec)?;
    let a = spec.companion();
    let qinf = stationary_cov(&a, spec.sigma() * spec.sigma())?;
    let eah = linalg::mat_exp(&a, h)?;
    let q = transition_cov(&qinf, &eah);
    Ok((qinf, q))
}

pub(crate) fn transition_cov(qinf: &DMatrix<f64>, eah: &DMatrix<f64>) -> DMatrix<f64> {
    let q = qinf - eah * qinf * eah.transpose();
    (&q + q.transpose()) * 0.5
}

/// Everything the Kalman filter needs for one `(spec, h)` pair.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub transition: DMatrix<f64>,
    pub qinf: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
}

pub fn discretize(spec: &CarmaSpec, h: f64) -> Result<Discretization> {
    let (qinf, _) = sampled_covariances(spec, h)?;
    let a = spec.companion();
    let transition = linalg::mat_exp(&a, h)?;
    let q = transition_cov(&qinf, &transition);
    Ok(Discretization {
        transition,
        qinf,
        q,
        b: DVector::from_column_slice(spec.ma()),
    })
}

/// First-order counterpart of [`discretize`]: transition `I + Ah` and
/// covariance `σ² h e eᵀ`, matching data generated by the Euler recursion.
/// The filter is still started from the continuous-time `Q∞`.
pub fn discretize_euler(spec: &CarmaSpec, h: f64) -> Result<Discretization> {
    let (qinf, _) = sampled_covariances(spec, h)?;
    let p = spec.p();
    let transition = DMatrix::<f64>::identity(p, p) + spec.companion() * h;
    let mut q = DMatrix::<f64>::zeros(p, p);
    q[(p - 1, p - 1)] = spec.sigma() * spec.sigma() * h;
    Ok(Discretization {
        transition,
        qinf,
        q,
        b: DVector::from_column_slice(spec.ma()),
    })
}

/// Canonical decomposition `Ỹ = Λ̃ R⁻¹ X` into CAR(1) components.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub lambdas: Vec<Complex64>,
    pub r: DMatrix<Complex64>,
    pub r_inv: DMatrix<Complex64>,
    /// `α_r = b(λ_r) / a′(λ_r)`.
    pub alphas: Vec<Complex64>,
    /// Diagonal of `Λ̃`, i.e. `b(λ_r)`.
    pub lambda_tilde: Vec<Complex64>,
}

impl SpectralDecomposition {
    /// `Σ_r α_r e^{λ_r t}`, the kernel written in the eigenbasis.
    pub fn kernel(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.lambdas
            .iter()
            .zip(&self.alphas)
            .map(|(l, a)| a * (l * t).exp())
            .sum::<Complex64>()
            .re
    }

    /// Canonical state vector `Λ̃ R⁻¹ x`.
    pub fn canonical(&self, x: &[f64]) -> Vec<Complex64> {
        let p = self.lambdas.len();
        (0..p)
            .map(|r| {
                let z: Complex64 = (0..p).map(|j| self.r_inv[(r, j)] * x[j]).sum();
                self.lambda_tilde[r] * z
            })
            .collect()
    }
}

pub fn spectral(spec: &CarmaSpec) -> Result<SpectralDecomposition> {
    let lambdas = linalg::companion_eigvals(spec.ar())?;
    let r = linalg::vandermonde_eigvecs(&lambdas)?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| CarmaError::RepeatedEigenvalue("eigenvector matrix is singular".into()))?;
    let lambda_tilde: Vec<Complex64> = lambdas.iter().map(|&l| spec.ma_poly(l)).collect();
    let alphas = lambdas
        .iter()
        .zip(&lambda_tilde)
        .map(|(&l, &bl)| bl / linalg::monic_poly_eval(spec.ar(), l).1)
        .collect();
    Ok(SpectralDecomposition {
        lambdas,
        r,
        r_inv,
        alphas,
        lambda_tilde,
    })
}
