//! Invariant checks, one function per property. The `invariants` test
//! target runs them individually; the acceptance target runs them as a
//! suite.

use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use rand::Rng;

use carma_levy::carma::{self, CarmaSpec};
use carma_levy::estimator::{self, aggregate, qmle, QmleOptions, RecoveryMode, TimeSeries};
use carma_levy::kalman;
use carma_levy::levy::{sample_increments, FourierGrid, IncrementSeries, LevyModel};
use carma_levy::linalg;
use carma_levy::simulator::{
    simulate, simulate_with_noise, SamplingScheme, SimulationMethod, SimulationOptions,
};

use super::*;

pub type Check = fn() -> Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("linalg/semigroup", semigroup),
        ("linalg/lyapunov_psd", lyapunov_psd),
        ("linalg/vieta_round_trip", vieta_round_trip),
        ("linalg/vandermonde_nonsingular", vandermonde_nonsingular),
        ("carma/state_space_bijection", state_space_bijection),
        ("carma/q_symmetric_psd", q_symmetric_psd),
        ("carma/kernel_identity", kernel_identity),
        ("carma/autocov_quadrature", autocov_quadrature),
        ("levy/density_normalised", density_normalised),
        ("levy/fourier_agreement", fourier_agreement),
        ("levy/sample_moments", sample_moments),
        ("levy/aggregation_ks", aggregation_ks),
        ("simulator/linearity", sim_linearity),
        ("simulator/shift", sim_shift),
        ("simulator/stationary_mean", sim_stationary_mean),
        ("simulator/euler_convergence", euler_convergence),
        ("kalman/shift_invariance", kalman_shift_invariance),
        ("kalman/covariance_psd", kalman_covariance_psd),
        ("kalman/steady_state", kalman_steady_state),
        ("kalman/whiteness", kalman_whiteness),
        ("estimator/location_invariance", qmle_location_invariance),
        ("estimator/recovery_refinement", recovery_refinement),
        ("estimator/aggregation_associative", aggregation_associative),
        ("estimator/fresh_loglik", fresh_loglik),
        ("cli/determinism", cli_determinism),
        ("cli/composability", cli_composability),
        ("cli/no_partial_output", cli_no_partial_output),
    ]
}

fn stable_specs(n: usize, seed: u64) -> Vec<CarmaSpec> {
    let mut r = rng(seed);
    (0..n).map(|k| random_spec(&mut r, 2 + k % 2)).collect()
}

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

pub fn semigroup() -> Result<(), String> {
    for spec in stable_specs(10, 1) {
        let a = spec.companion();
        for (s, t) in [(0.1, 0.3), (1.0, 2.5), (0.01, 7.0)] {
            let lhs = linalg::mat_exp(&a, s).unwrap() * linalg::mat_exp(&a, t).unwrap();
            let rhs = linalg::mat_exp(&a, s + t).unwrap();
            let err = (lhs - rhs).amax();
            ensure!(err < 1e-10, "e^(As)e^(At) differs from e^(A(s+t)) by {err:e}");
        }
    }
    Ok(())
}

pub fn lyapunov_psd() -> Result<(), String> {
    let mut r = rng(2);
    for spec in stable_specs(10, 3) {
        let a = spec.companion();
        let p = a.nrows();
        let g = DMatrix::from_fn(p, p, |_, _| r.random_range(-1.0..1.0));
        let c = &g * g.transpose();
        let x = linalg::lyapunov_solve(&a, &c).unwrap();
        let resid = (&a * &x + &x * a.transpose() + &c).amax();
        ensure!(resid < 1e-10 * (1.0 + x.amax()), "Lyapunov residual {resid:e}");
        ensure!((&x - x.transpose()).amax() < 1e-12, "solution not symmetric");
        let m = min_sym_eig(&x);
        ensure!(m >= -1e-10, "smallest eigenvalue {m:e}");
    }
    Ok(())
}

pub fn vieta_round_trip() -> Result<(), String> {
    for spec in stable_specs(20, 4) {
        let lambdas = linalg::companion_eigvals(spec.ar()).unwrap();
        let back = poly_from_roots(&lambdas);
        for (x, y) in back.iter().zip(spec.ar()) {
            ensure!((x - y).abs() < 1e-8, "coefficients {back:?} vs {:?}", spec.ar());
        }
    }
    Ok(())
}

pub fn vandermonde_nonsingular() -> Result<(), String> {
    for spec in stable_specs(10, 5) {
        let lambdas = linalg::companion_eigvals(spec.ar()).unwrap();
        ensure!(
            linalg::eigenvalues_distinct(&lambdas),
            "fixture roots are distinct"
        );
        let det = linalg::vandermonde_eigvecs(&lambdas).unwrap().determinant();
        ensure!(det.norm() > 1e-6, "determinant {det}");
    }
    Ok(())
}

pub fn state_space_bijection() -> Result<(), String> {
    for spec in stable_specs(10, 6) {
        let ss = carma::build_state_space(&spec);
        ensure!(ss.ar_coeffs() == spec.ar(), "AR coefficients changed");
        let b: Vec<f64> = ss.b.iter().copied().collect();
        ensure!(b == spec.ma(), "MA vector changed");
        ensure!(ss.e[spec.p() - 1] == 1.0, "e is not the last unit vector");
    }
    Ok(())
}

pub fn q_symmetric_psd() -> Result<(), String> {
    for spec in stable_specs(10, 7) {
        for h in [0.001, 0.05, 1.0, 10.0] {
            let (qinf, q) = carma::sampled_covariances(&spec, h).unwrap();
            for m in [&qinf, &q] {
                ensure!((m - m.transpose()).amax() < 1e-12, "asymmetric at h={h}");
                ensure!(min_sym_eig(m) >= -1e-10, "not PSD at h={h}");
            }
        }
    }
    Ok(())
}

pub fn kernel_identity() -> Result<(), String> {
    for spec in stable_specs(10, 8) {
        let sd = carma::spectral(&spec).unwrap();
        for k in 0..=40 {
            let t = k as f64 * 0.25;
            let direct = carma::kernel(&spec, t).unwrap();
            let err = (direct - sd.kernel(t)).abs();
            ensure!(err < 1e-9, "kernel forms differ by {err:e} at t={t}");
        }
    }
    Ok(())
}

pub fn autocov_quadrature() -> Result<(), String> {
    for spec in stable_specs(5, 9) {
        let slow = roots(spec.ar())
            .iter()
            .map(|l| -l.re)
            .fold(f64::INFINITY, f64::min);
        let upper = 40.0 / slow;
        let s2 = spec.sigma() * spec.sigma();
        for lag in [0.0, 0.5, 2.0] {
            let want = s2
                * simpson(
                    |u| kernel_oracle(&spec, u) * kernel_oracle(&spec, u + lag),
                    0.0,
                    upper,
                    1e-11,
                );
            let got = carma::autocovariance(&spec, lag).unwrap();
            ensure!((got - want).abs() < 1e-6, "γ({lag}) = {got} vs quadrature {want}");
        }
    }
    Ok(())
}

fn families() -> [LevyModel; 4] {
    [
        LevyModel::Brownian { mu: 0.2, sigma: 1.1 },
        LevyModel::CompoundPoissonNormal {
            lambda: 1.0,
            mu: 0.0,
            sigma: 1.0,
        },
        LevyModel::VarianceGamma {
            lambda: 1.0,
            alpha: 1.0,
            beta: 0.0,
            mu: 0.0,
        },
        LevyModel::NormalInverseGaussian {
            alpha: 1.0,
            beta: 0.0,
            delta: 1.0,
            mu: 0.0,
        },
    ]
}

pub fn density_normalised() -> Result<(), String> {
    let skewed = [
        LevyModel::VarianceGamma {
            lambda: 2.0,
            alpha: 1.5,
            beta: 0.4,
            mu: -0.2,
        },
        LevyModel::NormalInverseGaussian {
            alpha: 2.0,
            beta: -0.7,
            delta: 0.8,
            mu: 0.3,
        },
    ];
    for m in families().iter().chain(&skewed) {
        let t = 1.0;
        let c = m.mean(t);
        let w = 30.0 + 10.0 * m.variance(t).sqrt();
        // split at the centre, where the VG density may have a cusp
        let f = |x: f64| m.density(x, t).unwrap();
        for k in -40..=40 {
            let x = c + k as f64 * 0.37;
            ensure!(f(x) >= 0.0, "{m:?}: negative density at {x}");
        }
        let mass = simpson(f, c - w, c, 1e-10) + simpson(f, c, c + w, 1e-10) + m.atom_mass(t);
        ensure!((mass - 1.0).abs() < 1e-4, "{m:?}: total mass {mass}");
    }
    Ok(())
}

/// Sup-norm gap between Fourier inversion on the default grid and the
/// closed form, over `x ∈ [−10, 10]`.
pub fn fourier_gap(m: &LevyModel, t: f64) -> f64 {
    let grid = FourierGrid::default();
    (0..=400)
        .map(|k| {
            let x = -10.0 + k as f64 * 0.05;
            (m.density_fourier(x, t, &grid).unwrap() - m.density(x, t).unwrap()).abs()
        })
        .fold(0.0, f64::max)
}

pub fn fourier_agreement() -> Result<(), String> {
    let cases = [
        (LevyModel::Brownian { mu: 0.0, sigma: 1.0 }, 1.0),
        (
            LevyModel::NormalInverseGaussian {
                alpha: 1.0,
                beta: 0.0,
                delta: 1.0,
                mu: 0.0,
            },
            1.0,
        ),
        (
            LevyModel::VarianceGamma {
                lambda: 1.0,
                alpha: 1.0,
                beta: 0.0,
                mu: 0.0,
            },
            2.0,
        ),
    ];
    for (m, t) in cases {
        let gap = fourier_gap(&m, t);
        ensure!(gap < 1e-6, "{m:?} at t={t}: sup gap {gap:e}");
    }
    Ok(())
}

pub fn sample_moments() -> Result<(), String> {
    let n = 100_000;
    for (i, m) in families().iter().enumerate() {
        let h = 0.5;
        let s = sample_increments(m, h, n, 100 + i as u64).unwrap();
        let (mean, sd) = mean_sd(&s.values);
        let var = sd * sd;
        let m4 = s.values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let se_mean = (var / n as f64).sqrt();
        let se_var = ((m4 - var * var) / n as f64).sqrt();
        ensure!(
            (mean - m.mean(h)).abs() < 4.0 * se_mean,
            "{m:?}: mean {mean} vs {}",
            m.mean(h)
        );
        ensure!(
            (var - m.variance(h)).abs() < 4.0 * se_var,
            "{m:?}: variance {var} vs {}",
            m.variance(h)
        );
    }
    Ok(())
}

pub fn aggregation_ks() -> Result<(), String> {
    let n = 10_000;
    let k = 5;
    let h = 0.2;
    for (i, m) in families().iter().enumerate() {
        let fine = sample_increments(m, h, n * k, 200 + i as u64).unwrap();
        let summed: Vec<f64> = fine.values.chunks(k).map(|c| c.iter().sum()).collect();
        let direct = sample_increments(m, h * k as f64, n, 300 + i as u64).unwrap();
        let d = ks_statistic(&summed, &direct.values);
        ensure!(d < ks_critical_001(n, n), "{m:?}: KS D = {d}");
    }
    Ok(())
}

fn fixture() -> CarmaSpec {
    CarmaSpec::new(vec![1.39631, 0.05029], vec![1.0, 2.0]).unwrap()
}

pub fn sim_linearity() -> Result<(), String> {
    let scheme = SamplingScheme::new(50.0, 2000).unwrap();
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let opts = SimulationOptions::new(scheme, 11);
    let c0 = 0.7;
    let one = simulate(&fixture().with_c0(c0).unwrap(), &bm, &opts).unwrap();
    let two = simulate(
        &fixture().with_c0(c0).unwrap().with_sigma(2.0).unwrap(),
        &bm,
        &opts,
    )
    .unwrap();
    for (a, b) in one.y.iter().zip(&two.y) {
        ensure!(
            ((b - c0) - 2.0 * (a - c0)).abs() < 1e-12,
            "σ=2 path is not twice the σ=1 path"
        );
    }
    Ok(())
}

pub fn sim_shift() -> Result<(), String> {
    let scheme = SamplingScheme::new(50.0, 2000).unwrap();
    let m = LevyModel::NormalInverseGaussian {
        alpha: 1.0,
        beta: 0.0,
        delta: 1.0,
        mu: 0.0,
    };
    let opts = SimulationOptions::new(scheme, 12);
    let base = simulate(&fixture(), &m, &opts).unwrap();
    let shifted = simulate(&fixture().with_c0(3.5).unwrap(), &m, &opts).unwrap();
    for (a, b) in base.y.iter().zip(&shifted.y) {
        // exact up to the rounding of one addition
        let ulp = f64::EPSILON * b.abs().max(3.5);
        ensure!((b - a - 3.5).abs() <= 2.0 * ulp, "shift is not exact: {a} vs {b}");
    }
    Ok(())
}

pub fn sim_stationary_mean() -> Result<(), String> {
    let spec = CarmaSpec::new(vec![1.5, 0.5], vec![1.0, 0.5])
        .unwrap()
        .with_c0(2.0)
        .unwrap();
    let mu = 0.3;
    let bm = LevyModel::Brownian { mu, sigma: 1.0 };
    let t = 4000.0;
    let opts = SimulationOptions::new(SamplingScheme::new(t, 400_000).unwrap(), 13).burn_in(2000);
    let path = simulate(&spec, &bm, &opts).unwrap();
    let (mean, _) = mean_sd(&path.y);
    let want = 2.0 + mu * 1.0 / 0.5;
    // long-run sd of the time average is |b(0)/a(0)| σ / √T
    let se = 1.0 / 0.5 / t.sqrt();
    ensure!(
        (mean - want).abs() < 4.0 * se,
        "sample mean {mean} vs {want} (se {se})"
    );
    Ok(())
}

pub fn euler_convergence() -> Result<(), String> {
    let spec = fixture();
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let t = 10.0;
    let n_coarse = 50;
    let refine = 64;
    let mut err = [0.0f64; 2];
    for seed in 0..20 {
        let fine =
            sample_increments(&bm, t / (n_coarse * refine) as f64, n_coarse * refine, 400 + seed).unwrap();
        let reference = simulate_with_noise(
            &spec,
            &fine.values,
            SamplingScheme::new(t, n_coarse * refine).unwrap(),
            None,
        )
        .unwrap();
        for (slot, factor) in [(0usize, 1usize), (1, 2)] {
            let n = n_coarse * factor;
            let k = refine / factor;
            let noise: Vec<f64> = fine.values.chunks(k).map(|c| c.iter().sum()).collect();
            let path = simulate_with_noise(&spec, &noise, SamplingScheme::new(t, n).unwrap(), None).unwrap();
            for j in 0..=n_coarse {
                let e = path.y[j * factor] - reference.y[j * refine];
                err[slot] += e * e;
            }
        }
    }
    let ratio = (err[0] / err[1]).sqrt();
    ensure!((1.5..=3.0).contains(&ratio), "strong error ratio {ratio}");
    Ok(())
}

/// Simulated data rounded to a dyadic grid so that shifting by a power of
/// two and averaging over 2^k points are exact in floating point.
fn dyadic_series(spec: &CarmaSpec, n: usize, seed: u64) -> TimeSeries {
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let path = simulate(
        spec,
        &bm,
        &SimulationOptions::new(SamplingScheme::new(n as f64 * 0.25, n).unwrap(), seed),
    )
    .unwrap();
    let q = 2f64.powi(-30);
    let y: Vec<f64> = path.y[..n].iter().map(|v| (v / q).round() * q).collect();
    TimeSeries::new(0.0, 0.25, y).unwrap()
}

fn shifted(data: &TimeSeries, c: f64) -> TimeSeries {
    TimeSeries::new(data.t0, data.h, data.values.iter().map(|v| v + c).collect()).unwrap()
}

pub fn kalman_shift_invariance() -> Result<(), String> {
    let spec = fixture();
    let data = dyadic_series(&spec, 256, 14);
    let base = kalman::filter_loglik(&spec, &data).unwrap().loglik;
    let exact = kalman::filter_loglik(&spec, &shifted(&data, 8.0)).unwrap().loglik;
    ensure!(
        base == exact,
        "loglik changed under a dyadic shift: {base} vs {exact}"
    );
    let odd = kalman::filter_loglik(&spec, &shifted(&data, 0.1234567))
        .unwrap()
        .loglik;
    ensure!(
        (base - odd).abs() < 1e-9 * base.abs(),
        "loglik changed under a shift: {base} vs {odd}"
    );
    Ok(())
}

pub fn kalman_covariance_psd() -> Result<(), String> {
    for (i, spec) in stable_specs(6, 15).iter().enumerate() {
        let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
        let path = simulate(
            spec,
            &bm,
            &SimulationOptions::new(SamplingScheme::new(100.0, 400).unwrap(), i as u64),
        )
        .unwrap();
        let data = TimeSeries::new(0.0, path.h(), path.y).unwrap();
        let out = kalman::filter_trace(spec, &data).unwrap();
        for p in kalman::prior_covariances(&out) {
            ensure!((&p - p.transpose()).amax() < 1e-10, "prior covariance asymmetric");
            ensure!(min_sym_eig(&p) >= -1e-8 * p.trace(), "prior covariance not PSD");
        }
    }
    Ok(())
}

pub fn kalman_steady_state() -> Result<(), String> {
    let spec = CarmaSpec::new(vec![4.0, 4.75, 1.5], vec![1.0, 0.23]).unwrap();
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let path = simulate(
        &spec,
        &bm,
        &SimulationOptions::new(SamplingScheme::new(500.0, 5000).unwrap(), 16),
    )
    .unwrap();
    let data = TimeSeries::new(0.0, path.h(), path.y).unwrap();
    let priors = kalman::prior_covariances(&kalman::filter_trace(&spec, &data).unwrap());
    let n = priors.len();
    let step = (&priors[n - 1] - &priors[n - 2]).amax();
    ensure!(step < 1e-10, "prior covariance still moving by {step:e}");
    Ok(())
}

pub fn kalman_whiteness() -> Result<(), String> {
    let spec = fixture();
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let opts = SimulationOptions::new(SamplingScheme::new(2000.0, 4000).unwrap(), 17)
        .method(SimulationMethod::Exact);
    let path = simulate(&spec, &bm, &opts).unwrap();
    let data = TimeSeries::new(0.0, path.h(), path.y).unwrap();
    let z = kalman::filter_loglik(&spec, &data).unwrap().standardized();
    let r1 = corr(&z[1..], &z[..z.len() - 1]);
    let bound = 4.0 / (z.len() as f64).sqrt();
    ensure!(r1.abs() < bound, "lag-1 autocorrelation {r1} exceeds {bound}");
    Ok(())
}

pub fn qmle_location_invariance() -> Result<(), String> {
    let spec = fixture();
    let data = dyadic_series(&spec, 512, 18);
    let opts = QmleOptions {
        recovery_mode: RecoveryMode::ParamsOnly,
        ..Default::default()
    };
    let a = qmle(&data, &spec, None, &opts).map_err(|e| e.to_string())?;
    let b = qmle(&shifted(&data, 16.0), &spec, None, &opts).map_err(|e| e.to_string())?;
    ensure!(a.spec_hat.ar() == b.spec_hat.ar(), "AR estimates moved");
    ensure!(a.spec_hat.ma() == b.spec_hat.ma(), "MA estimates moved");
    ensure!(a.spec_hat.sigma() == b.spec_hat.sigma(), "σ moved");
    ensure!(
        b.spec_hat.c0() - a.spec_hat.c0() == 16.0,
        "c0 did not absorb the shift"
    );
    Ok(())
}

pub fn recovery_refinement() -> Result<(), String> {
    let spec = fixture();
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let t = 200.0;
    let n_coarse = 1000;
    let fine = sample_increments(&bm, t / (4 * n_coarse) as f64, 4 * n_coarse, 19).unwrap();
    let coarse: Vec<f64> = fine.values.chunks(4).map(|c| c.iter().sum()).collect();
    let score = |noise: &[f64], n: usize| -> f64 {
        let path = simulate_with_noise(&spec, noise, SamplingScheme::new(t, n).unwrap(), None).unwrap();
        let h = path.h();
        let data = TimeSeries::new(0.0, h, path.y).unwrap();
        let rec = estimator::recover_increments(&spec, &data).unwrap();
        let truth = IncrementSeries::new(0.0, h, noise[..rec.len()].to_vec()).unwrap();
        let unit_rec = aggregate(&rec, 1.0).unwrap();
        let unit_true = aggregate(&truth, 1.0).unwrap();
        let skip = unit_rec.burn_in;
        corr(&unit_rec.values[skip..], &unit_true.values[skip..])
    };
    let c_coarse = score(&coarse, n_coarse);
    let c_fine = score(&fine.values, 4 * n_coarse);
    ensure!(
        c_fine >= c_coarse,
        "refining the grid lowered the correlation: {c_coarse} → {c_fine}"
    );
    Ok(())
}

pub fn aggregation_associative() -> Result<(), String> {
    let mut r = rng(20);
    // dyadic values make every partial sum exact
    let values: Vec<f64> = (0..600)
        .map(|_| r.random_range(-4096i64..4096) as f64 / 1024.0)
        .collect();
    let inc = IncrementSeries::new(0.0, 0.125, values).unwrap();
    let nested = aggregate(&aggregate(&inc, 0.5).unwrap(), 1.5).unwrap();
    let direct = aggregate(&inc, 1.5).unwrap();
    ensure!(nested.values == direct.values, "nested aggregation differs");
    let total: f64 = inc.values[..direct.len() * 12].iter().sum();
    ensure!(
        direct.values.iter().sum::<f64>() == total,
        "aggregation does not telescope"
    );
    Ok(())
}

pub fn fresh_loglik() -> Result<(), String> {
    let spec = fixture();
    let bm = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let path = simulate(
        &spec,
        &bm,
        &SimulationOptions::new(SamplingScheme::new(100.0, 400).unwrap(), 21),
    )
    .unwrap();
    let data = TimeSeries::new(0.0, path.h(), path.y).unwrap();
    let fit = qmle(&data, &spec, None, &QmleOptions::default()).map_err(|e| e.to_string())?;
    let again = kalman::filter_loglik(&fit.spec_hat, &data).unwrap().loglik;
    ensure!(
        fit.loglik == again,
        "reported {} vs recomputed {again}",
        fit.loglik
    );
    Ok(())
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_carma-levy")
}

pub fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn write_model(dir: &Path, json: &str) -> String {
    let p = dir.join("model.json");
    std::fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

pub const NIG_MODEL: &str = r#"{"p":2,"q":1,"a":[1.39631,0.05029],"b":[1.0,2.0],
  "noise":{"family":"NormalInverseGaussian","params":{"alpha":1,"beta":0,"delta":1,"mu":0}}}"#;
pub const PLAIN_MODEL: &str = r#"{"p":2,"q":1,"a":[1.39631,0.05029],"b":[1.0,2.0]}"#;

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn cli_determinism() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_model(tmp.path(), NIG_MODEL);
    let plain = tmp.path().join("plain.json");
    std::fs::write(&plain, PLAIN_MODEL).unwrap();
    let mut outputs = Vec::new();
    // same directories both times: fit.json records the increments path
    let sim = tmp.path().join("sim");
    let fit = tmp.path().join("fit");
    let noise = tmp.path().join("noise");
    for _ in 0..2 {
        let s = sim.to_str().unwrap();
        let (c, e) = run_cli(&[
            "simulate",
            "--spec",
            &model,
            "--out",
            s,
            "--seed",
            "5",
            "--terminal",
            "100",
            "--n",
            "1000",
        ]);
        ensure!(c == 0, "simulate failed: {e}");
        let data = sim.join("path.csv");
        let (c, e) = run_cli(&[
            "fit",
            "--spec",
            plain.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            fit.to_str().unwrap(),
            "--family",
            "nig",
        ]);
        ensure!(c == 0, "fit failed: {e}");
        let (c, e) = run_cli(&[
            "fit-noise",
            "--data",
            fit.join("increments.csv").to_str().unwrap(),
            "--out",
            noise.to_str().unwrap(),
            "--family",
            "nig",
        ]);
        ensure!(c == 0, "fit-noise failed: {e}");
        let (c, e) = run_cli(&[
            "recover-noise",
            "--spec",
            plain.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            noise.to_str().unwrap(),
        ]);
        ensure!(c == 0, "recover-noise failed: {e}");
        outputs.push(vec![
            read(&sim.join("path.csv")),
            read(&sim.join("noise.csv")),
            read(&sim.join("spec.json")),
            read(&fit.join("fit.json")),
            read(&fit.join("increments.csv")),
            read(&noise.join("noise_fit.json")),
            read(&noise.join("increments.csv")),
        ]);
    }
    ensure!(outputs[0] == outputs[1], "repeated runs produced different bytes");
    Ok(())
}

fn coefficients(doc: &serde_json::Value) -> Vec<(String, f64)> {
    doc["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["name"].as_str().unwrap().to_string(),
                c["estimate"].as_f64().unwrap(),
            )
        })
        .collect()
}

pub fn cli_composability() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_model(tmp.path(), NIG_MODEL);
    let plain = tmp.path().join("plain.json");
    std::fs::write(&plain, PLAIN_MODEL).unwrap();
    let sim = tmp.path().join("sim");
    let fit = tmp.path().join("fit");
    let noise = tmp.path().join("noise");
    let (c, e) = run_cli(&[
        "simulate",
        "--spec",
        &model,
        "--out",
        sim.to_str().unwrap(),
        "--seed",
        "8",
        "--terminal",
        "200",
        "--n",
        "4000",
    ]);
    ensure!(c == 0, "simulate failed: {e}");
    let (c, e) = run_cli(&[
        "fit",
        "--spec",
        plain.to_str().unwrap(),
        "--data",
        sim.join("path.csv").to_str().unwrap(),
        "--out",
        fit.to_str().unwrap(),
        "--family",
        "nig",
        "--normalization",
        "b0",
    ]);
    ensure!(c == 0, "fit failed: {e}");
    let report: serde_json::Value = serde_json::from_slice(&read(&fit.join("fit.json"))).unwrap();
    let burn_in = report["increments"]["burn_in"].as_u64().unwrap().to_string();
    let (c, e) = run_cli(&[
        "fit-noise",
        "--data",
        fit.join("increments.csv").to_str().unwrap(),
        "--out",
        noise.to_str().unwrap(),
        "--family",
        "nig",
        "--burn-in",
        &burn_in,
    ]);
    ensure!(c == 0, "fit-noise failed: {e}");
    let inline = coefficients(&report["noise_fit"]);
    let separate: serde_json::Value = serde_json::from_slice(&read(&noise.join("noise_fit.json"))).unwrap();
    let separate = coefficients(&separate);
    ensure!(
        inline.len() == 4 && inline.len() == separate.len(),
        "coefficient lists differ"
    );
    for ((n1, v1), (n2, v2)) in inline.iter().zip(&separate) {
        ensure!(n1 == n2 && (v1 - v2).abs() < 1e-10, "{n1}: {v1} vs {n2}: {v2}");
    }
    Ok(())
}

pub fn cli_no_partial_output() -> Result<(), String> {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let o = out.to_str().unwrap();
    let plain = write_model(tmp.path(), PLAIN_MODEL);

    let uneven = tmp.path().join("uneven.csv");
    std::fs::write(&uneven, "t,y\n0,1\n0.1,2\n0.25,1\n0.3,0\n0.4,1\n").unwrap();
    let (c, e) = run_cli(&[
        "fit",
        "--spec",
        &plain,
        "--data",
        uneven.to_str().unwrap(),
        "--out",
        o,
    ]);
    ensure!(c == 2, "uneven data exited with {c}");
    ensure!(e.contains("\"kind\":\"data\""), "stderr: {e}");

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"p":2,"q":0,"a":[-1.0,0.5],"b":[1.0]}"#).unwrap();
    let (c, e) = run_cli(&[
        "simulate",
        "--spec",
        bad.to_str().unwrap(),
        "--out",
        o,
        "--terminal",
        "10",
        "--n",
        "100",
    ]);
    ensure!(c == 0 || c == 3, "non-stationary simulate exited with {c}: {e}");
    let (c, _) = run_cli(&[
        "fit",
        "--spec",
        bad.to_str().unwrap(),
        "--data",
        uneven.to_str().unwrap(),
        "--out",
        o,
    ]);
    ensure!(c != 0, "fit on bad input succeeded");

    let garbage = tmp.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    let (c, e) = run_cli(&[
        "simulate",
        "--spec",
        garbage.to_str().unwrap(),
        "--out",
        o,
        "--terminal",
        "10",
        "--n",
        "100",
    ]);
    ensure!(
        c == 2 && e.contains("\"kind\":\"input\""),
        "malformed JSON exited with {c}: {e}"
    );

    let fresh = tmp.path().join("fresh");
    std::fs::create_dir(&fresh).unwrap();
    let (c, _) = run_cli(&[
        "fit",
        "--spec",
        &plain,
        "--data",
        uneven.to_str().unwrap(),
        "--out",
        fresh.to_str().unwrap(),
    ]);
    ensure!(c == 2, "expected data error");
    let left: Vec<_> = std::fs::read_dir(&fresh).unwrap().collect();
    ensure!(left.is_empty(), "failed run left {} file(s) behind", left.len());
    Ok(())
}
