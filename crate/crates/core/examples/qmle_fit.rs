//! Quasi-likelihood fit of a CARMA(2,1) to a path driven by variance-gamma
//! noise, starting from a perturbed spec.

use carma_levy::carma::CarmaSpec;
use carma_levy::estimator::{qmle, Normalization, QmleOptions, RecoveryMode, TimeSeries};
use carma_levy::levy::LevyModel;
use carma_levy::simulator::{simulate, SamplingScheme, SimulationOptions};

fn main() -> carma_levy::Result<()> {
    let truth = CarmaSpec::new(vec![1.39631, 0.05029], vec![1.0, 2.0])?;
    let noise = LevyModel::VarianceGamma {
        lambda: 1.0,
        alpha: 1.0,
        beta: 0.0,
        mu: 0.0,
    };
    let path = simulate(
        &truth,
        &noise,
        &SimulationOptions::new(SamplingScheme::new(1000.0, 20_000)?, 5),
    )?;
    let data = TimeSeries::new(0.0, path.h(), path.y)?;

    let init = CarmaSpec::new(vec![1.0, 0.1], vec![1.0, 1.5])?;
    let opts = QmleOptions {
        normalization: Normalization::B0,
        recovery_mode: RecoveryMode::ParamsOnly,
        ..Default::default()
    };
    let fit = qmle(&data, &init, None, &opts)?;

    let spec = &fit.spec_hat;
    let mut estimates = spec.ar().to_vec();
    estimates.extend_from_slice(&spec.ma_coeffs()[1..]);
    estimates.push(spec.sigma());
    let want = [1.39631, 0.05029, 2.0, noise.variance(1.0).sqrt()];
    for ((se, est), t) in fit.stderr.iter().zip(&estimates).zip(want) {
        println!("{:<6} {est:>9.5} ± {:<8.5} (true {t:.5})", se.name, se.value);
    }
    println!(
        "-2logL {:.2} after {} iterations",
        fit.minus_two_loglik(),
        fit.iterations
    );
    Ok(())
}
