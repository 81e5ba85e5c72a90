//! Gaussian log-likelihood of a sampled path through the Kalman filter,
//! profiled over the first AR coefficient.

use carma_levy::carma::CarmaSpec;
use carma_levy::estimator::TimeSeries;
use carma_levy::kalman::{filter_loglik, filter_trace};
use carma_levy::levy::LevyModel;
use carma_levy::simulator::{simulate, SamplingScheme, SimulationMethod, SimulationOptions};

fn main() -> carma_levy::Result<()> {
    let spec = CarmaSpec::new(vec![1.39631, 0.05029], vec![1.0, 2.0])?;
    let noise = LevyModel::Brownian { mu: 0.0, sigma: 1.0 };
    let opts = SimulationOptions::new(SamplingScheme::new(500.0, 2000)?, 3).method(SimulationMethod::Exact);
    let path = simulate(&spec, &noise, &opts)?;
    let data = TimeSeries::new(0.0, path.h(), path.y)?;

    for a1 in [1.0, 1.2, 1.39631, 1.6, 1.8] {
        let trial = CarmaSpec::new(vec![a1, 0.05029], vec![1.0, 2.0])?;
        println!(
            "a1 = {a1:<8} -2logL = {:.2}",
            -2.0 * filter_loglik(&trial, &data)?.loglik
        );
    }

    let out = filter_trace(&spec, &data)?;
    let z = out.standardized();
    let lag1 = z.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / z.len() as f64;
    let last = out
        .states
        .as_ref()
        .and_then(|s| s.last())
        .expect("trace keeps states");
    println!("lag-1 autocorrelation of standardized innovations {lag1:+.4}");
    println!("final posterior state {:?}", last.x_post);
    Ok(())
}
