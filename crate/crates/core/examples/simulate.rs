//! Simulates a CARMA(2,1) driven by each noise family and prints the
//! sample moments next to the stationary ones.

use carma_levy::carma::{autocovariance, CarmaSpec};
use carma_levy::levy::LevyModel;
use carma_levy::simulator::{simulate, SamplingScheme, SimulationOptions};

fn main() -> carma_levy::Result<()> {
    let spec = CarmaSpec::new(vec![1.39631, 0.05029], vec![1.0, 2.0])?;
    let scheme = SamplingScheme::new(2000.0, 200_000)?;
    let noises = [
        LevyModel::Brownian { mu: 0.0, sigma: 1.0 },
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
    ];
    // variance of the process per unit variance of L₁
    let unit = autocovariance(&spec, 0.0)?;
    for noise in &noises {
        let path = simulate(&spec, noise, &SimulationOptions::new(scheme, 11).burn_in(20_000))?;
        let n = path.y.len() as f64;
        let mean = path.y.iter().sum::<f64>() / n;
        let v = path.y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let want = unit * noise.variance(1.0);
        println!(
            "{:<24} mean {mean:+.3}  variance {v:.3} (stationary {want:.3})",
            format!("{:?}", noise.family())
        );
    }
    Ok(())
}
