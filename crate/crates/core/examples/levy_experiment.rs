//! End to end: simulate, fit the CARMA coefficients, recover the noise and
//! fit its law. Repeated over a few seeds for one family.

use carma_levy::carma::CarmaSpec;
use carma_levy::estimator::{qmle, Normalization, QmleOptions, TimeSeries};
use carma_levy::levy::{LevyFamily, LevyModel};
use carma_levy::simulator::{simulate, SamplingScheme, SimulationOptions};

fn main() -> carma_levy::Result<()> {
    let family = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => LevyFamily::NormalInverseGaussian,
    };
    let noise = match family {
        LevyFamily::Brownian => LevyModel::Brownian { mu: 0.0, sigma: 1.0 },
        LevyFamily::CompoundPoissonNormal => LevyModel::CompoundPoissonNormal {
            lambda: 1.0,
            mu: 0.0,
            sigma: 1.0,
        },
        LevyFamily::VarianceGamma => LevyModel::VarianceGamma {
            lambda: 1.0,
            alpha: 1.0,
            beta: 0.0,
            mu: 0.0,
        },
        LevyFamily::NormalInverseGaussian => LevyModel::NormalInverseGaussian {
            alpha: 1.0,
            beta: 0.0,
            delta: 1.0,
            mu: 0.0,
        },
    };
    let truth = CarmaSpec::new(vec![1.39631, 0.05029], vec![1.0, 2.0])?;
    let opts = QmleOptions {
        normalization: Normalization::B0,
        ..Default::default()
    };
    println!("{family:?} with truth {:?}", noise.params());
    for seed in 0..3 {
        let path = simulate(
            &truth,
            &noise,
            &SimulationOptions::new(SamplingScheme::new(2000.0, 20_000)?, seed),
        )?;
        let data = TimeSeries::new(0.0, path.h(), path.y)?;
        let fit = qmle(&data, &truth, Some(family), &opts)?;
        let nf = fit.noise_fit.as_ref().expect("family given");
        println!(
            "seed {seed}: a {:.3?} b1 {:.3} sigma {:.3} | noise {:.3?} ± {:.3?}",
            fit.spec_hat.ar(),
            fit.spec_hat.ma_coeffs()[1],
            fit.spec_hat.sigma(),
            nf.model.params(),
            nf.stderr
        );
    }
    Ok(())
}
