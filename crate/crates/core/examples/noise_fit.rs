//! Maximum-likelihood fits of every noise family to unit-time increments
//! of a normal inverse Gaussian process.

use carma_levy::levy::{fit_noise, sample_increments, LevyFamily, LevyModel, NoiseFitOptions};

fn main() -> carma_levy::Result<()> {
    let truth = LevyModel::NormalInverseGaussian {
        alpha: 1.0,
        beta: 0.0,
        delta: 1.0,
        mu: 0.0,
    };
    let inc = sample_increments(&truth, 1.0, 4000, 21)?;
    let opts = NoiseFitOptions::default();
    for family in [
        LevyFamily::Brownian,
        LevyFamily::CompoundPoissonNormal,
        LevyFamily::VarianceGamma,
        LevyFamily::NormalInverseGaussian,
    ] {
        let fit = fit_noise(&inc, family, None, &opts)?;
        let params: Vec<String> = fit
            .names
            .iter()
            .zip(fit.model.params())
            .zip(&fit.stderr)
            .map(|((n, v), s)| format!("{n}={v:.3}({s:.3})"))
            .collect();
        println!(
            "{family:?}: -2logL {:.1}  {}",
            fit.minus_two_loglik(),
            params.join(" ")
        );
    }
    Ok(())
}
