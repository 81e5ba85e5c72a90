//! Recovers the driving increments from a CARMA(3,1) path and compares
//! them with the ones used to simulate it.

use carma_levy::carma::CarmaSpec;
use carma_levy::estimator::{aggregate, recover_increments, Summary, TimeSeries};
use carma_levy::levy::LevyModel;
use carma_levy::simulator::{simulate, SamplingScheme, SimulationOptions};

fn main() -> carma_levy::Result<()> {
    let spec = CarmaSpec::new(vec![4.0, 4.75, 1.5], vec![1.0, 0.23])?;
    let noise = LevyModel::CompoundPoissonNormal {
        lambda: 2.0,
        mu: 0.0,
        sigma: 0.7,
    };
    let path = simulate(
        &spec,
        &noise,
        &SimulationOptions::new(SamplingScheme::new(400.0, 16_000)?, 1),
    )?;
    let data = TimeSeries::new(0.0, path.h(), path.y.clone())?;

    let rec = recover_increments(&spec, &data)?;
    let b = rec.burn_in;
    let truth = &path.noise.values[b..rec.len()];
    let got = &rec.values[b..];
    println!(
        "{} increments, {b} in burn-in, correlation with truth {:.4}",
        rec.len(),
        corr(got, truth)
    );

    let unit = aggregate(&rec, 1.0)?;
    let s = Summary::of(unit.settled()).expect("non-empty");
    println!(
        "unit-time increments: n {} mean {:+.3} sd {:.3} (noise sd {:.3})",
        s.count,
        s.mean,
        s.sd,
        noise.variance(1.0).sqrt()
    );
    Ok(())
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let c: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    c / (va * vb).sqrt()
}
