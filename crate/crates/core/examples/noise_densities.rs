//! Closed-form densities against Fourier inversion of the characteristic
//! function, and the atom of the compound Poisson law.

use carma_levy::levy::{FourierGrid, LevyModel};

fn main() -> carma_levy::Result<()> {
    let grid = FourierGrid::default();
    let models = [
        LevyModel::Brownian { mu: 0.0, sigma: 1.0 },
        LevyModel::VarianceGamma {
            lambda: 1.0,
            alpha: 1.0,
            beta: 0.0,
            mu: 0.0,
        },
        LevyModel::NormalInverseGaussian {
            alpha: 1.0,
            beta: 0.5,
            delta: 1.0,
            mu: 0.0,
        },
    ];
    for m in &models {
        println!("{:?}", m.family());
        for x in [-2.0, -0.5, 0.25, 1.0, 3.0] {
            let closed = m.density(x, 2.0)?;
            let fourier = m.density_fourier(x, 2.0, &grid)?;
            println!("  f({x:+.2}) = {closed:.8}  fourier {fourier:.8}");
        }
    }
    let cp = LevyModel::CompoundPoissonNormal {
        lambda: 1.0,
        mu: 0.0,
        sigma: 1.0,
    };
    println!(
        "compound Poisson at t = 1: atom at 0 of mass {:.6}",
        cp.atom_mass(1.0)
    );
    Ok(())
}
