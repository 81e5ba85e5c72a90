//! Special functions needed by the closed-form Lévy densities.

use crate::quad;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln K_ν(z)` for real order `ν` and `z > 0`, from the integral
/// `K_ν(z) = ∫₀^∞ exp(-z cosh t) cosh(νt) dt` evaluated around its peak so
/// that neither tiny nor large arguments overflow.
pub fn ln_bessel_k(nu: f64, z: f64) -> f64 {
    let nu = nu.abs();
    if !(z > 0.0) {
        return f64::INFINITY;
    }
    if z < 1e-12 {
        // small-argument limits
        return if nu == 0.0 {
            (-(0.5 * z).ln() - EULER_GAMMA).ln()
        } else {
            ln_gamma(nu) + (nu - 1.0) * 2f64.ln() - nu * z.ln()
        };
    }
    // exponent g(t) = -z (cosh t - 1) + ν t, maximised at sinh t = ν / z
    let t_peak = (nu / z).asinh();
    let g = |t: f64| -z * (t.cosh() - 1.0) + nu * t;
    let g_peak = g(t_peak);
    let mut t_end = t_peak + 1.0;
    while g(t_end) - g_peak > -60.0 {
        t_end += 1.0 + 0.5 * t_end;
    }
    let integrand = |t: f64| (g(t) - g_peak).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
    let mut points = vec![0.0];
    if t_peak > 0.0 {
        points.push(t_peak);
    }
    points.push(t_end);
    let val = quad::integrate_pieces(integrand, &points, 0.0, 1e-14);
    -z + g_peak + val.ln()
}
