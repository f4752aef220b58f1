use rand::Rng;

use crate::error::{Error, Result};

/// Draws from the density proportional to `x^-alpha * exp(-x / beta)` on
/// `[x_min, inf)`.
///
/// Proposals come from the Pareto tail `x_min * u^(-1 / (alpha - 1))` and are
/// accepted with probability `exp(-(x - x_min) / beta)`. The shift by `x_min`
/// only rescales the acceptance rate; the target density is unchanged.
pub fn sample_trunc_powerlaw<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    x_min: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::param("alpha", format!("must be > 1, got {alpha}")));
    }
    if !(beta > 0.0) {
        return Err(Error::param("beta", format!("must be > 0, got {beta}")));
    }
    if !(x_min > 0.0 && x_min.is_finite()) {
        return Err(Error::param("x_min", format!("must be > 0, got {x_min}")));
    }
    let tail = -1.0 / (alpha - 1.0);
    loop {
        // 1 - [0, 1) lies in (0, 1], keeping the proposal finite.
        let u = 1.0 - rng.random::<f64>();
        let x = x_min * u.powf(tail);
        if !x.is_finite() {
            continue;
        }
        let accept = (-(x - x_min) / beta).exp();
        if rng.random::<f64>() < accept {
            return Ok(x);
        }
    }
}

/// Draws a group size in `[2, max_size]` with probability proportional to
/// `s^-alpha`.
pub fn sample_group_size<R: Rng + ?Sized>(alpha: f64, max_size: usize, rng: &mut R) -> Result<usize> {
    if !(alpha > 1.0) {
        return Err(Error::param(
            "alpha_size",
            format!("must be > 1, got {alpha}"),
        ));
    }
    if max_size < 2 {
        return Err(Error::param(
            "beta_size",
            format!("must be >= 2, got {max_size}"),
        ));
    }
    let weights: Vec<f64> = (2..=max_size).map(|s| (s as f64).powf(-alpha)).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return Ok(i + 2);
        }
        target -= w;
    }
    Ok(max_size)
}
