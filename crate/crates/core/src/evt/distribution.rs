//! The generalized extreme value distribution `GEV(mu, sigma, xi)`.
//!
//! With `y = (z - mu) / sigma` and `b = 1 + xi * y`,
//! `F(z) = exp(-b^(-1/xi))` on the support `b > 0`. For `|xi| < XI_TOL` the
//! Gumbel limit `exp(-exp(-y))` is used. Powers of `b` go through `log1p` so
//! the two branches agree closely next to the switch.

use rand::Rng;

use super::EvtError;

/// Shape magnitude below which the Gumbel formulas are used.
pub const XI_TOL: f64 = 1e-6;

pub(crate) fn check_scale(sigma: f64) -> Result<(), EvtError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(EvtError::InvalidScale(sigma))
    }
}

/// `-log F(z)`, i.e. `b^(-1/xi)`, or `None` outside the support.
/// Above the upper endpoint (xi < 0) this is `Some(0.0)`.
fn cumulative_hazard(z: f64, mu: f64, sigma: f64, xi: f64) -> Option<f64> {
    let y = (z - mu) / sigma;
    if xi.abs() < XI_TOL {
        return Some((-y).exp());
    }
    let xy = xi * y;
    if xy <= -1.0 {
        // 1 + xi*y <= 0: below the lower endpoint for xi > 0, above the upper one for xi < 0.
        return if xi > 0.0 { None } else { Some(0.0) };
    }
    Some((-(xy.ln_1p()) / xi).exp())
}

pub fn gev_cdf(z: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64, EvtError> {
    check_scale(sigma)?;
    Ok(match cumulative_hazard(z, mu, sigma, xi) {
        Some(h) => (-h).exp(),
        None => 0.0,
    })
}

/// `1 - F(z)` without cancellation for large `z`.
pub fn gev_sf(z: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64, EvtError> {
    check_scale(sigma)?;
    Ok(match cumulative_hazard(z, mu, sigma, xi) {
        Some(h) => -(-h).exp_m1(),
        None => 1.0,
    })
}

pub fn gev_pdf(z: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64, EvtError> {
    check_scale(sigma)?;
    let y = (z - mu) / sigma;
    if xi.abs() < XI_TOL {
        return Ok((-y - (-y).exp()).exp() / sigma);
    }
    let xy = xi * y;
    if xy <= -1.0 {
        return Ok(0.0);
    }
    let log_b = xy.ln_1p();
    let h = (-log_b / xi).exp();
    Ok((-(1.0 + 1.0 / xi) * log_b - h).exp() / sigma)
}

/// Inverse CDF for `p` in `(0, 1)`.
pub fn gev_quantile(p: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64, EvtError> {
    check_scale(sigma)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(EvtError::InvalidProbability(p));
    }
    let h = -p.ln();
    Ok(if xi.abs() < XI_TOL {
        mu - sigma * h.ln()
    } else {
        mu + sigma * (h.powf(-xi) - 1.0) / xi
    })
}

/// Draw by inversion.
pub fn gev_sample<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64, xi: f64) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return gev_quantile(u, mu, sigma, xi).expect("validated by caller");
        }
    }
}

/// Standard Gumbel density `exp(-x - exp(-x))`.
pub fn gumbel_density(x: f64) -> f64 {
    (-x - (-x).exp()).exp()
}

/// Standard Gumbel quantile `-log(-log p)`.
pub fn gumbel_quantile(p: f64) -> f64 {
    -(-p.ln()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn cdf_at_location_is_inverse_e() {
        for xi in [-0.5, -1e-7, 0.0, 0.3, 2.0] {
            let v = gev_cdf(3.0, 3.0, 1.7, xi).unwrap();
            assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn gumbel_closed_form() {
        let v = gev_cdf(2.0 + 0.5, 2.0, 0.5, 0.0).unwrap();
        assert!((v - (-(-1.0f64).exp()).exp()).abs() < 1e-15);
        assert!((v - 0.692_201).abs() < 1e-6);
    }

    #[test]
    fn outside_support() {
        // xi > 0: lower endpoint mu - sigma/xi.
        assert_eq!(gev_cdf(-6.0, 0.0, 1.0, 0.2).unwrap(), 0.0);
        assert_eq!(gev_pdf(-6.0, 0.0, 1.0, 0.2).unwrap(), 0.0);
        // xi < 0: upper endpoint mu - sigma/xi = 2.
        assert_eq!(gev_cdf(2.5, 0.0, 1.0, -0.5).unwrap(), 1.0);
        assert_eq!(gev_sf(2.5, 0.0, 1.0, -0.5).unwrap(), 0.0);
        assert!(gev_cdf(0.0, 0.0, 0.0, 0.1).is_err());
        assert!(gev_cdf(0.0, 0.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for xi in [-0.4, 0.0, 0.3] {
            for p in [0.01, 0.3, 0.5, 0.99] {
                let z = gev_quantile(p, 1.0, 2.0, xi).unwrap();
                assert!((gev_cdf(z, 1.0, 2.0, xi).unwrap() - p).abs() < 1e-12);
            }
        }
        assert!(gev_quantile(1.0, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn samples_have_gumbel_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| gev_sample(&mut rng, 0.0, 1.0, 0.0)).sum::<f64>() / n as f64;
        assert!((m - 0.577_215_66).abs() < 0.01);
    }

    #[test]
    fn gumbel_helpers() {
        assert!((gumbel_quantile(gev_cdf(0.7, 0.0, 1.0, 0.0).unwrap()) - 0.7).abs() < 1e-12);
        assert!((gumbel_density(0.0) - (-1.0f64).exp()).abs() < 1e-15);
    }
}
