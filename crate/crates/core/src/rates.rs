//! CIR short-rate paths and the closed-form long rate used by the
//! refinancing incentive.

use serde::Serialize;

use crate::error::{CmoError, Result};
use crate::model::{CirParams, RichardRollParams};

/// One month, in years.
pub const DT: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePath {
    /// `short[t - 1]` is r(t), the short rate after t monthly steps from r0.
    pub short: Vec<f64>,
    /// `long[t - 1]` is R(t, T) evaluated at r(t).
    pub long: Vec<f64>,
}

/// Full-truncation Euler scheme at monthly steps. Consumes exactly `wam`
/// draws from `next_normal`.
pub fn simulate_short_path(
    cir: &CirParams,
    wam: u32,
    mut next_normal: impl FnMut() -> f64,
) -> Vec<f64> {
    let sqrt_dt = DT.sqrt();
    let mut r = cir.r0;
    (0..wam)
        .map(|_| {
            let z = next_normal();
            let rp = r.max(0.0);
            r = (r + cir.a * (cir.b - r) * DT + cir.sigma * rp.sqrt() * sqrt_dt * z).max(0.0);
            r
        })
        .collect()
}

/// The bond-price factors (A, B) for a remaining maturity of `tau` years.
pub fn bond_factors(tau: f64, sigma: f64, rr: &RichardRollParams) -> (f64, f64) {
    let k = rr.gamma_a_const;
    let gamma = (k * k + 2.0 * sigma * sigma).sqrt();
    let e = (gamma * tau).exp_m1();
    let b = 2.0 * e / ((gamma + k) * e + 2.0 * gamma);
    (b.powf(rr.ab_exponent), b)
}

pub(crate) fn long_rate_tau(r_t: f64, tau: f64, sigma: f64, rr: &RichardRollParams) -> f64 {
    let (a, b) = bond_factors(tau, sigma, rr);
    (-a.ln() + b * r_t) / tau
}

/// R(t, T) for month `t`; `T` is `cir.horizon_t` years from deal start.
pub fn long_rate(r_t: f64, t: u32, cir: &CirParams, rr: &RichardRollParams) -> Result<f64> {
    let tau = cir.horizon_t - f64::from(t) * DT;
    if tau <= 0.0 {
        return Err(CmoError::Domain {
            what: "T - t (years)",
            value: tau,
            domain: "(0, inf)",
        });
    }
    Ok(long_rate_tau(r_t, tau, cir.sigma, rr))
}

impl RatePath {
    /// Simulates the short path and attaches R(t, T) for every month.
    /// Once month t reaches the long-rate maturity the remaining maturity is
    /// held at one month.
    pub fn simulate(
        cir: &CirParams,
        rr: &RichardRollParams,
        wam: u32,
        next_normal: impl FnMut() -> f64,
    ) -> Self {
        let short = simulate_short_path(cir, wam, next_normal);
        let long = short
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let tau = (cir.horizon_t - (i + 1) as f64 * DT).max(DT);
                long_rate_tau(r, tau, cir.sigma, rr)
            })
            .collect();
        RatePath { short, long }
    }

    pub fn len(&self) -> usize {
        self.short.len()
    }

    pub fn is_empty(&self) -> bool {
        self.short.is_empty()
    }
}
