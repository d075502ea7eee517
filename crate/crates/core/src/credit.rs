//! One-factor Gaussian credit model.
//!
//! Every loan's asset value is `sqrt(rho) * Y + sqrt(1 - rho) * eps_i` with
//! a common factor `Y` and idiosyncratic `eps_i`, both standard normal. A loan
//! defaults when its asset value falls below `K = Phi^-1(p)`. As the pool
//! grows, the defaulted fraction converges to `p(Y)` and its distribution
//! has the closed-form CDF in [`vasicek_cdf`]. [`sample_default_fraction`] is
//! the inverse of that CDF, used for inverse-transform sampling.

use crate::error::{CmoError, Result};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneFactorParams {
    rho: f64,
    p: f64,
    threshold: f64,
}

impl OneFactorParams {
    pub fn new(rho: f64, p: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(CmoError::Domain {
                what: "rho",
                value: rho,
                domain: "(0, 1)",
            });
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(CmoError::Domain {
                what: "default probability",
                value: p,
                domain: "(0, 1)",
            });
        }
        Ok(OneFactorParams {
            rho,
            p,
            threshold: normal::quantile(p),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Default threshold `K = Phi^-1(p)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Default probability conditional on the systematic factor `y`.
    pub fn conditional_pd(&self, y: f64) -> f64 {
        normal::cdf((self.threshold - self.rho.sqrt() * y) / (1.0 - self.rho).sqrt())
    }
}

/// `1 - (1 - p)^(1/12)`.
pub fn annual_to_monthly(p: f64) -> f64 {
    -((-p).ln_1p() / 12.0).exp_m1()
}

fn open_unit(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CmoError::Domain {
            what,
            value: v,
            domain: "(0, 1)",
        })
    }
}

/// P(X <= x) for the large-pool default fraction X.
pub fn vasicek_cdf(x: f64, params: &OneFactorParams) -> Result<f64> {
    open_unit("x", x)?;
    let rho = params.rho;
    Ok(normal::cdf(
        ((1.0 - rho).sqrt() * normal::quantile(x) - params.threshold) / rho.sqrt(),
    ))
}

/// Inverse-transform draw of the default fraction from a uniform `u`.
pub fn sample_default_fraction(u: f64, params: &OneFactorParams) -> Result<f64> {
    open_unit("u", u)?;
    Ok(default_fraction_unchecked(u, params))
}

#[inline]
pub(crate) fn default_fraction_unchecked(u: f64, params: &OneFactorParams) -> f64 {
    let rho = params.rho;
    normal::cdf((rho.sqrt() * normal::quantile(u) + params.threshold) / (1.0 - rho).sqrt())
}

/// Stressed default probability at `confidence`: the `confidence` quantile
/// of the default-fraction distribution.
pub fn basel_capital(p: f64, rho: f64, confidence: f64) -> Result<f64> {
    let params = OneFactorParams::new(rho, p)?;
    sample_default_fraction(confidence, &params)
}

/// Trapezoid nodes `(y, h * phi(y))` on [-10, 10]. The spacing shrinks with
/// `n_loans` so the conditional binomial peak (width about 1/sqrt(N) in y)
/// stays resolved.
fn factor_nodes(n_loans: u32) -> Vec<(f64, f64)> {
    const HALF_WIDTH: f64 = 10.0;
    let h = (0.5 / f64::from(n_loans).sqrt()).min(0.01);
    let steps = (2.0 * HALF_WIDTH / h).ceil() as usize;
    let h = 2.0 * HALF_WIDTH / steps as f64;
    (0..=steps)
        .map(|i| {
            let y = -HALF_WIDTH + i as f64 * h;
            (y, h * normal::pdf(y))
        })
        .collect()
}

fn ln_factorials(n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += f64::from(k).ln();
        out.push(acc);
    }
    out
}

fn ln_conditional(params: &OneFactorParams, y: f64) -> (f64, f64) {
    let z = (params.threshold - params.rho.sqrt() * y) / (1.0 - params.rho).sqrt();
    (normal::cdf(z).ln(), normal::cdf(-z).ln())
}

fn ln_binomial_term(lnf: &[f64], n: u32, big_n: u32, ln_p: f64, ln_q: f64) -> f64 {
    let c = lnf[big_n as usize] - lnf[n as usize] - lnf[(big_n - n) as usize];
    let a = if n == 0 { 0.0 } else { f64::from(n) * ln_p };
    let b = if n == big_n {
        0.0
    } else {
        f64::from(big_n - n) * ln_q
    };
    c + a + b
}

/// Probability of exactly `n` defaults among `n_loans` loans: the binomial
/// mixed over the systematic factor, integrated numerically.
pub fn finite_pool_default_pmf(n: u32, n_loans: u32, params: &OneFactorParams) -> Result<f64> {
    if n_loans < 1 || n > n_loans {
        return Err(CmoError::Domain {
            what: "defaults",
            value: f64::from(n),
            domain: "0..=N with N >= 1",
        });
    }
    let lnf = ln_factorials(n_loans);
    Ok(factor_nodes(n_loans)
        .into_iter()
        .map(|(y, w)| {
            let (lp, lq) = ln_conditional(params, y);
            w * ln_binomial_term(&lnf, n, n_loans, lp, lq).exp()
        })
        .sum())
}

/// The whole pmf for n = 0..=n_loans.
pub fn finite_pool_default_distribution(
    n_loans: u32,
    params: &OneFactorParams,
) -> Result<Vec<f64>> {
    if n_loans < 1 {
        return Err(CmoError::Domain {
            what: "loans",
            value: 0.0,
            domain: "N >= 1",
        });
    }
    let lnf = ln_factorials(n_loans);
    let mut pmf = vec![0.0; n_loans as usize + 1];
    for (y, w) in factor_nodes(n_loans) {
        let (lp, lq) = ln_conditional(params, y);
        for (n, slot) in pmf.iter_mut().enumerate() {
            let lt = ln_binomial_term(&lnf, n as u32, n_loans, lp, lq);
            if lt > -745.0 {
                *slot += w * lt.exp();
            }
        }
    }
    Ok(pmf)
}

/// Loan-level default times from a one-factor Gaussian copula.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaPoolState {
    pub n_loans: u32,
    /// Month of default (1-based) or `None` if the loan survives the term.
    pub default_month: Vec<Option<u32>>,
    /// `alive_fraction[t]` is the surviving fraction after month t;
    /// `alive_fraction[0] == 1`.
    pub alive_fraction: Vec<f64>,
}

impl CopulaPoolState {
    /// Fraction of the loans alive at the start of month `t` that default
    /// during month `t`.
    pub fn monthly_default_fraction(&self, t: u32) -> f64 {
        let t = t as usize;
        let before = self.alive_fraction[t - 1];
        if before > 0.0 {
            1.0 - self.alive_fraction[t] / before
        } else {
            0.0
        }
    }

    pub fn lifetime_default_fraction(&self) -> f64 {
        1.0 - self.alive_fraction.last().copied().unwrap_or(1.0)
    }
}

/// `1 - prod_{s<=t} (1 - p_s)` for each month.
pub fn cumulative_default_curve(monthly_p: &[f64]) -> Vec<f64> {
    let mut survival = 1.0;
    monthly_p
        .iter()
        .map(|p| {
            survival *= 1.0 - p;
            1.0 - survival
        })
        .collect()
}

/// Cumulative default curve in latent-variable space, shared by every
/// iteration of a copula run.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaCurve {
    /// `thresholds[t - 1] = Phi^-1(CumDefault(t))`.
    thresholds: Vec<f64>,
}

impl CopulaCurve {
    pub fn new(monthly_p: &[f64]) -> Self {
        CopulaCurve {
            thresholds: cumulative_default_curve(monthly_p)
                .into_iter()
                .map(normal::quantile)
                .collect(),
        }
    }

    pub fn months(&self) -> usize {
        self.thresholds.len()
    }

    /// Draws one systematic factor, then one idiosyncratic draw per loan.
    pub fn simulate(
        &self,
        params: &OneFactorParams,
        n_loans: u32,
        mut next_normal: impl FnMut() -> f64,
    ) -> CopulaPoolState {
        let wam = self.thresholds.len();
        let (sr, si) = (params.rho.sqrt(), (1.0 - params.rho).sqrt());
        let y = next_normal();
        let mut defaults_in_month = vec![0u32; wam + 1];
        let default_month = (0..n_loans)
            .map(|_| {
                let z = sr * y + si * next_normal();
                // Phi is increasing, so Phi(Z) <= c  <=>  Z <= Phi^-1(c).
                let idx = self.thresholds.partition_point(|&k| k < z);
                (idx < wam).then(|| {
                    defaults_in_month[idx + 1] += 1;
                    idx as u32 + 1
                })
            })
            .collect();
        let mut alive = n_loans;
        let mut alive_fraction = Vec::with_capacity(wam + 1);
        alive_fraction.push(1.0);
        for d in &defaults_in_month[1..] {
            alive -= d;
            alive_fraction.push(f64::from(alive) / f64::from(n_loans));
        }
        CopulaPoolState {
            n_loans,
            default_month,
            alive_fraction,
        }
    }
}

/// Loan i defaults in the first month t with `Phi(Z_i) <= CumDefault(t)`,
/// where `Z_i = sqrt(rho) Y + sqrt(1 - rho) eps_i`.
pub fn simulate_copula_pool(
    params: &OneFactorParams,
    n_loans: u32,
    monthly_p: &[f64],
    next_normal: impl FnMut() -> f64,
) -> CopulaPoolState {
    CopulaCurve::new(monthly_p).simulate(params, n_loans, next_normal)
}
