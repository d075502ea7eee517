use cmo_core::credit::{
    annual_to_monthly, finite_pool_default_distribution, sample_default_fraction,
    simulate_copula_pool, vasicek_cdf, OneFactorParams,
};
use cmo_core::model::{example_deal, ModelParams, SimulationConfig};
use cmo_core::rng::Stream;
use cmo_core::stats::{mean, sample_variance};
use cmo_core::{run_simulation, CreditModel};
use proptest::prelude::*;

fn lifetime_defaults(model: CreditModel) -> Vec<f64> {
    let deal = example_deal();
    let params = ModelParams::defaults_for(deal.wam);
    let config = SimulationConfig {
        iterations: 10_000,
        credit_model: model,
        copula_loans: 1000,
        ..SimulationConfig::default()
    };
    run_simulation(&deal, &params, &config, 0)
        .unwrap()
        .iterations
        .iter()
        .map(|r| r.lifetime_default_fraction)
        .collect()
}

#[test]
fn copula_and_basel_agree_on_mean_lifetime_defaults() {
    let b = lifetime_defaults(CreditModel::BaselOneFactor);
    let c = lifetime_defaults(CreditModel::GaussianCopula);
    let n = b.len() as f64;
    let se = (sample_variance(&b) / n + sample_variance(&c) / n).sqrt();
    let gap = (mean(&b) - mean(&c)).abs();
    assert!(
        gap <= 2.0 * se,
        "basel {} copula {} se {se}",
        mean(&b),
        mean(&c)
    );
}

#[test]
fn copula_default_count_matches_cumulative_probability() {
    let p = annual_to_monthly(0.05);
    let params = OneFactorParams::new(0.15, p).unwrap();
    let monthly = vec![p; 120];
    let expected = 1.0 - (1.0 - p).powi(120);
    let fractions: Vec<f64> = (0..4000)
        .map(|i| {
            let mut s = Stream::new(3, i, "copula-count");
            simulate_copula_pool(&params, 500, &monthly, || s.normal()).lifetime_default_fraction()
        })
        .collect();
    let se = (sample_variance(&fractions) / fractions.len() as f64).sqrt();
    assert!((mean(&fractions) - expected).abs() <= 3.0 * se);
}

#[test]
fn sampler_mean_is_the_default_probability() {
    let params = OneFactorParams::new(0.15, 0.05).unwrap();
    let mut s = Stream::new(11, 0, "sampler-mean");
    let xs: Vec<f64> = (0..200_000)
        .map(|_| sample_default_fraction(s.uniform(), &params).unwrap())
        .collect();
    let se = (sample_variance(&xs) / xs.len() as f64).sqrt();
    assert!((mean(&xs) - 0.05).abs() <= 3.0 * se);
}

#[test]
fn finite_pool_at_5000_loans_tracks_the_limit() {
    let params = OneFactorParams::new(0.15, 0.05).unwrap();
    let pmf = finite_pool_default_distribution(5000, &params).unwrap();
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    for x in [0.01, 0.05, 0.1, 0.3] {
        let k = (x * 5000.0_f64).floor() as usize;
        let finite: f64 = pmf[..=k].iter().sum();
        assert!(
            (finite - vasicek_cdf(x, &params).unwrap()).abs() < 0.01,
            "x = {x}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_holds_across_parameters(rho in 0.01f64..0.95, p in 1e-4f64..0.5, u in 0.001f64..0.999) {
        let params = OneFactorParams::new(rho, p).unwrap();
        let x = sample_default_fraction(u, &params).unwrap();
        prop_assert!((vasicek_cdf(x, &params).unwrap() - u).abs() < 1e-11);
    }

    #[test]
    fn pmf_is_a_distribution(n_loans in 1u32..400, rho in 0.01f64..0.9, p in 1e-3f64..0.5) {
        let params = OneFactorParams::new(rho, p).unwrap();
        let pmf = finite_pool_default_distribution(n_loans, &params).unwrap();
        prop_assert!(pmf.iter().all(|&q| q >= 0.0));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let m: f64 = pmf.iter().enumerate().map(|(n, q)| n as f64 * q).sum();
        prop_assert!((m / f64::from(n_loans) - p).abs() < 1e-6);
    }

    #[test]
    fn copula_alive_fraction_never_increases(seed in any::<u64>(), rho in 0.01f64..0.9) {
        let params = OneFactorParams::new(rho, 0.01).unwrap();
        let mut s = Stream::new(seed, 0, "alive");
        let pool = simulate_copula_pool(&params, 200, &[0.01; 60], || s.normal());
        prop_assert_eq!(pool.alive_fraction[0], 1.0);
        prop_assert!(pool.alive_fraction.windows(2).all(|w| w[1] <= w[0]));
    }
}
