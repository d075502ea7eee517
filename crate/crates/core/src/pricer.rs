//! Monte Carlo driver: composes the rate, prepayment and credit models with
//! the waterfall, prices each tranche per iteration and aggregates.

use rayon::prelude::*;
use serde::Serialize;

use crate::credit::{default_fraction_unchecked, CopulaCurve, OneFactorParams};
use crate::error::Result;
use crate::model::{
    CreditModel, DealSpec, ModelParams, PrepayModel, PriceConvention, SimulationConfig,
};
use crate::prepay::{psa_cpr, richard_roll_cpr, smm, PrepayState};
use crate::rates::RatePath;
use crate::rng::{self, Stream};
use crate::stats::{self, Histogram, PairedTTest};
use crate::waterfall::{MonthTrace, Waterfall};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationResult {
    pub tranche_values: Vec<f64>,
    pub total_value: f64,
    /// Defaulted principal over initial balance.
    pub lifetime_default_fraction: f64,
    /// Prepaid principal over initial balance.
    pub lifetime_prepaid_fraction: f64,
}

/// Random inputs for one iteration.
pub struct Streams {
    pub rates: Stream,
    pub credit: Stream,
}

impl Streams {
    /// Streams for `iteration` under `model`. With `crn` the rate stream is
    /// shared by every credit model; without it the copula reads its own.
    pub fn for_iteration(
        seed: u64,
        iteration: u64,
        model: CreditModel,
        independent_rates: bool,
    ) -> Self {
        let rates = if independent_rates {
            rng::RATES_INDEPENDENT
        } else {
            rng::RATES
        };
        Streams {
            rates: Stream::new(seed, iteration, rates),
            credit: Stream::new(seed, iteration, &rng::credit_stream_name(model)),
        }
    }
}

/// Per-month default fractions for one iteration.
pub trait DefaultSource {
    fn fraction(&mut self, month: u32) -> f64;
}

impl<F: FnMut(u32) -> f64> DefaultSource for F {
    fn fraction(&mut self, month: u32) -> f64 {
        self(month)
    }
}

/// Everything that does not change between iterations.
#[derive(Debug, Clone)]
pub struct Engine {
    deal: DealSpec,
    params: ModelParams,
    credit: Option<OneFactorParams>,
    copula: Option<CopulaCurve>,
    copula_loans: u32,
}

impl Engine {
    pub fn new(deal: &DealSpec, params: &ModelParams, copula_loans: u32) -> Result<Self> {
        let p = params.monthly_default_probability();
        let credit = if p > 0.0 {
            Some(OneFactorParams::new(params.rho, p)?)
        } else {
            None
        };
        let copula = credit.map(|c| CopulaCurve::new(&vec![c.p(); deal.wam as usize]));
        Ok(Engine {
            deal: deal.clone(),
            params: params.clone(),
            credit,
            copula,
            copula_loans,
        })
    }

    pub fn deal(&self) -> &DealSpec {
        &self.deal
    }

    /// Prices one iteration given an explicit rate path and default source.
    pub fn price_paths(
        &self,
        path: &RatePath,
        defaults: &mut dyn DefaultSource,
        mut trace: Option<&mut Vec<MonthTrace>>,
    ) -> Result<IterationResult> {
        let deal = &self.deal;
        let params = &self.params;
        let mut w = Waterfall::new(deal, params.recovery_rate);
        let mut values = vec![0.0; deal.tranches.len()];
        let mut discount = 1.0;
        for t in 1..=deal.wam {
            if w.is_paid_off() {
                break;
            }
            let x = defaults.fraction(t);
            let cpr = match params.prepay {
                PrepayModel::RichardRoll => {
                    let state = PrepayState {
                        initial_balance: w.initial_balance,
                        current_balance: w.balance,
                    };
                    richard_roll_cpr(t, deal.wac, path.long[t as usize - 1], &state, &params.rr)
                }
                PrepayModel::Psa { multiple } => psa_cpr(t, multiple).min(1.0),
                PrepayModel::None => 0.0,
            };
            let cf = w.step(t, x, smm(cpr))?;
            if params.price_convention == PriceConvention::DiscountedAtShortRate {
                discount /= 1.0 + path.short[t as usize - 1] / 12.0;
            }
            for (v, (p, i)) in values
                .iter_mut()
                .zip(w.last.principal.iter().zip(&w.last.interest))
            {
                *v += discount * (p + i);
            }
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(MonthTrace {
                    cash_flow: cf,
                    principal: w.last.principal.clone(),
                    interest: w.last.interest.clone(),
                });
            }
        }
        Ok(IterationResult {
            total_value: values.iter().sum(),
            tranche_values: values,
            lifetime_default_fraction: w.defaulted / deal.pool_balance,
            lifetime_prepaid_fraction: w.prepaid / deal.pool_balance,
        })
    }

    /// Draws the rate path from `streams.rates` and the default fractions
    /// from `streams.credit` under `model`, then prices.
    pub fn run_iteration(
        &self,
        model: CreditModel,
        streams: &mut Streams,
        trace: Option<&mut Vec<MonthTrace>>,
    ) -> Result<IterationResult> {
        let path = RatePath::simulate(&self.params.cir, &self.params.rr, self.deal.wam, || {
            streams.rates.normal()
        });
        let credit = &mut streams.credit;
        match (self.credit, model) {
            (None, _) => self.price_paths(&path, &mut |_| 0.0, trace),
            (Some(c), CreditModel::BaselOneFactor) => {
                if self.params.persistent_factor {
                    let x = default_fraction_unchecked(credit.uniform(), &c);
                    self.price_paths(&path, &mut |_| x, trace)
                } else {
                    self.price_paths(
                        &path,
                        &mut |_| default_fraction_unchecked(credit.uniform(), &c),
                        trace,
                    )
                }
            }
            (Some(c), CreditModel::GaussianCopula) => {
                let curve = self
                    .copula
                    .as_ref()
                    .expect("copula curve built with credit params");
                let pool = curve.simulate(&c, self.copula_loans, || credit.normal());
                self.price_paths(&path, &mut |t| pool.monthly_default_fraction(t), trace)
            }
        }
    }

    fn run_many(
        &self,
        model: CreditModel,
        seed: u64,
        iterations: u32,
        independent_rates: bool,
        workers: usize,
    ) -> Result<Vec<IterationResult>> {
        let job = || {
            (0..u64::from(iterations))
                .into_par_iter()
                .map(|i| {
                    let mut s = Streams::for_iteration(seed, i, model, independent_rates);
                    self.run_iteration(model, &mut s, None)
                })
                .collect::<Result<Vec<_>>>()
        };
        let mut builder = rayon::ThreadPoolBuilder::new();
        if workers > 0 {
            builder = builder.num_threads(workers);
        }
        builder.build()?.install(job)
    }

    /// Month-by-month trace of iteration `iteration`.
    pub fn trace_iteration(
        &self,
        model: CreditModel,
        seed: u64,
        iteration: u64,
    ) -> Result<(IterationResult, Vec<MonthTrace>)> {
        let mut rows = Vec::new();
        let mut s = Streams::for_iteration(seed, iteration, model, false);
        let r = self.run_iteration(model, &mut s, Some(&mut rows))?;
        Ok((r, rows))
    }
}

/// Single iteration with the configured credit model.
pub fn run_iteration(
    deal: &DealSpec,
    params: &ModelParams,
    config: &SimulationConfig,
    streams: &mut Streams,
) -> Result<IterationResult> {
    Engine::new(deal, params, config.copula_loans)?.run_iteration(
        config.credit_model,
        streams,
        None,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueSummary {
    pub name: String,
    pub initial_balance: f64,
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
}

impl ValueSummary {
    fn from_values(name: &str, initial_balance: f64, xs: &[f64]) -> Self {
        ValueSummary {
            name: name.to_string(),
            initial_balance,
            mean: stats::mean(xs),
            std: stats::sample_std(xs),
            histogram: Histogram::freedman_diaconis(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub schema_version: u32,
    pub model: CreditModel,
    pub seed: u64,
    pub iterations: u32,
    pub tranches: Vec<ValueSummary>,
    pub total: ValueSummary,
    pub mean_lifetime_default_fraction: f64,
    pub mean_lifetime_prepaid_fraction: f64,
    /// Set when n < 2 and the reported std of 0 is a placeholder.
    pub std_undefined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub summary: SimulationSummary,
    pub iterations: Vec<IterationResult>,
}

impl SimulationRun {
    fn aggregate(
        deal: &DealSpec,
        model: CreditModel,
        seed: u64,
        results: Vec<IterationResult>,
    ) -> Self {
        let column =
            |f: &dyn Fn(&IterationResult) -> f64| results.iter().map(f).collect::<Vec<_>>();
        let tranches = deal
            .tranches
            .iter()
            .enumerate()
            .map(|(j, t)| {
                ValueSummary::from_values(&t.name, t.balance, &column(&|r| r.tranche_values[j]))
            })
            .collect();
        let total =
            ValueSummary::from_values("total", deal.pool_balance, &column(&|r| r.total_value));
        let summary = SimulationSummary {
            schema_version: SCHEMA_VERSION,
            model,
            seed,
            iterations: results.len() as u32,
            tranches,
            total,
            mean_lifetime_default_fraction: stats::mean(&column(&|r| r.lifetime_default_fraction)),
            mean_lifetime_prepaid_fraction: stats::mean(&column(&|r| r.lifetime_prepaid_fraction)),
            std_undefined: results.len() < 2,
        };
        SimulationRun {
            summary,
            iterations: results,
        }
    }

    /// `iteration,tranche<name>...,total`, one row per iteration.
    pub fn iterations_csv(&self) -> String {
        let mut s = String::from("iteration");
        for t in &self.summary.tranches {
            s.push_str(&format!(",tranche{}", t.name));
        }
        s.push_str(",total\n");
        for (i, r) in self.iterations.iter().enumerate() {
            s.push_str(&i.to_string());
            for v in &r.tranche_values {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{}\n", r.total_value));
        }
        s
    }
}

/// Runs `config.iterations` iterations of the configured credit model on
/// `workers` threads (0 = all cores). The result does not depend on
/// `workers`.
pub fn run_simulation(
    deal: &DealSpec,
    params: &ModelParams,
    config: &SimulationConfig,
    workers: usize,
) -> Result<SimulationRun> {
    let engine = Engine::new(deal, params, config.copula_loans)?;
    let results = engine.run_many(
        config.credit_model,
        config.seed,
        config.iterations,
        false,
        workers,
    )?;
    Ok(SimulationRun::aggregate(
        deal,
        config.credit_model,
        config.seed,
        results,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrancheComparison {
    pub name: String,
    pub mean_first: f64,
    pub mean_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub first_model: CreditModel,
    pub second_model: CreditModel,
    pub seed: u64,
    pub iterations: u32,
    /// Whether the tested pairs share rate streams.
    pub crn: bool,
    pub tranches: Vec<TrancheComparison>,
    pub total_mean_first: f64,
    pub total_mean_second: f64,
    /// Variance of per-iteration total-value differences with shared rate
    /// streams.
    pub crn_difference_variance: f64,
    /// Same, with the second model on an independent rate stream.
    pub independent_difference_variance: f64,
    pub test_name: String,
    pub test: PairedTTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRun {
    pub report: ComparisonReport,
    pub first: SimulationRun,
    pub second: SimulationRun,
}

/// Compares the total value of two credit models on paired iterations.
///
/// Both models always run on the shared `rates` streams, and the second
/// model is run again on `rates-independent` streams. `config.crn` picks
/// which pairing feeds the t-test; both difference variances are reported.
pub fn compare_credit_models(
    deal: &DealSpec,
    params: &ModelParams,
    config: &SimulationConfig,
    models: (CreditModel, CreditModel),
    workers: usize,
) -> Result<ComparisonRun> {
    let engine = Engine::new(deal, params, config.copula_loans)?;
    let (m1, m2) = models;
    let n = config.iterations;
    let first = engine.run_many(m1, config.seed, n, false, workers)?;
    let shared = engine.run_many(m2, config.seed, n, false, workers)?;
    let independent = engine.run_many(m2, config.seed, n, true, workers)?;

    let diffs = |other: &[IterationResult]| {
        first
            .iter()
            .zip(other)
            .map(|(a, b)| a.total_value - b.total_value)
            .collect::<Vec<_>>()
    };
    let d_crn = diffs(&shared);
    let d_ind = diffs(&independent);

    let first = SimulationRun::aggregate(deal, m1, config.seed, first);
    let second = SimulationRun::aggregate(
        deal,
        m2,
        config.seed,
        if config.crn { shared } else { independent },
    );
    let mean_difference = first.summary.total.mean - second.summary.total.mean;
    let test = paired_t(mean_difference, if config.crn { &d_crn } else { &d_ind });

    let report = ComparisonReport {
        schema_version: SCHEMA_VERSION,
        first_model: m1,
        second_model: m2,
        seed: config.seed,
        iterations: n,
        crn: config.crn,
        tranches: first
            .summary
            .tranches
            .iter()
            .zip(&second.summary.tranches)
            .map(|(a, b)| TrancheComparison {
                name: a.name.clone(),
                mean_first: a.mean,
                mean_second: b.mean,
            })
            .collect(),
        total_mean_first: first.summary.total.mean,
        total_mean_second: second.summary.total.mean,
        crn_difference_variance: stats::sample_variance(&d_crn),
        independent_difference_variance: stats::sample_variance(&d_ind),
        test_name: "paired t-test, two-sided".into(),
        test,
    };
    Ok(ComparisonRun {
        report,
        first,
        second,
    })
}

fn paired_t(mean_difference: f64, d: &[f64]) -> PairedTTest {
    stats::paired_t_test(mean_difference, d, 0.99)
}

/// Basel one-factor against the Gaussian copula.
pub fn compare_models(
    deal: &DealSpec,
    params: &ModelParams,
    config: &SimulationConfig,
    workers: usize,
) -> Result<ComparisonRun> {
    compare_credit_models(
        deal,
        params,
        config,
        (CreditModel::BaselOneFactor, CreditModel::GaussianCopula),
        workers,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{example_deal, CirParams};

    fn flat_path(rate: f64, wam: u32) -> RatePath {
        RatePath {
            short: vec![rate; wam as usize],
            long: vec![rate; wam as usize],
        }
    }

    fn quiet_params() -> ModelParams {
        let mut p = ModelParams::defaults_for(360);
        p.annual_default_rate = 0.0;
        p.prepay = PrepayModel::None;
        p.cir = CirParams {
            a: 0.2,
            b: 0.08,
            sigma: 0.0,
            r0: 0.08,
            horizon_t: 30.0,
        };
        p
    }

    #[test]
    fn par_bond() {
        let deal = example_deal();
        let engine = Engine::new(&deal, &quiet_params(), 1).unwrap();
        let r = engine
            .price_paths(&flat_path(0.08, 360), &mut |_| 0.0, None)
            .unwrap();
        assert!(
            (r.total_value / 1000.0 - 1.0).abs() < 1e-9,
            "{}",
            r.total_value
        );
        let sum: f64 = r.tranche_values.iter().sum();
        assert!((r.total_value - sum).abs() < 1e-9 * r.total_value);
    }

    #[test]
    fn undiscounted_annuity_sum() {
        let deal = example_deal();
        let mut p = quiet_params();
        p.price_convention = PriceConvention::UndiscountedSum;
        let engine = Engine::new(&deal, &p, 1).unwrap();
        let r = engine
            .price_paths(&flat_path(0.08, 360), &mut |_| 0.0, None)
            .unwrap();
        // mpmath: 360 * MP = 2641.552465965754.
        assert!(
            (r.total_value - 2_641.552_465_965_754).abs() < 1e-8,
            "{}",
            r.total_value
        );
    }

    #[test]
    fn month_one_wipeout_is_worthless() {
        let deal = example_deal();
        let engine = Engine::new(&deal, &ModelParams::defaults_for(360), 1).unwrap();
        let r = engine
            .price_paths(&flat_path(0.05, 360), &mut |_| 1.0, None)
            .unwrap();
        assert_eq!(r.tranche_values, vec![0.0, 0.0, 0.0]);
        assert_eq!(r.lifetime_default_fraction, 1.0);
    }

    #[test]
    fn trace_lengths_and_conservation() {
        let deal = example_deal();
        let engine = Engine::new(&deal, &ModelParams::defaults_for(360), 100).unwrap();
        for model in [CreditModel::BaselOneFactor, CreditModel::GaussianCopula] {
            let (r, rows) = engine.trace_iteration(model, 5, 3).unwrap();
            assert!(!rows.is_empty() && rows.len() <= 360);
            for row in &rows {
                let paid: f64 = row.principal.iter().chain(&row.interest).sum();
                assert!((paid - row.cash_flow.total).abs() <= 1e-9 * row.cash_flow.total.max(1.0));
            }
            assert!(r.total_value > 0.0);
        }
    }

    #[test]
    fn single_iteration_flags_std() {
        let deal = example_deal();
        let cfg = SimulationConfig {
            iterations: 1,
            ..Default::default()
        };
        let run = run_simulation(&deal, &ModelParams::defaults_for(360), &cfg, 1).unwrap();
        assert!(run.summary.std_undefined);
        assert_eq!(run.summary.total.std, 0.0);
        assert_eq!(run.summary.total.histogram.total(), 1);
    }

    #[test]
    fn self_comparison_has_zero_differences() {
        let deal = example_deal();
        let cfg = SimulationConfig {
            iterations: 50,
            ..Default::default()
        };
        let run = compare_credit_models(
            &deal,
            &ModelParams::defaults_for(360),
            &cfg,
            (CreditModel::BaselOneFactor, CreditModel::BaselOneFactor),
            2,
        )
        .unwrap();
        assert_eq!(run.report.crn_difference_variance, 0.0);
        assert_eq!(run.report.test.mean_difference, 0.0);
        assert!(!run.report.test.reject_equal_means);
    }
}
