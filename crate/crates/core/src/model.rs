//! Deal, model and simulation parameters plus their invariant checks.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrancheSpec {
    pub name: String,
    pub balance: f64,
}

/// All principal goes to the most senior live tranche.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PrincipalRule {
    #[default]
    SequentialPay,
}

/// Interest is split by month-start tranche balances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InterestRule {
    #[default]
    ProRataByBalance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DealSpec {
    pub pool_balance: f64,
    pub wac: f64,
    pub wam: u32,
    /// Priority order: index 0 is the most senior tranche.
    pub tranches: Vec<TrancheSpec>,
    pub principal_rule: PrincipalRule,
    pub interest_rule: InterestRule,
}

impl DealSpec {
    pub fn tranche_names(&self) -> Vec<&str> {
        self.tranches.iter().map(|t| t.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DefaultRateConvention {
    /// The configured rate is an annual probability, converted to
    /// `1 - (1 - p)^(1/12)` per month.
    #[default]
    Annualized,
    Monthly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PriceConvention {
    /// Month-t cash discounted by `prod_{s<=t} (1 + r(s)/12)^-1` along the
    /// simulated short-rate path.
    #[default]
    DiscountedAtShortRate,
    UndiscountedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum PrepayModel {
    #[default]
    RichardRoll,
    Psa {
        multiple: f64,
    },
    /// No voluntary prepayment.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub r0: f64,
    /// Maturity of the long rate R(t, T), in years from deal start.
    pub horizon_t: f64,
}

impl CirParams {
    /// a = 0.2, b = r0, sigma = 0.1, T = wam / 12.
    pub fn with_defaults(r0: f64, wam: u32) -> Self {
        CirParams {
            a: 0.2,
            b: r0,
            sigma: 0.1,
            r0,
            horizon_t: f64::from(wam) / 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardRollParams {
    pub ri_base: f64,
    pub ri_scale: f64,
    pub ri_shift: f64,
    pub ri_gain: f64,
    pub seasoning_months: u32,
    pub monthly_multiplier: Vec<f64>,
    pub burnout_floor: f64,
    pub burnout_slope: f64,
    pub gamma_a_const: f64,
    pub ab_exponent: f64,
    /// Calendar month of deal month 1, as an index into `monthly_multiplier`.
    pub mm_offset: u32,
}

pub const MONTHLY_MULTIPLIER: [f64; 12] = [
    0.94, 0.76, 0.74, 0.95, 0.98, 0.92, 0.98, 1.1, 1.18, 1.22, 1.23, 0.98,
];

impl Default for RichardRollParams {
    fn default() -> Self {
        RichardRollParams {
            ri_base: 0.28,
            ri_scale: 0.14,
            ri_shift: -8.571,
            ri_gain: 430.0,
            seasoning_months: 30,
            monthly_multiplier: MONTHLY_MULTIPLIER.to_vec(),
            burnout_floor: 0.3,
            burnout_slope: 0.7,
            gamma_a_const: 0.28,
            ab_exponent: 0.0784,
            mm_offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rho: f64,
    /// Pool default probability; zero switches defaults off.
    pub annual_default_rate: f64,
    pub default_rate_convention: DefaultRateConvention,
    pub confidence: f64,
    pub cir: CirParams,
    pub rr: RichardRollParams,
    pub prepay: PrepayModel,
    pub price_convention: PriceConvention,
    pub recovery_rate: f64,
    /// Reuse one systematic draw for every month of an iteration instead of
    /// drawing a fresh one each month.
    pub persistent_factor: bool,
}

impl ModelParams {
    pub fn defaults_for(wam: u32) -> Self {
        ModelParams {
            rho: 0.15,
            annual_default_rate: 0.05,
            default_rate_convention: DefaultRateConvention::Annualized,
            confidence: 0.999,
            cir: CirParams::with_defaults(0.05, wam),
            rr: RichardRollParams::default(),
            prepay: PrepayModel::RichardRoll,
            price_convention: PriceConvention::DiscountedAtShortRate,
            recovery_rate: 0.0,
            persistent_factor: false,
        }
    }

    /// Per-month default probability after applying the rate convention.
    pub fn monthly_default_probability(&self) -> f64 {
        match self.default_rate_convention {
            DefaultRateConvention::Annualized => {
                crate::credit::annual_to_monthly(self.annual_default_rate)
            }
            DefaultRateConvention::Monthly => self.annual_default_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CreditModel {
    #[default]
    #[serde(rename = "basel")]
    BaselOneFactor,
    #[serde(rename = "copula")]
    GaussianCopula,
}

impl CreditModel {
    pub fn label(self) -> &'static str {
        match self {
            CreditModel::BaselOneFactor => "basel",
            CreditModel::GaussianCopula => "copula",
        }
    }
}

impl fmt::Display for CreditModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub iterations: u32,
    pub seed: u64,
    pub credit_model: CreditModel,
    pub copula_loans: u32,
    pub crn: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            iterations: 10_000,
            seed: 42,
            credit_model: CreditModel::BaselOneFactor,
            copula_loans: 1000,
            crn: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Violation {
            severity: Severity::Error,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn warning(field: &str, message: impl Into<String>) -> Self {
        Violation {
            severity: Severity::Warning,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.field, self.message)
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

/// Checks every deal and model invariant. Feller-condition breaches are
/// reported as warnings; everything else is an error.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(spec: &DealSpec, params: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();

    if !(spec.pool_balance > 0.0 && spec.pool_balance.is_finite()) {
        out.push(Violation::error("pool.balance", "pool balance must be > 0"));
    }
    if !open_unit(spec.wac) {
        out.push(Violation::error("pool.wac", "wac out of (0,1)"));
    }
    if spec.wam < 1 {
        out.push(Violation::error("pool.wam", "wam must be >= 1"));
    }
    if spec.tranches.is_empty() {
        out.push(Violation::error(
            "tranches",
            "at least one tranche is required",
        ));
    }
    for (i, t) in spec.tranches.iter().enumerate() {
        if !(t.balance > 0.0 && t.balance.is_finite()) {
            out.push(Violation::error(
                "tranches",
                format!("tranche {} balance must be > 0", t.name),
            ));
        }
        if spec.tranches[..i].iter().any(|o| o.name == t.name) {
            out.push(Violation::error(
                "tranches",
                format!("duplicate tranche name {}", t.name),
            ));
        }
    }
    let total: f64 = spec.tranches.iter().map(|t| t.balance).sum();
    if !spec.tranches.is_empty()
        && (total - spec.pool_balance).abs() > 1e-9 * spec.pool_balance.abs().max(1.0)
    {
        out.push(Violation::error(
            "tranches",
            format!(
                "tranche balances ≠ pool balance ({total} vs {})",
                spec.pool_balance
            ),
        ));
    }

    if !open_unit(params.rho) {
        out.push(Violation::error("model.rho", "rho out of (0,1)"));
    }
    if !(params.annual_default_rate >= 0.0 && params.annual_default_rate < 1.0) {
        out.push(Violation::error(
            "model.default_rate",
            "default_rate out of [0,1)",
        ));
    }
    if !(params.recovery_rate >= 0.0 && params.recovery_rate < 1.0) {
        out.push(Violation::error("model.recovery", "recovery out of [0,1)"));
    }
    if !open_unit(params.confidence) {
        out.push(Violation::error(
            "model.confidence",
            "confidence out of (0,1)",
        ));
    }

    let cir = &params.cir;
    if !(cir.a > 0.0) {
        out.push(Violation::error("model.cir.a", "cir.a must be > 0"));
    }
    if !(cir.b > 0.0) {
        out.push(Violation::error("model.cir.b", "cir.b must be > 0"));
    }
    if !(cir.sigma >= 0.0) {
        out.push(Violation::error(
            "model.cir.sigma",
            "cir.sigma must be >= 0",
        ));
    }
    if !(cir.r0 > 0.0) {
        out.push(Violation::error("model.cir.r0", "cir.r0 must be > 0"));
    }
    if !(cir.horizon_t > 0.0) {
        out.push(Violation::error("model.cir.T", "cir.T must be > 0"));
    }
    if 2.0 * cir.a * cir.b < cir.sigma * cir.sigma {
        out.push(Violation::warning(
            "model.cir.sigma",
            "Feller condition violated (2ab < sigma^2)",
        ));
    }

    let rr = &params.rr;
    if rr.monthly_multiplier.len() != 12 {
        out.push(Violation::error(
            "model.rr.monthly_multiplier",
            "monthly_multiplier must have exactly 12 entries",
        ));
    }
    if rr.monthly_multiplier.iter().any(|m| !(*m > 0.0)) {
        out.push(Violation::error(
            "model.rr.monthly_multiplier",
            "monthly_multiplier entries must be > 0",
        ));
    }
    if rr.seasoning_months < 1 {
        out.push(Violation::error(
            "model.rr.seasoning_months",
            "seasoning_months must be >= 1",
        ));
    }
    if let PrepayModel::Psa { multiple } = params.prepay {
        if !(multiple >= 0.0) {
            out.push(Violation::error(
                "model.psa_multiple",
                "psa_multiple must be >= 0",
            ));
        }
    }
    out
}

pub fn validate_config(config: &SimulationConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if config.iterations < 1 {
        out.push(Violation::error(
            "simulation.iterations",
            "iterations must be >= 1",
        ));
    }
    if config.copula_loans < 1 {
        out.push(Violation::error(
            "simulation.copula_loans",
            "copula_loans must be >= 1",
        ));
    }
    out
}

/// The deal used in the worked example: a 1000 pool split 500/300/200.
pub fn example_deal() -> DealSpec {
    DealSpec {
        pool_balance: 1000.0,
        wac: 0.08,
        wam: 360,
        tranches: vec![
            TrancheSpec {
                name: "A".into(),
                balance: 500.0,
            },
            TrancheSpec {
                name: "B".into(),
                balance: 300.0,
            },
            TrancheSpec {
                name: "C".into(),
                balance: 200.0,
            },
        ],
        principal_rule: PrincipalRule::SequentialPay,
        interest_rule: InterestRule::ProRataByBalance,
    }
}
