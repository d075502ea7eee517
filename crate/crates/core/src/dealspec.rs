//! Line-oriented deal-spec format.
//!
//! ```text
//! # comment
//! [pool]
//! balance=1000
//! wac=0.08
//! wam=360
//!
//! [tranches]
//! A 500
//! B 300
//! C 200
//!
//! [model]
//! rho=0.15
//! default_rate=0.05
//!
//! [simulation]
//! iterations=10000
//! seed=42
//! ```
//!
//! Parsing happens in two passes: the text is split into a [`RawDoc`] of
//! key/value entries (where `--set section.key=value` overrides are applied),
//! then the entries are converted into typed values and validated.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{CmoError, Result};
use crate::model::{
    validate, validate_config, CirParams, CreditModel, DealSpec, DefaultRateConvention,
    InterestRule, ModelParams, PrepayModel, PriceConvention, PrincipalRule, RichardRollParams,
    SimulationConfig, TrancheSpec, Violation,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DealFile {
    pub deal: DealSpec,
    pub params: ModelParams,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Pool,
    Tranches,
    Model,
    Simulation,
}

impl Section {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "pool" => Some(Section::Pool),
            "tranches" => Some(Section::Tranches),
            "model" => Some(Section::Model),
            "simulation" => Some(Section::Simulation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    /// 0 for entries introduced by an override.
    line: usize,
}

/// Untyped key/value view of a deal-spec file.
#[derive(Debug, Clone, Default)]
pub struct RawDoc {
    pool: Vec<Entry>,
    tranches: Vec<Entry>,
    model: Vec<Entry>,
    simulation: Vec<Entry>,
}

const POOL_KEYS: &[&str] = &["balance", "wac", "wam"];
const MODEL_KEYS: &[&str] = &[
    "rho",
    "default_rate",
    "default_rate_convention",
    "confidence",
    "cir.a",
    "cir.b",
    "cir.sigma",
    "cir.r0",
    "cir.T",
    "price_convention",
    "recovery",
    "prepay",
    "psa_multiple",
    "persistent_factor",
    "mm_offset",
    "rr.ri_base",
    "rr.ri_scale",
    "rr.ri_shift",
    "rr.ri_gain",
    "rr.seasoning_months",
    "rr.monthly_multiplier",
    "rr.burnout_floor",
    "rr.burnout_slope",
    "rr.gamma_a_const",
    "rr.ab_exponent",
];
const SIMULATION_KEYS: &[&str] = &["iterations", "seed", "credit_model", "copula_loans", "crn"];

fn syntax(line: usize, msg: impl Into<String>) -> CmoError {
    CmoError::Syntax {
        line,
        msg: msg.into(),
    }
}

impl RawDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = RawDoc::default();
        let mut section: Option<Section> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(line, format!("unterminated section header `{s}`")))?;
                section =
                    Some(Section::from_name(name.trim()).ok_or_else(|| {
                        syntax(line, format!("unknown section `[{}]`", name.trim()))
                    })?);
                continue;
            }
            let section = section.ok_or_else(|| syntax(line, "entry before any section header"))?;
            let entry = if section == Section::Tranches {
                let mut parts = s.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(name), Some(bal), None) => Entry {
                        key: name.to_string(),
                        value: bal.to_string(),
                        line,
                    },
                    _ => return Err(syntax(line, "expected `name balance`")),
                }
            } else {
                let (k, v) = s
                    .split_once('=')
                    .ok_or_else(|| syntax(line, "expected `key=value`"))?;
                Entry {
                    key: k.trim().to_string(),
                    value: v.trim().to_string(),
                    line,
                }
            };
            doc.insert(section, entry)?;
        }
        Ok(doc)
    }

    fn entries_mut(&mut self, section: Section) -> &mut Vec<Entry> {
        match section {
            Section::Pool => &mut self.pool,
            Section::Tranches => &mut self.tranches,
            Section::Model => &mut self.model,
            Section::Simulation => &mut self.simulation,
        }
    }

    fn insert(&mut self, section: Section, entry: Entry) -> Result<()> {
        let allowed = match section {
            Section::Pool => Some(POOL_KEYS),
            Section::Model => Some(MODEL_KEYS),
            Section::Simulation => Some(SIMULATION_KEYS),
            Section::Tranches => None,
        };
        if let Some(keys) = allowed {
            if !keys.contains(&entry.key.as_str()) {
                return Err(syntax(entry.line, format!("unknown key `{}`", entry.key)));
            }
        }
        let entries = self.entries_mut(section);
        if entries.iter().any(|e| e.key == entry.key) {
            let what = if section == Section::Tranches {
                "tranche"
            } else {
                "key"
            };
            return Err(syntax(
                entry.line,
                format!("duplicate {what} `{}`", entry.key),
            ));
        }
        entries.push(entry);
        Ok(())
    }

    /// Applies `section.key=value`. For tranches the key is the tranche name;
    /// an unknown name appends a new, most junior tranche.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| CmoError::UnknownKey(assignment.to_string()))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| CmoError::UnknownKey(path.to_string()))?;
        let section =
            Section::from_name(section).ok_or_else(|| CmoError::UnknownKey(path.to_string()))?;
        let known = match section {
            Section::Pool => POOL_KEYS.contains(&key),
            Section::Model => MODEL_KEYS.contains(&key),
            Section::Simulation => SIMULATION_KEYS.contains(&key),
            Section::Tranches => !key.is_empty() && !key.contains(char::is_whitespace),
        };
        if !known {
            return Err(CmoError::UnknownKey(path.to_string()));
        }
        let value = value.trim().to_string();
        let entries = self.entries_mut(section);
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value;
                e.line = 0;
            }
            None => entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
        Ok(())
    }

    /// Converts to typed values without checking invariants.
    pub fn build_unvalidated(&self) -> Result<DealFile> {
        let pool = Fields::new(&self.pool);
        let pool_balance: f64 = pool
            .get("balance")?
            .ok_or_else(|| syntax(0, "[pool] balance is required"))?;
        let wac = pool.get("wac")?.unwrap_or(0.08);
        let wam: u32 = pool.get("wam")?.unwrap_or(360);

        if self.tranches.is_empty() {
            return Err(syntax(0, "[tranches] must list at least one tranche"));
        }
        let tranches = self
            .tranches
            .iter()
            .map(|e| {
                let balance = parse_value::<f64>(e)?;
                Ok(TrancheSpec {
                    name: e.key.clone(),
                    balance,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let deal = DealSpec {
            pool_balance,
            wac,
            wam,
            tranches,
            principal_rule: PrincipalRule::SequentialPay,
            interest_rule: InterestRule::ProRataByBalance,
        };

        let m = Fields::new(&self.model);
        let mut params = ModelParams::defaults_for(wam);
        set(&mut params.rho, m.get("rho")?);
        set(&mut params.annual_default_rate, m.get("default_rate")?);
        if let Some(e) = m.entry("default_rate_convention") {
            params.default_rate_convention = match e.value.as_str() {
                "annualized" => DefaultRateConvention::Annualized,
                "monthly" => DefaultRateConvention::Monthly,
                other => return Err(bad_choice(e, other, "annualized|monthly")),
            };
        }
        set(&mut params.confidence, m.get("confidence")?);
        let r0 = m.get("cir.r0")?.unwrap_or(0.05);
        let mut cir = CirParams::with_defaults(r0, wam);
        set(&mut cir.a, m.get("cir.a")?);
        set(&mut cir.b, m.get("cir.b")?);
        set(&mut cir.sigma, m.get("cir.sigma")?);
        set(&mut cir.horizon_t, m.get("cir.T")?);
        params.cir = cir;
        if let Some(e) = m.entry("price_convention") {
            params.price_convention = match e.value.as_str() {
                "discounted" => PriceConvention::DiscountedAtShortRate,
                "undiscounted" => PriceConvention::UndiscountedSum,
                other => return Err(bad_choice(e, other, "discounted|undiscounted")),
            };
        }
        set(&mut params.recovery_rate, m.get("recovery")?);
        let psa_multiple = m.get("psa_multiple")?.unwrap_or(1.0);
        if let Some(e) = m.entry("prepay") {
            params.prepay = match e.value.as_str() {
                "richard_roll" => PrepayModel::RichardRoll,
                "psa" => PrepayModel::Psa {
                    multiple: psa_multiple,
                },
                "none" => PrepayModel::None,
                other => return Err(bad_choice(e, other, "richard_roll|psa|none")),
            };
        }
        if let Some(b) = m.get_bool("persistent_factor")? {
            params.persistent_factor = b;
        }

        let rr = &mut params.rr;
        set(&mut rr.mm_offset, m.get("mm_offset")?);
        set(&mut rr.ri_base, m.get("rr.ri_base")?);
        set(&mut rr.ri_scale, m.get("rr.ri_scale")?);
        set(&mut rr.ri_shift, m.get("rr.ri_shift")?);
        set(&mut rr.ri_gain, m.get("rr.ri_gain")?);
        set(&mut rr.seasoning_months, m.get("rr.seasoning_months")?);
        set(&mut rr.burnout_floor, m.get("rr.burnout_floor")?);
        set(&mut rr.burnout_slope, m.get("rr.burnout_slope")?);
        set(&mut rr.gamma_a_const, m.get("rr.gamma_a_const")?);
        set(&mut rr.ab_exponent, m.get("rr.ab_exponent")?);
        if let Some(e) = m.entry("rr.monthly_multiplier") {
            rr.monthly_multiplier = e
                .value
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        syntax(
                            e.line,
                            format!("bad number `{}` in monthly_multiplier", s.trim()),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        }

        let s = Fields::new(&self.simulation);
        let mut config = SimulationConfig::default();
        set(&mut config.iterations, s.get("iterations")?);
        set(&mut config.seed, s.get("seed")?);
        set(&mut config.copula_loans, s.get("copula_loans")?);
        if let Some(e) = s.entry("credit_model") {
            config.credit_model = parse_credit_model(&e.value)
                .ok_or_else(|| bad_choice(e, &e.value, "basel|copula"))?;
        }
        if let Some(b) = s.get_bool("crn")? {
            config.crn = b;
        }

        Ok(DealFile {
            deal,
            params,
            config,
        })
    }

    /// Typed, validated spec. Warnings are tolerated; any error-severity
    /// violation is returned as [`CmoError::Invalid`].
    pub fn build(&self) -> Result<DealFile> {
        let file = self.build_unvalidated()?;
        let errors: Vec<Violation> = file
            .violations()
            .into_iter()
            .filter(Violation::is_error)
            .collect();
        if errors.is_empty() {
            Ok(file)
        } else {
            Err(CmoError::Invalid(errors))
        }
    }
}

pub fn parse_credit_model(s: &str) -> Option<CreditModel> {
    match s {
        "basel" => Some(CreditModel::BaselOneFactor),
        "copula" => Some(CreditModel::GaussianCopula),
        _ => None,
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn bad_choice(e: &Entry, got: &str, allowed: &str) -> CmoError {
    syntax(
        e.line,
        format!("`{}` must be one of {allowed}, got `{got}`", e.key),
    )
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse::<T>().map_err(|_| {
        syntax(
            e.line,
            format!("cannot parse `{}` for `{}`", e.value, e.key),
        )
    })
}

struct Fields<'a>(&'a [Entry]);

impl<'a> Fields<'a> {
    fn new(entries: &'a [Entry]) -> Self {
        Fields(entries)
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.0.iter().find(|e| e.key == key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entry(key).map(parse_value).transpose()
    }

    fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => Err(bad_choice(e, other, "true|false")),
            },
        }
    }
}

impl DealFile {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = validate(&self.deal, &self.params);
        v.extend(validate_config(&self.config));
        v
    }

    /// Writes every field explicitly, so the output does not depend on
    /// defaults.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = &self.deal;
        let p = &self.params;
        let c = &self.config;
        // fmt::Write on String cannot fail.
        let _ = writeln!(
            s,
            "[pool]\nbalance={}\nwac={}\nwam={}\n",
            d.pool_balance, d.wac, d.wam
        );
        s.push_str("[tranches]\n");
        for t in &d.tranches {
            let _ = writeln!(s, "{} {}", t.name, t.balance);
        }
        let conv = match p.default_rate_convention {
            DefaultRateConvention::Annualized => "annualized",
            DefaultRateConvention::Monthly => "monthly",
        };
        let price = match p.price_convention {
            PriceConvention::DiscountedAtShortRate => "discounted",
            PriceConvention::UndiscountedSum => "undiscounted",
        };
        let _ = writeln!(
            s,
            "\n[model]\nrho={}\ndefault_rate={}\ndefault_rate_convention={conv}\nconfidence={}",
            p.rho, p.annual_default_rate, p.confidence
        );
        let cir = &p.cir;
        let _ = writeln!(
            s,
            "cir.a={}\ncir.b={}\ncir.sigma={}\ncir.r0={}\ncir.T={}",
            cir.a, cir.b, cir.sigma, cir.r0, cir.horizon_t
        );
        let _ = writeln!(s, "price_convention={price}\nrecovery={}", p.recovery_rate);
        match p.prepay {
            PrepayModel::RichardRoll => s.push_str("prepay=richard_roll\n"),
            PrepayModel::Psa { multiple } => {
                let _ = writeln!(s, "prepay=psa\npsa_multiple={multiple}");
            }
            PrepayModel::None => s.push_str("prepay=none\n"),
        }
        let rr: &RichardRollParams = &p.rr;
        let mm = rr
            .monthly_multiplier
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            s,
            "persistent_factor={}\nmm_offset={}\nrr.ri_base={}\nrr.ri_scale={}\nrr.ri_shift={}\n\
             rr.ri_gain={}\nrr.seasoning_months={}\nrr.monthly_multiplier={mm}\n\
             rr.burnout_floor={}\nrr.burnout_slope={}\nrr.gamma_a_const={}\nrr.ab_exponent={}",
            p.persistent_factor,
            rr.mm_offset,
            rr.ri_base,
            rr.ri_scale,
            rr.ri_shift,
            rr.ri_gain,
            rr.seasoning_months,
            rr.burnout_floor,
            rr.burnout_slope,
            rr.gamma_a_const,
            rr.ab_exponent
        );
        let _ = writeln!(
            s,
            "\n[simulation]\niterations={}\nseed={}\ncredit_model={}\ncopula_loans={}\ncrn={}",
            c.iterations,
            c.seed,
            c.credit_model.label(),
            c.copula_loans,
            c.crn
        );
        s
    }
}

/// Parses and validates a deal-spec document.
pub fn parse_deal_spec(text: &str) -> Result<DealFile> {
    RawDoc::parse(text)?.build()
}

/// Parses, applies `section.key=value` overrides in order, then validates.
pub fn parse_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<DealFile> {
    let mut doc = RawDoc::parse(text)?;
    for o in overrides {
        doc.apply_override(o.as_ref())?;
    }
    doc.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example_deal;

    const EXAMPLE: &str = "\
# three-tranche sequential deal
[pool]
balance=1000
wac=0.08
wam=360

[tranches]
A 500
B 300
C 200

[model]
rho=0.15
default_rate=0.05

[simulation]
iterations=10000
seed=42
credit_model=basel
";

    #[test]
    fn parses_three_tranche_deal_with_defaults() {
        let f = parse_deal_spec(EXAMPLE).unwrap();
        assert_eq!(f.deal, example_deal());
        assert_eq!(f.deal.principal_rule, PrincipalRule::SequentialPay);
        assert_eq!(f.params, ModelParams::defaults_for(360));
        assert_eq!(f.config.iterations, 10_000);
        assert_eq!(f.config.seed, 42);
    }

    #[test]
    fn single_tranche_pass_through() {
        let f = parse_deal_spec("[pool]\nbalance=1000\n[tranches]\nP 1000\n").unwrap();
        assert_eq!(f.deal.tranches.len(), 1);
        assert_eq!(f.deal.tranches[0].balance, 1000.0);
    }

    #[test]
    fn tranche_sum_mismatch_is_semantic_error() {
        let err =
            parse_deal_spec("[pool]\nbalance=1000\n[tranches]\nA 500\nB 300\nC 199\n").unwrap_err();
        match err {
            CmoError::Invalid(v) => {
                assert!(v[0].message.contains("tranche balances ≠ pool balance"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let cases = [
            ("[pool]\nbalance=abc\n[tranches]\nA 1\n", 2),
            ("balance=1\n", 1),
            ("[pool]\nbalance=1\n[tranches]\nA 1 extra\n", 4),
            ("[pool]\nbalance=1\nbogus=3\n", 3),
            ("[pool]\nbalance=1\nbalance=2\n", 3),
            ("[nope]\n", 1),
            ("[pool\n", 1),
            ("[pool]\nbalance 1000\n", 2),
            (
                "[pool]\nbalance=1000\n[tranches]\nA 1000\n[model]\nprice_convention=x\n",
                6,
            ),
        ];
        for (text, line) in cases {
            match parse_deal_spec(text) {
                Err(CmoError::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn feller_warning_does_not_reject() {
        let f = parse_with_overrides(EXAMPLE, &["model.cir.sigma=0.5"]).unwrap();
        assert_eq!(f.params.cir.sigma, 0.5);
        assert!(f.violations().iter().all(|v| !v.is_error()));
    }

    #[test]
    fn overrides_match_editing_the_file() {
        let edited = EXAMPLE.replace("default_rate=0.05", "default_rate=0.02");
        let a = parse_with_overrides(EXAMPLE, &["model.default_rate=0.02"]).unwrap();
        let b = parse_deal_spec(&edited).unwrap();
        assert_eq!(a, b);

        let c = parse_with_overrides(EXAMPLE, &["tranches.C=100", "pool.balance=900"]).unwrap();
        assert_eq!(c.deal.tranches[2].balance, 100.0);
        assert_eq!(c.deal.pool_balance, 900.0);

        assert!(matches!(
            parse_with_overrides(EXAMPLE, &["model.nope=1"]),
            Err(CmoError::UnknownKey(_))
        ));
        assert!(matches!(
            parse_with_overrides(EXAMPLE, &["rho=1"]),
            Err(CmoError::UnknownKey(_))
        ));
    }

    #[test]
    fn cir_defaults_follow_r0_and_wam() {
        let f = parse_with_overrides(EXAMPLE, &["model.cir.r0=0.03", "pool.wam=240"]).unwrap();
        assert_eq!(f.params.cir.b, 0.03);
        assert_eq!(f.params.cir.horizon_t, 20.0);
    }

    #[test]
    fn to_text_round_trips_example() {
        let f = parse_deal_spec(EXAMPLE).unwrap();
        assert_eq!(parse_deal_spec(&f.to_text()).unwrap(), f);
    }
}
