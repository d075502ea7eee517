//! Conditional prepayment rates (PSA ramp and Richard-Roll) and their
//! monthly equivalents.

use crate::model::RichardRollParams;

/// Pool balances feeding the burnout factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepayState {
    pub initial_balance: f64,
    /// Month-start balance, before that month's defaults.
    pub current_balance: f64,
}

impl PrepayState {
    pub fn burnout_ratio(&self) -> f64 {
        if self.initial_balance > 0.0 {
            (self.current_balance / self.initial_balance).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// PSA benchmark: 0.2% CPR in month 1 rising 0.2% a month to 6% at month 30.
pub fn psa_cpr(t: u32, psa_multiple: f64) -> f64 {
    psa_multiple * f64::from(t.clamp(1, 30)) * 0.002
}

/// Single monthly mortality for an annual CPR.
pub fn smm(cpr: f64) -> f64 {
    1.0 - (1.0 - cpr).powf(1.0 / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardRollFactors {
    pub refinancing: f64,
    pub seasoning: f64,
    pub monthly: f64,
    pub burnout: f64,
}

impl RichardRollFactors {
    pub fn compute(
        t: u32,
        wac: f64,
        long_rate: f64,
        state: &PrepayState,
        rr: &RichardRollParams,
    ) -> Self {
        let refinancing =
            rr.ri_base + rr.ri_scale * (rr.ri_shift + rr.ri_gain * (wac - long_rate)).atan();
        let seasoning = (f64::from(t) / f64::from(rr.seasoning_months)).min(1.0);
        let idx = (t.saturating_sub(1) + rr.mm_offset) as usize % rr.monthly_multiplier.len();
        let monthly = rr.monthly_multiplier[idx];
        let burnout = rr.burnout_floor + rr.burnout_slope * state.burnout_ratio();
        RichardRollFactors {
            refinancing,
            seasoning,
            monthly,
            burnout,
        }
    }

    pub fn cpr(&self) -> f64 {
        (self.refinancing * self.seasoning * self.monthly * self.burnout).clamp(0.0, 1.0)
    }
}

/// Richard-Roll CPR = RI * AGE * MM * BM, clamped to [0, 1].
pub fn richard_roll_cpr(
    t: u32,
    wac: f64,
    long_rate: f64,
    state: &PrepayState,
    rr: &RichardRollParams,
) -> f64 {
    RichardRollFactors::compute(t, wac, long_rate, state, rr).cpr()
}
