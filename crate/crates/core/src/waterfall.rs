//! Monthly pool cash flows and their distribution across tranches.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{CmoError, Result};
use crate::model::DealSpec;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PoolCashFlow {
    pub month: u32,
    pub balance_start: f64,
    pub defaulted: f64,
    pub balance_after_default: f64,
    pub scheduled_payment: f64,
    pub interest: f64,
    pub scheduled_principal: f64,
    pub prepayment: f64,
    pub recovery_cash: f64,
    pub total: f64,
}

impl PoolCashFlow {
    /// Cash paid as principal: scheduled principal, prepayment and recovery.
    pub fn principal(&self) -> f64 {
        self.scheduled_principal + self.prepayment + self.recovery_cash
    }

    /// Defaulted balance not covered by recovery.
    pub fn loss(&self) -> f64 {
        self.defaulted - self.recovery_cash
    }
}

/// Level payment on `balance` over `remaining` months at monthly rate
/// `coupon / 12`.
pub fn annuity_payment(balance: f64, coupon: f64, remaining: u32) -> f64 {
    let c = coupon / 12.0;
    if c == 0.0 {
        return balance / f64::from(remaining.max(1));
    }
    balance * c / (1.0 - (1.0 + c).powi(-(remaining.max(1) as i32)))
}

/// One month of the pool recursion. Returns the month's cash flow and the
/// next month's starting balance.
///
/// Defaults come off first, then the scheduled payment is computed on the
/// surviving balance over the remaining term `wam - t + 1`, then prepayment
/// applies to what is left after scheduled principal. Month `wam` pays the
/// surviving balance off in full.
pub fn pool_step(
    balance: f64,
    month: u32,
    wac: f64,
    wam: u32,
    default_fraction: f64,
    smm: f64,
    recovery: f64,
) -> Result<(PoolCashFlow, f64)> {
    let defaulted = default_fraction * balance;
    let b_prime = balance - defaulted;
    let interest = b_prime * wac / 12.0;
    let (scheduled_principal, prepayment) = if month >= wam {
        (b_prime, 0.0)
    } else {
        let mp = annuity_payment(b_prime, wac, wam - month + 1);
        let sp = mp - interest;
        (sp, (b_prime - sp) * smm)
    };
    if scheduled_principal > b_prime * (1.0 + 1e-12) || scheduled_principal < 0.0 {
        return Err(CmoError::CashFlow {
            month,
            msg: format!("scheduled principal {scheduled_principal} exceeds balance {b_prime}"),
        });
    }
    let recovery_cash = recovery * defaulted;
    let total = scheduled_principal + interest + prepayment + recovery_cash;
    let next = (b_prime - scheduled_principal - prepayment).max(0.0);
    // Sub-ulp remainders from full prepayment or final payoff count as zero.
    let next = if next <= 1e-12 * balance { 0.0 } else { next };
    Ok((
        PoolCashFlow {
            month,
            balance_start: balance,
            defaulted,
            balance_after_default: b_prime,
            scheduled_payment: scheduled_principal + interest,
            interest,
            scheduled_principal,
            prepayment,
            recovery_cash,
            total,
        },
        next,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrancheState {
    pub name: String,
    pub balance: f64,
    pub principal_received: f64,
    pub interest_received: f64,
    pub retired: bool,
}

impl TrancheState {
    pub fn new(name: impl Into<String>, balance: f64) -> Self {
        TrancheState {
            name: name.into(),
            balance,
            principal_received: 0.0,
            interest_received: 0.0,
            retired: balance <= 0.0,
        }
    }

    fn reduce(&mut self, amount: f64) {
        self.balance -= amount;
        if self.balance <= 1e-12 * (self.balance + amount).abs().max(1.0) {
            self.balance = 0.0;
            self.retired = true;
        }
    }
}

/// One month's payments to each tranche, in priority order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Distribution {
    pub principal: Vec<f64>,
    pub interest: Vec<f64>,
    /// Cash left after every tranche is paid off; zero for a balanced deal.
    pub overcollateralization: f64,
}

impl Distribution {
    pub fn total(&self) -> f64 {
        self.principal.iter().sum::<f64>() + self.interest.iter().sum::<f64>()
    }
}

/// Sequential principal and pro-rata interest. Interest shares use the
/// tranche balances at the start of the month, i.e. before this month's
/// principal.
pub fn distribute(cf: &PoolCashFlow, tranches: &mut [TrancheState]) -> Distribution {
    let mut out = Distribution {
        principal: vec![0.0; tranches.len()],
        interest: vec![0.0; tranches.len()],
        overcollateralization: 0.0,
    };
    distribute_into(cf, tranches, &mut out);
    out
}

pub(crate) fn distribute_into(
    cf: &PoolCashFlow,
    tranches: &mut [TrancheState],
    out: &mut Distribution,
) {
    out.principal.iter_mut().for_each(|v| *v = 0.0);
    out.interest.iter_mut().for_each(|v| *v = 0.0);
    out.overcollateralization = 0.0;

    let outstanding: f64 = tranches.iter().map(|t| t.balance).sum();
    if outstanding > 0.0 {
        for (t, slot) in tranches.iter_mut().zip(out.interest.iter_mut()) {
            *slot = cf.interest * t.balance / outstanding;
            t.interest_received += *slot;
        }
    } else {
        out.overcollateralization += cf.interest;
    }

    let mut remaining = cf.principal();
    for (t, slot) in tranches.iter_mut().zip(out.principal.iter_mut()) {
        if remaining <= 0.0 {
            break;
        }
        if t.retired {
            continue;
        }
        let paid = remaining.min(t.balance);
        *slot = paid;
        t.principal_received += paid;
        t.reduce(paid);
        remaining -= paid;
    }
    out.overcollateralization += remaining.max(0.0);
}

/// Writes `loss` off tranche balances, most junior first. Returns any loss
/// left after every tranche is exhausted.
pub fn write_down_defaults(loss: f64, tranches: &mut [TrancheState]) -> f64 {
    let mut remaining = loss;
    for t in tranches.iter_mut().rev() {
        if remaining <= 0.0 {
            break;
        }
        if t.retired {
            continue;
        }
        let hit = remaining.min(t.balance);
        t.reduce(hit);
        remaining -= hit;
    }
    remaining.max(0.0)
}

/// Per-month record kept when tracing an iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthTrace {
    pub cash_flow: PoolCashFlow,
    pub principal: Vec<f64>,
    pub interest: Vec<f64>,
}

/// Pool plus tranche state for one iteration.
#[derive(Debug, Clone)]
pub struct Waterfall {
    pub wac: f64,
    pub wam: u32,
    pub recovery: f64,
    pub initial_balance: f64,
    pub balance: f64,
    pub tranches: Vec<TrancheState>,
    pub last: Distribution,
    /// Cumulative defaulted principal.
    pub defaulted: f64,
    pub prepaid: f64,
    pub scheduled: f64,
}

impl Waterfall {
    pub fn new(deal: &DealSpec, recovery: f64) -> Self {
        let n = deal.tranches.len();
        Waterfall {
            wac: deal.wac,
            wam: deal.wam,
            recovery,
            initial_balance: deal.pool_balance,
            balance: deal.pool_balance,
            tranches: deal
                .tranches
                .iter()
                .map(|t| TrancheState::new(t.name.clone(), t.balance))
                .collect(),
            last: Distribution {
                principal: vec![0.0; n],
                interest: vec![0.0; n],
                overcollateralization: 0.0,
            },
            defaulted: 0.0,
            prepaid: 0.0,
            scheduled: 0.0,
        }
    }

    pub fn is_paid_off(&self) -> bool {
        self.balance <= 0.0
    }

    /// Runs one month: pool step, then distribution, then junior-first
    /// write-down of the unrecovered default. Payments land in `self.last`.
    pub fn step(&mut self, month: u32, default_fraction: f64, smm: f64) -> Result<PoolCashFlow> {
        let (cf, next) = pool_step(
            self.balance,
            month,
            self.wac,
            self.wam,
            default_fraction,
            smm,
            self.recovery,
        )?;
        distribute_into(&cf, &mut self.tranches, &mut self.last);
        write_down_defaults(cf.loss(), &mut self.tranches);
        self.balance = next;
        self.defaulted += cf.defaulted;
        self.prepaid += cf.prepayment;
        self.scheduled += cf.scheduled_principal;
        if next == 0.0 {
            // Float dust on tranche balances once the pool is gone.
            for t in &mut self.tranches {
                t.balance = 0.0;
                t.retired = true;
            }
        }
        Ok(cf)
    }

    pub fn tranche_balance(&self) -> f64 {
        self.tranches.iter().map(|t| t.balance).sum()
    }
}

/// CSV for a month-by-month trace:
/// `month,balance_start,defaulted,B_prime,MP,IP,SP,PP,CF` followed by
/// `tranche<name>_prin,tranche<name>_int` per tranche.
pub fn trace_csv(names: &[&str], rows: &[MonthTrace]) -> String {
    let mut s = String::from("month,balance_start,defaulted,B_prime,MP,IP,SP,PP,CF");
    for n in names {
        let _ = write!(s, ",tranche{n}_prin,tranche{n}_int");
    }
    s.push('\n');
    for r in rows {
        let c = &r.cash_flow;
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.month,
            c.balance_start,
            c.defaulted,
            c.balance_after_default,
            c.scheduled_payment,
            c.interest,
            c.scheduled_principal,
            c.prepayment,
            c.total
        );
        for (p, i) in r.principal.iter().zip(&r.interest) {
            let _ = write!(s, ",{p},{i}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example_deal;

    fn abc() -> Vec<TrancheState> {
        vec![
            TrancheState::new("A", 500.0),
            TrancheState::new("B", 300.0),
            TrancheState::new("C", 200.0),
        ]
    }

    #[test]
    fn first_month_annuity() {
        let (cf, next) = pool_step(1000.0, 1, 0.08, 360, 0.0, 0.0, 0.0).unwrap();
        // mpmath: MP = 7.337645738793761, SP = 0.6709790721270944.
        assert!((cf.scheduled_payment - 7.337_645_738_793_761).abs() < 1e-12);
        assert!((cf.interest - 6.666_666_666_666_667).abs() < 1e-12);
        assert!((cf.scheduled_principal - 0.670_979_072_127_094_4).abs() < 1e-12);
        assert!((next - 999.329_020_927_872_9).abs() < 1e-10);
        assert_eq!(cf.total, cf.scheduled_principal + cf.interest);
    }

    #[test]
    fn total_default() {
        let (cf, next) = pool_step(1000.0, 5, 0.08, 360, 1.0, 0.3, 0.4).unwrap();
        assert_eq!(cf.balance_after_default, 0.0);
        assert_eq!(
            (cf.interest, cf.scheduled_principal, cf.prepayment),
            (0.0, 0.0, 0.0)
        );
        assert!((cf.recovery_cash - 400.0).abs() < 1e-12);
        assert_eq!(cf.total, cf.recovery_cash);
        assert_eq!(next, 0.0);
    }

    #[test]
    fn total_prepayment() {
        let (cf, next) = pool_step(1000.0, 1, 0.08, 360, 0.0, 1.0, 0.0).unwrap();
        assert!((cf.prepayment - (1000.0 - cf.scheduled_principal)).abs() < 1e-12);
        assert_eq!(next, 0.0);
    }

    #[test]
    fn final_month_pays_off() {
        let (cf, next) = pool_step(123.0, 360, 0.08, 360, 0.0, 0.5, 0.0).unwrap();
        assert_eq!(cf.scheduled_principal, 123.0);
        assert_eq!(cf.prepayment, 0.0);
        assert_eq!(next, 0.0);
    }

    #[test]
    fn zero_coupon_amortises_linearly() {
        let (cf, _) = pool_step(120.0, 1, 0.0, 12, 0.0, 0.0, 0.0).unwrap();
        assert!((cf.scheduled_principal - 10.0).abs() < 1e-12);
    }

    #[test]
    fn principal_goes_to_a_first() {
        let mut tr = abc();
        let cf = PoolCashFlow {
            scheduled_principal: 60.0,
            prepayment: 40.0,
            total: 100.0,
            ..Default::default()
        };
        let d = distribute(&cf, &mut tr);
        assert_eq!(d.principal, vec![100.0, 0.0, 0.0]);
        assert_eq!(tr[0].balance, 400.0);
    }

    #[test]
    fn priority_rollover() {
        let mut tr = abc();
        tr[0].balance = 50.0;
        let cf = PoolCashFlow {
            scheduled_principal: 80.0,
            total: 80.0,
            ..Default::default()
        };
        let d = distribute(&cf, &mut tr);
        assert_eq!(d.principal, vec![50.0, 30.0, 0.0]);
        assert!(tr[0].retired && tr[0].balance == 0.0);
        assert!(!tr[1].retired);
    }

    #[test]
    fn interest_pro_rata() {
        let mut tr = abc();
        let cf = PoolCashFlow {
            interest: 8.0,
            total: 8.0,
            ..Default::default()
        };
        let d = distribute(&cf, &mut tr);
        for (got, want) in d.interest.iter().zip([4.0, 2.4, 1.6]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(d.overcollateralization, 0.0);
    }

    #[test]
    fn excess_principal_is_overcollateralization() {
        let mut tr = abc();
        let cf = PoolCashFlow {
            scheduled_principal: 1010.0,
            total: 1010.0,
            ..Default::default()
        };
        let d = distribute(&cf, &mut tr);
        assert!((d.overcollateralization - 10.0).abs() < 1e-12);
        assert!(tr.iter().all(|t| t.retired));
    }

    #[test]
    fn junior_first_write_down() {
        let mut tr = abc();
        assert_eq!(write_down_defaults(10.0, &mut tr), 0.0);
        assert_eq!(
            tr.iter().map(|t| t.balance).collect::<Vec<_>>(),
            vec![500.0, 300.0, 190.0]
        );

        let mut tr = abc();
        write_down_defaults(250.0, &mut tr);
        assert!(tr[2].retired && tr[2].balance == 0.0);
        assert_eq!(tr[1].balance, 250.0);
        assert_eq!(tr[0].balance, 500.0);

        let mut tr = abc();
        let before = tr.clone();
        write_down_defaults(0.0, &mut tr);
        assert_eq!(tr, before);

        let mut tr = abc();
        assert!((write_down_defaults(1100.0, &mut tr) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn waterfall_tracks_pool_balance() {
        let deal = example_deal();
        let mut w = Waterfall::new(&deal, 0.25);
        for t in 1..=deal.wam {
            let cf = w.step(t, 0.003, 0.01).unwrap();
            assert!((cf.total - w.last.total() - w.last.overcollateralization).abs() < 1e-9);
            assert_eq!(w.last.overcollateralization, 0.0);
            assert!((w.tranche_balance() - w.balance).abs() < 1e-9 * deal.pool_balance);
        }
        assert!(w.is_paid_off());
        let lifetime = w.scheduled + w.prepaid + w.defaulted + w.balance;
        assert!((lifetime - 1000.0).abs() < 1e-9 * 1000.0);
    }

    #[test]
    fn trace_header() {
        let rows = vec![MonthTrace {
            cash_flow: PoolCashFlow {
                month: 1,
                ..Default::default()
            },
            principal: vec![1.0, 0.0],
            interest: vec![0.5, 0.25],
        }];
        let csv = trace_csv(&["A", "B"], &rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "month,balance_start,defaulted,B_prime,MP,IP,SP,PP,CF,trancheA_prin,trancheA_int,trancheB_prin,trancheB_int"
        );
        assert_eq!(lines.next().unwrap(), "1,0,0,0,0,0,0,0,0,1,0.5,0,0.25");
    }
}
