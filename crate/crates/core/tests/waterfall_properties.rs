use cmo_core::model::{DealSpec, InterestRule, PrincipalRule, TrancheSpec};
use cmo_core::waterfall::{pool_step, write_down_defaults, TrancheState, Waterfall};
use proptest::prelude::*;

fn deal(balances: &[f64], wac: f64, wam: u32) -> DealSpec {
    DealSpec {
        pool_balance: balances.iter().sum(),
        wac,
        wam,
        tranches: balances
            .iter()
            .enumerate()
            .map(|(i, &b)| TrancheSpec {
                name: format!("t{i}"),
                balance: b,
            })
            .collect(),
        principal_rule: PrincipalRule::SequentialPay,
        interest_rule: InterestRule::ProRataByBalance,
    }
}

proptest! {
    #[test]
    fn pool_step_components_are_consistent(
        balance in 0.0f64..1e7,
        month in 1u32..360,
        wac in 0.0f64..0.25,
        x in 0.0f64..=1.0,
        smm in 0.0f64..=1.0,
        recovery in 0.0f64..1.0,
    ) {
        let (cf, next) = pool_step(balance, month, wac, 360, x, smm, recovery).unwrap();
        let tol = 1e-9 * balance.max(1.0);
        prop_assert!((cf.balance_after_default - (1.0 - x) * balance).abs() <= tol);
        prop_assert!((cf.total - (cf.scheduled_principal + cf.interest + cf.prepayment + cf.recovery_cash)).abs() <= tol);
        for v in [cf.defaulted, cf.interest, cf.scheduled_principal, cf.prepayment, cf.recovery_cash, next] {
            prop_assert!(v >= 0.0);
        }
        prop_assert!((cf.scheduled_principal + cf.prepayment + cf.defaulted + next - balance).abs() <= tol);
    }

    #[test]
    fn deal_cash_is_conserved_every_month(
        balances in prop::collection::vec(1.0f64..1e6, 1..6),
        wac in 0.0f64..0.2,
        wam in 1u32..240,
        path in prop::collection::vec((0.0f64..0.05, 0.0f64..0.2), 240),
        recovery in 0.0f64..0.9,
    ) {
        let d = deal(&balances, wac, wam);
        let b0 = d.pool_balance;
        let mut w = Waterfall::new(&d, recovery);
        let mut principal = 0.0;
        let mut defaulted = 0.0;
        for t in 1..=wam {
            let (x, smm) = path[t as usize - 1];
            let cf = w.step(t, x, smm).unwrap();
            prop_assert!((cf.total - w.last.total()).abs() <= 1e-9 * b0);
            prop_assert!(w.last.overcollateralization <= 1e-9 * b0);
            prop_assert!((w.tranche_balance() - w.balance).abs() <= 1e-9 * b0);
            for s in &w.tranches {
                prop_assert!(s.balance >= 0.0);
                prop_assert_eq!(s.retired, s.balance == 0.0);
            }
            principal += cf.scheduled_principal + cf.prepayment;
            defaulted += cf.defaulted;
        }
        prop_assert_eq!(w.balance, 0.0);
        prop_assert!((principal + defaulted - b0).abs() <= 1e-9 * b0);
    }

    #[test]
    fn write_down_is_junior_first(
        balances in prop::collection::vec(0.0f64..1000.0, 1..6),
        loss in 0.0f64..5000.0,
    ) {
        let mut ts: Vec<TrancheState> = balances
            .iter()
            .enumerate()
            .map(|(i, &b)| TrancheState::new(format!("t{i}"), b))
            .collect();
        let before: f64 = balances.iter().sum();
        let left = write_down_defaults(loss, &mut ts);
        let after: f64 = ts.iter().map(|t| t.balance).sum();
        prop_assert!((before - after - (loss - left)).abs() <= 1e-9 * before.max(1.0));
        prop_assert!(left == 0.0 || after == 0.0);
        // Any tranche that was touched has every junior tranche at zero.
        for (i, t) in ts.iter().enumerate() {
            if t.balance < balances[i] {
                prop_assert!(ts[i + 1..].iter().all(|j| j.balance == 0.0));
            }
        }
    }
}
