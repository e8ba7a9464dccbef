mod common;

use common::{classical_ps, zero_lower_markets};
use minquota::eating::{run_pslq, run_pslq_traced, EventKind};

#[test]
fn zero_lower_quotas_match_classical_eating() {
    let markets = zero_lower_markets(150, 7, 5, 11);
    assert_eq!(markets.len(), 150);
    for m in &markets {
        assert_eq!(run_pslq(m).unwrap(), classical_ps(m), "{m:?}");
    }
}

#[test]
fn zero_lower_quotas_never_shift() {
    for m in zero_lower_markets(60, 6, 4, 12) {
        let (_, trace) = run_pslq_traced(&m).unwrap();
        assert!(trace.critical_time.is_none());
        assert!(trace
            .phases
            .iter()
            .all(|ph| ph.kind != EventKind::CriticalShift));
    }
}
