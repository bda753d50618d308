mod common;

use common::*;
use oneshot_qcap::bounds::{achievable_rate, converse_value, BoundScenario, SigmaSearch, Setup};
use oneshot_qcap::channel::{Builtin, KrausChannel};
use oneshot_qcap::coding::{simulate_mac_ea, simulate_p2p_ea, MacStrategy, Scenario};
use oneshot_qcap::qalg::Sampler;

#[test]
fn achievable_never_exceeds_converse() {
    let search = SigmaSearch {
        optimize: true,
        restarts: 2,
        max_iters: 120,
        ..SigmaSearch::default()
    };
    let mut smp = Sampler::new(5);
    let channels = vec![
        Builtin::Depolarizing { p: 0.2 }.build(2, "A", "B").unwrap(),
        Builtin::AmplitudeDamping { gamma: 0.4 }.build(2, "A", "B").unwrap(),
        smp.channel(&reg("A", 2), &reg("B", 2), 2),
    ];
    let psi = bell("A", "B'");
    for ch in &channels {
        let setup = Setup::P2p { channel: ch, state: &psi };
        for (eps, delta) in [(0.05, 0.05), (0.1, 0.1), (0.2, 0.05)] {
            let ach = achievable_rate(BoundScenario::P2pEa, &setup, &[eps], delta).unwrap();
            // a code at the achievable rate errs at most 2ε + δ, so the converse applies there
            let conv = converse_value(BoundScenario::P2pEa, &setup, &[2.0 * eps + delta], &[], &search).unwrap();
            let a = ach.terms[0].value.as_f64();
            let c = conv.terms[0].value.as_f64();
            assert!(a <= c + 1e-7, "eps={eps} delta={delta}: {a} > {c}");
        }
    }
}

#[test]
fn unassisted_codes_respect_cardinality_ceilings() {
    for inst in simulator_instances(3) {
        let rep = inst.report.unwrap();
        if rep.scenario.is_assisted() {
            continue;
        }
        match rep.scenario {
            Scenario::P2pUa | Scenario::GpUa => {
                let e = rep.worst_error;
                if e < 1.0 {
                    // |B| = 2
                    assert!(rep.rates[0] as f64 <= 1.0 / (1.0 - e) + 1e-9, "{}", inst.name);
                }
            }
            Scenario::BroadcastUa | Scenario::MacUa => {
                let e: f64 = rep.stages.iter().map(|s| s.worst_error).sum();
                let sum: u32 = rep.rates.iter().sum();
                // log₂|B||C| for broadcast and log₂|X1 X2| for the MAC are both 2 here
                if e < 1.0 {
                    assert!(sum as f64 <= 2.0 / (1.0 - e) + 1e-9, "{}", inst.name);
                }
            }
            _ => unreachable!(),
        }
    }
}

#[test]
fn identity_channel_success_ceiling() {
    let ch = KrausChannel::identity_between(&reg("A", 2), &reg("B", 2)).unwrap();
    for r in 1..=2u32 {
        for eps in [0.05, 0.2] {
            let rep = simulate_p2p_ea(&ch, &bell("A", "B'"), r, eps, &params(0.1, 0)).unwrap();
            assert!(1.0 - rep.worst_error <= 4.0 / 2f64.powi(r as i32) + 1e-9);
        }
    }
}

#[test]
fn swapping_decode_order_swaps_the_degraded_message() {
    let mac = mac_channel(0.2);
    let (a, b) = mac_ea_senders();
    let p = params(0.1, 0);
    let af = simulate_mac_ea(&mac, &a, &b, [1, 1], [0.05, 0.15], MacStrategy::PgmAFirst, &p).unwrap();
    let bf = simulate_mac_ea(&mac, &a, &b, [1, 1], [0.05, 0.15], MacStrategy::PgmBFirst, &p).unwrap();
    let head = |r: &oneshot_qcap::coding::ProtocolReport, n: &str| {
        r.stages.iter().find(|s| s.name == n).unwrap().headline_bound
    };
    // first-decoded message keeps ε + 2δ, the second picks up 3√(ε_first + 2δ)
    assert!((head(&af, "m1") - 0.25).abs() < 1e-12);
    assert!((head(&af, "m2") - (0.35 + 3.0 * 0.25f64.sqrt())).abs() < 1e-12);
    assert!((head(&bf, "m2") - 0.35).abs() < 1e-12);
    assert!((head(&bf, "m1") - (0.25 + 3.0 * 0.35f64.sqrt())).abs() < 1e-12);
    assert!(af.passed() && bf.passed());
    assert_eq!(af.stages[0].name, "m1");
    assert_eq!(bf.stages[0].name, "m2");
}
