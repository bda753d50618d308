//! Degenerate registers collapse the multi-party codes onto the point-to-point one.
//! Point-to-point tests at ε + δ and the others at ε, so the comparison runs them there.
mod common;

use common::*;
use oneshot_qcap::channel::{Builtin, KrausChannel};
use oneshot_qcap::coding::*;
use oneshot_qcap::qalg::DensityOp;

const EPS: f64 = 0.1;
const DELTA: f64 = 0.1;

fn p2p_reference() -> Vec<f64> {
    let ch = Builtin::Depolarizing { p: 0.3 }.build(2, "A", "B").unwrap();
    let r = simulate_p2p_ea(&ch, &bell("A", "B'"), 1, EPS, &params(DELTA, 0)).unwrap();
    r.stages[0].per_message_success.clone()
}

fn trivial(label: &str) -> DensityOp {
    DensityOp::maximally_mixed(&reg(label, 1))
}

fn assert_close(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-10, "{a:?} vs {b:?}");
    }
}

#[test]
fn gp_with_trivial_state_register() {
    let inner = Builtin::Depolarizing { p: 0.3 }.build(2, "A", "B").unwrap();
    let ch = inner.tensor(&Builtin::Identity.build(1, "S", "S_out").unwrap()).unwrap();
    let tau = trivial("S");
    let psi = bell("A", "B'").tensor(&tau).unwrap();
    let r = simulate_gp_ea(&ch, &tau, &psi, 1, EPS + DELTA, &params(DELTA, 0)).unwrap();
    assert_close(&r.stages[0].per_message_success, &p2p_reference());
}

#[test]
fn broadcast_with_trivial_second_receiver() {
    let ch = Builtin::Depolarizing { p: 0.3 }
        .build(2, "A", "B")
        .unwrap()
        .tensor(&Builtin::Identity.build(1, "A2", "C").unwrap())
        .unwrap();
    let psi = bell("A", "B'").tensor(&trivial("A2")).unwrap().tensor(&trivial("C'")).unwrap();
    let r = simulate_broadcast_ea(&ch, &psi, &receivers(), [1, 0], [EPS + DELTA, EPS + DELTA], &params(DELTA, 0)).unwrap();
    assert_close(&r.stages[0].per_message_success, &p2p_reference());
}

#[test]
fn mac_with_trivial_second_sender() {
    let ch = Builtin::Depolarizing { p: 0.3 }
        .build(2, "A", "X1")
        .unwrap()
        .tensor(&Builtin::Identity.build(1, "Bi", "X2").unwrap())
        .unwrap();
    let alice = MacSender { state: bell("A", "A'"), resource: vec!["A'".into()], side: vec![] };
    let bob = MacSender {
        state: trivial("Bi").tensor(&trivial("B'")).unwrap(),
        resource: vec!["B'".into()],
        side: vec![],
    };
    let r = simulate_mac_ea(&ch, &alice, &bob, [1, 0], [EPS + DELTA, EPS + DELTA], MacStrategy::PgmAFirst, &params(DELTA, 0)).unwrap();
    assert_close(&r.stages[0].per_message_success, &p2p_reference());
}

#[test]
fn noiseless_bit_is_perfect_after_derandomization() {
    let ch = KrausChannel::cq("A", &bit_flip_outputs("B", 0.0)).unwrap();
    let ens = classical_copy("U", "A", &[0.5, 0.5]);
    let setup = Unassisted::P2p { channel: &ch, ensemble: &ens };
    // with shared randomness both positions agree half the time
    let r = simulate_unassisted(&setup, &[1], &[0.1], &params(0.1, 0)).unwrap();
    assert!((r.worst_error - 0.25).abs() < 1e-9);
    let d = derandomize(&setup, 1, 0.1, &params(0.1, 0), DerandomizeOptions::default()).unwrap();
    assert!(d.best_avg_error < 1e-9, "{}", d.best_avg_error);
    assert!(d.best_string[0] != d.best_string[1]);
}
