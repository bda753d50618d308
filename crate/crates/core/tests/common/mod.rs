//! Seeded protocol instances shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use oneshot_qcap::channel::{Builtin, KrausChannel};
use oneshot_qcap::coding::{
    simulate_broadcast_ea, simulate_gp_ea, simulate_mac_ea, simulate_p2p_ea, simulate_unassisted,
    CodeParams, MacSender, MacStrategy, ProtocolReport, Receiver, Unassisted,
};
use oneshot_qcap::qalg::{DensityOp, Ket, Sampler, SystemLayout};
use oneshot_qcap::Result;

pub fn reg(label: &str, d: usize) -> SystemLayout {
    SystemLayout::single(label, d).unwrap()
}

pub fn bell(a: &str, b: &str) -> DensityOp {
    Ket::maximally_entangled(a, b, 2).unwrap().density()
}

/// Σ_u p_u |u⟩⟨u|_U ⊗ |u⟩⟨u|_X.
pub fn classical_copy(u: &str, x: &str, probs: &[f64]) -> DensityOp {
    let d = probs.len();
    let mut diag = vec![0.0; d * d];
    for (i, p) in probs.iter().enumerate() {
        diag[i * d + i] = *p;
    }
    DensityOp::diagonal(&diag, &SystemLayout::new([(u, d), (x, d)]).unwrap()).unwrap()
}

pub fn bit_flip_outputs(label: &str, f: f64) -> Vec<DensityOp> {
    vec![
        DensityOp::diagonal(&[1.0 - f, f], &reg(label, 2)).unwrap(),
        DensityOp::diagonal(&[f, 1.0 - f], &reg(label, 2)).unwrap(),
    ]
}

pub fn receivers() -> [Receiver; 2] {
    [
        Receiver {
            outputs: vec!["B".into()],
            resource: vec!["B'".into()],
        },
        Receiver {
            outputs: vec!["C".into()],
            resource: vec!["C'".into()],
        },
    ]
}

/// Identity on A, Bi → X1, X2 followed by depolarizing noise p on X1.
pub fn mac_channel(p: f64) -> KrausChannel {
    let x1 = Builtin::Depolarizing { p }.build(2, "A", "X1").unwrap();
    let x2 = Builtin::Identity.build(2, "Bi", "X2").unwrap();
    x1.tensor(&x2).unwrap()
}

pub fn mac_ea_senders() -> (MacSender, MacSender) {
    (
        MacSender {
            state: bell("A", "A'"),
            resource: vec!["A'".into()],
            side: vec![],
        },
        MacSender {
            state: bell("Bi", "B'"),
            resource: vec!["B'".into()],
            side: vec![],
        },
    )
}

pub fn params(delta: f64, seed: u64) -> CodeParams {
    CodeParams {
        seed,
        ..CodeParams::with_delta(delta)
    }
}

pub struct Instance {
    pub name: String,
    pub report: Result<ProtocolReport>,
}

fn inst(name: impl Into<String>, report: Result<ProtocolReport>) -> Instance {
    Instance {
        name: name.into(),
        report,
    }
}

/// Thirteen seeded instances covering every simulator and all three multiple-access strategies.
pub fn simulator_instances(seed: u64) -> Vec<Instance> {
    let mut smp = Sampler::new(seed);
    let mut out = Vec::new();

    let dep = Builtin::Depolarizing { p: 0.1 }.build(2, "A", "B").unwrap();
    out.push(inst("p2p_ea depolarizing R=1", simulate_p2p_ea(&dep, &bell("A", "B'"), 1, 0.1, &params(0.1, seed))));
    let rnd = smp.channel(&reg("A", 2), &reg("B", 2), 2);
    out.push(inst("p2p_ea random channel R=1", simulate_p2p_ea(&rnd, &bell("A", "B'"), 1, 0.2, &params(0.1, seed))));
    let ad = Builtin::AmplitudeDamping { gamma: 0.3 }.build(2, "A", "B").unwrap();
    out.push(inst("p2p_ea amplitude damping R=2", simulate_p2p_ea(&ad, &bell("A", "B'"), 2, 0.1, &params(0.05, seed))));

    let flip = KrausChannel::cq("A", &bit_flip_outputs("B", 0.1)).unwrap();
    let ens = classical_copy("U", "A", &[0.5, 0.5]);
    out.push(inst(
        "p2p_ua bit flip R=1",
        simulate_unassisted(&Unassisted::P2p { channel: &flip, ensemble: &ens }, &[1], &[0.1], &params(0.1, seed)),
    ));
    let outs: Vec<DensityOp> = (0..3).map(|_| smp.density(&reg("B", 2))).collect();
    let rcq = KrausChannel::cq("A", &outs).unwrap();
    let ens3 = classical_copy("U", "A", &[0.4, 0.3, 0.3]);
    out.push(inst(
        "p2p_ua random cq R=1",
        simulate_unassisted(&Unassisted::P2p { channel: &rcq, ensemble: &ens3 }, &[1], &[0.2], &params(0.1, seed)),
    ));

    let as_layout = SystemLayout::new([("A", 2), ("S", 2)]).unwrap();
    let gp = smp.channel(&as_layout, &reg("B", 2), 3);
    let tau = smp.density(&reg("S", 2));
    let psi = bell("A", "B'").tensor(&tau).unwrap();
    out.push(inst("gp_ea random channel R=1", simulate_gp_ea(&gp, &tau, &psi, 1, 0.1, &params(0.1, seed))));
    let gens = classical_copy("U", "A", &[0.5, 0.5]).tensor(&tau).unwrap();
    out.push(inst(
        "gp_ua random channel R=1",
        simulate_unassisted(
            &Unassisted::Gp { channel: &gp, tau: &tau, ensemble: &gens },
            &[1],
            &[0.1],
            &params(0.1, seed),
        ),
    ));

    let bc = Builtin::Depolarizing { p: 0.1 }
        .build(2, "A1", "B")
        .unwrap()
        .tensor(&Builtin::Dephasing { p: 0.2 }.build(2, "A2", "C").unwrap())
        .unwrap();
    let rx = receivers();
    let bpsi = bell("A1", "B'").tensor(&bell("A2", "C'")).unwrap();
    out.push(inst(
        "broadcast_ea depolarizing x dephasing R=(1,1)",
        simulate_broadcast_ea(&bc, &bpsi, &rx, [1, 1], [0.1, 0.1], &params(0.1, seed)),
    ));
    let bcq = KrausChannel::cq("A1", &bit_flip_outputs("B", 0.05))
        .unwrap()
        .tensor(&KrausChannel::cq("A2", &bit_flip_outputs("C", 0.1)).unwrap())
        .unwrap();
    let bens = classical_copy("B'", "A1", &[0.5, 0.5])
        .tensor(&classical_copy("C'", "A2", &[0.5, 0.5]))
        .unwrap();
    out.push(inst(
        "broadcast_ua bit flips R=(1,1)",
        simulate_unassisted(
            &Unassisted::Broadcast { channel: &bcq, ensemble: &bens, receivers: &rx },
            &[1, 1],
            &[0.1, 0.1],
            &params(0.1, seed),
        ),
    ));

    let mac = mac_channel(0.2);
    let (a, b) = mac_ea_senders();
    for s in [MacStrategy::PgmAFirst, MacStrategy::PgmBFirst, MacStrategy::Sequential] {
        out.push(inst(
            format!("mac_ea {s:?} R=(1,1)"),
            simulate_mac_ea(&mac, &a, &b, [1, 1], [0.1, 0.1], s, &params(0.1, seed)),
        ));
    }
    let mcq = KrausChannel::cq("A", &bit_flip_outputs("X1", 0.1))
        .unwrap()
        .tensor(&KrausChannel::cq("Bi", &bit_flip_outputs("X2", 0.05)).unwrap())
        .unwrap();
    let ua = MacSender {
        state: classical_copy("U1", "A", &[0.5, 0.5]),
        resource: vec!["U1".into()],
        side: vec![],
    };
    let ub = MacSender {
        state: classical_copy("U2", "Bi", &[0.5, 0.5]),
        resource: vec!["U2".into()],
        side: vec![],
    };
    out.push(inst(
        "mac_ua bit flips R=(1,1)",
        simulate_unassisted(&Unassisted::Mac { channel: &mcq, alice: &ua, bob: &ub }, &[1, 1], &[0.1, 0.1], &params(0.1, seed)),
    ));
    out
}
