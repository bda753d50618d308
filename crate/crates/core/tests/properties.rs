use oneshot_qcap::channel::{neumark_dilate, Builtin};
use oneshot_qcap::coding::{floor_check, hn_check, seq_check};
use oneshot_qcap::divergence::{dh_classical_oracle, dh_eps, dmax, relative_entropy, Bits};
use oneshot_qcap::facts::binary_entropy;
use oneshot_qcap::qalg::linalg::{kron, min_eigenvalue};
use oneshot_qcap::qalg::{
    fidelity, purified_distance, schmidt_decompose, DensityOp, HermOp, Ket, Sampler, SystemLayout,
};
use proptest::prelude::*;

fn reg(label: &str, d: usize) -> SystemLayout {
    SystemLayout::single(label, d).unwrap()
}

fn dims() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![2usize, 3, 4])
}

fn eps() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 0.05, 0.1, 0.25, 0.5])
}

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn purified_distance_triangle(seed: u64, d in dims()) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let (r, t, u) = (s.density(&l), s.density(&l), s.density(&l));
        let lhs = purified_distance(&r, &t).unwrap();
        let rhs = purified_distance(&r, &u).unwrap() + purified_distance(&u, &t).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn fidelity_grows_under_channels(seed: u64, d in dims(), k in 1usize..4) {
        let mut s = Sampler::new(seed);
        let (a, b) = (reg("A", d), reg("B", 2));
        let (r, t) = (s.density(&a), s.density(&a));
        let ch = s.channel(&a, &b, k);
        let after = fidelity(&ch.apply(&r).unwrap(), &ch.apply(&t).unwrap()).unwrap();
        prop_assert!(after >= fidelity(&r, &t).unwrap() - 1e-9);
    }

    #[test]
    fn measurement_closeness(seed: u64, d in dims()) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let (r, t) = (s.density(&l), s.density(&l));
        let pi = s.effect(&l);
        let gap = (pi.expectation(&t).unwrap().max(0.0).sqrt() - pi.expectation(&r).unwrap().max(0.0).sqrt()).abs();
        prop_assert!(gap <= purified_distance(&r, &t).unwrap() + 1e-9);
    }

    #[test]
    fn partial_trace_inverts_tensor(seed: u64, d in dims(), e in dims()) {
        let mut s = Sampler::new(seed);
        let a = s.density(&reg("A", d));
        let b = s.density(&reg("B", e));
        let back = a.tensor(&b).unwrap().partial_trace(&["A"]).unwrap();
        prop_assert!(back.max_abs_diff(&a).unwrap() <= 1e-12);
    }

    #[test]
    fn schmidt_coefficients_ignore_local_unitaries(seed: u64, d in dims(), e in dims()) {
        let mut s = Sampler::new(seed);
        let l = SystemLayout::new([("A", d), ("B", e)]).unwrap();
        let psi = s.pure(&l);
        let u = kron(&s.unitary(d), &s.unitary(e));
        let rotated = Ket::new(&u * psi.amplitudes(), l).unwrap();
        let c0 = schmidt_decompose(&psi, &["A"]).unwrap().coefficients;
        let c1 = schmidt_decompose(&rotated, &["A"]).unwrap().coefficients;
        for (x, y) in c0.iter().zip(&c1) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn channels_preserve_trace_and_positivity(seed: u64, d in dims(), p in 0.0f64..=1.0, which in 0usize..6) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let ch = match which {
            0 => Builtin::Identity.build(d, "A", "B").unwrap(),
            1 => Builtin::Depolarizing { p }.build(d, "A", "B").unwrap(),
            2 => Builtin::Dephasing { p }.build(d, "A", "B").unwrap(),
            3 if d == 2 => Builtin::AmplitudeDamping { gamma: p }.build(d, "A", "B").unwrap(),
            4 => Builtin::Erasure { p }.build(d, "A", "B").unwrap(),
            _ => s.channel(&l, &reg("B", 3), 2),
        };
        let out = ch.apply(&s.density(&l)).unwrap();
        prop_assert!((out.trace() - 1.0).abs() <= 1e-10);
        prop_assert!(min_eigenvalue(out.matrix()) >= -1e-10);
    }

    #[test]
    fn dilation_projectors_are_idempotent(seed: u64, d in dims(), k in 2usize..5) {
        let mut s = Sampler::new(seed);
        let povm = s.povm(&reg("A", d), k);
        let dil = neumark_dilate(&povm, "J").unwrap();
        for i in 0..k {
            let p = dil.projector(i);
            let m = p.matrix();
            let res = (m * m - m).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(res <= 1e-10, "outcome {} residual {}", i, res);
        }
    }

    #[test]
    fn dh_data_processing(seed: u64, d in dims(), e in eps()) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let (r, t) = (s.density(&l), s.density(&l));
        let ch = s.channel(&l, &reg("B", 2), 2);
        let before = dh_eps(&r, &t, e).unwrap().value.as_f64();
        let after = dh_eps(&ch.apply(&r).unwrap(), &ch.apply(&t).unwrap(), e).unwrap().value.as_f64();
        prop_assert!(before >= after - 1e-7);
    }

    #[test]
    fn dh_matches_classical_oracle(seed: u64, d in 2usize..=16, e in eps()) {
        let mut s = Sampler::new(seed);
        let p = s.probability(d);
        let q = s.probability(d);
        let l = reg("A", d);
        let v = dh_eps(&DensityOp::diagonal(&p, &l).unwrap(), &DensityOp::diagonal(&q, &l).unwrap(), e).unwrap();
        let o = dh_classical_oracle(&p, &q, e).unwrap();
        prop_assert!((v.value.as_f64() - o.as_f64()).abs() <= 1e-8);
        let gap = v.certificate_upper.as_f64() - v.certificate_lower.as_f64();
        prop_assert!(gap <= 1e-6, "certificate gap {}", gap);
    }

    #[test]
    fn dh_relative_entropy_bound(seed: u64, d in dims(), e in eps()) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let (r, t) = (s.density(&l), s.density(&l));
        let dh = dh_eps(&r, &t, e).unwrap().value.as_f64();
        let rel = relative_entropy(&r, &t).unwrap();
        prop_assert!(dh <= (rel + binary_entropy(e)) / (1.0 - e) + 1e-7);
    }

    #[test]
    fn dh_monotone_in_eps(seed: u64, d in dims()) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let (r, t) = (s.density(&l), s.density(&l));
        let mut prev = f64::NEG_INFINITY;
        for e in [0.0, 0.05, 0.1, 0.25, 0.5, 0.75] {
            let v = dh_eps(&r, &t, e).unwrap();
            prop_assert!(v.value.as_f64() >= prev - 1e-9);
            prop_assert!(v.certificate_lower.as_f64() <= v.value.as_f64() + 1e-9);
            prev = v.value.as_f64();
        }
    }

    #[test]
    fn dh_below_dmax(seed: u64, d in dims(), e in eps()) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let (r, t) = (s.density(&l), s.density(&l));
        let dh = dh_eps(&r, &t, e).unwrap().value.as_f64();
        prop_assert!(dh <= dmax(&r, &t).unwrap() - (1.0 - e).log2() + 1e-7);
    }

    #[test]
    fn self_divergence(seed: u64, d in dims(), e in eps()) {
        let r = Sampler::new(seed).density(&reg("A", d));
        let v = dh_eps(&r, &r, e).unwrap().value.as_f64();
        prop_assert!((v + (1.0 - e).log2()).abs() <= 1e-9);
    }

    #[test]
    fn hayashi_nagaoka_operator_inequality(seed: u64, d in prop::sample::select(vec![2usize, 4, 8]), c in 0.05f64..5.0) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let sop = s.effect(&l);
        let t = s.density(&l).as_herm().scale(s.uniform(0.0, 3.0));
        prop_assert!(hn_check(&sop, &t, c).unwrap() >= -1e-9);
    }

    #[test]
    fn sequential_union_bound(seed: u64, d in prop::sample::select(vec![2usize, 4, 8]), k in 1usize..=5) {
        let mut s = Sampler::new(seed);
        let l = reg("A", d);
        let rho = s.density(&l);
        let ps: Vec<HermOp> = (0..k).map(|_| { let r = 1 + s.index(d); s.projector(&l, r) }).collect();
        prop_assert!(seq_check(&rho, &ps).unwrap().holds);
    }

    #[test]
    fn correlation_floor(seed: u64, n in 2usize..5, k in 2usize..5) {
        let mut s = Sampler::new(seed);
        let confusion: Vec<Vec<f64>> = (0..n).map(|_| s.probability(k + 1)).collect();
        let correct: Vec<usize> = (0..n).map(|m| m % (k + 1)).collect();
        if let Some(f) = floor_check(&confusion, &correct, 5, seed).unwrap() {
            prop_assert!(f.holds, "{:?}", f);
        }
    }
}

#[test]
fn infinite_divergence_on_orthogonal_support() {
    let l = reg("A", 2);
    let r = DensityOp::basis(&l, 0).unwrap();
    let t = DensityOp::basis(&l, 1).unwrap();
    assert_eq!(dh_eps(&r, &t, 0.1).unwrap().value, Bits::Infinite);
}
