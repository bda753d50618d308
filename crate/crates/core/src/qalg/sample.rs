//! Seeded random states, operators and measurements for tests and sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::layout::SystemLayout;
use super::linalg::{self, c, CMat, CVec, C64};
use super::state::{DensityOp, HermOp, Ket};
use crate::error::{Error, Result};

/// Deterministic sampler; the same seed always yields the same sequence.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

/// Mixes several integers into one seed so independent streams do not overlap.
pub fn derive_seed(parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn complex_gaussian(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        c(self.gaussian() * s, self.gaussian() * s)
    }

    pub fn ginibre(&mut self, rows: usize, cols: usize) -> CMat {
        let mut m = CMat::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = self.complex_gaussian();
            }
        }
        m
    }

    /// Uniform point of the probability simplex.
    pub fn probability(&mut self, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| self.rng.sample::<f64, _>(Exp1) + 1e-300).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    /// Haar-random unitary.
    pub fn unitary(&mut self, d: usize) -> CMat {
        let qr = self.ginibre(d, d).qr();
        let (q, r) = (qr.q(), qr.r());
        let mut u = q;
        for k in 0..d {
            let z = r[(k, k)];
            let phase = if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) };
            for i in 0..d {
                u[(i, k)] *= phase;
            }
        }
        u
    }

    /// Random isometry with `rows` ≥ `cols`.
    pub fn isometry(&mut self, rows: usize, cols: usize) -> CMat {
        let qr = self.ginibre(rows, cols).qr();
        qr.q()
    }

    pub fn pure(&mut self, layout: &SystemLayout) -> Ket {
        let d = layout.total_dim();
        let v = CVec::from_iterator(d, (0..d).map(|_| self.complex_gaussian()));
        Ket::normalized(v, layout.clone()).expect("gaussian vector is nonzero")
    }

    /// Full-rank state from the Hilbert–Schmidt ensemble.
    pub fn density(&mut self, layout: &SystemLayout) -> DensityOp {
        let d = layout.total_dim();
        self.density_rank(layout, d)
    }

    pub fn density_rank(&mut self, layout: &SystemLayout, rank: usize) -> DensityOp {
        let d = layout.total_dim();
        let g = self.ginibre(d, rank.clamp(1, d));
        let m = &g * g.adjoint();
        let tr = linalg::trace_re(&m);
        DensityOp::trusted(m.scale(1.0 / tr), layout.clone(), true)
    }

    /// Diagonal state with random probabilities.
    pub fn classical(&mut self, layout: &SystemLayout) -> DensityOp {
        let p = self.probability(layout.total_dim());
        DensityOp::diagonal(&p, layout).expect("probabilities match the layout")
    }

    pub fn projector(&mut self, layout: &SystemLayout, rank: usize) -> HermOp {
        let d = layout.total_dim();
        let r = rank.min(d);
        if r == 0 {
            return HermOp::zero(layout);
        }
        let q = self.isometry(d, r);
        HermOp::trusted(&q * q.adjoint(), layout.clone())
    }

    /// Random operator with 0 ⪯ A ⪯ I.
    pub fn effect(&mut self, layout: &SystemLayout) -> HermOp {
        let d = layout.total_dim();
        let u = self.unitary(d);
        let vals: Vec<f64> = (0..d).map(|_| self.rng.random::<f64>()).collect();
        HermOp::trusted(linalg::from_spectrum(&vals, &u, |l| l), layout.clone())
    }

    pub fn povm(&mut self, layout: &SystemLayout, outcomes: usize) -> Vec<HermOp> {
        let d = layout.total_dim();
        if outcomes <= 1 {
            return vec![HermOp::identity(layout)];
        }
        let parts: Vec<CMat> = (0..outcomes)
            .map(|_| {
                let g = self.ginibre(d, d);
                &g * g.adjoint()
            })
            .collect();
        let total = parts.iter().fold(CMat::zeros(d, d), |acc, p| acc + p);
        let s = linalg::pinv_sqrt(&total, 1e-14);
        parts
            .iter()
            .map(|p| HermOp::trusted(&s * p * &s, layout.clone()))
            .collect()
    }

    pub fn hermitian(&mut self, layout: &SystemLayout) -> HermOp {
        let d = layout.total_dim();
        let g = self.ginibre(d, d);
        HermOp::trusted((&g + g.adjoint()).scale(0.5), layout.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Density,
    Pure,
    Projector { rank: usize },
    Povm { outcomes: usize },
    Unitary,
}

#[derive(Clone, Debug)]
pub enum Sample {
    Density(DensityOp),
    Pure(Ket),
    Projector(HermOp),
    Povm(Vec<HermOp>),
    Unitary(CMat),
}

pub fn sample(kind: SampleKind, layout: &SystemLayout, seed: u64) -> Result<Sample> {
    if matches!(kind, SampleKind::Povm { outcomes: 0 }) {
        return Err(Error::Parameter {
            name: "outcomes",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    let mut s = Sampler::new(seed);
    Ok(match kind {
        SampleKind::Density => Sample::Density(s.density(layout)),
        SampleKind::Pure => Sample::Pure(s.pure(layout)),
        SampleKind::Projector { rank } => Sample::Projector(s.projector(layout, rank)),
        SampleKind::Povm { outcomes } => Sample::Povm(s.povm(layout, outcomes)),
        SampleKind::Unitary => Sample::Unitary(s.unitary(layout.total_dim())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::linalg::max_abs;

    #[test]
    fn deterministic_density() {
        let l = SystemLayout::single("A", 2).unwrap();
        let (Sample::Density(a), Sample::Density(b)) = (
            sample(SampleKind::Density, &l, 7).unwrap(),
            sample(SampleKind::Density, &l, 7).unwrap(),
        ) else {
            unreachable!()
        };
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn povm_sums_to_identity() {
        let l = SystemLayout::single("A", 2).unwrap();
        let povm = Sampler::new(3).povm(&l, 3);
        let sum = povm.iter().fold(CMat::zeros(2, 2), |acc, m| acc + m.matrix());
        assert!(max_abs(&(sum - linalg::identity(2))) < 1e-10);
    }

    #[test]
    fn projector_idempotent() {
        let l = SystemLayout::single("A", 4).unwrap();
        let p = Sampler::new(1).projector(&l, 2);
        let m = p.matrix();
        assert!(max_abs(&(m * m - m)) < 1e-10);
        assert!((p.trace() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn unitary_is_unitary() {
        let u = Sampler::new(5).unitary(4);
        assert!(max_abs(&(u.adjoint() * &u - linalg::identity(4))) < 1e-12);
    }
}
