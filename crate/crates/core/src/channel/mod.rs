//! CPTP maps in Kraus form, the builtin channel zoo, and Neumark dilation.

mod builtin;
mod neumark;

pub use builtin::Builtin;
pub use neumark::{neumark_dilate, NeumarkDilation};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qalg::linalg::{self, kron, max_abs, CMat};
use crate::qalg::{DensityOp, HermOp, Sampler, SystemLayout};

pub const TP_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct KrausChannel {
    kraus: Vec<CMat>,
    in_layout: SystemLayout,
    out_layout: SystemLayout,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelDiagnostics {
    pub tp_residual: f64,
    pub choi_min_eigenvalue: f64,
    pub choi_marginal_residual: f64,
    pub violations: Vec<String>,
}

impl ChannelDiagnostics {
    pub fn is_cptp(&self) -> bool {
        self.violations.is_empty()
    }
}

impl KrausChannel {
    /// Validates shapes and trace preservation.
    pub fn new(kraus: Vec<CMat>, in_layout: SystemLayout, out_layout: SystemLayout) -> Result<Self> {
        let ch = Self::unchecked(kraus, in_layout, out_layout)?;
        let res = ch.tp_residual();
        if res > TP_TOL {
            return Err(Error::InvalidChannel(format!(
                "sum of K†K deviates from the identity by {res:e}"
            )));
        }
        Ok(ch)
    }

    /// Checks shapes only; `validate` reports what else is wrong.
    pub fn unchecked(
        kraus: Vec<CMat>,
        in_layout: SystemLayout,
        out_layout: SystemLayout,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
        for (i, k) in kraus.iter().enumerate() {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator {i} is {}x{}, expected {dout}x{din}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            if k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator {i} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            kraus,
            in_layout,
            out_layout,
        })
    }

    pub fn identity(layout: &SystemLayout) -> Self {
        Self {
            kraus: vec![linalg::identity(layout.total_dim())],
            in_layout: layout.clone(),
            out_layout: layout.clone(),
        }
    }

    /// Identity map between layouts of equal total dimension.
    pub fn identity_between(in_layout: &SystemLayout, out_layout: &SystemLayout) -> Result<Self> {
        if in_layout.total_dim() != out_layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "identity from {in_layout} to {out_layout}"
            )));
        }
        Ok(Self {
            kraus: vec![linalg::identity(in_layout.total_dim())],
            in_layout: in_layout.clone(),
            out_layout: out_layout.clone(),
        })
    }

    pub fn from_isometry(v: CMat, in_layout: SystemLayout, out_layout: SystemLayout) -> Result<Self> {
        Self::new(vec![v], in_layout, out_layout)
    }

    /// Classical-quantum channel: measure in the computational basis and emit `outputs[x]`.
    pub fn cq(in_label: &str, outputs: &[DensityOp]) -> Result<Self> {
        Self::cq_on(&SystemLayout::single(in_label, outputs.len().max(1))?, outputs)
    }

    /// `cq` with a composite classical input; `outputs` is indexed by the joint basis state.
    pub fn cq_on(in_layout: &SystemLayout, outputs: &[DensityOp]) -> Result<Self> {
        let first = outputs
            .first()
            .ok_or_else(|| Error::InvalidChannel("cq map needs at least one symbol".into()))?;
        let out_layout = first.layout().clone();
        let din = outputs.len();
        if din != in_layout.total_dim() {
            return Err(Error::InvalidChannel(format!(
                "{din} cq outputs for input {in_layout}"
            )));
        }
        let dout = out_layout.total_dim();
        let mut kraus = Vec::new();
        for (x, rho) in outputs.iter().enumerate() {
            if !rho.is_normalized() {
                return Err(Error::InvalidChannel(format!("cq output {x} is not normalized")));
            }
            let e = rho.reordered(&out_layout)?.eigen();
            for (k, &lam) in e.values.iter().enumerate() {
                if lam <= 1e-14 {
                    continue;
                }
                let mut op = CMat::zeros(dout, din);
                let col = e.vectors.column(k).scale(lam.sqrt());
                op.set_column(x, &col);
                kraus.push(op);
            }
        }
        Self::new(kraus, in_layout.clone(), out_layout)
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn in_layout(&self) -> &SystemLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &SystemLayout {
        &self.out_layout
    }

    pub fn tp_residual(&self) -> f64 {
        let d = self.in_layout.total_dim();
        let sum = self
            .kraus
            .iter()
            .fold(CMat::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        max_abs(&(sum - linalg::identity(d)))
    }

    fn apply_matrix(&self, m: &CMat) -> CMat {
        let d = self.out_layout.total_dim();
        self.kraus
            .iter()
            .fold(CMat::zeros(d, d), |acc, k| acc + k * m * k.adjoint())
    }

    /// Heisenberg-picture map: Σ K† X K.
    pub fn adjoint_apply(&self, x: &HermOp) -> Result<HermOp> {
        let m = x.aligned_matrix(&self.out_layout)?;
        let d = self.in_layout.total_dim();
        let out = self
            .kraus
            .iter()
            .fold(CMat::zeros(d, d), |acc, k| acc + k.adjoint() * &m * k);
        Ok(HermOp::trusted(out, self.in_layout.clone()))
    }

    pub fn apply(&self, rho: &DensityOp) -> Result<DensityOp> {
        if !rho.layout().same_registers(&self.in_layout) {
            return Err(Error::DimensionMismatch(format!(
                "channel input {} applied to state on {}",
                self.in_layout,
                rho.layout()
            )));
        }
        let m = rho.aligned_matrix(&self.in_layout)?;
        Ok(DensityOp::trusted(
            self.apply_matrix(&m),
            self.out_layout.clone(),
            rho.is_normalized(),
        ))
    }

    /// Applies the channel to the `targets` registers of `rho` (matched to the
    /// input layout by position and dimension). The output registers take the
    /// place of the first target; all other registers keep their order.
    pub fn apply_on<S: AsRef<str>>(&self, rho: &DensityOp, targets: &[S]) -> Result<DensityOp> {
        let layout = rho.layout();
        if targets.len() != self.in_layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} target registers for channel input {}",
                targets.len(),
                self.in_layout
            )));
        }
        for (t, r) in targets.iter().zip(self.in_layout.registers()) {
            let d = layout.dim_of(t.as_ref())?;
            if d != r.dim {
                return Err(Error::RegisterDim {
                    label: t.as_ref().to_string(),
                    expected: r.dim,
                    found: d,
                });
            }
        }
        let target_layout = layout.select(targets)?;
        let rest = layout.without(targets);
        if !rest.is_disjoint(&self.out_layout) {
            return Err(Error::LabelCollision(format!(
                "channel output {} collides with spectators {}",
                self.out_layout, rest
            )));
        }
        let work = target_layout.concat(&rest)?;
        let m = rho.aligned_matrix(&work)?;
        let dr = rest.total_dim();
        let id = linalg::identity(dr);
        let dout = self.out_layout.total_dim() * dr;
        let mut out = CMat::zeros(dout, dout);
        for k in &self.kraus {
            let ke = if dr == 1 { k.clone() } else { kron(k, &id) };
            out += &ke * &m * ke.adjoint();
        }
        let produced = self.out_layout.concat(&rest)?;
        let first = layout.position(targets[0].as_ref()).expect("checked above");
        let mut regs = Vec::new();
        let mut inserted = false;
        for (i, r) in layout.registers().iter().enumerate() {
            if targets.iter().any(|t| t.as_ref() == r.label) {
                if i == first && !inserted {
                    regs.extend(self.out_layout.registers().iter().cloned());
                    inserted = true;
                }
            } else {
                regs.push(r.clone());
            }
        }
        let final_layout = SystemLayout::from_registers(regs)?;
        let m = linalg::reorder_operator(&out, &produced, &final_layout)?;
        Ok(DensityOp::trusted(m, final_layout, rho.is_normalized()))
    }

    fn reference_layout(&self) -> Result<SystemLayout> {
        self.in_layout.relabel(|l| format!("R:{l}"))
    }

    /// (1/d_in) Σ_ij |i⟩⟨j| ⊗ N(|i⟩⟨j|) on the reference ⊕ output layout.
    pub fn choi_matrix(&self) -> Result<HermOp> {
        let din = self.in_layout.total_dim();
        let dout = self.out_layout.total_dim();
        let mut j = CMat::zeros(din * dout, din * dout);
        // vec form: |Γ⟩ = Σ_i |i⟩ ⊗ K|i⟩
        for k in &self.kraus {
            let mut v = crate::qalg::CVec::zeros(din * dout);
            for i in 0..din {
                for o in 0..dout {
                    v[i * dout + o] = k[(o, i)];
                }
            }
            j += &v * v.adjoint();
        }
        let layout = self.reference_layout()?.concat(&self.out_layout)?;
        Ok(HermOp::trusted(j.scale(1.0 / din as f64), layout))
    }

    pub fn choi(&self) -> Result<DensityOp> {
        let j = self.choi_matrix()?;
        let layout = j.layout().clone();
        DensityOp::new(j.into_matrix(), layout)
    }

    pub fn validate(&self) -> ChannelDiagnostics {
        let mut violations = Vec::new();
        let tp = self.tp_residual();
        if tp > TP_TOL {
            violations.push(format!("trace preservation residual {tp:e}"));
        }
        let (min_eig, marg) = match self.choi_matrix() {
            Ok(j) => {
                let min = j.min_eigenvalue();
                let refs: Vec<String> = self
                    .in_layout
                    .labels()
                    .iter()
                    .map(|l| format!("R:{l}"))
                    .collect();
                let marg = j
                    .partial_trace(&refs)
                    .map(|r| {
                        let d = r.dim();
                        max_abs(&(r.matrix() - linalg::identity(d).scale(1.0 / d as f64)))
                    })
                    .unwrap_or(f64::INFINITY);
                (min, marg)
            }
            Err(e) => {
                violations.push(e.to_string());
                (f64::NAN, f64::NAN)
            }
        };
        if min_eig < -TP_TOL {
            violations.push(format!("Choi matrix has eigenvalue {min_eig:e}"));
        }
        if marg > TP_TOL {
            violations.push(format!("Choi input marginal deviates from I/d by {marg:e}"));
        }
        ChannelDiagnostics {
            tp_residual: tp,
            choi_min_eigenvalue: min_eig,
            choi_marginal_residual: marg,
            violations,
        }
    }

    /// Parallel composition self ⊗ other.
    pub fn tensor(&self, other: &KrausChannel) -> Result<Self> {
        let in_layout = self.in_layout.concat(&other.in_layout)?;
        let out_layout = self.out_layout.concat(&other.out_layout)?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(kron(a, b));
            }
        }
        Ok(Self {
            kraus,
            in_layout,
            out_layout,
        })
    }

    /// `after ∘ self`.
    pub fn then(&self, after: &KrausChannel) -> Result<Self> {
        if !after.in_layout.same_registers(&self.out_layout) {
            return Err(Error::DimensionMismatch(format!(
                "composing output {} with input {}",
                self.out_layout, after.in_layout
            )));
        }
        let perm = linalg::layout_permutation(&after.in_layout, &self.out_layout)?;
        let mut kraus = Vec::new();
        for b in &after.kraus {
            let b = linalg::permute_rect(b, &[b.nrows()], &[0], &after.in_layout.dims(), &perm);
            for a in &self.kraus {
                kraus.push(&b * a);
            }
        }
        Ok(Self {
            kraus,
            in_layout: self.in_layout.clone(),
            out_layout: after.out_layout.clone(),
        })
    }

    pub fn relabel(
        &self,
        inputs: impl Fn(&str) -> String,
        outputs: impl Fn(&str) -> String,
    ) -> Result<Self> {
        Ok(Self {
            kraus: self.kraus.clone(),
            in_layout: self.in_layout.relabel(inputs)?,
            out_layout: self.out_layout.relabel(outputs)?,
        })
    }
}

impl Sampler {
    /// Random channel with `kraus_count` Kraus operators cut from a Haar isometry.
    pub fn channel(
        &mut self,
        in_layout: &SystemLayout,
        out_layout: &SystemLayout,
        kraus_count: usize,
    ) -> KrausChannel {
        let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
        let k = kraus_count.max(din.div_ceil(dout)).max(1);
        let v = self.isometry(dout * k, din);
        let kraus = (0..k)
            .map(|j| v.rows(j * dout, dout).into_owned())
            .collect();
        KrausChannel {
            kraus,
            in_layout: in_layout.clone(),
            out_layout: out_layout.clone(),
        }
    }
}
