use crate::error::{Error, Result};
use crate::qalg::linalg::{self, c, max_abs, psd_sqrt, CMat, CVec};
use crate::qalg::{DensityOp, HermOp, Ket, SystemLayout};

pub const POVM_TOL: f64 = 1e-10;

/// Unitary U on system ⊗ pointer with Tr[U†(I⊗|i⟩⟨i|)U (ρ⊗|0⟩⟨0|)] = Tr[M_i ρ].
#[derive(Clone, Debug)]
pub struct NeumarkDilation {
    unitary: CMat,
    system: SystemLayout,
    layout: SystemLayout,
    pointer_label: String,
    outcomes: usize,
}

pub(crate) fn validate_povm(povm: &[HermOp]) -> Result<SystemLayout> {
    let first = povm
        .first()
        .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
    let layout = first.layout().clone();
    let d = layout.total_dim();
    let mut sum = CMat::zeros(d, d);
    for (i, m) in povm.iter().enumerate() {
        let mm = m.aligned_matrix(&layout)?;
        let min = linalg::min_eigenvalue(&mm);
        if min < -POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "element {i} has eigenvalue {min:e}"
            )));
        }
        sum += mm;
    }
    let res = max_abs(&(sum - linalg::identity(d)));
    if res > POVM_TOL {
        return Err(Error::InvalidPovm(format!(
            "elements sum to the identity only within {res:e}"
        )));
    }
    Ok(layout)
}

pub fn neumark_dilate(povm: &[HermOp], pointer_label: &str) -> Result<NeumarkDilation> {
    let system = validate_povm(povm)?;
    let n = povm.len();
    let d = system.total_dim();
    let layout = system.concat(&SystemLayout::single(pointer_label, n)?)?;
    let big = d * n;
    let roots: Vec<CMat> = povm
        .iter()
        .map(|m| psd_sqrt(&m.aligned_matrix(&system).expect("validated")))
        .collect();
    let mut u = CMat::zeros(big, big);
    let mut basis: Vec<CVec> = Vec::with_capacity(big);
    for s in 0..d {
        let mut col = CVec::zeros(big);
        for (i, r) in roots.iter().enumerate() {
            for sp in 0..d {
                col[sp * n + i] = r[(sp, s)];
            }
        }
        u.set_column(s * n, &col);
        basis.push(col);
    }
    // Complete with Gram–Schmidt over the standard basis, twice-orthogonalized.
    let mut free_cols = (0..d).flat_map(|s| (1..n).map(move |p| s * n + p));
    for k in 0..big {
        if basis.len() == big {
            break;
        }
        let mut v = CVec::zeros(big);
        v[k] = c(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            let v = v.unscale(norm);
            u.set_column(free_cols.next().expect("column count matches"), &v);
            basis.push(v);
        }
    }
    if basis.len() != big {
        return Err(Error::InvalidPovm("could not complete the dilation".into()));
    }
    Ok(NeumarkDilation {
        unitary: u,
        system,
        layout,
        pointer_label: pointer_label.to_string(),
        outcomes: n,
    })
}

impl NeumarkDilation {
    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    pub fn system(&self) -> &SystemLayout {
        &self.system
    }

    /// System registers followed by the pointer.
    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn pointer_label(&self) -> &str {
        &self.pointer_label
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn pointer_basis(&self) -> Vec<Ket> {
        let l = SystemLayout::single(self.pointer_label.clone(), self.outcomes).expect("valid label");
        (0..self.outcomes)
            .map(|i| Ket::basis(&l, i).expect("index in range"))
            .collect()
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.unitary.nrows();
        max_abs(&(self.unitary.adjoint() * &self.unitary - linalg::identity(n)))
    }

    /// U†(I ⊗ |i⟩⟨i|)U.
    pub fn projector(&self, i: usize) -> HermOp {
        let n = self.outcomes;
        let rows: Vec<usize> = (0..self.system.total_dim()).map(|s| s * n + i).collect();
        let sel = self.unitary.select_rows(rows.iter());
        HermOp::trusted(sel.adjoint() * sel, self.layout.clone())
    }

    /// Outcome distribution of the dilated measurement on ρ ⊗ |0⟩⟨0|.
    pub fn probabilities(&self, rho: &DensityOp) -> Result<Vec<f64>> {
        let m = rho.aligned_matrix(&self.system)?;
        let n = self.outcomes;
        let d = self.system.total_dim();
        // columns (s, 0) of U carry the input
        let cols: Vec<usize> = (0..d).map(|s| s * n).collect();
        let v = self.unitary.select_columns(cols.iter());
        let out = &v * m * v.adjoint();
        Ok((0..n)
            .map(|i| (0..d).map(|s| out[(s * n + i, s * n + i)].re).sum())
            .collect())
    }
}
