use serde::Serialize;

use crate::channel::{neumark_dilate, KrausChannel};
use crate::error::{Error, Result};
use crate::qalg::linalg::{self, pinv_sqrt, psd_sqrt, trace_product_re, CMat};
use crate::qalg::{DensityOp, HermOp, SystemLayout};

/// Eigenvalues of ΣΛ(m) below this are dropped by the pseudo-inverse square root.
pub const PINV_THRESHOLD: f64 = 1e-12;
/// The completion I − ΣΩ(m) may dip this far below zero before the build fails.
pub const COMPLETION_TOL: f64 = 1e-9;
/// Dilated dimension up to which the Neumark cross-check is run.
pub const NEUMARK_CHECK_LIMIT: usize = 1024;

/// Label of copy `m` (1-based) of register `label`.
pub fn position_label(label: &str, m: usize) -> String {
    format!("{label}_{m}")
}

/// `position` repeated `copies` times, copy m carrying labels `L_m`.
pub fn copies_layout(position: &SystemLayout, copies: usize) -> Result<SystemLayout> {
    let mut out = SystemLayout::trivial();
    for m in 1..=copies {
        out = out.concat(&position.relabel(|l| position_label(l, m))?)?;
    }
    Ok(out)
}

fn relabel_copy(position: &SystemLayout, m: usize) -> impl Fn(&str) -> String + '_ {
    move |l: &str| {
        if position.contains(l) {
            position_label(l, m)
        } else {
            l.to_string()
        }
    }
}

/// Square-root measurement over `copies` positions of a test Π on side ⊗ position.
///
/// Outcome m (0-based here, message m + 1) is Ω(m) = S^{-1/2} Λ(m) S^{-1/2} with
/// Λ(m) = Π on side ⊗ position_m and S = Σ Λ; the last element is I − Σ Ω.
#[derive(Clone, Debug)]
pub struct PositionCode {
    layout: SystemLayout,
    side: SystemLayout,
    position: SystemLayout,
    copies: usize,
    test: HermOp,
    povm: Vec<HermOp>,
    completion_min_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PovmDiagnostics {
    pub outcomes: usize,
    pub dimension: usize,
    pub completion_min_eigenvalue: f64,
    pub sum_residual: f64,
}

pub fn build_position_povm(
    test: &HermOp,
    position: &SystemLayout,
    copies: usize,
    spectators: &SystemLayout,
) -> Result<PositionCode> {
    if copies == 0 {
        return Err(Error::Unsupported("a position code needs at least one copy".into()));
    }
    position.check_subset_of(test.layout())?;
    if position.is_empty() {
        return Err(Error::InvalidCut("empty position register".into()));
    }
    if !test.is_effect(1e-9) {
        return Err(Error::Unsupported("test operator is not between 0 and I".into()));
    }
    let side = test.layout().without(&position.labels());
    let layout = side
        .concat(&copies_layout(position, copies)?)?
        .concat(spectators)?;
    let d = layout.total_dim();

    let local = test.reordered(&side.concat(position)?)?;
    let lambdas: Vec<CMat> = (1..=copies)
        .map(|m| {
            local
                .relabel(relabel_copy(position, m))
                .and_then(|t| t.embed(&layout))
                .map(HermOp::into_matrix)
        })
        .collect::<Result<_>>()?;
    let mut sum = CMat::zeros(d, d);
    for l in &lambdas {
        sum += l;
    }
    let s = pinv_sqrt(&linalg::symmetrize(&sum), PINV_THRESHOLD);
    let mut povm = Vec::with_capacity(copies + 1);
    let mut total = CMat::zeros(d, d);
    for l in &lambdas {
        let om = linalg::symmetrize(&(&s * l * &s));
        total += &om;
        povm.push(HermOp::trusted(om, layout.clone()));
    }
    let completion = linalg::symmetrize(&(linalg::identity(d) - total));
    let min = linalg::min_eigenvalue(&completion);
    if min < -COMPLETION_TOL {
        return Err(Error::Completion(min));
    }
    povm.push(HermOp::trusted(completion, layout.clone()));
    Ok(PositionCode {
        layout,
        side,
        position: position.clone(),
        copies,
        test: local,
        povm,
        completion_min_eigenvalue: min,
    })
}

impl PositionCode {
    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn side(&self) -> &SystemLayout {
        &self.side
    }

    pub fn position(&self) -> &SystemLayout {
        &self.position
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn test(&self) -> &HermOp {
        &self.test
    }

    /// Ω(1), …, Ω(n), then the completion.
    pub fn povm(&self) -> &[HermOp] {
        &self.povm
    }

    pub fn omega(&self, m: usize) -> &HermOp {
        &self.povm[m]
    }

    pub fn completion(&self) -> &HermOp {
        &self.povm[self.copies]
    }

    pub fn diagnostics(&self) -> PovmDiagnostics {
        let d = self.layout.total_dim();
        let mut sum = CMat::zeros(d, d);
        for e in &self.povm {
            sum += e.matrix();
        }
        PovmDiagnostics {
            outcomes: self.povm.len(),
            dimension: d,
            completion_min_eigenvalue: self.completion_min_eigenvalue,
            sum_residual: linalg::max_abs(&(sum - linalg::identity(d))),
        }
    }

    /// Tr(Ω(i) ρ) for every outcome, failure last. ρ must be on this code's layout.
    pub fn outcome_probabilities(&self, rho: &DensityOp) -> Result<Vec<f64>> {
        let m = rho.aligned_matrix(&self.layout)?;
        Ok(self
            .povm
            .iter()
            .map(|e| trace_product_re(e.matrix(), &m))
            .collect())
    }

    pub fn success(&self, rho: &DensityOp, m: usize) -> Result<f64> {
        self.povm[m].expectation(rho)
    }

    /// The same code with its operators written in another ordering of the registers.
    pub fn reordered(&self, layout: &SystemLayout) -> Result<Self> {
        Ok(Self {
            povm: self
                .povm
                .iter()
                .map(|e| e.reordered(layout))
                .collect::<Result<_>>()?,
            layout: layout.clone(),
            ..self.clone()
        })
    }

    /// Square roots √Ω(i), the Kraus operators of the measurement's instrument.
    pub fn kraus_roots(&self) -> Vec<CMat> {
        self.povm.iter().map(|e| psd_sqrt(e.matrix())).collect()
    }

    /// Instrument ρ ↦ Σ_i √Ω(i) ρ √Ω(i) ⊗ |i⟩⟨i| writing the outcome to `outcome_label`.
    pub fn decoder_instrument(&self, outcome_label: &str) -> Result<KrausChannel> {
        let n = self.povm.len();
        let d = self.layout.total_dim();
        let out = self.layout.concat(&SystemLayout::single(outcome_label, n)?)?;
        let kraus = self
            .kraus_roots()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let mut k = CMat::zeros(d * n, d);
                for row in 0..d {
                    for col in 0..d {
                        k[(row * n + i, col)] = r[(row, col)];
                    }
                }
                k
            })
            .collect();
        KrausChannel::new(kraus, self.layout.clone(), out)
    }

    /// Largest gap between Tr(Ω(i)ρ) and the statistics of a Neumark dilation
    /// of the same POVM, over the given states. `None` above the size limit.
    pub fn neumark_deviation(&self, states: &[DensityOp]) -> Result<Option<f64>> {
        if self.layout.total_dim() * self.povm.len() > NEUMARK_CHECK_LIMIT {
            return Ok(None);
        }
        let label = unused_label(&self.layout, "Pointer");
        let dil = neumark_dilate(&self.povm, &label)?;
        let mut worst: f64 = 0.0;
        for rho in states {
            let direct = self.outcome_probabilities(rho)?;
            let dilated = dil.probabilities(rho)?;
            for (a, b) in direct.iter().zip(&dilated) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(Some(worst))
    }
}

pub(crate) fn unused_label(layout: &SystemLayout, base: &str) -> String {
    let mut label = base.to_string();
    while layout.contains(&label) {
        label.push('\'');
    }
    label
}

/// One group of copied registers in a position state.
#[derive(Clone, Copy, Debug)]
pub struct CopyGroup<'a> {
    /// Registers of a single copy, under their base labels.
    pub position: &'a SystemLayout,
    pub copies: usize,
    /// State of one unused copy.
    pub marginal: &'a DensityOp,
}

/// The receiver's state when group g's message is `messages[g]` (0-based):
/// `joint` sits on the selected copies and every other copy holds its marginal.
pub fn position_state(
    joint: &DensityOp,
    groups: &[CopyGroup<'_>],
    messages: &[usize],
    target: &SystemLayout,
) -> Result<DensityOp> {
    if groups.len() != messages.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} copy groups but {} messages",
            groups.len(),
            messages.len()
        )));
    }
    let selected = |l: &str| -> String {
        for (g, &m) in groups.iter().zip(messages) {
            if g.position.contains(l) {
                return position_label(l, m + 1);
            }
        }
        l.to_string()
    };
    let mut state = joint.relabel(selected)?;
    for (g, &msg) in groups.iter().zip(messages) {
        if msg >= g.copies {
            return Err(Error::Parameter {
                name: "message",
                value: msg as f64,
                range: "[0, copies)",
            });
        }
        for m in (0..g.copies).filter(|&m| m != msg) {
            let copy = g.marginal.relabel(|l| position_label(l, m + 1))?;
            state = state.tensor(&copy)?;
        }
    }
    state.reordered(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::Ket;

    fn bell_test() -> HermOp {
        let bell = Ket::maximally_entangled("B", "P", 2).unwrap();
        bell.density().as_herm()
    }

    #[test]
    fn single_copy_collapses_to_support_projector() {
        let p = SystemLayout::single("P", 2).unwrap();
        let t = bell_test().scale(0.5);
        let code = build_position_povm(&t, &p, 1, &SystemLayout::trivial()).unwrap();
        let om = code.omega(0).matrix();
        assert!(linalg::max_abs(&(om * om - om)) < 1e-10);
        assert!((code.omega(0).trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_bell_positions_sum_below_identity() {
        let p = SystemLayout::single("P", 2).unwrap();
        let code = build_position_povm(&bell_test(), &p, 2, &SystemLayout::trivial()).unwrap();
        let diag = code.diagnostics();
        assert!(diag.sum_residual < 1e-10);
        assert!(diag.completion_min_eigenvalue > -1e-10);
        assert_eq!(code.layout().labels(), vec!["B", "P_1", "P_2"]);
    }

    #[test]
    fn projector_test_on_one_copy_is_kept_verbatim() {
        let p = SystemLayout::single("P", 2).unwrap();
        let side = SystemLayout::single("B", 1).unwrap();
        let mut m = CMat::zeros(2, 2);
        m[(1, 1)] = crate::qalg::c(1.0, 0.0);
        let t = HermOp::new(m, side.concat(&p).unwrap()).unwrap();
        let code = build_position_povm(&t, &p, 1, &SystemLayout::trivial()).unwrap();
        assert!(linalg::max_abs(&(code.omega(0).matrix() - t.matrix())) < 1e-12);
    }

    #[test]
    fn position_state_places_joint_on_selected_copy() {
        let bell = Ket::maximally_entangled("B", "P", 2).unwrap().density();
        let marg = bell.partial_trace(&["P"]).unwrap();
        let p = SystemLayout::single("P", 2).unwrap();
        let target = SystemLayout::new([("B", 2), ("P_1", 2), ("P_2", 2)]).unwrap();
        let g = [CopyGroup { position: &p, copies: 2, marginal: &marg }];
        let st = position_state(&bell, &g, &[1], &target).unwrap();
        let kept = st.partial_trace(&["B", "P_2"]).unwrap();
        assert!(kept.max_abs_diff(&bell.relabel(|l| if l == "P" { "P_2".into() } else { l.into() }).unwrap()).unwrap() < 1e-12);
        let other = st.partial_trace(&["P_1"]).unwrap();
        assert!((other.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn instrument_is_trace_preserving() {
        let p = SystemLayout::single("P", 2).unwrap();
        let code = build_position_povm(&bell_test(), &p, 2, &SystemLayout::trivial()).unwrap();
        let inst = code.decoder_instrument("M").unwrap();
        assert!(inst.tp_residual() < 1e-9);
    }
}
