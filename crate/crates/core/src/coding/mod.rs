//! Position-based codes simulated exactly, with the operator inequalities
//! behind their error bounds checked on the code itself.

mod checks;
mod derandomize;
mod position;
pub(crate) mod protocols;
mod report;

pub use checks::{
    gentle_checks, gentle_measurement_margin, gentle_povm_check, hn_check,
    measurement_closeness_margin, seq_check, GentleMode, GentlePovmCheck, GentleReport, SeqCheck,
    DEGENERATE_WEIGHT, PROJECTOR_TOL,
};
pub use derandomize::{derandomize, DerandomizeOptions, DerandomizeReport, DEFAULT_STRING_CAP};
pub use position::{
    build_position_povm, copies_layout, position_label, position_state, CopyGroup, PositionCode,
    PovmDiagnostics, COMPLETION_TOL, NEUMARK_CHECK_LIMIT, PINV_THRESHOLD,
};
pub use protocols::{
    simulate_broadcast_ea, simulate_gp_ea, simulate_mac_ea, simulate_p2p_ea, simulate_unassisted,
    CodeParams, MacSender, Receiver, Unassisted, CLASSICAL_TOL, PRODUCT_TOL,
};
pub use report::{
    floor_check, FloorCheck, InSituCheck, JointReport, MacStrategy, ProtocolReport, Scenario,
    StageReport, TestSummary, BOUND_TOL, FLOOR_TOL,
};
