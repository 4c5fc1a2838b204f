//! Fixtures shared by the benchmarks.

use fact_core::acquire::AcquisitionSession;
use fact_core::data::AcquisitionUnits;
use fact_core::model::{ArchitectureSpec, ModelBundle};

/// Untrained bundle with the reference layer widths over `d` features with
/// costs cycling 1..=32. Timing does not depend on the weights.
pub fn reference_bundle(d: usize) -> ModelBundle {
    let arch = ArchitectureSpec {
        n_features: d,
        bits: 8,
        encoder: vec![16, 10],
        predictor: vec![8, 4],
        n_classes: 2,
    };
    let costs: Vec<f64> = (0..d).map(|j| (j % 32 + 1) as f64).collect();
    let units = AcquisitionUnits::singletons(&costs).expect("positive costs");
    ModelBundle::random(&arch, units, 1).expect("valid architecture")
}

/// Session with every `stride`-th feature known.
pub fn partial_session(bundle: &ModelBundle, stride: usize) -> AcquisitionSession {
    let initial: Vec<(usize, Vec<f64>)> = (0..bundle.units().len())
        .step_by(stride)
        .map(|u| (u, vec![(u % 7) as f64 / 8.0]))
        .collect();
    AcquisitionSession::with_known_units(bundle, &initial).expect("valid initial values")
}
