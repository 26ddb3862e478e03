//! Seeded workloads shared by the criterion benches.

use lrd_core::repr::synth::{synth_sequence, SynthMode, SynthSpec};
use lrd_core::{MeasurementConfig, RepresentationSequence};

/// Workload sizes: (examples, hidden dim, depth).
pub const SIZES: [(usize, usize, usize); 3] = [(128, 32, 12), (256, 64, 12), (512, 64, 24)];

/// A layer stack whose dominant direction rotates by a fixed step.
pub fn rotation_stack(n: usize, d: usize, depth: usize) -> RepresentationSequence {
    let spec = SynthSpec {
        mode: SynthMode::Rotation,
        depth,
        n,
        d,
        angle: 0.05,
        seed: 7,
    };
    synth_sequence(&spec).expect("valid bench spec").0
}

/// Default settings with neighborhood sizes that fit small `n`.
pub fn config(n: usize) -> MeasurementConfig {
    MeasurementConfig {
        k_nrs: 20.min(n - 1),
        k_gfmi: 30.min(n - 1),
        ..MeasurementConfig::default()
    }
}

pub fn label(n: usize, d: usize, depth: usize) -> String {
    format!("n{n}_d{d}_L{depth}")
}
