//! Shared fixtures for the pipeline benchmarks.

use dirac_core::constraints::{sample_surface, synth_linear, toy_system};
use dirac_core::{ConstraintSet, PhasePoint, Tolerance};

/// A named system together with one point on its constraint surface.
pub struct Fixture {
    pub name: String,
    pub system: ConstraintSet,
    pub point: PhasePoint,
}

/// The toy system plus synthetic systems of growing size.
pub fn fixtures() -> Vec<Fixture> {
    let tol = Tolerance::default();
    let mut out = vec![("toy".to_string(), toy_system())];
    for (n, m0, m1, m2) in [(10, 12, 8, 2), (20, 24, 12, 4), (40, 48, 24, 8)] {
        let cs = synth_linear(n, m0, m1, m2, 1).expect("valid synthetic parameters");
        out.push((format!("synth_n{n}_m{m0}"), cs));
    }
    out.into_iter()
        .map(|(name, system)| {
            let point = sample_surface(&system, 0, 1, &tol).expect("surface point").remove(0);
            Fixture { name, system, point }
        })
        .collect()
}
