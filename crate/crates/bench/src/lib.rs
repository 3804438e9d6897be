//! Shared fixtures for the benchmarks.

use targetwave::integrator::{EikonalModel, EikonalStepper, SimState};
use targetwave::forcing::forcing_catalog;
use targetwave::kernels::kernel_catalog;
use targetwave::{Grid2D, ScalarField};

/// Square grid with the default domain length.
pub fn grid(n: usize) -> Grid2D {
    Grid2D::square(n, 160.0).expect("valid grid")
}

/// A stepper for the local model forced by the default gaussian.
pub fn stepper(n: usize, l: &str, j: &str) -> EikonalStepper {
    let grid = grid(n);
    let g = forcing_catalog("gaussian", &[]).and_then(|f| f.sample(&grid)).expect("forcing");
    let l = kernel_catalog(l, &[]).expect("linear kernel");
    let j = kernel_catalog(j, &[]).expect("smoothing kernel");
    let model = EikonalModel::new(&l, &j, &g, 0.5, (0.0, 0.0), true, true).expect("model");
    EikonalStepper::new(model, 0.5, &SimState::at_rest(grid, (0.0, 0.0))).expect("stepper")
}

/// Conical phase with a two-fold anisotropic core.
pub fn target_field(n: usize) -> ScalarField {
    ScalarField::from_fn(grid(n), |x, y| {
        let r2 = x * x + y * y;
        (0.02 + r2).sqrt() * 0.15 + 0.1 * (x * x - y * y) / (1.0 + r2)
    })
}
