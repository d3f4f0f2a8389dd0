//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use axifree_core::dynamics::{Model, SimState, StepConfig};
use axifree_core::grid::Grid;
use axifree_core::initial_data::Preset;

pub fn grid(n: usize) -> Grid {
    Grid::new(n, n, 1.0, 2.0 * PI).expect("benchmark grid sizes are valid")
}

/// Model and state for the perturbed pinch on an `n x n` grid.
pub fn pinch(n: usize) -> (Grid, Model, SimState) {
    let g = grid(n);
    let data = Preset::PerturbedPinch.build(&g);
    let model = Model::new(&g, data.seed(), StepConfig::new(4.0 * g.dz)).expect("model builds");
    let state = data.state(&g).expect("preset is well formed");
    (g, model, state)
}
