//! Cycle, frame and Riccati stages chained for a named builtin system.

use serde::{Deserialize, Serialize};

use crate::cycle::{locate_cycle, CycleOptions, LimitCycle};
use crate::error::{Error, Result};
use crate::frame::{build_frame, MovingFrame};
use crate::localqp::{LocalModel, Tube};
use crate::riccati::{reduced_coefficients, solve_prde, PeriodicMatrixFunction, PrdeCoefficients, PrdeOptions};
use crate::systems::SystemSpec;

/// Everything the local quadratic model needs, computed once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stages {
    pub cycle: LimitCycle,
    pub frame: MovingFrame,
    pub coeffs: PrdeCoefficients,
    pub g: PeriodicMatrixFunction,
}

impl Stages {
    pub fn model(&self, tube: Tube) -> Result<LocalModel> {
        LocalModel::new(self.cycle.clone(), self.frame.clone(), self.g.clone(), tube)
    }
}

/// Cycle of a builtin, seeded from its catalogued basin point.
pub fn builtin_cycle(spec: &SystemSpec, basin: &[f64], opts: &CycleOptions) -> Result<LimitCycle> {
    if basin.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: basin.len() });
    }
    locate_cycle(spec, basin, opts)
}

/// Frame, reduced coefficients and periodic Riccati solution on a known cycle.
pub fn local_stages(spec: &SystemSpec, cycle: LimitCycle, prde: &PrdeOptions) -> Result<Stages> {
    let frame = build_frame(spec, &cycle)?;
    let coeffs = reduced_coefficients(spec, &cycle, &frame)?;
    let g = solve_prde(&coeffs, prde)?;
    Ok(Stages { cycle, frame, coeffs, g })
}

/// Runs every stage from a basin point.
pub fn run_stages(spec: &SystemSpec, basin: &[f64], cycle_opts: &CycleOptions, prde: &PrdeOptions) -> Result<Stages> {
    let cycle = builtin_cycle(spec, basin, cycle_opts)?;
    local_stages(spec, cycle, prde)
}
