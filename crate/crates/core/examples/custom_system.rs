//! A user-defined planar field: a Hopf normal form with speed-dependent
//! rotation, passed through the whole local pipeline.

use nalgebra::DMatrix;
use qpath::cycle::{locate_cycle, CycleOptions};
use qpath::pipeline::local_stages;
use qpath::riccati::PrdeOptions;
use qpath::systems::{SystemSpec, VectorField};

struct Twisted {
    omega: f64,
    shear: f64,
}

impl VectorField for Twisted {
    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let w = self.omega + self.shear * (1.0 - r2);
        out[0] = x[0] * (1.0 - r2) - w * x[1];
        out[1] = x[1] * (1.0 - r2) + w * x[0];
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5])
    }
}

fn main() -> qpath::Result<()> {
    let spec = SystemSpec::new("twisted", Twisted { omega: 1.0, shear: 0.8 });
    let cycle = locate_cycle(&spec, &[0.5, 0.0], &CycleOptions::default())?;
    println!("period {:.6} (unit circle, expected {:.6})", cycle.period(), 2.0 * std::f64::consts::PI);
    let stages = local_stages(&spec, cycle, &PrdeOptions::default())?;
    let g: Vec<f64> = (0..8).map(|k| stages.g.eval(k as f64 * stages.g.period() / 8.0)[(0, 0)]).collect();
    println!("G at eight phases: {g:.4?}");
    Ok(())
}
