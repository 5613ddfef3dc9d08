//! Run configuration shared by the command line and the library entry points.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cycle::CycleOptions;
use crate::error::{Error, Result};
use crate::gmam::GmamOptions;
use crate::riccati::PrdeOptions;
use crate::systems::{BuiltinCatalog, DiffusionCase, SystemSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Builtin system selection: `{ "system": "<name>", "params": {...}, "diffusion_case": "i|ii|iii" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub system: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub diffusion_case: DiffusionCase,
    /// Seed of the cycle search; the catalogued basin point when absent.
    pub basin: Option<Vec<f64>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            system: "hopf".into(),
            params: BTreeMap::new(),
            diffusion_case: DiffusionCase::Isotropic,
            basin: None,
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<SystemSpec> {
        BuiltinCatalog::build(&self.system, &self.params, self.diffusion_case)
    }

    pub fn basin_point(&self) -> Result<Vec<f64>> {
        match &self.basin {
            Some(b) => Ok(b.clone()),
            None => BuiltinCatalog::basin_point(&self.system).ok_or_else(|| Error::UnknownSystem(self.system.clone())),
        }
    }
}

/// Which pipeline stages to run; upstream stages run implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StageFlags {
    pub cycle: bool,
    pub frame: bool,
    pub riccati: bool,
    pub shoot: bool,
    pub map: bool,
    pub study: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericConfig {
    /// Path points of the gMAM solve.
    pub n: usize,
    /// Tube radius of the gMAM solve; `kappa / n` when absent.
    pub h: Option<f64>,
    /// `h = kappa / N`; half the cycle arclength when absent.
    pub kappa: Option<f64>,
    /// Cycle samples per period.
    pub samples: usize,
    /// Overrides the cycle Newton and Riccati fixed-point tolerances.
    pub tol: Option<f64>,
    /// Initial scalar of the Riccati iteration.
    pub c0: Option<f64>,
    /// End point of escape paths.
    pub x_end: Option<Vec<f64>>,
    /// Path sizes of the convergence study.
    pub study_ns: Vec<usize>,
    /// Also solve the cycle-attached variant at `n`, warm-started from the tube solution.
    pub compare_lc: bool,
    /// Randomly bent extra starts of the gMAM solve.
    pub multistart: usize,
    /// Tube phases of the shooting scan.
    pub shots: usize,
    pub t_max: f64,
    /// Shooting radius; a thousandth of the mean cycle radius when absent.
    pub shoot_radius: Option<f64>,
    /// Level of the exported tube surface `Q = delta`; a radius tube of the shooting radius when absent.
    pub tube_level: Option<f64>,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            n: 160,
            h: None,
            kappa: None,
            samples: 512,
            tol: None,
            c0: None,
            x_end: None,
            study_ns: vec![40, 80, 160],
            compare_lc: false,
            multistart: 0,
            shots: 16,
            t_max: 30.0,
            shoot_radius: None,
            tube_level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemConfig,
    pub stages: StageFlags,
    pub numeric: NumericConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system: SystemConfig::default(),
            stages: StageFlags::default(),
            numeric: NumericConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported config schema version {}", cfg.schema_version)));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn cycle_options(&self) -> CycleOptions {
        let mut o = CycleOptions {
            samples: self.numeric.samples,
            ..CycleOptions::default()
        };
        if let Some(t) = self.numeric.tol {
            o.tol = t;
        }
        o
    }

    pub fn prde_options(&self) -> PrdeOptions {
        let mut o = PrdeOptions {
            c0: self.numeric.c0,
            ..PrdeOptions::default()
        };
        if let Some(t) = self.numeric.tol {
            o.tol = t;
        }
        o
    }

    pub fn gmam_options(&self) -> GmamOptions {
        GmamOptions::default()
    }

    /// Configuration reproducing one of the named demo cases.
    pub fn demo(name: &str) -> Option<Self> {
        let mut cfg = RunConfig::default();
        let all = StageFlags {
            cycle: true,
            frame: true,
            riccati: true,
            shoot: true,
            map: true,
            study: true,
        };
        let local = StageFlags {
            cycle: true,
            frame: true,
            riccati: true,
            ..StageFlags::default()
        };
        let (system, case, stages, x_end) = match name {
            "vdp-i" => ("vdp", DiffusionCase::Isotropic, all, Some(vec![2.0, -2.5])),
            "vdp-ii" => ("vdp", DiffusionCase::Degenerate, StageFlags { shoot: true, map: true, ..local }, None),
            "vdp-iii" => ("vdp", DiffusionCase::Discontinuous, local, None),
            "twolc" => ("twolc", DiffusionCase::Isotropic, StageFlags { study: true, ..local }, Some(vec![-0.9, 0.6942])),
            "lv3d" => ("lv3d", DiffusionCase::Isotropic, StageFlags { map: true, ..local }, None),
            "net5d" => ("net5d", DiffusionCase::Isotropic, local, None),
            "hopf" => ("hopf", DiffusionCase::Isotropic, all, Some(vec![1.5, 0.0])),
            _ => return None,
        };
        cfg.system.system = system.into();
        cfg.system.diffusion_case = case;
        cfg.stages = stages;
        cfg.numeric.x_end = x_end;
        cfg.out = PathBuf::from(format!("out/{name}"));
        match name {
            "twolc" => cfg.numeric.study_ns = vec![20, 40, 80, 160],
            "lv3d" => cfg.numeric.tube_level = Some(2e-5),
            _ => {}
        }
        Some(cfg)
    }
}

pub const DEMOS: [&str; 7] = ["vdp-i", "vdp-ii", "vdp-iii", "twolc", "lv3d", "net5d", "hopf"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        for name in DEMOS {
            let cfg = RunConfig::demo(name).unwrap();
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{ "system": { "system": "vdp", "diffusion_case": "ii" }, "seed": 3 }"#).unwrap();
        assert_eq!(cfg.system.diffusion_case, DiffusionCase::Degenerate);
        assert_eq!(cfg.numeric.n, 160);
        assert_eq!(cfg.seed, 3);
    }
}
