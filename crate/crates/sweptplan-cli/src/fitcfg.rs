//! Configuration schema for the swept-radius fitter.
//!
//! A config picks a sample source (the car's fine-flow simulation or a
//! synthetic polynomial used for recovery checks), the sampling grids, the
//! polynomial degree, and an optional held-out validation pass.

use serde::{Deserialize, Serialize};
use sweptplan_core::sweptfit::{linspace, RadiusSample, SamplingConfig, SweptFitError};
use sweptplan_core::{CarInput, CarParams, ConvexShape, Vec2};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub source: FitSource,
    /// Vehicle body; the sampler requires a polytope.
    #[serde(default = "default_body")]
    pub body: ConvexShape,
    #[serde(default)]
    pub car: CarParams,
    /// Interval length the radii are measured over [s].
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Fine-flow substeps per interval.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    pub v: GridRange,
    pub delta: GridRange,
    /// Acceleration values sampled per (v, delta) cell [m/s^2].
    #[serde(default = "default_a_grid")]
    pub a: Vec<f64>,
    /// Steering-rate values sampled per cell [rad/s].
    #[serde(default = "default_s_grid")]
    pub s: Vec<f64>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub holdout: Option<HoldoutSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSource {
    /// Measure radii by simulating the car over every grid cell.
    #[default]
    Car,
    /// Radii drawn from `v^2 delta^2`, exactly representable at degree 4.
    SyntheticV2Delta2,
}

/// Uniform grid over a closed interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridRange {
    pub fn to_grid(self) -> Vec<f64> {
        linspace(self.min, self.max, self.count)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HoldoutSpec {
    /// Random validation samples to draw.
    pub n: usize,
    pub seed: u64,
    /// Allowed upper-bound shortfall per sample [m].
    pub tol: f64,
}

fn default_body() -> ConvexShape {
    ConvexShape::polytope(vec![
        Vec2::new(2.5, 1.0),
        Vec2::new(-2.5, 1.0),
        Vec2::new(-2.5, -1.0),
        Vec2::new(2.5, -1.0),
    ])
    .expect("car body is a valid polytope")
}

fn default_dt() -> f64 {
    10.0 / 13.0
}

fn default_substeps() -> usize {
    100
}

fn default_a_grid() -> Vec<f64> {
    vec![-4.0, 0.0, 4.0]
}

fn default_s_grid() -> Vec<f64> {
    vec![-0.6, 0.0, 0.6]
}

fn default_degree() -> usize {
    8
}

impl FitConfig {
    pub fn to_sampling(&self) -> SamplingConfig {
        SamplingConfig {
            body: self.body.clone(),
            car: self.car,
            dt: self.dt,
            substeps: self.substeps,
            v_grid: self.v.to_grid(),
            delta_grid: self.delta.to_grid(),
            a_grid: self.a.clone(),
            s_grid: self.s.clone(),
        }
    }

    /// Synthetic `v^2 delta^2` samples over the configured (v, delta) grid.
    pub fn synthetic_samples(&self) -> Result<Vec<RadiusSample>, SweptFitError> {
        let v_grid = self.v.to_grid();
        let delta_grid = self.delta.to_grid();
        if v_grid.is_empty() || delta_grid.is_empty() {
            return Err(SweptFitError::EmptyGrid);
        }
        let mut samples = Vec::with_capacity(v_grid.len() * delta_grid.len());
        for &v in &v_grid {
            for &delta in &delta_grid {
                samples.push(RadiusSample {
                    v,
                    delta,
                    input: CarInput::ZERO,
                    radius: v * v * delta * delta,
                });
            }
        }
        Ok(samples)
    }
}
