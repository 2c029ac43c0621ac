//! Bundled scenarios: default configs plus initial and boundary data.
//!
//! Initial data is given in coordinates scaled to the unit box (`x / Lx`,
//! `y / Ly`), except `taylor-green`, which uses physical coordinates, so a
//! preset can be sampled on any grid of the matching shape.

use std::f64::consts::PI;

use nematic_core::grid::{BcMode, BoundaryData, DirectorField, Grid, VelocityField};

use crate::config::{BcSpec, DtSpec, GridSpec, InitialSpec, LinearSpec, ParamsSpec, PotentialSpec, SimConfig};

pub const NAMES: [&str; 5] = ["cavity", "taylor-green", "kink", "convex", "freeslip-box"];

pub fn check_name(name: &str) -> Result<(), String> {
    if NAMES.contains(&name) {
        Ok(())
    } else {
        Err(format!("unknown preset `{name}`, expected one of {}", NAMES.join(", ")))
    }
}

/// Initial velocity, initial director and (Dirichlet only) director trace.
#[derive(Debug, Clone)]
pub struct PresetData {
    pub v0: VelocityField,
    pub d0: DirectorField,
    pub trace: Option<BoundaryData>,
}

fn base(nx: usize, ny: usize, lx: f64, ly: f64, bc: BcSpec, potential: PotentialSpec, name: &str) -> SimConfig {
    SimConfig {
        grid: GridSpec { nx, ny, lx, ly },
        bc_mode: bc,
        params: ParamsSpec::default(),
        potential,
        m: 2,
        initial: InitialSpec::Preset(name.into()),
        boundary: None,
        dt: DtSpec::Fixed { value: 1e-3 },
        t_max: 1.0,
        residual_target: None,
        max_steps: None,
        record_interval: 1,
        output_dir: None,
        seed_label: Some(name.into()),
        linear: LinearSpec::default(),
    }
}

/// Default configuration of a preset.
pub fn config(name: &str) -> Result<SimConfig, String> {
    check_name(name)?;
    let c = match name {
        "cavity" => SimConfig {
            dt: DtSpec::Adaptive { cap: 1e-2 },
            t_max: 50.0,
            residual_target: Some(1e-6),
            ..base(64, 64, 1.0, 1.0, BcSpec::Dirichlet, PotentialSpec::Gl { eta: 0.25 }, name)
        },
        "taylor-green" => SimConfig {
            params: ParamsSpec { nu: 0.1, lambda: 0.0, gamma: 1.0 },
            ..base(64, 64, 2.0 * PI, 2.0 * PI, BcSpec::Periodic, PotentialSpec::Gl { eta: 0.25 }, name)
        },
        "kink" => SimConfig {
            dt: DtSpec::Adaptive { cap: 1e-2 },
            t_max: 5.0,
            record_interval: 10,
            ..base(64, 16, 2.0, 0.5, BcSpec::Dirichlet, PotentialSpec::Gl { eta: 0.2 }, name)
        },
        "convex" => SimConfig {
            t_max: 5.0,
            residual_target: Some(1e-8),
            ..base(32, 32, 1.0, 1.0, BcSpec::Dirichlet, PotentialSpec::Quadratic { kappa: 1.0 }, name)
        },
        "freeslip-box" => base(64, 64, 1.0, 1.0, BcSpec::FreeSlip, PotentialSpec::Gl { eta: 0.25 }, name),
        _ => unreachable!(),
    };
    Ok(c)
}

fn pad(mut d: Vec<f64>, m: usize) -> Vec<f64> {
    d.resize(m, 0.0);
    d
}

fn angle(t: f64, m: usize) -> Vec<f64> {
    pad(vec![t.cos(), t.sin()], m)
}

fn bump(x: f64) -> f64 {
    let s = (PI * x).sin();
    s * s
}

/// Samples the preset on `grid` with `m` director components. The grid's
/// boundary mode need not match the preset's; traces are only produced for
/// Dirichlet grids.
pub fn initial_data(name: &str, grid: &Grid, m: usize) -> Result<PresetData, String> {
    check_name(name)?;
    let (lx, ly) = (grid.lx(), grid.ly());
    let dirichlet = grid.bc() == BcMode::Dirichlet;
    let unit = move |x: f64, y: f64| (x / lx, y / ly);
    let data = match name {
        "cavity" => {
            let theta_b = |x: f64, y: f64| 0.25 * PI * (x + y);
            let d0 = DirectorField::from_fn(grid, m, |x, y| {
                let (x, y) = unit(x, y);
                angle(theta_b(x, y) + 0.5 * (PI * x).sin() * (2.0 * PI * y).sin(), m)
            });
            let trace = dirichlet.then(|| {
                BoundaryData::from_fn(grid, m, |x, y| {
                    let (x, y) = unit(x, y);
                    angle(theta_b(x, y), m)
                })
            });
            let v0 = VelocityField::from_stream_function(grid, |x, y| {
                let (x, y) = unit(x, y);
                0.1 * bump(x) * bump(y)
            });
            PresetData { v0, d0, trace }
        }
        "taylor-green" => {
            let v0 = VelocityField::from_fn(grid, |x, y| x.sin() * y.cos(), |x, y| -x.cos() * y.sin());
            let d0 = DirectorField::constant(grid, &pad(vec![1.0, 0.0], m));
            let trace = dirichlet.then(|| BoundaryData::constant(grid, &pad(vec![1.0, 0.0], m)));
            PresetData { v0, d0, trace }
        }
        "kink" => {
            let eta = 0.2;
            let profile = move |x: f64| kink(x - 0.5 * lx, eta);
            let d0 = DirectorField::from_fn(grid, m, |x, y| {
                let (xs, ys) = unit(x, y);
                let pert = 0.1 * (PI * xs).sin() * (PI * ys).sin();
                pad(vec![profile(x) * 0.95, pert], m)
            });
            let trace = dirichlet.then(|| BoundaryData::from_fn(grid, m, |x, _| pad(vec![0.95 * profile(x), 0.0], m)));
            PresetData { v0: VelocityField::zeros(grid), d0, trace }
        }
        "convex" => {
            let d0 = DirectorField::from_fn(grid, m, |x, y| {
                let (x, y) = unit(x, y);
                pad(vec![(PI * x).sin() * (PI * y).sin(), 0.5 * (2.0 * PI * x).sin() * (PI * y).sin()], m)
            });
            let trace = dirichlet.then(|| BoundaryData::constant(grid, &vec![0.0; m]));
            let v0 = VelocityField::from_stream_function(grid, |x, y| {
                let (x, y) = unit(x, y);
                0.05 * bump(x) * bump(y)
            });
            PresetData { v0, d0, trace }
        }
        "freeslip-box" => {
            let d0 = DirectorField::from_fn(grid, m, |x, y| {
                let (x, y) = unit(x, y);
                angle(0.5 * (PI * x).cos() * (PI * y).cos(), m)
            });
            let trace = dirichlet.then(|| BoundaryData::from_fn(grid, m, |x, y| {
                let (x, y) = unit(x, y);
                angle(0.5 * (PI * x).cos() * (PI * y).cos(), m)
            }));
            let v0 = VelocityField::from_stream_function(grid, |x, y| {
                let (x, y) = unit(x, y);
                0.1 * (PI * x).sin() * (PI * y).sin()
            });
            PresetData { v0, d0, trace }
        }
        _ => unreachable!(),
    };
    Ok(data)
}

/// One-dimensional Ginzburg-Landau kink `tanh(x / (sqrt 2 eta))`.
fn kink(x: f64, eta: f64) -> f64 {
    (x / (std::f64::consts::SQRT_2 * eta)).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_config_validates() {
        for name in NAMES {
            let c = config(name).unwrap();
            c.validate().unwrap();
            let g = c.grid();
            let data = initial_data(name, &g, c.m).unwrap();
            assert_eq!(data.trace.is_some(), g.bc() == BcMode::Dirichlet, "{name}");
        }
        assert!(config("nope").is_err());
    }

    #[test]
    fn cavity_initial_director_matches_trace_on_boundary() {
        let g = Grid::unit_square(16, BcMode::Dirichlet).unwrap();
        let mut data = initial_data("cavity", &g, 2).unwrap();
        data.d0.apply_bc(data.trace.as_ref()).unwrap();
        // perturbation vanishes at the walls: ghost/interior average equals the trace
        let t = data.trace.as_ref().unwrap();
        let c = data.d0.comp(0);
        for j in 0..16 {
            let avg = 0.5 * (c.get(-1, j) + c.get(0, j));
            assert!((avg - t.value(nematic_core::grid::Side::Left, j as usize, 0)).abs() < 1e-14);
        }
    }
}
