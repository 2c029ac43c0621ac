//! Turning a [`SimConfig`] into a ready-to-run simulator and initial state.

use std::path::{Path, PathBuf};

use thiserror::Error;

use nematic_core::grid::{BcMode, BoundaryData, DirectorField};
use nematic_core::simulator::{RunFailure, RunOutcome, SimError, SimState, Simulator};

use crate::config::{BoundarySpec, InitialSpec, SimConfig};
use crate::io::{snapshot_read_raw, SnapshotError};
use crate::presets;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Preset(String),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Resolves `path` against `base` unless it is absolute.
pub fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path.to_path_buf(),
    }
}

/// Director trace implied by the config: the explicit `boundary` entry, or
/// else the trace of the initial preset. `None` outside Dirichlet mode.
pub fn trace(cfg: &SimConfig) -> Result<Option<BoundaryData>, ScenarioError> {
    let grid = cfg.grid();
    if grid.bc() != BcMode::Dirichlet {
        return Ok(None);
    }
    let name = match (&cfg.boundary, &cfg.initial) {
        (Some(BoundarySpec::Constant(v)), _) => return Ok(Some(BoundaryData::constant(&grid, v))),
        (Some(BoundarySpec::Preset(name)), _) | (None, InitialSpec::Preset(name)) => name,
        (None, InitialSpec::Snapshot(_)) => unreachable!("rejected by validation"),
    };
    Ok(presets::initial_data(name, &grid, cfg.m).map_err(ScenarioError::Preset)?.trace)
}

/// Reads a snapshot and checks it against the configured grid.
pub fn load_snapshot(cfg: &SimConfig, path: &Path, trace: Option<&BoundaryData>) -> Result<SimState, ScenarioError> {
    let snap = snapshot_read_raw(path)?;
    let g = cfg.grid();
    let same = snap.nx == g.nx()
        && snap.ny == g.ny()
        && snap.m == cfg.m
        && snap.lx == g.lx()
        && snap.ly == g.ly()
        && snap.bc == g.bc();
    if !same {
        return Err(SnapshotError::GridMismatch {
            expected: format!("{}x{} m={} [{}x{}] {}", g.nx(), g.ny(), cfg.m, g.lx(), g.ly(), g.bc().name()),
            found: format!("{}x{} m={} [{}x{}] {}", snap.nx, snap.ny, snap.m, snap.lx, snap.ly, snap.bc.name()),
        }
        .into());
    }
    Ok(snap.to_state(trace)?)
}

/// Director seed for a steady solve: a preset name or a snapshot path.
pub fn seed_director(cfg: &SimConfig, seed: &str, base: Option<&Path>) -> Result<DirectorField, ScenarioError> {
    if presets::NAMES.contains(&seed) {
        return Ok(presets::initial_data(seed, &cfg.grid(), cfg.m).map_err(ScenarioError::Preset)?.d0);
    }
    let t = trace(cfg)?;
    Ok(load_snapshot(cfg, &resolve(base, Path::new(seed)), t.as_ref())?.director)
}

/// Simulator and initial state of a config. Relative snapshot paths are
/// taken relative to `base`.
pub fn prepare(cfg: &SimConfig, base: Option<&Path>) -> Result<(Simulator, SimState), ScenarioError> {
    let grid = cfg.grid();
    let trace = trace(cfg)?;
    let sim = Simulator::new(&grid, cfg.params(), trace.clone(), cfg.linear())?;
    let state = match &cfg.initial {
        InitialSpec::Preset(name) => {
            let data = presets::initial_data(name, &grid, cfg.m).map_err(ScenarioError::Preset)?;
            sim.initial_state(&data.v0, data.d0, 0.0)?
        }
        InitialSpec::Snapshot(path) => load_snapshot(cfg, &resolve(base, path), trace.as_ref())?,
    };
    Ok((sim, state))
}

/// Runs a config end to end.
pub fn simulate(cfg: &SimConfig, base: Option<&Path>) -> Result<(Simulator, Result<RunOutcome, Box<RunFailure>>), ScenarioError> {
    let (sim, state) = prepare(cfg, base)?;
    let out = sim.run(state, &cfg.run_config());
    Ok((sim, out))
}
