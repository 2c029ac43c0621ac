//! Coupled time loop, per-step diagnostics and the discrete energy audit.

use log::{debug, warn};
use thiserror::Error;

use crate::director::{DirectorError, DirectorSolver};
use crate::flow::{divergence_linf, FlowError, FlowSolver, FlowState};
use crate::grid::{BcError, BoundaryData, DirectorField, Grid, Norms, ScalarField, VelocityField};
use crate::linsolve::LinearSolveConfig;
use crate::material::{chemical_potential, elastic_force_from_mu, potential_integral, ParamError, Params};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Director(#[from] DirectorError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("boundary data: {0}")]
    Boundary(String),
    #[error("non-finite state at step {step}, t = {t}")]
    NonFinite { step: usize, t: f64 },
    #[error("energy increased from {before:.6e} to {after:.6e} at step {step} after {halvings} step halvings")]
    EnergyIncrease { step: usize, before: f64, after: f64, halvings: usize },
    #[error("invalid run settings: {0}")]
    Settings(String),
}

impl From<ParamError> for SimError {
    fn from(e: ParamError) -> Self {
        SimError::Params(e.to_string())
    }
}

impl From<BcError> for SimError {
    fn from(e: BcError) -> Self {
        SimError::Boundary(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub flow: FlowState,
    pub director: DirectorField,
}

impl SimState {
    pub fn grid(&self) -> &Grid {
        self.director.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.flow.v.is_finite() && self.flow.p.is_finite() && self.director.is_finite()
    }
}

/// Diagnostics of one state. Column order matches the records CSV.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub potential: f64,
    pub total: f64,
    pub dissip_visc: f64,
    pub dissip_dir: f64,
    pub a: f64,
    pub v_h1: f64,
    pub residual_l2: f64,
    pub div_inf: f64,
}

impl EnergyRecord {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "kinetic",
        "elastic",
        "potential",
        "total",
        "dissip_visc",
        "dissip_dir",
        "A",
        "v_H1",
        "residual_L2",
        "div_inf",
    ];

    pub fn to_array(&self) -> [f64; 11] {
        [
            self.t,
            self.kinetic,
            self.elastic,
            self.potential,
            self.total,
            self.dissip_visc,
            self.dissip_dir,
            self.a,
            self.v_h1,
            self.residual_l2,
            self.div_inf,
        ]
    }

    pub fn from_array(a: [f64; 11]) -> Self {
        Self {
            t: a[0],
            kinetic: a[1],
            elastic: a[2],
            potential: a[3],
            total: a[4],
            dissip_visc: a[5],
            dissip_dir: a[6],
            a: a[7],
            v_h1: a[8],
            residual_l2: a[9],
            div_inf: a[10],
        }
    }

    /// Total dissipation rate `nu |grad v|^2 + lambda gamma |mu|^2`.
    pub fn dissipation(&self) -> f64 {
        self.dissip_visc + self.dissip_dir
    }

    /// The quantity driven to zero: `|v|_{H1} + |-lap d + f(d)|`.
    pub fn convergence_measure(&self) -> f64 {
        self.v_h1 + self.residual_l2
    }
}

/// Termination bounds; a run stops at whichever is met first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCriteria {
    pub t_max: f64,
    pub residual_target: Option<f64>,
    pub max_steps: Option<usize>,
}

impl StoppingCriteria {
    pub fn until(t_max: f64) -> Self {
        Self { t_max, residual_target: None, max_steps: None }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.t_max.is_nan() || self.t_max < 0.0 {
            return Err(SimError::Settings(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        if let Some(r) = self.residual_target {
            if !(r.is_finite() && r > 0.0) {
                return Err(SimError::Settings(format!("residual_target must be > 0, got {r}")));
            }
        }
        if self.t_max.is_infinite() && self.residual_target.is_none() && self.max_steps.is_none() {
            return Err(SimError::Settings("at least one stopping bound must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// Stability bound, never above `cap`.
    Adaptive { cap: f64 },
}

impl DtPolicy {
    fn validate(&self) -> Result<(), SimError> {
        let v = match *self {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Adaptive { cap } => cap,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(SimError::Settings(format!("time step must be finite and > 0, got {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub dt: DtPolicy,
    pub stopping: StoppingCriteria,
    pub record_interval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TMax,
    ResidualTarget,
    MaxSteps,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::TMax => "t_max",
            Termination::ResidualTarget => "residual_target",
            Termination::MaxSteps => "max_steps",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<EnergyRecord>,
    pub final_state: SimState,
    pub termination: Termination,
    pub steps: usize,
    /// Number of times the step size was halved after an energy increase.
    pub halvings: usize,
}

/// A run that stopped on an error, with everything computed before it.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: SimError,
    pub records: Vec<EnergyRecord>,
    pub last_state: SimState,
    pub steps: usize,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} steps at t = {}: {}", self.steps, self.last_state.t, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Extra forcing added to the momentum and director equations, evaluated at
/// the new time level.
pub trait SourceTerms {
    fn momentum(&self, grid: &Grid, t: f64) -> VelocityField;
    fn director(&self, grid: &Grid, m: usize, t: f64) -> DirectorField;
}

/// Relative energy rise in one step that triggers a retry with half the step.
pub const ENERGY_RISE_TOL: f64 = 1e-6;
/// Retries allowed per step before the run is aborted.
pub const MAX_HALVINGS: usize = 5;

/// Grid, parameters, boundary trace and the factorised solvers of a run.
#[derive(Debug, Clone)]
pub struct Simulator {
    grid: Grid,
    params: Params,
    trace: Option<BoundaryData>,
    flow: FlowSolver,
    director: DirectorSolver,
}

impl Simulator {
    pub fn new(
        grid: &Grid,
        params: Params,
        trace: Option<BoundaryData>,
        linear: LinearSolveConfig,
    ) -> Result<Self, SimError> {
        params.validate()?;
        linear.validate().map_err(SimError::Settings)?;
        // validate trace against the mode with a throwaway field
        let mut probe = DirectorField::zeros(grid, trace.as_ref().map_or(2, |t| t.m()));
        probe.apply_bc(trace.as_ref())?;
        Ok(Self {
            grid: *grid,
            params,
            trace,
            flow: FlowSolver::new(grid, linear),
            director: DirectorSolver::new(grid, linear),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn params(&self) -> &Params {
        &self.params
    }
    pub fn trace(&self) -> Option<&BoundaryData> {
        self.trace.as_ref()
    }
    pub fn flow_solver(&self) -> &FlowSolver {
        &self.flow
    }
    pub fn director_solver(&self) -> &DirectorSolver {
        &self.director
    }

    /// Projects `v0` onto discretely divergence-free fields and fills the
    /// director ghosts.
    pub fn initial_state(&self, v0: &VelocityField, mut d0: DirectorField, t0: f64) -> Result<SimState, SimError> {
        d0.apply_bc(self.trace.as_ref())?;
        let v = self.flow.project(v0)?;
        Ok(SimState { t: t0, flow: FlowState { v, p: ScalarField::zeros(&self.grid) }, director: d0 })
    }

    pub fn record(&self, state: &SimState) -> EnergyRecord {
        let p = &self.params;
        let d = &state.director;
        let v = &state.flow.v;
        let kinetic = 0.5 * v.inner(v);
        let elastic = 0.5 * p.lambda * d.h1_semi_sq();
        let potential = p.lambda * potential_integral(d, &p.potential);
        let mu = chemical_potential(d, &p.potential);
        let mu_sq = mu.inner(&mu);
        let grad_v_sq = v.h1_semi_sq();
        EnergyRecord {
            t: state.t,
            kinetic,
            elastic,
            potential,
            total: kinetic + elastic + potential,
            dissip_visc: p.nu * grad_v_sq,
            dissip_dir: p.lambda * p.gamma * mu_sq,
            a: grad_v_sq + mu_sq,
            v_h1: (v.inner(v) + grad_v_sq).sqrt(),
            residual_l2: mu_sq.sqrt(),
            div_inf: divergence_linf(v),
        }
    }

    /// Total energy only (cheaper than a full record).
    pub fn total_energy(&self, state: &SimState) -> f64 {
        let p = &self.params;
        let v = &state.flow.v;
        0.5 * v.inner(v)
            + p.lambda * (0.5 * state.director.h1_semi_sq() + potential_integral(&state.director, &p.potential))
    }

    /// `min(0.5 h / max|v|, reaction bound, cap)`.
    pub fn stability_dt(&self, state: &SimState, cap: f64) -> f64 {
        stability_dt(&state.flow.v, &self.params, &self.grid, cap)
    }

    /// Director first with the old velocity, then the elastic force of the new
    /// director drives the flow step.
    pub fn coupled_step(
        &self,
        state: &SimState,
        dt: f64,
        sources: Option<&dyn SourceTerms>,
    ) -> Result<SimState, SimError> {
        let t1 = state.t + dt;
        let d_src = sources.map(|s| s.director(&self.grid, state.director.m(), t1));
        let d1 = self.director.director_step(
            &state.director,
            self.trace.as_ref(),
            &state.flow.v,
            dt,
            &self.params,
            d_src.as_ref(),
        )?;
        let mu = chemical_potential(&d1, &self.params.potential);
        let mut forcing = elastic_force_from_mu(&d1, &mu, self.params.lambda);
        if let Some(s) = sources {
            forcing.axpy(1.0, &s.momentum(&self.grid, t1));
        }
        let flow = self.flow.flow_step(&state.flow, &forcing, dt, &self.params)?;
        Ok(SimState { t: t1, flow, director: d1 })
    }

    /// Runs from `state` until a stopping criterion is met.
    pub fn run(&self, state: SimState, cfg: &RunConfig) -> Result<RunOutcome, Box<RunFailure>> {
        let fail = |error: SimError, records: Vec<EnergyRecord>, last_state: SimState, steps: usize| {
            Box::new(RunFailure { error, records, last_state, steps })
        };
        if let Err(e) = cfg.stopping.validate().and_then(|_| cfg.dt.validate()) {
            return Err(fail(e, vec![], state, 0));
        }
        if cfg.record_interval == 0 {
            return Err(fail(SimError::Settings("record_interval must be >= 1".into()), vec![], state, 0));
        }
        let stop = &cfg.stopping;
        let t_end = state.t + stop.t_max;
        let mut state = state;
        let mut rec = self.record(&state);
        let mut records = vec![rec];
        let mut steps = 0usize;
        let mut halvings = 0usize;
        // persistent reduction after energy-increase retries
        let mut scale = 1.0;
        let termination = loop {
            if let Some(target) = stop.residual_target {
                if rec.convergence_measure() <= target {
                    break Termination::ResidualTarget;
                }
            }
            let remaining = t_end - state.t;
            if remaining <= 1e-12 * t_end.abs().max(1.0) {
                break Termination::TMax;
            }
            if stop.max_steps.is_some_and(|m| steps >= m) {
                break Termination::MaxSteps;
            }
            let base = match cfg.dt {
                DtPolicy::Fixed(dt) => dt,
                DtPolicy::Adaptive { cap } => self.stability_dt(&state, cap),
            };
            let mut dt = base * scale;
            // land exactly on t_max, absorbing a sliver instead of taking it separately
            if dt >= remaining * (1.0 - 1e-9) {
                dt = remaining;
            }
            let mut tries = 0;
            let next = loop {
                let next = match self.coupled_step(&state, dt, None) {
                    Ok(s) => s,
                    Err(e) => return Err(fail(e, records, state, steps)),
                };
                if !next.is_finite() {
                    let err = SimError::NonFinite { step: steps + 1, t: next.t };
                    return Err(fail(err, records, state, steps));
                }
                let before = rec.total;
                let after = self.total_energy(&next);
                if after.is_nan() {
                    let err = SimError::NonFinite { step: steps + 1, t: next.t };
                    return Err(fail(err, records, state, steps));
                }
                if after - before <= ENERGY_RISE_TOL * before.abs() {
                    break next;
                }
                if tries == MAX_HALVINGS {
                    let err = SimError::EnergyIncrease { step: steps + 1, before, after, halvings: tries };
                    return Err(fail(err, records, state, steps));
                }
                tries += 1;
                halvings += 1;
                scale *= 0.5;
                dt *= 0.5;
                warn!("energy rose {before:.6e} -> {after:.6e} at t = {}; retrying with dt = {dt:.3e}", state.t);
            };
            state = next;
            steps += 1;
            rec = self.record(&state);
            let at_end = t_end - state.t <= 1e-12 * t_end.abs().max(1.0)
                || stop.residual_target.is_some_and(|r| rec.convergence_measure() <= r)
                || stop.max_steps.is_some_and(|m| steps >= m);
            if steps % cfg.record_interval == 0 || at_end {
                records.push(rec);
            }
            if steps % 1000 == 0 {
                debug!("step {steps}, t = {:.4}, energy {:.6e}, measure {:.3e}", state.t, rec.total, rec.convergence_measure());
            }
        };
        Ok(RunOutcome { records, final_state: state, termination, steps, halvings })
    }
}

/// `min(0.5 h_min / max|v|, potential reaction bound, cap)`; the advective
/// bound is skipped for a fluid at rest.
pub fn stability_dt(v: &VelocityField, params: &Params, grid: &Grid, cap: f64) -> f64 {
    let vmax = v.max_abs();
    let mut dt = cap.min(params.potential.reaction_dt_bound(params.gamma));
    if vmax > 0.0 {
        dt = dt.min(0.5 * grid.h_min() / vmax);
    }
    dt
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("audit needs at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("record spacing is not uniform (interval {index} has dt = {dt:e}, expected {expected:e})")]
    NonUniform { index: usize, dt: f64, expected: f64 },
}

/// Discrete check of `dE/dt + D = 0` over consecutive records.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub dt: f64,
    /// `(E_{k+1} - E_k)/dt + D_{k+1}` per interval.
    pub residuals: Vec<f64>,
    /// `sum dt |r_k|`
    pub integrated: f64,
    pub max_abs: f64,
    /// `E_0 - E_last`
    pub energy_drop: f64,
    /// `integrated / energy_drop`
    pub relative: f64,
}

/// Audits a record series taken at every step of a uniform-step run.
pub fn energy_audit(records: &[EnergyRecord]) -> Result<AuditReport, AuditError> {
    if records.len() < 2 {
        return Err(AuditError::TooFewRecords(records.len()));
    }
    let dt = records[1].t - records[0].t;
    for (k, w) in records.windows(2).enumerate() {
        let h = w[1].t - w[0].t;
        if !(dt > 0.0) || (h - dt).abs() > 1e-6 * dt {
            return Err(AuditError::NonUniform { index: k, dt: h, expected: dt });
        }
    }
    let residuals: Vec<f64> = records
        .windows(2)
        .map(|w| (w[1].total - w[0].total) / (w[1].t - w[0].t) + w[1].dissipation())
        .collect();
    let integrated: f64 = records.windows(2).zip(&residuals).map(|(w, r)| (w[1].t - w[0].t) * r.abs()).sum();
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let energy_drop = records[0].total - records[records.len() - 1].total;
    let relative = if energy_drop > 0.0 { integrated / energy_drop } else { f64::INFINITY };
    Ok(AuditReport { dt, residuals, integrated, max_abs, energy_drop, relative })
}

/// Ratio of integrated audit residuals between a run and its rerun at half
/// the step; close to 2 for a first-order scheme.
pub fn refinement_factor(coarse: &AuditReport, fine: &AuditReport) -> f64 {
    coarse.integrated / fine.integrated
}
