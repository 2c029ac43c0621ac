//! Steady states of `-lap d + f(d) = 0`, the Lyapunov gap along a run, decay
//! fits and the empirical Lojasiewicz exponent.

use log::warn;
use thiserror::Error;

use crate::director::{director_residual, DirectorError, DirectorSolver};
use crate::grid::{BcError, BoundaryData, DirectorField, Grid, Norms, VelocityField};
use crate::linsolve::{conjugate_gradient, LinearSolveConfig, LinearSolveError};
use crate::material::{bulk_energy, Params, Potential};
use crate::simulator::EnergyRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("steady solve did not converge: best residual {best_residual:.3e} after {newton_iterations} Newton iterations and {fallback_steps} gradient-flow steps")]
    NotConverged { best_residual: f64, newton_iterations: usize, fallback_steps: usize },
    #[error("non-finite iterate in steady solve")]
    NonFinite,
    #[error("boundary data: {0}")]
    Boundary(String),
    #[error(transparent)]
    Director(#[from] DirectorError),
    #[error("linear solve: {0}")]
    Linear(#[from] LinearSolveError),
}

impl From<BcError> for SteadyError {
    fn from(e: BcError) -> Self {
        SteadyError::Boundary(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    Newton,
    GradientFlow,
    /// Newton after at least one gradient-flow rescue.
    Hybrid,
}

impl SteadyMethod {
    pub fn name(self) -> &'static str {
        match self {
            SteadyMethod::Newton => "newton",
            SteadyMethod::GradientFlow => "gradient_flow",
            SteadyMethod::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Target L2 norm of `-lap d + f(d)`.
    pub tol: f64,
    pub max_newton: usize,
    /// Pseudo-time steps per gradient-flow rescue.
    pub fallback_steps: usize,
    /// Rescue rounds before giving up.
    pub max_rounds: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_newton: 30, fallback_steps: 1000, max_rounds: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub d_inf: DirectorField,
    pub residual_norm: f64,
    pub iterations: usize,
    pub fallback_steps: usize,
    pub method: SteadyMethod,
    /// `E(d_inf) = |grad d|^2/2 + int F`.
    pub energy: f64,
}

impl SteadySolution {
    /// Value of the full energy at the rest state `(0, d_inf)`.
    pub fn total_energy(&self, lambda: f64) -> f64 {
        lambda * self.energy
    }
}

/// Discrete harmonic extension of the trace (`lap_h d = 0` inside).
pub fn harmonic_extension(grid: &Grid, boundary: &BoundaryData) -> Result<DirectorField, SteadyError> {
    let solver = DirectorSolver::new(grid, LinearSolveConfig::default());
    let mut d = DirectorField::zeros(grid, boundary.m());
    for k in 0..boundary.m() {
        let lift: Vec<f64> = solver.boundary_lift(Some(boundary), k).iter().map(|x| -x).collect();
        let (x, _) = solver.operator().solve(0.0, 1.0, &lift, solver.config())?;
        d.set_interior(k, &x);
    }
    d.apply_bc(Some(boundary))?;
    Ok(d)
}

struct Newton<'a> {
    solver: &'a DirectorSolver,
    potential: &'a Potential,
    trace: Option<&'a BoundaryData>,
}

impl Newton<'_> {
    fn residual(&self, d: &DirectorField) -> (DirectorField, f64) {
        director_residual(d, self.potential)
    }

    /// Solves `(-lap + f'(d)) delta = -r` for the increment, which carries
    /// homogeneous boundary values.
    fn increment(&self, d: &DirectorField, r: &DirectorField, rnorm: f64, tol: f64) -> Result<DirectorField, SteadyError> {
        let g = *d.grid();
        let m = d.m();
        let n = g.cell_count();
        let op = self.solver.operator();
        let cfg = self.solver.config();
        let mut out = DirectorField::zeros(&g, m);
        if let Potential::Quadratic { kappa } = *self.potential {
            // constant Jacobian: one exact separable solve per component
            for k in 0..m {
                let b: Vec<f64> = r.interior(k).iter().map(|x| -x).collect();
                let (x, _) = op.solve(kappa, -1.0, &b, cfg)?;
                out.set_interior(k, &x);
            }
            out.apply_bc(self.trace.map(zero_trace).as_ref())?;
            return Ok(out);
        }
        // per-cell Jacobian blocks, cell-major
        let mut jac = vec![0.0; n * m * m];
        let mut dv = vec![0.0; m];
        let mut shift = 0.0;
        let nx = g.nx();
        for j in 0..g.ny() {
            for i in 0..nx {
                d.at(i as isize, j as isize, &mut dv);
                let c = j * nx + i;
                self.potential.jacobian(&dv, &mut jac[c * m * m..(c + 1) * m * m]);
                shift += (0..m).map(|k| jac[c * m * m + k * m + k]).sum::<f64>();
            }
        }
        shift /= (n * m) as f64;
        // keep the preconditioner positive definite for singular closures
        let floor = 1.0 / (g.lx().max(g.ly())).powi(2);
        let shift = shift.max(floor);
        let apply = |x: &[f64], y: &mut [f64]| {
            for k in 0..m {
                op.apply_into(0.0, -1.0, &x[k * n..(k + 1) * n], &mut y[k * n..(k + 1) * n]);
            }
            for c in 0..n {
                for r in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += jac[c * m * m + r * m + l] * x[l * n + c];
                    }
                    y[r * n + c] += s;
                }
            }
        };
        let precond = |x: &[f64], y: &mut [f64]| {
            for k in 0..m {
                let z = op.solve_spectral(shift, -1.0, &x[k * n..(k + 1) * n]);
                y[k * n..(k + 1) * n].copy_from_slice(&z);
            }
        };
        let mut b = Vec::with_capacity(n * m);
        for k in 0..m {
            b.extend(r.interior(k).iter().map(|x| -x));
        }
        // the discrete residual norm is area-weighted; aim well below tol
        let target = (0.01 * tol / rnorm.max(f64::MIN_POSITIVE)).clamp(1e-14, 1e-2);
        let (x, _) = conjugate_gradient(apply, precond, &b, None, target, cfg.max_iterations, false)?;
        for k in 0..m {
            out.set_interior(k, &x[k * n..(k + 1) * n]);
        }
        out.apply_bc(self.trace.map(zero_trace).as_ref())?;
        Ok(out)
    }
}

fn zero_trace(t: &BoundaryData) -> BoundaryData {
    t.scaled(0.0)
}

fn add_increment(d: &DirectorField, delta: &DirectorField, alpha: f64, trace: Option<&BoundaryData>) -> Result<DirectorField, SteadyError> {
    let mut out = d.clone();
    for (a, b) in out.comps_mut().iter_mut().zip(delta.comps()) {
        a.axpy(alpha, b);
    }
    out.apply_bc(trace)?;
    Ok(out)
}

/// Damped Newton for `-lap d + f(d) = 0` with the seed's boundary trace.
/// When a Newton step fails to reduce the residual even after halving, runs
/// the gradient flow `d_tau = lap d - f(d)` for a while and tries again.
pub fn solve_steady(
    seed: &DirectorField,
    boundary: Option<&BoundaryData>,
    potential: &Potential,
    opts: &SteadyOptions,
) -> Result<SteadySolution, SteadyError> {
    let grid = *seed.grid();
    potential.validate().map_err(|e| SteadyError::Boundary(e.to_string()))?;
    let solver = DirectorSolver::new(&grid, LinearSolveConfig::default());
    let newton = Newton { solver: &solver, potential, trace: boundary };
    let mut d = seed.clone();
    d.apply_bc(boundary)?;
    if !d.is_finite() {
        return Err(SteadyError::NonFinite);
    }
    let (mut r, mut rnorm) = newton.residual(&d);
    let mut iterations = 0usize;
    let mut fallback_total = 0usize;
    let mut best = (rnorm, d.clone());
    let gf_params = Params { nu: 1.0, lambda: 0.0, gamma: 1.0, potential: *potential };
    let tau = potential.reaction_dt_bound(1.0);
    let zero_v = VelocityField::zeros(&grid);
    for round in 0..=opts.max_rounds {
        let mut stalled = false;
        let mut it_round = 0;
        while rnorm > opts.tol && it_round < opts.max_newton {
            let delta = match newton.increment(&d, &r, rnorm, opts.tol) {
                Ok(x) => x,
                Err(SteadyError::Linear(e)) => {
                    warn!("Newton linear solve failed ({e}); switching to gradient flow");
                    stalled = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            iterations += 1;
            it_round += 1;
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha >= 1.0 / 64.0 {
                let trial = add_increment(&d, &delta, alpha, boundary)?;
                let (tr, tn) = newton.residual(&trial);
                if tn.is_finite() && tn < rnorm {
                    accepted = Some((trial, tr, tn));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((nd, nr, nn)) => {
                    d = nd;
                    r = nr;
                    rnorm = nn;
                    if rnorm < best.0 {
                        best = (rnorm, d.clone());
                    }
                }
                None => {
                    stalled = true;
                    break;
                }
            }
        }
        if rnorm <= opts.tol {
            let method = match (fallback_total, iterations) {
                (0, _) => SteadyMethod::Newton,
                (_, 0) => SteadyMethod::GradientFlow,
                _ => SteadyMethod::Hybrid,
            };
            let energy = bulk_energy(&d, potential);
            return Ok(SteadySolution { d_inf: d, residual_norm: rnorm, iterations, fallback_steps: fallback_total, method, energy });
        }
        if round == opts.max_rounds {
            break;
        }
        if !stalled {
            warn!("Newton hit its iteration limit at residual {rnorm:.3e}; running gradient flow");
        }
        for _ in 0..opts.fallback_steps {
            d = solver.director_step(&d, boundary, &zero_v, tau, &gf_params, None)?;
            fallback_total += 1;
            let (nr, nn) = newton.residual(&d);
            r = nr;
            rnorm = nn;
            if !rnorm.is_finite() {
                return Err(SteadyError::NonFinite);
            }
            if rnorm < best.0 {
                best = (rnorm, d.clone());
            }
            if rnorm <= opts.tol {
                break;
            }
        }
        if rnorm <= opts.tol && iterations == 0 {
            let energy = bulk_energy(&d, potential);
            return Ok(SteadySolution {
                d_inf: d,
                residual_norm: rnorm,
                iterations,
                fallback_steps: fallback_total,
                method: SteadyMethod::GradientFlow,
                energy,
            });
        }
    }
    Err(SteadyError::NotConverged { best_residual: best.0, newton_iterations: iterations, fallback_steps: fallback_total })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("no records")]
    Empty,
    #[error("gap {gap:.3e} at t = {t} is below -1e-9 E(0); the reference energy belongs to a different critical point")]
    WrongEquilibrium { t: f64, gap: f64 },
}

/// `(t, E(t) - E_inf)` with round-off negatives clamped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    pub t: Vec<f64>,
    pub gap: Vec<f64>,
    /// `E(0)` of the run, the scale for all tolerances.
    pub e0: f64,
    pub clamped: usize,
}

impl GapSeries {
    /// Default noise floor of the gap: `1e-13 |E(0)|`.
    pub fn noise_floor(&self) -> f64 {
        1e-13 * self.e0.abs()
    }
}

/// Subtracts `e_inf` (the full energy of the rest state) from the record
/// totals.
pub fn lyapunov_gap(records: &[EnergyRecord], e_inf: f64) -> Result<GapSeries, GapError> {
    let first = records.first().ok_or(GapError::Empty)?;
    let e0 = first.total;
    let scale = e0.abs();
    let mut out = GapSeries { t: vec![], gap: vec![], e0, clamped: 0 };
    for r in records {
        let mut g = r.total - e_inf;
        if g < 0.0 {
            if g < -1e-9 * scale {
                return Err(GapError::WrongEquilibrium { t: r.t, gap: g });
            }
            if g < -1e-12 * scale {
                warn!("clamping negative energy gap {g:.3e} at t = {}", r.t);
            }
            g = 0.0;
            out.clamped += 1;
        }
        out.t.push(r.t);
        out.gap.push(g);
    }
    Ok(out)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient points: {found} positive samples in the window, need at least {needed}")]
    InsufficientPoints { found: usize, needed: usize },
    #[error("degenerate series: {0}")]
    Degenerate(String),
    #[error("series is not monotonically decreasing at t = {0}")]
    NonMonotone(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Exponential,
    Algebraic,
}

impl DecayModel {
    pub fn name(self) -> &'static str {
        match self {
            DecayModel::Exponential => "exponential",
            DecayModel::Algebraic => "algebraic",
        }
    }
}

/// What the fitted series measures, which fixes how an algebraic exponent
/// translates into the Lojasiewicz exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    /// Distance of the state from equilibrium: `beta = theta / (1 - 2 theta)`.
    State,
    /// Energy gap: `beta = 1 / (1 - 2 theta)`.
    Gap,
}

impl FitTarget {
    pub fn implied_theta(self, beta: f64) -> f64 {
        let th = match self {
            FitTarget::State => beta / (1.0 + 2.0 * beta),
            FitTarget::Gap => (beta - 1.0) / (2.0 * beta),
        };
        clamp_theta(th)
    }
}

fn clamp_theta(th: f64) -> f64 {
    if th.is_nan() {
        return 0.5;
    }
    th.clamp(f64::MIN_POSITIVE, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub slope_stderr: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit, FitError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FitError::Degenerate("abscissa has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let rms = (ss / n).sqrt();
    let slope_stderr = if n > 2.0 { (ss / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    Ok(LineFit { slope, intercept, rms, slope_stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub model: DecayModel,
    /// `kappa` of `exp(-kappa t)` or `beta` of `(1+t)^-beta`, per `model`.
    pub exponent: f64,
    pub implied_theta: f64,
    pub fit_rms: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub exponential: LineFit,
    pub algebraic: LineFit,
}

pub const MIN_FIT_POINTS: usize = 20;

/// Fits `log y` against `t` and against `log(1+t)` over the window and keeps
/// the model with the smaller RMS.
pub fn fit_decay(t: &[f64], y: &[f64], window: Option<(f64, f64)>, target: FitTarget) -> Result<RateFit, FitError> {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut ts = vec![];
    let mut ly = vec![];
    for (&ti, &yi) in t.iter().zip(y) {
        if ti >= lo && ti <= hi && yi > 0.0 && yi.is_finite() {
            ts.push(ti);
            ly.push(yi.ln());
        }
    }
    if ts.len() < MIN_FIT_POINTS {
        return Err(FitError::InsufficientPoints { found: ts.len(), needed: MIN_FIT_POINTS });
    }
    let spread = ly.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)) - ly.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if spread <= 1e-12 {
        return Err(FitError::Degenerate("series is constant".into()));
    }
    let exponential = least_squares(&ts, &ly)?;
    let log_t: Vec<f64> = ts.iter().map(|x| x.ln_1p()).collect();
    let algebraic = least_squares(&log_t, &ly)?;
    let (model, fit) = if exponential.rms <= algebraic.rms {
        (DecayModel::Exponential, exponential)
    } else {
        (DecayModel::Algebraic, algebraic)
    };
    if fit.slope >= 0.0 {
        return Err(FitError::Degenerate(format!("series does not decay (slope {:.3e})", fit.slope)));
    }
    let exponent = -fit.slope;
    let implied_theta = match model {
        DecayModel::Exponential => 0.5,
        DecayModel::Algebraic => target.implied_theta(exponent),
    };
    Ok(RateFit {
        model,
        exponent,
        implied_theta,
        fit_rms: fit.rms,
        window: (ts[0], ts[ts.len() - 1]),
        points: ts.len(),
        exponential,
        algebraic,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub theta: f64,
    /// Half-width of the 95% interval on `theta`.
    pub ci95: f64,
    /// Slope of `log(-g')` against `log g`.
    pub slope: f64,
    pub rms: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Estimates `theta` from `-g' ~ g^{2(1-theta)}`: the slope `s` of
/// `log(-g')` against `log g` gives `theta = 1 - s/2`. Samples with
/// `g <= 100 * noise_floor` are dropped; without an explicit window the fit
/// uses the later half of what remains.
pub fn estimate_theta(series: &GapSeries, window: Option<(f64, f64)>, noise_floor: Option<f64>) -> Result<ThetaEstimate, FitError> {
    let floor = 100.0 * noise_floor.unwrap_or_else(|| series.noise_floor());
    let (t, g) = (&series.t, &series.gap);
    // centered differences at interior samples
    let mut pts: Vec<(f64, f64, f64)> = vec![];
    for k in 1..t.len().saturating_sub(1) {
        if g[k - 1] <= floor || g[k] <= floor || g[k + 1] <= floor {
            continue;
        }
        let dg = (g[k + 1] - g[k - 1]) / (t[k + 1] - t[k - 1]);
        pts.push((t[k], g[k], -dg));
    }
    let pts: Vec<_> = match window {
        Some((lo, hi)) => pts.into_iter().filter(|p| p.0 >= lo && p.0 <= hi).collect(),
        None => {
            let half = pts.len() / 2;
            pts[half..].to_vec()
        }
    };
    if pts.len() < 3 {
        return Err(FitError::InsufficientPoints { found: pts.len(), needed: 3 });
    }
    if let Some(p) = pts.iter().find(|p| !(p.2 > 0.0)) {
        return Err(FitError::NonMonotone(p.0));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.2.ln()).collect();
    let fit = least_squares(&x, &y)?;
    Ok(ThetaEstimate {
        theta: clamp_theta(1.0 - fit.slope / 2.0),
        ci95: 1.96 * fit.slope_stderr / 2.0,
        slope: fit.slope,
        rms: fit.rms,
        window: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
    })
}

/// Distance between two directors in the full discrete H1 norm.
pub fn h1_distance(a: &DirectorField, b: &DirectorField) -> f64 {
    DirectorField::difference(a, b).h1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BcMode;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_zero_trace_gives_zero() {
        let g = Grid::unit_square(16, BcMode::Dirichlet).unwrap();
        let tr = BoundaryData::constant(&g, &[0.0, 0.0]);
        let seed = DirectorField::from_fn(&g, 2, |x, y| vec![(x * 7.0).sin(), x * y]);
        let p = Potential::Quadratic { kappa: 1.0 };
        let s = solve_steady(&seed, Some(&tr), &p, &SteadyOptions::default()).unwrap();
        assert!(s.iterations <= 2);
        assert!(s.residual_norm <= 1e-10);
        assert!(s.d_inf.linf() < 1e-10);
        assert_eq!(s.method, SteadyMethod::Newton);
    }

    #[test]
    fn constant_unit_trace_is_immediate() {
        let g = Grid::unit_square(8, BcMode::Dirichlet).unwrap();
        let tr = BoundaryData::constant(&g, &[0.0, 1.0]);
        let seed = DirectorField::constant(&g, &[0.0, 1.0]);
        let s = solve_steady(&seed, Some(&tr), &Potential::GinzburgLandau { eta: 0.3 }, &SteadyOptions::default()).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.residual_norm, 0.0);
    }

    #[test]
    fn newton_agrees_with_gradient_flow() {
        let eta = 0.2;
        let g = Grid::unit_square(32, BcMode::Dirichlet).unwrap();
        let alpha = |x: f64, y: f64| 0.6 * (x - 0.3 * y) + 0.4 * (PI * x * y).sin();
        let tr = BoundaryData::from_fn(&g, 2, |x, y| vec![alpha(x, y).cos(), alpha(x, y).sin()]);
        let pot = Potential::GinzburgLandau { eta };
        let seed = harmonic_extension(&g, &tr).unwrap();
        let s = solve_steady(&seed, Some(&tr), &pot, &SteadyOptions::default()).unwrap();
        assert_eq!(s.method, SteadyMethod::Newton);
        assert!(s.residual_norm <= 1e-10);

        // oracle: explicit-reaction gradient flow from the same seed
        let solver = DirectorSolver::new(&g, LinearSolveConfig::default());
        let params = Params { nu: 1.0, lambda: 0.0, gamma: 1.0, potential: pot };
        let dt = pot.reaction_dt_bound(1.0);
        let zero = VelocityField::zeros(&g);
        let mut d = seed.clone();
        let mut tau = 0.0;
        while tau < 1e3 {
            d = solver.director_step(&d, Some(&tr), &zero, dt, &params, None).unwrap();
            tau += dt;
            if director_residual(&d, &pot).1 < 1e-11 {
                break;
            }
        }
        assert!(h1_distance(&d, &s.d_inf) <= 1e-6);
    }

    fn records_from(t: &[f64], total: &[f64]) -> Vec<EnergyRecord> {
        t.iter().zip(total).map(|(&t, &e)| EnergyRecord { t, total: e, ..Default::default() }).collect()
    }

    #[test]
    fn gap_clamping_and_rejection() {
        let t = [0.0, 1.0, 2.0];
        let recs = records_from(&t, &[1.0, 0.5, 0.5 - 1e-13]);
        let gs = lyapunov_gap(&recs, 0.5).unwrap();
        assert_eq!(gs.gap, vec![0.5, 0.0, 0.0]);
        assert_eq!(gs.clamped, 1);
        let recs = records_from(&t, &[1.0, 0.5, 0.4]);
        assert!(matches!(lyapunov_gap(&recs, 0.5), Err(GapError::WrongEquilibrium { .. })));
    }

    #[test]
    fn synthetic_exponential_fit() {
        let t: Vec<f64> = (0..=100).map(|k| 0.05 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = fit_decay(&t, &y, None, FitTarget::State).unwrap();
        assert_eq!(f.model, DecayModel::Exponential);
        assert!((f.exponent - 2.0).abs() < 0.01);
        assert_eq!(f.implied_theta, 0.5);
    }

    #[test]
    fn synthetic_algebraic_fit() {
        let t: Vec<f64> = (0..=200).map(|k| 0.1 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-1.5)).collect();
        let f = fit_decay(&t, &y, None, FitTarget::State).unwrap();
        assert_eq!(f.model, DecayModel::Algebraic);
        assert!((f.exponent - 1.5).abs() < 0.02);
        assert!((f.implied_theta - 0.375).abs() < 1e-3);
        let g = fit_decay(&t, &y, None, FitTarget::Gap).unwrap();
        assert!((g.implied_theta - 0.5 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn fit_errors() {
        let t: Vec<f64> = (0..30).map(|k| k as f64).collect();
        assert!(matches!(fit_decay(&t, &vec![2.0; 30], None, FitTarget::State), Err(FitError::Degenerate(_))));
        assert!(matches!(
            fit_decay(&t[..10], &[1.0; 10], None, FitTarget::State),
            Err(FitError::InsufficientPoints { found: 10, .. })
        ));
        let grow: Vec<f64> = t.iter().map(|t| (0.1 * t).exp()).collect();
        assert!(fit_decay(&t, &grow, None, FitTarget::State).is_err());
    }

    fn series(t: Vec<f64>, g: impl Fn(f64) -> f64) -> GapSeries {
        let gap = t.iter().map(|&t| g(t)).collect();
        GapSeries { t, gap, e0: 1.0, clamped: 0 }
    }

    #[test]
    fn theta_from_synthetic_gaps() {
        let t: Vec<f64> = (0..=400).map(|k| 0.05 * k as f64).collect();
        let alg = estimate_theta(&series(t.clone(), |t| (1.0 + t).powi(-2)), None, None).unwrap();
        assert!((alg.theta - 0.25).abs() < 0.02, "{alg:?}");
        let exp = estimate_theta(&series(t, |t| (-t).exp()), None, None).unwrap();
        assert!((exp.theta - 0.5).abs() < 1e-6, "{exp:?}");
    }

    #[test]
    fn theta_rejects_rising_gap() {
        let t: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let s = series(t, |t| 1.0 + 0.1 * t);
        assert!(matches!(estimate_theta(&s, None, None), Err(FitError::NonMonotone(_))));
    }
}
