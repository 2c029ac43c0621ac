//! Momentum substep: semi-implicit viscous solve followed by an incremental
//! pressure projection.

use thiserror::Error;

use crate::grid::{
    advect_velocity, divergence, gradient_cc_to_mac, BcMode, Grid, Norms, ScalarField,
    VelocityField,
};
use crate::linsolve::{AxisKind, AxisOperator, LinearSolveConfig, LinearSolveError, SeparableOperator};
use crate::material::Params;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("{field} solve failed: {source}")]
    LinearSolve { field: &'static str, source: LinearSolveError },
    #[error("projection data incompatible with the wall condition: mean divergence {0:.3e}")]
    Incompatible(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("time step must be finite and >= 0, got {0}")]
    BadStep(f64),
}

/// Velocity and the modified pressure `P + lambda |grad d|^2 / 2 + lambda F(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub v: VelocityField,
    pub p: ScalarField,
}

impl FlowState {
    pub fn zeros(grid: &Grid) -> Self {
        Self { v: VelocityField::zeros(grid), p: ScalarField::zeros(grid) }
    }
}

/// Factorised Helmholtz and Poisson operators for one grid.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    grid: Grid,
    u_op: SeparableOperator,
    v_op: SeparableOperator,
    p_op: SeparableOperator,
    cfg: LinearSolveConfig,
}

fn tangential_kind(bc: BcMode) -> AxisKind {
    match bc {
        BcMode::Dirichlet => AxisKind::CellDirichlet,
        BcMode::FreeSlip => AxisKind::CellNeumann,
        BcMode::Periodic => AxisKind::Periodic,
    }
}

fn normal_axis(bc: BcMode, n: usize, h: f64) -> AxisOperator {
    if bc.is_periodic() {
        AxisOperator::new(AxisKind::Periodic, n, h)
    } else {
        AxisOperator::new(AxisKind::NodeDirichlet, n - 1, h)
    }
}

impl FlowSolver {
    pub fn new(grid: &Grid, cfg: LinearSolveConfig) -> Self {
        let (nx, ny, hx, hy, bc) = (grid.nx(), grid.ny(), grid.hx(), grid.hy(), grid.bc());
        let scalar = if bc.is_periodic() { AxisKind::Periodic } else { AxisKind::CellNeumann };
        Self {
            grid: *grid,
            u_op: SeparableOperator::new(
                normal_axis(bc, nx, hx),
                AxisOperator::new(tangential_kind(bc), ny, hy),
            ),
            v_op: SeparableOperator::new(
                AxisOperator::new(tangential_kind(bc), nx, hx),
                normal_axis(bc, ny, hy),
            ),
            p_op: SeparableOperator::new(AxisOperator::new(scalar, nx, hx), AxisOperator::new(scalar, ny, hy)),
            cfg,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &LinearSolveConfig {
        &self.cfg
    }

    /// Solves `(alpha + beta L) w = rhs` componentwise on the unknown faces.
    pub fn solve_velocity_helmholtz(
        &self,
        alpha: f64,
        beta: f64,
        rhs: &VelocityField,
    ) -> Result<VelocityField, FlowError> {
        let g = &self.grid;
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let mut out = VelocityField::zeros(g);
        let bu = rhs.u().gather(g.u_unknown_x(), 0..ny);
        let (xu, _) = self
            .u_op
            .solve(alpha, beta, &bu, &self.cfg)
            .map_err(|source| FlowError::LinearSolve { field: "u", source })?;
        out.u_mut().scatter(g.u_unknown_x(), 0..ny, &xu);
        let bv = rhs.v().gather(0..nx, g.v_unknown_y());
        let (xv, _) = self
            .v_op
            .solve(alpha, beta, &bv, &self.cfg)
            .map_err(|source| FlowError::LinearSolve { field: "v", source })?;
        out.v_mut().scatter(0..nx, g.v_unknown_y(), &xv);
        out.apply_bc();
        Ok(out)
    }

    /// Solves `lap phi = rhs` with homogeneous Neumann (walls) or periodic
    /// conditions, zero-mean gauge. `scale` is the magnitude of the terms that
    /// produced `rhs`; a mean above `1e-10 * scale` means the data cannot come
    /// from a field with zero net boundary flux.
    pub fn solve_poisson(&self, rhs: &ScalarField, scale: f64) -> Result<ScalarField, FlowError> {
        let b = rhs.interior();
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        let scale = b.iter().fold(scale, |m, x| m.max(x.abs()));
        if mean.abs() > 1e-10 * scale {
            return Err(FlowError::Incompatible(mean));
        }
        let (x, _) = self
            .p_op
            .solve(0.0, 1.0, &b, &self.cfg)
            .map_err(|source| FlowError::LinearSolve { field: "pressure", source })?;
        let mut phi = ScalarField::from_interior(&self.grid, &x);
        phi.remove_mean();
        Ok(phi)
    }

    /// `v* = (I - nu dt lap)^{-1} (v - dt (v.grad)v - dt grad p + dt forcing)`.
    pub fn tentative_velocity(
        &self,
        state: &FlowState,
        forcing: &VelocityField,
        dt: f64,
        params: &Params,
    ) -> Result<VelocityField, FlowError> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(FlowError::BadStep(dt));
        }
        let mut rhs = state.v.clone();
        if dt == 0.0 {
            return Ok(rhs);
        }
        rhs.axpy(-dt, &advect_velocity(&state.v));
        rhs.axpy(-dt, &gradient_cc_to_mac(&state.p));
        rhs.axpy(dt, forcing);
        if !rhs.is_finite() {
            return Err(FlowError::NonFinite("tentative velocity right-hand side"));
        }
        self.solve_velocity_helmholtz(1.0, -params.nu * dt, &rhs)
    }

    /// Removes the gradient part of `v_star`: returns `(v, phi, p + phi)`.
    pub fn pressure_project(
        &self,
        v_star: &VelocityField,
        p: &ScalarField,
        dt: f64,
    ) -> Result<(VelocityField, ScalarField, ScalarField), FlowError> {
        if !v_star.is_finite() {
            return Err(FlowError::NonFinite("tentative velocity"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Ok((v_star.clone(), ScalarField::zeros(&self.grid), p.clone()));
        }
        let mut rhs = divergence(v_star);
        rhs.values_mut().scale(1.0 / dt);
        let scale = v_star.max_abs() / (self.grid.h_min() * dt);
        let phi = self.solve_poisson(&rhs, scale)?;
        let mut v = v_star.clone();
        v.axpy(-dt, &gradient_cc_to_mac(&phi));
        v.apply_bc();
        let mut p_new = p.clone();
        p_new.values_mut().axpy(1.0, phi.values());
        p_new.remove_mean();
        Ok((v, phi, p_new))
    }

    /// Divergence-free part of `w`.
    pub fn project(&self, w: &VelocityField) -> Result<VelocityField, FlowError> {
        let zero = ScalarField::zeros(&self.grid);
        Ok(self.pressure_project(w, &zero, 1.0)?.0)
    }

    pub fn flow_step(
        &self,
        state: &FlowState,
        forcing: &VelocityField,
        dt: f64,
        params: &Params,
    ) -> Result<FlowState, FlowError> {
        let v_star = self.tentative_velocity(state, forcing, dt, params)?;
        let (v, _, p) = self.pressure_project(&v_star, &state.p, dt)?;
        if !v.is_finite() || !p.is_finite() {
            return Err(FlowError::NonFinite("flow state"));
        }
        Ok(FlowState { v, p })
    }
}

/// Largest absolute cell divergence.
pub fn divergence_linf(v: &VelocityField) -> f64 {
    divergence(v).linf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DirectorField;
    use crate::material::{elastic_force, stress_divergence, Potential};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn params(nu: f64) -> Params {
        Params { nu, lambda: 0.0, gamma: 1.0, potential: Potential::GinzburgLandau { eta: 1.0 } }
    }

    fn random_velocity(g: &Grid, seed: u64) -> VelocityField {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut w = VelocityField::zeros(g);
        w.u_mut().data_mut().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        w.v_mut().data_mut().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        w.apply_bc();
        w
    }

    fn diff_l2(a: &VelocityField, b: &VelocityField) -> f64 {
        let mut d = a.clone();
        d.axpy(-1.0, b);
        d.l2()
    }

    #[test]
    fn zero_state_stays_zero() {
        for bc in [BcMode::Dirichlet, BcMode::FreeSlip, BcMode::Periodic] {
            let g = Grid::unit_square(8, bc).unwrap();
            let s = FlowSolver::new(&g, LinearSolveConfig::default());
            let st = FlowState::zeros(&g);
            let out = s.flow_step(&st, &VelocityField::zeros(&g), 1e-2, &params(1.0)).unwrap();
            assert_eq!(out, st);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let g = Grid::unit_square(8, BcMode::Dirichlet).unwrap();
        let s = FlowSolver::new(&g, LinearSolveConfig::default());
        let st = FlowState { v: random_velocity(&g, 1), p: ScalarField::zeros(&g) };
        let vs = s.tentative_velocity(&st, &random_velocity(&g, 2), 0.0, &params(1.0)).unwrap();
        assert_eq!(vs, st.v);
    }

    #[test]
    fn shear_mode_decays_by_implicit_euler_factor() {
        let n = 32;
        let g = Grid::unit_square(n, BcMode::Periodic).unwrap();
        let s = FlowSolver::new(&g, LinearSolveConfig::default());
        let v = VelocityField::from_fn(&g, |_, y| (2.0 * PI * y).sin(), |_, _| 0.0);
        let st = FlowState { v: v.clone(), p: ScalarField::zeros(&g) };
        let dt = 1e-2;
        let out = s.tentative_velocity(&st, &VelocityField::zeros(&g), dt, &params(1.0)).unwrap();
        let h = g.hy();
        let lam = 2.0 * (1.0 - (2.0 * PI * h).cos()) / (h * h);
        let factor = 1.0 / (1.0 + dt * lam);
        let expect = v.scaled(factor);
        assert!(diff_l2(&out, &expect) <= 1e-10 * expect.l2());
    }

    #[test]
    fn projection_properties() {
        for bc in [BcMode::Dirichlet, BcMode::FreeSlip, BcMode::Periodic] {
            let g = Grid::new(24, 20, 1.0, 0.8, bc).unwrap();
            let s = FlowSolver::new(&g, LinearSolveConfig::default());
            let w = random_velocity(&g, 3);
            let p = s.project(&w).unwrap();
            let div = divergence(&p).l2();
            assert!(div <= 1e-10 * w.l2(), "{bc:?}: {div}");
            let pp = s.project(&p).unwrap();
            assert!(diff_l2(&pp, &p) <= 1e-10 * p.l2());
            // projection is an orthogonal projector: it cannot add energy
            assert!(p.l2() <= w.l2());
        }
    }

    #[test]
    fn projection_of_gradient_recovers_potential() {
        let g = Grid::unit_square(64, BcMode::Dirichlet).unwrap();
        let s = FlowSolver::new(&g, LinearSolveConfig::default());
        let psi = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
        let w = gradient_cc_to_mac(&ScalarField::from_fn(&g, psi));
        let dt = 0.5;
        let (v, phi, _) = s.pressure_project(&w, &ScalarField::zeros(&g), dt).unwrap();
        assert!(v.l2() <= 1e-10 * w.l2());
        let exact = ScalarField::from_fn(&g, |x, y| psi(x, y) / dt);
        let mut e = phi.clone();
        e.values_mut().axpy(-1.0, exact.values());
        assert!(e.linf() < 1e-10);
    }

    #[test]
    fn periodic_momentum_is_conserved() {
        let g = Grid::unit_square(16, BcMode::Periodic).unwrap();
        let s = FlowSolver::new(&g, LinearSolveConfig::default());
        let mut v = s.project(&random_velocity(&g, 4)).unwrap();
        let (mu, mv) = v.mean();
        v.axpy(1.0, &VelocityField::from_fn(&g, |_, _| 0.3 - mu, |_, _| -0.1 - mv));
        let mut st = FlowState { v, p: ScalarField::zeros(&g) };
        let m0 = st.v.mean();
        for _ in 0..20 {
            st = s.flow_step(&st, &VelocityField::zeros(&g), 1e-3, &params(0.1)).unwrap();
        }
        let m1 = st.v.mean();
        assert!((m0.0 - m1.0).abs() < 1e-13 && (m0.1 - m1.1).abs() < 1e-13, "{m0:?} {m1:?}");
    }

    #[test]
    fn kinetic_energy_non_increasing_without_coupling() {
        for bc in [BcMode::Dirichlet, BcMode::FreeSlip, BcMode::Periodic] {
            let g = Grid::unit_square(32, bc).unwrap();
            let s = FlowSolver::new(&g, LinearSolveConfig::default());
            let v = VelocityField::from_stream_function(&g, |x, y| {
                0.1 * (PI * x).sin().powi(2) * (PI * y).sin().powi(2)
            });
            let mut st = FlowState { v, p: ScalarField::zeros(&g) };
            let mut e = 0.5 * st.v.inner(&st.v);
            for _ in 0..50 {
                st = s.flow_step(&st, &VelocityField::zeros(&g), 1e-3, &params(1.0)).unwrap();
                let e1 = 0.5 * st.v.inner(&st.v);
                assert!(e1 <= e * (1.0 + 1e-12), "{bc:?}: {e} -> {e1}");
                e = e1;
            }
        }
    }

    #[test]
    fn taylor_green_decay_coarse() {
        let g = Grid::new(32, 32, 2.0 * PI, 2.0 * PI, BcMode::Periodic).unwrap();
        let s = FlowSolver::new(&g, LinearSolveConfig::default());
        let v = VelocityField::from_fn(&g, |x, y| x.sin() * y.cos(), |x, y| -x.cos() * y.sin());
        let mut st = FlowState { v, p: ScalarField::zeros(&g) };
        let e0 = st.v.inner(&st.v);
        let (nu, dt) = (0.1, 1e-2);
        for _ in 0..50 {
            st = s.flow_step(&st, &VelocityField::zeros(&g), dt, &params(nu)).unwrap();
        }
        let ratio = st.v.inner(&st.v) / e0;
        let exact = (-4.0 * nu * 0.5f64).exp();
        assert!((ratio / exact - 1.0).abs() < 0.01, "{ratio} vs {exact}");
    }

    /// The reduced force differs from `-lambda div(grad d (.) grad d)` by a
    /// gradient, so the two agree after projection up to O(h^2).
    #[test]
    fn elastic_force_matches_stress_divergence_modulo_gradients() {
        let p = Params {
            nu: 1.0,
            lambda: 1.0,
            gamma: 1.0,
            potential: Potential::GinzburgLandau { eta: 0.7 },
        };
        let mut errs = vec![];
        for n in [32, 64, 128] {
            let g = Grid::new(n, n, 2.0 * PI, 2.0 * PI, BcMode::Periodic).unwrap();
            let mut d = DirectorField::from_fn(&g, 2, |x, y| {
                vec![0.8 * (x + 2.0 * y).cos(), 0.6 * x.sin() * y.cos()]
            });
            d.apply_bc(None).unwrap();
            let s = FlowSolver::new(&g, LinearSolveConfig::default());
            let mut diff = elastic_force(&d, &p);
            diff.axpy(p.lambda, &stress_divergence(&d));
            errs.push(s.project(&diff).unwrap().l2());
        }
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((3.4..=4.6).contains(&r), "{errs:?}");
        }
    }

    #[test]
    fn free_slip_wall_faces_stay_zero() {
        let g = Grid::unit_square(16, BcMode::FreeSlip).unwrap();
        let s = FlowSolver::new(&g, LinearSolveConfig::default());
        let mut d = DirectorField::from_fn(&g, 2, |x, y| vec![(3.0 * x).cos(), (2.0 * y).sin()]);
        d.apply_bc(None).unwrap();
        let f = elastic_force(&d, &Params { lambda: 1.0, ..params(1.0) });
        let st = FlowState { v: random_velocity(&g, 5), p: ScalarField::zeros(&g) };
        let out = s.flow_step(&st, &f, 1e-3, &params(1.0)).unwrap();
        for j in 0..16 {
            assert_eq!(out.v.u().get(0, j), 0.0);
            assert_eq!(out.v.u().get(16, j), 0.0);
            assert_eq!(out.v.v().get(j, 0), 0.0);
            assert_eq!(out.v.v().get(j, 16), 0.0);
        }
    }
}
