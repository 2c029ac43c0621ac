//! Director substep: implicit diffusion, explicit transport and reaction.

use thiserror::Error;

use crate::grid::{advect_director, BcError, BcMode, BoundaryData, DirectorField, Grid, Norms, Side, VelocityField};
use crate::linsolve::{AxisKind, AxisOperator, LinearSolveConfig, LinearSolveError, SeparableOperator};
use crate::material::{potential_gradient_field, Params, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectorError {
    #[error("director component {component} solve failed: {source}")]
    LinearSolve { component: usize, source: LinearSolveError },
    #[error(transparent)]
    Boundary(#[from] BcErrorClone),
    #[error("non-finite value in director update")]
    NonFinite,
    #[error("time step must be finite and >= 0, got {0}")]
    BadStep(f64),
}

/// Cloneable mirror of [`BcError`].
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct BcErrorClone(pub String);

impl From<BcError> for DirectorError {
    fn from(e: BcError) -> Self {
        DirectorError::Boundary(BcErrorClone(e.to_string()))
    }
}

/// Factorised `(I - c lap)` for the director layout of one grid.
#[derive(Debug, Clone)]
pub struct DirectorSolver {
    grid: Grid,
    op: SeparableOperator,
    cfg: LinearSolveConfig,
}

impl DirectorSolver {
    pub fn new(grid: &Grid, cfg: LinearSolveConfig) -> Self {
        let kind = match grid.bc() {
            BcMode::Dirichlet => AxisKind::CellDirichlet,
            BcMode::FreeSlip => AxisKind::CellNeumann,
            BcMode::Periodic => AxisKind::Periodic,
        };
        let op = SeparableOperator::new(
            AxisOperator::new(kind, grid.nx(), grid.hx()),
            AxisOperator::new(kind, grid.ny(), grid.hy()),
        );
        Self { grid: *grid, op, cfg }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The homogeneous cell Laplacian with this grid's wall closure.
    pub fn operator(&self) -> &SeparableOperator {
        &self.op
    }

    pub fn config(&self) -> &LinearSolveConfig {
        &self.cfg
    }

    /// Contribution of the Dirichlet trace of component `k` to the discrete
    /// Laplacian at boundary cells (`2 g / h^2` per adjacent side), compact
    /// layout. Zero unless the grid is Dirichlet.
    pub fn boundary_lift(&self, trace: Option<&BoundaryData>, k: usize) -> Vec<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let mut out = vec![0.0; nx * ny];
        let Some(tr) = trace else { return out };
        if g.bc() != BcMode::Dirichlet {
            return out;
        }
        let (cx, cy) = (2.0 / g.hx().powi(2), 2.0 / g.hy().powi(2));
        for j in 0..ny {
            out[j * nx] += cx * tr.value(Side::Left, j, k);
            out[j * nx + nx - 1] += cx * tr.value(Side::Right, j, k);
        }
        for i in 0..nx {
            out[i] += cy * tr.value(Side::Bottom, i, k);
            out[(ny - 1) * nx + i] += cy * tr.value(Side::Top, i, k);
        }
        out
    }

    /// Solves `(I - c lap_h) x = rhs` for every component, where `lap_h` uses
    /// the ghost rule of the grid with the given trace, and returns `x` with
    /// ghosts filled.
    pub fn solve_implicit_diffusion(
        &self,
        rhs: &DirectorField,
        trace: Option<&BoundaryData>,
        c: f64,
    ) -> Result<DirectorField, DirectorError> {
        let mut out = DirectorField::zeros(&self.grid, rhs.m());
        for k in 0..rhs.m() {
            let mut b = rhs.interior(k);
            if c != 0.0 {
                for (bi, li) in b.iter_mut().zip(self.boundary_lift(trace, k)) {
                    *bi += c * li;
                }
            }
            let (x, _) = self
                .op
                .solve(1.0, -c, &b, &self.cfg)
                .map_err(|source| DirectorError::LinearSolve { component: k, source })?;
            out.set_interior(k, &x);
        }
        out.apply_bc(trace)?;
        Ok(out)
    }

    /// One step of `d_t + v.grad d = gamma (lap d - f(d)) + source`:
    /// `(I - gamma dt lap) d' = d - dt (v.grad) d - gamma dt f(d) + dt source`.
    pub fn director_step(
        &self,
        d: &DirectorField,
        trace: Option<&BoundaryData>,
        v: &VelocityField,
        dt: f64,
        params: &Params,
        source: Option<&DirectorField>,
    ) -> Result<DirectorField, DirectorError> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(DirectorError::BadStep(dt));
        }
        if dt == 0.0 {
            return Ok(d.clone());
        }
        let adv = advect_director(v, d);
        let f = potential_gradient_field(d, &params.potential);
        let mut rhs = d.clone();
        for k in 0..d.m() {
            let c = &mut rhs.comps_mut()[k];
            c.axpy(-dt, adv.comp(k));
            c.axpy(-params.gamma * dt, f.comp(k));
            if let Some(s) = source {
                c.axpy(dt, s.comp(k));
            }
        }
        if !rhs.is_finite() {
            return Err(DirectorError::NonFinite);
        }
        let out = self.solve_implicit_diffusion(&rhs, trace, params.gamma * dt)?;
        if !out.is_finite() {
            return Err(DirectorError::NonFinite);
        }
        Ok(out)
    }
}

/// `-lap d + f(d)` at interior cells and its L2 norm.
pub fn director_residual(d: &DirectorField, potential: &Potential) -> (DirectorField, f64) {
    let mut r = potential_gradient_field(d, potential);
    let lap = d.laplacian();
    for (a, b) in r.comps_mut().iter_mut().zip(lap.comps()) {
        a.axpy(-1.0, b);
    }
    let norm = r.l2();
    (r, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DirectorField;

    fn gl(eta: f64) -> Params {
        Params { nu: 1.0, lambda: 1.0, gamma: 1.0, potential: Potential::GinzburgLandau { eta } }
    }

    fn diff_l2(a: &DirectorField, b: &DirectorField) -> f64 {
        DirectorField::difference(a, b).l2()
    }

    #[test]
    fn unit_constant_is_fixed() {
        let g = Grid::unit_square(16, BcMode::Dirichlet).unwrap();
        let tr = BoundaryData::constant(&g, &[0.6, 0.8]);
        let mut d = DirectorField::constant(&g, &[0.6, 0.8]);
        d.apply_bc(Some(&tr)).unwrap();
        let s = DirectorSolver::new(&g, LinearSolveConfig::default());
        let out = s.director_step(&d, Some(&tr), &VelocityField::zeros(&g), 1e-2, &gl(1.0), None).unwrap();
        assert!(diff_l2(&out, &d) < 1e-13);
        assert!(director_residual(&d, &gl(1.0).potential).1 < 1e-13);
    }

    #[test]
    fn quadratic_constant_decays_by_scheme_factor() {
        for bc in [BcMode::FreeSlip, BcMode::Periodic] {
            let g = Grid::unit_square(8, bc).unwrap();
            let mut d = DirectorField::constant(&g, &[0.3, -0.5]);
            d.apply_bc(None).unwrap();
            let kappa = 3.0;
            let p = Params { potential: Potential::Quadratic { kappa }, ..gl(1.0) };
            let s = DirectorSolver::new(&g, LinearSolveConfig::default());
            let dt = 0.01;
            let out = s.director_step(&d, None, &VelocityField::zeros(&g), dt, &p, None).unwrap();
            let factor = 1.0 - dt * kappa;
            for (k, c0) in [0.3, -0.5].iter().enumerate() {
                for x in out.interior(k) {
                    assert!((x - c0 * factor).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn quadratic_residual_of_constant() {
        let g = Grid::new(8, 8, 2.0, 1.0, BcMode::Dirichlet).unwrap();
        let c = [0.3, 0.4];
        let tr = BoundaryData::constant(&g, &c);
        let mut d = DirectorField::constant(&g, &c);
        d.apply_bc(Some(&tr)).unwrap();
        let (r, n) = director_residual(&d, &Potential::Quadratic { kappa: 2.0 });
        assert!((n - 2.0 * 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!(r.interior(0).iter().all(|x| (x - 0.6).abs() < 1e-12));
    }

    #[test]
    fn dirichlet_trace_preserved() {
        let g = Grid::unit_square(12, BcMode::Dirichlet).unwrap();
        let tr = BoundaryData::from_fn(&g, 2, |x, y| vec![(x + y).cos(), (x - y).sin()]);
        let mut d = DirectorField::from_fn(&g, 2, |x, y| vec![x * y, 1.0 - x]);
        d.apply_bc(Some(&tr)).unwrap();
        let s = DirectorSolver::new(&g, LinearSolveConfig::default());
        let out = s.director_step(&d, Some(&tr), &VelocityField::zeros(&g), 1e-2, &gl(0.5), None).unwrap();
        let back = BoundaryData::from_ghosts(&out);
        for side in [Side::Left, Side::Right, Side::Bottom, Side::Top] {
            for (a, b) in back.side(side).iter().zip(tr.side(side)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    /// Implicit solve matches the explicit action of `I - c lap` with the
    /// inhomogeneous ghost rule.
    #[test]
    fn implicit_solve_inverts_ghosted_operator() {
        let g = Grid::new(10, 7, 1.0, 0.7, BcMode::Dirichlet).unwrap();
        let tr = BoundaryData::from_fn(&g, 2, |x, y| vec![x + 2.0 * y, (3.0 * x).sin()]);
        let rhs = DirectorField::from_fn(&g, 2, |x, y| vec![x * x, y]);
        let s = DirectorSolver::new(&g, LinearSolveConfig::default());
        let c = 0.05;
        let x = s.solve_implicit_diffusion(&rhs, Some(&tr), c).unwrap();
        let lap = x.laplacian();
        for k in 0..2 {
            let xi = x.interior(k);
            let li = lap.interior(k);
            let ri = rhs.interior(k);
            for n in 0..xi.len() {
                assert!((xi[n] - c * li[n] - ri[n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kink_relaxation_residual_decreases() {
        let eta = 0.2;
        let g = Grid::new(64, 16, 2.0, 0.5, BcMode::Dirichlet).unwrap();
        let w = std::f64::consts::SQRT_2 * eta;
        let prof = |x: f64, y: f64| {
            let base = ((x - 1.0) / w).tanh();
            let bump = 0.05 * (std::f64::consts::PI * x / 2.0).sin() * (4.0 * std::f64::consts::PI * y).sin();
            vec![0.9 * base + bump, 0.0]
        };
        let tr = BoundaryData::from_fn(&g, 2, |x, _| vec![((x - 1.0) / w).tanh(), 0.0]);
        let mut d = DirectorField::from_fn(&g, 2, prof);
        d.apply_bc(Some(&tr)).unwrap();
        let p = gl(eta);
        let s = DirectorSolver::new(&g, LinearSolveConfig::default());
        let dt = p.potential.reaction_dt_bound(1.0);
        let zero = VelocityField::zeros(&g);
        let mut r = director_residual(&d, &p.potential).1;
        for _ in 0..100 {
            d = s.director_step(&d, Some(&tr), &zero, dt, &p, None).unwrap();
            let r1 = director_residual(&d, &p.potential).1;
            assert!(r1 <= r * (1.0 + 1e-12) + 1e-10, "{r} -> {r1}");
            assert!(d.linf() <= 1.0 + 1e-6);
            r = r1;
        }
    }

    #[test]
    fn rotation_commutes_with_step() {
        let g = Grid::unit_square(16, BcMode::Dirichlet).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = [c, -s, s, c];
        let tr = BoundaryData::from_fn(&g, 2, |x, y| vec![(x + y).cos(), (x + y).sin()]);
        let mut d = DirectorField::from_fn(&g, 2, |x, y| vec![(x + y).cos() * 0.9, (x * y).sin()]);
        d.apply_bc(Some(&tr)).unwrap();
        let v = VelocityField::from_stream_function(&g, |x, y| (x * y * (1.0 - x) * (1.0 - y)).powi(2));
        let solver = DirectorSolver::new(&g, LinearSolveConfig::default());
        let p = gl(0.3);
        let a = solver.director_step(&d, Some(&tr), &v, 1e-3, &p, None).unwrap().rotated(&q);
        let qtr = tr.rotated(&q);
        let b = solver.director_step(&d.rotated(&q), Some(&qtr), &v, 1e-3, &p, None).unwrap();
        assert!(DirectorField::difference(&a, &b).linf() < 1e-12);
    }
}
