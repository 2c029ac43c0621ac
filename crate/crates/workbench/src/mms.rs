//! Manufactured-solution verification.
//!
//! Exact fields are finite sums of separable terms `c X(x) Y(y) T(t)` whose
//! factors are sines or affine functions, so every derivative needed by the
//! source terms is evaluated in closed form.
//!
//! Momentum source: `v_t + (v.grad)v - nu lap v + grad P + lambda (grad d)^T (lap d - f(d))`.
//! Director source: `d_t + (v.grad)d - gamma (lap d - f(d))`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;
use thiserror::Error;

use nematic_core::grid::{BcMode, BoundaryData, DirectorField, Grid, Norms, ScalarField, VelocityField};
use nematic_core::linsolve::LinearSolveConfig;
use nematic_core::material::{Params, Potential};
use nematic_core::simulator::{SimError, SimState, Simulator, SourceTerms};

/// One-variable factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `sin(k s + phase)`
    Sin { k: f64, phase: f64 },
    /// `a + b s`
    Affine { a: f64, b: f64 },
}

impl Factor {
    pub const ONE: Factor = Factor::Affine { a: 1.0, b: 0.0 };

    pub fn sin(k: f64) -> Self {
        Factor::Sin { k, phase: 0.0 }
    }
    pub fn cos(k: f64) -> Self {
        Factor::Sin { k, phase: FRAC_PI_2 }
    }

    /// `n`-th derivative at `s`.
    pub fn eval(self, s: f64, n: u32) -> f64 {
        match self {
            Factor::Sin { k, phase } => k.powi(n as i32) * (k * s + phase + n as f64 * FRAC_PI_2).sin(),
            Factor::Affine { a, b } => match n {
                0 => a + b * s,
                1 => b,
                _ => 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub c: f64,
    pub x: Factor,
    pub y: Factor,
    pub t: Factor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr(pub Vec<Term>);

impl Expr {
    /// Mixed partial derivative of orders `(nx, ny, nt)`.
    pub fn eval(&self, x: f64, y: f64, t: f64, nx: u32, ny: u32, nt: u32) -> f64 {
        self.0.iter().map(|m| m.c * m.x.eval(x, nx) * m.y.eval(y, ny) * m.t.eval(t, nt)).sum()
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.eval(x, y, t, 0, 0, 0)
    }

    pub fn laplacian(&self, x: f64, y: f64, t: f64) -> f64 {
        self.eval(x, y, t, 2, 0, 0) + self.eval(x, y, t, 0, 2, 0)
    }
}

/// Closed-form solution on the unit square with no-slip walls.
///
/// Velocity comes from `psi = amp T(t) sin^2(pi x) sin^2(pi y)`, so it is
/// divergence free and vanishes on the walls; the director perturbation
/// vanishes on the walls, so the trace is time independent.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub params: Params,
    pub amp: f64,
    pub time: Factor,
    pub u: Expr,
    pub v: Expr,
    pub p: Expr,
    pub d: Vec<Expr>,
}

impl Manufactured {
    fn velocity_exprs(amp: f64, time: Factor) -> (Expr, Expr) {
        let c = 0.5 * amp * PI;
        let k = 2.0 * PI;
        let u = Expr(vec![
            Term { c, x: Factor::ONE, y: Factor::sin(k), t: time },
            Term { c: -c, x: Factor::cos(k), y: Factor::sin(k), t: time },
        ]);
        let v = Expr(vec![
            Term { c: -c, x: Factor::sin(k), y: Factor::ONE, t: time },
            Term { c, x: Factor::sin(k), y: Factor::cos(k), t: time },
        ]);
        (u, v)
    }

    /// Smooth unit-length base director `(cos((x+y)/2), sin((x+y)/2))` plus
    /// `pert_k T_d(t) sin(pi x) sin(pi y)`.
    fn director_exprs(pert: [f64; 2], time: Factor) -> Vec<Expr> {
        let h = 0.5;
        let (s, c) = (Factor::sin(h), Factor::cos(h));
        let bubble = |a: f64| Term { c: a, x: Factor::sin(PI), y: Factor::sin(PI), t: time };
        let d0 = Expr(vec![
            Term { c: 1.0, x: c, y: c, t: Factor::ONE },
            Term { c: -1.0, x: s, y: s, t: Factor::ONE },
            bubble(pert[0]),
        ]);
        let d1 = Expr(vec![
            Term { c: 1.0, x: s, y: c, t: Factor::ONE },
            Term { c: 1.0, x: c, y: s, t: Factor::ONE },
            bubble(pert[1]),
        ]);
        vec![d0, d1]
    }

    /// Coupled nonlinear case with time factors `time` (velocity, pressure)
    /// and `dtime` (director perturbation).
    pub fn smooth(time: Factor, dtime: Factor) -> Self {
        let amp = 0.2;
        let (u, v) = Self::velocity_exprs(amp, time);
        let p = Expr(vec![Term { c: 0.5, x: Factor::cos(PI), y: Factor::cos(PI), t: time }]);
        Manufactured {
            params: Params { nu: 1.0, lambda: 1.0, gamma: 1.0, potential: Potential::GinzburgLandau { eta: 0.5 } },
            amp,
            time,
            u,
            v,
            p,
            d: Self::director_exprs([0.2, -0.1], dtime),
        }
    }

    /// Fluid at rest, affine director, quadratic potential, no coupling. The
    /// discrete operators are exact on this data.
    pub fn linear() -> Self {
        let aff = |a, b| Factor::Affine { a, b };
        let d = vec![
            Expr(vec![
                Term { c: 1.0, x: aff(0.3, 0.2), y: Factor::ONE, t: Factor::ONE },
                Term { c: -0.1, x: Factor::ONE, y: aff(0.0, 1.0), t: Factor::ONE },
            ]),
            Expr(vec![
                Term { c: 1.0, x: aff(0.5, -0.3), y: Factor::ONE, t: Factor::ONE },
                Term { c: 0.4, x: Factor::ONE, y: aff(0.0, 1.0), t: Factor::ONE },
            ]),
        ];
        Manufactured {
            params: Params { nu: 1.0, lambda: 0.0, gamma: 1.0, potential: Potential::Quadratic { kappa: 1.0 } },
            amp: 0.0,
            time: Factor::ONE,
            u: Expr::default(),
            v: Expr::default(),
            p: Expr::default(),
            d,
        }
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn director_at(&self, x: f64, y: f64, t: f64) -> Vec<f64> {
        self.d.iter().map(|e| e.value(x, y, t)).collect()
    }

    /// `lap d - f(d)` at a point.
    fn chem(&self, x: f64, y: f64, t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.director_at(x, y, t);
        let mut f = vec![0.0; d.len()];
        self.params.potential.gradient(&d, &mut f);
        let mu = self.d.iter().zip(&f).map(|(e, fk)| e.laplacian(x, y, t) - fk).collect();
        (d, mu)
    }

    /// Momentum source; `axis` 0 for x, 1 for y.
    pub fn momentum_source(&self, x: f64, y: f64, t: f64, axis: usize) -> f64 {
        let (w, dx, dy) = if axis == 0 { (&self.u, 1, 0) } else { (&self.v, 0, 1) };
        let (u, v) = (self.u.value(x, y, t), self.v.value(x, y, t));
        let mut s = w.eval(x, y, t, 0, 0, 1) + u * w.eval(x, y, t, 1, 0, 0) + v * w.eval(x, y, t, 0, 1, 0)
            - self.params.nu * w.laplacian(x, y, t)
            + self.p.eval(x, y, t, dx, dy, 0);
        if self.params.lambda != 0.0 {
            let (_, mu) = self.chem(x, y, t);
            let grad: f64 = self.d.iter().zip(&mu).map(|(e, m)| e.eval(x, y, t, dx, dy, 0) * m).sum();
            s += self.params.lambda * grad;
        }
        s
    }

    pub fn director_source(&self, x: f64, y: f64, t: f64) -> Vec<f64> {
        let (u, v) = (self.u.value(x, y, t), self.v.value(x, y, t));
        let (_, mu) = self.chem(x, y, t);
        self.d
            .iter()
            .zip(&mu)
            .map(|(e, m)| {
                e.eval(x, y, t, 0, 0, 1) + u * e.eval(x, y, t, 1, 0, 0) + v * e.eval(x, y, t, 0, 1, 0)
                    - self.params.gamma * m
            })
            .collect()
    }

    pub fn grid(n: usize) -> Grid {
        Grid::unit_square(n, BcMode::Dirichlet).expect("valid grid")
    }

    pub fn trace(&self, grid: &Grid) -> BoundaryData {
        BoundaryData::from_fn(grid, self.m(), |x, y| self.director_at(x, y, 0.0))
    }

    /// Exact velocity sampled at faces.
    pub fn velocity(&self, grid: &Grid, t: f64) -> VelocityField {
        VelocityField::from_fn(grid, |x, y| self.u.value(x, y, t), |x, y| self.v.value(x, y, t))
    }

    /// Discretely divergence-free interpolant from the stream function.
    pub fn velocity_div_free(&self, grid: &Grid, t: f64) -> VelocityField {
        let a = self.amp * self.time.eval(t, 0);
        VelocityField::from_stream_function(grid, |x, y| {
            let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
            a * sx * sx * sy * sy
        })
    }

    pub fn director(&self, grid: &Grid, t: f64) -> DirectorField {
        DirectorField::from_fn(grid, self.m(), |x, y| self.director_at(x, y, t))
    }

    pub fn pressure(&self, grid: &Grid, t: f64) -> ScalarField {
        let mut p = ScalarField::from_fn(grid, |x, y| self.p.value(x, y, t));
        p.remove_mean();
        p
    }
}

impl SourceTerms for Manufactured {
    fn momentum(&self, grid: &Grid, t: f64) -> VelocityField {
        VelocityField::from_fn(grid, |x, y| self.momentum_source(x, y, t, 0), |x, y| self.momentum_source(x, y, t, 1))
    }

    fn director(&self, grid: &Grid, m: usize, t: f64) -> DirectorField {
        debug_assert_eq!(m, self.m());
        DirectorField::from_fn(grid, m, |x, y| self.director_source(x, y, t))
    }
}

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("unknown MMS case `{0}`, expected linear, spatial or temporal")]
    UnknownCase(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("level {level}: steady state not reached after {steps} steps (last increment {increment:.3e})")]
    NoSteadyState { level: usize, steps: usize, increment: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MmsMode {
    /// March to the discrete steady state and compare with the exact one.
    Steady { dt: f64 },
    /// Integrate `[0, t_end]` with each step size.
    Transient { t_end: f64 },
}

/// A manufactured solution plus the refinement it is run on.
#[derive(Debug, Clone)]
pub struct MmsCase {
    pub name: String,
    pub exact: Manufactured,
    pub grids: Vec<usize>,
    pub dts: Vec<f64>,
    pub mode: MmsMode,
}

impl MmsCase {
    pub fn named(name: &str) -> Result<Self, MmsError> {
        let case = match name {
            "linear" => MmsCase {
                name: name.into(),
                exact: Manufactured::linear(),
                grids: vec![8, 16, 32],
                dts: vec![1e-2],
                mode: MmsMode::Steady { dt: 1e-2 },
            },
            "spatial" => MmsCase {
                name: name.into(),
                exact: Manufactured::smooth(Factor::ONE, Factor::ONE),
                grids: vec![32, 64, 128],
                dts: vec![1e-2],
                mode: MmsMode::Steady { dt: 1e-2 },
            },
            "temporal" => MmsCase {
                name: name.into(),
                exact: Manufactured::smooth(Factor::cos(4.0), Factor::Sin { k: 4.0, phase: 1.0 }),
                grids: vec![32],
                dts: vec![4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3],
                mode: MmsMode::Transient { t_end: 0.8 },
            },
            other => return Err(MmsError::UnknownCase(other.into())),
        };
        Ok(case)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsLevel {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    /// L2 error against the exact solution.
    pub err_v: f64,
    pub err_d: f64,
    #[serde(skip)]
    state: Option<SimState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsTable {
    pub case: String,
    pub levels: Vec<MmsLevel>,
    /// What the orders are measured on: exact errors, or for transient cases
    /// differences of successive levels.
    pub measure: &'static str,
    pub order_v: Vec<Option<f64>>,
    pub order_d: Vec<Option<f64>>,
    /// Errors below this are roundoff and give no order.
    pub saturation: f64,
    pub saturated: bool,
    pub monotone: bool,
}

impl MmsTable {
    pub fn min_order_v(&self) -> Option<f64> {
        self.order_v.iter().flatten().copied().reduce(f64::min)
    }
    pub fn min_order_d(&self) -> Option<f64> {
        self.order_d.iter().flatten().copied().reduce(f64::min)
    }
}

pub const SATURATION: f64 = 1e-11;

fn orders(errs: &[f64]) -> Vec<Option<f64>> {
    errs.windows(2)
        .map(|w| (w[0] > SATURATION && w[1] > SATURATION).then(|| (w[0] / w[1]).log2()))
        .collect()
}

fn velocity_diff(a: &VelocityField, b: &VelocityField) -> f64 {
    let mut e = a.clone();
    e.axpy(-1.0, b);
    e.l2()
}

fn run_level(case: &MmsCase, level: usize, n: usize, dt: f64) -> Result<MmsLevel, MmsError> {
    let ex = &case.exact;
    let grid = Manufactured::grid(n);
    let sim = Simulator::new(&grid, ex.params, Some(ex.trace(&grid)), LinearSolveConfig::default())?;
    let mut state = sim.initial_state(&ex.velocity_div_free(&grid, 0.0), ex.director(&grid, 0.0), 0.0)?;
    state.flow.p = ex.pressure(&grid, 0.0);
    let mut steps = 0;
    match case.mode {
        MmsMode::Steady { .. } => {
            const MAX_STEPS: usize = 20_000;
            loop {
                let next = sim.coupled_step(&state, dt, Some(ex))?;
                steps += 1;
                let inc = velocity_diff(&next.flow.v, &state.flow.v).max(DirectorField::difference(&next.director, &state.director).l2());
                state = next;
                // steady time: sources do not depend on t
                state.t = 0.0;
                if inc <= 1e-13 && steps >= 5 {
                    break;
                }
                if steps == MAX_STEPS {
                    return Err(MmsError::NoSteadyState { level, steps, increment: inc });
                }
            }
        }
        MmsMode::Transient { t_end } => {
            let count = (t_end / dt).round() as usize;
            for _ in 0..count {
                state = sim.coupled_step(&state, dt, Some(ex))?;
                steps += 1;
            }
            state.t = t_end;
        }
    }
    let t = state.t;
    let err_v = velocity_diff(&state.flow.v, &ex.velocity(&grid, t));
    let err_d = DirectorField::difference(&state.director, &ex.director(&grid, t)).l2();
    Ok(MmsLevel { n, dt, steps, err_v, err_d, state: Some(state) })
}

/// Runs every level of `case` (levels in parallel) and tabulates errors and
/// observed orders `log2(e_i / e_{i+1})`.
pub fn mms_run(case: &MmsCase) -> Result<MmsTable, MmsError> {
    let plan: Vec<(usize, f64)> = match case.mode {
        MmsMode::Steady { dt } => case.grids.iter().map(|&n| (n, dt)).collect(),
        MmsMode::Transient { .. } => case.dts.iter().map(|&dt| (case.grids[0], dt)).collect(),
    };
    let results: Vec<Result<MmsLevel, MmsError>> = std::thread::scope(|s| {
        let handles: Vec<_> = plan
            .iter()
            .enumerate()
            .map(|(level, &(n, dt))| s.spawn(move || run_level(case, level, n, dt)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("MMS level panicked")).collect()
    });
    let levels = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let err_v: Vec<f64> = levels.iter().map(|l| l.err_v).collect();
    let err_d: Vec<f64> = levels.iter().map(|l| l.err_d).collect();
    let (measure, mv, md) = match case.mode {
        MmsMode::Steady { .. } => ("exact error", err_v.clone(), err_d.clone()),
        MmsMode::Transient { .. } => {
            // same grid on every level: successive differences isolate the time error
            let st: Vec<&SimState> = levels.iter().map(|l| l.state.as_ref().unwrap()).collect();
            let dv = st.windows(2).map(|w| velocity_diff(&w[0].flow.v, &w[1].flow.v)).collect();
            let dd = st.windows(2).map(|w| DirectorField::difference(&w[0].director, &w[1].director).l2()).collect();
            ("successive difference", dv, dd)
        }
    };
    let order_v = orders(&mv);
    let order_d = orders(&md);
    let saturated = mv.iter().chain(&md).all(|e| *e <= SATURATION);
    let monotone = mv.windows(2).all(|w| w[1] < w[0] || w[0] <= SATURATION)
        && md.windows(2).all(|w| w[1] < w[0] || w[0] <= SATURATION);
    if !monotone {
        log::warn!("MMS case {}: errors are not monotone under refinement", case.name);
    }
    Ok(MmsTable { case: case.name.clone(), levels, measure, order_v, order_d, saturation: SATURATION, saturated, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, s: f64) -> f64 {
        let h = 1e-5;
        (f(s + h) - f(s - h)) / (2.0 * h)
    }

    #[test]
    fn factor_derivatives_match_differences() {
        for f in [Factor::sin(2.0), Factor::Sin { k: 3.0, phase: 0.7 }, Factor::Affine { a: 0.2, b: -1.5 }] {
            for n in 0..3 {
                let s = 0.37;
                let num = fd(|z| f.eval(z, n), s);
                assert!((num - f.eval(s, n + 1)).abs() < 1e-7, "{f:?} {n}");
            }
        }
    }

    #[test]
    fn exact_velocity_is_divergence_free_and_vanishes_on_walls() {
        let ex = Manufactured::smooth(Factor::cos(4.0), Factor::ONE);
        for &(x, y) in &[(0.3, 0.7), (0.1, 0.45), (0.9, 0.2)] {
            let div = ex.u.eval(x, y, 0.3, 1, 0, 0) + ex.v.eval(x, y, 0.3, 0, 1, 0);
            assert!(div.abs() < 1e-13);
        }
        for s in [0.0, 0.25, 0.6, 1.0] {
            for (x, y) in [(0.0, s), (1.0, s), (s, 0.0), (s, 1.0)] {
                assert!(ex.u.value(x, y, 0.1).abs() < 1e-14 && ex.v.value(x, y, 0.1).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn director_source_matches_difference_quotients() {
        let ex = Manufactured::smooth(Factor::cos(4.0), Factor::Sin { k: 4.0, phase: 1.0 });
        let (x, y, t) = (0.31, 0.58, 0.2);
        let h = 1e-4;
        let d = |x: f64, y: f64, t: f64| ex.director_at(x, y, t);
        let s = ex.director_source(x, y, t);
        let (u, v) = (ex.u.value(x, y, t), ex.v.value(x, y, t));
        let eta2 = 0.25;
        for k in 0..2 {
            let dk = |x, y, t| d(x, y, t)[k];
            let dt = (dk(x, y, t + h) - dk(x, y, t - h)) / (2.0 * h);
            let dx = (dk(x + h, y, t) - dk(x - h, y, t)) / (2.0 * h);
            let dy = (dk(x, y + h, t) - dk(x, y - h, t)) / (2.0 * h);
            let lap = (dk(x + h, y, t) + dk(x - h, y, t) + dk(x, y + h, t) + dk(x, y - h, t) - 4.0 * dk(x, y, t)) / (h * h);
            let dd = d(x, y, t);
            let norm2 = dd[0] * dd[0] + dd[1] * dd[1];
            let f = (norm2 - 1.0) * dd[k] / eta2;
            let expect = dt + u * dx + v * dy - (lap - f);
            assert!((s[k] - expect).abs() < 1e-5, "{k}: {} vs {expect}", s[k]);
        }
    }

    #[test]
    fn momentum_source_matches_difference_quotients() {
        let ex = Manufactured::smooth(Factor::cos(4.0), Factor::Sin { k: 4.0, phase: 1.0 });
        let (x, y, t) = (0.63, 0.27, 0.4);
        let h = 1e-4;
        let e = |w: &Expr, x: f64, y: f64, t: f64| w.value(x, y, t);
        let ddx = |w: &Expr, x: f64, y: f64, t: f64| (e(w, x + h, y, t) - e(w, x - h, y, t)) / (2.0 * h);
        let ddy = |w: &Expr, x: f64, y: f64, t: f64| (e(w, x, y + h, t) - e(w, x, y - h, t)) / (2.0 * h);
        let lap = |w: &Expr, x: f64, y: f64, t: f64| {
            (e(w, x + h, y, t) + e(w, x - h, y, t) + e(w, x, y + h, t) + e(w, x, y - h, t) - 4.0 * e(w, x, y, t)) / (h * h)
        };
        let (u, v) = (ex.u.value(x, y, t), ex.v.value(x, y, t));
        let dd = ex.director_at(x, y, t);
        let norm2 = dd[0] * dd[0] + dd[1] * dd[1];
        let mu: Vec<f64> = (0..2).map(|k| lap(&ex.d[k], x, y, t) - (norm2 - 1.0) * dd[k] / 0.25).collect();
        for (axis, w) in [(0, &ex.u), (1, &ex.v)] {
            let wt = (e(w, x, y, t + h) - e(w, x, y, t - h)) / (2.0 * h);
            let (pd, grad): (f64, f64) = if axis == 0 {
                (ddx(&ex.p, x, y, t), (0..2).map(|k| ddx(&ex.d[k], x, y, t) * mu[k]).sum())
            } else {
                (ddy(&ex.p, x, y, t), (0..2).map(|k| ddy(&ex.d[k], x, y, t) * mu[k]).sum())
            };
            let expect = wt + u * ddx(w, x, y, t) + v * ddy(w, x, y, t) - lap(w, x, y, t) + pd + grad;
            let got = ex.momentum_source(x, y, t, axis);
            assert!((got - expect).abs() < 1e-4 * (1.0 + expect.abs()), "{axis}: {got} vs {expect}");
        }
    }

    #[test]
    fn linear_case_is_exact() {
        let table = mms_run(&MmsCase::named("linear").unwrap()).unwrap();
        assert!(table.saturated, "{table:?}");
        assert!(table.order_v.iter().chain(&table.order_d).all(Option::is_none));
    }

    #[test]
    fn unknown_case_rejected() {
        assert!(matches!(MmsCase::named("cubic"), Err(MmsError::UnknownCase(_))));
    }
}
