//! Physical parameters, the bulk potential and the elastic coupling between
//! director and flow.

use thiserror::Error;

use crate::grid::{Array2, DirectorField, Grid, Norms, VelocityField};

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange { name: &'static str, requirement: &'static str, value: f64 },
}

/// Bulk potential `F(d)` and its gradient `f = grad F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `F = (|d|^2 - 1)^2 / (4 eta^2)`
    GinzburgLandau { eta: f64 },
    /// `F = kappa |d|^2 / 2`
    Quadratic { kappa: f64 },
}

impl Potential {
    pub fn validate(&self) -> Result<(), ParamError> {
        let (name, value) = match *self {
            Potential::GinzburgLandau { eta } => ("potential.eta", eta),
            Potential::Quadratic { kappa } => ("potential.kappa", kappa),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(ParamError::OutOfRange { name, requirement: "finite and > 0", value });
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, d: &[f64]) -> f64 {
        let r2: f64 = d.iter().map(|x| x * x).sum();
        match *self {
            Potential::GinzburgLandau { eta } => (r2 - 1.0).powi(2) / (4.0 * eta * eta),
            Potential::Quadratic { kappa } => 0.5 * kappa * r2,
        }
    }

    /// Writes `f(d)` into `out`.
    #[inline]
    pub fn gradient(&self, d: &[f64], out: &mut [f64]) {
        let s = match *self {
            Potential::GinzburgLandau { eta } => {
                let r2: f64 = d.iter().map(|x| x * x).sum();
                (r2 - 1.0) / (eta * eta)
            }
            Potential::Quadratic { kappa } => kappa,
        };
        for (o, x) in out.iter_mut().zip(d) {
            *o = s * x;
        }
    }

    /// Writes the Jacobian `f'(d)` (row-major `m x m`) into `out`.
    #[inline]
    pub fn jacobian(&self, d: &[f64], out: &mut [f64]) {
        let m = d.len();
        debug_assert_eq!(out.len(), m * m);
        match *self {
            Potential::GinzburgLandau { eta } => {
                let ie2 = 1.0 / (eta * eta);
                let r2: f64 = d.iter().map(|x| x * x).sum();
                for r in 0..m {
                    for c in 0..m {
                        let diag = if r == c { r2 - 1.0 } else { 0.0 };
                        out[r * m + c] = (diag + 2.0 * d[r] * d[c]) * ie2;
                    }
                }
            }
            Potential::Quadratic { kappa } => {
                for r in 0..m {
                    for c in 0..m {
                        out[r * m + c] = if r == c { kappa } else { 0.0 };
                    }
                }
            }
        }
    }

    /// Largest step for which the explicit reaction term stays stable:
    /// `0.5 eta^2 / (3 gamma)` for Ginzburg-Landau (the Jacobian is bounded
    /// by `3/eta^2` on `|d| <= sqrt(2)`), `0.5 / (gamma kappa)` for Quadratic.
    pub fn reaction_dt_bound(&self, gamma: f64) -> f64 {
        match *self {
            Potential::GinzburgLandau { eta } => 0.5 * eta * eta / (3.0 * gamma),
            Potential::Quadratic { kappa } => 0.5 / (gamma * kappa),
        }
    }
}

/// Viscosity `nu`, coupling `lambda`, relaxation rate `gamma` and potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub nu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub potential: Potential,
}

impl Params {
    /// `nu` and `gamma` must be positive. `lambda = 0` is accepted and
    /// decouples the director from the flow.
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ParamError::OutOfRange { name, requirement: "finite and > 0", value })
            }
        };
        positive("params.nu", self.nu)?;
        positive("params.gamma", self.gamma)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ParamError::OutOfRange {
                name: "params.lambda",
                requirement: "finite and >= 0",
                value: self.lambda,
            });
        }
        self.potential.validate()
    }
}

/// `sum F(d) hx hy` over interior cells.
pub fn potential_integral(d: &DirectorField, potential: &Potential) -> f64 {
    let g = d.grid();
    let mut buf = vec![0.0; d.m()];
    let mut s = 0.0;
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            d.at(i, j, &mut buf);
            s += potential.value(&buf);
        }
    }
    s * g.cell_area()
}

/// `E(d) = |grad d|^2 / 2 + int F(d)`.
pub fn bulk_energy(d: &DirectorField, potential: &Potential) -> f64 {
    0.5 * d.h1_semi_sq() + potential_integral(d, potential)
}

/// `f(d)` at interior cells.
pub fn potential_gradient_field(d: &DirectorField, potential: &Potential) -> DirectorField {
    let g = *d.grid();
    let m = d.m();
    let mut out = DirectorField::zeros(&g, m);
    let (mut dv, mut fv) = (vec![0.0; m], vec![0.0; m]);
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            d.at(i, j, &mut dv);
            potential.gradient(&dv, &mut fv);
            for (k, c) in out.comps_mut().iter_mut().enumerate() {
                c.set(i, j, fv[k]);
            }
        }
    }
    out
}

/// `mu = lap d - f(d)` at interior cells. Ghosts of `d` must be current.
pub fn chemical_potential(d: &DirectorField, potential: &Potential) -> DirectorField {
    let mut mu = d.laplacian();
    let f = potential_gradient_field(d, potential);
    for (a, b) in mu.comps_mut().iter_mut().zip(f.comps()) {
        a.axpy(-1.0, b);
    }
    mu
}

/// Averages a pair of cell arrays `(cx, cy)` onto the faces of the MAC grid.
/// Wall-normal faces end up zero.
fn cells_to_faces(cx: &mut Array2, cy: &mut Array2, g: &Grid) -> VelocityField {
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    if g.bc().is_periodic() {
        crate::grid::wrap_cell_ghosts(cx, g);
        crate::grid::wrap_cell_ghosts(cy, g);
    }
    let mut out = VelocityField::zeros(g);
    for j in 0..ny {
        for i in g.u_unknown_x() {
            out.u_mut().set(i, j, 0.5 * (cx.get(i - 1, j) + cx.get(i, j)));
        }
    }
    for j in g.v_unknown_y() {
        for i in 0..nx {
            out.v_mut().set(i, j, 0.5 * (cy.get(i, j - 1) + cy.get(i, j)));
        }
    }
    out.apply_bc();
    out
}

/// Cell vector `(grad d)^T w`, i.e. `sum_k grad d_k w_k`, with centered
/// differences for the gradient.
fn gradient_transpose_times(d: &DirectorField, w: &DirectorField) -> (Array2, Array2) {
    let g = *d.grid();
    let mut cx = Array2::cells(&g);
    let mut cy = Array2::cells(&g);
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let (mut sx, mut sy) = (0.0, 0.0);
            for k in 0..d.m() {
                let (dx, dy) = d.centered_gradient(k, i, j);
                let wk = w.comp(k).get(i, j);
                sx += dx * wk;
                sy += dy * wk;
            }
            cx.set(i, j, sx);
            cy.set(i, j, sy);
        }
    }
    (cx, cy)
}

/// Force exerted on the flow, `-lambda (grad d)^T (lap d - f(d))`, averaged
/// from cells to faces. The face average is the adjoint of the averaging used
/// by the director transport term, so `<v, F> = -lambda <(v.grad) d, mu>`
/// holds exactly on the grid.
pub fn elastic_force(d: &DirectorField, params: &Params) -> VelocityField {
    let mu = chemical_potential(d, &params.potential);
    elastic_force_from_mu(d, &mu, params.lambda)
}

pub(crate) fn elastic_force_from_mu(d: &DirectorField, mu: &DirectorField, lambda: f64) -> VelocityField {
    let g = *d.grid();
    if lambda == 0.0 {
        return VelocityField::zeros(&g);
    }
    let (mut cx, mut cy) = gradient_transpose_times(d, mu);
    cx.scale(-lambda);
    cy.scale(-lambda);
    cells_to_faces(&mut cx, &mut cy, &g)
}

/// Row-wise divergence of the Ericksen stress `grad d (.) grad d` on the
/// faces, evaluated from centered cell gradients. Only faces whose stencil
/// stays inside the grid are filled (all faces when periodic); it serves as an
/// independent cross-check of [`elastic_force`].
pub fn stress_divergence(d: &DirectorField) -> VelocityField {
    let g = *d.grid();
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let (hx, hy) = (g.hx(), g.hy());
    let mut txx = Array2::cells(&g);
    let mut txy = Array2::cells(&g);
    let mut tyy = Array2::cells(&g);
    for j in 0..ny {
        for i in 0..nx {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for k in 0..d.m() {
                let (dx, dy) = d.centered_gradient(k, i, j);
                a += dx * dx;
                b += dx * dy;
                c += dy * dy;
            }
            txx.set(i, j, a);
            txy.set(i, j, b);
            tyy.set(i, j, c);
        }
    }
    let periodic = g.bc().is_periodic();
    if periodic {
        for t in [&mut txx, &mut txy, &mut tyy] {
            crate::grid::wrap_cell_ghosts(t, &g);
        }
    }
    let cell = |t: &Array2, i: isize, j: isize| {
        if periodic {
            t.get(i.rem_euclid(nx), j.rem_euclid(ny))
        } else {
            t.get(i, j)
        }
    };
    let mut out = VelocityField::zeros(&g);
    let (ylo, yhi) = if periodic { (0, ny) } else { (1, ny - 1) };
    let (xlo, xhi) = if periodic { (0, nx) } else { (1, nx - 1) };
    for j in ylo..yhi {
        for i in g.u_unknown_x() {
            let dxx = (cell(&txx, i, j) - cell(&txx, i - 1, j)) / hx;
            let face = |jj: isize| 0.5 * (cell(&txy, i - 1, jj) + cell(&txy, i, jj));
            let dxy = (face(j + 1) - face(j - 1)) / (2.0 * hy);
            out.u_mut().set(i, j, dxx + dxy);
        }
    }
    for j in g.v_unknown_y() {
        for i in xlo..xhi {
            let dyy = (cell(&tyy, i, j) - cell(&tyy, i, j - 1)) / hy;
            let face = |ii: isize| 0.5 * (cell(&txy, ii, j - 1) + cell(&txy, ii, j));
            let dxy = (face(i + 1) - face(i - 1)) / (2.0 * hx);
            out.v_mut().set(i, j, dyy + dxy);
        }
    }
    if periodic {
        out.apply_bc();
    }
    out
}

/// Face field `grad(|grad d|^2 / 2) + (grad d)^T lap d`, the right-hand side
/// of the stress identity, assembled from the same centered gradients.
pub fn stress_identity_rhs(d: &DirectorField) -> VelocityField {
    let g = *d.grid();
    let lap = d.laplacian();
    let (mut cx, mut cy) = gradient_transpose_times(d, &lap);
    let mut half_sq = crate::grid::ScalarField::zeros(&g);
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            let mut s = 0.0;
            for k in 0..d.m() {
                let (dx, dy) = d.centered_gradient(k, i, j);
                s += dx * dx + dy * dy;
            }
            half_sq.values_mut().set(i, j, 0.5 * s);
        }
    }
    half_sq.apply_bc();
    let mut out = cells_to_faces(&mut cx, &mut cy, &g);
    out.axpy(1.0, &crate::grid::gradient_cc_to_mac(&half_sq));
    out
}
