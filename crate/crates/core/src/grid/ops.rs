//! Second-order centered stencils on the staggered grid.
//!
//! All operators read ghost values, so inputs must have had `apply_bc`
//! called. Outputs carry zero ghosts unless stated otherwise.

use super::{Array2, DirectorField, Grid, ScalarField, VelocityField};

/// Five-point Laplacian of a ghost-filled cell array, interior cells only.
pub fn laplacian_cells(a: &Array2, grid: &Grid) -> Array2 {
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let (ihx2, ihy2) = (1.0 / grid.hx().powi(2), 1.0 / grid.hy().powi(2));
    let mut out = Array2::cells(grid);
    for j in 0..ny {
        for i in 0..nx {
            let c = a.get(i, j);
            let lx = (a.get(i + 1, j) - 2.0 * c + a.get(i - 1, j)) * ihx2;
            let ly = (a.get(i, j + 1) - 2.0 * c + a.get(i, j - 1)) * ihy2;
            out.set(i, j, lx + ly);
        }
    }
    out
}

impl ScalarField {
    pub fn laplacian(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        *out.values_mut() = laplacian_cells(self.values(), self.grid());
        out
    }
}

impl DirectorField {
    /// Componentwise five-point Laplacian.
    pub fn laplacian(&self) -> DirectorField {
        let mut out = DirectorField::zeros(self.grid(), self.m());
        for (o, c) in out.comps_mut().iter_mut().zip(self.comps()) {
            *o = laplacian_cells(c, self.grid());
        }
        out
    }

    /// Centered cell gradient `(d/dx, d/dy)` of component `k` at cell `(i, j)`.
    #[inline]
    pub(crate) fn centered_gradient(&self, k: usize, i: isize, j: isize) -> (f64, f64) {
        let c = &self.comps()[k];
        let g = self.grid();
        (
            (c.get(i + 1, j) - c.get(i - 1, j)) / (2.0 * g.hx()),
            (c.get(i, j + 1) - c.get(i, j - 1)) / (2.0 * g.hy()),
        )
    }
}

#[inline]
fn wrap(i: isize, n: isize) -> isize {
    if i < 0 {
        i + n
    } else if i >= n {
        i - n
    } else {
        i
    }
}

impl VelocityField {
    /// Componentwise five-point Laplacian at the unknown faces.
    pub fn laplacian(&self) -> VelocityField {
        let g = *self.grid();
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let (ihx2, ihy2) = (1.0 / g.hx().powi(2), 1.0 / g.hy().powi(2));
        let periodic = g.bc().is_periodic();
        let (u, v) = (self.u(), self.v());
        let mut out = VelocityField::zeros(&g);
        for j in 0..ny {
            for i in g.u_unknown_x() {
                let west = if periodic { wrap(i - 1, nx) } else { i - 1 };
                let c = u.get(i, j);
                let val = (u.get(i + 1, j) - 2.0 * c + u.get(west, j)) * ihx2
                    + (u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1)) * ihy2;
                out.u_mut().set(i, j, val);
            }
        }
        for j in g.v_unknown_y() {
            let south = if periodic { wrap(j - 1, ny) } else { j - 1 };
            for i in 0..nx {
                let c = v.get(i, j);
                let val = (v.get(i + 1, j) - 2.0 * c + v.get(i - 1, j)) * ihx2
                    + (v.get(i, j + 1) - 2.0 * c + v.get(i, south)) * ihy2;
                out.v_mut().set(i, j, val);
            }
        }
        if periodic {
            out.apply_bc();
        }
        out
    }
}

/// Cell divergence `(u_{i+1,j} - u_{i,j})/hx + (v_{i,j+1} - v_{i,j})/hy`.
pub fn divergence(w: &VelocityField) -> ScalarField {
    let g = *w.grid();
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(&g);
    let (u, v) = (w.u(), w.v());
    for j in 0..ny {
        for i in 0..nx {
            let d = (u.get(i + 1, j) - u.get(i, j)) / hx + (v.get(i, j + 1) - v.get(i, j)) / hy;
            out.values_mut().set(i, j, d);
        }
    }
    out.apply_bc();
    out
}

/// Two-point face gradient of a ghost-filled cell scalar. With the Neumann
/// ghosts used at walls the wall-normal faces come out zero.
pub fn gradient_cc_to_mac(p: &ScalarField) -> VelocityField {
    let g = *p.grid();
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VelocityField::zeros(&g);
    for j in 0..ny {
        for i in 0..=nx {
            out.u_mut().set(i, j, (p.get(i, j) - p.get(i - 1, j)) / hx);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            out.v_mut().set(i, j, (p.get(i, j) - p.get(i, j - 1)) / hy);
        }
    }
    out.apply_bc();
    out
}

/// Transport term `(v . grad) d` at cell centers: face velocities averaged to
/// the cell, centered differences for the director.
pub fn advect_director(w: &VelocityField, d: &DirectorField) -> DirectorField {
    let g = *d.grid();
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let mut out = DirectorField::zeros(&g, d.m());
    let (u, v) = (w.u(), w.v());
    for j in 0..ny {
        for i in 0..nx {
            let ub = 0.5 * (u.get(i, j) + u.get(i + 1, j));
            let vb = 0.5 * (v.get(i, j) + v.get(i, j + 1));
            for k in 0..d.m() {
                let (dx, dy) = d.centered_gradient(k, i, j);
                out.comps_mut()[k].set(i, j, ub * dx + vb * dy);
            }
        }
    }
    out
}

/// Skew-symmetric centered advection `(v . grad) v` on the MAC grid.
///
/// Each face is transported by mass fluxes averaged to the faces of its own
/// control volume; the operator is written as `sum_f m_f n_f w_nb / (2h)`, so
/// `<w, N(w)> = 0` holds exactly for any `w` and it coincides with the
/// conservative form whenever `w` is discretely divergence-free.
pub fn advect_velocity(w: &VelocityField) -> VelocityField {
    let g = *w.grid();
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let (h2x, h2y) = (2.0 * g.hx(), 2.0 * g.hy());
    let periodic = g.bc().is_periodic();
    let (u, v) = (w.u(), w.v());
    let mut out = VelocityField::zeros(&g);

    for j in 0..ny {
        for i in g.u_unknown_x() {
            let west = if periodic { wrap(i - 1, nx) } else { i - 1 };
            let uc = u.get(i, j);
            let (ue, uw) = (u.get(i + 1, j), u.get(west, j));
            let me = 0.5 * (uc + ue);
            let mw = 0.5 * (uw + uc);
            let vw = if periodic { wrap(i - 1, nx) } else { i - 1 };
            let mn = 0.5 * (v.get(vw, j + 1) + v.get(i, j + 1));
            let ms = 0.5 * (v.get(vw, j) + v.get(i, j));
            let val = (me * ue - mw * uw) / h2x
                + (mn * u.get(i, j + 1) - ms * u.get(i, j - 1)) / h2y;
            out.u_mut().set(i, j, val);
        }
    }
    for j in g.v_unknown_y() {
        let south = if periodic { wrap(j - 1, ny) } else { j - 1 };
        for i in 0..nx {
            let vc = v.get(i, j);
            let (vn, vs) = (v.get(i, j + 1), v.get(i, south));
            let mn = 0.5 * (vc + vn);
            let ms = 0.5 * (vs + vc);
            let me = 0.5 * (u.get(i + 1, south) + u.get(i + 1, j));
            let mw = 0.5 * (u.get(i, south) + u.get(i, j));
            let val = (me * v.get(i + 1, j) - mw * v.get(i - 1, j)) / h2x
                + (mn * vn - ms * vs) / h2y;
            out.v_mut().set(i, j, val);
        }
    }
    if periodic {
        out.apply_bc();
    }
    out
}
