//! Discrete norms. Every reduction runs in a fixed row-major order so results
//! are bit-reproducible for a given field.
//!
//! The gradient seminorm sums squared differences across every cell face.
//! Faces shared with the ghost layer get weight 1/2: this makes
//! `|grad f|^2 = -<f, lap f>` hold exactly for Dirichlet ghosts, leaves
//! Neumann ghosts at zero contribution and counts each periodic face once.

use super::{Array2, DirectorField, Grid, ScalarField, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1Semi,
    H2Semi,
    Linf,
}

pub trait Norms {
    /// `sum` of `f*g` weighted by cell area.
    fn inner(&self, other: &Self) -> f64;
    fn h1_semi_sq(&self) -> f64;
    fn h2_semi(&self) -> f64;
    fn linf(&self) -> f64;

    fn l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn h1_semi(&self) -> f64 {
        self.h1_semi_sq().sqrt()
    }

    /// `sqrt(|f|^2 + |grad f|^2)`
    fn h1(&self) -> f64 {
        (self.inner(self) + self.h1_semi_sq()).sqrt()
    }

    fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::L2 => self.l2(),
            NormKind::H1Semi => self.h1_semi(),
            NormKind::H2Semi => self.h2_semi(),
            NormKind::Linf => self.linf(),
        }
    }
}

fn cell_inner(a: &Array2, b: &Array2, g: &Grid) -> f64 {
    let mut s = 0.0;
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            s += a.get(i, j) * b.get(i, j);
        }
    }
    s * g.cell_area()
}

fn cell_grad_sq(a: &Array2, g: &Grid) -> f64 {
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let (ihx2, ihy2) = (1.0 / g.hx().powi(2), 1.0 / g.hy().powi(2));
    let mut sx = 0.0;
    for j in 0..ny {
        for i in -1..nx {
            let w = if i == -1 || i == nx - 1 { 0.5 } else { 1.0 };
            sx += w * (a.get(i + 1, j) - a.get(i, j)).powi(2);
        }
    }
    let mut sy = 0.0;
    for j in -1..ny {
        let w = if j == -1 || j == ny - 1 { 0.5 } else { 1.0 };
        for i in 0..nx {
            sy += w * (a.get(i, j + 1) - a.get(i, j)).powi(2);
        }
    }
    (sx * ihx2 + sy * ihy2) * g.cell_area()
}

fn cell_linf(a: &Array2, g: &Grid) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            m = m.max(a.get(i, j).abs());
        }
    }
    m
}

impl Norms for ScalarField {
    fn inner(&self, other: &Self) -> f64 {
        cell_inner(self.values(), other.values(), self.grid())
    }
    fn h1_semi_sq(&self) -> f64 {
        cell_grad_sq(self.values(), self.grid())
    }
    fn h2_semi(&self) -> f64 {
        self.laplacian().l2()
    }
    fn linf(&self) -> f64 {
        cell_linf(self.values(), self.grid())
    }
}

impl Norms for DirectorField {
    fn inner(&self, other: &Self) -> f64 {
        self.comps().iter().zip(other.comps()).map(|(a, b)| cell_inner(a, b, self.grid())).sum()
    }
    fn h1_semi_sq(&self) -> f64 {
        self.comps().iter().map(|a| cell_grad_sq(a, self.grid())).sum()
    }
    fn h2_semi(&self) -> f64 {
        self.laplacian().l2()
    }
    fn linf(&self) -> f64 {
        self.comps().iter().map(|a| cell_linf(a, self.grid())).fold(0.0, f64::max)
    }
}

impl Norms for VelocityField {
    fn inner(&self, other: &Self) -> f64 {
        let g = self.grid();
        let mut s = 0.0;
        for j in 0..g.ny() as isize {
            for i in g.u_distinct_x() {
                s += self.u().get(i, j) * other.u().get(i, j);
            }
        }
        for j in g.v_distinct_y() {
            for i in 0..g.nx() as isize {
                s += self.v().get(i, j) * other.v().get(i, j);
            }
        }
        s * g.cell_area()
    }

    fn h1_semi_sq(&self) -> f64 {
        let g = self.grid();
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let (ihx2, ihy2) = (1.0 / g.hx().powi(2), 1.0 / g.hy().powi(2));
        let (u, v) = (self.u(), self.v());
        let mut s = 0.0;
        // u: x-differences across cells, y-differences across nodes
        for j in 0..ny {
            for i in 0..nx {
                s += (u.get(i + 1, j) - u.get(i, j)).powi(2) * ihx2;
            }
        }
        for j in -1..ny {
            let w = if j == -1 || j == ny - 1 { 0.5 } else { 1.0 };
            for i in g.u_distinct_x() {
                s += w * (u.get(i, j + 1) - u.get(i, j)).powi(2) * ihy2;
            }
        }
        // v: y-differences across cells, x-differences across nodes
        for j in 0..ny {
            for i in 0..nx {
                s += (v.get(i, j + 1) - v.get(i, j)).powi(2) * ihy2;
            }
        }
        for j in g.v_distinct_y() {
            for i in -1..nx {
                let w = if i == -1 || i == nx - 1 { 0.5 } else { 1.0 };
                s += w * (v.get(i + 1, j) - v.get(i, j)).powi(2) * ihx2;
            }
        }
        s * g.cell_area()
    }

    fn h2_semi(&self) -> f64 {
        self.laplacian().l2()
    }

    fn linf(&self) -> f64 {
        self.max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BcMode, BoundaryData};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_velocity(g: &Grid, rng: &mut impl Rng) -> VelocityField {
        let mut w = VelocityField::zeros(g);
        for x in w.u_mut().data_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        for x in w.v_mut().data_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        w.apply_bc();
        w
    }

    #[test]
    fn zero_and_constant_fields() {
        let g = Grid::unit_square(8, BcMode::FreeSlip).unwrap();
        let z = DirectorField::zeros(&g, 2);
        for kind in [NormKind::L2, NormKind::H1Semi, NormKind::H2Semi, NormKind::Linf] {
            assert_eq!(z.norm(kind), 0.0);
        }
        let mut c = DirectorField::constant(&g, &[0.6, -0.8]);
        c.apply_bc(None).unwrap();
        assert!((c.l2() - 1.0).abs() < 1e-14);
        assert_eq!(c.h1_semi(), 0.0);
    }

    #[test]
    fn sine_mode_l2_converges_to_half() {
        let g = Grid::unit_square(256, BcMode::Periodic).unwrap();
        let s = ScalarField::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).sin());
        assert!((s.l2() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn gradient_seminorm_is_minus_inner_with_laplacian() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for bc in [BcMode::Dirichlet, BcMode::FreeSlip, BcMode::Periodic] {
            let g = Grid::new(9, 6, 1.0, 0.7, bc).unwrap();
            let mut d = DirectorField::from_fn(&g, 2, |_, _| {
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
            });
            let trace = (bc == BcMode::Dirichlet).then(|| BoundaryData::constant(&g, &[0.0, 0.0]));
            d.apply_bc(trace.as_ref()).unwrap();
            let lhs = d.h1_semi_sq();
            let rhs = -d.inner(&d.laplacian());
            assert!((lhs - rhs).abs() < 1e-12 * lhs, "{bc:?}: {lhs} vs {rhs}");

            let w = random_velocity(&g, &mut rng);
            let lhs = w.h1_semi_sq();
            let rhs = -w.inner(&w.laplacian());
            assert!((lhs - rhs).abs() < 1e-12 * lhs, "{bc:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn homogeneity_and_triangle_inequality() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let g = Grid::new(10, 12, 2.0, 1.0, BcMode::Dirichlet).unwrap();
        for _ in 0..20 {
            let a = random_velocity(&g, &mut rng);
            let b = random_velocity(&g, &mut rng);
            let alpha: f64 = rng.random_range(-3.0..3.0);
            for kind in [NormKind::L2, NormKind::H1Semi, NormKind::H2Semi, NormKind::Linf] {
                let na = a.norm(kind);
                let scaled = a.scaled(alpha).norm(kind);
                assert!((scaled - alpha.abs() * na).abs() <= 1e-13 * (1.0 + scaled));
                let mut sum = a.clone();
                sum.axpy(1.0, &b);
                assert!(sum.norm(kind) <= na + b.norm(kind) + 1e-12);
            }
        }
    }
}
