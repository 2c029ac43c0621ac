//! Uniform rectangular grids, staggered grid functions and the discrete
//! operators acting on them.
//!
//! Cell-centered quantities (pressure, director) live at `((i+1/2)hx, (j+1/2)hy)`
//! and carry one ghost layer. Velocity uses the MAC layout: `u` on vertical
//! faces `(i hx, (j+1/2)hy)` and `v` on horizontal faces `((i+1/2)hx, j hy)`.

mod fields;
mod norms;
mod ops;

pub use fields::{BcError, BoundaryData, DirectorField, ScalarField, Side, VelocityField};
pub(crate) use fields::{fill_cell_ghosts_homogeneous, GhostRule};
pub use norms::{NormKind, Norms};
pub use ops::{
    advect_director, advect_velocity, divergence, gradient_cc_to_mac, laplacian_cells,
};

use thiserror::Error;

/// Periodic wrap of the ghost ring of a cell array.
pub(crate) fn wrap_cell_ghosts(a: &mut Array2, grid: &Grid) {
    debug_assert!(grid.bc().is_periodic());
    fill_cell_ghosts_homogeneous(a, grid, GhostRule::Even);
}

/// Boundary treatment of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcMode {
    /// No-slip walls, director trace prescribed.
    Dirichlet,
    /// Zero normal velocity, zero vorticity and zero normal director flux.
    FreeSlip,
    /// Doubly periodic box.
    Periodic,
}

impl BcMode {
    pub fn name(self) -> &'static str {
        match self {
            BcMode::Dirichlet => "dirichlet",
            BcMode::FreeSlip => "free_slip",
            BcMode::Periodic => "periodic",
        }
    }

    pub fn is_periodic(self) -> bool {
        self == BcMode::Periodic
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 cells per direction, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("domain extents must be finite and positive, got {lx} x {ly}")]
    BadExtent { lx: f64, ly: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bc: BcMode,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: BcMode) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GridError::BadExtent { lx, ly });
        }
        Ok(Self { nx, ny, lx, ly, bc })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize, bc: BcMode) -> Result<Self, GridError> {
        Self::new(n, n, 1.0, 1.0, bc)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }
    pub fn bc(&self) -> BcMode {
        self.bc
    }
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Same geometry, different boundary mode.
    pub fn with_bc(&self, bc: BcMode) -> Self {
        Self { bc, ..*self }
    }

    pub fn cell_center(&self, i: isize, j: isize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn u_face(&self, i: isize, j: isize) -> (f64, f64) {
        (i as f64 * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn v_face(&self, i: isize, j: isize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), j as f64 * self.hy())
    }

    pub fn node(&self, i: isize, j: isize) -> (f64, f64) {
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    /// x-indices of `u` faces that are unknowns (not fixed by a wall).
    pub(crate) fn u_unknown_x(&self) -> std::ops::Range<isize> {
        if self.bc.is_periodic() {
            0..self.nx as isize
        } else {
            1..self.nx as isize
        }
    }

    /// y-indices of `v` faces that are unknowns.
    pub(crate) fn v_unknown_y(&self) -> std::ops::Range<isize> {
        if self.bc.is_periodic() {
            0..self.ny as isize
        } else {
            1..self.ny as isize
        }
    }

    /// x-indices of distinct `u` faces (the periodic image `nx` is excluded).
    pub(crate) fn u_distinct_x(&self) -> std::ops::Range<isize> {
        if self.bc.is_periodic() {
            0..self.nx as isize
        } else {
            0..self.nx as isize + 1
        }
    }

    pub(crate) fn v_distinct_y(&self) -> std::ops::Range<isize> {
        if self.bc.is_periodic() {
            0..self.ny as isize
        } else {
            0..self.ny as isize + 1
        }
    }
}

/// Dense 2D array addressed by signed indices `i in [x0, x0+width)`,
/// `j in [y0, y0+height)`, stored row-major with `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Array2 {
    x0: isize,
    y0: isize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Array2 {
    pub fn zeros(x0: isize, y0: isize, width: usize, height: usize) -> Self {
        Self { x0, y0, width, height, data: vec![0.0; width * height] }
    }

    /// Cell-centered layout with one ghost layer.
    pub fn cells(grid: &Grid) -> Self {
        Self::zeros(-1, -1, grid.nx + 2, grid.ny + 2)
    }

    /// Vertical-face layout: `i in 0..=nx`, `j in -1..=ny`.
    pub fn u_faces(grid: &Grid) -> Self {
        Self::zeros(0, -1, grid.nx + 1, grid.ny + 2)
    }

    /// Horizontal-face layout: `i in -1..=nx`, `j in 0..=ny`.
    pub fn v_faces(grid: &Grid) -> Self {
        Self::zeros(-1, 0, grid.nx + 2, grid.ny + 1)
    }

    #[inline]
    fn index(&self, i: isize, j: isize) -> usize {
        debug_assert!(
            i >= self.x0
                && j >= self.y0
                && ((i - self.x0) as usize) < self.width
                && ((j - self.y0) as usize) < self.height,
            "index ({i},{j}) out of bounds"
        );
        (i - self.x0) as usize + (j - self.y0) as usize * self.width
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, value: f64) {
        let k = self.index(i, j);
        self.data[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: isize, j: isize, value: f64) {
        let k = self.index(i, j);
        self.data[k] += value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `self += alpha * other` over the whole storage.
    pub fn axpy(&mut self, alpha: f64, other: &Array2) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Copies `rect` (x-range, y-range) into a compact vector with `i` fastest.
    pub fn gather(&self, xs: std::ops::Range<isize>, ys: std::ops::Range<isize>) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for j in ys {
            for i in xs.clone() {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Inverse of [`Array2::gather`].
    pub fn scatter(&mut self, xs: std::ops::Range<isize>, ys: std::ops::Range<isize>, values: &[f64]) {
        assert_eq!(values.len(), xs.len() * ys.len());
        let mut k = 0;
        for j in ys {
            for i in xs.clone() {
                self.set(i, j, values[k]);
                k += 1;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
