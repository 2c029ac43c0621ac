use thiserror::Error;

use super::{Array2, BcMode, Grid};

#[derive(Debug, Error, PartialEq)]
pub enum BcError {
    #[error("dirichlet director boundary requires trace data")]
    MissingTrace,
    #[error("{0} boundary does not accept director trace data")]
    UnexpectedTrace(&'static str),
    #[error("boundary data shape does not match the field ({0})")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// x = 0, indexed by j.
    Left,
    /// x = Lx, indexed by j.
    Right,
    /// y = 0, indexed by i.
    Bottom,
    /// y = Ly, indexed by i.
    Top,
}

/// Director trace on the boundary, one m-vector per boundary face.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    m: usize,
    nx: usize,
    ny: usize,
    left: Vec<f64>,
    right: Vec<f64>,
    bottom: Vec<f64>,
    top: Vec<f64>,
}

impl BoundaryData {
    /// Samples `f(x, y)` at the boundary face midpoints.
    pub fn from_fn(grid: &Grid, m: usize, mut f: impl FnMut(f64, f64) -> Vec<f64>) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut out = Self {
            m,
            nx,
            ny,
            left: Vec::with_capacity(ny * m),
            right: Vec::with_capacity(ny * m),
            bottom: Vec::with_capacity(nx * m),
            top: Vec::with_capacity(nx * m),
        };
        for j in 0..ny as isize {
            let y = grid.cell_center(0, j).1;
            push_checked(&mut out.left, f(0.0, y), m);
            push_checked(&mut out.right, f(grid.lx(), y), m);
        }
        for i in 0..nx as isize {
            let x = grid.cell_center(i, 0).0;
            push_checked(&mut out.bottom, f(x, 0.0), m);
            push_checked(&mut out.top, f(x, grid.ly()), m);
        }
        out
    }

    pub fn constant(grid: &Grid, value: &[f64]) -> Self {
        Self::from_fn(grid, value.len(), |_, _| value.to_vec())
    }

    /// Trace implied by a ghost-filled director: mean of the boundary cell and its ghost.
    pub fn from_ghosts(field: &DirectorField) -> Self {
        let g = field.grid();
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let m = field.m();
        let mut out = Self {
            m,
            nx: g.nx(),
            ny: g.ny(),
            left: Vec::new(),
            right: Vec::new(),
            bottom: Vec::new(),
            top: Vec::new(),
        };
        for j in 0..ny {
            for c in field.comps() {
                out.left.push(0.5 * (c.get(-1, j) + c.get(0, j)));
            }
            for c in field.comps() {
                out.right.push(0.5 * (c.get(nx, j) + c.get(nx - 1, j)));
            }
        }
        for i in 0..nx {
            for c in field.comps() {
                out.bottom.push(0.5 * (c.get(i, -1) + c.get(i, 0)));
            }
            for c in field.comps() {
                out.top.push(0.5 * (c.get(i, ny) + c.get(i, ny - 1)));
            }
        }
        out
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Value of component `k` on face `index` of `side`.
    #[inline]
    pub fn value(&self, side: Side, index: usize, k: usize) -> f64 {
        let v = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        };
        v[index * self.m + k]
    }

    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        }
    }

    /// Applies `q` (row-major m x m) to every trace vector.
    pub fn rotated(&self, q: &[f64]) -> Self {
        let m = self.m;
        assert_eq!(q.len(), m * m);
        let rot = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for (src, dst) in v.chunks(m).zip(out.chunks_mut(m)) {
                for r in 0..m {
                    dst[r] = (0..m).map(|c| q[r * m + c] * src[c]).sum();
                }
            }
            out
        };
        Self {
            m,
            nx: self.nx,
            ny: self.ny,
            left: rot(&self.left),
            right: rot(&self.right),
            bottom: rot(&self.bottom),
            top: rot(&self.top),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let sc = |v: &[f64]| v.iter().map(|x| x * factor).collect();
        Self {
            m: self.m,
            nx: self.nx,
            ny: self.ny,
            left: sc(&self.left),
            right: sc(&self.right),
            bottom: sc(&self.bottom),
            top: sc(&self.top),
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        [&self.left, &self.right, &self.bottom, &self.top]
            .iter()
            .flat_map(|v| v.chunks(self.m))
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn check(&self, grid: &Grid, m: usize) -> Result<(), BcError> {
        if self.m != m || self.nx != grid.nx() || self.ny != grid.ny() {
            return Err(BcError::ShapeMismatch(format!(
                "trace is {}x{} with m={}, field is {}x{} with m={}",
                self.nx,
                self.ny,
                self.m,
                grid.nx(),
                grid.ny(),
                m
            )));
        }
        Ok(())
    }
}

fn push_checked(dst: &mut Vec<f64>, v: Vec<f64>, m: usize) {
    assert_eq!(v.len(), m, "boundary function returned {} components, expected {m}", v.len());
    dst.extend(v);
}

/// Cell-centered scalar with one ghost layer (pressure, projection potential).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Array2,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, values: Array2::cells(grid) }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut s = Self::zeros(grid);
        for j in 0..grid.ny() as isize {
            for i in 0..grid.nx() as isize {
                let (x, y) = grid.cell_center(i, j);
                s.values.set(i, j, f(x, y));
            }
        }
        s.apply_bc();
        s
    }

    pub fn from_interior(grid: &Grid, interior: &[f64]) -> Self {
        let mut s = Self::zeros(grid);
        s.values.scatter(0..grid.nx() as isize, 0..grid.ny() as isize, interior);
        s.apply_bc();
        s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &Array2 {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut Array2 {
        &mut self.values
    }
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.values.get(i, j)
    }

    pub fn interior(&self) -> Vec<f64> {
        self.values.gather(0..self.grid.nx() as isize, 0..self.grid.ny() as isize)
    }

    /// Homogeneous Neumann ghosts at walls, wrap-around when periodic.
    pub fn apply_bc(&mut self) {
        fill_cell_ghosts_homogeneous(&mut self.values, &self.grid, GhostRule::Even);
    }

    pub fn mean(&self) -> f64 {
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        let mut s = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                s += self.values.get(i, j);
            }
        }
        s / self.grid.cell_count() as f64
    }

    /// Shifts interior values to zero mean (pressure gauge).
    pub fn remove_mean(&mut self) {
        let mean = self.mean();
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        for j in 0..ny {
            for i in 0..nx {
                self.values.add(i, j, -mean);
            }
        }
        self.apply_bc();
    }

    pub fn is_finite(&self) -> bool {
        self.values.all_finite()
    }
}

#[derive(Clone, Copy)]
pub(crate) enum GhostRule {
    /// ghost = interior
    Even,
}

/// Fills the ghost ring of a cell array with a homogeneous wall rule, or wraps
/// when the grid is periodic.
pub(crate) fn fill_cell_ghosts_homogeneous(a: &mut Array2, grid: &Grid, rule: GhostRule) {
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let sign = match rule {
        GhostRule::Even => 1.0,
    };
    let periodic = grid.bc().is_periodic();
    for j in 0..ny {
        if periodic {
            a.set(-1, j, a.get(nx - 1, j));
            a.set(nx, j, a.get(0, j));
        } else {
            a.set(-1, j, sign * a.get(0, j));
            a.set(nx, j, sign * a.get(nx - 1, j));
        }
    }
    for i in -1..=nx {
        if periodic {
            a.set(i, -1, a.get(i, ny - 1));
            a.set(i, ny, a.get(i, 0));
        } else {
            a.set(i, -1, sign * a.get(i, 0));
            a.set(i, ny, sign * a.get(i, ny - 1));
        }
    }
}

/// Staggered velocity: `u` on vertical faces, `v` on horizontal faces.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: Grid,
    u: Array2,
    v: Array2,
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: *grid, u: Array2::u_faces(grid), v: Array2::v_faces(grid) }
    }

    /// Samples the components at their own face midpoints, then applies the
    /// boundary rule (wall-normal faces are zeroed).
    pub fn from_fn(
        grid: &Grid,
        fu: impl Fn(f64, f64) -> f64,
        fv: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut w = Self::zeros(grid);
        let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
        for j in 0..ny {
            for i in 0..=nx {
                let (x, y) = grid.u_face(i, j);
                w.u.set(i, j, fu(x, y));
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let (x, y) = grid.v_face(i, j);
                w.v.set(i, j, fv(x, y));
            }
        }
        w.apply_bc();
        w
    }

    /// Discretely divergence-free field `u = d psi/dy`, `v = -d psi/dx` from
    /// a stream function sampled at grid nodes.
    pub fn from_stream_function(grid: &Grid, psi: impl Fn(f64, f64) -> f64) -> Self {
        let mut w = Self::zeros(grid);
        let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
        let (hx, hy) = (grid.hx(), grid.hy());
        let node = |i: isize, j: isize| {
            let (x, y) = grid.node(i, j);
            psi(x, y)
        };
        for j in 0..ny {
            for i in 0..=nx {
                w.u.set(i, j, (node(i, j + 1) - node(i, j)) / hy);
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                w.v.set(i, j, -(node(i + 1, j) - node(i, j)) / hx);
            }
        }
        w.apply_bc();
        w
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn u(&self) -> &Array2 {
        &self.u
    }
    pub fn v(&self) -> &Array2 {
        &self.v
    }
    pub fn u_mut(&mut self) -> &mut Array2 {
        &mut self.u
    }
    pub fn v_mut(&mut self) -> &mut Array2 {
        &mut self.v
    }

    /// Enforces wall-normal zeros (or the periodic image face) and fills the
    /// tangential ghost layers: odd reflection for no-slip, even for free-slip.
    pub fn apply_bc(&mut self) {
        let g = self.grid;
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        match g.bc() {
            BcMode::Periodic => {
                for j in 0..ny {
                    self.u.set(nx, j, self.u.get(0, j));
                }
                for i in 0..=nx {
                    self.u.set(i, -1, self.u.get(i, ny - 1));
                    self.u.set(i, ny, self.u.get(i, 0));
                }
                for i in 0..nx {
                    self.v.set(i, ny, self.v.get(i, 0));
                }
                for j in 0..=ny {
                    self.v.set(-1, j, self.v.get(nx - 1, j));
                    self.v.set(nx, j, self.v.get(0, j));
                }
            }
            mode => {
                let sign = if mode == BcMode::Dirichlet { -1.0 } else { 1.0 };
                for j in 0..ny {
                    self.u.set(0, j, 0.0);
                    self.u.set(nx, j, 0.0);
                }
                for i in 0..=nx {
                    self.u.set(i, -1, sign * self.u.get(i, 0));
                    self.u.set(i, ny, sign * self.u.get(i, ny - 1));
                }
                for i in 0..nx {
                    self.v.set(i, 0, 0.0);
                    self.v.set(i, ny, 0.0);
                }
                for j in 0..=ny {
                    self.v.set(-1, j, sign * self.v.get(0, j));
                    self.v.set(nx, j, sign * self.v.get(nx - 1, j));
                }
            }
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &VelocityField) {
        self.u.axpy(alpha, &other.u);
        self.v.axpy(alpha, &other.v);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.u.scale(factor);
        out.v.scale(factor);
        out
    }

    /// Largest face speed over distinct faces.
    pub fn max_abs(&self) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for j in 0..g.ny() as isize {
            for i in g.u_distinct_x() {
                m = m.max(self.u.get(i, j).abs());
            }
        }
        for j in g.v_distinct_y() {
            for i in 0..g.nx() as isize {
                m = m.max(self.v.get(i, j).abs());
            }
        }
        m
    }

    /// Mean of each component over distinct faces.
    pub fn mean(&self) -> (f64, f64) {
        let g = &self.grid;
        let (mut su, mut nu, mut sv, mut nv) = (0.0, 0usize, 0.0, 0usize);
        for j in 0..g.ny() as isize {
            for i in g.u_distinct_x() {
                su += self.u.get(i, j);
                nu += 1;
            }
        }
        for j in g.v_distinct_y() {
            for i in 0..g.nx() as isize {
                sv += self.v.get(i, j);
                nv += 1;
            }
        }
        (su / nu as f64, sv / nv as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.u.all_finite() && self.v.all_finite()
    }
}

/// Cell-centered m-component director with one ghost layer per component.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField {
    grid: Grid,
    comps: Vec<Array2>,
}

impl DirectorField {
    pub fn zeros(grid: &Grid, m: usize) -> Self {
        assert!(m == 2 || m == 3, "director must have 2 or 3 components, got {m}");
        Self { grid: *grid, comps: vec![Array2::cells(grid); m] }
    }

    /// Samples `f` at cell centers. Ghosts are left at zero; call
    /// [`DirectorField::apply_bc`] afterwards.
    pub fn from_fn(grid: &Grid, m: usize, mut f: impl FnMut(f64, f64) -> Vec<f64>) -> Self {
        let mut d = Self::zeros(grid, m);
        for j in 0..grid.ny() as isize {
            for i in 0..grid.nx() as isize {
                let (x, y) = grid.cell_center(i, j);
                let val = f(x, y);
                assert_eq!(val.len(), m);
                for (k, c) in d.comps.iter_mut().enumerate() {
                    c.set(i, j, val[k]);
                }
            }
        }
        d
    }

    pub fn constant(grid: &Grid, value: &[f64]) -> Self {
        Self::from_fn(grid, value.len(), |_, _| value.to_vec())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn m(&self) -> usize {
        self.comps.len()
    }
    pub fn comps(&self) -> &[Array2] {
        &self.comps
    }
    pub fn comps_mut(&mut self) -> &mut [Array2] {
        &mut self.comps
    }
    pub fn comp(&self, k: usize) -> &Array2 {
        &self.comps[k]
    }

    /// Director vector at an interior cell.
    pub fn at(&self, i: isize, j: isize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.get(i, j);
        }
    }

    pub fn interior(&self, k: usize) -> Vec<f64> {
        self.comps[k].gather(0..self.grid.nx() as isize, 0..self.grid.ny() as isize)
    }

    pub fn set_interior(&mut self, k: usize, values: &[f64]) {
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        self.comps[k].scatter(0..nx, 0..ny, values);
    }

    /// Fills ghost cells. Dirichlet: `ghost = 2 g - interior` so the face
    /// average equals the trace; free-slip: `ghost = interior`; periodic: wrap.
    pub fn apply_bc(&mut self, trace: Option<&BoundaryData>) -> Result<(), BcError> {
        let grid = self.grid;
        match (grid.bc(), trace) {
            (BcMode::Dirichlet, None) => Err(BcError::MissingTrace),
            (BcMode::Dirichlet, Some(g)) => {
                g.check(&grid, self.m())?;
                let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
                for (k, c) in self.comps.iter_mut().enumerate() {
                    for j in 0..ny {
                        let ju = j as usize;
                        c.set(-1, j, 2.0 * g.value(Side::Left, ju, k) - c.get(0, j));
                        c.set(nx, j, 2.0 * g.value(Side::Right, ju, k) - c.get(nx - 1, j));
                    }
                    for i in 0..nx {
                        let iu = i as usize;
                        c.set(i, -1, 2.0 * g.value(Side::Bottom, iu, k) - c.get(i, 0));
                        c.set(i, ny, 2.0 * g.value(Side::Top, iu, k) - c.get(i, ny - 1));
                    }
                    for (i, j) in [(-1, -1), (nx, -1), (-1, ny), (nx, ny)] {
                        c.set(i, j, 0.0);
                    }
                }
                Ok(())
            }
            (mode, Some(_)) => Err(BcError::UnexpectedTrace(mode.name())),
            (_, None) => {
                for c in &mut self.comps {
                    fill_cell_ghosts_homogeneous(c, &grid, GhostRule::Even);
                }
                Ok(())
            }
        }
    }

    /// `a - b` including ghosts; the result carries the homogeneous trace.
    pub fn difference(a: &DirectorField, b: &DirectorField) -> DirectorField {
        assert_eq!(a.m(), b.m());
        let mut out = a.clone();
        for (c, o) in out.comps.iter_mut().zip(&b.comps) {
            c.axpy(-1.0, o);
        }
        out
    }

    /// Applies `q` (row-major m x m) pointwise, ghosts included.
    pub fn rotated(&self, q: &[f64]) -> Self {
        let m = self.m();
        assert_eq!(q.len(), m * m);
        let mut out = self.clone();
        let n = self.comps[0].data().len();
        for idx in 0..n {
            for r in 0..m {
                let mut s = 0.0;
                for c in 0..m {
                    s += q[r * m + c] * self.comps[c].data()[idx];
                }
                out.comps[r].data_mut()[idx] = s;
            }
        }
        out
    }

    /// Largest pointwise Euclidean magnitude over interior cells.
    pub fn max_magnitude(&self) -> f64 {
        let mut best: f64 = 0.0;
        for j in 0..self.grid.ny() as isize {
            for i in 0..self.grid.nx() as isize {
                let s: f64 = self.comps.iter().map(|c| c.get(i, j).powi(2)).sum();
                best = best.max(s.sqrt());
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Array2::all_finite)
    }
}
