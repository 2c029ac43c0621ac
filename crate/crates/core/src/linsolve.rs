//! Linear solvers for the separable operators `alpha I + beta L` that appear
//! in every substep (`L` the five-point Laplacian on one of the staggered
//! layouts).
//!
//! The default method diagonalises the two 1D second-difference matrices once
//! per grid and solves by transforming to the joint eigenbasis, which is
//! exact up to roundoff. Preconditioned conjugate gradients are available as
//! an alternative and as a cross-check.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("iterative solve stopped after {iterations} iterations at relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("operator is not positive definite on the iterate (curvature {0:.3e})")]
    Indefinite(f64),
    #[error("non-finite value in linear solve")]
    NonFinite,
    #[error("right-hand side incompatible with singular operator (mean {0:.3e})")]
    Incompatible(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    /// Direct solve in the separable eigenbasis.
    Spectral,
    /// Conjugate gradients preconditioned by the diagonal.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveConfig {
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub method: LinearMethod,
}

impl Default for LinearSolveConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iterations: 10_000, method: LinearMethod::Spectral }
    }
}

impl LinearSolveConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-4) {
            return Err(format!("rel_tol must lie in (0, 1e-4], got {}", self.rel_tol));
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        Ok(())
    }
}

/// Boundary closure of a 1D second difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Cell-centered unknowns, odd ghost (`ghost = -interior`).
    CellDirichlet,
    /// Cell-centered unknowns, even ghost.
    CellNeumann,
    /// Node unknowns strictly inside two fixed zero end values.
    NodeDirichlet,
    /// Wrap-around.
    Periodic,
}

#[derive(Debug, Clone)]
pub struct AxisOperator {
    kind: AxisKind,
    n: usize,
    inv_h2: f64,
    eigenvalues: Vec<f64>,
    q: DMatrix<f64>,
    qt: DMatrix<f64>,
}

impl AxisOperator {
    pub fn new(kind: AxisKind, n: usize, h: f64) -> Self {
        assert!(n >= 2, "axis needs at least two unknowns");
        let inv_h2 = 1.0 / (h * h);
        let mut op = Self {
            kind,
            n,
            inv_h2,
            eigenvalues: vec![],
            q: DMatrix::zeros(0, 0),
            qt: DMatrix::zeros(0, 0),
        };
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[c] = 1.0;
            col.iter_mut().for_each(|x| *x = 0.0);
            op.apply_strided(&e, 1, &mut col, 1, 1.0);
            for r in 0..n {
                dense[(r, c)] = col[r];
            }
        }
        let eig = SymmetricEigen::new(dense);
        op.eigenvalues = eig.eigenvalues.iter().copied().collect();
        op.qt = eig.eigenvectors.transpose();
        op.q = eig.eigenvectors;
        op
    }

    pub fn kind(&self) -> AxisKind {
        self.kind
    }
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Has a constant null vector.
    pub fn is_singular(&self) -> bool {
        matches!(self.kind, AxisKind::CellNeumann | AxisKind::Periodic)
    }

    /// `y[k*sy] += scale * (D2 x)[k]` for the strided 1D line.
    #[inline]
    fn apply_strided(&self, x: &[f64], sx: usize, y: &mut [f64], sy: usize, scale: f64) {
        let n = self.n;
        let c = scale * self.inv_h2;
        for k in 0..n {
            let xc = x[k * sx];
            let left = if k > 0 {
                x[(k - 1) * sx]
            } else {
                match self.kind {
                    AxisKind::CellDirichlet => -xc,
                    AxisKind::CellNeumann => xc,
                    AxisKind::NodeDirichlet => 0.0,
                    AxisKind::Periodic => x[(n - 1) * sx],
                }
            };
            let right = if k + 1 < n {
                x[(k + 1) * sx]
            } else {
                match self.kind {
                    AxisKind::CellDirichlet => -xc,
                    AxisKind::CellNeumann => xc,
                    AxisKind::NodeDirichlet => 0.0,
                    AxisKind::Periodic => x[0],
                }
            };
            y[k * sy] += c * (left - 2.0 * xc + right);
        }
    }
}

/// `alpha I + beta (Dxx + Dyy)` on an `nx x ny` block of unknowns stored with
/// `i` fastest.
#[derive(Debug, Clone)]
pub struct SeparableOperator {
    x: AxisOperator,
    y: AxisOperator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

impl SeparableOperator {
    pub fn new(x: AxisOperator, y: AxisOperator) -> Self {
        Self { x, y }
    }

    pub fn nx(&self) -> usize {
        self.x.n
    }
    pub fn ny(&self) -> usize {
        self.y.n
    }
    pub fn len(&self) -> usize {
        self.x.n * self.y.n
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Singular when both axes have a constant null vector and `alpha == 0`.
    pub fn is_singular(&self, alpha: f64) -> bool {
        alpha == 0.0 && self.x.is_singular() && self.y.is_singular()
    }

    pub fn apply(&self, alpha: f64, beta: f64, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(alpha, beta, x, &mut y);
        y
    }

    pub fn apply_into(&self, alpha: f64, beta: f64, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.x.n, self.y.n);
        assert_eq!(x.len(), nx * ny);
        for (yo, xi) in y.iter_mut().zip(x) {
            *yo = alpha * xi;
        }
        if beta != 0.0 {
            for j in 0..ny {
                let off = j * nx;
                self.x.apply_strided(&x[off..], 1, &mut y[off..], 1, beta);
            }
            for i in 0..nx {
                self.y.apply_strided(&x[i..], nx, &mut y[i..], nx, beta);
            }
        }
    }

    /// Solves `(alpha + beta L) x = b` in the eigenbasis. Modes whose symbol
    /// vanishes are set to zero, which fixes the zero-mean gauge in the
    /// singular case.
    pub fn solve_spectral(&self, alpha: f64, beta: f64, b: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.x.n, self.y.n);
        assert_eq!(b.len(), nx * ny);
        if beta == 0.0 && alpha != 0.0 {
            return b.iter().map(|v| v / alpha).collect();
        }
        let bm = DMatrix::from_column_slice(nx, ny, b);
        let mut hat = &self.x.qt * bm * &self.y.q;
        let mut max_sym: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let s = alpha + beta * (self.x.eigenvalues[i] + self.y.eigenvalues[j]);
                max_sym = max_sym.max(s.abs());
            }
        }
        let cutoff = 1e-10 * max_sym;
        for j in 0..ny {
            for i in 0..nx {
                let s = alpha + beta * (self.x.eigenvalues[i] + self.y.eigenvalues[j]);
                hat[(i, j)] = if s.abs() <= cutoff { 0.0 } else { hat[(i, j)] / s };
            }
        }
        let out = &self.x.q * hat * &self.y.qt;
        out.as_slice().to_vec()
    }

    /// Solves `(alpha + beta L) x = b` with the configured method and checks
    /// the residual against `rel_tol`.
    pub fn solve(
        &self,
        alpha: f64,
        beta: f64,
        b: &[f64],
        cfg: &LinearSolveConfig,
    ) -> Result<(Vec<f64>, SolveStats), LinearSolveError> {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(LinearSolveError::NonFinite);
        }
        let singular = self.is_singular(alpha);
        let mut rhs = b.to_vec();
        if singular {
            let mean = mean(&rhs);
            rhs.iter_mut().for_each(|v| *v -= mean);
        }
        let bnorm = norm2(&rhs);
        if bnorm == 0.0 {
            return Ok((vec![0.0; b.len()], SolveStats { iterations: 0, relative_residual: 0.0 }));
        }
        let (x, iterations) = match cfg.method {
            LinearMethod::Spectral => (self.solve_spectral(alpha, beta, &rhs), 1),
            LinearMethod::ConjugateGradient => {
                // CG needs a positive definite operator: flip the sign when L
                // enters with a positive coefficient.
                let sign = if beta > 0.0 { -1.0 } else { 1.0 };
                let diag = sign * (alpha - 2.0 * beta * (self.x.inv_h2 + self.y.inv_h2));
                let signed_rhs: Vec<f64> = rhs.iter().map(|v| sign * v).collect();
                let (x, stats) = conjugate_gradient(
                    |p, out| {
                        self.apply_into(alpha, beta, p, out);
                        out.iter_mut().for_each(|v| *v *= sign);
                    },
                    |r, z| z.iter_mut().zip(r).for_each(|(zi, ri)| *zi = ri / diag),
                    &signed_rhs,
                    None,
                    cfg.rel_tol * 0.1,
                    cfg.max_iterations,
                    singular,
                )?;
                (x, stats.iterations)
            }
        };
        let ax = self.apply(alpha, beta, &x);
        let res: Vec<f64> = ax.iter().zip(&rhs).map(|(a, r)| a - r).collect();
        let rel = norm2(&res) / bnorm;
        if !rel.is_finite() {
            return Err(LinearSolveError::NonFinite);
        }
        if rel > cfg.rel_tol {
            return Err(LinearSolveError::NotConverged { iterations, residual: rel });
        }
        Ok((x, SolveStats { iterations, relative_residual: rel }))
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Preconditioned conjugate gradients for a symmetric positive (semi-)definite
/// operator. With `remove_mean` the iterates are kept orthogonal to constants.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iterations: usize,
    remove_mean: bool,
) -> Result<(Vec<f64>, SolveStats), LinearSolveError> {
    let n = b.len();
    let project = |v: &mut [f64]| {
        if remove_mean {
            let m = mean(v);
            v.iter_mut().for_each(|x| *x -= m);
        }
    };
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    project(&mut r);
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iterations {
        let rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(LinearSolveError::NonFinite);
        }
        if rel <= rel_tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: rel }));
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinearSolveError::Indefinite(pap));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        project(&mut r);
        precondition(&r, &mut z);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let rel = norm2(&r) / bnorm;
    if rel <= rel_tol {
        Ok((x, SolveStats { iterations: max_iterations, relative_residual: rel }))
    } else {
        Err(LinearSolveError::NotConverged { iterations: max_iterations, residual: rel })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn all_kinds() -> [AxisKind; 4] {
        [AxisKind::CellDirichlet, AxisKind::CellNeumann, AxisKind::NodeDirichlet, AxisKind::Periodic]
    }

    #[test]
    fn spectral_inverts_helmholtz_for_every_closure() {
        for kx in all_kinds() {
            for ky in all_kinds() {
                let op = SeparableOperator::new(
                    AxisOperator::new(kx, 11, 0.1),
                    AxisOperator::new(ky, 7, 0.3),
                );
                let b = random(op.len(), 3);
                let x = op.solve_spectral(1.0, -0.05, &b);
                let r = op.apply(1.0, -0.05, &x);
                let err = norm2(&r.iter().zip(&b).map(|(a, c)| a - c).collect::<Vec<_>>());
                assert!(err < 1e-12 * norm2(&b), "{kx:?}/{ky:?}: {err}");
            }
        }
    }

    #[test]
    fn singular_poisson_gets_zero_mean_solution() {
        let op = SeparableOperator::new(
            AxisOperator::new(AxisKind::CellNeumann, 16, 1.0 / 16.0),
            AxisOperator::new(AxisKind::Periodic, 12, 1.0 / 12.0),
        );
        let mut b = random(op.len(), 5);
        let m = mean(&b);
        b.iter_mut().for_each(|v| *v -= m);
        let (x, stats) = op.solve(0.0, 1.0, &b, &LinearSolveConfig::default()).unwrap();
        assert!(mean(&x).abs() < 1e-13);
        assert!(stats.relative_residual < 1e-12);
    }

    #[test]
    fn conjugate_gradient_agrees_with_spectral() {
        let op = SeparableOperator::new(
            AxisOperator::new(AxisKind::NodeDirichlet, 31, 1.0 / 32.0),
            AxisOperator::new(AxisKind::CellDirichlet, 24, 1.0 / 24.0),
        );
        let b = random(op.len(), 9);
        let cfg = LinearSolveConfig { method: LinearMethod::ConjugateGradient, ..Default::default() };
        let (x_cg, stats) = op.solve(1.0, -0.01, &b, &cfg).unwrap();
        let (x_sp, _) = op.solve(1.0, -0.01, &b, &LinearSolveConfig::default()).unwrap();
        assert!(stats.iterations > 1);
        let diff: f64 = x_cg.iter().zip(&x_sp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
        let (x_p, _) = op.solve(0.0, 1.0, &b, &cfg).unwrap();
        let (x_q, _) = op.solve(0.0, 1.0, &b, &LinearSolveConfig::default()).unwrap();
        let diff: f64 = x_p.iter().zip(&x_q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8 * norm2(&x_q), "{diff}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = SeparableOperator::new(
            AxisOperator::new(AxisKind::CellNeumann, 8, 0.125),
            AxisOperator::new(AxisKind::CellNeumann, 8, 0.125),
        );
        let (x, _) = op.solve(0.0, 1.0, &vec![0.0; 64], &LinearSolveConfig::default()).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn config_bounds() {
        assert!(LinearSolveConfig::default().validate().is_ok());
        let bad = LinearSolveConfig { rel_tol: 1e-3, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
