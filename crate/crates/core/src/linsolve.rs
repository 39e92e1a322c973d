//! Krylov solvers with Jacobi preconditioning and a dense LU fallback.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};
use crate::sparse::CsrMatrix;

/// Largest system the dense fallback will factor.
pub const DENSE_CAP: usize = 4096;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn diagonal(&self) -> Vec<f64> {
        (**self).diagonal()
    }
}

struct Negated<'a, A: ?Sized>(&'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Negated<'_, A> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }
    fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().into_iter().map(|v| -v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trivial,
    Cg,
    BiCgStab,
    DenseLu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub method: Method,
    pub converged: bool,
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(GlcError::SolverFailure {
                method: match self.method {
                    Method::Cg => "conjugate gradient",
                    Method::BiCgStab => "BiCGStab",
                    Method::DenseLu => "dense LU",
                    Method::Trivial => "trivial solve",
                },
                iterations: self.iterations,
                residual: self.relative_residual,
            })
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn true_relative_residual<A: LinearOperator + ?Sized>(
    a: &A,
    x: &[f64],
    b: &[f64],
    bnorm: f64,
) -> f64 {
    let mut r = vec![0.0; b.len()];
    a.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    norm(&r) / bnorm
}

fn jacobi(diag: Vec<f64>) -> Vec<f64> {
    diag.into_iter()
        .map(|d| {
            if d != 0.0 && d.is_finite() {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect()
}

pub(crate) fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn trivial(n: usize, start: Instant) -> (Vec<f64>, SolveReport) {
    (
        vec![0.0; n],
        SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            method: Method::Trivial,
            converged: true,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

/// Preconditioned conjugate gradients. With `project` set, iterates are kept
/// in the mean-free subspace (for operators whose kernel is the constants).
fn pcg<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    settings: SolverSettings,
    project: bool,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = a.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return trivial(n, start);
    }
    let minv = jacobi(a.diagonal());
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if project {
        remove_mean(&mut x);
    }
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    if project {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut best = (norm(&r) / bnorm, x.clone());
    while iterations < settings.max_iter {
        let rel = norm(&r) / bnorm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= settings.tol {
            let t = true_relative_residual(a, &x, b, bnorm);
            if t <= settings.tol {
                break;
            }
            // Recurrence drifted from the true residual: restart from x.
            a.apply(&x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            z = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
            if project {
                remove_mean(&mut z);
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        z.iter_mut()
            .zip(r.iter().zip(&minv))
            .for_each(|(zi, (ri, mi))| *zi = ri * mi);
        if project {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut()
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        iterations += 1;
    }
    let mut rel = true_relative_residual(a, &x, b, bnorm);
    if rel > settings.tol && best.0 < rel {
        let candidate = true_relative_residual(a, &best.1, b, bnorm);
        if candidate < rel {
            x = best.1;
            rel = candidate;
        }
    }
    (
        x,
        SolveReport {
            iterations,
            relative_residual: rel,
            method: Method::Cg,
            converged: rel <= settings.tol,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

/// CG with Jacobi preconditioning for symmetric positive definite `a`.
/// A non-converged result is returned with `converged = false`.
pub fn solve_spd<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    settings: SolverSettings,
) -> (Vec<f64>, SolveReport) {
    pcg(a, b, x0, settings, false)
}

/// BiCGStab with right Jacobi preconditioning, falling back to dense LU for
/// `n <= DENSE_CAP` when it breaks down or stalls.
pub fn solve_general<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    settings: SolverSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.dim();
    if norm(b) == 0.0 {
        return Ok(trivial(n, start));
    }
    let (x, report) = bicgstab(a, b, x0, settings);
    if report.converged {
        return Ok((x, report));
    }
    if n <= DENSE_CAP {
        let (x, mut dense) = dense_solve(a, b)?;
        dense.iterations += report.iterations;
        dense.wall_time_s = start.elapsed().as_secs_f64();
        return Ok((x, dense));
    }
    Err(GlcError::SolverFailure {
        method: "BiCGStab",
        iterations: report.iterations,
        residual: report.relative_residual,
    })
}

fn bicgstab<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    settings: SolverSettings,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = a.dim();
    let bnorm = norm(b);
    let minv = jacobi(a.diagonal());
    let precond = |v: &[f64], out: &mut [f64]| {
        out.iter_mut()
            .zip(v.iter().zip(&minv))
            .for_each(|(o, (vi, mi))| *o = vi * mi)
    };
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| {
        a.apply(x, r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    };
    residual(&x, &mut r);
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;
    let mut best = (norm(&r) / bnorm, x.clone());
    let mut breakdowns = 0;
    while iterations < settings.max_iter {
        let rel = norm(&r) / bnorm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= settings.tol {
            let tr = true_relative_residual(a, &x, b, bnorm);
            if tr <= settings.tol {
                break;
            }
            residual(&x, &mut r);
            r_hat.copy_from_slice(&r);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() || omega == 0.0 {
            breakdowns += 1;
            if breakdowns > 3 {
                break;
            }
            residual(&x, &mut r);
            r_hat.copy_from_slice(&r);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.apply(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            breakdowns += 1;
            if breakdowns > 3 {
                break;
            }
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        axpy(alpha, &y, &mut x);
        iterations += 1;
        if norm(&s) / bnorm <= settings.tol {
            r.copy_from_slice(&s);
            continue;
        }
        precond(&s, &mut z);
        a.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        axpy(omega, &z, &mut x);
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if !omega.is_finite() {
            break;
        }
    }
    let mut rel = true_relative_residual(a, &x, b, bnorm);
    if !(rel <= settings.tol) {
        let candidate = true_relative_residual(a, &best.1, b, bnorm);
        if candidate < rel || !rel.is_finite() {
            x = best.1;
            rel = candidate;
        }
    }
    (
        x,
        SolveReport {
            iterations,
            relative_residual: rel,
            method: Method::BiCgStab,
            converged: rel <= settings.tol,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

/// Dense matrix obtained by applying `a` to unit vectors.
pub fn assemble_dense<A: LinearOperator + ?Sized>(a: &A) -> Mat<f64> {
    let n = a.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        a.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// Dense LU solve; the report's residual is measured against `a` itself.
pub fn dense_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.dim();
    if n > DENSE_CAP {
        return Err(GlcError::InvalidArgument(format!(
            "dense solve refused for n = {n} > {DENSE_CAP}"
        )));
    }
    let lu = DenseLu::new(assemble_dense(a));
    let x = lu.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GlcError::SolverFailure {
            method: "dense LU",
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let rel = true_relative_residual(a, &x, b, norm(b));
    Ok((
        x,
        SolveReport {
            iterations: 0,
            relative_residual: rel,
            method: Method::DenseLu,
            converged: rel.is_finite(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Reusable partial-pivoting LU factorization.
pub struct DenseLu {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    n: usize,
}

impl DenseLu {
    pub fn new(m: Mat<f64>) -> Self {
        let n = m.nrows();
        DenseLu {
            lu: m.partial_piv_lu(),
            n,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Sparse LU factorization of a square [`CsrMatrix`].
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows;
        let entries: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, a.ncols, &entries)
            .map_err(|e| GlcError::InvalidArgument(format!("sparse assembly failed: {e:?}")))?;
        let lu = m.sp_lu().map_err(|_| GlcError::SolverFailure {
            method: "sparse LU",
            iterations: 0,
            residual: f64::NAN,
        })?;
        Ok(SparseLu { lu, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.solve_columns(Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]));
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for every column of `b` at once.
    pub fn solve_columns(&self, b: Mat<f64>) -> Mat<f64> {
        self.lu.solve(&b)
    }
}

/// Side condition that fixes the additive constant of a Neumann solve.
#[derive(Debug, Clone, Copy)]
pub enum Constraint<'a> {
    /// Zero cell average.
    ZeroMean,
    /// `sum_k area * w_k * x_k + offset = 0`.
    WeightedAffine { weights: &'a [f64], offset: f64 },
}

/// Solves `a x = b` for a symmetric semidefinite `a` (either sign) whose
/// kernel is the constants. `b` must integrate to zero; the solution is
/// computed in the mean-free subspace and then shifted to meet `constraint`.
pub fn solve_singular_neumann<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    constraint: Constraint<'_>,
    cell_area: f64,
    x0: Option<&[f64]>,
    settings: SolverSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    let total: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|v| v.abs()).sum();
    if scale > 0.0 && total.abs() > 1e-10 * scale {
        return Err(GlcError::Incompatible {
            defect: total.abs() / scale,
        });
    }
    if let Constraint::WeightedAffine { weights, .. } = constraint {
        if weights.len() != n {
            return Err(GlcError::InvalidArgument(
                "constraint weight length mismatch".into(),
            ));
        }
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(GlcError::InvalidArgument(
                "constraint weights have nonpositive total".into(),
            ));
        }
    }
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    let negative = a.diagonal().iter().sum::<f64>() < 0.0;
    let (mut x, mut report) = if negative {
        rhs.iter_mut().for_each(|v| *v = -*v);
        pcg(&Negated(a), &rhs, x0, settings, true)
    } else {
        pcg(a, &rhs, x0, settings, true)
    };
    remove_mean(&mut x);
    let shift = match constraint {
        Constraint::ZeroMean => 0.0,
        Constraint::WeightedAffine { weights, offset } => {
            let wsum: f64 = weights.iter().sum::<f64>() * cell_area;
            -(dot(weights, &x) * cell_area + offset) / wsum
        }
    };
    x.iter_mut().for_each(|v| *v += shift);
    // Measured against the compatible part of b.
    if norm(b) > 0.0 {
        let projected: Vec<f64> = if negative {
            rhs.iter().map(|v| -v).collect()
        } else {
            rhs
        };
        report.relative_residual = true_relative_residual(a, &x, &projected, norm(&projected));
        report.converged = report.relative_residual <= settings.tol.max(1e-14);
    }
    Ok((x, report))
}
