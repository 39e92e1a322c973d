//! Fixed-point iteration for the exact steady state around the leading-order
//! background.
//!
//! The discrete steady problem is the polar form of the gauge-invariant
//! finite-volume scheme used by [`crate::tdgl`], so a converged steady state is
//! an equilibrium of the time stepper to solver accuracy. Unknowns are the
//! corrections `v = (rho1, chi1, phi1)` with `chi1`, `phi1` normalized by
//! `norm_j`. With `R` the discrete residual and `L` its exact Jacobian at
//! `v = 0`, one step solves `L v_next = L v - R(v)`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{hessian_l2, norms, steady_residual, SteadyResiduals};
use crate::error::{GlcError, Result};
use crate::field::ScalarField;
use crate::grid::{CurrentProfile, Grid, Mesh};
use crate::leading_order::LeadingOrderState;
use crate::linsolve::{solve_general, LinearOperator, SolveReport, SolverSettings};
use crate::operators::{for_each_interior_face, laplacian_neumann};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTriple {
    pub rho1: ScalarField,
    pub chi1: ScalarField,
    pub phi1: ScalarField,
}

impl CorrectionTriple {
    pub fn zeros(mesh: Mesh) -> Self {
        let z = ScalarField::zeros(mesh);
        CorrectionTriple {
            rho1: z.clone(),
            chi1: z.clone(),
            phi1: z,
        }
    }

    pub fn mesh(&self) -> Mesh {
        self.rho1.mesh
    }

    pub fn from_stacked(mesh: Mesh, v: &[f64]) -> Self {
        let n = mesh.len();
        CorrectionTriple {
            rho1: ScalarField {
                mesh,
                values: v[..n].to_vec(),
            },
            chi1: ScalarField {
                mesh,
                values: v[n..2 * n].to_vec(),
            },
            phi1: ScalarField {
                mesh,
                values: v[2 * n..].to_vec(),
            },
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        [&self.rho1.values[..], &self.chi1.values, &self.phi1.values].concat()
    }

    pub fn scale(&self, s: f64) -> Self {
        CorrectionTriple {
            rho1: self.rho1.scale(s),
            chi1: self.chi1.scale(s),
            phi1: self.phi1.scale(s),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(CorrectionTriple {
            rho1: self.rho1.sub(&other.rho1)?,
            chi1: self.chi1.sub(&other.chi1)?,
            phi1: self.phi1.sub(&other.phi1)?,
        })
    }
}

/// `||eta||_{1,2} + ||eta||_inf + eps ||D^2 eta||_2 + ||omega||_{2,2} + ||phi||_{2,2}`.
pub fn h_norm(v: &CorrectionTriple, epsilon: f64) -> f64 {
    let eta = norms(&v.rho1);
    eta.w12 + eta.linf + epsilon * hessian_l2(&v.rho1) + norms(&v.chi1).w22 + norms(&v.phi1).w22
}

/// `sin(a x) / a`, continuous at `a = 0`.
#[inline]
fn sin_over(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        x
    } else {
        (a * x).sin() / a
    }
}

/// Discrete steady residual in normalized variables, stacked `[R1; R2; R3]`.
pub fn residual(v: &CorrectionTriple, bg: &LeadingOrderState) -> Vec<f64> {
    let mesh = bg.mesh();
    let n = mesh.len();
    let a = bg.norm_j;
    let inv_eps2 = 1.0 / (bg.epsilon * bg.epsilon);
    let rho: Vec<f64> = (0..n)
        .map(|k| bg.rho0.values[k] + v.rho1.values[k])
        .collect();
    let chi: Vec<f64> = (0..n)
        .map(|k| bg.chi0_tilde.values[k] + v.chi1.values[k])
        .collect();
    let phi = ScalarField {
        mesh,
        values: (0..n)
            .map(|k| bg.phi0_tilde.values[k] + v.phi1.values[k])
            .collect(),
    };
    let mut r = vec![0.0; 3 * n];
    for_each_interior_face(&mesh, |_, lo, hi, h, _| {
        let h2 = h * h;
        let d = chi[hi] - chi[lo];
        let c = (a * d).cos();
        r[lo] -= (rho[hi] * c - rho[lo]) / h2;
        r[hi] -= (rho[lo] * c - rho[hi]) / h2;
        let flux = rho[lo] * rho[hi] * sin_over(a, d) / h2;
        r[n + lo] -= flux;
        r[n + hi] += flux;
    });
    let lap_phi = laplacian_neumann(&mesh).apply(&phi);
    for k in 0..n {
        let p2 = rho[k] * rho[k];
        r[k] -= inv_eps2 * rho[k] * (1.0 - p2);
        r[n + k] += p2 * phi.values[k];
        r[2 * n + k] = -bg.sigma * lap_phi.values[k]
            + p2 * phi.values[k]
            + bg.sigma * bg.unit_source.values[k];
    }
    r
}

/// Exact Jacobian of [`residual`] at `v = 0`. Its kernel is spanned by the
/// constant phase `(0, 1, 0)`.
pub fn jacobian(bg: &LeadingOrderState) -> CsrMatrix {
    let mesh = bg.mesh();
    let n = mesh.len();
    let a = bg.norm_j;
    let inv_eps2 = 1.0 / (bg.epsilon * bg.epsilon);
    let rho = &bg.rho0.values;
    let chi = &bg.chi0_tilde.values;
    let phi = &bg.phi0_tilde.values;
    let (r1, r2, r3) = (0, n, 2 * n);
    let mut t = Vec::with_capacity(20 * n);
    for_each_interior_face(&mesh, |_, lo, hi, h, _| {
        let h2 = h * h;
        let d = chi[hi] - chi[lo];
        let c = (a * d).cos();
        let asin = a * (a * d).sin();
        let s = sin_over(a, d);
        // density rows
        t.push((r1 + lo, lo, 1.0 / h2));
        t.push((r1 + lo, hi, -c / h2));
        t.push((r1 + lo, n + hi, rho[hi] * asin / h2));
        t.push((r1 + lo, n + lo, -rho[hi] * asin / h2));
        t.push((r1 + hi, hi, 1.0 / h2));
        t.push((r1 + hi, lo, -c / h2));
        t.push((r1 + hi, n + hi, rho[lo] * asin / h2));
        t.push((r1 + hi, n + lo, -rho[lo] * asin / h2));
        // current rows
        let w = rho[lo] * rho[hi] * c / h2;
        t.push((r2 + lo, lo, -rho[hi] * s / h2));
        t.push((r2 + lo, hi, -rho[lo] * s / h2));
        t.push((r2 + lo, n + hi, -w));
        t.push((r2 + lo, n + lo, w));
        t.push((r2 + hi, lo, rho[hi] * s / h2));
        t.push((r2 + hi, hi, rho[lo] * s / h2));
        t.push((r2 + hi, n + hi, w));
        t.push((r2 + hi, n + lo, -w));
    });
    let lap = laplacian_neumann(&mesh).matrix;
    for (row, col, v) in lap.triplets() {
        t.push((r3 + row, 2 * n + col, -bg.sigma * v));
    }
    for k in 0..n {
        let p2 = rho[k] * rho[k];
        t.push((r1 + k, k, -inv_eps2 * (1.0 - 3.0 * p2)));
        t.push((r2 + k, k, 2.0 * rho[k] * phi[k]));
        t.push((r2 + k, 2 * n + k, p2));
        t.push((r3 + k, 2 * n + k, p2));
        t.push((r3 + k, k, 2.0 * rho[k] * phi[k]));
    }
    CsrMatrix::from_triplets(3 * n, 3 * n, t)
}

/// The Jacobian plus `alpha * mean(omega)` on every current row, which removes
/// the constant-phase kernel without changing solutions of compatible systems
/// that have zero-mean phase.
pub struct PinnedSystem {
    pub matrix: CsrMatrix,
    pub alpha: f64,
    n: usize,
}

impl PinnedSystem {
    pub fn new(matrix: CsrMatrix) -> Self {
        let n = matrix.nrows / 3;
        let diag = matrix.diagonal();
        let alpha = diag[n..2 * n].iter().map(|d| d.abs()).sum::<f64>() / n as f64;
        PinnedSystem {
            matrix,
            alpha: alpha.max(1.0),
            n,
        }
    }
}

impl LinearOperator for PinnedSystem {
    fn dim(&self) -> usize {
        3 * self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y);
        let n = self.n;
        let m = self.alpha * x[n..2 * n].iter().sum::<f64>() / n as f64;
        y[n..2 * n].iter_mut().for_each(|v| *v += m);
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.matrix.diagonal();
        let n = self.n;
        d[n..2 * n]
            .iter_mut()
            .for_each(|v| *v += self.alpha / n as f64);
        d
    }
}

/// `L v - R(v)`, the right-hand side of the frozen linear system.
pub fn assemble_rhs(v: &CorrectionTriple, bg: &LeadingOrderState, l: &CsrMatrix) -> Vec<f64> {
    let lv = l.mul_vec(&v.stacked());
    let r = residual(v, bg);
    lv.iter().zip(&r).map(|(a, b)| a - b).collect()
}

/// Solves the pinned system for the given stacked right-hand side and returns
/// the triple with zero-mean phase.
pub fn apply_a(
    rhs: &[f64],
    system: &PinnedSystem,
    mesh: Mesh,
    guess: Option<&[f64]>,
    settings: SolverSettings,
) -> Result<(CorrectionTriple, SolveReport)> {
    let (x, report) = solve_general(system, rhs, guess, settings)?;
    report.ensure_converged()?;
    let mut v = CorrectionTriple::from_stacked(mesh, &x);
    let m = v.chi1.mean();
    v.chi1.values.iter_mut().for_each(|c| *c -= m);
    Ok((v, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    /// Stop once the H-norm increment drops to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive ratios >= 1 that declare the map non-contracting.
    pub stall_window: usize,
    pub inner: SolverSettings,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            tol: 1e-9,
            max_iter: 200,
            stall_window: 3,
            inner: SolverSettings {
                tol: 1e-13,
                max_iter: 20_000,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateSolution {
    pub rho_s: ScalarField,
    pub chi_s: ScalarField,
    pub phi_s: ScalarField,
    pub correction: CorrectionTriple,
    pub background: LeadingOrderState,
    pub iterations: usize,
    /// H-norm of successive increments.
    pub increments: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub h_norm_final: f64,
    pub steady_residuals: SteadyResiduals,
    pub linear_iterations: usize,
}

impl SteadyStateSolution {
    pub fn mesh(&self) -> Mesh {
        self.rho_s.mesh
    }
}

/// Picard iteration from `v = 0`.
pub fn solve_steady(
    grid: &Grid,
    profile: &CurrentProfile,
    bg: &LeadingOrderState,
    opts: &SteadyOptions,
) -> Result<SteadyStateSolution> {
    solve_steady_from(grid, profile, bg, CorrectionTriple::zeros(bg.mesh()), opts)
}

pub fn solve_steady_from(
    grid: &Grid,
    profile: &CurrentProfile,
    bg: &LeadingOrderState,
    start: CorrectionTriple,
    opts: &SteadyOptions,
) -> Result<SteadyStateSolution> {
    let mesh = bg.mesh();
    if mesh != grid.mesh || start.mesh() != mesh {
        return Err(GlcError::GridMismatch);
    }
    let l = jacobian(bg);
    let system = PinnedSystem::new(l);
    let mut v = start;
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut linear_iterations = 0;
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let rhs = assemble_rhs(&v, bg, &system.matrix);
        let guess = v.stacked();
        let (next, report) = apply_a(&rhs, &system, mesh, Some(&guess), opts.inner)?;
        linear_iterations += report.iterations;
        let inc = h_norm(&next.sub(&v)?, bg.epsilon);
        if !inc.is_finite() {
            return Err(GlcError::NoContraction {
                iteration: iterations,
                ratio: f64::INFINITY,
            });
        }
        if let Some(prev) = increments.last().copied() {
            let ratio = if prev > 0.0 { inc / prev } else { 0.0 };
            ratios.push(ratio);
            stalled = if ratio >= 1.0 { stalled + 1 } else { 0 };
        }
        increments.push(inc);
        v = next;
        if inc <= opts.tol {
            converged = true;
            break;
        }
        if stalled >= opts.stall_window {
            return Err(GlcError::NoContraction {
                iteration: iterations,
                ratio: *ratios.last().expect("ratio"),
            });
        }
    }
    if !converged {
        return Err(GlcError::MaxIterations {
            max_iter: opts.max_iter,
            increment: *increments.last().unwrap_or(&0.0),
        });
    }
    let a = bg.norm_j;
    let rho_s = bg.rho0.add(&v.rho1)?;
    let chi_s = bg.chi0_tilde.add(&v.chi1)?.scale(a);
    let phi_s = bg.phi0_tilde.add(&v.phi1)?.scale(a);
    let steady = steady_residual(&rho_s, &chi_s, &phi_s, bg.epsilon, bg.sigma, grid, profile)?;
    Ok(SteadyStateSolution {
        h_norm_final: h_norm(&v, bg.epsilon),
        rho_s,
        chi_s,
        phi_s,
        correction: v,
        background: bg.clone(),
        iterations,
        increments,
        contraction_ratios: ratios,
        steady_residuals: steady,
        linear_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_current_profile, ContactSegment, Edge, ProfileShape};
    use crate::leading_order::{leading_order, LeadingOrderOptions};

    fn setup(n: usize, l: f64, amp: f64, eps: f64) -> (Grid, CurrentProfile, LeadingOrderState) {
        let m = Mesh::new(n, n, l, l).unwrap();
        let g = Grid::new(
            m,
            &[
                ContactSegment::full(Edge::Left, &m, 1.0),
                ContactSegment::full(Edge::Right, &m, -1.0),
            ],
        )
        .unwrap();
        let p = build_current_profile(&g, amp, ProfileShape::Uniform).unwrap();
        let bg = leading_order(&g, &p, eps, 1.0, &LeadingOrderOptions::default()).unwrap();
        (g, p, bg)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (_, _, bg) = setup(6, 2.0, 0.3, 0.5);
        let mesh = bg.mesh();
        let l = jacobian(&bg);
        let n = mesh.len();
        let dir: Vec<f64> = (0..3 * n)
            .map(|k| ((k * 37 % 11) as f64 - 5.0) / 5.0)
            .collect();
        let hstep = 1e-6;
        let plus = residual(
            &CorrectionTriple::from_stacked(
                mesh,
                &dir.iter().map(|d| d * hstep).collect::<Vec<_>>(),
            ),
            &bg,
        );
        let minus = residual(
            &CorrectionTriple::from_stacked(
                mesh,
                &dir.iter().map(|d| -d * hstep).collect::<Vec<_>>(),
            ),
            &bg,
        );
        let ld = l.mul_vec(&dir);
        for k in 0..3 * n {
            let fd = (plus[k] - minus[k]) / (2.0 * hstep);
            assert!(
                (fd - ld[k]).abs() < 1e-5 * (1.0 + ld[k].abs()),
                "row {k}: {fd} vs {}",
                ld[k]
            );
        }
    }

    #[test]
    fn constant_phase_is_in_kernel() {
        let (_, _, bg) = setup(6, 2.0, 0.3, 0.5);
        let n = bg.mesh().len();
        let mut g = vec![0.0; 3 * n];
        g[n..2 * n].iter_mut().for_each(|v| *v = 1.0);
        let lg = jacobian(&bg).mul_vec(&g);
        assert!(lg.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_current_converges_immediately() {
        let (g, p, bg) = setup(8, 1.0, 0.0, 0.5);
        let s = solve_steady(&g, &p, &bg, &SteadyOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.rho_s.values.iter().all(|v| *v == 1.0));
        assert!(s.chi_s.values.iter().all(|v| *v == 0.0));
        assert!(s.phi_s.values.iter().all(|v| *v == 0.0));
        assert_eq!(s.steady_residuals.max(), 0.0);
    }

    #[test]
    fn h_norm_is_homogeneous() {
        let m = Mesh::new(8, 8, 1.0, 1.0).unwrap();
        let v = CorrectionTriple {
            rho1: ScalarField::from_fn(m, |x, y| x * y),
            chi1: ScalarField::from_fn(m, |x, _| x.sin()),
            phi1: ScalarField::from_fn(m, |_, y| y * y),
        };
        assert_eq!(h_norm(&CorrectionTriple::zeros(m), 0.5), 0.0);
        let a = h_norm(&v, 0.5);
        assert!((h_norm(&v.scale(-3.0), 0.5) - 3.0 * a).abs() < 1e-12 * a);
    }

    #[test]
    fn converged_solution_satisfies_steady_equations() {
        let (g, p, bg) = setup(16, 2.0, 0.2, 0.5);
        let s = solve_steady(&g, &p, &bg, &SteadyOptions::default()).unwrap();
        assert!(
            s.contraction_ratios.iter().all(|r| *r < 1.0),
            "{:?}",
            s.contraction_ratios
        );
        assert!(s.steady_residuals.max() < 1e-7, "{:?}", s.steady_residuals);
        assert!(s.steady_residuals.gauge_relative < 1e-8);
        // One more application of the map barely moves the fixed point.
        let l = jacobian(&bg);
        let system = PinnedSystem::new(l);
        let rhs = assemble_rhs(&s.correction, &bg, &system.matrix);
        let (next, _) = apply_a(
            &rhs,
            &system,
            bg.mesh(),
            None,
            SteadyOptions::default().inner,
        )
        .unwrap();
        assert!(
            h_norm(&next.sub(&s.correction).unwrap(), bg.epsilon)
                <= 2.0 * SteadyOptions::default().tol
        );
    }
}
