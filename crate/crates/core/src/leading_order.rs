//! Approximate steady state: density slaved to the phase gradient.
//!
//! Fields carrying a `tilde` suffix are normalized by `norm_j`; the physical
//! phase and potential are `norm_j` times them.

use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};
use crate::field::ScalarField;
use crate::grid::{CurrentProfile, Grid, Mesh};
use crate::linsolve::{
    norm, remove_mean, solve_singular_neumann, solve_spd, Constraint, SolverSettings,
};
use crate::operators::{
    boundary_flux_source, cell_gradient_product, laplacian_neumann, weighted_div_grad,
};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingOrderOptions {
    /// Corrector tolerance, relative to the L2 norm of the boundary source.
    pub tol: f64,
    pub max_iter: usize,
    pub delta_guard: f64,
    pub inner: SolverSettings,
}

impl Default for LeadingOrderOptions {
    fn default() -> Self {
        LeadingOrderOptions {
            tol: 1e-10,
            max_iter: 100,
            delta_guard: 0.5,
            inner: SolverSettings {
                tol: 1e-12,
                max_iter: 20_000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingOrderState {
    pub chi0_tilde: ScalarField,
    pub phi0_tilde: ScalarField,
    pub chi00_tilde: ScalarField,
    pub phi00_tilde: ScalarField,
    pub omega_delta: ScalarField,
    pub varphi_delta: ScalarField,
    pub rho0: ScalarField,
    /// Boundary source of the normalized profile `J / norm_j`.
    pub unit_source: ScalarField,
    pub norm_j: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub corrector_residual: f64,
    /// Residual evaluations; updates applied are one fewer.
    pub iterations: usize,
}

impl LeadingOrderState {
    pub fn mesh(&self) -> Mesh {
        self.rho0.mesh
    }

    pub fn chi0(&self) -> ScalarField {
        self.chi0_tilde.scale(self.norm_j)
    }

    pub fn phi0(&self) -> ScalarField {
        self.phi0_tilde.scale(self.norm_j)
    }

    /// Discrete L2 norms of the two corrector equations,
    /// `-sigma lap(phi) + rho0^2 phi + sigma s` and `rho0^2 phi - Div(rho0^2 grad chi)`.
    pub fn residuals(&self) -> Result<(f64, f64)> {
        let (f1, f2) = corrector_residual(self)?;
        let da = self.mesh().cell_area().sqrt();
        Ok((norm(&f1) * da, norm(&f2) * da))
    }
}

fn helmholtz(mesh: &Mesh, sigma: f64) -> CsrMatrix {
    laplacian_neumann(mesh)
        .matrix
        .scaled(-sigma)
        .plus_diagonal(&vec![1.0; mesh.len()])
}

/// Solves `-sigma lap(phi) + phi = 0` with `-sigma dphi/dnu = J`.
pub fn solve_base_phi(
    grid: &Grid,
    profile: &CurrentProfile,
    sigma: f64,
    settings: SolverSettings,
) -> Result<ScalarField> {
    let mesh = grid.mesh;
    let rhs = boundary_flux_source(grid, profile, sigma).scale(-sigma);
    let (x, report) = solve_spd(&helmholtz(&mesh, sigma), &rhs.values, None, settings);
    report.ensure_converged()?;
    ScalarField::new(mesh, x)
}

/// Zero-mean solution of `lap(chi) = phi00` with zero normal flux.
pub fn solve_base_chi(phi00: &ScalarField, settings: SolverSettings) -> Result<ScalarField> {
    let mesh = phi00.mesh;
    let lap = laplacian_neumann(&mesh);
    // phi00 has zero mean only up to the accuracy of its own solve.
    let mut rhs = phi00.values.clone();
    remove_mean(&mut rhs);
    let (x, report) = solve_singular_neumann(
        &lap.matrix,
        &rhs,
        Constraint::ZeroMean,
        mesh.cell_area(),
        None,
        settings,
    )?;
    report.ensure_converged()?;
    ScalarField::new(mesh, x)
}

/// `rho0 = sqrt(1 - delta^2 |grad chi|^2)` with the squared gradient averaged
/// from faces to cells.
pub fn density_from_phase(chi0_tilde: &ScalarField, delta: f64) -> Result<ScalarField> {
    let g = cell_gradient_product(chi0_tilde, chi0_tilde);
    density_from_gradient_square(&g, delta)
}

pub(crate) fn density_from_gradient_square(g: &ScalarField, delta: f64) -> Result<ScalarField> {
    let d2 = delta * delta;
    let (cell, max_value) = g.values.iter().enumerate().map(|(k, v)| (k, d2 * v)).fold(
        (0, f64::NEG_INFINITY),
        |acc, c| if c.1 > acc.1 { c } else { acc },
    );
    if max_value >= 1.0 {
        return Err(GlcError::SupercriticalCurrent { cell, max_value });
    }
    Ok(g.map(|v| (1.0 - d2 * v).sqrt()))
}

fn corrector_residual(state: &LeadingOrderState) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = state.mesh();
    let rho2 = state.rho0.mul(&state.rho0)?;
    let lap_phi = laplacian_neumann(&mesh).apply(&state.phi0_tilde);
    let f1: Vec<f64> = (0..mesh.len())
        .map(|k| {
            -state.sigma * lap_phi.values[k]
                + rho2.values[k] * state.phi0_tilde.values[k]
                + state.sigma * state.unit_source.values[k]
        })
        .collect();
    let div = weighted_div_grad(&mesh, &rho2)?.apply(&state.chi0_tilde);
    let f2: Vec<f64> = (0..mesh.len())
        .map(|k| rho2.values[k] * state.phi0_tilde.values[k] - div.values[k])
        .collect();
    Ok((f1, f2))
}

/// Quasi-Newton iteration with the frozen derivative at zero correction:
/// first `(-sigma lap + 1) dphi = -F1`, then `-lap domega = -F2 - dphi`.
pub fn solve_corrector(
    state: &LeadingOrderState,
    opts: &LeadingOrderOptions,
) -> Result<LeadingOrderState> {
    if state.delta >= opts.delta_guard {
        return Err(GlcError::DeltaAboveGuard {
            delta: state.delta,
            guard: opts.delta_guard,
        });
    }
    let mesh = state.mesh();
    let lap = laplacian_neumann(&mesh);
    let neg_lap = lap.matrix.scaled(-1.0);
    let helm = helmholtz(&mesh, state.sigma);
    let da = mesh.cell_area().sqrt();
    let scale = (norm(&state.unit_source.values) * da * state.sigma).max(f64::MIN_POSITIVE);
    let mut s = state.clone();
    let mut previous: Option<f64> = None;
    let mut growth = 0;
    for iteration in 1..=opts.max_iter {
        s.rho0 = density_from_phase(&s.chi0_tilde, s.delta)?;
        let (f1, f2) = corrector_residual(&s)?;
        let res = (norm(&f1).powi(2) + norm(&f2).powi(2)).sqrt() * da;
        s.corrector_residual = res;
        s.iterations = iteration;
        if res <= opts.tol * scale {
            return Ok(s);
        }
        growth = match previous {
            Some(p) if res > p => growth + 1,
            _ => 0,
        };
        if growth >= 3 || !res.is_finite() {
            return Err(GlcError::CorrectorDiverged {
                iterations: iteration,
                residual: res,
            });
        }
        previous = Some(res);
        let rhs1: Vec<f64> = f1.iter().map(|v| -v).collect();
        let (dphi, rep) = solve_spd(&helm, &rhs1, None, opts.inner);
        rep.ensure_converged()?;
        let mut rhs2: Vec<f64> = f2.iter().zip(&dphi).map(|(a, b)| -a - b).collect();
        remove_mean(&mut rhs2);
        let (domega, rep) = solve_singular_neumann(
            &neg_lap,
            &rhs2,
            Constraint::ZeroMean,
            mesh.cell_area(),
            None,
            opts.inner,
        )?;
        rep.ensure_converged()?;
        for k in 0..mesh.len() {
            s.varphi_delta.values[k] += dphi[k];
            s.omega_delta.values[k] += domega[k];
            s.phi0_tilde.values[k] = s.phi00_tilde.values[k] + s.varphi_delta.values[k];
            s.chi0_tilde.values[k] = s.chi00_tilde.values[k] + s.omega_delta.values[k];
        }
    }
    Err(GlcError::MaxIterations {
        max_iter: opts.max_iter,
        increment: s.corrector_residual,
    })
}

/// Base pair plus corrector for the given profile.
pub fn leading_order(
    grid: &Grid,
    profile: &CurrentProfile,
    epsilon: f64,
    sigma: f64,
    opts: &LeadingOrderOptions,
) -> Result<LeadingOrderState> {
    let mesh = grid.mesh;
    let norm_j = profile.norm_j;
    let delta = epsilon * norm_j;
    let zero = ScalarField::zeros(mesh);
    if norm_j == 0.0 {
        return Ok(LeadingOrderState {
            chi0_tilde: zero.clone(),
            phi0_tilde: zero.clone(),
            chi00_tilde: zero.clone(),
            phi00_tilde: zero.clone(),
            omega_delta: zero.clone(),
            varphi_delta: zero.clone(),
            rho0: ScalarField::constant(mesh, 1.0),
            unit_source: zero,
            norm_j,
            delta,
            epsilon,
            sigma,
            corrector_residual: 0.0,
            iterations: 1,
        });
    }
    if delta >= opts.delta_guard {
        return Err(GlcError::DeltaAboveGuard {
            delta,
            guard: opts.delta_guard,
        });
    }
    let unit = profile.normalized();
    let phi00 = solve_base_phi(grid, &unit, sigma, opts.inner)?;
    let chi00 = solve_base_chi(&phi00, opts.inner)?;
    let state = LeadingOrderState {
        chi0_tilde: chi00.clone(),
        phi0_tilde: phi00.clone(),
        chi00_tilde: chi00,
        phi00_tilde: phi00,
        omega_delta: zero.clone(),
        varphi_delta: zero,
        rho0: ScalarField::constant(mesh, 1.0),
        unit_source: boundary_flux_source(grid, &unit, sigma),
        norm_j,
        delta,
        epsilon,
        sigma,
        corrector_residual: f64::INFINITY,
        iterations: 0,
    };
    solve_corrector(&state, opts)
}
