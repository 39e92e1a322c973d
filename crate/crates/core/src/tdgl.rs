//! Semi-implicit time stepping of the evolution equations.
//!
//! Diffusion is implicit, reaction and potential terms explicit. The
//! potential is recomputed from the current order parameter at every step and
//! normalized so that `sum |u|^2 phi dA = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::grad_l2;
use crate::error::{GlcError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{CurrentProfile, Grid};
use crate::linsolve::{solve_singular_neumann, solve_spd, Constraint, SolverSettings};
use crate::operators::{boundary_flux_source, laplacian_neumann, supercurrent_divergence};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub u: ComplexField,
    pub phi: ScalarField,
    pub t: f64,
    pub step_count: usize,
}

/// Solves `sigma lap(phi) = div Im(conj(u) grad u) + sigma s(J)` with the
/// constant fixed by `sum |u|^2 phi = 0`.
pub fn potential_solve(
    grid: &Grid,
    u: &ComplexField,
    profile: &CurrentProfile,
    sigma: f64,
    settings: SolverSettings,
) -> Result<ScalarField> {
    let mesh = grid.mesh;
    if u.mesh != mesh {
        return Err(GlcError::GridMismatch);
    }
    let weights: Vec<f64> = u.values.iter().map(|v| v.norm_sqr()).collect();
    if weights.iter().sum::<f64>() * mesh.cell_area() < 1e-12 * mesh.area() {
        return Err(GlcError::InvalidArgument(
            "|u|^2 integrates to zero; potential normalization is degenerate".into(),
        ));
    }
    let js = supercurrent_divergence(u);
    let src = boundary_flux_source(grid, profile, sigma);
    // (-sigma lap) phi = -(div j) - sigma s
    let rhs: Vec<f64> = (0..mesh.len())
        .map(|k| -js.values[k] - sigma * src.values[k])
        .collect();
    let op = laplacian_neumann(&mesh).matrix.scaled(-sigma);
    let (x, report) = solve_singular_neumann(
        &op,
        &rhs,
        Constraint::WeightedAffine {
            weights: &weights,
            offset: 0.0,
        },
        mesh.cell_area(),
        None,
        settings,
    )?;
    report.ensure_converged()?;
    ScalarField::new(mesh, x)
}

/// Relative defect of the potential normalization.
pub fn gauge_defect(u: &ComplexField, phi: &ScalarField) -> f64 {
    let m = u.mesh;
    let integral: f64 = u
        .values
        .iter()
        .zip(&phi.values)
        .map(|(a, b)| a.norm_sqr() * b)
        .sum::<f64>()
        * m.cell_area();
    let scale =
        (phi.values.iter().map(|v| v * v).sum::<f64>() * m.cell_area()).sqrt() * m.area().sqrt();
    if scale == 0.0 {
        integral.abs()
    } else {
        integral.abs() / scale
    }
}

#[derive(Debug, Clone)]
pub struct Stepper {
    pub grid: Grid,
    pub profile: CurrentProfile,
    pub epsilon: f64,
    pub sigma: f64,
    pub dt: f64,
    pub settings: SolverSettings,
    implicit: CsrMatrix,
}

impl Stepper {
    /// `dt_guard` is the largest admissible `dt / epsilon^2`.
    pub fn new(
        grid: &Grid,
        profile: &CurrentProfile,
        epsilon: f64,
        sigma: f64,
        dt: f64,
        dt_guard: f64,
        settings: SolverSettings,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(GlcError::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if dt > dt_guard * epsilon * epsilon * (1.0 + 1e-12) {
            return Err(GlcError::InvalidArgument(format!(
                "dt = {dt} exceeds the stability guard {dt_guard} * epsilon^2"
            )));
        }
        let mesh = grid.mesh;
        let implicit = laplacian_neumann(&mesh)
            .matrix
            .scaled(-dt)
            .plus_diagonal(&vec![1.0; mesh.len()]);
        Ok(Stepper {
            grid: grid.clone(),
            profile: profile.clone(),
            epsilon,
            sigma,
            dt,
            settings,
            implicit,
        })
    }

    pub fn initial_state(&self, u0: ComplexField) -> Result<EvolutionState> {
        let phi = potential_solve(&self.grid, &u0, &self.profile, self.sigma, self.settings)?;
        Ok(EvolutionState {
            u: u0,
            phi,
            t: 0.0,
            step_count: 0,
        })
    }

    /// One step; `state.phi` must belong to `state.u`.
    pub fn step(&self, state: &EvolutionState) -> Result<EvolutionState> {
        let mesh = self.grid.mesh;
        let n = mesh.len();
        let inv_eps2 = 1.0 / (self.epsilon * self.epsilon);
        let dt = self.dt;
        let mut rhs_re = vec![0.0; n];
        let mut rhs_im = vec![0.0; n];
        for k in 0..n {
            let u = state.u.values[k];
            let f = -Complex64::i() * state.phi.values[k] * u + inv_eps2 * u * (1.0 - u.norm_sqr());
            let r = u + dt * f;
            rhs_re[k] = r.re;
            rhs_im[k] = r.im;
        }
        let guess_re: Vec<f64> = state.u.values.iter().map(|v| v.re).collect();
        let guess_im: Vec<f64> = state.u.values.iter().map(|v| v.im).collect();
        let (re, rep) = solve_spd(&self.implicit, &rhs_re, Some(&guess_re), self.settings);
        rep.ensure_converged()?;
        let (im, rep) = solve_spd(&self.implicit, &rhs_im, Some(&guess_im), self.settings);
        rep.ensure_converged()?;
        let values: Vec<Complex64> = re
            .iter()
            .zip(&im)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        let t = state.t + dt;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GlcError::BlowUp { time: t });
        }
        let u = ComplexField { mesh, values };
        let phi = potential_solve(&self.grid, &u, &self.profile, self.sigma, self.settings)?;
        Ok(EvolutionState {
            u,
            phi,
            t,
            step_count: state.step_count + 1,
        })
    }
}

/// `min over theta of ||u - e^{i theta} w||_2`, from the inner product.
pub fn phase_distance(u: &ComplexField, w: &ComplexField) -> f64 {
    // Rotate explicitly instead of expanding the square: the expansion loses
    // everything below sqrt(machine eps) relative to ||u||.
    let inner: Complex64 = u
        .values
        .iter()
        .zip(&w.values)
        .map(|(a, b)| b.conj() * a)
        .sum();
    let align = if inner.norm() > 0.0 {
        inner.conj() / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let s: f64 = u
        .values
        .iter()
        .zip(&w.values)
        .map(|(a, b)| (a * align - b).norm_sqr())
        .sum();
    (s * u.mesh.cell_area()).sqrt()
}

pub fn l2_distance(u: &ComplexField, w: &ComplexField) -> f64 {
    let s: f64 = u
        .values
        .iter()
        .zip(&w.values)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    (s * u.mesh.cell_area()).sqrt()
}

/// `||grad u||^2 + ||1 - |u|^2||^2 / (2 eps^2)`.
pub fn energy(u: &ComplexField, epsilon: f64) -> f64 {
    let g = grad_l2(&u.re()).powi(2) + grad_l2(&u.im()).powi(2);
    let defect: f64 = u
        .values
        .iter()
        .map(|v| (1.0 - v.norm_sqr()).powi(2))
        .sum::<f64>()
        * u.mesh.cell_area();
    g + defect / (2.0 * epsilon * epsilon)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `||u - u_ref||_2`; empty without a reference.
    pub distance: Vec<f64>,
    /// Distance modulo a global phase; empty without a reference.
    pub phase_distance: Vec<f64>,
    pub energy: Vec<f64>,
    pub max_modulus: Vec<f64>,
    /// Largest normalization defect seen over all steps.
    pub max_gauge_defect: f64,
    /// Time of the first non-finite state, if any.
    pub blow_up: Option<f64>,
}

impl Trajectory {
    fn record(&mut self, s: &EvolutionState, reference: Option<&ComplexField>, epsilon: f64) {
        self.times.push(s.t);
        if let Some(r) = reference {
            self.distance.push(l2_distance(&s.u, r));
            self.phase_distance.push(phase_distance(&s.u, r));
        }
        self.energy.push(energy(&s.u, epsilon));
        self.max_modulus
            .push(s.u.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,distance,phase_distance,energy,max_modulus\n");
        for k in 0..self.times.len() {
            let d = self
                .distance
                .get(k)
                .map_or(String::new(), |v| v.to_string());
            let p = self
                .phase_distance
                .get(k)
                .map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{d},{p},{},{}\n",
                self.times[k], self.energy[k], self.max_modulus[k]
            ));
        }
        out
    }
}

/// Runs `round(t_final / dt)` steps, sampling every `sample_every` steps.
/// A blow-up stops the run and returns the last finite state.
pub fn evolve(
    stepper: &Stepper,
    u0: ComplexField,
    t_final: f64,
    sample_every: usize,
    reference: Option<&ComplexField>,
) -> Result<(Trajectory, EvolutionState)> {
    if !(t_final > 0.0) {
        return Err(GlcError::InvalidArgument(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    let every = sample_every.max(1);
    let steps = (t_final / stepper.dt).round() as usize;
    let mut state = stepper.initial_state(u0)?;
    let mut traj = Trajectory::default();
    traj.record(&state, reference, stepper.epsilon);
    for n in 1..=steps {
        match stepper.step(&state) {
            Ok(next) => state = next,
            Err(GlcError::BlowUp { time }) => {
                traj.blow_up = Some(time);
                return Ok((traj, state));
            }
            Err(e) => return Err(e),
        }
        traj.max_gauge_defect = traj
            .max_gauge_defect
            .max(gauge_defect(&state.u, &state.phi));
        if n % every == 0 || n == steps {
            traj.record(&state, reference, stepper.epsilon);
        }
    }
    Ok((traj, state))
}

/// Least-squares exponential rate of the phase-modded distance over
/// `window = (t0, t1)`.
pub fn decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.phase_distance)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, d)| (*t, *d))
        .collect();
    if pts.len() < 5 {
        return Err(GlcError::DecayFit(format!(
            "{} samples in window, need 5",
            pts.len()
        )));
    }
    if pts.iter().any(|p| !(p.1 > 0.0)) {
        return Err(GlcError::DecayFit("nonpositive distance in window".into()));
    }
    if pts.windows(2).any(|w| w[1].1 >= w[0].1) {
        return Err(GlcError::DecayFit(
            "distance is not decreasing in window".into(),
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    Ok(-stl / stt)
}
