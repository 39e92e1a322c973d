//! Discrete Sobolev norms, log-log regression and residual assembly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{CurrentProfile, Grid, Mesh};
use crate::operators::{
    boundary_flux_source, divergence, gradient, laplacian_complex, supercurrent_divergence,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormSuite {
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
    /// L2 norm of the face gradient.
    pub grad_l2: f64,
    /// L2 norm of the Hessian, `sqrt(fxx^2 + 2 fxy^2 + fyy^2)` integrated.
    pub hess_l2: f64,
    pub w12: f64,
    pub w22: f64,
}

pub fn l2(f: &ScalarField) -> f64 {
    (f.values.iter().map(|v| v * v).sum::<f64>() * f.mesh.cell_area()).sqrt()
}

pub fn grad_l2(f: &ScalarField) -> f64 {
    let g = gradient(f);
    let s: f64 = g.x.iter().chain(&g.y).map(|v| v * v).sum();
    (s * f.mesh.cell_area()).sqrt()
}

/// Second derivative along a strided line, one-sided at the ends.
fn second_diff(line: &[f64], h: f64, out: &mut [f64]) {
    let n = line.len();
    let h2 = h * h;
    out[0] = (2.0 * line[0] - 5.0 * line[1] + 4.0 * line[2] - line[3]) / h2;
    out[n - 1] = (2.0 * line[n - 1] - 5.0 * line[n - 2] + 4.0 * line[n - 3] - line[n - 4]) / h2;
    for i in 1..n - 1 {
        out[i] = (line[i - 1] - 2.0 * line[i] + line[i + 1]) / h2;
    }
}

/// First derivative along a line, one-sided second order at the ends.
fn first_diff(line: &[f64], h: f64, out: &mut [f64]) {
    let n = line.len();
    out[0] = (-3.0 * line[0] + 4.0 * line[1] - line[2]) / (2.0 * h);
    out[n - 1] = (3.0 * line[n - 1] - 4.0 * line[n - 2] + line[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (line[i + 1] - line[i - 1]) / (2.0 * h);
    }
}

fn along_x(mesh: &Mesh, v: &[f64], op: fn(&[f64], f64, &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for j in 0..mesh.ny {
        let r = j * mesh.nx..(j + 1) * mesh.nx;
        op(&v[r.clone()], mesh.hx(), &mut out[r]);
    }
    out
}

fn along_y(mesh: &Mesh, v: &[f64], op: fn(&[f64], f64, &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let mut line = vec![0.0; mesh.ny];
    let mut res = vec![0.0; mesh.ny];
    for i in 0..mesh.nx {
        for j in 0..mesh.ny {
            line[j] = v[mesh.index(i, j)];
        }
        op(&line, mesh.hy(), &mut res);
        for j in 0..mesh.ny {
            out[mesh.index(i, j)] = res[j];
        }
    }
    out
}

pub fn hessian_l2(f: &ScalarField) -> f64 {
    let m = f.mesh;
    let fxx = along_x(&m, &f.values, second_diff);
    let fyy = along_y(&m, &f.values, second_diff);
    let fxy = along_y(&m, &along_x(&m, &f.values, first_diff), first_diff);
    let s: f64 = (0..m.len())
        .map(|k| fxx[k] * fxx[k] + 2.0 * fxy[k] * fxy[k] + fyy[k] * fyy[k])
        .sum();
    (s * m.cell_area()).sqrt()
}

pub fn norms(f: &ScalarField) -> NormSuite {
    let area = f.mesh.cell_area();
    let l2v = l2(f);
    let l4 = (f.values.iter().map(|v| v.powi(4)).sum::<f64>() * area).powf(0.25);
    let linf = f.max_abs();
    let g = grad_l2(f);
    let h = hessian_l2(f);
    let w12 = (l2v * l2v + g * g).sqrt();
    let w22 = (w12 * w12 + h * h).sqrt();
    NormSuite {
        l2: l2v,
        l4,
        linf,
        grad_l2: g,
        hess_l2: h,
        w12,
        w22,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub variable: String,
    pub log_x: Vec<f64>,
    pub log_y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub max_deviation: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn scaling_fit(variable: &str, samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 3 {
        return Err(GlcError::InvalidArgument(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some((x, y)) = samples.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(GlcError::InvalidArgument(format!(
            "nonpositive sample ({x}, {y})"
        )));
    }
    let log_x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let log_y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let n = samples.len() as f64;
    let mx = log_x.iter().sum::<f64>() / n;
    let my = log_y.iter().sum::<f64>() / n;
    let sxx: f64 = log_x.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = log_x
        .iter()
        .zip(&log_y)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    if sxx == 0.0 {
        return Err(GlcError::InvalidArgument(
            "all sample abscissae coincide".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_deviation = log_x
        .iter()
        .zip(&log_y)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        variable: variable.to_string(),
        log_x,
        log_y,
        slope,
        intercept,
        max_deviation,
    })
}

/// Discrete L2 residuals of the steady equations for physical fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteadyResiduals {
    /// Density equation `-lap(rho) + rho |grad chi|^2 - eps^-2 rho (1 - rho^2)`.
    pub density: f64,
    /// Supercurrent balance `Div(rho^2 grad chi) - rho^2 phi`.
    pub current: f64,
    /// Potential equation `sigma lap(phi) - Div(rho^2 grad chi) - sigma s`.
    pub potential: f64,
    /// `|sum rho^2 phi dA|`.
    pub gauge_integral: f64,
    /// Gauge integral over `||phi||_2 sqrt(|Omega|)`; zero when `phi` vanishes.
    pub gauge_relative: f64,
    pub chi_mean: f64,
}

impl SteadyResiduals {
    pub fn max(&self) -> f64 {
        self.density.max(self.current).max(self.potential)
    }
}

/// Assembles the steady equations in gauge-invariant complex form on
/// `u = rho exp(i chi)`: the density and current equations are the real part
/// and `rho` times the imaginary part of `e^{-i chi}(-lap u + i phi u -
/// eps^-2 u (1 - |u|^2))`, so the supercurrent is `Im(conj(u) grad u)`.
pub fn steady_residual(
    rho: &ScalarField,
    chi: &ScalarField,
    phi: &ScalarField,
    epsilon: f64,
    sigma: f64,
    grid: &Grid,
    profile: &CurrentProfile,
) -> Result<SteadyResiduals> {
    let mesh = grid.mesh;
    if rho.mesh != mesh || chi.mesh != mesh || phi.mesh != mesh {
        return Err(GlcError::GridMismatch);
    }
    let u = ComplexField::join(rho, chi)?;
    let lap_u = laplacian_complex(&u);
    let inv_eps2 = 1.0 / (epsilon * epsilon);
    let mut ra = vec![0.0; mesh.len()];
    let mut rb = vec![0.0; mesh.len()];
    for k in 0..mesh.len() {
        let uk = u.values[k];
        let e = -lap_u.values[k] + Complex64::i() * phi.values[k] * uk
            - inv_eps2 * uk * (1.0 - uk.norm_sqr());
        let rotated = e * Complex64::from_polar(1.0, -chi.values[k]);
        ra[k] = rotated.re;
        rb[k] = rho.values[k] * rotated.im;
    }
    let lap_phi = divergence(&gradient(phi));
    let js = supercurrent_divergence(&u);
    let src = boundary_flux_source(grid, profile, sigma);
    let rc: Vec<f64> = (0..mesh.len())
        .map(|k| sigma * lap_phi.values[k] - js.values[k] - sigma * src.values[k])
        .collect();
    let l2v = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() * mesh.cell_area()).sqrt();
    let gauge_integral = (0..mesh.len())
        .map(|k| rho.values[k].powi(2) * phi.values[k])
        .sum::<f64>()
        .abs()
        * mesh.cell_area();
    let phi_scale = l2(phi) * mesh.area().sqrt();
    Ok(SteadyResiduals {
        density: l2v(&ra),
        current: l2v(&rb),
        potential: l2v(&rc),
        gauge_integral,
        gauge_relative: if phi_scale > 0.0 {
            gauge_integral / phi_scale
        } else {
            0.0
        },
        chi_mean: chi.mean(),
    })
}
