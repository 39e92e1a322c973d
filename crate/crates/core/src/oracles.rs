//! Closed-form and direct-solve reference values.
//!
//! Nothing here calls the operators, solvers or models under test; the only
//! dependency is the mesh description.

use std::f64::consts::PI;

use serde::Serialize;

use crate::grid::Mesh;

/// Cell-centred 1D solution of `-sigma phi'' + phi = 0` on `[0, lx]` with
/// `sigma phi' = j` at both ends, next to the analytic solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDimPhi {
    pub x: Vec<f64>,
    pub direct: Vec<f64>,
    pub exact: Vec<f64>,
}

impl OneDimPhi {
    pub fn max_deviation(&self) -> f64 {
        self.direct
            .iter()
            .zip(&self.exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `j sinh((x - lx/2)/sqrt(sigma)) / (sqrt(sigma) cosh(lx / (2 sqrt(sigma))))`.
pub fn phi_1d_exact(j: f64, sigma: f64, lx: f64, x: f64) -> f64 {
    let s = sigma.sqrt();
    j * ((x - 0.5 * lx) / s).sinh() / (s * (lx / (2.0 * s)).cosh())
}

pub fn oracle_1d_phi(j: f64, sigma: f64, lx: f64, n: usize) -> OneDimPhi {
    assert!(n >= 2 && sigma > 0.0 && lx > 0.0);
    let h = lx / n as f64;
    let c = sigma / (h * h);
    // Tridiagonal rows: lower, diagonal, upper, rhs.
    let mut lower = vec![-c; n];
    let mut diag = vec![2.0 * c + 1.0; n];
    let mut upper = vec![-c; n];
    let mut rhs = vec![0.0; n];
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    diag[0] = c + 1.0;
    diag[n - 1] = c + 1.0;
    rhs[0] = -j / h;
    rhs[n - 1] = j / h;
    // Thomas elimination; the matrix is diagonally dominant so no pivoting.
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut direct = vec![0.0; n];
    direct[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        direct[i] = (rhs[i] - upper[i] * direct[i + 1]) / diag[i];
    }
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let exact = x.iter().map(|x| phi_1d_exact(j, sigma, lx, *x)).collect();
    OneDimPhi { x, direct, exact }
}

/// Eigenvalues of the discrete Neumann Laplacian `-lap_h`, ascending, with the
/// mode indices `(m, l)`.
pub fn neumann_laplacian_eigenvalues(mesh: &Mesh) -> Vec<(f64, usize, usize)> {
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let mut out = Vec::with_capacity(mesh.len());
    for m in 0..mesh.nx {
        for l in 0..mesh.ny {
            let mu = 2.0 / (hx * hx) * (1.0 - (m as f64 * PI / mesh.nx as f64).cos())
                + 2.0 / (hy * hy) * (1.0 - (l as f64 * PI / mesh.ny as f64).cos());
            out.push((if m + l == 0 { 0.0 } else { mu }, m, l));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Full spectrum of the linearization about `u = 1` without current:
/// `2/eps^2 + mu` over all modes, `1/sigma + mu` over nonconstant modes, and
/// the gauge value 0. Ascending, so the gauge value comes first.
pub fn oracle_j0_spectrum(epsilon: f64, sigma: f64, mesh: &Mesh) -> Vec<f64> {
    let mut out = vec![0.0];
    for (mu, m, l) in neumann_laplacian_eigenvalues(mesh) {
        out.push(2.0 / (epsilon * epsilon) + mu);
        if m + l > 0 {
            out.push(1.0 / sigma + mu);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Smallest eigenvalue of each branch at zero current: `(density, phase)`.
pub fn j0_branch_leaders(epsilon: f64, sigma: f64, mesh: &Mesh) -> (f64, f64) {
    let mu1 = neumann_laplacian_eigenvalues(mesh)[1].0;
    (2.0 / (epsilon * epsilon), 1.0 / sigma + mu1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ManufacturedOperator {
    /// `lap u = f`, zero-mean solution.
    Laplacian,
    /// `div(a grad u) = f`, zero-mean solution.
    Weighted,
    /// `(-sigma lap + w) u = f`.
    Helmholtz,
}

/// A manufactured Neumann problem on `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub id: &'static str,
    pub operator: ManufacturedOperator,
    pub sigma: f64,
    pub exact: fn(f64, f64, f64, f64) -> f64,
    pub forcing: fn(f64, f64, f64, f64, f64) -> f64,
    /// Weight `a` or `w`; unused for the plain Laplacian.
    pub coefficient: fn(f64, f64) -> f64,
    pub derivation: &'static str,
}

fn cos_x(x: f64, _: f64, lx: f64, _: f64) -> f64 {
    (PI * x / lx).cos()
}

fn cos_x_lap(x: f64, y: f64, lx: f64, ly: f64, _: f64) -> f64 {
    -(PI / lx).powi(2) * cos_x(x, y, lx, ly)
}

fn weighted_forcing(x: f64, _: f64, lx: f64, _: f64, _: f64) -> f64 {
    let k = PI / lx;
    -k * (k * x).sin() - (1.0 + x) * k * k * (k * x).cos()
}

fn cos_xy(x: f64, y: f64, lx: f64, ly: f64) -> f64 {
    (PI * x / lx).cos() * (PI * y / ly).cos()
}

fn helmholtz_forcing(x: f64, y: f64, lx: f64, ly: f64, sigma: f64) -> f64 {
    (sigma * PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly)) + 1.0) * cos_xy(x, y, lx, ly)
}

pub fn manufactured_cases() -> Vec<ManufacturedCase> {
    vec![
        ManufacturedCase {
            id: "cos-x",
            operator: ManufacturedOperator::Laplacian,
            sigma: 1.0,
            exact: cos_x,
            forcing: cos_x_lap,
            coefficient: |_, _| 1.0,
            derivation: "u = cos(pi x / lx); u'' = -(pi/lx)^2 u; u' vanishes at x = 0, lx",
        },
        ManufacturedCase {
            id: "weighted",
            operator: ManufacturedOperator::Weighted,
            sigma: 1.0,
            exact: cos_x,
            forcing: weighted_forcing,
            coefficient: |x, _| 1.0 + x,
            derivation: "a = 1 + x, u = cos(k x), k = pi/lx; (a u')' = -k sin(k x) - (1 + x) k^2 cos(k x)",
        },
        ManufacturedCase {
            id: "helmholtz",
            operator: ManufacturedOperator::Helmholtz,
            sigma: 0.7,
            exact: cos_xy,
            forcing: helmholtz_forcing,
            coefficient: |_, _| 1.0,
            derivation: "w = 1, u = cos(pi x/lx) cos(pi y/ly); -sigma lap u + u = (sigma pi^2 (lx^-2 + ly^-2) + 1) u",
        },
    ]
}

pub fn manufactured_case(id: &str) -> Option<ManufacturedCase> {
    manufactured_cases().into_iter().find(|c| c.id == id)
}

/// A catalogued reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCase {
    pub name: String,
    pub inputs: String,
    pub expected: f64,
    pub tolerance: f64,
    pub derivation: String,
}

pub fn catalogue() -> Vec<OracleCase> {
    let unit64 = Mesh::new_unchecked(64, 64, 1.0, 1.0);
    let (rho_lead, chi_lead) = j0_branch_leaders(0.5, 1.0, &unit64);
    let (_, crossover) = j0_branch_leaders(1.0, 10.0, &Mesh::new_unchecked(64, 64, 4.0, 4.0));
    let phi = oracle_1d_phi(1.0, 1.0, 4.0, 4096);
    let mut cases = vec![
        OracleCase {
            name: "phi-1d-boundary".into(),
            inputs: "j = 1, sigma = 1, lx = 4".into(),
            expected: phi_1d_exact(1.0, 1.0, 4.0, 0.0),
            tolerance: 1e-6,
            derivation: "closed form j sinh((x - lx/2)/sqrt(sigma)) / (sqrt(sigma) cosh(lx/(2 sqrt(sigma)))) at x = 0".into(),
        },
        OracleCase {
            name: "phi-1d-direct-vs-exact".into(),
            inputs: "j = 1, sigma = 1, lx = 4, n = 4096".into(),
            expected: phi.max_deviation(),
            tolerance: 1e-6,
            derivation: "max deviation of the three-point direct solve from the closed form".into(),
        },
        OracleCase {
            name: "j0-spectrum-density-leader".into(),
            inputs: "eps = 0.5, sigma = 1, unit square 64x64".into(),
            expected: rho_lead,
            tolerance: 0.02,
            derivation: "constant density mode, 2/eps^2".into(),
        },
        OracleCase {
            name: "j0-spectrum-phase-leader".into(),
            inputs: "eps = 0.5, sigma = 1, unit square 64x64".into(),
            expected: chi_lead,
            tolerance: 0.02,
            derivation: "1/sigma + mu_1, mu_1 = (2/h^2)(1 - cos(pi/64))".into(),
        },
        OracleCase {
            name: "j0-spectrum-crossover".into(),
            inputs: "eps = 1, sigma = 10, square of side 4, 64x64".into(),
            expected: crossover,
            tolerance: 0.02,
            derivation: "phase branch leads since 0.1 + mu_1 < 2 when mu_1 is near (pi/4)^2".into(),
        },
    ];
    for c in manufactured_cases() {
        cases.push(OracleCase {
            name: format!("manufactured-{}", c.id),
            inputs: format!(
                "{:?} on the unit square, 16 to 128 cells per side",
                c.operator
            ),
            expected: 2.0,
            tolerance: 0.1,
            derivation: c.derivation.into(),
        });
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flux_gives_zero_potential() {
        let r = oracle_1d_phi(0.0, 1.0, 2.0, 32);
        assert!(r.direct.iter().chain(&r.exact).all(|v| *v == 0.0));
    }

    #[test]
    fn direct_solve_matches_closed_form() {
        let r = oracle_1d_phi(1.0, 1.0, 4.0, 4096);
        assert!(r.max_deviation() < 1e-6, "{}", r.max_deviation());
    }

    #[test]
    fn large_conductivity_flattens_the_potential() {
        let peaks: Vec<f64> = [1.0, 4.0, 16.0, 64.0]
            .iter()
            .map(|s| oracle_1d_phi(1.0, *s, 4.0, 512).direct[0].abs())
            .collect();
        assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
        // Antisymmetric linear limit: phi ~ j (x - lx/2) / sigma for sigma >> lx^2.
        let r = oracle_1d_phi(1.0, 1e4, 4.0, 512);
        for (x, v) in r.x.iter().zip(&r.direct) {
            assert!((v - (x - 2.0) / 1e4).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_current_spectrum_leaders() {
        let m = Mesh::new(64, 64, 1.0, 1.0).unwrap();
        let s = oracle_j0_spectrum(0.5, 1.0, &m);
        assert_eq!(s.iter().filter(|v| **v == 0.0).count(), 1);
        assert_eq!(s[1], 8.0);
        assert_eq!(s.len(), 2 * m.len());
        let mu1 = neumann_laplacian_eigenvalues(&m)[1].0;
        assert!((mu1 - PI * PI).abs() < 0.01);
        // On the unit square mu_1 is too large for the phase branch to lead.
        assert_eq!(oracle_j0_spectrum(1.0, 10.0, &m)[1], 2.0);
        let wide = Mesh::new(64, 64, 4.0, 4.0).unwrap();
        let mu1 = neumann_laplacian_eigenvalues(&wide)[1].0;
        let crossover = oracle_j0_spectrum(1.0, 10.0, &wide);
        assert!((crossover[1] - (0.1 + mu1)).abs() < 1e-12);
        assert!((crossover[1] - (0.1 + PI * PI / 16.0)).abs() < 1e-3);
    }

    #[test]
    fn forcings_match_finite_difference_derivatives() {
        let (lx, ly) = (1.3, 0.8);
        let h = 1e-4;
        for c in manufactured_cases() {
            for (x, y) in [(0.2, 0.3), (0.7, 0.1), (1.1, 0.6)] {
                let u = |x: f64, y: f64| (c.exact)(x, y, lx, ly);
                let a = c.coefficient;
                let ax = |x: f64, y: f64| {
                    let ap = a(x + h / 2.0, y);
                    let am = a(x - h / 2.0, y);
                    (ap * (u(x + h, y) - u(x, y)) - am * (u(x, y) - u(x - h, y))) / (h * h)
                };
                let ay = |x: f64, y: f64| {
                    let ap = a(x, y + h / 2.0);
                    let am = a(x, y - h / 2.0);
                    (ap * (u(x, y + h) - u(x, y)) - am * (u(x, y) - u(x, y - h))) / (h * h)
                };
                let lhs = match c.operator {
                    ManufacturedOperator::Laplacian | ManufacturedOperator::Weighted => {
                        ax(x, y) + ay(x, y)
                    }
                    ManufacturedOperator::Helmholtz => -c.sigma * (ax(x, y) + ay(x, y)) + u(x, y),
                };
                let f = (c.forcing)(x, y, lx, ly, c.sigma);
                assert!(
                    (lhs - f).abs() < 1e-5 * f.abs().max(1.0),
                    "{} at ({x}, {y}): {lhs} vs {f}",
                    c.id
                );
            }
        }
    }

    #[test]
    fn catalogue_entries_carry_derivations() {
        let cat = catalogue();
        assert!(cat.len() >= 8);
        assert!(cat
            .iter()
            .all(|c| !c.derivation.is_empty() && c.tolerance > 0.0));
        assert!(manufactured_case("weighted").is_some());
        assert!(manufactured_case("missing").is_none());
    }
}
