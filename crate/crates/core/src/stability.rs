//! Linearization of the evolution operator around a steady state and its
//! low spectrum.
//!
//! Perturbations are written `u = e^{i chi_s} (rho_s + v)` with
//! `v = a + i b`, `a = rho`, `b = rho_s chi`. In `(a, b)` coordinates the
//! operator `B` is a real `2n x 2n` matrix whose spectrum equals that of the
//! generalized problem `K w = lambda M w` in `(rho, chi)` coordinates with
//! `K = P B P`, `M = P^2`, `P = diag(I, rho_s)`.

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};
use crate::field::ScalarField;
use crate::grid::Mesh;
use crate::linsolve::{
    dot, norm, remove_mean, solve_singular_neumann, Constraint, SolverSettings, SparseLu, DENSE_CAP,
};
use crate::operators::{for_each_interior_face, laplacian_neumann};
use crate::sparse::CsrMatrix;
use crate::steady::SteadyStateSolution;

/// Linearized operator about `(rho_s, chi_s, phi_s)`.
pub struct LinearizedOperator {
    pub mesh: Mesh,
    pub epsilon: f64,
    pub sigma: f64,
    pub rho_s: ScalarField,
    pub chi_s: ScalarField,
    pub phi_s: ScalarField,
    /// Everything except the nonlocal potential, acting on `(a, b)`.
    local: CsrMatrix,
    /// `div` of the linearized supercurrent, `n x 2n`.
    coupling: CsrMatrix,
    settings: SolverSettings,
    dense: Option<Mat<f64>>,
}

impl LinearizedOperator {
    pub fn from_steady(s: &SteadyStateSolution, settings: SolverSettings) -> Result<Self> {
        let bg = &s.background;
        Self::new(&s.rho_s, &s.chi_s, &s.phi_s, bg.epsilon, bg.sigma, settings)
    }

    pub fn new(
        rho_s: &ScalarField,
        chi_s: &ScalarField,
        phi_s: &ScalarField,
        epsilon: f64,
        sigma: f64,
        settings: SolverSettings,
    ) -> Result<Self> {
        let mesh = rho_s.mesh;
        if chi_s.mesh != mesh || phi_s.mesh != mesh {
            return Err(GlcError::GridMismatch);
        }
        if rho_s.values.iter().any(|r| !(*r > 0.0)) {
            return Err(GlcError::InvalidArgument(
                "steady density must be positive".into(),
            ));
        }
        let n = mesh.len();
        let inv_eps2 = 1.0 / (epsilon * epsilon);
        let (rho, chi, phi) = (&rho_s.values, &chi_s.values, &phi_s.values);
        let mut t = Vec::with_capacity(12 * n);
        let mut c = Vec::with_capacity(8 * n);
        for_each_interior_face(&mesh, |_, lo, hi, h, _| {
            let h2 = h * h;
            let d = chi[hi] - chi[lo];
            let (sn, cs) = d.sin_cos();
            // From lo's side the phase jump is +d, from hi's side -d.
            for (k, nb, s) in [(lo, hi, sn), (hi, lo, -sn)] {
                t.push((k, k, 1.0 / h2));
                t.push((k, nb, -cs / h2));
                t.push((k, n + nb, s / h2));
                t.push((n + k, n + k, 1.0 / h2));
                t.push((n + k, nb, -s / h2));
                t.push((n + k, n + nb, -cs / h2));
            }
            // Linearized face flux Im(conj(u_lo) u_hi) / h.
            let flux = [
                (hi, rho[lo] * sn),
                (n + hi, rho[lo] * cs),
                (lo, rho[hi] * sn),
                (n + lo, -rho[hi] * cs),
            ];
            for (col, v) in flux {
                c.push((lo, col, v / h2));
                c.push((hi, col, -v / h2));
            }
        });
        for k in 0..n {
            let p2 = rho[k] * rho[k];
            t.push((k, k, -inv_eps2 * (1.0 - 3.0 * p2)));
            t.push((k, n + k, -phi[k]));
            t.push((n + k, k, phi[k]));
            t.push((n + k, n + k, -inv_eps2 * (1.0 - p2)));
        }
        Ok(LinearizedOperator {
            mesh,
            epsilon,
            sigma,
            rho_s: rho_s.clone(),
            chi_s: chi_s.clone(),
            phi_s: phi_s.clone(),
            local: CsrMatrix::from_triplets(2 * n, 2 * n, t),
            coupling: CsrMatrix::from_triplets(n, 2 * n, c),
            settings,
            dense: None,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.mesh.len()
    }

    /// `(0, rho_s)`: the constant-phase direction in `(a, b)` coordinates.
    pub fn gauge_vector(&self) -> Vec<f64> {
        let n = self.mesh.len();
        let mut g = vec![0.0; 2 * n];
        g[n..].copy_from_slice(&self.rho_s.values);
        g
    }

    /// Largest diagonal magnitude; used to scale kernel tolerances.
    pub fn scale(&self) -> f64 {
        self.local
            .diagonal()
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn constraint_offset(&self, a: &[f64]) -> f64 {
        let area = self.mesh.cell_area();
        (0..self.mesh.len())
            .map(|k| 2.0 * self.rho_s.values[k] * self.phi_s.values[k] * a[k])
            .sum::<f64>()
            * area
    }

    /// Potential perturbation for a stacked `(a, b)` vector.
    pub fn potential_ab(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.mesh.len();
        // A flux-form divergence integrates to zero; only rounding is removed.
        let mut rhs: Vec<f64> = self.coupling.mul_vec(x).into_iter().map(|v| -v).collect();
        remove_mean(&mut rhs);
        let op = laplacian_neumann(&self.mesh).matrix.scaled(-self.sigma);
        let weights: Vec<f64> = self.rho_s.values.iter().map(|r| r * r).collect();
        let offset = self.constraint_offset(&x[..n]);
        let (phi, report) = solve_singular_neumann(
            &op,
            &rhs,
            Constraint::WeightedAffine {
                weights: &weights,
                offset,
            },
            self.mesh.cell_area(),
            None,
            self.settings,
        )?;
        if !report.converged && norm(&rhs) > 0.0 {
            report.ensure_converged()?;
        }
        Ok(phi)
    }

    /// Action of `B` on a stacked `(a, b)` vector, matrix free.
    pub fn apply_ab(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.mesh.len();
        let mut y = self.local.mul_vec(x);
        let phi = self.potential_ab(x)?;
        for k in 0..n {
            y[n + k] += self.rho_s.values[k] * phi[k];
        }
        Ok(y)
    }

    fn to_ab(&self, rho: &ScalarField, chi: &ScalarField) -> Result<Vec<f64>> {
        if rho.mesh != self.mesh || chi.mesh != self.mesh {
            return Err(GlcError::GridMismatch);
        }
        let mut x = rho.values.clone();
        x.extend(
            chi.values
                .iter()
                .zip(&self.rho_s.values)
                .map(|(c, r)| c * r),
        );
        Ok(x)
    }

    pub fn nonlocal_potential(&self, rho: &ScalarField, chi: &ScalarField) -> Result<ScalarField> {
        let x = self.to_ab(rho, chi)?;
        ScalarField::new(self.mesh, self.potential_ab(&x)?)
    }

    /// `K (rho, chi)`: the density row and the current row weighted by `rho_s`.
    pub fn apply_b(
        &self,
        rho: &ScalarField,
        chi: &ScalarField,
    ) -> Result<(ScalarField, ScalarField)> {
        let n = self.mesh.len();
        let y = self.apply_ab(&self.to_ab(rho, chi)?)?;
        let out_chi: Vec<f64> = (0..n).map(|k| self.rho_s.values[k] * y[n + k]).collect();
        Ok((
            ScalarField::new(self.mesh, y[..n].to_vec())?,
            ScalarField::new(self.mesh, out_chi)?,
        ))
    }

    /// Local part plus the potential coupling, with the constraint appended as
    /// a bordered row: unknowns `(a, b, phi, g)`, size `3n + 1`.
    fn augmented(&self, shift: f64) -> CsrMatrix {
        let n = self.mesh.len();
        let mut t: Vec<(usize, usize, f64)> = self.local.triplets().collect();
        for k in 0..2 * n {
            t.push((k, k, -shift));
        }
        for k in 0..n {
            t.push((n + k, 2 * n + k, self.rho_s.values[k]));
        }
        let lap = laplacian_neumann(&self.mesh).matrix;
        t.extend(
            lap.triplets()
                .map(|(r, c, v)| (2 * n + r, 2 * n + c, -self.sigma * v)),
        );
        t.extend(self.coupling.triplets().map(|(r, c, v)| (2 * n + r, c, v)));
        for k in 0..n {
            let r = self.rho_s.values[k];
            t.push((2 * n + k, 3 * n, 1.0));
            t.push((3 * n, 2 * n + k, r * r));
            t.push((3 * n, k, 2.0 * r * self.phi_s.values[k]));
        }
        CsrMatrix::from_triplets(3 * n + 1, 3 * n + 1, t)
    }

    /// Dense `B`, assembled once through a factored potential solve.
    pub fn dense(&mut self) -> Result<&Mat<f64>> {
        if self.dense.is_none() {
            let n = self.mesh.len();
            if 2 * n > DENSE_CAP {
                return Err(GlcError::InvalidArgument(format!(
                    "dense operator refused for 2n = {} > {DENSE_CAP}",
                    2 * n
                )));
            }
            // Bordered potential system [-sigma lap, 1; w^T, 0].
            let lap = laplacian_neumann(&self.mesh).matrix;
            let mut t: Vec<(usize, usize, f64)> = lap
                .triplets()
                .map(|(r, c, v)| (r, c, -self.sigma * v))
                .collect();
            for k in 0..n {
                t.push((k, n, 1.0));
                t.push((n, k, self.rho_s.values[k].powi(2)));
            }
            let lu = SparseLu::new(&CsrMatrix::from_triplets(n + 1, n + 1, t))?;
            let mut rhs = Mat::<f64>::zeros(n + 1, 2 * n);
            for (r, c, v) in self.coupling.triplets() {
                rhs[(r, c)] = -v;
            }
            for k in 0..n {
                rhs[(n, k)] = -2.0 * self.rho_s.values[k] * self.phi_s.values[k];
            }
            let phi = lu.solve_columns(rhs);
            let mut m = Mat::<f64>::zeros(2 * n, 2 * n);
            for (r, c, v) in self.local.triplets() {
                m[(r, c)] += v;
            }
            for c in 0..2 * n {
                for k in 0..n {
                    m[(n + k, c)] += self.rho_s.values[k] * phi[(k, c)];
                }
            }
            self.dense = Some(m);
        }
        Ok(self.dense.as_ref().expect("assembled"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMode {
    Dense,
    Iterative,
    /// Dense when `2n <= DENSE_CAP`, iterative otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Stable iff the smallest non-gauge real part exceeds this.
    pub margin: f64,
    /// Shift of the shift-invert iteration; must avoid the spectrum.
    pub shift: f64,
    /// Bound on `||K w - lambda M w|| / ||M w||` for reported pairs.
    pub residual_tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            margin: 1e-6,
            shift: -1.0,
            residual_tol: 1e-6,
            max_restarts: 60,
            seed: 7,
        }
    }
}

/// One eigenpair with the eigenvector in `(rho, chi)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub lambda: [f64; 2],
    pub residual: f64,
    #[serde(skip)]
    pub rho: Vec<Complex64>,
    #[serde(skip)]
    pub chi: Vec<Complex64>,
}

impl Eigenpair {
    pub fn re(&self) -> f64 {
        self.lambda[0]
    }

    pub fn im(&self) -> f64 {
        self.lambda[1]
    }

    /// Discrete L2 norms of the density and phase parts.
    pub fn part_norms(&self) -> (f64, f64) {
        let r: f64 = self.rho.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let c: f64 = self.chi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        (r, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Non-gauge pairs ascending by real part.
    pub eigenpairs: Vec<Eigenpair>,
    /// Every non-gauge eigenvalue; only filled by the dense path.
    pub all_eigenvalues: Vec<[f64; 2]>,
    pub gauge_eigenvalue: [f64; 2],
    /// `|<g, x>| / (|g| |x|)` for the mode taken as the gauge mode.
    pub gauge_alignment: f64,
    pub min_re_nongauge: f64,
    pub verdict: Verdict,
    pub method: SpectrumMode,
    pub max_residual: f64,
}

fn cdot(a: &[f64], x: &[Complex64]) -> Complex64 {
    a.iter().zip(x).map(|(a, x)| *a * x).sum()
}

fn cnorm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn apply_complex(op: &LinearizedOperator, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let re: Vec<f64> = x.iter().map(|v| v.re).collect();
    let im: Vec<f64> = x.iter().map(|v| v.im).collect();
    let yr = op.apply_ab(&re)?;
    let yi = op.apply_ab(&im)?;
    Ok(yr
        .iter()
        .zip(&yi)
        .map(|(a, b)| Complex64::new(*a, *b))
        .collect())
}

/// `||P (B x - lambda x)|| / ||P x||`, the generalized residual in `(rho, chi)`.
fn pair_residual(
    op: &LinearizedOperator,
    bx: &[Complex64],
    x: &[Complex64],
    lambda: Complex64,
) -> f64 {
    let n = op.mesh.len();
    let weight = |k: usize| if k < n { 1.0 } else { op.rho_s.values[k - n] };
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..2 * n {
        let w = weight(k);
        num += (w * (bx[k] - lambda * x[k])).norm_sqr();
        den += (w * x[k]).norm_sqr();
    }
    (num / den).sqrt()
}

fn to_pair(
    op: &LinearizedOperator,
    lambda: Complex64,
    x: &[Complex64],
    residual: f64,
) -> Eigenpair {
    let n = op.mesh.len();
    let scale = cnorm(x);
    let rho: Vec<Complex64> = x[..n].iter().map(|v| v / scale).collect();
    let chi: Vec<Complex64> = (0..n)
        .map(|k| x[n + k] / (scale * op.rho_s.values[k]))
        .collect();
    Eigenpair {
        lambda: [lambda.re, lambda.im],
        residual,
        rho,
        chi,
    }
}

fn by_real_part(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn verdict(min_re: f64, margin: f64) -> Verdict {
    if min_re > margin {
        Verdict::Stable
    } else if min_re < -margin {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    }
}

/// The `k` lowest non-gauge eigenpairs of the linearized operator.
pub fn spectrum(
    op: &mut LinearizedOperator,
    k: usize,
    mode: SpectrumMode,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    if k == 0 {
        return Err(GlcError::InvalidArgument(
            "at least one eigenpair must be requested".into(),
        ));
    }
    let within_cap = op.dim() <= DENSE_CAP;
    match mode {
        SpectrumMode::Dense => dense_spectrum(op, k, opts),
        SpectrumMode::Auto if within_cap => dense_spectrum(op, k, opts),
        _ => match iterative_spectrum(op, k, opts) {
            Ok(r) => Ok(r),
            Err(_) if within_cap => dense_spectrum(op, k, opts),
            Err(e) => Err(e),
        },
    }
}

fn dense_spectrum(
    op: &mut LinearizedOperator,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let dim = op.dim();
    let g = op.gauge_vector();
    let gnorm = norm(&g);
    let m = op.dense()?.clone();
    let evd = m
        .eigen()
        .map_err(|e| GlcError::EigenFailure(format!("dense eigensolve failed: {e:?}")))?;
    let values = evd.S().column_vector();
    let vectors = evd.U();
    let column = |j: usize| -> Vec<Complex64> { (0..dim).map(|i| vectors[(i, j)]).collect() };
    let mut gauge = 0;
    let mut best = -1.0;
    for j in 0..dim {
        let x = column(j);
        let align = cdot(&g, &x).norm() / (gnorm * cnorm(&x));
        if align > best {
            best = align;
            gauge = j;
        }
    }
    let mut order: Vec<usize> = (0..dim).filter(|j| *j != gauge).collect();
    order.sort_by(|a, b| by_real_part(&values[*a], &values[*b]));
    let mut pairs = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let x = column(j);
        let bx: Vec<Complex64> = (0..dim)
            .map(|r| (0..dim).map(|c| m[(r, c)] * x[c]).sum::<Complex64>())
            .collect();
        let res = pair_residual(op, &bx, &x, values[j]);
        pairs.push(to_pair(op, values[j], &x, res));
    }
    finish(
        op,
        pairs,
        order
            .iter()
            .map(|j| [values[*j].re, values[*j].im])
            .collect(),
        values[gauge],
        best,
        SpectrumMode::Dense,
        opts,
    )
}

fn finish(
    _op: &LinearizedOperator,
    pairs: Vec<Eigenpair>,
    all: Vec<[f64; 2]>,
    gauge: Complex64,
    alignment: f64,
    method: SpectrumMode,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let max_residual = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    if !(max_residual <= opts.residual_tol) {
        return Err(GlcError::EigenFailure(format!(
            "eigenpair residual {max_residual:.3e} exceeds {:.1e}",
            opts.residual_tol
        )));
    }
    let min_re = pairs.first().map_or(f64::INFINITY, |p| p.re());
    Ok(SpectrumReport {
        verdict: verdict(min_re, opts.margin),
        min_re_nongauge: min_re,
        eigenpairs: pairs,
        all_eigenvalues: all,
        gauge_eigenvalue: [gauge.re, gauge.im],
        gauge_alignment: alignment,
        method,
        max_residual,
    })
}

/// Shift-invert Arnoldi with explicit restarts. The gauge vector is projected
/// out of every basis vector; eigenvectors of the full operator are recovered
/// by adding back the gauge component.
fn iterative_spectrum(
    op: &LinearizedOperator,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let dim = op.dim();
    if k + 6 >= dim {
        return Err(GlcError::InvalidArgument(format!(
            "{k} eigenpairs requested from a {dim}-dimensional problem"
        )));
    }
    let tau = opts.shift;
    let lu = SparseLu::new(&op.augmented(tau))?;
    let n = op.mesh.len();
    let solve = |y: &[f64]| -> Vec<f64> {
        let mut rhs = y.to_vec();
        rhs.resize(3 * n + 1, 0.0);
        let mut x = lu.solve(&rhs);
        x.truncate(2 * n);
        x
    };
    let g = op.gauge_vector();
    let gg = dot(&g, &g);
    let deflate = |x: &mut [f64]| {
        let c = dot(&g, x) / gg;
        x.iter_mut().zip(&g).for_each(|(v, gv)| *v -= c * gv);
    };
    let basis_size = (2 * k + 20).max(40).min(dim - 2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut wanted: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_restarts.max(1) {
        deflate(&mut start);
        let s = norm(&start);
        let mut basis = vec![start.iter().map(|v| v / s).collect::<Vec<f64>>()];
        let mut h = vec![vec![0.0; basis_size]; basis_size + 1];
        let mut m = basis_size;
        for j in 0..basis_size {
            let mut w = solve(&basis[j]);
            deflate(&mut w);
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[i][j] += c;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let beta = norm(&w);
            h[j + 1][j] = beta;
            if beta <= 1e-14 * h[j][j].abs().max(1.0) {
                m = j + 1;
                break;
            }
            basis.push(w.into_iter().map(|v| v / beta).collect());
        }
        let hm = Mat::<f64>::from_fn(m, m, |i, j| h[i][j]);
        let evd = hm
            .eigen()
            .map_err(|e| GlcError::EigenFailure(format!("Ritz eigensolve failed: {e:?}")))?;
        let theta = evd.S().column_vector();
        let s_vecs = evd.U();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|a, b| theta[*b].norm().total_cmp(&theta[*a].norm()));
        let beta = if m < h.len() { h[m][m - 1] } else { 0.0 };
        let take = k.min(m);
        converged = order.iter().take(take).all(|&i| {
            let est = beta * s_vecs[(m - 1, i)].norm();
            est <= 1e-10 * theta[i].norm()
        });
        wanted = order
            .iter()
            .take(take)
            .map(|&i| {
                let y: Vec<Complex64> = (0..dim)
                    .map(|r| {
                        (0..m)
                            .map(|c| basis[c][r] * s_vecs[(c, i)])
                            .sum::<Complex64>()
                    })
                    .collect();
                (theta[i], y)
            })
            .collect();
        if converged {
            break;
        }
        start = vec![0.0; dim];
        for (_, y) in &wanted {
            let sc = cnorm(y);
            start
                .iter_mut()
                .zip(y)
                .for_each(|(s, v)| *s += (v.re + v.im) / sc);
        }
    }
    if !converged {
        return Err(GlcError::EigenFailure(
            "shift-invert iteration did not converge".into(),
        ));
    }
    // Gauge eigenvalue by Rayleigh quotient; g is nearly a right eigenvector.
    let bg = op.apply_ab(&g)?;
    let gauge = dot(&g, &bg) / gg;
    let theta0 = 1.0 / (gauge - tau);
    let mut pairs = Vec::with_capacity(k);
    for (theta, y) in wanted {
        let yr: Vec<f64> = y.iter().map(|v| v.re).collect();
        let yi: Vec<f64> = y.iter().map(|v| v.im).collect();
        let ty_r = solve(&yr);
        let ty_i = solve(&yi);
        let c = Complex64::new(dot(&g, &ty_r), dot(&g, &ty_i)) / gg;
        let alpha = c / (theta - theta0);
        let x: Vec<Complex64> = y.iter().zip(&g).map(|(v, gv)| v + alpha * gv).collect();
        let lambda = tau + 1.0 / theta;
        let bx = apply_complex(op, &x)?;
        let res = pair_residual(op, &bx, &x, lambda);
        pairs.push(to_pair(op, lambda, &x, res));
    }
    pairs.sort_by(|a, b| {
        by_real_part(
            &Complex64::new(a.re(), a.im()),
            &Complex64::new(b.re(), b.im()),
        )
    });
    finish(
        op,
        pairs,
        Vec::new(),
        Complex64::new(gauge, 0.0),
        1.0,
        SpectrumMode::Iterative,
        opts,
    )
}

/// Random probe vector with a fixed seed, for consistency checks.
pub fn probe(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
