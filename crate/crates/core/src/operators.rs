//! Finite-volume operators on the staggered cell/face layout.
//!
//! Scalars live at cell centers, gradients on faces. Boundary faces always
//! carry zero flux; inhomogeneous Neumann data enters through
//! [`boundary_flux_source`].

use num_complex::Complex64;

use crate::error::{GlcError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{CurrentProfile, Grid, Mesh};
use crate::sparse::CsrMatrix;

/// Face-centered values. `x[j*(nx+1) + i]` sits on the face left of cell
/// `(i, j)`; `y[j*nx + i]` on the face below it.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub mesh: Mesh,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(mesh: Mesh) -> Self {
        VectorField {
            mesh,
            x: vec![0.0; mesh.x_faces()],
            y: vec![0.0; mesh.y_faces()],
        }
    }

    /// Multiplies face by face.
    pub fn weighted(&self, w: &FaceWeights) -> VectorField {
        VectorField {
            mesh: self.mesh,
            x: self.x.iter().zip(&w.x).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&w.y).map(|(a, b)| a * b).collect(),
        }
    }
}

/// Per-face coefficients with the same layout as [`VectorField`]. Boundary
/// entries are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceWeights {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceWeights {
    pub fn ones(mesh: &Mesh) -> Self {
        FaceWeights {
            x: vec![1.0; mesh.x_faces()],
            y: vec![1.0; mesh.y_faces()],
        }
    }

    /// Builds weights from a function of the two adjacent cells `(lower, upper)`.
    pub fn from_cells(mesh: &Mesh, f: impl Fn(usize, usize) -> f64) -> Self {
        let (nx, ny) = (mesh.nx, mesh.ny);
        let mut w = FaceWeights {
            x: vec![0.0; mesh.x_faces()],
            y: vec![0.0; mesh.y_faces()],
        };
        for j in 0..ny {
            for i in 1..nx {
                w.x[j * (nx + 1) + i] = f(mesh.index(i - 1, j), mesh.index(i, j));
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                w.y[j * nx + i] = f(mesh.index(i, j - 1), mesh.index(i, j));
            }
        }
        w
    }
}

/// Calls `f(face_index_in_axis, lower_cell, upper_cell, h, is_x)` on every
/// interior face, x-faces first.
pub(crate) fn for_each_interior_face(
    mesh: &Mesh,
    mut f: impl FnMut(usize, usize, usize, f64, bool),
) {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let (hx, hy) = (mesh.hx(), mesh.hy());
    for j in 0..ny {
        for i in 1..nx {
            f(
                j * (nx + 1) + i,
                mesh.index(i - 1, j),
                mesh.index(i, j),
                hx,
                true,
            );
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            f(
                j * nx + i,
                mesh.index(i, j - 1),
                mesh.index(i, j),
                hy,
                false,
            );
        }
    }
}

/// Centered face differences; boundary faces are zero.
pub fn gradient(f: &ScalarField) -> VectorField {
    let mesh = f.mesh;
    let mut g = VectorField::zeros(mesh);
    let v = &f.values;
    for_each_interior_face(&mesh, |face, lo, hi, h, is_x| {
        let d = (v[hi] - v[lo]) / h;
        if is_x {
            g.x[face] = d;
        } else {
            g.y[face] = d;
        }
    });
    g
}

/// Flux differences over each cell, using every stored face value.
pub fn divergence(v: &VectorField) -> ScalarField {
    let mesh = v.mesh;
    let (nx, ny) = (mesh.nx, mesh.ny);
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let mut out = vec![0.0; mesh.len()];
    for j in 0..ny {
        for i in 0..nx {
            let fx = j * (nx + 1) + i;
            let fy = j * nx + i;
            out[mesh.index(i, j)] = (v.x[fx + 1] - v.x[fx]) / hx + (v.y[fy + nx] - v.y[fy]) / hy;
        }
    }
    ScalarField { mesh, values: out }
}

/// Assembled sparse operator that remembers the flux stencil it came from.
///
/// `apply` evaluates `divergence(weights * gradient(f))` when a stencil is
/// present, so the identity `divergence(gradient(f)) == laplacian * f` holds
/// bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub matrix: CsrMatrix,
    pub symmetric: bool,
    stencil: Option<(Mesh, FaceWeights)>,
}

impl SparseOperator {
    pub fn from_matrix(matrix: CsrMatrix) -> Self {
        let symmetric = matrix.is_symmetric();
        SparseOperator {
            matrix,
            symmetric,
            stencil: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        match &self.stencil {
            Some((mesh, w)) if *mesh == f.mesh => divergence(&gradient(f).weighted(w)),
            _ => ScalarField {
                mesh: f.mesh,
                values: self.matrix.mul_vec(&f.values),
            },
        }
    }

    /// Sorted `(row, col, value)` entries.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.matrix.triplets().collect()
    }

    pub fn to_triplet_text(&self) -> String {
        self.matrix.to_triplet_text()
    }
}

/// `Div(w grad .)` with the given face weights and zero-flux closure.
pub fn div_weighted_grad(mesh: &Mesh, w: &FaceWeights) -> SparseOperator {
    let mut t = Vec::with_capacity(5 * mesh.len());
    for_each_interior_face(mesh, |face, lo, hi, h, is_x| {
        let c = if is_x { w.x[face] } else { w.y[face] } / (h * h);
        t.push((lo, lo, -c));
        t.push((lo, hi, c));
        t.push((hi, hi, -c));
        t.push((hi, lo, c));
    });
    let matrix = CsrMatrix::from_triplets(mesh.len(), mesh.len(), t);
    let symmetric = matrix.is_symmetric();
    SparseOperator {
        matrix,
        symmetric,
        stencil: Some((*mesh, w.clone())),
    }
}

/// Five-point Neumann Laplacian (negative semidefinite, rows sum to zero).
pub fn laplacian_neumann(mesh: &Mesh) -> SparseOperator {
    div_weighted_grad(mesh, &FaceWeights::ones(mesh))
}

/// Harmonic mean of two positive numbers.
#[inline]
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// `Div(a grad .)` with harmonic-mean face weights.
pub fn weighted_div_grad(mesh: &Mesh, a: &ScalarField) -> Result<SparseOperator> {
    if a.mesh != *mesh {
        return Err(GlcError::GridMismatch);
    }
    if let Some((k, v)) = a.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(GlcError::InvalidArgument(format!(
            "weight {v} at cell {k} is not positive"
        )));
    }
    let w = FaceWeights::from_cells(mesh, |lo, hi| harmonic_mean(a.values[lo], a.values[hi]));
    Ok(div_weighted_grad(mesh, &w))
}

/// Cell source for the Neumann datum `-sigma dphi/dnu = J`: each contact face
/// adds `J * length / (sigma * cell_area)` to its cell. With this source the
/// discrete potential equation reads `sigma * lap(phi) = div(flux) + sigma * s`.
pub fn boundary_flux_source(grid: &Grid, profile: &CurrentProfile, sigma: f64) -> ScalarField {
    let mesh = grid.mesh;
    let area = mesh.cell_area();
    let mut s = vec![0.0; mesh.len()];
    for (face, j) in grid.faces.iter().zip(&profile.values) {
        if *j != 0.0 {
            s[face.cell] += j * face.length / (sigma * area);
        }
    }
    ScalarField { mesh, values: s }
}

/// Face flux `Im(conj(u) grad u)` with `conj(u)` averaged to the face.
pub fn supercurrent_flux(u: &ComplexField) -> VectorField {
    let mesh = u.mesh;
    let mut g = VectorField::zeros(mesh);
    let v = &u.values;
    for_each_interior_face(&mesh, |face, lo, hi, h, is_x| {
        let ubar = (v[lo].conj() + v[hi].conj()) * 0.5;
        let flux = (ubar * (v[hi] - v[lo]) / h).im;
        if is_x {
            g.x[face] = flux;
        } else {
            g.y[face] = flux;
        }
    });
    g
}

/// `div Im(conj(u) grad u)` with zero normal flux.
pub fn supercurrent_divergence(u: &ComplexField) -> ScalarField {
    divergence(&supercurrent_flux(u))
}

/// Complex Neumann Laplacian applied componentwise.
pub fn laplacian_complex(u: &ComplexField) -> ComplexField {
    let lap_re = divergence(&gradient(&u.re()));
    let lap_im = divergence(&gradient(&u.im()));
    let values = lap_re
        .values
        .iter()
        .zip(&lap_im.values)
        .map(|(a, b)| Complex64::new(*a, *b))
        .collect();
    ComplexField {
        mesh: u.mesh,
        values,
    }
}

/// Cell average of `grad a . grad b`: per axis, the mean of the two adjacent
/// face products, summed over axes. Boundary faces contribute zero.
pub fn cell_gradient_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let ga = gradient(a);
    let gb = gradient(b);
    face_to_cell_mean(&a.mesh, |face, is_x| {
        if is_x {
            ga.x[face] * gb.x[face]
        } else {
            ga.y[face] * gb.y[face]
        }
    })
}

/// Per axis mean of a face quantity over the two faces of each cell, summed
/// over the two axes.
pub(crate) fn face_to_cell_mean(mesh: &Mesh, q: impl Fn(usize, bool) -> f64) -> ScalarField {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let mut out = vec![0.0; mesh.len()];
    for j in 0..ny {
        for i in 0..nx {
            let fx = j * (nx + 1) + i;
            let fy = j * nx + i;
            out[mesh.index(i, j)] =
                0.5 * (q(fx, true) + q(fx + 1, true)) + 0.5 * (q(fy, false) + q(fy + nx, false));
        }
    }
    ScalarField {
        mesh: *mesh,
        values: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_current_profile, ContactSegment, Edge, ProfileShape};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rect(nx: usize, ny: usize) -> Mesh {
        Mesh::new(nx, ny, 1.3, 0.9).unwrap()
    }

    #[test]
    fn two_by_two_hand_assembly() {
        // Each cell of a 2x2 mesh with h = 1 has two neighbours.
        let m = Mesh::new_unchecked(2, 2, 2.0, 2.0);
        let lap = laplacian_neumann(&m);
        let d = lap.matrix.to_dense();
        let expected = [
            [-2.0, 1.0, 1.0, 0.0],
            [1.0, -2.0, 0.0, 1.0],
            [1.0, 0.0, -2.0, 1.0],
            [0.0, 1.0, 1.0, -2.0],
        ];
        for r in 0..4 {
            assert_eq!(d[r], expected[r]);
            assert_eq!(d[r].iter().sum::<f64>(), 0.0);
        }
        assert!(lap.symmetric);
    }

    #[test]
    fn laplacian_kills_constants_exactly() {
        let m = rect(7, 5);
        let c = ScalarField::constant(m, 3.7);
        assert!(laplacian_neumann(&m)
            .apply(&c)
            .values
            .iter()
            .all(|v| *v == 0.0));
        assert!(laplacian_neumann(&m)
            .matrix
            .mul_vec(&c.values)
            .iter()
            .all(|v| v.abs() < 1e-12));
        let g = gradient(&c);
        assert!(g.x.iter().chain(&g.y).all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_of_linear_function_is_exact() {
        let m = Mesh::new(8, 4, 2.0, 1.0).unwrap();
        let g = gradient(&ScalarField::from_fn(m, |x, _| x));
        for j in 0..4 {
            for i in 1..8 {
                assert!((g.x[j * 9 + i] - 1.0).abs() < 1e-13);
            }
            assert_eq!(g.x[j * 9], 0.0);
            assert_eq!(g.x[j * 9 + 8], 0.0);
        }
        assert!(g.y.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn weighted_reduces_to_laplacian_and_scales() {
        let m = rect(6, 9);
        let lap = laplacian_neumann(&m);
        let w1 = weighted_div_grad(&m, &ScalarField::constant(m, 1.0)).unwrap();
        let w2 = weighted_div_grad(&m, &ScalarField::constant(m, 2.0)).unwrap();
        assert_eq!(w1.triplets(), lap.triplets());
        for (a, b) in w2.triplets().iter().zip(lap.triplets()) {
            assert_eq!(a.2, 2.0 * b.2);
        }
    }

    #[test]
    fn weighted_rejects_nonpositive() {
        let m = rect(4, 4);
        let mut a = ScalarField::constant(m, 1.0);
        a.values[5] = 0.0;
        assert!(weighted_div_grad(&m, &a).is_err());
    }

    #[test]
    fn flux_source_single_face() {
        let m = Mesh::new(4, 4, 1.0, 1.0).unwrap();
        let h = 0.25;
        let g = Grid::new(
            m,
            &[
                ContactSegment::new(Edge::Left, 0.0, h, 1.0),
                ContactSegment::new(Edge::Right, 0.0, h, -1.0),
            ],
        )
        .unwrap();
        let p = build_current_profile(&g, 1.0, ProfileShape::Uniform).unwrap();
        let s = boundary_flux_source(&g, &p, 1.0);
        assert!((s.values[0] - 1.0 / h).abs() < 1e-12);
        assert!((s.values[3] + 1.0 / h).abs() < 1e-12);
        assert!(s.integral().abs() < 1e-14);
        let z = boundary_flux_source(&g, &CurrentProfile::zero(&g), 1.0);
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn supercurrent_vanishes_for_real_and_constant_phase() {
        let m = rect(8, 6);
        let rho = ScalarField::from_fn(m, |x, y| 1.0 + 0.3 * x * y);
        let real = ComplexField::join(&rho, &ScalarField::zeros(m)).unwrap();
        assert!(supercurrent_divergence(&real)
            .values
            .iter()
            .all(|v| *v == 0.0));
        let phase = ComplexField::join(
            &ScalarField::constant(m, 1.0),
            &ScalarField::constant(m, 0.7),
        )
        .unwrap();
        assert!(supercurrent_divergence(&phase).max_abs() < 1e-12);
    }

    #[test]
    fn cell_gradient_product_of_linear_function() {
        let m = Mesh::new(6, 6, 1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(m, |x, _| 2.0 * x);
        let g = cell_gradient_product(&f, &f);
        // Interior cells see two faces of slope 2; edge cells see one zero face.
        assert!((g.values[m.index(3, 3)] - 4.0).abs() < 1e-12);
        assert!((g.values[m.index(0, 3)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_laplacian_is_second_order() {
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let m = Mesh::new(n, n, 2.0, 1.0).unwrap();
            let k = PI / 2.0;
            let f = ScalarField::from_fn(m, |x, _| (k * x).cos());
            let r = laplacian_neumann(&m).apply(&f);
            errs.push(
                r.values
                    .iter()
                    .zip(&f.values)
                    .map(|(a, b)| (a + k * k * b).abs())
                    .fold(0.0, f64::max),
            );
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    proptest! {
        #[test]
        fn div_grad_is_bitwise_laplacian(vals in proptest::collection::vec(-10f64..10.0, 42)) {
            let m = rect(7, 6);
            let f = ScalarField::new(m, vals).unwrap();
            let a = divergence(&gradient(&f));
            let b = laplacian_neumann(&m).apply(&f);
            prop_assert_eq!(&a.values, &b.values);
            let c = laplacian_neumann(&m).matrix.mul_vec(&f.values);
            for (x, y) in a.values.iter().zip(&c) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn weighted_operator_is_symmetric_nsd(a in proptest::collection::vec(0.1f64..5.0, 30),
                                              x in proptest::collection::vec(-1f64..1.0, 30)) {
            let m = Mesh::new(6, 5, 1.0, 1.0).unwrap();
            let op = weighted_div_grad(&m, &ScalarField::new(m, a).unwrap()).unwrap();
            prop_assert!(op.symmetric);
            for (r, c, v) in op.matrix.triplets() {
                prop_assert_eq!(op.matrix.get(c, r), v);
            }
            let ax = op.matrix.mul_vec(&x);
            let q: f64 = ax.iter().zip(&x).map(|(p, q)| p * q).sum();
            prop_assert!(q <= 1e-12);
            let ones = op.apply(&ScalarField::constant(m, 1.0));
            prop_assert!(ones.values.iter().all(|v| *v == 0.0));
        }

        #[test]
        fn supercurrent_integrates_to_zero(re in proptest::collection::vec(-1f64..1.0, 36),
                                           im in proptest::collection::vec(-1f64..1.0, 36)) {
            let m = Mesh::new(6, 6, 1.0, 1.0).unwrap();
            let u = ComplexField::new(m, re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
            let d = supercurrent_divergence(&u);
            let scale: f64 = d.values.iter().map(|v| v.abs()).sum::<f64>() * m.cell_area();
            prop_assert!(d.integral().abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}
