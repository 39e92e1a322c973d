//! Cell-indexed real and complex fields.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};
use crate::grid::Mesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub mesh: Mesh,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

impl ScalarField {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(GlcError::InvalidArgument(format!(
                "field has {} values for {} cells",
                values.len(),
                mesh.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GlcError::InvalidArgument(
                "field contains non-finite values".into(),
            ));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        ScalarField {
            mesh,
            values: vec![0.0; mesh.len()],
        }
    }

    pub fn constant(mesh: Mesh, c: f64) -> Self {
        ScalarField {
            mesh,
            values: vec![c; mesh.len()],
        }
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(mesh: Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..mesh.len())
            .map(|k| {
                let (x, y) = mesh.center(k);
                f(x, y)
            })
            .collect();
        ScalarField { mesh, values }
    }

    pub fn combine(&self, other: &ScalarField, op: BinaryOp) -> Result<ScalarField> {
        if self.mesh != other.mesh {
            return Err(GlcError::GridMismatch);
        }
        let f = match op {
            BinaryOp::Add => |a: f64, b: f64| a + b,
            BinaryOp::Sub => |a: f64, b: f64| a - b,
            BinaryOp::Mul => |a: f64, b: f64| a * b,
        };
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(ScalarField {
            mesh: self.mesh,
            values,
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, BinaryOp::Add)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, BinaryOp::Sub)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.combine(other, BinaryOp::Mul)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            mesh: self.mesh,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Area-weighted integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.mesh.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = self.mesh.center(k);
            let _ = writeln!(out, "{x},{y},{v}");
        }
        out
    }

    /// Row-major little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(mesh: Mesh, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 8 * mesh.len() {
            return Err(GlcError::InvalidArgument(format!(
                "expected {} bytes, got {}",
                8 * mesh.len(),
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        ScalarField::new(mesh, values)
    }
}

impl ComplexField {
    pub fn new(mesh: Mesh, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(GlcError::InvalidArgument(format!(
                "field has {} values for {} cells",
                values.len(),
                mesh.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GlcError::InvalidArgument(
                "field contains non-finite values".into(),
            ));
        }
        Ok(ComplexField { mesh, values })
    }

    /// `rho * exp(i chi)` cell by cell.
    pub fn join(rho: &ScalarField, chi: &ScalarField) -> Result<Self> {
        if rho.mesh != chi.mesh {
            return Err(GlcError::GridMismatch);
        }
        let values = rho
            .values
            .iter()
            .zip(&chi.values)
            .map(|(r, c)| Complex64::from_polar(*r, *c))
            .collect();
        Ok(ComplexField {
            mesh: rho.mesh,
            values,
        })
    }

    /// Modulus and argument, the argument in (-pi, pi].
    pub fn split(&self) -> (ScalarField, ScalarField) {
        let rho = self.values.iter().map(|u| u.norm()).collect();
        let chi = self.values.iter().map(|u| u.arg()).collect();
        (
            ScalarField {
                mesh: self.mesh,
                values: rho,
            },
            ScalarField {
                mesh: self.mesh,
                values: chi,
            },
        )
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.mesh != other.mesh {
            return Err(GlcError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexField {
            mesh: self.mesh,
            values,
        })
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.mesh != other.mesh {
            return Err(GlcError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ComplexField {
            mesh: self.mesh,
            values,
        })
    }

    pub fn scale(&self, s: Complex64) -> ComplexField {
        ComplexField {
            mesh: self.mesh,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            mesh: self.mesh,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            mesh: self.mesh,
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,re,im\n");
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = self.mesh.center(k);
            let _ = writeln!(out, "{x},{y},{},{}", v.re, v.im);
        }
        out
    }

    /// Interleaved (re, im) pairs, row-major little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values
            .iter()
            .flat_map(|v| [v.re.to_le_bytes(), v.im.to_le_bytes()].concat())
            .collect()
    }

    pub fn from_bytes(mesh: Mesh, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 16 * mesh.len() {
            return Err(GlcError::InvalidArgument(format!(
                "expected {} bytes, got {}",
                16 * mesh.len(),
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        ComplexField::new(mesh, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn mesh() -> Mesh {
        Mesh::new(6, 5, 1.5, 1.0).unwrap()
    }

    #[test]
    fn join_identity_and_direct_values() {
        let m = mesh();
        let u = ComplexField::join(&ScalarField::constant(m, 1.0), &ScalarField::zeros(m)).unwrap();
        assert!(u.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let u = ComplexField::join(
            &ScalarField::constant(m, 0.9),
            &ScalarField::constant(m, FRAC_PI_2),
        )
        .unwrap();
        assert!(u
            .values
            .iter()
            .all(|v| (v - Complex64::new(0.0, 0.9)).norm() < 1e-15));
    }

    #[test]
    fn mismatched_meshes_rejected() {
        let a = ScalarField::zeros(mesh());
        let b = ScalarField::zeros(Mesh::new(5, 5, 1.0, 1.0).unwrap());
        assert_eq!(a.add(&b), Err(GlcError::GridMismatch));
        assert!(ComplexField::join(&a, &b).is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        let m = mesh();
        let mut v = vec![0.0; m.len()];
        v[3] = f64::NAN;
        assert!(ScalarField::new(m, v).is_err());
        assert!(ScalarField::new(m, vec![0.0; 2]).is_err());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let m = mesh();
        let f = ScalarField::from_fn(m, |x, y| (x * 3.1).sin() + y.exp());
        assert_eq!(ScalarField::from_bytes(m, &f.to_bytes()).unwrap(), f);
        let u = ComplexField::join(&f, &f.scale(0.3)).unwrap();
        assert_eq!(ComplexField::from_bytes(m, &u.to_bytes()).unwrap(), u);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let f = ScalarField::constant(mesh(), 2.0);
        let csv = f.to_csv();
        assert_eq!(csv.lines().count(), 1 + 30);
        assert!(csv.starts_with("x,y,value\n0.125,0.1,2\n"));
    }

    proptest! {
        #[test]
        fn split_inverts_join(rho in proptest::collection::vec(1e-3f64..10.0, 30),
                              chi in proptest::collection::vec(-3.14f64..3.14, 30)) {
            let m = mesh();
            let r = ScalarField::new(m, rho).unwrap();
            let c = ScalarField::new(m, chi).unwrap();
            let (r2, c2) = ComplexField::join(&r, &c).unwrap().split();
            for k in 0..m.len() {
                prop_assert!((r2.values[k] - r.values[k]).abs() <= 4.0 * f64::EPSILON * r.values[k]);
                prop_assert!((c2.values[k] - c.values[k]).abs() <= 1e-14);
            }
        }

        #[test]
        fn algebra_is_pointwise(a in proptest::collection::vec(-5f64..5.0, 30),
                                b in proptest::collection::vec(-5f64..5.0, 30)) {
            let m = mesh();
            let fa = ScalarField::new(m, a.clone()).unwrap();
            let fb = ScalarField::new(m, b.clone()).unwrap();
            let s = fa.add(&fb).unwrap();
            let d = fa.sub(&fb).unwrap();
            let p = fa.mul(&fb).unwrap();
            for k in 0..30 {
                prop_assert_eq!(s.values[k], a[k] + b[k]);
                prop_assert_eq!(d.values[k], a[k] - b[k]);
                prop_assert_eq!(p.values[k], a[k] * b[k]);
            }
        }
    }
}
