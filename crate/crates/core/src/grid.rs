//! Rectangular cell-centered meshes, boundary segmentation and the applied
//! current profile.

use serde::{Deserialize, Serialize};

use crate::error::{GlcError, Result};

/// Geometry of a uniform cell-centered mesh. Cell `(i, j)` has index `j*nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(GlcError::InvalidGrid(format!(
                "need at least 4 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GlcError::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Mesh { nx, ny, lx, ly })
    }

    /// Skips the minimum-size check; hand-assembled stencil tests use 2x2 meshes.
    #[doc(hidden)]
    pub fn new_unchecked(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        Mesh { nx, ny, lx, ly }
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell center of cell `k`.
    pub fn center(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Count of x-normal faces, `(nx+1)*ny`, indexed `j*(nx+1) + i`.
    pub fn x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    /// Count of y-normal faces, `nx*(ny+1)`, indexed `j*nx + i`.
    pub fn y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];

    pub fn length(self, mesh: &Mesh) -> f64 {
        match self {
            Edge::Bottom | Edge::Top => mesh.lx,
            Edge::Left | Edge::Right => mesh.ly,
        }
    }
}

/// A contact interval on one edge. `start`/`end` are measured along the edge
/// coordinate (x for bottom/top, y for left/right). Positive polarity injects
/// current, negative extracts it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSegment {
    pub edge: Edge,
    pub start: f64,
    pub end: f64,
    #[serde(default = "default_polarity")]
    pub polarity: f64,
}

fn default_polarity() -> f64 {
    1.0
}

impl ContactSegment {
    pub fn new(edge: Edge, start: f64, end: f64, polarity: f64) -> Self {
        ContactSegment {
            edge,
            start,
            end,
            polarity,
        }
    }

    /// The whole edge.
    pub fn full(edge: Edge, mesh: &Mesh, polarity: f64) -> Self {
        ContactSegment {
            edge,
            start: 0.0,
            end: edge.length(mesh),
            polarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceTag {
    Contact { segment: usize },
    Insulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub edge: Edge,
    /// Position along the edge, 0-based in increasing edge coordinate.
    pub along: usize,
    /// Adjacent interior cell.
    pub cell: usize,
    pub length: f64,
    /// Edge coordinate of the face midpoint.
    pub coord: f64,
    pub tag: FaceTag,
}

/// Mesh plus tagged boundary faces.
///
/// Faces are enumerated edge by edge (bottom, right, top, left), each edge in
/// increasing edge coordinate, so neighbours along an edge are adjacent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub mesh: Mesh,
    pub faces: Vec<BoundaryFace>,
    pub contacts: Vec<ContactSegment>,
}

const COORD_TOL: f64 = 1e-12;

pub fn build_grid(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    contacts: &[ContactSegment],
) -> Result<Grid> {
    let mesh = Mesh::new(nx, ny, lx, ly)?;
    Grid::new(mesh, contacts)
}

impl Grid {
    pub fn new(mesh: Mesh, contacts: &[ContactSegment]) -> Result<Self> {
        validate_contacts(&mesh, contacts)?;
        let mut faces = Vec::with_capacity(2 * (mesh.nx + mesh.ny));
        for edge in Edge::ALL {
            let (count, h) = match edge {
                Edge::Bottom | Edge::Top => (mesh.nx, mesh.hx()),
                Edge::Left | Edge::Right => (mesh.ny, mesh.hy()),
            };
            for along in 0..count {
                let cell = match edge {
                    Edge::Bottom => mesh.index(along, 0),
                    Edge::Top => mesh.index(along, mesh.ny - 1),
                    Edge::Left => mesh.index(0, along),
                    Edge::Right => mesh.index(mesh.nx - 1, along),
                };
                let coord = (along as f64 + 0.5) * h;
                let tag = contacts
                    .iter()
                    .position(|c| {
                        c.edge == edge && coord >= c.start - COORD_TOL && coord <= c.end + COORD_TOL
                    })
                    .map_or(FaceTag::Insulated, |segment| FaceTag::Contact { segment });
                faces.push(BoundaryFace {
                    edge,
                    along,
                    cell,
                    length: h,
                    coord,
                    tag,
                });
            }
        }
        Ok(Grid {
            mesh,
            faces,
            contacts: contacts.to_vec(),
        })
    }

    pub fn contact_face_count(&self) -> usize {
        self.faces
            .iter()
            .filter(|f| f.tag != FaceTag::Insulated)
            .count()
    }

    pub fn insulated_face_count(&self) -> usize {
        self.faces.len() - self.contact_face_count()
    }
}

fn validate_contacts(mesh: &Mesh, contacts: &[ContactSegment]) -> Result<()> {
    for (n, c) in contacts.iter().enumerate() {
        let len = c.edge.length(mesh);
        if !(c.start.is_finite() && c.end.is_finite()) || c.start >= c.end {
            return Err(GlcError::InvalidContacts(format!(
                "contact {n}: interval [{}, {}] is empty",
                c.start, c.end
            )));
        }
        if c.start < -COORD_TOL || c.end > len + COORD_TOL {
            return Err(GlcError::InvalidContacts(format!(
                "contact {n}: interval [{}, {}] leaves edge of length {len}",
                c.start, c.end
            )));
        }
        if !(c.polarity.is_finite() && c.polarity != 0.0) {
            return Err(GlcError::InvalidContacts(format!(
                "contact {n}: polarity must be nonzero"
            )));
        }
        for (m, d) in contacts.iter().enumerate().take(n) {
            if d.edge == c.edge && c.start < d.end - COORD_TOL && d.start < c.end - COORD_TOL {
                return Err(GlcError::InvalidContacts(format!(
                    "contacts {m} and {n} overlap on the {:?} edge",
                    c.edge
                )));
            }
        }
    }
    Ok(())
}

/// Profile shape applied on each contact segment before balancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileShape {
    /// Constant density on each segment.
    #[default]
    Uniform,
    /// `sin(pi s)` in the normalized segment coordinate `s`; vanishes at the ends.
    Bump,
}

/// Normal current density on boundary faces, indexed like `Grid::faces`.
/// Positive values enter the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    pub values: Vec<f64>,
    pub norm_j: f64,
}

pub fn build_current_profile(
    grid: &Grid,
    amplitude: f64,
    shape: ProfileShape,
) -> Result<CurrentProfile> {
    if !amplitude.is_finite() {
        return Err(GlcError::InvalidProfile("amplitude must be finite".into()));
    }
    let mut values = vec![0.0; grid.faces.len()];
    if amplitude == 0.0 {
        return Ok(CurrentProfile {
            values,
            norm_j: 0.0,
        });
    }
    if grid.contact_face_count() == 0 {
        return Err(GlcError::InvalidProfile(
            "nonzero current requested but the grid has no contact faces".into(),
        ));
    }
    for (v, face) in values.iter_mut().zip(&grid.faces) {
        if let FaceTag::Contact { segment } = face.tag {
            let c = &grid.contacts[segment];
            let density = match shape {
                ProfileShape::Uniform => 1.0,
                ProfileShape::Bump => {
                    let s = (face.coord - c.start) / (c.end - c.start);
                    (std::f64::consts::PI * s.clamp(0.0, 1.0)).sin()
                }
            };
            *v = amplitude * c.polarity.signum() * density;
        }
    }
    balance(grid, &mut values)?;
    let norm_j = boundary_norm(grid, &values);
    Ok(CurrentProfile { values, norm_j })
}

/// Rescales inflow and outflow parts by reciprocal factors so that the net
/// flux vanishes while the support and shape on each contact are kept.
fn balance(grid: &Grid, values: &mut [f64]) -> Result<()> {
    let (mut inflow, mut outflow) = (0.0, 0.0);
    for (v, f) in values.iter().zip(&grid.faces) {
        if *v > 0.0 {
            inflow += v * f.length;
        } else {
            outflow -= v * f.length;
        }
    }
    if inflow == 0.0 || outflow == 0.0 {
        return Err(GlcError::InvalidProfile(
            "net flux cannot be zeroed: the profile has a single sign".into(),
        ));
    }
    let scale = (outflow / inflow).sqrt();
    for v in values.iter_mut() {
        if *v > 0.0 {
            *v *= scale;
        } else {
            *v /= scale;
        }
    }
    Ok(())
}

/// L2 norm on the boundary plus the L2 norm of the tangential difference
/// quotient taken between neighbouring faces of the same edge.
fn boundary_norm(grid: &Grid, values: &[f64]) -> f64 {
    let l2: f64 = values
        .iter()
        .zip(&grid.faces)
        .map(|(v, f)| v * v * f.length)
        .sum();
    let tangential: f64 = grid
        .faces
        .windows(2)
        .zip(values.windows(2))
        .filter(|(f, _)| f[0].edge == f[1].edge)
        .map(|(f, v)| {
            let q = (v[1] - v[0]) / f[0].length;
            q * q * f[0].length
        })
        .sum();
    l2.sqrt() + tangential.sqrt()
}

impl CurrentProfile {
    pub fn zero(grid: &Grid) -> Self {
        CurrentProfile {
            values: vec![0.0; grid.faces.len()],
            norm_j: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Signed net injected current, `sum J * length`.
    pub fn net_flux(&self, grid: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&grid.faces)
            .map(|(v, f)| v * f.length)
            .sum()
    }

    pub fn total_flux(&self, grid: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&grid.faces)
            .map(|(v, f)| v.abs() * f.length)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CurrentProfile {
            values: self.values.iter().map(|v| v * factor).collect(),
            norm_j: self.norm_j * factor.abs(),
        }
    }

    /// `J / norm_j`, or the zero profile when `J` vanishes.
    pub fn normalized(&self) -> Self {
        if self.norm_j == 0.0 {
            return CurrentProfile {
                values: vec![0.0; self.values.len()],
                norm_j: 0.0,
            };
        }
        self.scaled(1.0 / self.norm_j)
    }
}

/// Model constants. `delta = epsilon * norm_j` is derived, never set directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, sigma: f64, profile: &CurrentProfile) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(GlcError::InvalidArgument(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(GlcError::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(ModelParams {
            epsilon,
            sigma,
            delta: epsilon * profile.norm_j,
        })
    }
}
