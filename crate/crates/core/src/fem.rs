//! Unit-disc triangulations and P1 assembly of the anisotropic diffusion
//! operator `−∇·(C∇u)` with homogeneous Dirichlet conditions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyParams {
    /// Direction of strong diffusion, radians.
    pub alpha: f64,
    /// Diffusion ratio across the strong direction.
    pub epsilon: f64,
}

/// Entries of the symmetric diffusion tensor `[[c1, c3], [c3, c2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl DiffusionCoefficients {
    pub const ISOTROPIC: Self = Self {
        c1: 1.0,
        c2: 1.0,
        c3: 0.0,
    };

    pub fn is_spd(&self) -> bool {
        self.c1 > 0.0 && self.c1 * self.c2 - self.c3 * self.c3 > 0.0
    }

    /// Eigenvalues of the tensor, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.c1 + self.c2);
        let rad = (0.25 * (self.c1 - self.c2).powi(2) + self.c3 * self.c3).sqrt();
        [mean - rad, mean + rad]
    }
}

/// Rotated anisotropic tensor: eigenvalue 1 along `alpha`, `epsilon` across.
pub fn coefficients_from_angle(p: AnisotropyParams) -> Result<DiffusionCoefficients> {
    if !(p.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "anisotropy ratio must be positive, got {}",
            p.epsilon
        )));
    }
    let (s, c) = p.alpha.sin_cos();
    Ok(DiffusionCoefficients {
        c1: c * c + p.epsilon * s * s,
        c2: s * s + p.epsilon * c * c,
        c3: 0.5 * (1.0 - p.epsilon) * (2.0 * p.alpha).sin(),
    })
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Mesh vertex indices of the interior (non-boundary) vertices, in order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| !self.boundary[v])
            .collect()
    }

    /// One uniform refinement: every triangle is split into four through its
    /// edge midpoints, and midpoints of boundary edges are pushed radially
    /// onto the unit circle.
    pub fn refine(&self) -> Mesh {
        let mut incidence: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                *incidence
                    .entry(edge_key(tri[e], tri[(e + 1) % 3]))
                    .or_default() += 1;
            }
        }
        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for tri in &self.triangles {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let key = edge_key(tri[e], tri[(e + 1) % 3]);
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let (p, q) = (vertices[key.0], vertices[key.1]);
                    let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                    let on_boundary = incidence[&key] == 1;
                    if on_boundary {
                        let r = m[0].hypot(m[1]);
                        m = [m[0] / r, m[1] / r];
                    }
                    vertices.push(m);
                    boundary.push(on_boundary);
                    vertices.len() - 1
                });
            }
            let [a, b, c] = *tri;
            let [ab, bc, ca] = mid;
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Mesh {
            vertices,
            triangles,
            boundary,
        }
    }

    /// Text format: `nv nt`, then `x y b` per vertex, then `i j k` per
    /// triangle (0-based).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.num_vertices(), self.num_triangles());
        for (v, b) in self.vertices.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{:e} {:e} {}", v[0], v[1], u8::from(*b));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (l0, head) = lines.next().ok_or_else(|| err(0, "empty mesh file"))?;
        let dims: Vec<usize> = head
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(l0, "expected 'nv nt'"))?;
        if dims.len() != 2 {
            return Err(err(l0, "expected 'nv nt'"));
        }
        let (nv, nt) = (dims[0], dims[1]);
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(l0, "truncated vertex list"))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(err(ln, "expected 'x y b'"));
            }
            let x = t[0].parse().map_err(|_| err(ln, "bad x"))?;
            let y = t[1].parse().map_err(|_| err(ln, "bad y"))?;
            let b = match t[2] {
                "0" => false,
                "1" => true,
                _ => return Err(err(ln, "boundary flag must be 0 or 1")),
            };
            vertices.push([x, y]);
            boundary.push(b);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(l0, "truncated triangle list"))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, "bad triangle"))?;
            if idx.len() != 3 || idx.iter().any(|&i| i >= nv) {
                return Err(err(ln, "triangle indices out of range"));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Unit disc from the 6-triangle fan, refined `levels` times.
pub fn disc_mesh(levels: usize) -> Mesh {
    disc_mesh_with_sectors(6, levels)
}

/// Unit disc from a fan of `sectors` triangles around the origin, refined
/// `levels` times.
pub fn disc_mesh_with_sectors(sectors: usize, levels: usize) -> Mesh {
    let sectors = sectors.max(3);
    let mut vertices = vec![[0.0, 0.0]];
    let mut boundary = vec![false];
    for k in 0..sectors {
        let t = 2.0 * PI * k as f64 / sectors as f64;
        vertices.push([t.cos(), t.sin()]);
        boundary.push(true);
    }
    let triangles = (0..sectors)
        .map(|k| [0, k + 1, (k + 1) % sectors + 1])
        .collect();
    let mut mesh = Mesh {
        vertices,
        triangles,
        boundary,
    };
    for _ in 0..levels {
        mesh = mesh.refine();
    }
    mesh
}

/// P1 element stiffness `area · Gᵀ C G` for the triangle `p`.
pub fn local_stiffness(p: [[f64; 2]; 3], c: &DiffusionCoefficients) -> Result<[[f64; 3]; 3]> {
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    if area <= 1e-14 {
        return Err(Error::DegenerateTriangle { index: 0, area });
    }
    let inv = 1.0 / (2.0 * area);
    let grads = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        let cg = [
            c.c1 * grads[a][0] + c.c3 * grads[a][1],
            c.c3 * grads[a][0] + c.c2 * grads[a][1],
        ];
        for b in a..3 {
            k[a][b] = area * (cg[0] * grads[b][0] + cg[1] * grads[b][1]);
            k[b][a] = k[a][b];
        }
    }
    Ok(k)
}

fn triangle_points(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let tri = mesh.triangles[t];
    [
        mesh.vertices[tri[0]],
        mesh.vertices[tri[1]],
        mesh.vertices[tri[2]],
    ]
}

/// Global stiffness matrix over all vertices, without boundary conditions.
pub fn assemble_full(mesh: &Mesh, c: &DiffusionCoefficients) -> Result<CsrMatrix> {
    let n = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let k = local_stiffness(triangle_points(mesh, t), c).map_err(|e| match e {
            Error::DegenerateTriangle { area, .. } => Error::DegenerateTriangle { index: t, area },
            e => e,
        })?;
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                trip.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Interior stiffness matrix (Dirichlet rows and columns removed) and the
/// mesh vertex of each interior unknown.
pub fn assemble(mesh: &Mesh, c: &DiffusionCoefficients) -> Result<(CsrMatrix, Vec<usize>)> {
    if !c.is_spd() {
        return Err(Error::InvalidArgument(
            "diffusion tensor must be symmetric positive definite".into(),
        ));
    }
    let full = assemble_full(mesh, c)?;
    let interior = mesh.interior_vertices();
    let mut local = vec![usize::MAX; mesh.num_vertices()];
    for (k, &v) in interior.iter().enumerate() {
        local[v] = k;
    }
    let rows = interior
        .iter()
        .map(|&v| {
            let (cols, vals) = full.row(v);
            cols.iter()
                .zip(vals)
                .filter(|(&c, _)| local[c] != usize::MAX)
                .map(|(&c, &x)| (local[c], x))
                .collect()
        })
        .collect();
    Ok((CsrMatrix::from_sorted_rows(interior.len(), rows), interior))
}

/// Lumped load vector of `f ≡ 1` on the interior unknowns.
pub fn load_vector(mesh: &Mesh, interior: &[usize]) -> Vec<f64> {
    let mut lumped = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let share = mesh.signed_area(t).abs() / 3.0;
        for &v in &mesh.triangles[t] {
            lumped[v] += share;
        }
    }
    interior.iter().map(|&v| lumped[v]).collect()
}
