//! Closed triangulated surfaces with one-point (centroid) panel quadrature.

use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result, Vec3};

/// Largest icosphere subdivision level accepted (20·4⁶ = 81920 panels).
pub const MAX_SUBDIVISIONS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub centroid: Vec3,
    /// Outward unit normal.
    pub normal: Vec3,
    pub area: f64,
}

/// A closed, watertight, outward-oriented triangle mesh.
///
/// Construction validates the surface and orients it; the value is immutable
/// afterwards.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    panels: Vec<Panel>,
}

impl TriMesh {
    /// Validate and orient a raw triangle soup.
    ///
    /// Faces are first made consistently oriented across shared edges, then
    /// all flipped if the enclosed volume comes out negative.
    pub fn new(vertices: Vec<Vec3>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        let nv = vertices.len();
        for (f, t) in triangles.iter().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= nv) {
                return Err(Error::Mesh(format!(
                    "triangle {f} references vertex {bad}, only {nv} vertices"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle {f} repeats a vertex")));
            }
        }

        let scale = bounding_diameter(&vertices).max(f64::MIN_POSITIVE);
        for (f, t) in triangles.iter().enumerate() {
            let area = 0.5 * tri_cross(&vertices, t).norm();
            if area.is_nan() || area <= 1e-14 * scale * scale {
                return Err(Error::Mesh(format!("triangle {f} is degenerate (area {area:e})")));
            }
        }

        let edges = edge_faces(&triangles);
        for (&(a, b), faces) in &edges {
            if faces.len() != 2 {
                return Err(Error::Mesh(format!(
                    "edge ({a}, {b}) is shared by {} triangles, expected 2",
                    faces.len()
                )));
            }
        }
        orient_consistently(&mut triangles, &edges)?;

        let euler = nv as i64 - edges.len() as i64 + triangles.len() as i64;
        if euler != 2 {
            return Err(Error::Mesh(format!(
                "Euler characteristic V - E + F = {euler}, expected 2 (single closed genus-0 surface)"
            )));
        }

        let mut mesh = TriMesh {
            vertices,
            triangles,
            panels: Vec::new(),
        };
        mesh.panels = compute_panels(&mesh.vertices, &mesh.triangles);
        if signed_volume(&mesh) < 0.0 {
            for t in &mut mesh.triangles {
                t.swap(1, 2);
            }
            mesh.panels = compute_panels(&mesh.vertices, &mesh.triangles);
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.panels.iter().map(|p| p.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.panels.iter().map(|p| p.area).sum()
    }

    pub fn edge_count(&self) -> usize {
        edge_faces(&self.triangles).len()
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, factor: f64) -> Result<TriMesh> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {factor}")));
        }
        TriMesh::new(
            self.vertices.iter().map(|v| v * factor).collect(),
            self.triangles.clone(),
        )
    }

    /// Translated copy.
    pub fn translated(&self, shift: &Vec3) -> TriMesh {
        let vertices: Vec<Vec3> = self.vertices.iter().map(|v| v + shift).collect();
        let panels = compute_panels(&vertices, &self.triangles);
        TriMesh {
            vertices,
            triangles: self.triangles.clone(),
            panels,
        }
    }
}

/// `(1/3) Σ cᵢ·νᵢ Aᵢ`, exact for flat-faced polyhedra.
pub fn signed_volume(mesh: &TriMesh) -> f64 {
    mesh.panels
        .iter()
        .map(|p| p.centroid.dot(&p.normal) * p.area)
        .sum::<f64>()
        / 3.0
}

/// Unit-sphere icosphere with `20·4^subdivisions` panels.
pub fn icosphere(subdivisions: u32) -> Result<TriMesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::Size(format!(
            "icosphere subdivisions {subdivisions} exceeds limit {MAX_SUBDIVISIONS}"
        )));
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    TriMesh::new(vertices, triangles)
}

/// Read an OFF file (`OFF` header, counts line, vertex lines, `3 a b c` faces).
pub fn mesh_from_file(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text)
}

/// Parse OFF text. Errors carry the 1-based line number.
pub fn parse_off(text: &str) -> Result<TriMesh> {
    // (line number, tokens) for every non-blank line after comment stripping.
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then(|| (i + 1, body.split_whitespace().collect::<Vec<_>>()))
    });
    let last_line = text.lines().count();
    let eof = |what: &str| Error::Parse {
        line: last_line + 1,
        msg: format!("unexpected end of file, expected {what}"),
    };

    let (hline, header) = lines.next().ok_or_else(|| eof("OFF header"))?;
    if header[0] != "OFF" {
        return Err(Error::Parse {
            line: hline,
            msg: format!("expected OFF header, found {:?}", header[0]),
        });
    }
    // Counts may share the header line.
    let (cline, counts) = if header.len() > 1 {
        (hline, header[1..].to_vec())
    } else {
        lines.next().ok_or_else(|| eof("counts line"))?
    };
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: cline,
            msg: "counts line needs vertex and face counts".into(),
        });
    }
    let nv: usize = parse_tok(counts[0], cline)?;
    let nf: usize = parse_tok(counts[1], cline)?;

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (line, toks) = lines
            .next()
            .ok_or_else(|| eof(&format!("vertex {} of {nv}", k + 1)))?;
        if toks.len() < 3 {
            return Err(Error::Parse {
                line,
                msg: format!("vertex line has {} coordinates, expected 3", toks.len()),
            });
        }
        let x: f64 = parse_tok(toks[0], line)?;
        let y: f64 = parse_tok(toks[1], line)?;
        let z: f64 = parse_tok(toks[2], line)?;
        vertices.push(Vec3::new(x, y, z));
    }

    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let (line, toks) = lines
            .next()
            .ok_or_else(|| eof(&format!("face {} of {nf}", k + 1)))?;
        let n: usize = parse_tok(toks[0], line)?;
        if n != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("face has {n} vertices, only triangles are supported"),
            });
        }
        if toks.len() < 4 {
            return Err(Error::Parse {
                line,
                msg: "face line has fewer than 3 indices".into(),
            });
        }
        let mut t = [0usize; 3];
        for (slot, tok) in t.iter_mut().zip(&toks[1..4]) {
            *slot = parse_tok(tok, line)?;
            if *slot >= nv {
                return Err(Error::Parse {
                    line,
                    msg: format!("vertex index {slot} out of range (nv = {nv})"),
                });
            }
        }
        triangles.push(t);
    }
    TriMesh::new(vertices, triangles)
}

fn parse_tok<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {tok:?}"),
    })
}

fn tri_cross(vertices: &[Vec3], t: &[usize; 3]) -> Vec3 {
    let a = vertices[t[0]];
    (vertices[t[1]] - a).cross(&(vertices[t[2]] - a))
}

fn compute_panels(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Vec<Panel> {
    triangles
        .iter()
        .map(|t| {
            let cr = tri_cross(vertices, t);
            let twice = cr.norm();
            Panel {
                centroid: (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0,
                normal: cr / twice,
                area: 0.5 * twice,
            }
        })
        .collect()
}

fn bounding_diameter(vertices: &[Vec3]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).norm()
}

/// Undirected edge → incident faces.
fn edge_faces(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), Vec<usize>> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    map
}

fn has_directed_edge(t: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b)
}

/// Flood-fill so that every shared edge is traversed in opposite directions
/// by its two faces.
fn orient_consistently(
    triangles: &mut [[usize; 3]],
    edges: &HashMap<(usize, usize), Vec<usize>>,
) -> Result<()> {
    let nf = triangles.len();
    let mut visited = vec![false; nf];
    let mut stack = Vec::new();
    for seed in 0..nf {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        stack.push(seed);
        while let Some(f) = stack.pop() {
            let t = triangles[f];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                for &g in &edges[&(a.min(b), a.max(b))] {
                    if g == f {
                        continue;
                    }
                    let agrees = has_directed_edge(&triangles[g], b, a);
                    if visited[g] {
                        if !agrees {
                            return Err(Error::Mesh(format!(
                                "surface is not orientable (faces {f} and {g})"
                            )));
                        }
                        continue;
                    }
                    if !agrees {
                        triangles[g].swap(1, 2);
                    }
                    visited[g] = true;
                    stack.push(g);
                }
            }
        }
    }
    Ok(())
}
