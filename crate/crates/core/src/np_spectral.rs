//! Single-layer potential `𝒮_B`, Neumann–Poincaré operator `𝒦*_B` and the
//! H*-orthonormal eigendecomposition of `𝒦*_B`.
//!
//! Densities are piecewise constant on panels and collocated at centroids.
//! The H* pairing `⟨φ,ψ⟩_* = −⟨𝒮_B[ψ], φ⟩` is discretized with the panel
//! areas as weights, giving the Gram matrix `G = −W S` (symmetrized).

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::mesh::TriMesh;
use crate::{Error, Matrix3, Result, Vec3};

/// Eigenvalues closer than this form one cluster.
pub const CLUSTER_TOL: f64 = 1e-3;

/// Piecewise-constant density, one value per panel.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity {
    pub values: Vec<f64>,
}

impl BoundaryDensity {
    /// `Σᵢ valueᵢ·areaᵢ`.
    pub fn integral(&self, mesh: &TriMesh) -> f64 {
        self.values
            .iter()
            .zip(mesh.panels())
            .map(|(v, p)| v * p.area)
            .sum()
    }

    /// Sample a function at the panel centroids.
    pub fn sample(mesh: &TriMesh, f: impl Fn(&Vec3) -> f64) -> Self {
        BoundaryDensity {
            values: mesh.panels().iter().map(|p| f(&p.centroid)).collect(),
        }
    }
}

/// Eigenpairs of `𝒦*_B` in the H* inner product.
#[derive(Debug, Clone)]
pub struct NPSpectrum {
    /// Retained eigenvalues, ordered by `|mₙ|` descending then `λₙ` descending.
    pub eigenvalues: Vec<f64>,
    pub eigendensities: Vec<BoundaryDensity>,
    /// `mₙ = ⟨ν, φₙ⟩_*` componentwise (real for real densities).
    pub moments: Vec<Vec3>,
    /// `‖𝒦*φₙ − λₙφₙ‖_*` with the unsymmetrized operator.
    pub residuals: Vec<f64>,
    /// `max |⟨φᵢ,φⱼ⟩_* − δᵢⱼ|` over retained modes.
    pub gram_certificate: f64,
    /// Rayleigh quotient of the discrete equilibrium density, the mode that
    /// approximates `λ = 1/2` and is excluded.
    pub dropped_eigenvalue: f64,
    /// Every zero-mean eigenvalue in descending order.
    pub all_eigenvalues: Vec<f64>,
    /// Moments aligned with `all_eigenvalues`.
    pub all_moments: Vec<Vec3>,
}

/// A group of retained modes whose eigenvalues agree within
/// [`CLUSTER_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCluster {
    /// Mean eigenvalue of the members.
    pub lambda: f64,
    /// Indices into the retained mode list.
    pub members: Vec<usize>,
    /// `Σ mₙmₙᵀ` over members.
    pub moment_tensor: Matrix3<f64>,
}

impl ModeCluster {
    /// `tr(Σ mₙmₙᵀ)/3`, the isotropic moment constant.
    pub fn c_n(&self) -> f64 {
        self.moment_tensor.trace() / 3.0
    }
}

fn cluster_by_lambda(lambdas: &[f64], moments: &[Vec3]) -> Vec<ModeCluster> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
    let mut clusters: Vec<ModeCluster> = Vec::new();
    let mut last = f64::NAN;
    for &i in &order {
        let l = lambdas[i];
        let extend = !clusters.is_empty() && (last - l).abs() <= CLUSTER_TOL;
        if !extend {
            clusters.push(ModeCluster {
                lambda: 0.0,
                members: Vec::new(),
                moment_tensor: Matrix3::zeros(),
            });
        }
        let cl = clusters.last_mut().unwrap();
        cl.members.push(i);
        cl.moment_tensor += moments[i] * moments[i].transpose();
        last = l;
    }
    for cl in &mut clusters {
        cl.lambda = cl.members.iter().map(|&i| lambdas[i]).sum::<f64>() / cl.members.len() as f64;
    }
    clusters
}

impl NPSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Clusters of retained modes, strongest moment tensor first.
    pub fn clusters(&self) -> Vec<ModeCluster> {
        let mut cl = cluster_by_lambda(&self.eigenvalues, &self.moments);
        cl.sort_by(|a, b| b.moment_tensor.norm().total_cmp(&a.moment_tensor.norm()));
        cl
    }

    /// Clusters over the whole zero-mean spectrum, by descending eigenvalue.
    /// Member indices refer to `all_eigenvalues`.
    pub fn all_clusters(&self) -> Vec<ModeCluster> {
        cluster_by_lambda(&self.all_eigenvalues, &self.all_moments)
    }

    /// The retained cluster with the largest moment tensor.
    pub fn dominant_cluster(&self) -> Option<ModeCluster> {
        self.clusters().into_iter().next()
    }
}

/// Operator matrix of `𝒮_B`: `S[φ](cᵢ) ≈ Σⱼ Sᵢⱼ φⱼ`.
///
/// Off-diagonal `−Aⱼ/(4π|cᵢ − cⱼ|)`. The diagonal integrates the kernel over
/// a disk of equal area around the centroid, `−R/2` with `R = √(A/π)`.
pub fn assemble_single_layer(mesh: &TriMesh) -> Result<Mat<f64>> {
    let panels = mesh.panels();
    let scale = coincidence_scale(mesh);
    let columns: Vec<Result<Vec<f64>>> = (0..panels.len())
        .into_par_iter()
        .map(|j| {
            let pj = &panels[j];
            panels
                .iter()
                .enumerate()
                .map(|(i, pi)| {
                    if i == j {
                        return Ok(-0.5 * (pj.area / PI).sqrt());
                    }
                    let r = (pi.centroid - pj.centroid).norm();
                    if r < scale {
                        return Err(coincident(i, j));
                    }
                    Ok(-pj.area / (4.0 * PI * r))
                })
                .collect()
        })
        .collect();
    columns_to_mat(columns)
}

/// Operator matrix of `𝒦*_B`.
///
/// Off-diagonal `Aⱼ (cᵢ − cⱼ)·νᵢ / (4π|cᵢ − cⱼ|³)`. The diagonal makes the
/// discrete adjoint map the constant density to 1/2:
/// `Σⱼ Aⱼ Kⱼᵢ = Aᵢ/2` for every column.
pub fn assemble_np(mesh: &TriMesh) -> Result<Mat<f64>> {
    let panels = mesh.panels();
    let p = panels.len();
    let scale = coincidence_scale(mesh);
    let columns: Vec<Result<Vec<f64>>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let pj = &panels[j];
            let mut col = Vec::with_capacity(p);
            let mut weighted = 0.0;
            for (i, pi) in panels.iter().enumerate() {
                if i == j {
                    col.push(0.0);
                    continue;
                }
                let d = pi.centroid - pj.centroid;
                let r = d.norm();
                if r < scale {
                    return Err(coincident(i, j));
                }
                let v = pj.area * d.dot(&pi.normal) / (4.0 * PI * r * r * r);
                weighted += pi.area * v;
                col.push(v);
            }
            col[j] = 0.5 - weighted / pj.area;
            Ok(col)
        })
        .collect();
    columns_to_mat(columns)
}

fn coincidence_scale(mesh: &TriMesh) -> f64 {
    1e-12 * mesh.total_area().sqrt()
}

fn coincident(i: usize, j: usize) -> Error {
    Error::Mesh(format!("panels {i} and {j} have coincident centroids"))
}

fn columns_to_mat(columns: Vec<Result<Vec<f64>>>) -> Result<Mat<f64>> {
    let cols: Vec<Vec<f64>> = columns.into_iter().collect::<Result<_>>()?;
    let n = cols.len();
    Ok(Mat::from_fn(n, n, |i, j| cols[j][i]))
}

/// Symmetrized H* Gram matrix `½(−WS − (WS)ᵀ)`.
pub fn gram_matrix(s: &Mat<f64>, mesh: &TriMesh) -> Mat<f64> {
    let a = mesh.areas();
    let n = a.len();
    Mat::from_fn(n, n, |i, j| -0.5 * (a[i] * s[(i, j)] + a[j] * s[(j, i)]))
}

/// `Qᵀ M Q` for the zero-mean basis `Q = [I; vᵀ]`, `v = −a[..n−1]/a[n−1]`.
fn restrict_zero_mean(m: &Mat<f64>, areas: &[f64]) -> Mat<f64> {
    let n = areas.len();
    let last = n - 1;
    let v: Vec<f64> = areas[..last].iter().map(|a| -a / areas[last]).collect();
    let mpp = m[(last, last)];
    Mat::from_fn(last, last, |i, j| {
        m[(i, j)] + v[i] * m[(last, j)] + m[(i, last)] * v[j] + mpp * v[i] * v[j]
    })
}

/// H*-orthonormal eigenpairs of `𝒦*_B` on the zero-mean subspace.
///
/// Solves `Ks y = λ G y` with `Ks = ½(GK + KᵀG)` via a Cholesky reduction,
/// keeps `mode_count` modes ordered by `|mₙ|` descending (ties by `λₙ`).
pub fn spectral_decomposition(
    s: &Mat<f64>,
    k: &Mat<f64>,
    mesh: &TriMesh,
    mode_count: usize,
) -> Result<NPSpectrum> {
    let p = mesh.panel_count();
    if s.nrows() != p || s.ncols() != p || k.nrows() != p || k.ncols() != p {
        return Err(Error::Domain(format!(
            "operator sizes ({}x{}, {}x{}) do not match {p} panels",
            s.nrows(),
            s.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    if mode_count == 0 || mode_count > p - 1 {
        return Err(Error::Domain(format!(
            "mode_count must be in 1..={}, got {mode_count}",
            p - 1
        )));
    }
    let areas = mesh.areas();
    let g = gram_matrix(s, mesh);
    let gk = &g * k;
    let ks = Mat::from_fn(p, p, |i, j| 0.5 * (gk[(i, j)] + gk[(j, i)]));

    let gr = restrict_zero_mean(&g, &areas);
    let kr = restrict_zero_mean(&ks, &areas);
    let llt = gr.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
            Error::IllConditioned {
                mode: index,
                msg: "Gram matrix -W S is not positive definite on the zero-mean subspace".into(),
            }
        }
    })?;
    let l = llt.L();

    // C = L⁻¹ Kr L⁻ᵀ.
    let mut x = kr.clone();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut cm = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(cm.as_mut());
    let n = p - 1;
    let cm = Mat::from_fn(n, n, |i, j| 0.5 * (cm[(i, j)] + cm[(j, i)]));
    let evd = cm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence(format!("symmetric eigensolver: {e:?}")))?;
    let lambdas: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let mut y = evd.U().to_owned();
    l.transpose().solve_upper_triangular_in_place(y.as_mut());

    // Back to panel values: φ = Q y.
    let last = p - 1;
    let mut phi = Mat::<f64>::zeros(p, n);
    for m in 0..n {
        let mut tail = 0.0;
        for i in 0..last {
            phi[(i, m)] = y[(i, m)];
            tail -= areas[i] * y[(i, m)];
        }
        phi[(last, m)] = tail / areas[last];
        // Deterministic sign: the largest entry is positive.
        let mut imax = 0;
        for i in 0..p {
            if phi[(i, m)].abs() > phi[(imax, m)].abs() {
                imax = i;
            }
        }
        if phi[(imax, m)] < 0.0 {
            for i in 0..p {
                phi[(i, m)] = -phi[(i, m)];
            }
        }
    }

    let gphi = &g * &phi;
    let moments: Vec<Vec3> = (0..n)
        .map(|m| {
            let mut v = Vec3::zeros();
            for (i, pan) in mesh.panels().iter().enumerate() {
                v += pan.normal * gphi[(i, m)];
            }
            v
        })
        .collect();

    let kphi = k * &phi;
    let resid_vecs = Mat::from_fn(p, n, |i, m| kphi[(i, m)] - lambdas[m] * phi[(i, m)]);
    let gres = &g * &resid_vecs;
    let residuals: Vec<f64> = (0..n)
        .map(|m| {
            let q: f64 = (0..p).map(|i| resid_vecs[(i, m)] * gres[(i, m)]).sum();
            q.max(0.0).sqrt()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        moments[b]
            .norm()
            .total_cmp(&moments[a].norm())
            .then(lambdas[b].total_cmp(&lambdas[a]))
            .then(a.cmp(&b))
    });
    order.truncate(mode_count);

    let mut gram_certificate: f64 = 0.0;
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a..] {
            let ip: f64 = (0..p).map(|r| phi[(r, i)] * gphi[(r, j)]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            gram_certificate = gram_certificate.max((ip - target).abs());
        }
    }

    // Equilibrium density: G φ₀ ∝ W·1 spans the G-complement of the
    // zero-mean subspace.
    let gllt = g.llt(Side::Lower).map_err(|_| Error::IllConditioned {
        mode: p - 1,
        msg: "Gram matrix not positive definite on the full space".into(),
    })?;
    let mut phi0 = Mat::from_fn(p, 1, |i, _| areas[i]);
    gllt.solve_in_place(phi0.as_mut());
    let ks_phi0 = &ks * &phi0;
    let g_phi0 = &g * &phi0;
    let num: f64 = (0..p).map(|i| phi0[(i, 0)] * ks_phi0[(i, 0)]).sum();
    let den: f64 = (0..p).map(|i| phi0[(i, 0)] * g_phi0[(i, 0)]).sum();
    let dropped_eigenvalue = num / den;

    let mut all: Vec<usize> = (0..n).collect();
    all.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));

    Ok(NPSpectrum {
        eigenvalues: order.iter().map(|&m| lambdas[m]).collect(),
        eigendensities: order
            .iter()
            .map(|&m| BoundaryDensity {
                values: (0..p).map(|i| phi[(i, m)]).collect(),
            })
            .collect(),
        moments: order.iter().map(|&m| moments[m]).collect(),
        residuals: order.iter().map(|&m| residuals[m]).collect(),
        gram_certificate,
        dropped_eigenvalue,
        all_eigenvalues: all.iter().map(|&m| lambdas[m]).collect(),
        all_moments: all.iter().map(|&m| moments[m]).collect(),
    })
}

/// Assemble both operators for `mesh` and decompose.
pub fn compute_spectrum(mesh: &TriMesh, mode_count: usize) -> Result<NPSpectrum> {
    let s = assemble_single_layer(mesh)?;
    let k = assemble_np(mesh)?;
    spectral_decomposition(&s, &k, mesh, mode_count)
}

/// `𝒮_B[φ](x)` at an arbitrary point, each panel split into `4^refine`
/// flat sub-triangles with one-point quadrature.
pub fn single_layer_potential(mesh: &TriMesh, density: &BoundaryDensity, x: &Vec3, refine: u32) -> f64 {
    let verts = mesh.vertices();
    let mut total = 0.0;
    for (t, &val) in mesh.triangles().iter().zip(&density.values) {
        let mut tris = vec![[verts[t[0]], verts[t[1]], verts[t[2]]]];
        for _ in 0..refine {
            tris = tris
                .iter()
                .flat_map(|[a, b, c]| {
                    let (ab, bc, ca) = ((a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5);
                    [[*a, ab, ca], [ab, *b, bc], [ca, bc, *c], [ab, bc, ca]]
                })
                .collect();
        }
        for [a, b, c] in &tris {
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            let centroid = (a + b + c) / 3.0;
            total -= val * area / (4.0 * PI * (x - centroid).norm());
        }
    }
    total
}
