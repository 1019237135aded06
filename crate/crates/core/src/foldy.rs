//! Point-interaction (Foldy) model of the dilute lattice on `Ω = [0, 1]³`
//! and the homogenized volume equation it approaches.
//!
//! Both discretize `u − ∫ ωG_η(x − y) T u(y) dy = u_inc` with the 6×6
//! coupling `T = T_eff ⊗ I₃`: Foldy puts a point mass `1/N³` at each lattice
//! center and drops the self term, the homogenized solve uses a midpoint
//! rule on an `m³` grid.

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::background::{green_eta, incident_field, ChiralBackground, PlaneWaveSpec, ORIGIN_RADIUS};
use crate::dipole::point_source;
use crate::effective::{tilde_from_definition, DiluteConfig, TildeParams};
use crate::{c, kron_i3, CMat2, CMat6, CVec6, Complex64, Error, Result, Vec3};

/// Largest lattice accepted by [`solve_foldy`] (`6N³` unknowns, dense LU).
pub const MAX_FOLDY_N: u64 = 10;
/// Largest homogenized grid accepted by [`solve_homogenized_ls`].
pub const MAX_GRID_M: usize = 24;
/// Relative residual every accepted dense solve must reach.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleLattice {
    pub n: u64,
    pub centers: Vec<Vec3>,
    /// The dilute configuration at this `N` (so `cfg.delta()` is this
    /// lattice's particle size).
    pub cfg: DiluteConfig,
}

impl ParticleLattice {
    /// `N³` cell centers `((i−½)/N, (j−½)/N, (k−½)/N)`, `x` fastest.
    pub fn new(n: u64, cfg: &DiluteConfig) -> Result<Self> {
        let cfg = cfg.with_n(n)?;
        let h = 1.0 / n as f64;
        let n = n as usize;
        let mut centers = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    centers.push(Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h));
                }
            }
        }
        Ok(ParticleLattice {
            n: cfg.n,
            centers,
            cfg,
        })
    }

    /// Same lattice with the centers listed in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.centers.len()];
        if order.len() != self.centers.len() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Domain("order is not a permutation of the lattice centers".into()));
        }
        Ok(ParticleLattice {
            n: self.n,
            centers: order.iter().map(|&i| self.centers[i]).collect(),
            cfg: self.cfg,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `1/N³`.
    pub fn weight(&self) -> f64 {
        1.0 / self.centers.len() as f64
    }
}

pub fn build_lattice(n: u64, cfg: &DiluteConfig) -> Result<ParticleLattice> {
    ParticleLattice::new(n, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    /// `‖A u − b‖/‖b‖` (zero for a zero right side).
    pub residual: f64,
    /// Lower-bound estimate of the 2-norm condition number.
    pub condition_estimate: f64,
    pub unknowns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldyState {
    /// `(E, H)` at each lattice center, in lattice order.
    pub values: Vec<CVec6>,
    pub eta: f64,
    /// `T_eff`, the 2×2 block coupling used in the solve.
    pub coupling: CMat2,
    pub incident: PlaneWaveSpec,
    pub report: SolverReport,
}

/// Which tilde values feed the Foldy coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingChoice {
    /// `ΛN^{−3a}cₙK₀Mₙ` at the lattice's own `N`.
    FiniteN,
    /// A fixed matrix, e.g. the reference value used for a convergence study.
    Fixed(CMat2),
}

/// `T_eff` for a lattice.
pub fn lattice_coupling(
    bg: &ChiralBackground,
    lattice: &ParticleLattice,
    eps_c: Complex64,
    lambda_n: f64,
    choice: CouplingChoice,
) -> Result<CMat2> {
    match choice {
        CouplingChoice::FiniteN => Ok(tilde_from_definition(bg, eps_c, &lattice.cfg, lambda_n)?.matrix),
        CouplingChoice::Fixed(m) => Ok(m),
    }
}

fn to_faer(blocks: &[Vec<CMat6>]) -> Mat<Complex64> {
    let nb = blocks.len();
    Mat::from_fn(6 * nb, 6 * nb, |r, col| blocks[r / 6][col / 6][(r % 6, col % 6)])
}

fn flatten(v: &[CVec6]) -> Mat<Complex64> {
    Mat::from_fn(6 * v.len(), 1, |r, _| v[r / 6][r % 6])
}

fn unflatten(m: &Mat<Complex64>) -> Vec<CVec6> {
    (0..m.nrows() / 6)
        .map(|i| CVec6::from_fn(|d, _| m[(6 * i + d, 0)]))
        .collect()
}

fn col_norm(m: &Mat<Complex64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, 0)].norm_sqr()).sum::<f64>().sqrt()
}

/// Dense LU solve with one step of iterative refinement if needed.
fn dense_solve(a: &Mat<Complex64>, b: &[CVec6]) -> Result<(Vec<CVec6>, SolverReport)> {
    let rhs = flatten(b);
    let bnorm = col_norm(&rhs);
    let unknowns = a.nrows();
    if bnorm == 0.0 {
        let report = SolverReport {
            residual: 0.0,
            condition_estimate: f64::NAN,
            unknowns,
        };
        return Ok((vec![CVec6::zeros(); b.len()], report));
    }
    let lu = a.partial_piv_lu();
    let mut x = rhs.clone();
    lu.solve_in_place(x.as_mut());
    let residual_of = |x: &Mat<Complex64>| -> (Mat<Complex64>, f64) {
        let r = &rhs - a * x;
        let n = col_norm(&r) / bnorm;
        (r, n)
    };
    let (r, mut res) = residual_of(&x);
    if res > SOLVE_TOL && res.is_finite() {
        let mut dx = r;
        lu.solve_in_place(dx.as_mut());
        x = &x + &dx;
        res = residual_of(&x).1;
    }

    // ‖A‖ from a few power steps, ‖A⁻¹‖ likewise through the factorization.
    let mut v = Mat::from_fn(unknowns, 1, |i, _| c(if i % 2 == 0 { 1.0 } else { -0.5 }));
    let mut inv_norm = 0.0;
    let mut fwd_norm = 0.0;
    let mut w = v.clone();
    for _ in 0..4 {
        let vn = col_norm(&v);
        v = Mat::from_fn(unknowns, 1, |i, _| v[(i, 0)] / vn);
        lu.solve_in_place(v.as_mut());
        inv_norm = col_norm(&v);
        let wn = col_norm(&w);
        w = Mat::from_fn(unknowns, 1, |i, _| w[(i, 0)] / wn);
        w = a * &w;
        fwd_norm = col_norm(&w);
    }
    let condition_estimate = inv_norm * fwd_norm;

    if !res.is_finite() || res > SOLVE_TOL {
        return Err(Error::Solver {
            msg: format!("dense solve residual {res:e} above {SOLVE_TOL:e} ({unknowns} unknowns)"),
            condition: condition_estimate,
        });
    }
    Ok((
        unflatten(&x),
        SolverReport {
            residual: res,
            condition_estimate,
            unknowns,
        },
    ))
}

/// Solve `u_i − (1/N³) Σ_{j≠i} ωG_η(z_i − z_j) T u_j = u_inc(z_i)`.
pub fn solve_foldy(
    bg: &ChiralBackground,
    lattice: &ParticleLattice,
    coupling: &CMat2,
    incident: &PlaneWaveSpec,
    eta: f64,
) -> Result<FoldyState> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("eta must be nonnegative, got {eta}")));
    }
    if lattice.n > MAX_FOLDY_N {
        return Err(Error::Size(format!(
            "N = {} exceeds the dense-solve cap {MAX_FOLDY_N} ({} unknowns)",
            lattice.n,
            6 * lattice.len()
        )));
    }
    let t = kron_i3(coupling) * c(lattice.weight());
    let w = c(bg.omega);
    let zs = &lattice.centers;
    let blocks: Vec<Vec<CMat6>> = zs
        .par_iter()
        .enumerate()
        .map(|(i, zi)| {
            zs.iter()
                .enumerate()
                .map(|(j, zj)| {
                    if i == j {
                        CMat6::identity()
                    } else {
                        -(green_eta(bg, &(zi - zj), eta) * w * t)
                    }
                })
                .collect()
        })
        .collect();
    let a = to_faer(&blocks);
    drop(blocks);
    let b: Vec<CVec6> = zs.iter().map(|z| incident_field(bg, incident, z)).collect();
    let (values, report) = dense_solve(&a, &b)?;
    Ok(FoldyState {
        values,
        eta,
        coupling: *coupling,
        incident: *incident,
        report,
    })
}

fn check_probe(x: &Vec3, points: &[Vec3], eta: f64) -> Result<()> {
    if eta == 0.0 {
        if let Some(p) = points.iter().find(|p| (x - *p).norm() < ORIGIN_RADIUS) {
            return Err(Error::Domain(format!(
                "probe ({}, {}, {}) coincides with a source at eta = 0",
                p[0], p[1], p[2]
            )));
        }
    }
    Ok(())
}

/// Scattered part `(1/N³) Σⱼ ωG_η(x − zⱼ) T uⱼ`.
pub fn eval_foldy_scattered(bg: &ChiralBackground, lattice: &ParticleLattice, state: &FoldyState, x: &Vec3) -> Result<CVec6> {
    check_probe(x, &lattice.centers, state.eta)?;
    let t = kron_i3(&state.coupling) * c(lattice.weight());
    Ok(lattice
        .centers
        .iter()
        .zip(&state.values)
        .map(|(z, u)| point_source(bg, &(x - z), state.eta, &t, u))
        .sum())
}

/// Total field: incident plus [`eval_foldy_scattered`].
pub fn eval_foldy_field(bg: &ChiralBackground, lattice: &ParticleLattice, state: &FoldyState, x: &Vec3) -> Result<CVec6> {
    Ok(incident_field(bg, &state.incident, x) + eval_foldy_scattered(bg, lattice, state, x)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeField {
    pub m: usize,
    pub nodes: Vec<Vec3>,
    pub values: Vec<CVec6>,
    pub eta: f64,
    pub coupling: CMat2,
    pub incident: PlaneWaveSpec,
    pub report: SolverReport,
}

impl VolumeField {
    pub fn weight(&self) -> f64 {
        1.0 / self.nodes.len() as f64
    }

    pub fn scattered(&self, bg: &ChiralBackground, x: &Vec3) -> Result<CVec6> {
        check_probe(x, &self.nodes, self.eta)?;
        let t = kron_i3(&self.coupling) * c(self.weight());
        Ok(self
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(y, u)| point_source(bg, &(x - y), self.eta, &t, u))
            .sum())
    }

    pub fn eval(&self, bg: &ChiralBackground, x: &Vec3) -> Result<CVec6> {
        Ok(incident_field(bg, &self.incident, x) + self.scattered(bg, x)?)
    }
}

/// Nyström solve of `u(x) − ∫_Ω ωG_η(x − y) T u(y) dy = u_inc(x)` at the
/// `m³` cell centers, weights `1/m³`. The diagonal keeps the finite
/// `G_η(0)` self term, so `eta` must be positive.
pub fn solve_homogenized_ls(
    bg: &ChiralBackground,
    tilde: &TildeParams,
    grid_m: usize,
    eta: f64,
    incident: &PlaneWaveSpec,
) -> Result<VolumeField> {
    if grid_m == 0 || grid_m > MAX_GRID_M {
        return Err(Error::Size(format!("grid m = {grid_m} outside 1..={MAX_GRID_M}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("homogenized solve needs eta > 0, got {eta}")));
    }
    let h = 1.0 / grid_m as f64;
    let mut nodes = Vec::with_capacity(grid_m.pow(3));
    for k in 0..grid_m {
        for j in 0..grid_m {
            for i in 0..grid_m {
                nodes.push(Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h));
            }
        }
    }
    let t = kron_i3(&tilde.matrix) * c(1.0 / nodes.len() as f64);
    let w = c(bg.omega);
    let blocks: Vec<Vec<CMat6>> = nodes
        .par_iter()
        .map(|xi| {
            nodes
                .iter()
                .map(|yj| {
                    let g = -(green_eta(bg, &(xi - yj), eta) * w * t);
                    if xi == yj {
                        g + CMat6::identity()
                    } else {
                        g
                    }
                })
                .collect()
        })
        .collect();
    let a = to_faer(&blocks);
    drop(blocks);
    let b: Vec<CVec6> = nodes.iter().map(|x| incident_field(bg, incident, x)).collect();
    let (values, report) = dense_solve(&a, &b)?;
    Ok(VolumeField {
        m: grid_m,
        nodes,
        values,
        eta,
        coupling: tilde.matrix,
        incident: *incident,
        report,
    })
}

/// The smooth test pair used by [`check_distribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestPair {
    /// `(f, g) = (1, 1, 1, 1, 1, 1)`.
    Constant,
    /// `(1 + x + yz)·e^{ik_m z}` in every component, with a 2:1 `E:H` ratio.
    PolynomialWave,
}

impl TestPair {
    fn value(&self, bg: &ChiralBackground, z: &Vec3) -> CVec6 {
        match self {
            TestPair::Constant => CVec6::from_element(c(1.0)),
            TestPair::PolynomialWave => {
                let s = (1.0 + z[0] + z[1] * z[2]) * Complex64::from_polar(1.0, bg.k_m * z[2]);
                CVec6::new(s, s * 2.0, s * 0.5, s, s * -1.0, s * 0.25)
            }
        }
    }
}

/// Sup over probe centers `z_j` of
/// `|(1/N³)Σ_{i≠j} G_η(z_i − z_j)F(z_i) − ∫_Ω G_η(z − z_j)F(z) dz|`,
/// the integral by the midpoint rule on a grid 4× finer per axis.
/// Probe centers are every `⌈N³/probe_count⌉`-th lattice point.
pub fn check_distribution(
    lattice: &ParticleLattice,
    bg: &ChiralBackground,
    eta: f64,
    probe_count: usize,
    pair: TestPair,
) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("check_distribution needs eta > 0, got {eta}")));
    }
    let total = lattice.len();
    let stride = total.div_ceil(probe_count.clamp(1, total));
    let probes: Vec<usize> = (0..total).step_by(stride).collect();
    let fine = 4 * lattice.n as usize;
    let hf = 1.0 / fine as f64;
    let fine_nodes: Vec<Vec3> = (0..fine * fine * fine)
        .map(|l| {
            let (i, j, k) = (l % fine, (l / fine) % fine, l / (fine * fine));
            Vec3::new((i as f64 + 0.5) * hf, (j as f64 + 0.5) * hf, (k as f64 + 0.5) * hf)
        })
        .collect();
    let fine_vals: Vec<CVec6> = fine_nodes.iter().map(|z| pair.value(bg, z)).collect();
    let lat_vals: Vec<CVec6> = lattice.centers.iter().map(|z| pair.value(bg, z)).collect();
    let wf = c(1.0 / fine_nodes.len() as f64);
    let wl = c(lattice.weight());
    let errs: Vec<f64> = probes
        .par_iter()
        .map(|&j| {
            let zj = lattice.centers[j];
            let sum: CVec6 = lattice
                .centers
                .iter()
                .zip(&lat_vals)
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, (zi, f))| green_eta(bg, &(zi - zj), eta) * f)
                .sum::<CVec6>()
                * wl;
            let integral: CVec6 = fine_nodes
                .iter()
                .zip(&fine_vals)
                .map(|(z, f)| green_eta(bg, &(z - zj), eta) * f)
                .sum::<CVec6>()
                * wf;
            (sum - integral).norm()
        })
        .collect();
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// `(1/N⁶) Σ_{i≠j} ‖G(z_i − z_j)‖_F²` on the unit cube.
pub fn uniform_invertibility_stat(lattice: &ParticleLattice, bg: &ChiralBackground) -> Result<f64> {
    uniform_invertibility_stat_with_side(lattice, bg, 1.0)
}

/// As [`uniform_invertibility_stat`] with the lattice stretched to a cube of
/// side `side`. `G` depends only on center offsets, so each offset
/// `(di, dj, dk)/N` is evaluated once with multiplicity
/// `(N−|di|)(N−|dj|)(N−|dk|)`.
pub fn uniform_invertibility_stat_with_side(lattice: &ParticleLattice, bg: &ChiralBackground, side: f64) -> Result<f64> {
    let n = lattice.n as i64;
    if n < 2 {
        return Err(Error::Domain("uniform invertibility statistic needs N >= 2".into()));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Domain(format!("side must be positive, got {side}")));
    }
    let h = side / n as f64;
    let offsets: Vec<(i64, i64, i64)> = (-(n - 1)..n)
        .flat_map(|a| (-(n - 1)..n).flat_map(move |b| (-(n - 1)..n).map(move |c| (a, b, c))))
        .filter(|&o| o != (0, 0, 0))
        .collect();
    let sum: f64 = offsets
        .par_iter()
        .map(|&(a, b, cc)| {
            let mult = ((n - a.abs()) * (n - b.abs()) * (n - cc.abs())) as f64;
            let g = green_eta(bg, &Vec3::new(a as f64 * h, b as f64 * h, cc as f64 * h), 0.0);
            mult * g.norm_squared()
        })
        .sum();
    Ok(sum / (n as f64).powi(6))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub n: u64,
    /// `‖u_N − u_hom‖/‖u_hom‖` over the probe set, scattered parts only.
    pub rel_l2_error: f64,
    pub eta: f64,
    pub eps_c: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizationComparison {
    pub rows: Vec<ErrorRow>,
    /// Fixed coupling shared by every Foldy solve and the volume solve.
    pub coupling: CMat2,
    pub grid_m: usize,
    pub homogenized: VolumeField,
}

/// Scattered-field relative L² distance over a probe set.
pub fn relative_l2(a: &[CVec6], reference: &[CVec6]) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).norm_squared()).sum();
    let den: f64 = reference.iter().map(|y| y.norm_squared()).sum();
    (num / den).sqrt()
}

/// Foldy versus homogenized fields over `n_list`.
///
/// Every solve uses the reference coupling `ΛN^{−3a}cₙK₀Mₙ` at `cfg.n`, so
/// that the lattices differ only in how finely they sample `Ω` and the
/// continuum limit is the single volume solve on an `grid_m³` grid.
#[allow(clippy::too_many_arguments)]
pub fn compare_homogenization(
    bg: &ChiralBackground,
    cfg: &DiluteConfig,
    lambda_n: f64,
    eps_c: Complex64,
    n_list: &[u64],
    eta: f64,
    probes: &[Vec3],
    incident: &PlaneWaveSpec,
    grid_m: usize,
) -> Result<HomogenizationComparison> {
    if probes.is_empty() {
        return Err(Error::Domain("no probe points".into()));
    }
    let tilde = tilde_from_definition(bg, eps_c, cfg, lambda_n)?;
    let hom = solve_homogenized_ls(bg, &tilde, grid_m, eta, incident)?;
    let reference: Vec<CVec6> = probes.iter().map(|p| hom.scattered(bg, p)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let lattice = build_lattice(n, cfg)?;
        let state = solve_foldy(bg, &lattice, &tilde.matrix, incident, eta)?;
        let vals: Vec<CVec6> = probes
            .par_iter()
            .map(|p| eval_foldy_scattered(bg, &lattice, &state, p))
            .collect::<Result<_>>()?;
        rows.push(ErrorRow {
            n,
            rel_l2_error: relative_l2(&vals, &reference),
            eta,
            eps_c,
        });
    }
    Ok(HomogenizationComparison {
        rows,
        coupling: tilde.matrix,
        grid_m,
        homogenized: hom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DiluteConfig {
        DiluteConfig::new(0.5, 7, 0.965, 4.0 * std::f64::consts::PI / 27.0).unwrap()
    }

    #[test]
    fn lattice_layout() {
        let l = build_lattice(2, &cfg()).unwrap();
        assert_eq!(l.len(), 8);
        assert_eq!(l.centers[0], Vec3::new(0.25, 0.25, 0.25));
        assert_eq!(l.cfg.n, 2);
    }

    #[test]
    fn permutation_checked() {
        let l = build_lattice(2, &cfg()).unwrap();
        assert!(l.permuted(&[0, 1, 2, 3, 4, 5, 6, 6]).is_err());
        assert!(l.permuted(&[7, 6, 5, 4, 3, 2, 1, 0]).is_ok());
    }

    #[test]
    fn single_particle_is_incident() {
        let bg = ChiralBackground::new(1.0, 1.0, 0.4, 1.0).unwrap();
        let l = build_lattice(1, &cfg()).unwrap();
        let spec = PlaneWaveSpec::circular(&Vec3::z(), c(1.0), c(0.3)).unwrap();
        let t = tilde_from_definition(&bg, c(-4.0), &l.cfg, 1.0 / 6.0).unwrap();
        let s = solve_foldy(&bg, &l, &t.matrix, &spec, 0.0).unwrap();
        assert_eq!(s.values[0], incident_field(&bg, &spec, &l.centers[0]));
    }

    #[test]
    fn zero_incident_zero_state() {
        let bg = ChiralBackground::new(1.0, 1.0, 0.4, 1.0).unwrap();
        let l = build_lattice(2, &cfg()).unwrap();
        let t = tilde_from_definition(&bg, c(-4.0), &l.cfg, 1.0 / 6.0).unwrap();
        let s = solve_foldy(&bg, &l, &t.matrix, &PlaneWaveSpec::zero(), 0.05).unwrap();
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn guards() {
        let bg = ChiralBackground::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let spec = PlaneWaveSpec::zero();
        assert!(matches!(
            solve_homogenized_ls(&bg, &TildeParams::zero(), 25, 0.1, &spec),
            Err(Error::Size(_))
        ));
        assert!(solve_homogenized_ls(&bg, &TildeParams::zero(), 2, 0.0, &spec).is_err());
        let l = build_lattice(1, &cfg()).unwrap();
        assert!(uniform_invertibility_stat(&l, &bg).is_err());
    }
}
