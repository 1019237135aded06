//! Mode matrices `Aₙ`, dipole matrices `Mₙ`, resonant permittivities and the
//! polarization tensor of a plasmonic particle in the chiral background.

use serde::Serialize;

use crate::background::ChiralBackground;
use crate::mesh::{signed_volume, TriMesh};
use crate::np_spectral::{ModeCluster, NPSpectrum};
use crate::{c, CMat2, CMat3, CMat6, Complex64, Error, Matrix3, Result, I};

/// `|det Aₙ|` below this is treated as an exact resonance.
pub const NEAR_SINGULAR: f64 = 1e-14;
/// Modes with `|mₙ| < MOMENT_CUTOFF·max|m|` do not enter the tensor.
pub const MOMENT_CUTOFF: f64 = 1e-6;

/// The four scalars entering `Aₙ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub lambda_eps: Complex64,
    /// Infinite on the `β_m = 0` path.
    pub lambda_mu: Complex64,
    pub d_eps: Complex64,
    pub d_mu: Complex64,
    /// `β_m = 0` with the verbatim `μ` numerator: `λ_μ` is infinite and
    /// `Aₙ` is replaced by its diagonal limit.
    pub degenerate: bool,
}

/// `λ_ε, λ_μ, d_ε, d_μ` with `μ_c = μ_m`.
pub fn mode_params(bg: &ChiralBackground, eps_c: Complex64) -> Result<ModeParams> {
    mode_params_with(bg, eps_c, bg.mu_m)
}

/// As [`mode_params`] with a hypothetical particle permeability `mu_c` in the
/// `λ_μ`, `d_μ` expressions.
pub fn mode_params_with(bg: &ChiralBackground, eps_c: Complex64, mu_c: f64) -> Result<ModeParams> {
    let dfac = 1.0 + bg.gamma_m_sq * bg.beta_m * bg.beta_m;
    let den_e = eps_c - bg.eps_m * dfac;
    if den_e.norm() <= NEAR_SINGULAR * (eps_c.norm() + bg.eps_m * dfac) {
        return Err(Error::Singular(format!(
            "lambda_eps denominator eps_c - eps_m(1 + gamma_m^2 beta_m^2) vanishes at eps_c = {eps_c}"
        )));
    }
    let num = bg.eps_m * bg.mu_m * bg.beta_m * bg.tilde_gamma_m;
    let lambda_eps = (eps_c + bg.eps_m * dfac) / (2.0 * den_e);
    let d_eps = c(num) / den_e;

    let den_m = mu_c - bg.mu_m * dfac;
    if den_m.abs() <= NEAR_SINGULAR * (mu_c.abs() + bg.mu_m * dfac) {
        if bg.beta_m == 0.0 {
            return Ok(ModeParams {
                lambda_eps,
                lambda_mu: c(f64::INFINITY),
                d_eps,
                d_mu: c(0.0),
                degenerate: true,
            });
        }
        return Err(Error::Singular(format!(
            "lambda_mu denominator mu_c - mu_m(1 + gamma_m^2 beta_m^2) vanishes (mu_c = {mu_c})"
        )));
    }
    Ok(ModeParams {
        lambda_eps,
        lambda_mu: c((mu_c + bg.mu_m * dfac) / (2.0 * den_m)),
        d_eps,
        d_mu: c(num / den_m),
        degenerate: false,
    })
}

/// `Aₙ`, its determinant and `Mₙ = −Aₙ⁻¹[[1, −iωd_ε], [iωd_μ, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix {
    pub lambda_n: f64,
    pub a: CMat2,
    pub det_direct: Complex64,
    /// `None` when `det_direct` is exactly zero.
    pub m_blocks: Option<CMat2>,
    pub degenerate: bool,
}

impl ModeMatrix {
    /// The function whose zeros are the resonances: `det Aₙ`, or `λ_ε − λₙ`
    /// on the degenerate path.
    pub fn resonance_function(&self) -> Complex64 {
        if self.degenerate {
            self.a[(0, 0)]
        } else {
            self.det_direct
        }
    }
}

pub fn assemble_a_n(params: &ModeParams, lambda_n: f64, omega: f64) -> ModeMatrix {
    let half_plus = 0.5 + lambda_n;
    let a11 = params.lambda_eps - lambda_n;
    if params.degenerate {
        let m = (a11.norm() > 0.0).then(|| CMat2::new(-1.0 / a11, c(0.0), c(0.0), c(0.0)));
        return ModeMatrix {
            lambda_n,
            a: CMat2::new(a11, c(0.0), c(0.0), c(f64::INFINITY)),
            det_direct: c(f64::INFINITY),
            m_blocks: m,
            degenerate: true,
        };
    }
    let a = CMat2::new(
        a11,
        I * omega * params.d_eps * half_plus,
        -I * omega * params.d_mu * half_plus,
        params.lambda_mu - lambda_n,
    );
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let m_blocks = (det.norm() > 0.0).then(|| {
        let inv = CMat2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
        -inv * rhs_matrix(params, omega)
    });
    ModeMatrix {
        lambda_n,
        a,
        det_direct: det,
        m_blocks,
        degenerate: false,
    }
}

/// `[[1, −iωd_ε], [iωd_μ, 1]]`.
pub fn rhs_matrix(params: &ModeParams, omega: f64) -> CMat2 {
    CMat2::new(
        c(1.0),
        -I * omega * params.d_eps,
        I * omega * params.d_mu,
        c(1.0),
    )
}

/// `ε*₍c,n₎ = −ε_m (½+λₙ)/(½−λₙ) / (1 − k²β²(½−λₙ))`.
pub fn resonant_eps(bg: &ChiralBackground, lambda_n: f64) -> Result<Complex64> {
    let half_minus = 0.5 - lambda_n;
    let kb2 = bg.k_beta() * bg.k_beta();
    let factor = 1.0 - kb2 * half_minus;
    if half_minus.abs() < NEAR_SINGULAR || factor.abs() < NEAR_SINGULAR {
        return Err(Error::Singular(format!(
            "resonant permittivity undefined for lambda_n = {lambda_n} (1 - k^2 beta^2 (1/2 - lambda_n) = {factor})"
        )));
    }
    Ok(c(-bg.eps_m * (0.5 + lambda_n) / half_minus / factor))
}

/// The displayed factorization of `det Aₙ`, evaluated verbatim. Diagnostic
/// only: [`ModeMatrix::det_direct`] is authoritative.
pub fn det_closed_form(bg: &ChiralBackground, eps_c: Complex64, lambda_n: f64) -> Result<Complex64> {
    if bg.beta_m == 0.0 {
        return Err(Error::Domain(
            "closed-form determinant is undefined at beta_m = 0; use det_direct".into(),
        ));
    }
    let kb2 = bg.k_beta() * bg.k_beta();
    let hm = 0.5 - lambda_n;
    let eps_star = resonant_eps(bg, lambda_n)?;
    let den = (1.0 - kb2) * eps_c - bg.eps_m;
    if den.norm() == 0.0 {
        return Err(Error::Singular("closed-form determinant denominator vanishes".into()));
    }
    Ok(-hm * (1.0 - kb2 * hm) * (1.0 - kb2) / kb2 * (eps_c - eps_star) / den)
}

/// How to search for a zero of the resonance function in `ε_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootSearch {
    /// Bisection on a real interval with a sign change.
    Bracket(f64, f64),
    /// Complex secant from two starting points.
    Secant(Complex64, Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootReport {
    pub root_re: f64,
    pub root_im: f64,
    /// `|resonance function|` at the root.
    pub residual: f64,
    pub iterations: usize,
}

impl RootReport {
    pub fn root(&self) -> Complex64 {
        Complex64::new(self.root_re, self.root_im)
    }
}

const ROOT_TOL: f64 = 1e-10;
const ROOT_MAX_ITER: usize = 200;

/// Zero of `det Aₙ(ε_c)` (or of `λ_ε − λₙ` when `β_m = 0`).
///
/// Bisection stops at `|f| < 1e-10`. If the bracket shrinks to machine
/// precision first, the midpoint is accepted when `|f|` is below `1e-10`
/// relative to the endpoint values; otherwise the search fails.
pub fn find_resonance_root(bg: &ChiralBackground, lambda_n: f64, search: RootSearch) -> Result<RootReport> {
    let f = |z: Complex64| -> Result<Complex64> {
        let p = mode_params(bg, z)?;
        Ok(assemble_a_n(&p, lambda_n, bg.omega).resonance_function())
    };
    match search {
        RootSearch::Bracket(a, b) => {
            let (mut lo, mut hi) = (a.min(b), a.max(b));
            let flo0 = f(c(lo))?.re;
            let fhi0 = f(c(hi))?.re;
            if flo0 == 0.0 {
                return Ok(report(c(lo), 0.0, 0));
            }
            if fhi0 == 0.0 {
                return Ok(report(c(hi), 0.0, 0));
            }
            if flo0.signum() == fhi0.signum() {
                return Err(Error::Convergence(format!(
                    "no sign change of the resonance function on [{lo}, {hi}]"
                )));
            }
            let mut flo = flo0;
            let scale = flo0.abs().max(fhi0.abs()).max(1.0);
            for it in 1..=ROOT_MAX_ITER {
                let mid = 0.5 * (lo + hi);
                let fm = f(c(mid))?;
                if fm.norm() < ROOT_TOL {
                    return Ok(report(c(mid), fm.norm(), it));
                }
                if mid <= lo || mid >= hi {
                    if fm.norm() < ROOT_TOL * scale {
                        return Ok(report(c(mid), fm.norm(), it));
                    }
                    return Err(Error::Convergence(format!(
                        "bracket collapsed at {mid} with |f| = {:e}",
                        fm.norm()
                    )));
                }
                if fm.re.signum() == flo.signum() {
                    lo = mid;
                    flo = fm.re;
                } else {
                    hi = mid;
                }
            }
            Err(Error::Convergence(format!("bisection did not converge in {ROOT_MAX_ITER} iterations")))
        }
        RootSearch::Secant(z0, z1) => {
            let (mut za, mut zb) = (z0, z1);
            let mut fa = f(za)?;
            let mut fb = f(zb)?;
            for it in 1..=ROOT_MAX_ITER {
                if fb.norm() < ROOT_TOL {
                    return Ok(report(zb, fb.norm(), it));
                }
                let den = fb - fa;
                if den.norm() == 0.0 {
                    break;
                }
                let zn = zb - fb * (zb - za) / den;
                za = zb;
                fa = fb;
                zb = zn;
                fb = f(zb)?;
            }
            if fb.norm() < ROOT_TOL {
                return Ok(report(zb, fb.norm(), ROOT_MAX_ITER));
            }
            Err(Error::Convergence(format!(
                "secant did not converge in {ROOT_MAX_ITER} iterations (|f| = {:e})",
                fb.norm()
            )))
        }
    }
}

fn report(z: Complex64, residual: f64, iterations: usize) -> RootReport {
    RootReport {
        root_re: z.re,
        root_im: z.im,
        residual,
        iterations,
    }
}

/// One resonant mode as seen by the dipole and effective-medium formulas:
/// an eigenvalue and the moment tensor `Σ mₙmₙᵀ` of its cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantMode {
    pub lambda: f64,
    pub moment_tensor: Matrix3<f64>,
}

impl ResonantMode {
    /// Mode with moment tensor `c_n·I`.
    pub fn isotropic(lambda: f64, c_n: f64) -> Self {
        ResonantMode {
            lambda,
            moment_tensor: Matrix3::identity() * c_n,
        }
    }

    pub fn from_cluster(cluster: &ModeCluster) -> Self {
        ResonantMode {
            lambda: cluster.lambda,
            moment_tensor: cluster.moment_tensor,
        }
    }

    /// `tr(moment tensor)/3`.
    pub fn c_n(&self) -> f64 {
        self.moment_tensor.trace() / 3.0
    }

    /// `Mₙ` at `eps_c`, failing near resonance.
    pub fn m_blocks(&self, bg: &ChiralBackground, eps_c: Complex64) -> Result<CMat2> {
        match mode_params(bg, eps_c) {
            Ok(params) => checked_blocks(&assemble_a_n(&params, self.lambda, bg.omega), eps_c),
            Err(Error::Singular(msg)) if msg.starts_with("lambda_eps") => no_contrast_blocks(bg, self.lambda),
            Err(e) => Err(e),
        }
    }
}

/// `Mₙ` at `ε_c = ε_m(1 + γ_m²β_m²)`, where `λ_ε` and `d_ε` are infinite.
/// Multiplying the first rows of `Aₙ` and of the right side by
/// `ε_c − ε_m(1 + γ_m²β_m²) = 0` leaves a finite system.
fn no_contrast_blocks(bg: &ChiralBackground, lambda_n: f64) -> Result<CMat2> {
    if bg.beta_m == 0.0 {
        return Ok(CMat2::zeros());
    }
    let dfac = 1.0 + bg.gamma_m_sq * bg.beta_m * bg.beta_m;
    let num = bg.eps_m * bg.mu_m * bg.beta_m * bg.tilde_gamma_m;
    let w = bg.omega;
    let den_m = bg.mu_m - bg.mu_m * dfac;
    let lambda_mu = (bg.mu_m + bg.mu_m * dfac) / (2.0 * den_m);
    let d_mu = num / den_m;
    let a = CMat2::new(
        c(bg.eps_m * dfac),
        I * w * num * (0.5 + lambda_n),
        -I * w * d_mu * (0.5 + lambda_n),
        c(lambda_mu - lambda_n),
    );
    let r = CMat2::new(c(0.0), -I * w * num, I * w * d_mu, c(1.0));
    let inv = a.try_inverse().ok_or_else(|| Error::Singular(format!("scaled A_n singular at lambda_n = {lambda_n}")))?;
    Ok(-inv * r)
}

fn checked_blocks(mm: &ModeMatrix, eps_c: Complex64) -> Result<CMat2> {
    let det_abs = mm.resonance_function().norm();
    match mm.m_blocks {
        Some(m) if det_abs >= NEAR_SINGULAR => Ok(m),
        _ => Err(Error::NearSingularMode {
            eps_c,
            lambda_n: mm.lambda_n,
            det_abs,
        }),
    }
}

/// 6×6 polarization tensor with 3×3 blocks `M^{EE}, M^{EH}, M^{HE}, M^{HH}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationTensor {
    pub m: CMat6,
    /// `|B| I₆ + M`.
    pub m_tilde: CMat6,
    pub volume: f64,
}

impl PolarizationTensor {
    /// Block `(row, col)` with 0 = E, 1 = H.
    pub fn block(&self, row: usize, col: usize) -> CMat3 {
        self.m.fixed_view::<3, 3>(3 * row, 3 * col).into_owned()
    }
}

/// `Σₙ Mₙ[a,b]·mₙmₙᵀ` over retained modes with non-negligible moments.
pub fn polarization_tensor(
    spectrum: &NPSpectrum,
    bg: &ChiralBackground,
    eps_c: Complex64,
    mesh: &TriMesh,
) -> Result<PolarizationTensor> {
    let params = mode_params(bg, eps_c)?;
    let max_m = spectrum.moments.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let mut m6 = CMat6::zeros();
    for (lambda, mom) in spectrum.eigenvalues.iter().zip(&spectrum.moments) {
        if mom.norm() < MOMENT_CUTOFF * max_m {
            continue;
        }
        let mm = assemble_a_n(&params, *lambda, bg.omega);
        let blocks = checked_blocks(&mm, eps_c)?;
        let outer = (mom * mom.transpose()).map(c);
        for a in 0..2 {
            for b in 0..2 {
                let mut view = m6.fixed_view_mut::<3, 3>(3 * a, 3 * b);
                view += outer * blocks[(a, b)];
            }
        }
    }
    let volume = signed_volume(mesh);
    Ok(PolarizationTensor {
        m: m6,
        m_tilde: CMat6::identity() * c(volume) + m6,
        volume,
    })
}

/// `(tr T / 3) I₃`.
pub fn orientation_average(t: &CMat3) -> CMat3 {
    CMat3::identity() * (t.trace() / 3.0)
}

/// Drude permittivity `1 − ω_p²/(ω² + iτω)`.
pub fn drude_eps(omega: f64, omega_p: f64, tau: f64) -> Complex64 {
    1.0 - omega_p * omega_p / Complex64::new(omega * omega, tau * omega)
}

/// Real `ω` with `Re ε_Drude(ω) = target`, i.e.
/// `ω² = ω_p²/(1 − target) − τ²`. `None` when no positive root exists.
pub fn drude_frequency(omega_p: f64, tau: f64, target: f64) -> Option<f64> {
    if target >= 1.0 {
        return None;
    }
    let w2 = omega_p * omega_p / (1.0 - target) - tau * tau;
    (w2 > 0.0).then(|| w2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bg(beta: f64) -> ChiralBackground {
        ChiralBackground::new(1.0, 1.0, beta, 1.0).unwrap()
    }

    #[test]
    fn params_beta_zero() {
        let p = mode_params(&bg(0.0), c(-2.0)).unwrap();
        assert!((p.lambda_eps - 1.0 / 6.0).norm() < 1e-15);
        assert_eq!(p.d_eps, c(0.0));
        assert_eq!(p.d_mu, c(0.0));
        assert!(p.degenerate && p.lambda_mu.norm() > 1e12);
    }

    #[test]
    fn params_beta_half() {
        let p = mode_params(&bg(0.5), c(-3.0)).unwrap();
        assert!((p.lambda_eps - 5.0 / 26.0).norm() < 1e-15);
        assert!(!p.degenerate);
    }

    #[test]
    fn params_singular_denominator() {
        // eps_c = eps_m (1 + gamma^2 beta^2) = 4/3 at beta = 0.5.
        assert!(matches!(mode_params(&bg(0.5), c(4.0 / 3.0)), Err(Error::Singular(_))));
    }

    #[test]
    fn diagonal_a_has_product_determinant() {
        let p = ModeParams {
            lambda_eps: Complex64::new(0.3, 0.1),
            lambda_mu: Complex64::new(-2.0, 0.0),
            d_eps: c(0.0),
            d_mu: c(0.0),
            degenerate: false,
        };
        let m = assemble_a_n(&p, 0.1, 1.0);
        assert_eq!(m.det_direct, (p.lambda_eps - 0.1) * (p.lambda_mu - 0.1));
    }

    #[test]
    fn degenerate_blocks() {
        let p = mode_params(&bg(0.0), c(3.0)).unwrap();
        let m = assemble_a_n(&p, 1.0 / 6.0, 1.0);
        let blocks = m.m_blocks.unwrap();
        // -1/(lambda_eps - 1/6) = -3(eps_c - 1)/(eps_c + 2).
        assert!((blocks[(0, 0)] + 3.0 * 2.0 / 5.0).norm() < 1e-14);
        assert_eq!(blocks[(0, 1)], c(0.0));
        assert_eq!(blocks[(1, 0)], c(0.0));
        assert_eq!(blocks[(1, 1)], c(0.0));
    }

    #[test]
    fn resonant_eps_examples() {
        assert!((resonant_eps(&bg(0.0), 1.0 / 6.0).unwrap() + 2.0).norm() < 1e-15);
        let e = resonant_eps(&bg(0.5), 1.0 / 6.0).unwrap();
        assert!((e + 24.0 / 11.0).norm() < 1e-14);
        assert!(e.im == 0.0 && e.re < 0.0);
    }

    #[test]
    fn closed_form_vanishes_at_resonance() {
        let b = bg(0.4);
        let es = resonant_eps(&b, 0.12).unwrap();
        assert_eq!(det_closed_form(&b, es, 0.12).unwrap(), c(0.0));
        assert!(det_closed_form(&bg(0.0), c(-2.0), 0.1).is_err());
    }

    #[test]
    fn beta_zero_root() {
        let r = find_resonance_root(&bg(0.0), 1.0 / 6.0, RootSearch::Bracket(-3.0, -1.0)).unwrap();
        assert!((r.root() + 2.0).norm() < 1e-10);
    }

    #[test]
    fn root_satisfies_postcondition() {
        let b = bg(0.5);
        let r = find_resonance_root(&b, 1.0 / 6.0, RootSearch::Bracket(-3.0, -1.5)).unwrap();
        assert!(r.residual < 1e-10);
        let es = resonant_eps(&b, 1.0 / 6.0).unwrap();
        assert!((r.root() - es).norm() < 1e-9, "{} vs {es}", r.root());
    }

    #[test]
    fn secant_finds_complex_root() {
        let b = bg(0.3);
        let r = find_resonance_root(
            &b,
            0.1,
            RootSearch::Secant(Complex64::new(-1.7, 0.1), Complex64::new(-1.6, 0.05)),
        )
        .unwrap();
        assert!(r.residual < 1e-10);
        let es = resonant_eps(&b, 0.1).unwrap();
        assert!((r.root() - es).norm() < 1e-8);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        assert!(matches!(
            find_resonance_root(&bg(0.0), 1.0 / 6.0, RootSearch::Bracket(-1.5, -1.0)),
            Err(Error::Convergence(_))
        ));
    }

    #[test]
    fn orientation_average_examples() {
        assert_eq!(orientation_average(&CMat3::identity()), CMat3::identity());
        let d = CMat3::from_diagonal(&crate::CVec3::new(c(1.0), c(0.0), c(0.0)));
        assert!((orientation_average(&d) - CMat3::identity() * c(1.0 / 3.0)).norm() < 1e-16);
    }

    #[test]
    fn drude_examples() {
        assert_eq!(drude_eps(1.0, 1.0, 0.0), c(0.0));
        assert!((drude_eps(0.5, 1.0, 0.0) + 3.0).norm() < 1e-15);
        assert!((drude_eps(1e8, 1.0, 0.1) - 1.0).norm() < 1e-15);
        let w = drude_frequency(1.0, 0.0, -2.0).unwrap();
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let w = drude_frequency(1.0, 0.05, -2.0).unwrap();
        assert!((drude_eps(w, 1.0, 0.05).re + 2.0).abs() < 1e-12);
        assert!(drude_frequency(1.0, 0.0, 2.0).is_none());
    }
}
