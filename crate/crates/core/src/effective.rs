//! Effective `(ε, μ, β)` of a dilute lattice of resonant particles.
//!
//! The lattice enters through the 2×2 "tilde" matrix
//! `T = ΛN^{−3a} cₙ K₀ Mₙ = [[ε̃, iωμ̃̃], [−iωε̃̃, μ̃]]`, which is then
//! inverted for the homogenized DBF parameters.

use rayon::prelude::*;
use serde::Serialize;

use crate::background::ChiralBackground;
use crate::dipole::mode_coupling;
use crate::polarization::{resonant_eps, ResonantMode};
use crate::{c, CMat2, Complex64, Error, Result, I};

/// Resonance abscissa reported for the chiral panel of the reference figure.
pub const PAPER_FIGURE_ABSCISSA: f64 = -2.94455;
/// Step used to move a sweep point off an exact singularity.
pub const SWEEP_NUDGE: f64 = 1e-12;

/// Dilute lattice scaling `δ = Λ^{1/3}N^{−1−a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiluteConfig {
    /// `Λ`.
    pub lambda_vol: f64,
    pub n: u64,
    pub a: f64,
    /// Moment constant: `Σ mₙmₙᵀ = cₙ I` over the resonant cluster.
    pub c_n: f64,
    /// Constant distribution density `Ṽ`.
    pub v_tilde: f64,
}

impl DiluteConfig {
    pub fn new(lambda_vol: f64, n: u64, a: f64, c_n: f64) -> Result<Self> {
        for (name, v) in [("Lambda", lambda_vol), ("a", a), ("c_n", c_n)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        let cfg = DiluteConfig {
            lambda_vol,
            n,
            a,
            c_n,
            v_tilde: 1.0,
        };
        let fill = cfg.fill_ratio();
        if fill >= 1.0 {
            return Err(Error::Assumption(format!(
                "dilution violated: Lambda^(1/3) N^(-a) = {fill} >= 1 (particles do not fit the lattice)"
            )));
        }
        Ok(cfg)
    }

    /// The reference figure's lattice: `Λ = 3, N = 125, a = 0.965`,
    /// `cₙ = 4π/27`.
    pub fn figure1() -> Self {
        DiluteConfig::new(3.0, 125, 0.965, 4.0 * std::f64::consts::PI / 27.0).expect("preset is dilute")
    }

    pub fn with_v_tilde(mut self, v_tilde: f64) -> Self {
        self.v_tilde = v_tilde;
        self
    }

    /// Same scaling on an `n`-per-axis lattice.
    pub fn with_n(&self, n: u64) -> Result<Self> {
        DiluteConfig::new(self.lambda_vol, n, self.a, self.c_n).map(|c| c.with_v_tilde(self.v_tilde))
    }

    /// `Λ^{1/3}N^{−a}`, particle size over lattice spacing.
    pub fn fill_ratio(&self) -> f64 {
        self.lambda_vol.cbrt() * (self.n as f64).powf(-self.a)
    }

    pub fn delta(&self) -> f64 {
        self.lambda_vol.cbrt() * (self.n as f64).powf(-1.0 - self.a)
    }

    /// `ΛN^{−3a}`.
    pub fn dilution_factor(&self) -> f64 {
        self.lambda_vol * (self.n as f64).powf(-3.0 * self.a)
    }

    /// `δ³ = ΛN^{−3a}/N³`.
    pub fn particle_volume(&self) -> f64 {
        let n = self.n as f64;
        self.dilution_factor() / (n * n * n)
    }

    pub fn mode(&self, lambda_n: f64) -> ResonantMode {
        ResonantMode::isotropic(lambda_n, self.c_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeParams {
    pub eps_t: Complex64,
    pub mu_t: Complex64,
    pub eps_tt: Complex64,
    pub mu_tt: Complex64,
    /// `[[ε̃, iωμ̃̃], [−iωε̃̃, μ̃]]` exactly as produced.
    pub matrix: CMat2,
}

impl TildeParams {
    pub fn from_matrix(matrix: CMat2, omega: f64) -> Self {
        TildeParams {
            eps_t: matrix[(0, 0)],
            mu_t: matrix[(1, 1)],
            mu_tt: matrix[(0, 1)] / (I * omega),
            eps_tt: matrix[(1, 0)] / (-I * omega),
            matrix,
        }
    }

    pub fn from_scalars(eps_t: Complex64, mu_t: Complex64, eps_tt: Complex64, mu_tt: Complex64, omega: f64) -> Self {
        TildeParams {
            eps_t,
            mu_t,
            eps_tt,
            mu_tt,
            matrix: CMat2::new(eps_t, I * omega * mu_tt, -I * omega * eps_tt, mu_t),
        }
    }

    pub fn zero() -> Self {
        TildeParams::from_matrix(CMat2::zeros(), 1.0)
    }

    /// Relative defect of `(ε̃̃ + εβγ̃)/(μ̃̃ + μβγ̃) = ε_m/μ_m`, written
    /// cross-multiplied so that it stays defined at `β_m = 0`.
    pub fn compatibility_residual(&self, bg: &ChiralBackground) -> f64 {
        let tg = bg.tilde_gamma_m;
        let lhs = (self.eps_tt + bg.eps_m * bg.beta_m * tg) * bg.mu_m;
        let rhs = (self.mu_tt + bg.mu_m * bg.beta_m * tg) * bg.eps_m;
        let scale = lhs.norm() + rhs.norm();
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).norm() / scale
        }
    }
}

/// `ΛN^{−3a}·Ṽ·cₙ·K₀Mₙ` read off as tilde parameters.
pub fn tilde_from_definition(
    bg: &ChiralBackground,
    eps_c: Complex64,
    cfg: &DiluteConfig,
    lambda_n: f64,
) -> Result<TildeParams> {
    let coupling = mode_coupling(bg, eps_c, &cfg.mode(lambda_n))?;
    Ok(TildeParams::from_matrix(
        coupling * c(cfg.dilution_factor() * cfg.v_tilde),
        bg.omega,
    ))
}

/// Common prefactor `ΛN^{−3a}cₙε_m / (1 − β²k²(½−λₙ))²`.
fn shift_base(bg: &ChiralBackground, lambda_n: f64, cfg: &DiluteConfig) -> Result<(f64, f64)> {
    let h = 0.5 - lambda_n;
    let f = 1.0 - bg.k_beta() * bg.k_beta() * h;
    if h.abs() < 1e-14 || f.abs() < 1e-14 {
        return Err(Error::Singular(format!(
            "shift prefactor singular at lambda_n = {lambda_n} (1 - k^2 beta^2 (1/2 - lambda_n) = {f})"
        )));
    }
    Ok((cfg.dilution_factor() * cfg.c_n * bg.eps_m / (f * f), h))
}

/// The displayed leading singular terms of the tilde parameters near
/// `ε*₍c,n₎`, without the O(1) remainders.
pub fn tilde_leading_order(
    bg: &ChiralBackground,
    eps_c: Complex64,
    cfg: &DiluteConfig,
    lambda_n: f64,
) -> Result<TildeParams> {
    let eps_star = resonant_eps(bg, lambda_n)?;
    let gap = eps_c - eps_star;
    if gap.norm() == 0.0 {
        return Err(Error::Singular(format!("eps_c equals the resonance {eps_star}")));
    }
    let (base, h) = shift_base(bg, lambda_n, cfg)?;
    let kb2 = bg.k_beta() * bg.k_beta();
    let pole = -1.0 / gap;
    Ok(TildeParams::from_scalars(
        pole * (base / (h * h * h)),
        pole * (base * kb2 / h),
        pole * (base * bg.eps_m * bg.beta_m / (h * h)),
        pole * (base * bg.mu_m * bg.beta_m / (h * h)),
        bg.omega,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub eps_eff: Complex64,
    pub mu_eff: Complex64,
    pub beta_eff: Complex64,
}

impl EffectiveParams {
    /// Tilde values implied by these parameters through the three defining
    /// equations (and the compatibility relation for `μ̃̃`).
    pub fn implied_tilde(&self, bg: &ChiralBackground) -> TildeParams {
        let w2 = bg.omega * bg.omega;
        let tg = bg.tilde_gamma_m;
        let d = 1.0 - w2 * self.eps_eff * self.mu_eff * self.beta_eff * self.beta_eff;
        let em = self.eps_eff * self.mu_eff * self.beta_eff;
        TildeParams::from_scalars(
            self.eps_eff / (bg.eps_m * d) - tg,
            self.mu_eff / (bg.mu_m * d) - tg,
            em / (bg.mu_m * d) - bg.eps_m * bg.beta_m * tg,
            em / (bg.eps_m * d) - bg.mu_m * bg.beta_m * tg,
            bg.omega,
        )
    }

    /// Largest relative defect in the three equations for `ε̃, μ̃, ε̃̃`.
    pub fn roundtrip_residual(&self, tilde: &TildeParams, bg: &ChiralBackground) -> f64 {
        let back = self.implied_tilde(bg);
        let tg = bg.tilde_gamma_m.abs();
        let rel = |a: Complex64, b: Complex64, shift: f64| (a - b).norm() / (b.norm() + shift);
        rel(back.eps_t, tilde.eps_t, tg)
            .max(rel(back.mu_t, tilde.mu_t, tg))
            .max(rel(back.eps_tt, tilde.eps_tt, bg.eps_m * bg.beta_m * tg + f64::MIN_POSITIVE))
    }
}

/// Solve the three tilde equations for `(ε_eff, μ_eff, β_eff)`.
pub fn invert_effective(tilde: &TildeParams, bg: &ChiralBackground) -> Result<EffectiveParams> {
    let tg = bg.tilde_gamma_m;
    let w2 = bg.omega * bg.omega;
    let ea = tilde.eps_t + tg;
    let ma = tilde.mu_t + tg;
    let eb = tilde.eps_tt + bg.eps_m * bg.beta_m * tg;
    let mb = tilde.mu_tt + bg.mu_m * bg.beta_m * tg;
    let tiny = 1e-14 * tg.abs();
    if ma.norm() <= tiny {
        return Err(Error::Singular(
            "eps_eff diverges: mu_tilde + tilde_gamma = 0 (eps_c at eps*[eps_eff])".into(),
        ));
    }
    if ea.norm() <= tiny {
        return Err(Error::Singular(
            "mu_eff diverges: eps_tilde + tilde_gamma = 0 (eps_c at eps*[mu_eff])".into(),
        ));
    }
    let eps_eff = bg.eps_m * (ea - w2 * eb * mb / ma);
    let mu_eff = bg.mu_m * (ma - w2 * mb * eb / ea);
    if mu_eff.norm() == 0.0 {
        return Err(Error::Singular("mu_eff = 0, beta_eff undefined".into()));
    }
    let beta_eff = bg.mu_m * eb / (bg.eps_m * mu_eff * ea);
    Ok(EffectiveParams {
        eps_eff,
        mu_eff,
        beta_eff,
    })
}

/// Tilde values in the `N → ∞` limit with `ε_c` placed by [`epsc_from_s`].
pub fn s_limit_tilde(bg: &ChiralBackground, lambda_n: f64, s: f64) -> TildeParams {
    let tg = bg.tilde_gamma_m;
    let h = 0.5 - lambda_n;
    let kb = bg.k_beta();
    TildeParams::from_scalars(
        c(-s * tg),
        c(-s * tg * kb * kb * h * h),
        c(-s * tg * bg.eps_m * bg.beta_m * h),
        c(-s * tg * bg.mu_m * bg.beta_m * h),
        bg.omega,
    )
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::Domain(format!("s must lie in [0, 1), got {s}")));
    }
    Ok(())
}

/// Closed-form `(ε_eff, μ_eff)` as functions of `s`:
///
/// ```text
/// ε_eff = ε_m γ̃ ((1−s) − (kβ)²(1 − s(½−λ))² / (1 − s(kβ)²(½−λ)²))
/// μ_eff = μ_m γ̃ (1 − s(kβ)²(½−λ)² − (kβ)²(1 − s(½−λ))²/(1−s))
/// ```
///
/// `β_eff = μ_mβ_m(1 − s(½−λ))/(μ_eff(1−s))`, the inversion formula applied
/// to [`s_limit_tilde`]. `s = 0` is accepted and returns the background.
pub fn effective_closed_form(bg: &ChiralBackground, lambda_n: f64, s: f64) -> Result<EffectiveParams> {
    check_s(s)?;
    let tg = bg.tilde_gamma_m;
    let h = 0.5 - lambda_n;
    let kb2 = bg.k_beta() * bg.k_beta();
    let one_sh = 1.0 - s * h;
    let eps_eff = bg.eps_m * tg * ((1.0 - s) - kb2 * one_sh * one_sh / (1.0 - s * kb2 * h * h));
    let mu_eff = bg.mu_m * tg * (1.0 - s * kb2 * h * h - kb2 * one_sh * one_sh / (1.0 - s));
    // β_eff recovered from the s-limit tilde values; non-finite where μ_eff = 0.
    let beta_eff = c(bg.mu_m * bg.beta_m * one_sh) / (c(mu_eff) * (1.0 - s));
    Ok(EffectiveParams {
        eps_eff: c(eps_eff),
        mu_eff: c(mu_eff),
        beta_eff,
    })
}

/// `ε_eff(s)` as printed in the source derivation, with `ω²μ_mβ_m` where the
/// inversion formula gives `ω²ε_mμ_mβ_m²`. Diagnostic only.
pub fn eps_eff_closed_form_as_printed(bg: &ChiralBackground, lambda_n: f64, s: f64) -> f64 {
    let h = 0.5 - lambda_n;
    let kb2 = bg.k_beta() * bg.k_beta();
    let one_sh = 1.0 - s * h;
    bg.eps_m
        * bg.tilde_gamma_m
        * ((1.0 - s) - bg.omega * bg.omega * one_sh * bg.mu_m * bg.beta_m * one_sh / (1.0 - s * kb2 * h * h))
}

pub fn is_double_negative(p: &EffectiveParams) -> bool {
    p.eps_eff.re < 0.0 && p.mu_eff.re < 0.0
}

/// Upper end of the `s` range scanned for the double-negative window.
pub const S_MAX: f64 = 0.999;

/// Smallest `s₀` such that the closed forms are double negative on all of
/// `(s₀, 0.999]`. `None` if `s = 0.999` itself is not double negative.
///
/// Scans downward on a step of `1e-5` and refines the boundary by bisection.
pub fn double_negative_threshold(bg: &ChiralBackground, lambda_n: f64) -> Result<Option<f64>> {
    let dn = |s: f64| -> Result<bool> { Ok(is_double_negative(&effective_closed_form(bg, lambda_n, s)?)) };
    if !dn(S_MAX)? {
        return Ok(None);
    }
    let step = 1e-5;
    let mut inside = S_MAX;
    let mut k = 1u32;
    loop {
        let s = S_MAX - k as f64 * step;
        if s <= 0.0 {
            return Ok(Some(if dn(0.0)? { 0.0 } else { refine(&dn, 0.0, inside)? }));
        }
        if !dn(s)? {
            return Ok(Some(refine(&dn, s, inside)?));
        }
        inside = s;
        k += 1;
    }
}

fn refine(dn: &dyn Fn(f64) -> Result<bool>, mut out: f64, mut inside: f64) -> Result<f64> {
    for _ in 0..60 {
        let mid = 0.5 * (out + inside);
        if mid <= out || mid >= inside {
            break;
        }
        if dn(mid)? {
            inside = mid;
        } else {
            out = mid;
        }
    }
    Ok(out)
}

/// `(ε*[ε_eff], ε*[μ_eff])`: where `ε_eff` and `μ_eff` diverge to leading
/// order.
pub fn shifted_resonances(bg: &ChiralBackground, lambda_n: f64, cfg: &DiluteConfig) -> Result<(Complex64, Complex64)> {
    let eps_star = resonant_eps(bg, lambda_n)?;
    let (base, h) = shift_base(bg, lambda_n, cfg)?;
    let inv_tg = 1.0 / bg.tilde_gamma_m;
    let kb2 = bg.k_beta() * bg.k_beta();
    Ok((
        eps_star + base * kb2 / h * inv_tg,
        eps_star + base / (h * h * h) * inv_tg,
    ))
}

/// `ε_c = ε* + s⁻¹ ΛN^{−3a}cₙε_m / ((½−λ)³(1 − β²k²(½−λ))²) γ̃⁻¹`.
pub fn epsc_from_s(bg: &ChiralBackground, lambda_n: f64, s: f64, cfg: &DiluteConfig) -> Result<Complex64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    let eps_star = resonant_eps(bg, lambda_n)?;
    let (base, h) = shift_base(bg, lambda_n, cfg)?;
    Ok(eps_star + base / (h * h * h) / bg.tilde_gamma_m / s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Permittivity actually evaluated (after any nudge).
    pub eps_c: f64,
    pub eps_eff: Complex64,
    pub mu_eff: Complex64,
    pub beta_eff: Complex64,
    pub double_negative: bool,
    pub out_of_assumption: bool,
    pub nudged: bool,
    /// Set when the point could not be evaluated even after nudging.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    /// `argmax |ε_eff|`.
    pub resonance_abscissa: f64,
    pub max_abs_eps_eff: f64,
    /// `argmax |μ_eff|`.
    pub mu_resonance_abscissa: f64,
    pub max_abs_mu_eff: f64,
    pub paper_abscissa: f64,
    pub abscissa_deviation: f64,
    pub eps_star: f64,
    pub eps_star_eps_eff: f64,
    pub eps_star_mu_eff: f64,
    /// Contiguous runs of double-negative grid points, `[first, last]`.
    pub double_negative_intervals: Vec<[f64; 2]>,
    pub nudged_points: Vec<f64>,
    pub failed_points: Vec<f64>,
    pub out_of_assumption: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

fn sweep_point(bg: &ChiralBackground, cfg: &DiluteConfig, lambda_n: f64, eps_c: f64) -> Result<EffectiveParams> {
    let tilde = tilde_from_definition(bg, c(eps_c), cfg, lambda_n)?;
    invert_effective(&tilde, bg)
}

/// `ε_eff, μ_eff` over a real `ε_c` grid using the exact `K₀Mₙ` product.
///
/// Points where the evaluation is singular are moved by [`SWEEP_NUDGE`]
/// (up to three times) and flagged; results are in grid order.
pub fn sweep_figure(
    bg: &ChiralBackground,
    cfg: &DiluteConfig,
    lambda_n: f64,
    eps_c_grid: &[f64],
) -> Result<SweepResult> {
    if eps_c_grid.is_empty() {
        return Err(Error::Domain("empty eps_c grid".into()));
    }
    let rows: Vec<SweepRow> = eps_c_grid
        .par_iter()
        .map(|&e0| {
            let mut e = e0;
            let mut nudged = false;
            let mut last_err = None;
            for attempt in 0..4 {
                if attempt > 0 {
                    e = e0 + attempt as f64 * SWEEP_NUDGE * e0.abs().max(1.0);
                    nudged = true;
                }
                match sweep_point(bg, cfg, lambda_n, e) {
                    Ok(p) => {
                        return SweepRow {
                            eps_c: e,
                            eps_eff: p.eps_eff,
                            mu_eff: p.mu_eff,
                            beta_eff: p.beta_eff,
                            double_negative: is_double_negative(&p),
                            out_of_assumption: bg.out_of_assumption,
                            nudged,
                            failure: None,
                        }
                    }
                    Err(err) => last_err = Some(err.to_string()),
                }
            }
            let nan = Complex64::new(f64::NAN, f64::NAN);
            SweepRow {
                eps_c: e0,
                eps_eff: nan,
                mu_eff: nan,
                beta_eff: nan,
                double_negative: false,
                out_of_assumption: bg.out_of_assumption,
                nudged,
                failure: last_err,
            }
        })
        .collect();

    let argmax = |f: &dyn Fn(&SweepRow) -> f64| -> (f64, f64) {
        rows.iter()
            .filter(|r| r.failure.is_none())
            .map(|r| (r.eps_c, f(r)))
            .fold((f64::NAN, -1.0), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc })
    };
    let (res_x, res_v) = argmax(&|r| r.eps_eff.norm());
    let (mres_x, mres_v) = argmax(&|r| r.mu_eff.norm());

    let mut intervals: Vec<[f64; 2]> = Vec::new();
    let mut open: Option<[f64; 2]> = None;
    for r in &rows {
        if r.double_negative {
            open = Some(match open {
                Some([a, _]) => [a, r.eps_c],
                None => [r.eps_c, r.eps_c],
            });
        } else if let Some(iv) = open.take() {
            intervals.push(iv);
        }
    }
    intervals.extend(open);

    let eps_star = resonant_eps(bg, lambda_n)?.re;
    let (se, sm) = shifted_resonances(bg, lambda_n, cfg)?;
    let summary = SweepSummary {
        points: rows.len(),
        resonance_abscissa: res_x,
        max_abs_eps_eff: res_v,
        mu_resonance_abscissa: mres_x,
        max_abs_mu_eff: mres_v,
        paper_abscissa: PAPER_FIGURE_ABSCISSA,
        abscissa_deviation: res_x - PAPER_FIGURE_ABSCISSA,
        eps_star,
        eps_star_eps_eff: se.re,
        eps_star_mu_eff: sm.re,
        double_negative_intervals: intervals,
        nudged_points: rows.iter().filter(|r| r.nudged).map(|r| r.eps_c).collect(),
        failed_points: rows.iter().filter(|r| r.failure.is_some()).map(|r| r.eps_c).collect(),
        out_of_assumption: bg.out_of_assumption,
    };
    Ok(SweepResult { rows, summary })
}

/// Grid for the reference figure: `coarse` uniform points on `[−4, −1]`
/// merged with `fine` uniform points on `ε* ± 4W`, where `W` is the larger
/// resonance shift magnitude. Sorted, duplicates removed.
pub fn figure_grid(bg: &ChiralBackground, cfg: &DiluteConfig, lambda_n: f64, coarse: usize, fine: usize) -> Result<Vec<f64>> {
    let eps_star = resonant_eps(bg, lambda_n)?.re;
    let (se, sm) = shifted_resonances(bg, lambda_n, cfg)?;
    let w = (se.re - eps_star).abs().max((sm.re - eps_star).abs()).max(1e-12);
    let mut grid = linspace(-4.0, -1.0, coarse);
    grid.extend(linspace(eps_star - 4.0 * w, eps_star + 4.0 * w, fine));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
