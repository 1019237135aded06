//! The chiral Drude–Born–Fedorov background medium.
//!
//! With `D = ε(E + β∇×E)`, `B = μ(H + β∇×H)` the time-harmonic system reads
//!
//! ```text
//! ∇×E = γ_m²β E + iωμ(γ_m/k)² H
//! ∇×H = γ_m²β H − iωε(γ_m/k)² E
//! ```
//!
//! with `k = ω√(εμ)` and `γ_m² = k²/(1 − k²β²)`. Fields split into two
//! Beltrami modes, `∇×Q₁ = γ₁Q₁` and `∇×Q₂ = −γ₂Q₂`, with
//! `γ₁ = k/(1 − kβ)` and `γ₂ = k/(1 + kβ)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::{c, kron_i3, CMat2, CMat3, CMat6, CVec3, CVec6, Complex64, Error, Result, Vec3, I};

/// Background constants. Build with [`ChiralBackground::new`] or
/// [`ChiralBackground::with_override`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiralBackground {
    pub eps_m: f64,
    pub mu_m: f64,
    pub beta_m: f64,
    pub omega: f64,
    pub k_m: f64,
    pub gamma_m_sq: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    pub tilde_gamma_m: f64,
    /// `√(μ_m/ε_m)`.
    pub tau_m: f64,
    /// Set when `k_mβ_m ≥ 1` was admitted through the override.
    pub out_of_assumption: bool,
}

impl ChiralBackground {
    /// Background with the standing assumption `k_mβ_m < 1` enforced.
    pub fn new(eps_m: f64, mu_m: f64, beta_m: f64, omega: f64) -> Result<Self> {
        Self::with_override(eps_m, mu_m, beta_m, omega, false)
    }

    /// As [`new`](Self::new), but `k_mβ_m ≥ 1` is accepted when
    /// `allow_kbeta_ge_1` is set. Such backgrounds carry
    /// `out_of_assumption = true`. `k_mβ_m = 1` is always rejected.
    pub fn with_override(
        eps_m: f64,
        mu_m: f64,
        beta_m: f64,
        omega: f64,
        allow_kbeta_ge_1: bool,
    ) -> Result<Self> {
        for (name, v) in [("eps_m", eps_m), ("mu_m", mu_m), ("omega", omega)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(beta_m >= 0.0 && beta_m.is_finite()) {
            return Err(Error::Domain(format!("beta_m must be nonnegative, got {beta_m}")));
        }
        let k_m = omega * (eps_m * mu_m).sqrt();
        let kb = k_m * beta_m;
        let one_minus = 1.0 - kb * kb;
        if one_minus == 0.0 || (1.0 - kb) == 0.0 {
            return Err(Error::Singular(format!(
                "k_m*beta_m = 1 makes the DBF coefficients infinite (k_m = {k_m}, beta_m = {beta_m})"
            )));
        }
        let out_of_assumption = kb >= 1.0;
        if out_of_assumption && !allow_kbeta_ge_1 {
            return Err(Error::Assumption(format!(
                "k_m*beta_m = {kb} >= 1; the model assumes k_m*beta_m < 1 (pass the override to proceed)"
            )));
        }
        Ok(ChiralBackground {
            eps_m,
            mu_m,
            beta_m,
            omega,
            k_m,
            gamma_m_sq: k_m * k_m / one_minus,
            gamma_1: k_m / (1.0 - kb),
            gamma_2: k_m / (1.0 + kb),
            omega_1: omega / (1.0 - kb),
            omega_2: omega / (1.0 + kb),
            tilde_gamma_m: 1.0 / one_minus,
            tau_m: (mu_m / eps_m).sqrt(),
            out_of_assumption,
        })
    }

    /// `k_mβ_m`.
    pub fn k_beta(&self) -> f64 {
        self.k_m * self.beta_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    /// `p×q = −iq`, the `γ₁` mode.
    Left,
    /// `p×q = +iq`, the `γ₂` mode.
    Right,
}

/// A circularly polarized orthonormal pair `(p, q)` for a propagation
/// direction. `q = (e₁' ± i e₂')/√2` with `(e₁', e₂', p)` right-handed.
pub fn make_circular_basis(direction: &Vec3, handedness: Handedness) -> Result<(CVec3, CVec3)> {
    let n = direction.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain("propagation direction must be nonzero".into()));
    }
    let d = direction / n;
    // Seed with the axis least aligned with d.
    let axis = d.iamin();
    let mut seed = Vec3::zeros();
    seed[axis] = 1.0;
    let e1 = (seed - d * d.dot(&seed)).normalize();
    let e2 = d.cross(&e1);
    let sign = match handedness {
        Handedness::Left => 1.0,
        Handedness::Right => -1.0,
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = e1.map(|v| c(v * s)) + e2.map(|v| Complex64::new(0.0, sign * v * s));
    Ok((d.map(c), q))
}

/// Incident field `q₁e^{iγ₁p₁·x} + q₂e^{iγ₂p₂·x}` with `(p₁,q₁)` left and
/// `(p₂,q₂)` right circular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveSpec {
    pub p1: CVec3,
    pub q1: CVec3,
    pub p2: CVec3,
    pub q2: CVec3,
}

impl PlaneWaveSpec {
    pub fn new(p1: CVec3, q1: CVec3, p2: CVec3, q2: CVec3) -> Result<Self> {
        let tol = 1e-12;
        let check = |p: &CVec3, q: &CVec3, sign: f64, which: &str| -> Result<()> {
            let scale = q.norm().max(1.0);
            let dot = p.dot(q).norm();
            let cross = (p.cross(q) - q * Complex64::new(0.0, sign)).norm();
            if dot > tol * scale || cross > tol * scale {
                return Err(Error::Domain(format!(
                    "{which} pair is not circularly polarized (|p.q| = {dot:e}, |p x q - {}iq| = {cross:e})",
                    if sign > 0.0 { "+" } else { "-" }
                )));
            }
            Ok(())
        };
        check(&p1, &q1, -1.0, "(p1, q1)")?;
        check(&p2, &q2, 1.0, "(p2, q2)")?;
        Ok(PlaneWaveSpec { p1, q1, p2, q2 })
    }

    /// Co-propagating left and right components with complex amplitudes.
    pub fn circular(direction: &Vec3, left: Complex64, right: Complex64) -> Result<Self> {
        let (p, ql) = make_circular_basis(direction, Handedness::Left)?;
        let (_, qr) = make_circular_basis(direction, Handedness::Right)?;
        Ok(PlaneWaveSpec {
            p1: p,
            q1: ql * left,
            p2: p,
            q2: qr * right,
        })
    }

    pub fn zero() -> Self {
        PlaneWaveSpec {
            p1: CVec3::new(c(0.0), c(0.0), c(1.0)),
            q1: CVec3::zeros(),
            p2: CVec3::new(c(0.0), c(0.0), c(1.0)),
            q2: CVec3::zeros(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        PlaneWaveSpec {
            q1: self.q1 * factor,
            q2: self.q2 * factor,
            ..*self
        }
    }
}

/// `(E, H)` of the incident plane wave at `x`.
///
/// The left component carries `H = −i√(ε_m/μ_m) E` and the right one
/// `H = +i√(ε_m/μ_m) E`; each sign is the one that makes its component solve
/// the DBF system.
pub fn incident_field(bg: &ChiralBackground, spec: &PlaneWaveSpec, x: &Vec3) -> CVec6 {
    let xc = x.map(c);
    let e1 = spec.q1 * (I * bg.gamma_1 * spec.p1.dot(&xc)).exp();
    let e2 = spec.q2 * (I * bg.gamma_2 * spec.p2.dot(&xc)).exp();
    let inv_tau = 1.0 / bg.tau_m;
    let e = e1 + e2;
    let h = e1 * Complex64::new(0.0, -inv_tau) + e2 * Complex64::new(0.0, inv_tau);
    crate::stack(&e, &h)
}

/// Radial profile of `g_η(r) = e^{iγr}/(4πr + η)` and its first two
/// derivatives in `r`.
fn radial_kernel(gamma: f64, r: f64, eta: f64) -> (Complex64, Complex64, Complex64) {
    let four_pi = 4.0 * PI;
    let d = four_pi * r + eta;
    let e = (I * gamma * r).exp();
    let ig = I * gamma;
    let f = e / d;
    let f1 = ig * e / d - four_pi * e / (d * d);
    let f2 = -gamma * gamma * e / d - 2.0 * ig * four_pi * e / (d * d)
        + 2.0 * four_pi * four_pi * e / (d * d * d);
    (f, f1, f2)
}

fn cross_matrix(v: &CVec3) -> CMat3 {
    let z = c(0.0);
    CMat3::new(z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z)
}

/// One Beltrami block `𝒢ⱼ`:
/// `(γ²/ω_j)·[[D, iτ/γ C], [−i/(τγ) C, D]]`, `D = g I + ∇∇g/γ²`,
/// `C = [∇g]×`.
fn beltrami_block(gamma: f64, omega_j: f64, tau: f64, x: &Vec3, eta: f64) -> CMat6 {
    let r = x.norm();
    let (d, cm) = if r < ORIGIN_RADIUS {
        // Only reachable with η > 0: the cusp of g_η at the origin has no
        // classical gradient, keep the finite value g_η(0) = 1/η.
        (CMat3::identity() * c(1.0 / eta), CMat3::zeros())
    } else {
        let (f, f1, f2) = radial_kernel(gamma, r, eta);
        let rh = x / r;
        let rr = (rh * rh.transpose()).map(c);
        let hess = rr * f2 + (CMat3::identity() - rr) * (f1 / r);
        let d = CMat3::identity() * f + hess * c(1.0 / (gamma * gamma));
        let grad = rh.map(|v| f1 * v);
        (d, cross_matrix(&grad))
    };
    let mut out = CMat6::zeros();
    let eh = cm * (I * tau / gamma);
    let he = cm * (-I / (tau * gamma));
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&d);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&eh);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&he);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&d);
    out * c(gamma * gamma / omega_j)
}

/// Points closer than this to the source are treated as the origin.
pub const ORIGIN_RADIUS: f64 = 1e-12;

/// Outgoing fundamental solution `G = ½(𝒢₁A₁ + 𝒢₂A₂)` of the DBF system.
pub fn green_dyadic(bg: &ChiralBackground, x: &Vec3) -> Result<CMat6> {
    if x.norm() < ORIGIN_RADIUS {
        return Err(Error::Singular(format!(
            "Green's function evaluated at |x| = {:e}",
            x.norm()
        )));
    }
    Ok(green_eta(bg, x, 0.0))
}

/// `G` with every `g^{γⱼ}` replaced by `g_η^{γⱼ} = e^{iγⱼ|x|}/(4π|x| + η)`.
///
/// At `x = 0` (η > 0) the derivative terms are dropped and only the finite
/// value `1/η` of the scalar kernel is kept.
pub fn regularized_green(bg: &ChiralBackground, x: &Vec3, eta: f64) -> Result<CMat6> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("eta must be nonnegative, got {eta}")));
    }
    if eta == 0.0 {
        return green_dyadic(bg, x);
    }
    Ok(green_eta(bg, x, eta))
}

pub(crate) fn green_eta(bg: &ChiralBackground, x: &Vec3, eta: f64) -> CMat6 {
    let tau = bg.tau_m;
    let a1 = kron_i3(&CMat2::new(c(1.0), I * tau, -I / tau, c(1.0)));
    let a2 = kron_i3(&CMat2::new(c(1.0), -I * tau, I / tau, c(1.0)));
    let g1 = beltrami_block(bg.gamma_1, bg.omega_1, tau, x, eta);
    let g2 = beltrami_block(bg.gamma_2, bg.omega_2, tau, x, eta);
    (g1 * a1 + g2 * a2) * c(0.5)
}

/// Contrast matrix
/// `K₀ = [[ε_c/ε_m − γ̃, −iωμβγ̃], [iωεβγ̃, 1 − γ̃]]`, `γ̃ = 1/(1 − k²β²)`.
pub fn k0_matrix(bg: &ChiralBackground, eps_c: Complex64) -> CMat2 {
    let tg = bg.tilde_gamma_m;
    let w = bg.omega;
    CMat2::new(
        eps_c / bg.eps_m - tg,
        Complex64::new(0.0, -w * bg.mu_m * bg.beta_m * tg),
        Complex64::new(0.0, w * bg.eps_m * bg.beta_m * tg),
        c(1.0 - tg),
    )
}

/// Beltrami coefficients inside (`c`) and outside (`m`) a particle of
/// permittivity `ε_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeltramiConstants {
    #[serde(serialize_with = "ser_c")]
    pub tau_c: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub tau_m: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub alpha_1c: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub alpha_2c: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub alpha_1m: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub alpha_2m: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub zeta_11: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub zeta_12: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub zeta_21: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub zeta_22: Complex64,
    pub gamma_1m: f64,
    pub gamma_2m: f64,
    #[serde(serialize_with = "ser_c")]
    pub gamma_1c: Complex64,
    #[serde(serialize_with = "ser_c")]
    pub gamma_2c: Complex64,
}

fn ser_c<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Principal square root, reflected into the closed upper half plane.
pub fn sqrt_upper(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

impl BeltramiConstants {
    pub fn new(bg: &ChiralBackground, eps_c: Complex64) -> Result<Self> {
        if eps_c.norm() == 0.0 || !eps_c.is_finite() {
            return Err(Error::Domain(format!("eps_c must be finite and nonzero, got {eps_c}")));
        }
        let tau_c = sqrt_upper(c(bg.mu_m) / eps_c);
        let tau_m = c(bg.tau_m);
        let half = c(0.5);
        let gamma_c = bg.omega * sqrt_upper(eps_c * bg.mu_m);
        Ok(BeltramiConstants {
            tau_c,
            tau_m,
            alpha_1c: 1.0 / (I * tau_c),
            alpha_2c: -I * tau_c,
            alpha_1m: 1.0 / (I * tau_m),
            alpha_2m: -I * tau_m,
            zeta_11: half * (1.0 + tau_m / tau_c),
            zeta_12: half * I * (tau_c - tau_m),
            zeta_21: half * I * (1.0 / tau_m - 1.0 / tau_c),
            // Verbatim, including the leading i.
            zeta_22: half * I * (1.0 + tau_c / tau_m),
            gamma_1m: bg.gamma_1,
            gamma_2m: bg.gamma_2,
            gamma_1c: gamma_c,
            gamma_2c: gamma_c,
        })
    }

    pub fn zeta_det(&self) -> Complex64 {
        self.zeta_11 * self.zeta_22 - self.zeta_12 * self.zeta_21
    }

    fn alphas(&self, region: Region) -> (Complex64, Complex64) {
        match region {
            Region::Interior => (self.alpha_1c, self.alpha_2c),
            Region::Exterior => (self.alpha_1m, self.alpha_2m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    Exterior,
}

/// Solve `E = Q₁ + α₂Q₂`, `H = α₁Q₁ + Q₂` for the Beltrami parts.
pub fn bohren_split(
    e: &CVec3,
    h: &CVec3,
    consts: &BeltramiConstants,
    region: Region,
) -> Result<(CVec3, CVec3)> {
    let (a1, a2) = consts.alphas(region);
    let det = 1.0 - a1 * a2;
    if det.norm() < 1e-14 {
        return Err(Error::Singular(format!(
            "Bohren decomposition: alpha_1*alpha_2 = {} is 1",
            a1 * a2
        )));
    }
    let q1 = (e - h * a2) / det;
    let q2 = (h - e * a1) / det;
    Ok((q1, q2))
}

/// Inverse of [`bohren_split`].
pub fn bohren_merge(
    q1: &CVec3,
    q2: &CVec3,
    consts: &BeltramiConstants,
    region: Region,
) -> (CVec3, CVec3) {
    let (a1, a2) = consts.alphas(region);
    (q1 + q2 * a2, q1 * a1 + q2)
}
