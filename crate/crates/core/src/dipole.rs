//! Leading-order field scattered by one small plasmonic particle
//! `Ω = δB + z`: an electric plus magnetic dipole radiating through `G`.

use crate::background::{green_eta, k0_matrix, ChiralBackground, ORIGIN_RADIUS};
use crate::polarization::{PolarizationTensor, ResonantMode};
use crate::{c, kron_i3, CMat2, CMat6, CVec6, Complex64, Error, Result, Vec3};

/// Default far-field guard: evaluation points at least `10δ` from the center.
pub const DEFAULT_GUARD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleInstance {
    pub center: Vec3,
    pub delta: f64,
    /// `δ³`, the volume factor in front of the dipole. Kept separately so it
    /// can be supplied as `ΛN^{−3a}/N³` without a cube root round trip.
    pub volume_factor: f64,
    pub eps_c: Complex64,
    pub mode: ResonantMode,
    /// Far-field guard in units of `δ`.
    pub guard: f64,
}

impl ParticleInstance {
    pub fn new(center: Vec3, delta: f64, eps_c: Complex64, mode: ResonantMode) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        Ok(ParticleInstance {
            center,
            delta,
            volume_factor: delta.powi(3),
            eps_c,
            mode,
            guard: DEFAULT_GUARD,
        })
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    /// Replace `δ³` by an exactly supplied value (keeps `delta` consistent).
    pub fn with_volume_factor(mut self, volume_factor: f64) -> Self {
        self.volume_factor = volume_factor;
        self.delta = volume_factor.cbrt();
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub enum DipoleVariant<'a> {
    /// `δ³ ωG K₀ (Mₙ ⊗ cₙI) u` with `cₙ = tr(moment tensor)/3`.
    ResonantMode,
    /// As `ResonantMode` but with the full cluster moment tensor.
    ResonantModeAnisotropic,
    /// `δ³ ωG (K₀ ⊗ I) M̃ u` with `M̃ = |B|I + M`.
    FullTensor(&'a PolarizationTensor),
}

/// `K₀ Mₙ cₙ`, the 2×2 coupling shared by the dipole and Foldy formulas.
pub fn mode_coupling(bg: &ChiralBackground, eps_c: Complex64, mode: &ResonantMode) -> Result<CMat2> {
    let m = mode.m_blocks(bg, eps_c)?;
    Ok(k0_matrix(bg, eps_c) * m * c(mode.c_n()))
}

/// `ω G_η(r)·(strength·u)`, one radiating point source.
pub(crate) fn point_source(bg: &ChiralBackground, r: &Vec3, eta: f64, strength: &CMat6, u: &CVec6) -> CVec6 {
    let g = green_eta(bg, r, eta) * c(bg.omega);
    g * (strength * u)
}

/// The 6×6 source strength of the particle for `variant`.
pub fn dipole_strength(bg: &ChiralBackground, particle: &ParticleInstance, variant: DipoleVariant) -> Result<CMat6> {
    let w = c(particle.volume_factor);
    match variant {
        DipoleVariant::ResonantMode => {
            let coupling = mode_coupling(bg, particle.eps_c, &particle.mode)?;
            Ok(kron_i3(&(coupling * w)))
        }
        DipoleVariant::ResonantModeAnisotropic => {
            let km = k0_matrix(bg, particle.eps_c) * particle.mode.m_blocks(bg, particle.eps_c)?;
            let ct = particle.mode.moment_tensor.map(c);
            let mut out = CMat6::zeros();
            for a in 0..2 {
                for b in 0..2 {
                    out.fixed_view_mut::<3, 3>(3 * a, 3 * b).copy_from(&(ct * (km[(a, b)] * w)));
                }
            }
            Ok(out)
        }
        DipoleVariant::FullTensor(pt) => Ok(kron_i3(&k0_matrix(bg, particle.eps_c)) * pt.m_tilde * w),
    }
}

/// Scattered `(E, H)` at `x` given the incident field at the particle center.
pub fn scattered_field_dipole(
    bg: &ChiralBackground,
    particle: &ParticleInstance,
    incident_at_center: &CVec6,
    x: &Vec3,
    variant: DipoleVariant,
) -> Result<CVec6> {
    let r = x - particle.center;
    let dist = r.norm();
    if dist < particle.guard * particle.delta || dist < ORIGIN_RADIUS {
        return Err(Error::Domain(format!(
            "evaluation point at distance {dist:e} is inside the far-field guard {}*delta = {:e}",
            particle.guard,
            particle.guard * particle.delta
        )));
    }
    let strength = dipole_strength(bg, particle, variant)?;
    Ok(point_source(bg, &r, 0.0, &strength, incident_at_center))
}
