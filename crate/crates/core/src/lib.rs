//! Plasmonic double-negative metamaterials in a chiral Drude–Born–Fedorov
//! background.
//!
//! The pipeline runs from a particle shape to effective medium parameters:
//!
//! * [`mesh`] holds the triangulated reference particle `B`.
//! * [`np_spectral`] discretizes the single-layer and Neumann–Poincaré
//!   operators and diagonalizes the latter in the H* inner product.
//! * [`background`] has the chiral medium constants, circularly polarized
//!   plane waves and the 6×6 dyadic Green's function.
//! * [`polarization`] builds the per-mode matrices `Aₙ`, `Mₙ` and the
//!   polarization tensor.
//! * [`dipole`] evaluates the resonant dipole field of one small particle.
//! * [`effective`] computes the effective `(ε, μ, β)` of a dilute lattice and
//!   finds double-negative windows.
//! * [`foldy`] solves the many-particle point-interaction system and the
//!   homogenized volume equation it converges to.
//!
//! Everything is dimensionless.

pub mod background;
pub mod cli;
pub mod dipole;
pub mod effective;
mod error;
pub mod foldy;
pub mod mesh;
pub mod np_spectral;
pub mod polarization;

pub use error::{Error, Result};

pub use nalgebra::{Matrix2, Matrix3, Matrix6, Vector3, Vector6};
pub use num_complex::Complex64;

/// Real 3-vector.
pub type Vec3 = Vector3<f64>;
/// Complex 3-vector.
pub type CVec3 = Vector3<Complex64>;
/// Complex `(E, H)` pair stacked as a 6-vector.
pub type CVec6 = Vector6<Complex64>;
pub type CMat2 = Matrix2<Complex64>;
pub type CMat3 = Matrix3<Complex64>;
pub type CMat6 = Matrix6<Complex64>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `A ⊗ I₃`: a 2×2 block operator acting on stacked `(E, H)`.
pub fn kron_i3(a: &CMat2) -> CMat6 {
    let mut out = CMat6::zeros();
    for bi in 0..2 {
        for bj in 0..2 {
            for d in 0..3 {
                out[(3 * bi + d, 3 * bj + d)] = a[(bi, bj)];
            }
        }
    }
    out
}

/// Stack two 3-vectors into a 6-vector.
pub fn stack(e: &CVec3, h: &CVec3) -> CVec6 {
    CVec6::new(e[0], e[1], e[2], h[0], h[1], h[2])
}

/// Split a 6-vector into its `E` and `H` halves.
pub fn unstack(u: &CVec6) -> (CVec3, CVec3) {
    (
        CVec3::new(u[0], u[1], u[2]),
        CVec3::new(u[3], u[4], u[5]),
    )
}
