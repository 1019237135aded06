#![allow(dead_code)]

use std::f64::consts::PI;

use chiral_meta::background::ChiralBackground;
use chiral_meta::{CMat3, CVec3, CVec6, Complex64, Vec3};

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn bg(beta: f64) -> ChiralBackground {
    ChiralBackground::new(1.0, 1.0, beta, 1.0).unwrap()
}

/// Fourth-order central-difference curl.
pub fn fd_curl(f: &dyn Fn(&Vec3) -> CVec3, x: &Vec3, h: f64) -> CVec3 {
    let d = |axis: usize| {
        let mut e = Vec3::zeros();
        e[axis] = h;
        (f(&(x - e * 2.0)) - f(&(x + e * 2.0)) + (f(&(x + e)) - f(&(x - e))) * c(8.0)) / c(12.0 * h)
    };
    let (dx, dy, dz) = (d(0), d(1), d(2));
    CVec3::new(dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0])
}

/// Relative residual of the homogeneous DBF system
/// `∇×E − γ²βE − iωμγ̃H = 0`, `∇×H − γ²βH + iωεγ̃E = 0` at `x`.
pub fn dbf_residual(b: &ChiralBackground, field: &dyn Fn(&Vec3) -> CVec6, x: &Vec3, h: f64) -> f64 {
    let part = |lo: usize| move |y: &Vec3| -> CVec3 { field(y).fixed_rows::<3>(lo).into_owned() };
    let (ef, hf) = (part(0), part(3));
    let (e, hv) = (ef(x), hf(x));
    let tg = b.tilde_gamma_m;
    let r1 = fd_curl(&ef, x, h) - e * c(b.gamma_m_sq * b.beta_m) - hv * Complex64::new(0.0, b.omega * b.mu_m * tg);
    let r2 = fd_curl(&hf, x, h) - hv * c(b.gamma_m_sq * b.beta_m) + e * Complex64::new(0.0, b.omega * b.eps_m * tg);
    let scale = (e.norm() + hv.norm()) * b.gamma_1.abs().max(b.gamma_2.abs());
    (r1.norm() + r2.norm()) / scale
}

/// Classical `Γ = (I + ∇∇/k²) e^{ikr}/(4πr)` and `∇g` in closed form.
pub fn classical_dyadic(k: f64, x: &Vec3) -> (CMat3, CVec3) {
    let r = x.norm();
    let rh = x / r;
    let g = Complex64::from_polar(1.0 / (4.0 * PI * r), k * r);
    let ikr = Complex64::new(0.0, k * r);
    let u = Complex64::new(0.0, 1.0 / (k * r));
    let a = 1.0 + u + u * u;
    let bb = 1.0 + 3.0 * u + 3.0 * u * u;
    let rr = (rh * rh.transpose()).map(c);
    let gamma = (CMat3::identity() * a - rr * bb) * g;
    let grad = rh.map(c) * (g * (ikr - 1.0) / r);
    (gamma, grad)
}

/// `[v]ₓ`, so that `cross(v)·w = v × w`.
pub fn cross(v: &CVec3) -> CMat3 {
    let z = c(0.0);
    CMat3::new(z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z)
}
