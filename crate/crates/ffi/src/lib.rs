//! C ABI for `chiral-meta`.
//!
//! Objects are opaque handles created by `cm_*_new`/`cm_*_compute` style
//! functions and released with the matching `cm_*_free`. Every fallible
//! function returns a [`CmStatus`]; on failure the message is available from
//! [`cm_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chiral_meta::background::{incident_field, ChiralBackground, PlaneWaveSpec};
use chiral_meta::dipole::{scattered_field_dipole, DipoleVariant, ParticleInstance};
use chiral_meta::effective::{effective_closed_form, invert_effective, tilde_from_definition, DiluteConfig, EffectiveParams};
use chiral_meta::foldy::{build_lattice, eval_foldy_scattered, solve_foldy, FoldyState, ParticleLattice};
use chiral_meta::mesh::{icosphere, mesh_from_file, TriMesh};
use chiral_meta::np_spectral::{compute_spectrum, NPSpectrum};
use chiral_meta::polarization::{resonant_eps, ResonantMode};
use chiral_meta::{CVec6, Complex64, Error, Vec3};

/// Status codes. Input and numerical failures use the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    /// Bad argument, configuration, mesh, size limit or violated assumption.
    InvalidInput = 2,
    /// Singular matrix, failed root search or failed linear solve.
    Numerical = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CmComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for CmComplex {
    fn from(z: Complex64) -> Self {
        CmComplex { re: z.re, im: z.im }
    }
}

impl From<CmComplex> for Complex64 {
    fn from(z: CmComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Co-propagating left and right circularly polarized plane waves.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmPlaneWave {
    pub direction: [f64; 3],
    pub left: CmComplex,
    pub right: CmComplex,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CmEffective {
    pub eps_eff: CmComplex,
    pub mu_eff: CmComplex,
    pub beta_eff: CmComplex,
}

impl From<EffectiveParams> for CmEffective {
    fn from(p: EffectiveParams) -> Self {
        CmEffective {
            eps_eff: p.eps_eff.into(),
            mu_eff: p.mu_eff.into(),
            beta_eff: p.beta_eff.into(),
        }
    }
}

/// Dilute lattice parameters `(Λ, N, a, cₙ)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmDilute {
    pub lambda_vol: f64,
    pub n: u64,
    pub a: f64,
    pub c_n: f64,
}

pub struct CmBackground {
    inner: ChiralBackground,
}

pub struct CmMesh {
    inner: TriMesh,
}

pub struct CmSpectrum {
    inner: NPSpectrum,
}

pub struct CmFoldy {
    bg: ChiralBackground,
    lattice: ParticleLattice,
    state: FoldyState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CmStatus {
    if e.exit_code() == 2 {
        CmStatus::InvalidInput
    } else {
        CmStatus::Numerical
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (CmStatus, String)>) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            CmStatus::Internal
        }
    }
}

fn lib<T>(r: chiral_meta::Result<T>) -> Result<T, (CmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CmStatus, String) {
    (CmStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (CmStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn plane_wave(w: &CmPlaneWave) -> Result<PlaneWaveSpec, (CmStatus, String)> {
    lib(PlaneWaveSpec::circular(
        &Vec3::from(w.direction),
        w.left.into(),
        w.right.into(),
    ))
}

fn write_field(u: &CVec6, dst: &mut [f64; 12]) {
    for (i, z) in u.iter().enumerate() {
        dst[2 * i] = z.re;
        dst[2 * i + 1] = z.im;
    }
}

/// Copy of the last error message on this thread, or NULL if none. Free it
/// with [`cm_string_free`].
#[no_mangle]
pub extern "C" fn cm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library (or be NULL) and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a background medium. `allow_kbeta_ge_1` nonzero accepts
/// `k_mβ_m ≥ 1`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_background_new(
    eps_m: f64,
    mu_m: f64,
    beta_m: f64,
    omega: f64,
    allow_kbeta_ge_1: i32,
    out_bg: *mut *mut CmBackground,
) -> CmStatus {
    guard(|| {
        let slot = out(out_bg, "out_bg")?;
        let inner = lib(ChiralBackground::with_override(eps_m, mu_m, beta_m, omega, allow_kbeta_ge_1 != 0))?;
        *slot = Box::into_raw(Box::new(CmBackground { inner }));
        Ok(())
    })
}

/// # Safety
/// `bg` must come from [`cm_background_new`] (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn cm_background_free(bg: *mut CmBackground) {
    if !bg.is_null() {
        drop(Box::from_raw(bg));
    }
}

/// `k_mβ_m`, or NaN for a NULL handle.
///
/// # Safety
/// `bg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cm_background_k_beta(bg: *const CmBackground) -> f64 {
    bg.as_ref().map_or(f64::NAN, |b| b.inner.k_beta())
}

/// # Safety
/// `out_mesh` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_mesh_icosphere(subdivisions: u32, out_mesh: *mut *mut CmMesh) -> CmStatus {
    guard(|| {
        let slot = out(out_mesh, "out_mesh")?;
        let inner = lib(icosphere(subdivisions))?;
        *slot = Box::into_raw(Box::new(CmMesh { inner }));
        Ok(())
    })
}

/// Load a triangulated OFF file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_mesh` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_mesh_from_off(path: *const c_char, out_mesh: *mut *mut CmMesh) -> CmStatus {
    guard(|| {
        let slot = out(out_mesh, "out_mesh")?;
        let path = deref(path, "path")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (CmStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        let inner = lib(mesh_from_file(path))?;
        *slot = Box::into_raw(Box::new(CmMesh { inner }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cm_mesh_panel_count(mesh: *const CmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.panel_count())
}

/// # Safety
/// `mesh` must come from this library (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn cm_mesh_free(mesh: *mut CmMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Neumann–Poincaré spectrum of `mesh`, keeping `mode_count` modes.
///
/// # Safety
/// `mesh` must be a live handle; `out_spec` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_spectrum_compute(
    mesh: *const CmMesh,
    mode_count: usize,
    out_spec: *mut *mut CmSpectrum,
) -> CmStatus {
    guard(|| {
        let slot = out(out_spec, "out_spec")?;
        let mesh = deref(mesh, "mesh")?;
        let inner = lib(compute_spectrum(&mesh.inner, mode_count))?;
        *slot = Box::into_raw(Box::new(CmSpectrum { inner }));
        Ok(())
    })
}

/// Number of retained eigenvalues.
///
/// # Safety
/// `spec` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cm_spectrum_len(spec: *const CmSpectrum) -> usize {
    spec.as_ref().map_or(0, |s| s.inner.len())
}

/// Copy up to `len` retained eigenvalues into `buf`; `*written` receives the
/// number copied.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_spectrum_eigenvalues(
    spec: *const CmSpectrum,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> CmStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let written = out(written, "written")?;
        if buf.is_null() && len > 0 {
            return Err(null("buf"));
        }
        let n = len.min(spec.inner.eigenvalues.len());
        if n > 0 {
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&spec.inner.eigenvalues[..n]);
        }
        *written = n;
        Ok(())
    })
}

/// Eigenvalue and moment constant `cₙ` of the dominant (largest-moment)
/// cluster.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cm_spectrum_dominant(spec: *const CmSpectrum, lambda: *mut f64, c_n: *mut f64) -> CmStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let (lambda, c_n) = (out(lambda, "lambda")?, out(c_n, "c_n")?);
        let cl = spec
            .inner
            .dominant_cluster()
            .ok_or_else(|| (CmStatus::Numerical, "spectrum has no retained modes".to_string()))?;
        *lambda = cl.lambda;
        *c_n = cl.c_n();
        Ok(())
    })
}

/// # Safety
/// `spec` must come from this library (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn cm_spectrum_free(spec: *mut CmSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Resonant permittivity of mode `λₙ`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cm_resonant_eps(bg: *const CmBackground, lambda_n: f64, eps_star: *mut CmComplex) -> CmStatus {
    guard(|| {
        let bg = deref(bg, "bg")?;
        let dst = out(eps_star, "eps_star")?;
        *dst = lib(resonant_eps(&bg.inner, lambda_n))?.into();
        Ok(())
    })
}

/// Closed-form effective parameters at fill parameter `s ∈ [0, 1)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cm_effective_closed_form(
    bg: *const CmBackground,
    lambda_n: f64,
    s: f64,
    result: *mut CmEffective,
) -> CmStatus {
    guard(|| {
        let bg = deref(bg, "bg")?;
        let dst = out(result, "result")?;
        *dst = lib(effective_closed_form(&bg.inner, lambda_n, s))?.into();
        Ok(())
    })
}

/// Effective parameters of a dilute lattice of particles with permittivity
/// `eps_c`, from the exact tilde values.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cm_effective_dilute(
    bg: *const CmBackground,
    dilute: *const CmDilute,
    lambda_n: f64,
    eps_c: CmComplex,
    result: *mut CmEffective,
) -> CmStatus {
    guard(|| {
        let bg = deref(bg, "bg")?;
        let d = deref(dilute, "dilute")?;
        let dst = out(result, "result")?;
        let cfg = lib(DiluteConfig::new(d.lambda_vol, d.n, d.a, d.c_n))?;
        let tilde = lib(tilde_from_definition(&bg.inner, eps_c.into(), &cfg, lambda_n))?;
        *dst = lib(invert_effective(&tilde, &bg.inner))?.into();
        Ok(())
    })
}

/// Scattered `(E, H)` of one particle at `point`, written as 12 doubles
/// (re, im of Ex, Ey, Ez, Hx, Hy, Hz). `guard_factor` is the far-field guard
/// in units of `delta`.
///
/// # Safety
/// Pointers must be valid; `field` must hold 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_dipole_field(
    bg: *const CmBackground,
    lambda_n: f64,
    c_n: f64,
    eps_c: CmComplex,
    delta: f64,
    center: *const [f64; 3],
    wave: *const CmPlaneWave,
    guard_factor: f64,
    point: *const [f64; 3],
    field: *mut [f64; 12],
) -> CmStatus {
    guard(|| {
        let bg = &deref(bg, "bg")?.inner;
        let center = Vec3::from(*deref(center, "center")?);
        let spec = plane_wave(deref(wave, "wave")?)?;
        let x = Vec3::from(*deref(point, "point")?);
        let dst = out(field, "field")?;
        let p = lib(ParticleInstance::new(center, delta, eps_c.into(), ResonantMode::isotropic(lambda_n, c_n)))?
            .with_guard(guard_factor);
        let u0 = incident_field(bg, &spec, &center);
        let u = lib(scattered_field_dipole(bg, &p, &u0, &x, DipoleVariant::ResonantMode))?;
        write_field(&u, dst);
        Ok(())
    })
}

/// Solve the Foldy system on an `n³` lattice with finite-`n` tilde coupling.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cm_foldy_solve(
    bg: *const CmBackground,
    dilute: *const CmDilute,
    lambda_n: f64,
    eps_c: CmComplex,
    eta: f64,
    wave: *const CmPlaneWave,
    out_foldy: *mut *mut CmFoldy,
) -> CmStatus {
    guard(|| {
        let slot = out(out_foldy, "out_foldy")?;
        let bg = deref(bg, "bg")?.inner;
        let d = deref(dilute, "dilute")?;
        let spec = plane_wave(deref(wave, "wave")?)?;
        let cfg = lib(DiluteConfig::new(d.lambda_vol, d.n, d.a, d.c_n))?;
        let lattice = lib(build_lattice(d.n, &cfg))?;
        let coupling = lib(tilde_from_definition(&bg, eps_c.into(), &lattice.cfg, lambda_n))?.matrix;
        let state = lib(solve_foldy(&bg, &lattice, &coupling, &spec, eta))?;
        *slot = Box::into_raw(Box::new(CmFoldy { bg, lattice, state }));
        Ok(())
    })
}

/// Relative residual of the accepted Foldy solve, NaN for NULL.
///
/// # Safety
/// `foldy` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cm_foldy_residual(foldy: *const CmFoldy) -> f64 {
    foldy.as_ref().map_or(f64::NAN, |f| f.state.report.residual)
}

/// Scattered field of the solved lattice at `point` (12 doubles).
///
/// # Safety
/// Pointers must be valid; `field` must hold 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_foldy_scattered(foldy: *const CmFoldy, point: *const [f64; 3], field: *mut [f64; 12]) -> CmStatus {
    guard(|| {
        let f = deref(foldy, "foldy")?;
        let x = Vec3::from(*deref(point, "point")?);
        let dst = out(field, "field")?;
        let u = lib(eval_foldy_scattered(&f.bg, &f.lattice, &f.state, &x))?;
        write_field(&u, dst);
        Ok(())
    })
}

/// # Safety
/// `foldy` must come from [`cm_foldy_solve`] (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn cm_foldy_free(foldy: *mut CmFoldy) {
    if !foldy.is_null() {
        drop(Box::from_raw(foldy));
    }
}
