//! Command-line front end: `key=value` run configs, presets, and one
//! subcommand per pipeline stage. Every command writes its results into the
//! output directory and is deterministic given its configuration.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::background::{incident_field, ChiralBackground, PlaneWaveSpec};
use crate::dipole::{scattered_field_dipole, DipoleVariant, ParticleInstance, DEFAULT_GUARD};
use crate::effective::{
    double_negative_threshold, effective_closed_form, epsc_from_s, figure_grid, is_double_negative, linspace,
    shifted_resonances, sweep_figure, tilde_from_definition, DiluteConfig,
};
use crate::foldy::{
    build_lattice, check_distribution, compare_homogenization, eval_foldy_scattered, lattice_coupling, solve_foldy,
    uniform_invertibility_stat, CouplingChoice, TestPair,
};
use crate::mesh::{icosphere, mesh_from_file, TriMesh};
use crate::np_spectral::{compute_spectrum, NPSpectrum};
use crate::polarization::{
    drude_frequency, find_resonance_root, polarization_tensor, resonant_eps, ResonantMode, RootSearch,
};
use crate::{unstack, CVec6, Complex64, Error, Result, Vec3};

/// Sphere moment constant used by the presets and when no mesh is given.
pub const SPHERE_C1: f64 = 4.0 * std::f64::consts::PI / 27.0;

/// Accepted configuration keys with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("eps_m", "background permittivity (default 1)"),
    ("mu_m", "background permeability (default 1)"),
    ("beta_m", "chirality admittance (default 0)"),
    ("omega", "frequency (default 1)"),
    ("allow_kbeta_ge_1", "accept k_m*beta_m >= 1 (default false)"),
    ("eps_c", "particle permittivity, real part (default -4)"),
    ("eps_c_im", "particle permittivity, imaginary part (default 0)"),
    ("mesh", "'icosphere' or the path of an OFF file; unset uses analytic sphere modes"),
    ("subdivisions", "icosphere subdivisions (default 3)"),
    ("mode_count", "retained NP modes (default 8)"),
    ("lambda_n", "resonant NP eigenvalue; overrides the mesh"),
    ("c_n", "moment constant of the resonant mode"),
    ("Lambda", "dilute lattice constant (default 3)"),
    ("N", "particles per axis in the dilute scaling (default 125)"),
    ("a", "dilution exponent (default 0.965)"),
    ("v_tilde", "constant distribution density (default 1)"),
    ("grid", "sweep grid: 'figure', 'uniform' or 'list' (default figure)"),
    ("eps_c_min", "uniform sweep start (default -4)"),
    ("eps_c_max", "uniform sweep end (default -1)"),
    ("points", "coarse sweep points (default 1000)"),
    ("window_points", "points in the refined resonance window (default 1000)"),
    ("eps_c_list", "comma-separated eps_c values for grid = list"),
    ("s_min", "closed-form sweep start (default 0)"),
    ("s_max", "closed-form sweep end (default 0.999)"),
    ("s_points", "closed-form sweep points (default 1000)"),
    ("drude_omega_p", "Drude plasma frequency for resonance frequencies"),
    ("drude_tau", "Drude damping (default 0)"),
    ("direction", "incident direction 'x,y,z' (default 0,0,1)"),
    ("amp_left", "left circular amplitude 're,im' (default 1,0)"),
    ("amp_right", "right circular amplitude 're,im' (default 0,0)"),
    ("center", "particle center 'x,y,z' (default 0.5,0.5,0.5)"),
    ("delta", "particle size; unset uses the N = 1 lattice volume"),
    ("guard", "far-field guard in units of delta (default 10)"),
    ("variant", "dipole variant: 'mode', 'anisotropic' or 'tensor' (default mode)"),
    ("probes", "probe CSV file (x,y,z per line); unset uses a ring around the unit cube"),
    ("probe_count", "points on the default probe ring (default 12)"),
    ("foldy_n", "lattice size for the foldy command (default 1)"),
    ("eta", "kernel regularization (default 0.1/foldy_n for foldy, 0.1 for comparisons)"),
    ("coupling", "'finite' (tilde values at foldy_n) or 'reference' (at N) (default finite)"),
    ("n_list", "comma-separated lattice sizes for comparisons (default 2,3,4,5)"),
    ("grid_m", "homogenized grid size (default 8)"),
    ("dist_probes", "probe centers in the distribution statistic (default 27)"),
];

/// Parsed `key=value` configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parse UTF-8 `key=value` lines. `#` starts a comment; blank lines are
    /// skipped. Unknown and repeated keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.iter().any(|(name, _)| *name == k) {
                return Err(Error::Config(format!("unknown key '{k}' on line {}", i + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("key '{k}' repeated on line {}", i + 1)));
            }
        }
        Ok(RunConfig { values })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Named parameter sets. `figure1-left` is the chiral panel
    /// (`β_m = 1.09`, which needs `k_mβ_m ≥ 1`), `figure1-right` the
    /// achiral one.
    pub fn preset(name: &str) -> Result<Self> {
        let beta = match name {
            "figure1-left" => "1.09",
            "figure1-right" => "0",
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset '{name}' (expected figure1-left or figure1-right)"
                )))
            }
        };
        let mut c = RunConfig::default();
        for (k, v) in [
            ("eps_m", "1"),
            ("mu_m", "1"),
            ("omega", "1"),
            ("beta_m", beta),
            ("Lambda", "3"),
            ("N", "125"),
            ("a", "0.965"),
            ("grid", "figure"),
        ] {
            c.values.insert(k.into(), v.into());
        }
        if beta != "0" {
            c.values.insert("allow_kbeta_ge_1".into(), "true".into());
        }
        c.values.insert("lambda_n".into(), format!("{:.17e}", 1.0 / 6.0));
        c.values.insert("c_n".into(), format!("{SPHERE_C1:.17e}"));
        Ok(c)
    }

    /// `other` wins on shared keys.
    pub fn merged(mut self, other: RunConfig) -> Self {
        self.values.extend(other.values);
        self
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !CONFIG_KEYS.iter().any(|(name, _)| *name == key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.values.insert(key.into(), value.into());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn bad(key: &str, v: &str, what: &str) -> Error {
        Error::Config(format!("key '{key}': cannot parse '{v}' as {what}"))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| v.parse::<f64>().map_err(|_| Self::bad(key, v, "a number")))
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.raw(key)
            .map(|v| v.parse::<u64>().map_err(|_| Self::bad(key, v, "a nonnegative integer")))
            .transpose()
            .map(|o| o.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Self::bad(key, v, "a boolean")),
        }
    }

    pub fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| Self::bad(key, v, "a list of numbers")))
                    .collect()
            })
            .transpose()
    }

    fn fixed<const K: usize>(&self, key: &str, default: [f64; K]) -> Result<[f64; K]> {
        match self.list_f64(key)? {
            None => Ok(default),
            Some(v) if v.len() == K => Ok(std::array::from_fn(|i| v[i])),
            Some(_) => Err(Error::Config(format!("key '{key}' needs {K} comma-separated numbers"))),
        }
    }

    pub fn vec3_or(&self, key: &str, default: [f64; 3]) -> Result<Vec3> {
        let v = self.fixed(key, default)?;
        Ok(Vec3::new(v[0], v[1], v[2]))
    }

    pub fn complex_or(&self, key: &str, default: [f64; 2]) -> Result<Complex64> {
        let v = self.fixed(key, default)?;
        Ok(Complex64::new(v[0], v[1]))
    }

    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<u64>().map_err(|_| Self::bad(key, v, "a list of integers")))
                .collect(),
        }
    }

    pub fn background(&self) -> Result<ChiralBackground> {
        ChiralBackground::with_override(
            self.f64_or("eps_m", 1.0)?,
            self.f64_or("mu_m", 1.0)?,
            self.f64_or("beta_m", 0.0)?,
            self.f64_or("omega", 1.0)?,
            self.bool_or("allow_kbeta_ge_1", false)?,
        )
    }

    pub fn dilute(&self, c_n: f64) -> Result<DiluteConfig> {
        Ok(DiluteConfig::new(
            self.f64_or("Lambda", 3.0)?,
            self.u64_or("N", 125)?,
            self.f64_or("a", 0.965)?,
            c_n,
        )?
        .with_v_tilde(self.f64_or("v_tilde", 1.0)?))
    }

    pub fn eps_c(&self) -> Result<Complex64> {
        Ok(Complex64::new(self.f64_or("eps_c", -4.0)?, self.f64_or("eps_c_im", 0.0)?))
    }

    pub fn incident(&self) -> Result<PlaneWaveSpec> {
        PlaneWaveSpec::circular(
            &self.vec3_or("direction", [0.0, 0.0, 1.0])?,
            self.complex_or("amp_left", [1.0, 0.0])?,
            self.complex_or("amp_right", [0.0, 0.0])?,
        )
    }

    pub fn mesh(&self) -> Result<Option<TriMesh>> {
        match self.raw("mesh") {
            None => Ok(None),
            Some("icosphere") => Ok(Some(icosphere(self.u64_or("subdivisions", 3)? as u32)?)),
            Some(path) => Ok(Some(mesh_from_file(path)?)),
        }
    }

    /// `(λₙ, cₙ)` of the resonant mode: explicit keys, else the dominant
    /// cluster of the configured mesh, else the analytic sphere dipole mode.
    pub fn resonant_mode(&self) -> Result<ResonantMode> {
        if let Some(l) = self.f64_opt("lambda_n")? {
            return Ok(ResonantMode::isotropic(l, self.f64_or("c_n", SPHERE_C1)?));
        }
        match self.mesh()? {
            Some(mesh) => {
                let spec = compute_spectrum(&mesh, self.mode_count(&mesh)?)?;
                let cl = spec
                    .dominant_cluster()
                    .ok_or_else(|| Error::Convergence("spectrum has no retained modes".into()))?;
                let mut mode = ResonantMode::from_cluster(&cl);
                if let Some(cn) = self.f64_opt("c_n")? {
                    mode = ResonantMode::isotropic(mode.lambda, cn);
                }
                Ok(mode)
            }
            None => Ok(ResonantMode::isotropic(1.0 / 6.0, self.f64_or("c_n", SPHERE_C1)?)),
        }
    }

    fn mode_count(&self, mesh: &TriMesh) -> Result<usize> {
        let m = self.u64_or("mode_count", 8)? as usize;
        Ok(m.min(mesh.panel_count().saturating_sub(1)))
    }

    pub fn probes(&self) -> Result<Vec<Vec3>> {
        match self.raw("probes") {
            Some(path) => read_probes(Path::new(path)),
            None => {
                let n = self.u64_or("probe_count", 12)?.max(1) as usize;
                Ok(default_probes(n))
            }
        }
    }
}

/// `n` points on a tilted ring of radius 1.2 around the unit cube's center.
pub fn default_probes(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Vec3::new(0.5 + 1.2 * th.cos(), 0.5 + 1.2 * th.sin(), 0.5 + 0.4 * (2.0 * th).sin())
        })
        .collect()
}

/// Probe CSV: `x,y,z` per line, optional header, `#` comments.
pub fn read_probes(path: &Path) -> Result<Vec<Vec3>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (i == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("probe line '{line}' is not x,y,z"),
            })?;
        if v.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("probe line has {} values, expected 3", v.len()),
            });
        }
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    if out.is_empty() {
        return Err(Error::Config(format!("probe file {} has no points", path.display())));
    }
    Ok(out)
}

/// `{:.16e}`: 17 significant digits, `nan`/`inf` spelled out.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with every float written to 17 significant digits and
/// non-finite values as `null`.
struct SciFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format!("{value:.16e}").as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(serde_json::ser::PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Config(format!("JSON serialization: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

const FIELD_HEADER: &str = "x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez,re_hx,im_hx,re_hy,im_hy,re_hz,im_hz";

/// Probe CSV with the 12 real field columns.
pub fn field_csv(probes: &[Vec3], fields: &[CVec6]) -> String {
    let mut s = String::from(FIELD_HEADER);
    s.push('\n');
    for (p, f) in probes.iter().zip(fields) {
        let (e, h) = unstack(f);
        let mut cols: Vec<String> = p.iter().map(|v| sci(*v)).collect();
        for z in e.iter().chain(h.iter()) {
            cols.push(sci(z.re));
            cols.push(sci(z.im));
        }
        let _ = writeln!(s, "{}", cols.join(","));
    }
    s
}

pub fn spectrum_json(mesh: &TriMesh, spec: &NPSpectrum) -> Value {
    let clusters: Vec<Value> = spec
        .clusters()
        .iter()
        .map(|cl| {
            let t = cl.moment_tensor;
            json!({
                "lambda": cl.lambda,
                "members": cl.members,
                "c_n": cl.c_n(),
                "moment_tensor": [[t[(0,0)], t[(0,1)], t[(0,2)]], [t[(1,0)], t[(1,1)], t[(1,2)]], [t[(2,0)], t[(2,1)], t[(2,2)]]],
            })
        })
        .collect();
    json!({
        "panels": mesh.panel_count(),
        "eigenvalues": spec.eigenvalues,
        "moments": spec.moments.iter().map(|m| json!([m[0], m[1], m[2]])).collect::<Vec<_>>(),
        "residuals": spec.residuals,
        "gram_certificate": spec.gram_certificate,
        "dropped_eigenvalue": spec.dropped_eigenvalue,
        "clusters": clusters,
    })
}

#[derive(Debug, Parser)]
#[command(name = "chiral-meta", version, about = "Plasmonic metamaterials in chiral DBF media")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named parameter set (figure1-left, figure1-right); config keys override it.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Accept backgrounds with k_m*beta_m >= 1.
    #[arg(long, global = true)]
    pub allow_kbeta_ge_1: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// NP spectrum of the configured mesh (np_spectrum.json).
    NpSpectrum,
    /// Resonant permittivities, det roots, shifts and Drude frequencies (resonances.json).
    Resonances,
    /// Effective parameters over an eps_c grid (eff_sweep.csv, eff_sweep_summary.json).
    EffSweep,
    /// Closed-form effective parameters in s (eff_closed_form.csv, eff_closed_form.json).
    EffClosedForm,
    /// Single-particle dipole field at probes (dipole_field.csv).
    DipoleField,
    /// Foldy solve and probe fields (foldy_probes.csv, foldy_report.json).
    Foldy,
    /// Foldy versus homogenized fields over n_list (compare_hom.csv, compare_hom.json).
    CompareHom,
    /// Assumption diagnostics (assumptions.json).
    CheckAssumptions,
}

/// Run the CLI on `args` (including the program name) and return the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolve the configuration and run the command; returns written files.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.preset {
        Some(p) => RunConfig::preset(p)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &cli.config {
        cfg = cfg.merged(RunConfig::from_file(path)?);
    }
    if cli.allow_kbeta_ge_1 {
        cfg.set("allow_kbeta_ge_1", "true")?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::NpSpectrum => cmd_np_spectrum(&cfg, out),
        Command::Resonances => cmd_resonances(&cfg, out),
        Command::EffSweep => cmd_eff_sweep(&cfg, out),
        Command::EffClosedForm => cmd_eff_closed_form(&cfg, out),
        Command::DipoleField => cmd_dipole_field(&cfg, out),
        Command::Foldy => cmd_foldy(&cfg, out),
        Command::CompareHom => cmd_compare_hom(&cfg, out),
        Command::CheckAssumptions => cmd_check_assumptions(&cfg, out),
    }
}

pub fn cmd_np_spectrum(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mesh = match cfg.mesh()? {
        Some(m) => m,
        None => icosphere(cfg.u64_or("subdivisions", 3)? as u32)?,
    };
    let spec = compute_spectrum(&mesh, cfg.mode_count(&mesh)?)?;
    Ok(vec![write_file(out, "np_spectrum.json", &to_json_string(&spectrum_json(&mesh, &spec))?)?])
}

pub fn cmd_resonances(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bg = cfg.background()?;
    let modes: Vec<ResonantMode> = if let Some(l) = cfg.f64_opt("lambda_n")? {
        vec![ResonantMode::isotropic(l, cfg.f64_or("c_n", SPHERE_C1)?)]
    } else if let Some(mesh) = cfg.mesh()? {
        compute_spectrum(&mesh, cfg.mode_count(&mesh)?)?
            .clusters()
            .iter()
            .map(ResonantMode::from_cluster)
            .collect()
    } else {
        // Analytic sphere modes λₙ = 1/(2(2n+1)); only n = 1 carries a moment.
        (1..=3)
            .map(|n| ResonantMode::isotropic(1.0 / (2.0 * (2 * n + 1) as f64), if n == 1 { SPHERE_C1 } else { 0.0 }))
            .collect()
    };
    let omega_p = cfg.f64_opt("drude_omega_p")?;
    let tau = cfg.f64_or("drude_tau", 0.0)?;
    let mut any_ok = false;
    let mut reports = Vec::new();
    let mut first_err = None;
    for mode in &modes {
        let lambda = mode.lambda;
        let mut entry = serde_json::Map::new();
        entry.insert("lambda_n".into(), json!(lambda));
        entry.insert("c_n".into(), json!(mode.c_n()));
        match resonant_eps(&bg, lambda) {
            Ok(star) => {
                entry.insert("eps_star".into(), cjson(star));
                let search = RootSearch::Secant(star * 1.01, star * 0.99);
                match find_resonance_root(&bg, lambda, search) {
                    Ok(r) => {
                        any_ok = true;
                        entry.insert("det_root_direct".into(), json!([r.root_re, r.root_im]));
                        entry.insert("det_root_residual".into(), json!(r.residual));
                        entry.insert("det_root_iterations".into(), json!(r.iterations));
                        entry.insert("root_minus_eps_star".into(), json!((r.root() - star).norm()));
                    }
                    Err(e) => {
                        entry.insert("error".into(), json!(e.to_string()));
                        first_err.get_or_insert(e);
                    }
                }
                if mode.c_n() > 0.0 {
                    if let Ok(dcfg) = cfg.dilute(mode.c_n()) {
                        if let Ok((se, sm)) = shifted_resonances(&bg, lambda, &dcfg) {
                            entry.insert("eps_star_eps_eff".into(), cjson(se));
                            entry.insert("eps_star_mu_eff".into(), cjson(sm));
                            entry.insert("shift_eps_eff".into(), json!((se - star).re));
                            entry.insert("shift_mu_eff".into(), json!((sm - star).re));
                        }
                    }
                }
                if let Some(wp) = omega_p {
                    entry.insert("drude_omega".into(), json!(drude_frequency(wp, tau, star.re)));
                }
            }
            Err(e) => {
                entry.insert("error".into(), json!(e.to_string()));
                first_err.get_or_insert(e);
            }
        }
        reports.push(Value::Object(entry));
    }
    let doc = json!({ "background": bg, "modes": reports });
    let path = write_file(out, "resonances.json", &to_json_string(&doc)?)?;
    match (any_ok, first_err) {
        (false, Some(e)) => Err(e),
        _ => Ok(vec![path]),
    }
}

fn sweep_grid(cfg: &RunConfig, bg: &ChiralBackground, dcfg: &DiluteConfig, lambda: f64) -> Result<Vec<f64>> {
    let points = cfg.u64_or("points", 1000)? as usize;
    match cfg.raw("grid").unwrap_or("figure") {
        "figure" => figure_grid(bg, dcfg, lambda, points, cfg.u64_or("window_points", 1000)? as usize),
        "uniform" => Ok(linspace(cfg.f64_or("eps_c_min", -4.0)?, cfg.f64_or("eps_c_max", -1.0)?, points)),
        "list" => cfg
            .list_f64("eps_c_list")?
            .ok_or_else(|| Error::Config("grid = list needs eps_c_list".into())),
        other => Err(Error::Config(format!("unknown grid '{other}'"))),
    }
}

pub fn cmd_eff_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bg = cfg.background()?;
    let mode = cfg.resonant_mode()?;
    let dcfg = cfg.dilute(mode.c_n())?;
    let grid = sweep_grid(cfg, &bg, &dcfg, mode.lambda)?;
    let res = sweep_figure(&bg, &dcfg, mode.lambda, &grid)?;
    let mut csv = String::from("eps_c,re_eps_eff,im_eps_eff,re_mu_eff,im_mu_eff,double_negative,out_of_assumption\n");
    for r in &res.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            sci(r.eps_c),
            sci(r.eps_eff.re),
            sci(r.eps_eff.im),
            sci(r.mu_eff.re),
            sci(r.mu_eff.im),
            r.double_negative as u8,
            r.out_of_assumption as u8
        );
    }
    let summary = json!({
        "lambda_n": mode.lambda,
        "c_n": mode.c_n(),
        "dilute": dcfg,
        "background": bg,
        "summary": res.summary,
    });
    Ok(vec![
        write_file(out, "eff_sweep.csv", &csv)?,
        write_file(out, "eff_sweep_summary.json", &to_json_string(&summary)?)?,
    ])
}

pub fn cmd_eff_closed_form(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bg = cfg.background()?;
    let mode = cfg.resonant_mode()?;
    let dcfg = cfg.dilute(mode.c_n())?;
    let s_grid = linspace(cfg.f64_or("s_min", 0.0)?, cfg.f64_or("s_max", 0.999)?, cfg.u64_or("s_points", 1000)? as usize);
    let mut csv = String::from(
        "s,eps_c,re_eps_eff,im_eps_eff,re_mu_eff,im_mu_eff,re_beta_eff,im_beta_eff,double_negative\n",
    );
    for &s in &s_grid {
        let p = effective_closed_form(&bg, mode.lambda, s)?;
        let eps_c = if s > 0.0 {
            epsc_from_s(&bg, mode.lambda, s, &dcfg)?.re
        } else {
            f64::INFINITY
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            sci(s),
            sci(eps_c),
            sci(p.eps_eff.re),
            sci(p.eps_eff.im),
            sci(p.mu_eff.re),
            sci(p.mu_eff.im),
            sci(p.beta_eff.re),
            sci(p.beta_eff.im),
            is_double_negative(&p) as u8
        );
    }
    let s0 = double_negative_threshold(&bg, mode.lambda)?;
    let doc = json!({
        "lambda_n": mode.lambda,
        "k_beta": bg.k_beta(),
        "double_negative_s0": s0,
        "double_negative_upper": crate::effective::S_MAX,
    });
    Ok(vec![
        write_file(out, "eff_closed_form.csv", &csv)?,
        write_file(out, "eff_closed_form.json", &to_json_string(&doc)?)?,
    ])
}

pub fn cmd_dipole_field(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bg = cfg.background()?;
    let eps_c = cfg.eps_c()?;
    let spec = cfg.incident()?;
    let probes = cfg.probes()?;
    let center = cfg.vec3_or("center", [0.5, 0.5, 0.5])?;
    let variant_name = cfg.raw("variant").unwrap_or("mode");
    let mesh_for_tensor = if variant_name == "tensor" {
        Some(cfg.mesh()?.unwrap_or(icosphere(cfg.u64_or("subdivisions", 3)? as u32)?))
    } else {
        None
    };
    let mode = cfg.resonant_mode()?;
    let mut particle = ParticleInstance::new(center, 1.0, eps_c, mode)?.with_guard(cfg.f64_or("guard", DEFAULT_GUARD)?);
    particle = match cfg.f64_opt("delta")? {
        Some(d) => ParticleInstance::new(center, d, eps_c, mode)?.with_guard(particle.guard),
        None => {
            let one = cfg.dilute(mode.c_n())?.with_n(1)?;
            particle.with_volume_factor(one.particle_volume() * one.v_tilde)
        }
    };
    let tensor = match &mesh_for_tensor {
        Some(mesh) => Some(polarization_tensor(&compute_spectrum(mesh, cfg.mode_count(mesh)?)?, &bg, eps_c, mesh)?),
        None => None,
    };
    let variant = match (variant_name, &tensor) {
        ("mode", _) => DipoleVariant::ResonantMode,
        ("anisotropic", _) => DipoleVariant::ResonantModeAnisotropic,
        ("tensor", Some(t)) => DipoleVariant::FullTensor(t),
        (other, _) => return Err(Error::Config(format!("unknown dipole variant '{other}'"))),
    };
    let u0 = incident_field(&bg, &spec, &center);
    let fields: Vec<CVec6> = probes
        .par_iter()
        .map(|x| scattered_field_dipole(&bg, &particle, &u0, x, variant))
        .collect::<Result<_>>()?;
    Ok(vec![write_file(out, "dipole_field.csv", &field_csv(&probes, &fields))?])
}

fn error_table(rows: &[crate::foldy::ErrorRow]) -> String {
    let mut s = String::from("N,rel_l2_error,eta,eps_c_re,eps_c_im\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n, sci(r.rel_l2_error), sci(r.eta), sci(r.eps_c.re), sci(r.eps_c.im));
    }
    s
}

pub fn cmd_foldy(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bg = cfg.background()?;
    let eps_c = cfg.eps_c()?;
    let spec = cfg.incident()?;
    let probes = cfg.probes()?;
    let mode = cfg.resonant_mode()?;
    let dcfg = cfg.dilute(mode.c_n())?;
    let n = cfg.u64_or("foldy_n", 1)?;
    let eta = cfg.f64_or("eta", 0.1 / n.max(1) as f64)?;
    let lattice = build_lattice(n, &dcfg)?;
    let choice = match cfg.raw("coupling").unwrap_or("finite") {
        "finite" => CouplingChoice::FiniteN,
        "reference" => CouplingChoice::Fixed(tilde_from_definition(&bg, eps_c, &dcfg, mode.lambda)?.matrix),
        other => return Err(Error::Config(format!("unknown coupling '{other}'"))),
    };
    let coupling = lattice_coupling(&bg, &lattice, eps_c, mode.lambda, choice)?;
    let state = solve_foldy(&bg, &lattice, &coupling, &spec, eta)?;
    let fields: Vec<CVec6> = probes
        .par_iter()
        .map(|x| eval_foldy_scattered(&bg, &lattice, &state, x))
        .collect::<Result<_>>()?;
    let mut written = vec![write_file(out, "foldy_probes.csv", &field_csv(&probes, &fields))?];
    let mut report = json!({
        "N": n,
        "particles": lattice.len(),
        "eta": eta,
        "delta": lattice.cfg.delta(),
        "residual": state.report.residual,
        "condition_estimate": state.report.condition_estimate,
        "unknowns": state.report.unknowns,
    });
    if cfg.raw("n_list").is_some() {
        let cmp = run_comparison(cfg, &bg, &dcfg, &mode, eps_c, &spec, &probes)?;
        written.push(write_file(out, "foldy_errors.csv", &error_table(&cmp.rows))?);
        report["comparison_grid_m"] = json!(cmp.grid_m);
    }
    written.push(write_file(out, "foldy_report.json", &to_json_string(&report)?)?);
    Ok(written)
}

fn run_comparison(
    cfg: &RunConfig,
    bg: &ChiralBackground,
    dcfg: &DiluteConfig,
    mode: &ResonantMode,
    eps_c: Complex64,
    spec: &PlaneWaveSpec,
    probes: &[Vec3],
) -> Result<crate::foldy::HomogenizationComparison> {
    let n_list = cfg.u64_list_or("n_list", &[2, 3, 4, 5])?;
    let eta = cfg.f64_or("eta", 0.1)?;
    let eta = if eta > 0.0 { eta } else { 0.1 };
    let m = cfg.u64_or("grid_m", 8)? as usize;
    compare_homogenization(bg, dcfg, mode.lambda, eps_c, &n_list, eta, probes, spec, m)
}

pub fn cmd_compare_hom(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bg = cfg.background()?;
    let eps_c = cfg.eps_c()?;
    let spec = cfg.incident()?;
    let probes = cfg.probes()?;
    let mode = cfg.resonant_mode()?;
    let dcfg = cfg.dilute(mode.c_n())?;
    let cmp = run_comparison(cfg, &bg, &dcfg, &mode, eps_c, &spec, &probes)?;
    let errs: Vec<f64> = cmp.rows.iter().map(|r| r.rel_l2_error).collect();
    let doc = json!({
        "grid_m": cmp.grid_m,
        "reference_N": dcfg.n,
        "coupling": cmp.coupling.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
        "homogenized_residual": cmp.homogenized.report.residual,
        "monotone_decreasing": errs.windows(2).all(|w| w[1] < w[0]),
        "rel_l2_errors": errs,
    });
    Ok(vec![
        write_file(out, "compare_hom.csv", &error_table(&cmp.rows))?,
        write_file(out, "compare_hom.json", &to_json_string(&doc)?)?,
    ])
}

pub fn cmd_check_assumptions(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    // Report rather than refuse: the background is built with the override.
    let mut relaxed = cfg.clone();
    relaxed.set("allow_kbeta_ge_1", "true")?;
    let bg = relaxed.background()?;
    let mode = cfg.resonant_mode()?;
    let lambda_vol = cfg.f64_or("Lambda", 3.0)?;
    let n = cfg.u64_or("N", 125)?;
    let a = cfg.f64_or("a", 0.965)?;
    let fill = lambda_vol.cbrt() * (n as f64).powf(-a);
    let eps_c = cfg.eps_c()?;
    let dist_probes = cfg.u64_or("dist_probes", 27)? as usize;
    let eta = cfg.f64_or("eta", 0.1)?;
    let eta = if eta > 0.0 { eta } else { 0.1 };

    let mut doc = json!({
        "k_beta": bg.k_beta(),
        "k_beta_below_one": bg.k_beta() < 1.0,
        "fill_ratio": fill,
        "dilute": fill < 1.0,
        "lambda_n": mode.lambda,
        "c_n": mode.c_n(),
    });
    if let Ok(star) = resonant_eps(&bg, mode.lambda) {
        doc["eps_star"] = cjson(star);
        doc["eps_c_minus_eps_star"] = json!((eps_c - star).norm());
    }
    if fill < 1.0 {
        let dcfg = cfg.dilute(mode.c_n())?;
        doc["delta"] = json!(dcfg.delta());
        doc["dilution_factor"] = json!(dcfg.dilution_factor());
        if let Ok(t) = tilde_from_definition(&bg, eps_c, &dcfg, mode.lambda) {
            doc["compatibility_residual"] = json!(t.compatibility_residual(&bg));
        }
        let stat_cfg = DiluteConfig::new(0.5, 1, a, mode.c_n())?;
        let lattice_ns = cfg.u64_list_or("n_list", &[2, 3, 4, 5, 6])?;
        let mut dist = Vec::new();
        let mut inv = Vec::new();
        for &ln in &lattice_ns {
            let lat = build_lattice(ln, &stat_cfg)?;
            dist.push(json!({ "N": ln, "statistic": check_distribution(&lat, &bg, eta, dist_probes, TestPair::PolynomialWave)? }));
            if ln >= 2 {
                let s = uniform_invertibility_stat(&lat, &bg)?;
                inv.push(json!({ "N": ln, "statistic": s, "times_N_6a": s * (ln as f64).powf(6.0 * a) }));
            }
        }
        doc["distribution"] = json!(dist);
        doc["uniform_invertibility"] = json!(inv);
    }
    Ok(vec![write_file(out, "assumptions.json", &to_json_string(&doc)?)?])
}
