use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiral-meta"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn figure_presets() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = run(d, &["eff-sweep", "--preset", "figure1-right", "--out", "right"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(d, "right/eff_sweep.csv");
    assert_eq!(
        csv.lines().next().unwrap(),
        "eps_c,re_eps_eff,im_eps_eff,re_mu_eff,im_mu_eff,double_negative,out_of_assumption"
    );
    assert_eq!(csv.lines().count(), 2001);
    assert!(!csv.contains('\r'));
    assert!(column(&csv, 3).iter().all(|m| (m - 1.0).abs() < 1e-10));

    let out = run(d, &["eff-sweep", "--preset", "figure1-left", "--out", "left"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(d, "left/eff_sweep_summary.json");
    let s = &summary["summary"];
    assert!(!s["double_negative_intervals"].as_array().unwrap().is_empty());
    assert!(s["abscissa_deviation"].as_f64().unwrap().is_finite());
    assert_eq!(s["paper_abscissa"].as_f64(), Some(-2.94455));
    let left = read(d, "left/eff_sweep.csv");
    assert!(column(&left, 6).iter().all(|f| *f == 1.0));
    assert!(column(&left, 5).contains(&1.0));
}

#[test]
fn deterministic_output() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        assert_eq!(run(d, &["eff-sweep", "--preset", "figure1-left", "--out", out]).status.code(), Some(0));
    }
    assert_eq!(read(d, "a/eff_sweep.csv"), read(d, "b/eff_sweep.csv"));
    assert_eq!(read(d, "a/eff_sweep_summary.json"), read(d, "b/eff_sweep_summary.json"));
}

#[test]
fn numbers_have_17_significant_digits() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "r.cfg", "beta_m = 0\n");
    assert_eq!(run(d, &["resonances", "--config", "r.cfg"]).status.code(), Some(0));
    let text = read(d, "resonances.json");
    let doc: Value = serde_json::from_str(&text).unwrap();
    let star = doc["modes"][0]["eps_star"][0].as_f64().unwrap();
    assert!((star + 2.0).abs() < 1e-14, "{star}");
    // Every float is d.dddddddddddddddde±x.
    for tok in text.split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']') {
        if tok.parse::<f64>().is_err() {
            continue;
        }
        if let Some((mant, _)) = tok.split_once('e') {
            let digits = mant.trim_start_matches('-').replace('.', "");
            assert_eq!(digits.len(), 17, "{tok}");
        }
    }
}

#[test]
fn chirality_guard_and_override() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "k.cfg", "beta_m = 1.09\nlambda_n = 0.16666666666666666\n");
    let out = run(d, &["eff-closed-form", "--config", "k.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_m*beta_m"));
    let out = run(d, &["eff-closed-form", "--config", "k.cfg", "--allow-kbeta-ge-1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "bad.cfg", "# header\neps_m = 1\nepsm = 2\n");
    let out = run(d, &["resonances", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epsm") && err.contains("line 3"), "{err}");
    assert_eq!(run(d, &["resonances", "--config", "missing.cfg"]).status.code(), Some(2));
    assert_eq!(run(d, &["resonances", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(run(d, &["resonances", "--threads", "0"]).status.code(), Some(2));
    write(d, "neg.cfg", "eps_m = -1\n");
    assert_eq!(run(d, &["resonances", "--config", "neg.cfg"]).status.code(), Some(2));
    write(d, "p.csv", "x,y,z\n1,2\n");
    write(d, "p.cfg", "probes = p.csv\nguard = 0\n");
    assert_eq!(run(d, &["dipole-field", "--config", "p.cfg"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    // λ = 1/2 has no finite resonant permittivity.
    write(d, "s.cfg", "beta_m = 0.3\nlambda_n = 0.5\n");
    assert_eq!(run(d, &["resonances", "--config", "s.cfg"]).status.code(), Some(3));
}

#[test]
fn single_particle_foldy_equals_dipole_field() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "probes.csv", "x,y,z\n2,0.5,0.5\n0.5,-1.5,0.5\n# comment\n-1,-1,2.5\n");
    let common = "beta_m = 0.5\nLambda = 0.5\neps_c = -4\nprobes = probes.csv\n";
    write(d, "dip.cfg", &format!("{common}guard = 0\n"));
    write(d, "fol.cfg", &format!("{common}foldy_n = 1\neta = 0\n"));
    assert_eq!(run(d, &["dipole-field", "--config", "dip.cfg", "--out", "dip"]).status.code(), Some(0));
    assert_eq!(run(d, &["foldy", "--config", "fol.cfg", "--out", "fol"]).status.code(), Some(0));
    let dip = read(d, "dip/dipole_field.csv");
    assert_eq!(dip, read(d, "fol/foldy_probes.csv"));
    assert_eq!(dip.lines().count(), 4);
    assert_eq!(dip.lines().next().unwrap().split(',').count(), 15);
}

#[test]
fn foldy_error_table_decreases() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "h.cfg", "beta_m = 0.5\nN = 7\nn_list = 2,3,4\neta = 0.1\nfoldy_n = 2\n");
    let out = run(d, &["foldy", "--config", "h.cfg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(d, "foldy_errors.csv");
    assert_eq!(table.lines().next().unwrap(), "N,rel_l2_error,eta,eps_c_re,eps_c_im");
    let errs = column(&table, 1);
    assert_eq!(errs.len(), 3);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");

    assert_eq!(run(d, &["compare-hom", "--config", "h.cfg"]).status.code(), Some(0));
    assert_eq!(read(d, "compare_hom.csv"), table);
    assert_eq!(json(d, "compare_hom.json")["monotone_decreasing"], Value::Bool(true));
}

#[test]
fn spectrum_and_assumption_reports() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "m.cfg", "subdivisions = 2\nmode_count = 6\n");
    assert_eq!(run(d, &["np-spectrum", "--config", "m.cfg"]).status.code(), Some(0));
    let spec = json(d, "np_spectrum.json");
    for key in ["eigenvalues", "moments", "gram_certificate", "residuals"] {
        assert!(spec.get(key).is_some(), "missing {key}");
    }
    assert_eq!(spec["eigenvalues"].as_array().unwrap().len(), 6);

    write(d, "a.cfg", "beta_m = 1.2\nn_list = 2,3\n");
    assert_eq!(run(d, &["check-assumptions", "--config", "a.cfg"]).status.code(), Some(0));
    let rep = json(d, "assumptions.json");
    assert_eq!(rep["k_beta_below_one"], Value::Bool(false));
    assert_eq!(rep["distribution"].as_array().unwrap().len(), 2);
}

#[test]
fn mesh_driven_resonances() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(
        d,
        "tet.off",
        "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n",
    );
    write(d, "m.cfg", "mesh = icosphere\nsubdivisions = 2\nbeta_m = 0.2\n");
    assert_eq!(run(d, &["resonances", "--config", "m.cfg"]).status.code(), Some(0));
    let modes = json(d, "resonances.json")["modes"].as_array().unwrap().clone();
    assert!(!modes.is_empty());
    assert!(modes.iter().all(|m| m.get("det_root_direct").is_some()));
    write(d, "t.cfg", "mesh = tet.off\nmode_count = 2\n");
    assert_eq!(run(d, &["np-spectrum", "--config", "t.cfg"]).status.code(), Some(0));
}
