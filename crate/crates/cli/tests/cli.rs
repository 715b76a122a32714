use std::path::Path;
use std::process::{Command, Output};

use nhse_core::io::parse_model_file;

fn nhse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhse"))
        .args(args)
        .current_dir(dir)
        .env_remove("NHSE_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = nhse(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn export(dir: &Path, id: &str, sets: &[&str]) -> String {
    let file = format!("{id}.json");
    let mut args = vec!["zoo", "export", id, "--out", &file];
    for s in sets {
        args.extend(["--set", s]);
    }
    ok(dir, &args);
    file
}

#[test]
fn zoo_list_names_every_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["zoo", "list"]);
    for id in ["hatano_nelson", "eq16", "eq18", "s37", "s39", "s41", "s43", "s45", "s47"] {
        assert!(out.lines().any(|l| l.starts_with(id)), "{id} missing");
    }
}

#[test]
fn zoo_export_applies_overrides_and_loads() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq18", &["gamma=0.1"]);
    let loaded = parse_model_file(dir.path().join(&f)).unwrap();
    assert!(loaded.warnings.is_empty());
    let g = loaded.model.hopping(&[0]).unwrap();
    assert_eq!(g[(0, 1)].re, 0.1);
    let out = nhse(dir.path(), &["zoo", "export", "eq18", "--set", "nope=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR UnknownParameter: "), "{}", stderr(&out));
}

#[test]
fn obc_spectrum_csv_has_one_row_per_state() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq18", &[]);
    ok(dir.path(), &["spectrum", "--model", &f, "--bc", "obc", "--size", "40", "--out", "s.csv", "--svg", "s.svg"]);
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 80);
    // the open chain at gamma = 0 has the real level 2.53
    assert!(rows.iter().any(|&(re, im)| (re - 2.53).abs() < 0.02 && im.abs() < 0.02));
    let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 80);
}

#[test]
fn pbc_spectrum_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq16", &[]);
    let csv = ok(dir.path(), &["spectrum", "--model", &f, "--bc", "pbc", "--size", "6,5"]);
    assert_eq!(csv.lines().count(), 1 + 6 * 5 * 2);
}

#[test]
fn localize_writes_profile_report_and_heat_map() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq16", &[]);
    ok(
        dir.path(),
        &["localize", "--model", &f, "--size", "10", "--energy", "-1.5+0.2i", "--out", "p.csv", "--report", "r.json", "--svg", "h.svg"],
    );
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x_1,x_2,prob"));
    assert_eq!(csv.lines().count(), 101);
    let total: f64 = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    for key in ["index", "energy", "mu_fit", "mu_stderr", "class", "boundary_mass", "half_slopes"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    let svg = std::fs::read_to_string(dir.path().join("h.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 1 + 100);
}

#[test]
fn winding_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "hatano_nelson", &[]);
    let w: serde_json::Value = serde_json::from_str(&ok(dir.path(), &["winding", "--model", &f, "--energy", "0.5+0.1i"])).unwrap();
    assert_eq!(w["value"], -1);
    assert!(w["min_abs_det"].as_f64().unwrap() > 0.0);
    assert!(w["grid"].as_u64().unwrap() >= 64);
    assert_eq!(w.as_object().unwrap().len(), 3);
    // on the amoeba boundary mu = ln(2)/2 the real energy 0 sits on det = 0
    let mu = format!("{}", 0.5 * 2f64.ln());
    let w: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["winding", "--model", &f, "--energy", "0", "--mu", &mu])).unwrap();
    assert_eq!(w["value"], "ill_defined");
}

#[test]
fn ronkin_minimum_of_hatano_nelson() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "hatano_nelson", &[]);
    let m: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["ronkin", "--model", &f, "--energy", "0.3", "--minimize"])).unwrap();
    let mu = m["mu_star"][0].as_f64().unwrap();
    assert!((mu - 0.5 * 2f64.ln()).abs() < 1e-2, "{mu}");
    assert_eq!(m["verdict"], "boundary_of_amoeba");
    let v: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["ronkin", "--model", &f, "--energy", "0.3", "--mu", "0.1"])).unwrap();
    assert!(v["value"].as_f64().is_some() && v["gradient"][0].as_f64().is_some());
}

#[test]
fn nu_csv_and_pairs_for_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq18", &["gamma=0.1"]);
    ok(dir.path(), &["nu", "--model", &f, "--energy", "1.87+0.64i", "--out", "nu.csv", "--pairs", "pairs.json"]);
    let csv = std::fs::read_to_string(dir.path().join("nu.csv")).unwrap();
    assert_eq!(csv, "k_transverse,nu\n,1\n");
    let pairs: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("pairs.json")).unwrap()).unwrap();
    assert_eq!(pairs[0]["per_pair_windings"].as_array().unwrap().len(), 2);
}

#[test]
fn nu_needs_trs_dagger() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "hatano_nelson", &[]);
    let out = nhse(dir.path(), &["nu", "--model", &f, "--energy", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR Precondition: "), "{}", stderr(&out));
}

#[test]
fn verify_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq16", &[]);
    let table = ok(dir.path(), &["verify", "--model", &f, "--symmetry", "trs", "--size", "14", "--samples", "12", "--out", "v.json"]);
    assert!(table.starts_with("symmetry trs  expected SameBoundary"));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(r["expected"], "same_boundary");
    assert_eq!(r["samples"].as_array().unwrap().len(), 12);
    assert_eq!(r["strong_mismatches"], 0);
}

#[test]
fn verify_rejects_missing_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq16", &[]);
    let out = nhse(dir.path(), &["verify", "--model", &f, "--symmetry", "phs", "--size", "6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR NoIntertwiner: "), "{}", stderr(&out));
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq18", &[]);
    std::fs::write(
        dir.path().join("dup.json"),
        r#"{"name":"d","dimension":1,"orbitals":1,"hoppings":[{"vector":[1],"re":[[1]],"im":[[0]]},{"vector":[1],"re":[[2]],"im":[[0]]}]}"#,
    )
    .unwrap();
    let cases: [(&[&str], &str); 6] = [
        (&["spectrum", "--model", &f, "--bogus"], "ERROR UsageError: "),
        (&["spectrum", "--model", "missing.json"], "ERROR IoError: "),
        (&["winding", "--model", &f, "--energy", "1+2j"], "ERROR ParseError: "),
        (&["spectrum", "--model", "dup.json", "--size", "8"], "ERROR InvalidModel: "),
        (&["spectrum", "--model", &f, "--size", "4,4"], "ERROR DimensionMismatch: "),
        (&["winding", "--model", &f, "--energy", "1", "--axis", "y"], "ERROR Precondition: "),
    ];
    for (args, prefix) in cases {
        let out = nhse(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(prefix), "{args:?}: {err}");
    }
    let dup = stderr(&nhse(dir.path(), &["spectrum", "--model", "dup.json"]));
    assert!(dup.contains("duplicate vector"), "{dup}");
}

#[test]
fn broken_declared_symmetry_warns_but_loads() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq16", &[]);
    let path = dir.path().join(&f);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["hoppings"][0]["im"][0][0] = 1e-3.into();
    std::fs::write(&path, v.to_string()).unwrap();
    let out = nhse(dir.path(), &["spectrum", "--model", &f, "--size", "4"]);
    assert!(out.status.success());
    assert!(stderr(&out).starts_with("WARNING: "), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 32);
}

#[test]
fn thread_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "eq18", &[]);
    let a = ok(dir.path(), &["--threads", "1", "spectrum", "--model", &f, "--size", "12"]);
    let out = Command::new(env!("CARGO_BIN_EXE_nhse"))
        .args(["spectrum", "--model", &f, "--size", "12"])
        .current_dir(dir.path())
        .env("NHSE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), a);
    let bad = Command::new(env!("CARGO_BIN_EXE_nhse"))
        .args(["spectrum", "--model", &f])
        .current_dir(dir.path())
        .env("NHSE_THREADS", "many")
        .output()
        .unwrap();
    assert!(stderr(&bad).starts_with("ERROR ParseError: "));
}
