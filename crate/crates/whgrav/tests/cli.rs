//! End-to-end tests of the `whgrav` binary: document shapes, exit codes,
//! error envelopes, CSV layouts, and output determinism.

use serde_json::Value;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_whgrav"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("whgrav spawns")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

/// Parse stdout as JSON after asserting the run succeeded.
fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed; stderr:\n{}",
        stderr_str(out)
    );
    serde_json::from_str(&stdout_str(out)).expect("stdout is JSON")
}

/// The structured error object every failing command prints to stderr.
fn stderr_error(out: &Output) -> Value {
    let body: Value = serde_json::from_str(stderr_str(out).trim()).expect("stderr is JSON");
    body["error"].clone()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    fs::create_dir_all(&dir).expect("tmp dir");
    dir
}

fn re(v: &Value) -> f64 {
    v[0].as_f64().expect("re part")
}

fn im(v: &Value) -> f64 {
    v[1].as_f64().expect("im part")
}

#[test]
fn factorize_emits_complete_solution_document() {
    let out = run(&[
        "factorize",
        "--preset",
        "pulse",
        "--a",
        "1",
        "--b",
        "0.5",
        "--rho",
        "1",
        "--v",
        "0.4",
    ]);
    let doc = stdout_json(&out);

    assert_eq!(doc["lambda"], -1);
    assert_eq!(doc["rho"], 1.0);
    assert_eq!(doc["v"], 0.4);
    assert_eq!(doc["contour"]["kind"], "circle");
    assert_eq!(doc["contour"]["nodes"], 256);
    assert_eq!(doc["placement"], "geometric");
    assert!(
        doc.get("deformation").is_none(),
        "no deformation on a plain solve"
    );

    let channels = doc["channels"].as_array().expect("channels array");
    assert_eq!(channels.len(), 2);
    let mono = doc["monodromy"]["channels"]
        .as_array()
        .expect("monodromy channels");
    assert_eq!(mono.len(), 2);

    for ch in channels {
        assert!(ch["backend"].is_string());
        // m = exp(log_m), reported redundantly for consumers.
        let m = (re(&ch["m"]), im(&ch["m"]));
        let lm = (re(&ch["log_m"]), im(&ch["log_m"]));
        let exp = (lm.0.exp() * lm.1.cos(), lm.0.exp() * lm.1.sin());
        assert!((m.0 - exp.0).abs() + (m.1 - exp.1).abs() < 1e-12);
        // X(0) = 1 heads every Taylor table.
        let x0 = &ch["x_taylor"][0];
        assert_eq!(re(x0), 1.0);
        assert_eq!(im(x0), 0.0);
    }

    // The two diagonal channels multiply to the identity.
    let prod_re = re(&channels[0]["m"]) * re(&channels[1]["m"])
        - im(&channels[0]["m"]) * im(&channels[1]["m"]);
    assert!((prod_re - 1.0).abs() < 1e-12);
}

#[test]
fn factorize_grid_wraps_document_with_point_values() {
    let out = run(&[
        "factorize",
        "--preset",
        "einstein_rosen",
        "--b",
        "1.359140914",
        "--grid",
        "1:1.2:3,0:0.1:3",
    ]);
    let body = stdout_json(&out);
    assert!(body["document"]["channels"].is_array());

    let rows = body["grid_values"].as_array().expect("grid_values");
    assert_eq!(rows.len(), 9);
    for row in rows {
        assert!(row["rho"].as_f64().unwrap() >= 1.0);
        let delta = row["delta"].as_f64().expect("delta");
        let m = row["m"].as_array().expect("per-channel m");
        assert_eq!(m.len(), 2);
        // Channel 1 carries Δ for this family; the pair multiplies to 1.
        assert!((re(&m[0]) - delta).abs() < 1e-12 * delta.abs().max(1.0));
        assert!((re(&m[0]) * re(&m[1]) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn verify_preset_full_suite_passes_and_reports() {
    let dir = tmp("verify_pass");
    let report_path = dir.join("report.json");
    let out = run(&[
        "verify",
        "--preset",
        "pulse",
        "--a",
        "1",
        "--b",
        "0.5",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    let text = stdout_str(&out);
    assert_eq!(out.status.code(), Some(0), "verify output:\n{text}");
    assert!(text.contains("overall: pass"));

    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["tolerance"], 1e-6);
    let checks = report["checks"].as_array().expect("checks");
    assert_eq!(checks.len(), 10);
    let names: Vec<&str> = checks
        .iter()
        .map(|c| c["check"].as_str().unwrap())
        .collect();
    for expected in [
        "x0_normalization",
        "det_unimodular",
        "monodromy_symmetry",
        "factorization_symmetry",
        "field_equation",
        "curvature_compatibility",
        "psi_mixed_partials",
        "lax_pair",
        "a_rho_from_x",
        "a_v_from_x",
    ] {
        assert!(names.contains(&expected), "missing check {expected}");
    }
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_corrupted_monodromy_fails_field_equation() {
    let out = run(&[
        "verify",
        "--preset",
        "pulse",
        "--a",
        "1",
        "--b",
        "0.5",
        "--corrupt-m",
        "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout_str(&out);
    assert!(text.contains("overall: FAIL"));
    let field_line = text
        .lines()
        .find(|l| l.starts_with("field_equation"))
        .expect("field_equation row");
    assert!(field_line.contains("FAIL"), "line: {field_line}");
}

#[test]
fn verify_refinement_ratio_is_fourth_order() {
    let dir = tmp("verify_refine");
    let report_path = dir.join("report.json");
    let out = run(&[
        "verify",
        "--preset",
        "einstein_rosen",
        "--b",
        "1.359140914",
        "--checks",
        "field_equation",
        "--refine",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let tail = text
        .split("refinement ratio ")
        .nth(1)
        .expect("ratio printed in the table");
    let ratio: f64 = tail.split_whitespace().next().unwrap().parse().unwrap();
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");

    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let stored = report["checks"][0]["refinement_ratio"]
        .as_f64()
        .expect("ratio in JSON");
    assert!((stored - ratio).abs() < 0.01);
}

#[test]
fn unknown_check_and_mode_are_config_errors() {
    let out = run(&["verify", "--preset", "pulse", "--checks", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("bogus"));

    let out = run(&["verify", "--preset", "pulse", "--mode", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "config");
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let out = run(&["factorize", "--preset", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr_str(&out).is_empty());
}

#[test]
fn compose_rejects_mismatched_contours_with_exit_3() {
    let dir = tmp("compose_mismatch");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    let fine = run(&[
        "factorize",
        "--preset",
        "einstein_rosen",
        "--b",
        "0.3",
        "--rho",
        "1.1",
        "--v",
        "0.3",
        "--nodes",
        "256",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(fine.status.success());
    let coarse = run(&[
        "factorize",
        "--preset",
        "einstein_rosen",
        "--k",
        "2",
        "--b",
        "0.4",
        "--rho",
        "1.1",
        "--v",
        "0.3",
        "--nodes",
        "128",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(coarse.status.success());

    let out = run(&["compose", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out)["kind"], "contour_mismatch");
}

#[test]
fn deform_attaches_balanced_zero_pole_data() {
    let dir = tmp("deform_doc");
    let base_path = dir.join("base.json");
    let solve = run(&[
        "factorize",
        "--preset",
        "kasner",
        "--N",
        "2",
        "--a",
        "1.1125",
        "--rho",
        "0.5",
        "--contour",
        "tau-a-inside",
        "--out",
        base_path.to_str().unwrap(),
    ]);
    assert!(solve.status.success());

    let out = run(&[
        "deform",
        "--config",
        base_path.to_str().unwrap(),
        "--omega",
        "1.5",
        "--mult",
        "1",
    ]);
    let doc = stdout_json(&out);
    let per_channel = doc["deformation"]["per_channel"]
        .as_array()
        .expect("deformation");
    assert_eq!(per_channel.len(), 2);
    assert_eq!(per_channel[0][0]["multiplicity"], 1);
    assert_eq!(per_channel[1][0]["multiplicity"], -1);
    assert_eq!(re(&per_channel[0][0]["omega"]), 1.5);

    // The deformation moves M but keeps the pair unimodular.
    let base: Value = serde_json::from_str(&fs::read_to_string(&base_path).unwrap()).unwrap();
    let m_base = re(&base["channels"][0]["m"]);
    let m_def = re(&doc["channels"][0]["m"]);
    assert!((m_base - m_def).abs() > 1e-3);
    let prod = re(&doc["channels"][0]["m"]) * re(&doc["channels"][1]["m"]);
    assert!((prod - 1.0).abs() < 1e-9);
}

#[test]
fn invert_then_compose_gives_the_identity_solution() {
    let dir = tmp("group_roundtrip");
    let a = dir.join("a.json");
    let inv = dir.join("inv.json");
    let solve = run(&[
        "factorize",
        "--preset",
        "pulse",
        "--a",
        "1",
        "--b",
        "0.5",
        "--rho",
        "1",
        "--v",
        "0.2",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(solve.status.success());
    let invert = run(&[
        "invert",
        a.to_str().unwrap(),
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert!(
        invert.status.success(),
        "invert stderr: {}",
        stderr_str(&invert)
    );

    let out = run(&["compose", a.to_str().unwrap(), inv.to_str().unwrap()]);
    let product = stdout_json(&out);
    for ch in product["channels"].as_array().unwrap() {
        assert!((re(&ch["m"]) - 1.0).abs() < 1e-12);
        assert!(im(&ch["m"]).abs() < 1e-12);
        // X ≡ 1: every Taylor coefficient past the constant vanishes.
        for coeff in ch["x_taylor"].as_array().unwrap().iter().skip(1) {
            assert!(re(coeff).abs() + im(coeff).abs() < 1e-9);
        }
    }
}

#[test]
fn metric_csv_has_stable_header_and_zero_b_field() {
    let dir = tmp("metric_csv");
    let path = dir.join("metric.csv");
    let out = run(&[
        "metric",
        "--preset",
        "einstein_rosen",
        "--b",
        "1.359140914",
        "--grid",
        "1:1.4:3,0:0.2:3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    // Path-independence of the ψ integral is reported on stderr.
    assert!(stderr_str(&out).contains("psi"));

    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'), "CSV must use LF line endings");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rho,v,delta,b,psi,real_mask"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 6);
        let delta: f64 = cols[2].parse().unwrap();
        let b: f64 = cols[3].parse().unwrap();
        assert!(delta > 0.0);
        assert_eq!(b, 0.0, "diagonal data has no off-diagonal field");
        assert_eq!(cols[5], "true");
    }
}

#[test]
fn kasner_line_element_descriptor() {
    let out = run(&["metric", "--preset", "kasner", "--line-element", "2"]);
    let le = stdout_json(&out);
    assert_eq!(le["n"], 2);
    assert_eq!(le["exponents_exact"][0], "2/3");
    assert_eq!(le["exponents_exact"][1], "-1/3");
    assert_eq!(le["exponents_exact"][2], "2/3");
    let sum: f64 = (0..3).map(|i| le["exponents"][i].as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-15);
    assert_eq!(le["c"], 0.5625);
    assert!((le["t_power_for_rho"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn current_csv_lists_channel_components() {
    let dir = tmp("current_csv");
    let path = dir.join("current.csv");
    let out = run(&[
        "current",
        "--preset",
        "kasner",
        "--N",
        "2",
        "--a",
        "1.1125",
        "--grid",
        "0.5:0.9:5,-0.2:0.2:5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr_str(&out).contains("conservation"));

    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some(
            "rho,v,j_rho_1_re,j_rho_1_im,j_v_1_re,j_v_1_im,j_rho_2_re,j_rho_2_im,j_v_2_re,j_v_2_im"
        )
    );
    assert_eq!(lines.count(), 25);
}

#[test]
fn example_lists_presets_and_prints_runnable_commands() {
    let listing = stdout_json(&run(&["example"]));
    let presets: Vec<&str> = listing["presets"]
        .as_array()
        .expect("presets")
        .iter()
        .map(|p| p.as_str().unwrap())
        .collect();
    for name in ["einstein_rosen", "kasner", "pulse"] {
        assert!(presets.contains(&name));
    }

    let body = stdout_json(&run(&["example", "pulse"]));
    assert!(body["monodromy"]["channels"].is_array());
    assert_eq!(body["contour"]["kind"], "circle");
    let commands = body["commands"].as_array().expect("commands");
    assert!(!commands.is_empty());
    for cmd in commands {
        assert!(cmd.as_str().unwrap().starts_with("whgrav "));
    }
}

/// Every suggested command in every example listing actually runs.
#[test]
fn example_commands_are_executable() {
    for preset in ["einstein_rosen", "kasner", "pulse"] {
        let body = stdout_json(&run(&["example", preset]));
        for cmd in body["commands"].as_array().unwrap() {
            let text = cmd.as_str().unwrap();
            let args: Vec<&str> = text.split_whitespace().skip(1).collect();
            let out = run(&args);
            assert_eq!(
                out.status.code(),
                Some(0),
                "suggested command failed: {text}\nstderr: {}",
                stderr_str(&out)
            );
        }
    }
}

#[test]
fn outputs_are_bit_identical_across_runs_and_thread_counts() {
    let args = [
        "factorize",
        "--preset",
        "pulse",
        "--a",
        "1",
        "--b",
        "0.5",
        "--rho",
        "1.3",
        "--v",
        "-0.4",
    ];
    let single = bin()
        .args(args)
        .env("WHGRAV_THREADS", "1")
        .output()
        .expect("run");
    let quad = bin()
        .args(args)
        .env("WHGRAV_THREADS", "4")
        .output()
        .expect("run");
    let repeat = bin()
        .args(args)
        .env("WHGRAV_THREADS", "4")
        .output()
        .expect("run");
    assert!(single.status.success());
    assert_eq!(single.stdout, quad.stdout);
    assert_eq!(quad.stdout, repeat.stdout);

    let grid_args = [
        "metric",
        "--preset",
        "pulse",
        "--a",
        "1",
        "--b",
        "0.5",
        "--grid",
        "0.8:1.2:5,-0.2:0.2:5",
    ];
    let m1 = bin()
        .args(grid_args)
        .env("WHGRAV_THREADS", "1")
        .output()
        .expect("run");
    let m4 = bin()
        .args(grid_args)
        .env("WHGRAV_THREADS", "4")
        .output()
        .expect("run");
    assert!(m1.status.success());
    assert_eq!(m1.stdout, m4.stdout);
}
