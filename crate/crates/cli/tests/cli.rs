use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarsvbrdf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sphere_scene(dir: &Path, vertices: usize, views: usize, material: &str) -> PathBuf {
    let path = dir.join("scene.json");
    let text = format!(
        r#"{{
  "schema_version": 1,
  "generator": {{
    "radius": 0.1, "vertices": {vertices}, "views": {views}, "view_distance": 0.9, "seed": 1,
    "material": {material}
  }}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

const MATERIAL: &str =
    r#"{"eta": 1.5, "rho_d": [0.6, 0.3, 0.2], "rho_s": 0.5, "sigma_s": 0.2, "rho_ss": [0.1, 0.05, 0.05], "sigma_ss": 0.95}"#;
const DIFFUSE: &str =
    r#"{"eta": 1.5, "rho_d": [0.5, 0.5, 0.5], "rho_s": 0.0, "sigma_s": 0.2, "rho_ss": [0.0, 0.0, 0.0], "sigma_ss": 0.95}"#;

fn rendered(vertices: usize, views: usize, material: &str) -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let scene = sphere_scene(dir.path(), vertices, views, material);
    let out = dir.path().join("render");
    ok(&["render", "--scene", s(&scene), "--out", s(&out)]);
    (dir, scene, out.join("observations.bin"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn render_writes_twelve_rasters_for_three_views() {
    let (dir, _, bundle) = rendered(300, 3, MATERIAL);
    let out = dir.path().join("render");
    let pfm = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pfm")).count();
    assert_eq!(pfm, 12);
    assert!(bundle.exists());
    let m = manifest(&out);
    assert_eq!(m["views"], 3);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["seeds"]["render"].is_u64());
}

#[test]
fn identical_renders_give_identical_bundles() {
    let dir = TempDir::new().unwrap();
    let scene = sphere_scene(dir.path(), 200, 4, MATERIAL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["render", "--scene", s(&scene), "--out", s(out), "--noise", "realistic", "--render-seed", "7"]);
    }
    let read = |p: &Path| std::fs::read(p.join("observations.bin")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = dir.path().join("c");
    ok(&["render", "--scene", s(&scene), "--out", s(&c), "--noise", "realistic", "--render-seed", "7", "--threads", "3"]);
    assert_eq!(read(&a), read(&c));
}

#[test]
fn manifest_hash_tracks_config_fields() {
    let dir = TempDir::new().unwrap();
    let scene = sphere_scene(dir.path(), 100, 3, MATERIAL);
    let hash = |extra: &[&str]| {
        let out = dir.path().join(format!("r{}", extra.len()));
        let mut args = vec!["render", "--scene", s(&scene), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        manifest(&out)["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash(&[]);
    assert_ne!(base, hash(&["--iterations", "11"]));
    assert_ne!(base, hash(&["--lambda-g", "0.2", "--clusters", "8"]));
    assert_eq!(base, hash(&["--iterations", "10", "--clusters", "8", "--virtuals", "180"]));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = TempDir::new().unwrap();
    let scene = sphere_scene(dir.path(), 100, 3, MATERIAL);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"iterations": 4, "seeds": {"render": 3}}"#).unwrap();
    let out = dir.path().join("r");
    ok(&["render", "--scene", s(&scene), "--out", s(&out), "--config", s(&cfg), "--clusters", "5"]);
    let m = manifest(&out);
    assert_eq!(m["config"]["iterations"], 4);
    assert_eq!(m["config"]["clusters"], 5);
    assert_eq!(m["seeds"]["render"], 3);

    std::fs::write(&cfg, r#"{"iteration": 4}"#).unwrap();
    let bad = run(&["render", "--scene", s(&scene), "--out", s(&out), "--config", s(&cfg)]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("iteration"));
}

#[test]
fn invalid_scene_and_unwritable_output_fail() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("bad.json");
    std::fs::write(&scene, r#"{"schema_version": 1, "vertices": [], "extra": 1}"#).unwrap();
    let out = run(&["render", "--scene", s(&scene), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("extra"));

    let good = sphere_scene(dir.path(), 100, 3, MATERIAL);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&["render", "--scene", s(&good), "--out", s(&blocker.join("sub"))]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn decompose_writes_observables() {
    let (dir, scene, bundle) = rendered(200, 3, MATERIAL);
    let out = dir.path().join("dec");
    ok(&["decompose", "--bundle", s(&bundle), "--out", s(&out), "--scene", s(&scene)]);
    let csv = std::fs::read_to_string(out.join("observables.csv")).unwrap();
    assert!(csv.starts_with("vertex,view,i_d_r"));
    assert!(out.join("view002_i_alpha.pfm").exists());
}

#[test]
fn truth_initialized_inversion_reports_near_zero_errors() {
    let (dir, scene, bundle) = rendered(300, 30, MATERIAL);
    let out = dir.path().join("inv");
    ok(&["invert", "--bundle", s(&bundle), "--scene", s(&scene), "--out", s(&out), "--truth-init", "--iterations", "1"]);
    let summary = std::fs::read_to_string(out.join("truth_summary.txt")).unwrap();
    let eta_err: f64 = summary
        .lines()
        .find(|l| l.starts_with("mean eta relative error"))
        .and_then(|l| l.split_whitespace().last())
        .map(|v| v.trim_end_matches('%').parse().unwrap())
        .unwrap();
    assert!(eta_err < 0.1, "{summary}");
    for f in ["params.csv", "iterations.csv", "truth.csv", "maps/eta.pfm", "maps/rho_d.pfm", "maps/sigma_s.pfm"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn closed_loop_inversion_is_accurate_and_reproducible() {
    let (dir, scene, bundle) = rendered(300, 30, MATERIAL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["invert", "--bundle", s(&bundle), "--scene", s(&scene), "--out", s(&a), "--iterations", "3"]);
    ok(&["invert", "--bundle", s(&bundle), "--scene", s(&scene), "--out", s(&b), "--iterations", "3", "--threads", "2"]);
    let read = |p: &Path| std::fs::read(p.join("params.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let truth = std::fs::read_to_string(a.join("truth.csv")).unwrap();
    let mut rows = truth.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "eta_rel_err").unwrap();
    let errs: Vec<f64> = rows.map(|r| r.split(',').nth(col).unwrap().parse().unwrap()).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean < 0.01, "mean eta error {mean}");
}

#[test]
fn exit_code_reflects_failure_fraction() {
    // Three views leave some vertices unobserved, which are hard failures.
    let (dir, scene, bundle) = rendered(300, 3, MATERIAL);
    let out = dir.path().join("inv");
    let base = ["invert", "--bundle", s(&bundle), "--scene", s(&scene), "--out", s(&out), "--iterations", "1"];
    let strict = run(&[&base[..], &["--max-failure-fraction", "0"]].concat());
    assert_eq!(strict.status.code(), Some(3));
    let lenient = run(&[&base[..], &["--max-failure-fraction", "0.5"]].concat());
    assert_eq!(lenient.status.code(), Some(0));
}

#[test]
fn bundle_version_mismatch_is_refused() {
    let (dir, scene, bundle) = rendered(100, 3, MATERIAL);
    let mut bytes = std::fs::read(&bundle).unwrap();
    bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, bytes).unwrap();
    let out = run(&["invert", "--bundle", s(&bad), "--scene", s(&scene), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('1') && err.contains('7'), "{err}");
    assert!(err.contains("version"), "{err}");
}

#[test]
fn visualize_modes() {
    let (dir, scene, bundle) = rendered(300, 3, DIFFUSE);
    let vis = |mode: &str| {
        let out = dir.path().join(mode);
        ok(&["visualize", "--bundle", s(&bundle), "--scene", s(&scene), "--mode", mode, "--out", s(&out), "--view", "1"]);
        out
    };
    assert!(vis("dop").join("dop_heat.pfm").exists());
    assert!(vis("aolp").join("aolp_hue.pfm").exists());
    assert!(vis("stokes").join("s2.pfm").exists());
    let m = vis("mueller");
    let legend = std::fs::read_to_string(m.join("mueller_legend.txt")).unwrap();
    assert!(legend.contains("x10") && legend.contains("x4"));
    let grid = polarsvbrdf::io::read_pfm(&m.join("mueller.pfm")).unwrap();
    let (w, h) = (grid.width / 4, grid.height / 4);
    for y in 3 * h..4 * h {
        for x in 0..grid.width {
            assert!(grid.pixel(x, y).iter().all(|&v| v == 0.0));
        }
    }
    assert!((0..h).any(|y| (0..w).any(|x| grid.pixel(x, y)[0] > 0.0)));
}

#[test]
fn unknown_visualization_mode_is_a_usage_error() {
    let (dir, scene, bundle) = rendered(100, 3, MATERIAL);
    let out = run(&["visualize", "--bundle", s(&bundle), "--scene", s(&scene), "--mode", "hsv", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("possible values"));
}

#[test]
fn ablation_writes_both_runs() {
    let dir = TempDir::new().unwrap();
    let scene = sphere_scene(dir.path(), 200, 10, MATERIAL);
    let r = dir.path().join("r");
    ok(&["render", "--scene", s(&scene), "--out", s(&r)]);
    let out = dir.path().join("abl");
    let text = ok(&[
        "ablate", "--bundle", s(&r.join("observations.bin")), "--scene", s(&scene), "--out", s(&out), "--iterations", "2", "--heldout-views", "5",
    ]);
    assert!(text.contains("PSNR"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    assert!(summary["psnr_with_db"].is_number());
    assert!(out.join("params_with.csv").exists() && out.join("params_without.csv").exists());
}

#[test]
fn validate_passes_and_reports_runtimes() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("v.json");
    let text = ok(&["validate", "--criteria", "2,3,4,8", "--json", s(&json)]);
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
    assert!(text.contains("runtime"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[test]
fn fresnel_sign_mutation_fails_validation() {
    let out = run(&["validate", "--criteria", "2", "--flip-fresnel-sign"]);
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL") && text.contains("chain vs closed form"), "{text}");
}

#[test]
fn unknown_criterion_is_rejected() {
    let out = run(&["validate", "--criteria", "11"]);
    assert!(!out.status.success());
}
