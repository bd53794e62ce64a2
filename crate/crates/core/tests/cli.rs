use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use sparsegrid::evalkit::{evaluate_on_grid, interpolate, quadrature, Domain};
use sparsegrid::grid::{build_sparse_grid, reduce};
use sparsegrid::io;
use sparsegrid::knots::KnotFamily;
use sparsegrid::levels::LevelMap;
use sparsegrid::midx::fast_td_set;
use sparsegrid::pce::{convert_to_modal, PceFamily};
use sparsegrid::testfns::{expsum, runge};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsegrid")).current_dir(dir).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn build_listing(dir: &Path) -> Value {
    json(&run(
        dir,
        &["build", "--dim", "2", "--preset", "SM", "--w", "3", "--knots", "cc", "--domain", "0,1x0,1", "-o", "g.json"],
    ))
}

#[test]
fn build_reduce_and_quad_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let b = build_listing(dir.path());
    assert_eq!(b["size"], 29);
    assert_eq!(json(&run(dir.path(), &["reduce", "--grid", "g.json"]))["size"], 29);

    let q = json(&run(dir.path(), &["quad", "--grid", "g.json", "--fn", "expsum"]));
    let intf = q["intf"][0].as_f64().unwrap();
    assert!((intf - 2.9525).abs() <= 5e-4);

    let fam = vec![KnotFamily::ClenshawCurtis { a: 0.0, b: 1.0 }; 2];
    let s = build_sparse_grid(&fast_td_set(2, 3).unwrap(), &fam, LevelMap::Doubling, None).unwrap();
    let r = reduce(&s, None).unwrap();
    let lib = quadrature(&evaluate_on_grid(&expsum, &r, None).unwrap().table, &r).unwrap()[0];
    assert_eq!(intf, lib);
    let file = io::load_grid(&dir.path().join("g.json")).unwrap();
    assert_eq!(file.grid, s);
    assert_eq!(file.reduced, r);
}

#[test]
fn interp_and_export_files_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    build_listing(dir.path());
    std::fs::write(dir.path().join("pts.csv"), "y1,y2\n0.1,0.2\n0.5,0.9\n0.33,0.66\n").unwrap();
    let out = run(dir.path(), &["interp", "--grid", "g.json", "--fn", "runge", "--points", "pts.csv", "-o", "v.csv"]);
    assert!(out.status.success());
    let b = io::load_grid(&dir.path().join("g.json")).unwrap();
    let t = evaluate_on_grid(&runge, &b.reduced, None).unwrap().table;
    let pts = [0.1, 0.2, 0.5, 0.9, 0.33, 0.66];
    let v = interpolate(&b.grid, &b.reduced, &t, &pts).unwrap();
    let expected = io::samples_csv(2, &pts, 1, &v);
    assert_eq!(std::fs::read_to_string(dir.path().join("v.csv")).unwrap(), expected);

    let out = run(dir.path(), &["export", "--grid", "g.json", "--what", "knots", "-o", "k.csv"]);
    assert!(out.status.success());
    let k = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(k, io::knots_csv(&b.reduced));
    assert_eq!(k.lines().count(), 30);

    let out = run(dir.path(), &["export", "--grid", "g.json", "--what", "midx"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), io::midx_csv(&b.grid.set));
}

#[test]
fn pce_and_sobol_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    build_listing(dir.path());
    let out = run(dir.path(), &["pce", "--grid", "g.json", "--fn", "expsum", "-o", "p.json", "--csv", "c.csv"]);
    assert!(out.status.success());
    let b = io::load_grid(&dir.path().join("g.json")).unwrap();
    let t = evaluate_on_grid(&expsum, &b.reduced, None).unwrap().table;
    let pce = convert_to_modal(&b.grid, &b.reduced, &t, &Domain::from_families(&b.grid.families), PceFamily::Legendre)
        .unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("c.csv")).unwrap(), io::pce_csv(&pce));
    assert_eq!(io::load_grid(&dir.path().join("p.json")).unwrap().pce, Some(pce));

    let s = json(&run(dir.path(), &["sobol", "--fn", "diffusion", "--sigmas", "0.5,0.1", "--w", "4"]));
    let p: Vec<f64> = s["principal"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((p[0] - 0.9709).abs() < 5e-4 && (p[1] - 0.0244).abs() < 5e-4, "{p:?}");
}

#[test]
fn adapt_resume_continues_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = json(&run(dir.path(), &["adapt", "--dim", "2", "--fn", "expsum", "--max-pts", "40", "-o", "a.json"]));
    assert_eq!(a["stop"], "max_points");
    let b = json(&run(dir.path(), &["adapt", "--fn", "expsum", "--resume", "a.json", "-o", "b.json"]));
    let full = json(&run(dir.path(), &["adapt", "--dim", "2", "--fn", "expsum", "-o", "c.json"]));
    assert_eq!(b["nb_pts"], full["nb_pts"]);
    assert_eq!(b["intf"], full["intf"]);
    assert_eq!(full["nb_pts"], 257);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["build", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["quad", "--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["quad", "--grid", "missing.json", "--fn", "expsum"]).status.code(), Some(1));
    build_listing(dir.path());
    assert_eq!(run(dir.path(), &["quad", "--grid", "g.json", "--fn", "nope"]).status.code(), Some(1));
    assert_eq!(
        run(dir.path(), &["export", "--grid", "g.json", "--what", "interp-samples", "--fn", "expsum", "--cuts", "1,3"])
            .status
            .code(),
        Some(1)
    );
    // sigma = 0.6 makes the diffusivity negative somewhere in the box
    let out = run(dir.path(), &["demo", "forward", "--N", "1", "--sigmas", "0.6"]);
    assert_eq!(out.status.code(), Some(1));
    // on [-5, 5] the diffusivity turns negative: a model failure
    json(&run(dir.path(), &["build", "--dim", "2", "--w", "2", "--domain=-5,5", "-o", "wide.json"]));
    let out = run(dir.path(), &["quad", "--grid", "wide.json", "--fn", "diffusion", "--sigmas", "0.5,0.1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn demo_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["demo", "inverse", "--seed", "4", "--samples", "20", "--out-dir", "inv"]);
    let b = run(dir.path(), &["demo", "inverse", "--seed", "4", "--samples", "20"]);
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["k"], 80);
    assert!(dir.path().join("inv/posterior_samples.csv").exists());
    let f = json(&run(dir.path(), &["demo", "forward"]));
    assert!((f["mean"].as_f64().unwrap() - 0.0935).abs() < 5e-4);
}
