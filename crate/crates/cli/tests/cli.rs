mod common;

use std::fs;

use common::*;
use inr_shape::model::read_checkpoint_header;

fn dataset_gen(dir: &std::path::Path, n: &str, seed: &str) {
    let mut args = vec!["dataset-gen", "--n", n, "--seed", seed, "--out"];
    let d = path_str(dir);
    args.push(&d);
    args.extend_from_slice(SMALL_DATASET);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn train(dataset: &std::path::Path, ckpt: &std::path::Path, extra: &[&str]) -> std::process::Output {
    let (d, c) = (path_str(dataset), path_str(ckpt));
    let mut args = vec!["train", "--dataset", &d, "--out", &c, "--epochs", "5"];
    args.extend_from_slice(SMALL_NET);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn dataset_then_train_produce_declared_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    dataset_gen(&d, "4", "7");
    assert!(d.join("manifest.json").is_file());
    assert!(d.join("shape_0000.obj").is_file());
    assert!(d.join("shape_0003.samples").is_file());

    let ckpt = tmp.path().join("c.ckpt");
    let out = train(&d, &ckpt, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = read_checkpoint_header(&ckpt).unwrap();
    assert_eq!(header.precision, "f64");
    assert_eq!(header.arch.latent_dim, 4);
    let log = fs::read_to_string(tmp.path().join("c.ckpt.log.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4]["epoch"], 5);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["command"], "train");
}

#[test]
fn train_without_dataset_is_a_usage_error_naming_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["train", "--out", &path_str(&tmp.path().join("c.ckpt"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["code"], "usage");
    assert!(err["error"]["message"].as_str().unwrap().contains("--dataset"));

    let out = run(&["train", "--dataset", &path_str(&tmp.path().join("missing")), "--out", "c.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("--dataset"));
}

#[test]
fn unknown_command_and_bad_flag_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = run(&["generate", "--n", "many"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["code"], "usage");
    let out = run(&["train", "--fixed-features", "height", "--dataset", "."]);
    assert_eq!(out.status.code(), Some(2));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn config_file_fills_unset_flags_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    dataset_gen(&d, "3", "2");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[train]\ndataset = {:?}\nepochs = 3\nhidden-width = 8\nhidden-layers = 1\nlatent-dim = 2\npoints = 50\nprecision = \"f32\"\n",
            path_str(&d)
        ),
    )
    .unwrap();
    let ckpt = tmp.path().join("c.ckpt");
    let out = run(&["--config", &path_str(&cfg), "train", "--out", &path_str(&ckpt), "--epochs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = read_checkpoint_header(&ckpt).unwrap();
    assert_eq!(header.precision, "f32");
    assert_eq!(header.arch.hidden_width, 8);
    let log = fs::read_to_string(tmp.path().join("c.ckpt.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let json_cfg = tmp.path().join("bad.json");
    fs::write(&json_cfg, r#"{"train": {"epoch": 3}}"#).unwrap();
    let out = run(&["--config", &path_str(&json_cfg), "train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reconstruct_generate_edit_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(4, 5);
    let d = tmp.path().join("d");
    ds.save(&d).unwrap();
    let ckpt = tmp.path().join("k3.ckpt");
    small_model(&ds, vec![0, 1, 2], 40).save(&ckpt).unwrap();
    let c = path_str(&ckpt);

    let obj = tmp.path().join("r.obj");
    let out = run(&["reconstruct", "--ckpt", &c, "--shape-id", "1", "--resolution", "24", "--out", &path_str(&obj)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(obj.is_file());

    let out = run(&["reconstruct", "--ckpt", &c, "--shape-id", "9", "--resolution", "24"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["code"], "unknown_shape");

    let gen = tmp.path().join("gen");
    let out = run(&[
        "generate", "--ckpt", &c, "--n", "3", "--seed", "4", "--out", &path_str(&gen), "--resolution", "24",
        "--volume", "0.12",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cohort: serde_json::Value = serde_json::from_str(&fs::read_to_string(gen.join("cohort.json")).unwrap()).unwrap();
    assert_eq!(cohort["records"].as_array().unwrap().len(), 3);
    assert_eq!(cohort["meshes"][2], "shape_0002.obj");
    assert!(gen.join("shape_0002.obj").is_file());
    let vol = cohort["records"][0]["conditioned"][0].as_f64().unwrap();
    assert!((vol - 0.12).abs() < 1e-9);

    let edit_dir = tmp.path().join("edit");
    let out = run(&[
        "edit", "--ckpt", &c, "--shape-id", "0", "--sweep", "volume=0.1:0.14:3", "--sweep", "isthmus=0.05:0:2",
        "--resolution", "24", "--out", &path_str(&edit_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let edit: serde_json::Value = serde_json::from_str(&fs::read_to_string(edit_dir.join("edit.json")).unwrap()).unwrap();
    assert_eq!(edit["sweeps"][0]["steps"].as_array().unwrap().len(), 3);
    assert!(edit_dir.join("isthmus_001.obj").is_file());

    let out = run(&["edit", "--ckpt", &c, "--shape-id", "0", "--sweep", "volume=0.1:0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("--sweep"));

    let report = tmp.path().join("report.json");
    let plots = tmp.path().join("plots");
    let out = run(&[
        "evaluate", "--ckpt", &c, "--ckpt-b", &c, "--dataset", &path_str(&d), "--out", &path_str(&report),
        "--plots", &path_str(&plots), "--n", "12", "--resolution", "24", "--chamfer-samples", "500",
    ]);
    // a barely trained model may still produce empty shapes; both outcomes are well-formed
    if out.status.success() {
        let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r["version"], 1);
        assert_eq!(r["reconstruction"]["chamfer"].as_array().unwrap().len(), 4);
        assert!(r["distributions"]["small_sample"].as_bool().unwrap());
        assert!(plots.join("hist_volume.svg").is_file());
        assert!(plots.join("steer_b_volume.svg").is_file());
    } else {
        assert_eq!(stderr_json(&out)["error"]["code"], "evaluation_aborted");
    }
}

#[test]
fn edit_on_unconditioned_checkpoint_reports_unsupported_model() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(3, 1);
    let ckpt = tmp.path().join("k0.ckpt");
    small_model(&ds, vec![], 2).save(&ckpt).unwrap();
    let out = run(&[
        "edit", "--ckpt", &path_str(&ckpt), "--shape-id", "0", "--sweep", "volume=0.1:0.2:2", "--resolution", "16",
        "--out", &path_str(&tmp.path().join("e")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["code"], "unsupported_model");
}

#[test]
fn dataset_gen_imports_meshes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.obj");
    let b = tmp.path().join("b.obj");
    inr_shape::mesh::io::write_obj(&inr_shape::mesh::icosphere([10.0f64, 5.0, 5.0], 3.0, 2), &a).unwrap();
    inr_shape::mesh::io::write_obj(&inr_shape::mesh::icosphere([11.0f64, 5.0, 5.0], 2.0, 2), &b).unwrap();
    let out_dir = tmp.path().join("imp");
    let out = run(&[
        "dataset-gen", "--import", &path_str(&a), &path_str(&b), "--out", &path_str(&out_dir), "--no-samples",
        "--iou-resolution", "32",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("--reference"));
    let out = run(&[
        "dataset-gen", "--import", &path_str(&a), &path_str(&b), "--reference", "10.5,5,5", "--out",
        &path_str(&out_dir), "--no-samples", "--iou-resolution", "32",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = inr_shape::dataset::read_manifest(&out_dir).unwrap();
    assert_eq!(m.shapes.len(), 2);
    assert!(m.shapes[0].samples.is_none());
}

#[test]
fn same_seeds_give_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for run_dir in ["a", "b"] {
        let root = tmp.path().join(run_dir);
        let d = root.join("d");
        dataset_gen(&d, "3", "11");
        let ckpt = root.join("c.ckpt");
        let out = train(&d, &ckpt, &["--seed", "5", "--fixed-features", "volume,isthmus"]);
        assert!(out.status.success());
        let gen = root.join("gen");
        let out = run(&[
            "generate", "--ckpt", &path_str(&ckpt), "--n", "2", "--seed", "3", "--resolution", "16", "--out",
            &path_str(&gen),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for dir in [&d, &gen] {
            for f in files_in(dir) {
                files.push((f.file_name().unwrap().to_string_lossy().into(), fs::read(&f).unwrap()));
            }
        }
        files.push(("c.ckpt".into(), fs::read(&ckpt).unwrap()));
        trees.push(files);
    }
    assert_eq!(trees[0].len(), trees[1].len());
    for (x, y) in trees[0].iter().zip(&trees[1]) {
        assert_eq!(x.0, y.0);
        assert!(x.1 == y.1, "{} differs between runs", x.0);
    }
}
