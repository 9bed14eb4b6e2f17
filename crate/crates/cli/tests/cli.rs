use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use roadcascade::annotation::{AnnotatedObject, Point};
use roadcascade::dataset::save_dataset;
use roadcascade::{FrameAnnotation, GrayImage, ObjectClass, Polygon};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadcascade"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

const QUICK: &str = "# small and fast\nsamples_per_class = 20\nmax_stages = 2\nmax_trees = 4\nmining_stride = 20\n";

/// Synthesizes six frames and trains a small model on four of them.
fn trained(dir: &Path) {
    assert!(run(&["synth", "--n", "6", "--seed", "3", "--out", "data"], dir).status.success());
    fs::write(dir.join("quick.cfg"), QUICK).unwrap();
    let out = run(
        &["train", "--data", "data", "--config", "quick.cfg", "--n-train", "4", "--model", "m.model", "--report", "r.txt"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["synth", "--n", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["classify", "--model", "m"], dir.path()).status.code(), Some(2));
}

#[test]
fn synth_writes_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--n", "3", "--seed", "7", "--out", "data"], dir.path());
    assert!(out.status.success());
    let mut names: Vec<String> = fs::read_dir(dir.path().join("data"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["annotations.xml", "frame_00000.pgm", "frame_00001.pgm", "frame_00002.pgm"]);
}

#[test]
fn train_eval_classify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);

    let report = fs::read_to_string(d.join("r.txt")).unwrap();
    let value = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    let stage_drs: Vec<f64> = report
        .lines()
        .filter(|l| l.starts_with("stage "))
        .map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            t[t.iter().position(|&x| x == "DR").unwrap() + 1].parse().unwrap()
        })
        .collect();
    assert!(!stage_drs.is_empty());
    let product: f64 = stage_drs.iter().product();
    assert!((value("DR_t ") - product).abs() < 1e-5, "{report}");
    assert!(report.contains("wall_time_s"));

    let eval = run(
        &["eval", "--data", "data", "--n-train", "4", "--model", "m.model", "--roc", "roc.csv", "--samples", "10"],
        d,
    );
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let summary = String::from_utf8_lossy(&eval.stdout);
    assert!(summary.contains("held_out_frames 2"), "{summary}");
    assert!(fs::read_to_string(d.join("roc.csv")).unwrap().starts_with("threshold,fpr,dr\n"));

    // Default stride, then an explicit one.
    let classify = run(&["classify", "--model", "m.model", "--image", "data/frame_00005.pgm", "--out", "mask.pgm"], d);
    assert!(classify.status.success(), "{}", String::from_utf8_lossy(&classify.stderr));
    let mask = GrayImage::load_pgm(&fs::read(d.join("mask.pgm")).unwrap()).unwrap();
    assert_eq!((mask.width(), mask.height()), (640, 480));
    assert!(mask.samples().iter().all(|&v| v == 0 || v == 255));
    let explicit = run(
        &["classify", "--model", "m.model", "--image", "data/frame_00005.pgm", "--stride", "5", "--out", "mask5.pgm"],
        d,
    );
    assert!(explicit.status.success());
    assert_eq!(fs::read(d.join("mask.pgm")).unwrap(), fs::read(d.join("mask5.pgm")).unwrap());
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);

    // More training frames than the corpus holds.
    let out = run(&["train", "--data", "data", "--n-train", "7", "--model", "x.model"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("training frames"));

    // Unknown config key.
    fs::write(d.join("bad.cfg"), "colour = red\n").unwrap();
    let out = run(&["train", "--data", "data", "--config", "bad.cfg", "--model", "x.model"], d);
    assert_eq!(out.status.code(), Some(1));

    // Image smaller than the ROI.
    let tiny = GrayImage::filled(8, 8, 100).unwrap();
    fs::write(d.join("tiny.pgm"), tiny.save_pgm()).unwrap();
    let out = run(&["classify", "--model", "m.model", "--image", "tiny.pgm", "--out", "t.pgm"], d);
    assert_eq!(out.status.code(), Some(1));

    // A corpus whose frames cannot hold the model's ROI.
    let road = Polygon::new(vec![
        Point::new(0.0, 10.0),
        Point::new(10.0, 10.0),
        Point::new(6.0, 2.0),
        Point::new(4.0, 2.0),
    ])
    .unwrap();
    let frames: Vec<(FrameAnnotation, GrayImage)> = (0..3)
        .map(|i| {
            let ann = FrameAnnotation {
                frame_id: format!("s{i}"),
                image_ref: format!("s{i}.pgm"),
                width: 10,
                height: 10,
                objects: vec![AnnotatedObject {
                    class: ObjectClass::Road,
                    polygon: road.clone(),
                }],
            };
            (ann, GrayImage::filled(10, 10, 90).unwrap())
        })
        .collect();
    save_dataset(&d.join("small"), &frames).unwrap();
    let out = run(&["eval", "--data", "small", "--n-train", "1", "--model", "m.model"], d);
    assert_eq!(out.status.code(), Some(1));

    // Missing model file.
    let out = run(&["eval", "--data", "data", "--model", "missing.model"], d);
    assert_eq!(out.status.code(), Some(1));
}
