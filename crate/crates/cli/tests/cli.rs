mod common;

use std::fs;

use common::{files_in, keyfuse, path_arg, write_static_active_video};
use keyfuse::frames::ingest_frame_sequence;
use keyfuse::pipeline::{FusedRecord, SelectionDoc};
use keyfuse::records::{parse_prediction_lines, write_jsonl, Level, PredictionRecord};
use proptest::prelude::*;

fn gray_png(path: &std::path::Path, w: u32, h: u32, value: u8) {
    image::GrayImage::from_pixel(w, h, image::Luma([value]))
        .save(path)
        .unwrap();
}

#[test]
fn ingest_orders_by_file_name() {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("f002.png", 2), ("f001.png", 1), ("f010.png", 10)] {
        gray_png(&dir.path().join(name), 4, 3, v);
    }
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let seq = ingest_frame_sequence(dir.path()).unwrap();
    let names: Vec<_> = seq
        .paths
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_owned())
        .collect();
    assert_eq!(names, ["f001.png", "f002.png", "f010.png"]);
    let firsts: Vec<u8> = seq.frames.iter().map(|f| f.pixels()[0]).collect();
    assert_eq!(firsts, [1, 2, 10]);
    let indices: Vec<usize> = seq.frames.iter().map(|f| f.index()).collect();
    assert_eq!(indices, [1, 2, 3]);
}

#[test]
fn ingest_converts_rgb_to_luma() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = image::RgbImage::new(2, 2);
    img.put_pixel(0, 0, image::Rgb([255, 0, 0]));
    img.put_pixel(1, 0, image::Rgb([255, 255, 255]));
    img.put_pixel(0, 1, image::Rgb([0, 255, 0]));
    img.put_pixel(1, 1, image::Rgb([10, 20, 30]));
    img.save(dir.path().join("a.png")).unwrap();
    img.save(dir.path().join("b.ppm")).unwrap();
    let seq = ingest_frame_sequence(dir.path()).unwrap();
    for f in &seq.frames {
        assert_eq!(f.pixels(), &[76, 255, 150, 18]);
    }
}

#[test]
fn ingest_rejects_mixed_sizes_and_empty_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let err = ingest_frame_sequence(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    gray_png(&dir.path().join("f1.png"), 4, 4, 0);
    gray_png(&dir.path().join("f2.png"), 5, 4, 0);
    let err = ingest_frame_sequence(dir.path()).unwrap_err();
    assert!(err.to_string().contains("f2.png"), "{err}");
}

fn record_strategy() -> impl Strategy<Value = PredictionRecord> {
    (
        "[a-z0-9_]{1,8}",
        prop_oneof![Just("spatial".to_owned()), Just("temporal".to_owned())],
        prop::option::of(1usize..5000),
        prop::collection::vec(0.0f64..1.0, 2..12),
    )
        .prop_filter_map("needs mass", |(video_id, modality, frame_index, w)| {
            let total: f64 = w.iter().sum();
            (total > 1e-3).then(|| PredictionRecord {
                video_id,
                modality,
                level: if frame_index.is_some() {
                    Level::Frame
                } else {
                    Level::Video
                },
                frame_index,
                dist: w.iter().map(|x| x / total).collect(),
            })
        })
}

proptest! {
    #[test]
    fn records_round_trip(records in prop::collection::vec(record_strategy(), 1..20)) {
        let mut first = Vec::new();
        write_jsonl(&mut first, &records).unwrap();
        let parsed = parse_prediction_lines(first.as_slice(), "a").unwrap();
        let mut second = Vec::new();
        write_jsonl(&mut second, &parsed).unwrap();
        let reparsed = parse_prediction_lines(second.as_slice(), "b").unwrap();
        prop_assert_eq!(&parsed, &reparsed);
        prop_assert_eq!(first, second);
    }
}

/// Records in the shape the classifier adapter emits: two modalities, a
/// frame-level record per key-frame, a pooled video-level record, plus an
/// extra field.
fn adapter_jsonl(videos: &[&str], keyframes: &[usize], classes: usize) -> String {
    let mut out = String::new();
    for (vi, video) in videos.iter().enumerate() {
        for (mi, modality) in ["spatial", "temporal"].iter().enumerate() {
            let mut pooled = vec![0.0; classes];
            for (ki, k) in keyframes.iter().enumerate() {
                let w: Vec<f64> = (0..classes)
                    .map(|c| 1.0 + ((vi * 7 + mi * 5 + ki * 3 + c * 11) % 13) as f64)
                    .collect();
                let total: f64 = w.iter().sum();
                let dist: Vec<f64> = w.iter().map(|x| x / total).collect();
                pooled
                    .iter_mut()
                    .zip(&dist)
                    .for_each(|(p, d)| *p += d / keyframes.len() as f64);
                out.push_str(&format!(
                    "{{\"video_id\":\"{video}\",\"modality\":\"{modality}\",\"level\":\"frame\",\"frame_index\":{k},\"dist\":{}}}\n",
                    serde_json::to_string(&dist).unwrap()
                ));
            }
            out.push_str(&format!(
                "{{\"video_id\":\"{video}\",\"modality\":\"{modality}\",\"level\":\"video\",\"dist\":{},\"source\":\"pooled\"}}\n",
                serde_json::to_string(&pooled).unwrap()
            ));
        }
    }
    out
}

#[test]
fn adapter_output_parses_and_fuses() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds.jsonl");
    let keyframes = [12, 80, 150, 222, 301, 377];
    fs::write(&preds, adapter_jsonl(&["v1", "v2"], &keyframes, 5)).unwrap();
    let records = keyfuse::records::parse_prediction_records(&preds).unwrap();
    assert_eq!(records.len(), 2 * (2 * keyframes.len() + 2));

    let out = dir.path().join("fused.jsonl");
    let o = keyfuse(&["fuse", "--preds", path_arg(&preds), "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fused = keyfuse::pipeline::read_fused(&out).unwrap();
    assert_eq!(fused.len(), 2);
    assert_eq!(fused[0].video_id, "v1");
    assert_eq!(fused[0].modality_order, ["spatial", "temporal"]);
    assert_eq!(fused[0].frame_order, keyframes);
}

#[test]
fn fuse_single_record_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.jsonl");
    fs::write(
        &preds,
        "{\"video_id\":\"v\",\"modality\":\"spatial\",\"level\":\"video\",\"dist\":[0.25,0.6,0.15]}\n",
    )
    .unwrap();
    let out = dir.path().join("f.jsonl");
    let o = keyfuse(&["fuse", "--preds", path_arg(&preds), "--out", path_arg(&out)]);
    assert!(o.status.success());
    let fused = keyfuse::pipeline::read_fused(&out).unwrap();
    assert_eq!(fused[0].dist, [0.25, 0.6, 0.15]);
    assert_eq!(fused[0].predicted_class, 1);
}

#[test]
fn fuse_respects_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.jsonl");
    fs::write(&preds, adapter_jsonl(&["a"], &[3, 9], 3)).unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        "modalities = [\"temporal\", \"spatial\"]\nframe_tiers = \"self_then_cross\"\nreconcile = \"video_first\"\n",
    )
    .unwrap();
    let out = dir.path().join("f.jsonl");
    let o = keyfuse(&[
        "fuse",
        "--preds",
        path_arg(&preds),
        "--plan",
        path_arg(&plan),
        "--out",
        path_arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let rec: FusedRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(rec.modality_order, ["temporal", "spatial"]);
    assert!(text.contains("\"frame_tiers\":\"self_then_cross\""));
    assert!(text.contains("\"reconcile\":\"video_first\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.jsonl");
    let missing = dir.path().join("missing.jsonl");

    assert_eq!(keyfuse(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(keyfuse(&["--help"]).status.code(), Some(0));

    let o = keyfuse(&[
        "fuse",
        "--preds",
        path_arg(&missing),
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());

    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"video_id\":\"v\",\"modality\":\"s\",\"level\":\"video\",\"dist\":[0.7,0.7]}\n",
    )
    .unwrap();
    let o = keyfuse(&["fuse", "--preds", path_arg(&bad), "--out", path_arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.jsonl:1"));

    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "n_kf = 1\n").unwrap();
    let o = keyfuse(&[
        "--config",
        path_arg(&cfg),
        "fuse",
        "--preds",
        path_arg(&bad),
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = keyfuse(&[
        "fuse",
        "--preds",
        path_arg(&bad),
        "--plan",
        path_arg(&missing),
        "--out",
        path_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn keyframes_and_flowfeat_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("clip");
    write_static_active_video(&video, 24, 12);
    let sel = dir.path().join("out/sel.json");
    let hist = dir.path().join("out/hist.csv");
    let td = dir.path().join("out/td.csv");
    let o = keyfuse(&[
        "keyframes",
        path_arg(&video),
        "--n-kf",
        "4",
        "--out",
        path_arg(&sel),
        "--histograms",
        path_arg(&hist),
        "--disparities",
        path_arg(&td),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let doc = SelectionDoc::load(&sel).unwrap();
    assert_eq!(doc.video_id, "clip");
    assert_eq!(doc.n_kf, 4);
    assert_eq!(doc.d_low, 3);
    assert_eq!(doc.chosen.len(), 4);
    let copied: Vec<_> = files_in(&dir.path().join("out/clip_keyframes"))
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_owned())
        .collect();
    let expected: Vec<_> = doc
        .frame_indices()
        .iter()
        .map(|k| format!("f{k:04}.pgm"))
        .collect();
    assert_eq!(copied, expected);

    let hist_text = fs::read_to_string(&hist).unwrap();
    assert!(hist_text.starts_with("index,mag_0,"));
    assert_eq!(hist_text.lines().count(), 1 + 23);
    let td_text = fs::read_to_string(&td).unwrap();
    assert!(td_text.starts_with("k,td\n1,"));
    assert_eq!(td_text.lines().count(), 1 + 22);

    for (format, ext) in [("pgm", "pgm"), ("png", "png")] {
        let out_dir = dir.path().join(format!("flow_{format}"));
        let o = keyfuse(&[
            "flowfeat",
            path_arg(&video),
            "--keyframes",
            path_arg(&sel),
            "--out-dir",
            path_arg(&out_dir),
            "--format",
            format,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let names: Vec<_> = files_in(&out_dir)
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_owned())
            .collect();
        let mut expected: Vec<_> = doc
            .frame_indices()
            .iter()
            .map(|k| format!("clip_k{k}_flow.{ext}"))
            .collect();
        expected.sort();
        assert_eq!(names, expected);
    }
}

#[test]
fn too_short_video_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("short");
    write_static_active_video(&video, 3, 1);
    let sel = dir.path().join("sel.json");
    let o = keyfuse(&["keyframes", path_arg(&video), "--out", path_arg(&sel)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn subcommands_are_idempotent_and_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("clip");
    write_static_active_video(&video, 40, 20);
    let preds = dir.path().join("preds.jsonl");
    let ids: Vec<String> = (0..25).map(|i| format!("v{i:02}")).collect();
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    fs::write(&preds, adapter_jsonl(&id_refs, &[4, 11, 19, 30], 6)).unwrap();

    let mut outputs: Vec<[Vec<u8>; 3]> = Vec::new();
    for jobs in ["1", "4", "4"] {
        let run_dir = dir.path().join(format!("run{}", outputs.len()));
        let sel = run_dir.join("sel.json");
        let flow_dir = run_dir.join("flow");
        let fused = run_dir.join("fused.jsonl");
        for args in [
            vec![
                "--jobs",
                jobs,
                "keyframes",
                path_arg(&video),
                "--out",
                path_arg(&sel),
                "--no-copy",
            ],
            vec![
                "--jobs",
                jobs,
                "flowfeat",
                path_arg(&video),
                "--keyframes",
                path_arg(&sel),
                "--out-dir",
                path_arg(&flow_dir),
            ],
            vec![
                "--jobs",
                jobs,
                "fuse",
                "--preds",
                path_arg(&preds),
                "--out",
                path_arg(&fused),
            ],
        ] {
            let o = keyfuse(&args);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        let flow_bytes: Vec<u8> = files_in(&flow_dir)
            .iter()
            .flat_map(|p| fs::read(p).unwrap())
            .collect();
        outputs.push([
            fs::read(&sel).unwrap(),
            flow_bytes,
            fs::read(&fused).unwrap(),
        ]);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn eval_writes_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let fused = dir.path().join("fused.jsonl");
    let preds = [0, 0, 0, 1, 1, 0];
    let truth = [0, 0, 0, 0, 1, 1];
    let mut text = String::new();
    for (i, p) in preds.iter().enumerate() {
        let dist = if *p == 0 { "[0.7,0.3]" } else { "[0.2,0.8]" };
        text.push_str(&format!(
            "{{\"video_id\":\"v{i}\",\"dist\":{dist},\"predicted_class\":{p},\"modality_order\":[],\"frame_order\":[],\"frame_tiers\":\"cross_then_self\",\"reconcile\":\"frames_first\"}}\n"
        ));
    }
    fs::write(&fused, text).unwrap();
    let labels = dir.path().join("labels.csv");
    let mut csv = String::from("video_id,label\n");
    for (i, t) in truth.iter().enumerate() {
        csv.push_str(&format!("v{i},{t}\n"));
    }
    fs::write(&labels, csv).unwrap();
    let report = dir.path().join("report.json");
    let o = keyfuse(&[
        "eval",
        "--fused",
        path_arg(&fused),
        "--labels",
        path_arg(&labels),
        "--report",
        path_arg(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!((v["overall_acc"].as_f64().unwrap() - 200.0 / 3.0).abs() < 1e-9);
    assert!((v["macro_acc"].as_f64().unwrap() - 62.5).abs() < 1e-9);
    assert_eq!(v["per_class"][0]["support"], 4);
    assert_eq!(v["per_class"][0]["correct"], 3);
    assert_eq!(
        fs::read_to_string(dir.path().join("report.csv")).unwrap(),
        "class,recall\n0,0.75\n1,0.5\n"
    );

    fs::write(&labels, "video,label\nv0,0\n").unwrap();
    let o = keyfuse(&[
        "eval",
        "--fused",
        path_arg(&fused),
        "--labels",
        path_arg(&labels),
        "--report",
        path_arg(&report),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
