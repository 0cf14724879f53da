use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use panoptic::tensor::{load_rten, save_rten};
use panoptic::{DatasetSpec, PanopticMap};
use panoptic_oracle::Labeling;
use serde::Serialize;
use tempfile::TempDir;

fn panoptic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panoptic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = panoptic(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn load_map(p: &Path) -> PanopticMap {
    PanopticMap::from_tensor(load_rten(p).unwrap().into_i32().unwrap()).unwrap()
}

fn save_map(p: &Path, m: &PanopticMap) {
    save_rten(p, &m.to_tensor()).unwrap();
}

fn save_spec(p: &Path, spec: &DatasetSpec) {
    std::fs::write(p, serde_json::to_string(spec).unwrap()).unwrap();
}

/// Separated synthetic scene with ideal predictions, radius 8.
fn synth(dir: &Path, seed: u64, instances: usize) -> PathBuf {
    let out = dir.join(format!("scene{seed}"));
    ok(&[
        "synth",
        "--seed",
        &seed.to_string(),
        "--size",
        "96x128",
        "--instances",
        &instances.to_string(),
        "--radius",
        "8",
        "--min-separation",
        "16",
        "--out",
        s(&out),
    ]);
    out
}

fn fuse(scene: &Path, out: &Path, extra: &[&str]) -> Output {
    let spec = scene.join("spec.json");
    let mut args = vec!["fuse", "--inputs", s(scene), "--spec", s(&spec), "--radius", "8", "--out", s(out)];
    args.extend_from_slice(extra);
    panoptic(&args)
}

#[test]
fn fuse_recovers_ground_truth() {
    let dir = TempDir::new().unwrap();
    for seed in [1, 5] {
        let scene = synth(dir.path(), seed, 5);
        let pred = dir.path().join(format!("pred{seed}.rten"));
        assert!(fuse(&scene, &pred, &[]).status.success());
        let (gt, parsed) = (load_map(&scene.join("gt.rten")), load_map(&pred));
        assert!(gt.same_up_to_relabeling(&parsed), "seed {seed}");
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("pred{seed}.rten.manifest.json"))).unwrap()).unwrap();
        assert_eq!(manifest["command"], "fuse");
        assert_eq!(manifest["fusion"]["proximity_radius"], 8.0);
        for (_, ms) in manifest["timings_ms"].as_object().unwrap() {
            assert!(ms.as_f64().unwrap() >= 0.0);
        }
    }
}

#[test]
fn individual_paths_override_the_input_directory() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 2, 3);
    let other = synth(dir.path(), 3, 3);
    let pred = dir.path().join("pred.rten");
    // Long offsets of another scene make the shapes agree but the parse differ.
    let long = other.join("long.rten");
    assert!(fuse(&scene, &pred, &["--long", s(&long)]).status.success());
    assert!(!load_map(&scene.join("gt.rten")).same_up_to_relabeling(&load_map(&pred)));
}

#[test]
fn noisy_variants_are_written() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("n");
    ok(&["synth", "--size", "48", "--noise", "offset=0.5,logit=1,flip=0.01", "--out", s(&out)]);
    for f in ["semantic", "heatmap", "short", "middle", "long"] {
        let clean = std::fs::read(out.join(format!("{f}.rten"))).unwrap();
        let noisy = std::fs::read(out.join("noisy").join(format!("{f}.rten"))).unwrap();
        assert_eq!(clean.len(), noisy.len());
        assert_ne!(clean, noisy, "{f}");
    }
}

#[test]
fn truncated_tensor_exits_3_and_names_it() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 4, 2);
    let short = scene.join("short.rten");
    let bytes = std::fs::read(&short).unwrap();
    std::fs::write(&short, &bytes[..bytes.len() - 7]).unwrap();
    let out = fuse(&scene, &dir.path().join("p.rten"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("short-range offsets"), "{err}");
}

#[test]
fn missing_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 4, 2);
    std::fs::remove_file(scene.join("middle.rten")).unwrap();
    let out = fuse(&scene, &dir.path().join("p.rten"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mismatched_shapes_exit_3() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), 4, 2);
    let small = dir.path().join("small");
    ok(&["synth", "--size", "32", "--radius", "8", "--out", s(&small)]);
    let out = fuse(&a, &dir.path().join("p.rten"), &["--heatmap", s(&small.join("heatmap.rten"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heatmap logits"));
}

#[test]
fn zero_max_instances_gives_all_stuff() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 6, 4);
    let pred = dir.path().join("p.rten");
    assert!(fuse(&scene, &pred, &["--max-instances", "0"]).status.success());
    let m = load_map(&pred);
    let spec = DatasetSpec::synthetic();
    assert!(m.instance_plane().iter().all(|&v| v == 0));
    assert!(m.semantic_plane().iter().all(|&c| spec.is_stuff(c)));
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 7, 4);
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"fusion": {"max_instances": 0, "proximity_radius": 8.0, "rescore_radius": 8.0}}"#).unwrap();
    let pred = dir.path().join("p.rten");
    assert!(fuse(&scene, &pred, &["--config", s(&config)]).status.success());
    assert!(load_map(&pred).instance_plane().iter().all(|&v| v == 0));
    assert!(fuse(&scene, &pred, &["--config", s(&config), "--max-instances", "50"]).status.success());
    assert!(load_map(&scene.join("gt.rten")).same_up_to_relabeling(&load_map(&pred)));

    std::fs::write(&config, r#"{"fusion": {"max_instance": 3}}"#).unwrap();
    assert_eq!(fuse(&scene, &pred, &["--config", s(&config)]).status.code(), Some(3));
}

#[test]
fn commands_are_idempotent() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), 9, 3);
    let b = dir.path().join("again");
    ok(&["synth", "--seed", "9", "--size", "96x128", "--instances", "3", "--radius", "8", "--min-separation", "16", "--out", s(&b)]);
    for f in ["gt.rten", "spec.json", "semantic.rten", "heatmap.rten", "short.rten", "middle.rten", "long.rten"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (p1, p2) = (dir.path().join("p1.rten"), dir.path().join("p2.rten"));
    assert!(fuse(&a, &p1, &[]).status.success());
    assert!(fuse(&a, &p2, &[]).status.success());
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("n");
    ok(&["synth", "--seed", "3", "--size", "96", "--instances", "6", "--radius", "8", "--noise", "offset=1,logit=1", "--out", s(&scene)]);
    let noisy = scene.join("noisy");
    let spec = scene.join("spec.json");
    let mut outputs = Vec::new();
    for threads in ["1", "3", "0"] {
        let pred = dir.path().join(format!("p{threads}.rten"));
        let out = Command::new(env!("CARGO_BIN_EXE_panoptic"))
            .env("PANOPTIC_THREADS", threads)
            .args(["fuse", "--inputs", s(&noisy), "--spec", s(&spec), "--radius", "8", "--out", s(&pred)])
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(std::fs::read(&pred).unwrap());
    }
    assert!(outputs.windows(2).all(|p| p[0] == p[1]));
    let bad = Command::new(env!("CARGO_BIN_EXE_panoptic"))
        .env("PANOPTIC_THREADS", "many")
        .args(["fuse", "--inputs", s(&noisy), "--spec", s(&spec), "--out", s(&dir.path().join("x.rten"))])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn targets_writes_every_map() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 8, 3);
    let out = dir.path().join("t");
    ok(&["targets", "--gt", s(&scene.join("gt.rten")), "--spec", s(&scene.join("spec.json")), "--radius", "8", "--out", s(&out)]);
    let shape = |f: &str| load_rten(out.join(f)).unwrap().shape().as_array();
    assert_eq!(shape("heatmap.rten"), [5, 96, 128]);
    assert_eq!(shape("short.rten"), [10, 96, 128]);
    assert_eq!(shape("middle.rten"), [16, 96, 128]);
    assert_eq!(shape("middle_mask.rten"), [8, 96, 128]);
    assert_eq!(shape("instance_mask.rten"), [1, 96, 128]);
    assert_eq!(shape("semantic_weights.rten"), [1, 96, 128]);
    assert!(out.join("manifest.json").exists());
}

// Evaluation.

fn eval(dir: &Path, gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> (String, String) {
    let (g, p, sp, r) = (dir.join("gt.rten"), dir.join("pred.rten"), dir.join("spec.json"), dir.join("report.json"));
    save_map(&g, gt);
    save_map(&p, pred);
    save_spec(&sp, spec);
    let out = ok(&["eval", "--gt", s(&g), "--pred", s(&p), "--spec", s(&sp), "--report", s(&r)]);
    (String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(&r).unwrap())
}

#[test]
fn identical_maps_score_one() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 11, 4);
    let gt = load_map(&scene.join("gt.rten"));
    let (table, json) = eval(dir.path(), &gt, &gt, &DatasetSpec::synthetic());
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!((report["pq"].as_f64(), report["pc"].as_f64()), (Some(1.0), Some(1.0)));
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["class", "PQ", "SQ", "RQ", "Cov"]);
    for row in table.lines().skip(1).filter(|l| !l.starts_with("things") && !l.starts_with("stuff")) {
        assert!(row.split_whitespace().rev().take(4).all(|v| v == "100.00"), "{row}");
    }
}

#[test]
fn tree_example_covers_one_third() {
    for tree_is_thing in [true, false] {
        let dir = TempDir::new().unwrap();
        let things = if tree_is_thing { vec![1] } else { vec![] };
        let spec = DatasetSpec::new(2, things, vec!["sky".into(), "tree".into()], None).unwrap();
        let (h, w) = (10, 30);
        let (mut gs, mut gi, mut ps, mut pi) = (vec![0; h * w], vec![0; h * w], vec![0; h * w], vec![0; h * w]);
        for t in 0..3 {
            for y in 3..7 {
                for x in 2 + 10 * t..6 + 10 * t {
                    let i = y * w + x;
                    gs[i] = 1;
                    gi[i] = if tree_is_thing { t as i32 + 1 } else { 0 };
                    if t == 0 {
                        ps[i] = 1;
                        pi[i] = gi[i];
                    }
                }
            }
        }
        let gt = PanopticMap::from_planes(h, w, gs, gi).unwrap();
        let pred = PanopticMap::from_planes(h, w, ps, pi).unwrap();
        let (table, json) = eval(dir.path(), &gt, &pred, &spec);
        let report: serde_json::Value = serde_json::from_str(&json).unwrap();
        let tree = &report["classes"][1];
        assert_eq!(tree["name"], "tree");
        assert!((tree["coverage"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert!(table.lines().any(|l| l.starts_with("tree (1)") && l.trim_end().ends_with("33.33")), "{table}");
    }
}

/// Mirror of the report layout, filled from the oracle.
#[derive(Serialize)]
struct Summary {
    pq: f64,
    sq: f64,
    rq: f64,
    classes: usize,
}

#[derive(Serialize)]
struct Row {
    class_id: i32,
    name: String,
    kind: &'static str,
    pq: f64,
    sq: f64,
    rq: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    iou_sum: f64,
    coverage: Option<f64>,
    gt_area: u64,
}

#[derive(Serialize)]
struct Report {
    pq: f64,
    sq: f64,
    rq: f64,
    pc: f64,
    thing: Summary,
    stuff: Summary,
    classes: Vec<Row>,
}

fn oracle_report(gt: &PanopticMap, pred: &PanopticMap, spec: &DatasetSpec) -> String {
    let lab = |m: &PanopticMap| Labeling {
        semantic: m.semantic_plane().to_vec().leak(),
        instance: m.instance_plane().to_vec().leak(),
    };
    let (g, p) = (lab(gt), lab(pred));
    let is_thing = |c: i32| spec.is_thing(c);
    let pq = panoptic_oracle::pq_naive(&g, &p, &is_thing, spec.ignore_label());
    let cov = panoptic_oracle::covering_naive(&g, &p, &is_thing, spec.ignore_label());
    let rows: Vec<Row> = pq
        .iter()
        .map(|(&c, t)| Row {
            class_id: c,
            name: spec.name(c).to_string(),
            kind: if spec.is_thing(c) { "thing" } else { "stuff" },
            pq: t.pq(),
            sq: t.sq(),
            rq: t.rq(),
            tp: t.tp,
            fp: t.fp,
            fn_: t.fn_,
            iou_sum: t.iou_sum,
            coverage: cov.get(&c).map(|v| v.0),
            gt_area: cov.get(&c).map_or(0, |v| v.1),
        })
        .collect();
    let summary = |f: &dyn Fn(&Row) -> bool| {
        let g: Vec<&Row> = rows.iter().filter(|r| f(r)).collect();
        let n = g.len() as f64;
        let mean = |v: &dyn Fn(&Row) -> f64| if g.is_empty() { 0.0 } else { g.iter().map(|r| v(r)).sum::<f64>() / n };
        Summary {
            pq: mean(&|r| r.pq),
            sq: mean(&|r| r.sq),
            rq: mean(&|r| r.rq),
            classes: g.len(),
        }
    };
    let all = summary(&|_| true);
    let covs: Vec<f64> = cov.values().map(|v| v.0).collect();
    let report = Report {
        pq: all.pq,
        sq: all.sq,
        rq: all.rq,
        pc: if covs.is_empty() { 0.0 } else { covs.iter().sum::<f64>() / covs.len() as f64 },
        thing: summary(&|r| r.kind == "thing"),
        stuff: summary(&|r| r.kind == "stuff"),
        classes: rows,
    };
    serde_json::to_string_pretty(&report).unwrap() + "\n"
}

/// A scene and a prediction that copies it except for a band of rows taken
/// from another scene, so matched, missed and spurious segments all occur.
fn pair(seed: u64) -> (PanopticMap, PanopticMap) {
    let scene = |seed| {
        panoptic::synth::generate_scene(&panoptic::synth::SceneConfig {
            seed,
            height: 32,
            width: 32,
            num_instances: 6,
            min_extent: 3,
            max_extent: 14,
            ..Default::default()
        })
        .unwrap()
    };
    let (gt, other) = (scene(seed), scene(seed + 1000));
    let (a, b) = ((seed % 20) as usize, (seed % 20 + 4 + seed % 9) as usize);
    let mut sem = gt.semantic_plane().to_vec();
    let mut inst = gt.instance_plane().to_vec();
    for i in a * 32..b.min(32) * 32 {
        sem[i] = other.semantic_plane()[i];
        inst[i] = if other.instance_plane()[i] > 0 { other.instance_plane()[i] + 100 } else { 0 };
    }
    (gt, PanopticMap::from_planes(32, 32, sem, inst).unwrap())
}

#[test]
fn eval_json_matches_the_oracle_byte_for_byte() {
    let spec = DatasetSpec::synthetic();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for seed in 0..12 {
        let dir = TempDir::new().unwrap();
        let (gt, pred) = pair(seed);
        let (_, json) = eval(dir.path(), &gt, &pred, &spec);
        assert_eq!(json, oracle_report(&gt, &pred, &spec), "seed {seed}");
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for c in v["classes"].as_array().unwrap() {
            tp += c["tp"].as_u64().unwrap();
            fp += c["fp"].as_u64().unwrap();
            fn_ += c["fn"].as_u64().unwrap();
        }
    }
    assert!(tp > 0 && fp > 0 && fn_ > 0, "{tp} {fp} {fn_}");
}

#[test]
fn eval_shape_mismatch_exits_3() {
    let dir = TempDir::new().unwrap();
    let a = PanopticMap::from_planes(4, 4, vec![0; 16], vec![0; 16]).unwrap();
    let b = PanopticMap::from_planes(4, 5, vec![0; 20], vec![0; 20]).unwrap();
    let (g, p, sp) = (dir.path().join("g.rten"), dir.path().join("p.rten"), dir.path().join("s.json"));
    save_map(&g, &a);
    save_map(&p, &b);
    save_spec(&sp, &DatasetSpec::synthetic());
    let out = panoptic(&["eval", "--gt", s(&g), "--pred", s(&p), "--spec", s(&sp)]);
    assert_eq!(out.status.code(), Some(3));
}

// Rendering.

fn render(dir: &Path, input: &Path, name: &str) -> (Vec<u8>, HashSet<[u8; 3]>) {
    let png = dir.join(name);
    ok(&["render", "--input", s(input), "--spec", s(&dir.join("spec.json")), "--out", s(&png)]);
    let bytes = std::fs::read(&png).unwrap();
    let img = image::load_from_memory(&bytes).unwrap().to_rgb8();
    let colors = img.pixels().map(|p| p.0).collect();
    (bytes, colors)
}

#[test]
fn render_is_deterministic_and_counts_colors() {
    let dir = TempDir::new().unwrap();
    let scene = synth(dir.path(), 12, 3);
    std::fs::copy(scene.join("spec.json"), dir.path().join("spec.json")).unwrap();
    let gt_path = scene.join("gt.rten");
    let gt = load_map(&gt_path);
    assert_eq!(gt.instance_pixels().len(), 3);
    let (a, colors) = render(dir.path(), &gt_path, "a.png");
    let (b, _) = render(dir.path(), &gt_path, "b.png");
    assert_eq!(a, b);
    let spec = DatasetSpec::synthetic();
    let stuff: HashSet<i32> = gt.semantic_plane().iter().copied().filter(|&c| spec.is_stuff(c)).collect();
    assert_eq!(colors.len(), stuff.len() + 3);
}

#[test]
fn stuff_bands_render_flat() {
    let dir = TempDir::new().unwrap();
    save_spec(&dir.path().join("spec.json"), &DatasetSpec::synthetic());
    let (h, w) = (12, 9);
    let sem: Vec<i32> = (0..h * w).map(|i| if i / w < 5 { 1 } else { 0 }).collect();
    let input = dir.path().join("stuff.rten");
    save_map(&input, &PanopticMap::from_planes(h, w, sem, vec![0; h * w]).unwrap());
    let png = dir.path().join("stuff.png");
    ok(&["render", "--input", s(&input), "--spec", s(&dir.path().join("spec.json")), "--out", s(&png)]);
    let img = image::open(&png).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (w as u32, h as u32));
    for (x, y, p) in img.enumerate_pixels() {
        let band_start = if y < 5 { 0 } else { 5 };
        assert_eq!(*p, *img.get_pixel(0, band_start), "({x}, {y})");
    }
    assert_ne!(img.get_pixel(0, 0), img.get_pixel(0, 11));
}

#[test]
fn render_rejects_invalid_maps() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    save_spec(&spec, &DatasetSpec::synthetic());
    // A stuff class carrying an instance id.
    let input = dir.path().join("bad.rten");
    save_map(&input, &PanopticMap::from_planes(1, 2, vec![0, 0], vec![0, 3]).unwrap());
    let out = panoptic(&["render", "--input", s(&input), "--spec", s(&spec), "--out", s(&dir.path().join("x.png"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_reports_every_stage() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("bench.json");
    ok(&["bench", "--size", "96", "--instances", "3", "--repeats", "3", "--report", s(&report)]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    for (_, ms) in v["median_ms"].as_object().unwrap() {
        assert!(ms.as_f64().unwrap() >= 0.0);
    }
    assert!(dir.path().join("bench.json.manifest.json").exists());
}
