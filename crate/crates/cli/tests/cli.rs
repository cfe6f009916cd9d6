use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geo2sound::geoattr::read_geo_csv;
use geo2sound::metrics::read_selections;
use geo2sound::synth::TruthRow;
use geo2sound::tensor_io::{load_manifest, write_manifest, write_tensor, Tensor};

const SMALL: &str = r#"
seed = 7

[forest]
n_trees = 20
features_per_split = 6

[train]
hidden = 32
max_epochs = 200

[synth]
forest_scenes = 20
sweep = [1, 3, 6]

[synth.world]
n_scenes = 120
embed_dim = 32

[synth.forest]
n_trees = 20
features_per_split = 6

[synth.train]
hidden = 32
max_epochs = 8
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geo2sound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct World {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl World {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("small.toml");
        fs::write(&config, SMALL).unwrap();
        ok(&["synth-world", "--config", s(&config), "--out", s(&root.join("world"))]);
        Self { _dir: dir, root, config }
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn forest(&self) -> PathBuf {
        let f = self.p("forest.json");
        if !f.exists() {
            ok(&[
                "train-attrs-classifier",
                "--config",
                s(&self.config),
                "--manifest",
                s(&self.p("world/manifest.json")),
                "--out",
                s(&f),
            ]);
        }
        f
    }
}

const SUBCOMMANDS: [&str; 8] = [
    "extract-attrs",
    "train-attrs-classifier",
    "train-align",
    "select",
    "evaluate",
    "synth-bench",
    "synth-world",
    "hypothesis-plan",
];

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    for cmd in SUBCOMMANDS {
        let out = run(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd} --help");
        assert!(!out.stdout.is_empty());
        let bad = run(&[cmd, "--no-such-flag"]);
        assert_eq!(bad.status.code(), Some(2), "{cmd} with a bad flag");
        assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));
    }
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["evaluate"]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let out = run(&["evaluate", "--gen-dir", "/nonexistent/a", "--ref-dir", "/nonexistent/b", "--report", "/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn full_pipeline_on_synth_world() {
    let w = World::new();
    let manifest = w.p("world/manifest.json");
    let forest = w.forest();
    let geo = w.p("geo.csv");
    ok(&["extract-attrs", "--config", s(&w.config), "--manifest", s(&manifest), "--forest", s(&forest), "--out", s(&geo), "--jobs", "2"]);
    let rows = read_geo_csv(&geo).unwrap();
    let scenes = load_manifest(&manifest).unwrap();
    assert_eq!(rows.len(), scenes.len());
    for (r, m) in rows.iter().zip(&scenes) {
        assert_eq!(r.scene_id, m.scene_id);
        let truth = m.geo_descriptor.unwrap();
        for (a, b) in r.descriptor.to_array().iter().zip(truth) {
            assert!((a - b).abs() < 0.05, "{} extracted {a} vs {b}", r.scene_id);
        }
    }

    let model = w.p("model.bin");
    ok(&[
        "train-align", "--config", s(&w.config), "--geo", s(&geo),
        "--targets", s(&w.p("world/reference_audio.npy")), "--out", s(&model),
    ]);
    let history: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.p("model.bin.history.json")).unwrap()).unwrap();
    let epochs = history["epochs"].as_array().unwrap();
    let mut best = f64::INFINITY;
    let mut best_so_far = vec![];
    for e in epochs {
        let loss = e["val_loss"].as_f64().unwrap();
        let cos = e["val_cosine"].as_f64().unwrap();
        assert!((loss - (1.0 - cos)).abs() < 1e-9);
        best = best.min(loss);
        best_so_far.push(best);
    }
    assert!(best_so_far.windows(2).all(|p| p[1] <= p[0]));
    assert_eq!(history["best_val_loss"].as_f64().unwrap(), best);

    let selections = w.p("selections.csv");
    ok(&["select", "--model", s(&model), "--manifest", s(&manifest), "--geo", s(&geo), "--out", s(&selections)]);
    let sel = read_selections(&selections).unwrap();
    let truth: Vec<TruthRow> = serde_json::from_str(&fs::read_to_string(w.p("world/truth.json")).unwrap()).unwrap();
    assert_eq!(sel.len(), 120);
    let mut hits = 0;
    for (r, t) in sel.iter().zip(&truth) {
        assert_eq!(r.scene_id, t.scene_id);
        assert!(r.selected_index < 6);
        assert_eq!(r.scores.len(), 6);
        assert_eq!(r.geoalign, r.scores[r.selected_index]);
        hits += (r.selected_index == t.compatible_index) as usize;
    }
    assert!(hits >= 96, "only {hits} of 120 compatible candidates selected");
}

#[test]
fn extract_attrs_missing_patch_and_keep_going() {
    let w = World::new();
    let forest = w.forest();
    let manifest = w.p("world/manifest.json");
    let mut scenes = load_manifest(&manifest).unwrap();
    scenes[3].patch_embedding_path = PathBuf::from("patches/missing.npy");
    let broken = w.p("world/broken.json");
    write_manifest(&broken, &scenes).unwrap();

    let geo = w.p("geo.csv");
    let out = run(&["extract-attrs", "--config", s(&w.config), "--manifest", s(&broken), "--forest", s(&forest), "--out", s(&geo)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scene_00003"), "{err}");
    assert!(!geo.exists());

    let out = ok(&[
        "extract-attrs", "--config", s(&w.config), "--manifest", s(&broken),
        "--forest", s(&forest), "--out", s(&geo), "--keep-going",
    ]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 of 120 scenes failed") && err.contains("scene_00003"), "{err}");
    let rows = read_geo_csv(&geo).unwrap();
    assert_eq!(rows.len(), 119);
    assert!(rows.iter().all(|r| r.scene_id != "scene_00003"));
}

#[test]
fn extraction_independent_of_jobs() {
    let w = World::new();
    let forest = w.forest();
    let manifest = w.p("world/manifest.json");
    let (a, b) = (w.p("a.csv"), w.p("b.csv"));
    ok(&["extract-attrs", "--config", s(&w.config), "--manifest", s(&manifest), "--forest", s(&forest), "--out", s(&a), "--jobs", "1"]);
    ok(&["extract-attrs", "--config", s(&w.config), "--manifest", s(&manifest), "--forest", s(&forest), "--out", s(&b), "--jobs", "3"]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

fn write_geo_and_targets(dir: &Path, n: usize, noisy: bool) -> (PathBuf, PathBuf) {
    let mut csv = String::from("scene_id,vegetation,water,built_up,road,land_use_mix\n");
    let mut targets = Vec::with_capacity(n * 8);
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..n {
        let g: Vec<f64> = (0..5).map(|_| next()).collect();
        csv.push_str(&format!("s{i},{},{},{},{},{}\n", g[0], g[1], g[2], g[3], g[4]));
        for k in 0..8 {
            let signal = if noisy { 0.0 } else { g[k % 5] - 0.5 * g[(k + 1) % 5] };
            targets.push(signal + next() - 0.5);
        }
    }
    let geo = dir.join("geo.csv");
    fs::write(&geo, csv).unwrap();
    let t = dir.join("targets.npy");
    write_tensor(&t, &Tensor::from_f64(vec![n, 8], &targets).unwrap()).unwrap();
    (geo, t)
}

#[test]
fn train_align_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (geo, targets) = write_geo_and_targets(dir.path(), 120, false);
    let (a, b, c) = (dir.path().join("a.bin"), dir.path().join("b.bin"), dir.path().join("c.bin"));
    let common = ["--geo", s(&geo), "--targets", s(&targets), "--hidden", "16", "--pca-dims", "4", "--epochs", "15"];
    for (out, seed) in [(&a, "42"), (&b, "42"), (&c, "43")] {
        let mut args = vec!["train-align", "--seed", seed, "--out", s(out)];
        args.extend(common);
        ok(&args);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    geo2sound::alignment::load_model(&a).unwrap();
}

#[test]
fn train_align_stops_early_on_noise() {
    let dir = tempfile::tempdir().unwrap();
    let (geo, targets) = write_geo_and_targets(dir.path(), 120, true);
    let out = dir.path().join("m.bin");
    let hist = dir.path().join("h.json");
    ok(&[
        "train-align", "--geo", s(&geo), "--targets", s(&targets), "--out", s(&out), "--history", s(&hist),
        "--hidden", "32", "--pca-dims", "4", "--patience", "5",
    ]);
    let h: serde_json::Value = serde_json::from_str(&fs::read_to_string(&hist).unwrap()).unwrap();
    assert_eq!(h["stopped_early"], true);
    assert!(h["epochs"].as_array().unwrap().len() < 80);
}

#[test]
fn train_align_rejects_row_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (geo, _) = write_geo_and_targets(dir.path(), 20, false);
    let t = dir.path().join("short.npy");
    write_tensor(&t, &Tensor::zeros(vec![5, 8])).unwrap();
    let out = run(&["train-align", "--geo", s(&geo), "--targets", s(&t), "--out", s(&dir.path().join("m.bin"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_self_comparison_gives_zero_fad() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    fs::create_dir_all(&run_dir).unwrap();
    let feats: Vec<f64> = (0..60).map(|k| ((k * 7) % 11) as f64).collect();
    write_tensor(run_dir.join("fad_features.npy"), &Tensor::from_f64(vec![20, 3], &feats).unwrap()).unwrap();
    write_tensor(run_dir.join("fd_features.npy"), &Tensor::from_f64(vec![20, 3], &feats).unwrap()).unwrap();
    let probs: Vec<f64> = (0..40).map(|k| if k % 2 == 0 { 0.25 } else { 0.75 }).collect();
    write_tensor(run_dir.join("class_probs.npy"), &Tensor::from_f64(vec![20, 2], &probs).unwrap()).unwrap();
    let report = dir.path().join("report.json");
    ok(&["evaluate", "--gen-dir", s(&run_dir), "--ref-dir", s(&run_dir), "--report", s(&report)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["fad"].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn synth_bench_writes_deterministic_artifacts() {
    let w = World::new();
    let (a, b) = (w.p("a"), w.p("b"));
    for d in [&a, &b] {
        ok(&["synth-bench", "--config", s(&w.config), "--out", s(&d.join("report.json"))]);
    }
    for f in ["report.json", "model.bin", "forest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["arms"].as_array().unwrap().len(), 4);
    assert_eq!(r["seed"], 7);
}

#[test]
fn hypothesis_plans() {
    let w = World::new();
    let manifest = w.p("world/manifest.json");
    let plan = w.p("plan.json");
    ok(&["hypothesis-plan", "--manifest", s(&manifest), "--mode", "basic", "--candidates", "6", "--out", s(&plan)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 120);
    assert_eq!(v[0]["plan"]["entries"].as_array().unwrap().len(), 6);

    // expansions need model responses
    let out = run(&["hypothesis-plan", "--manifest", s(&manifest), "--out", s(&plan)]);
    assert_eq!(out.status.code(), Some(1));

    let prompts = w.p("prompts");
    let responses = w.p("responses");
    fs::create_dir_all(&responses).unwrap();
    for sc in load_manifest(&manifest).unwrap() {
        fs::write(
            responses.join(format!("{}.txt", sc.scene_id)),
            "(1) Birds sing in the trees.\n(2) Wind moves over open ground.\n",
        )
        .unwrap();
    }
    ok(&[
        "hypothesis-plan", "--manifest", s(&manifest), "--mode", "ours", "--candidates", "10",
        "--emit-prompts", s(&prompts), "--responses", s(&responses), "--out", s(&plan),
    ]);
    assert!(fs::read_to_string(prompts.join("scene_00000.prompt.txt")).unwrap().contains("satellite image caption"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    let entries = v[2]["plan"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 10);
    assert_eq!(entries[4]["prompt_text"], "Birds sing in the trees.");

    // replay generation: only scene 0 has files, so the run fails and names a scene
    let replay = w.p("replay");
    fs::create_dir_all(&replay).unwrap();
    let out = run(&[
        "hypothesis-plan", "--manifest", s(&manifest), "--mode", "basic", "--candidates", "2",
        "--generate", "--replay-dir", s(&replay), "--out", s(&plan),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scene_00000"));
}
