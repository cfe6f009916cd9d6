use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use geo2sound::alignment::{load_model, save_model, train_alignment, ProjectionModel};
use geo2sound::classifier::{two_stage_train, Forest};
use geo2sound::config::PipelineConfig;
use geo2sound::geoattr::{
    cluster_features, descriptor_from_clusters, load_rgb_image, pseudo_label, read_geo_csv,
    write_geo_csv, ClusterFeature, GeoAttrConfig, GeoRow, PatchGrid, CLASS_COUNT,
};
use geo2sound::hypothesis::{
    build_expansion_prompt, build_plan_for_count, parse_hypotheses, submit_generation,
    ArtifactRef, AudioGenerator, CandidatePlan, HttpGenerator, HypothesisMode, HypothesisSet,
    PromptKind, ReplayGenerator,
};
use geo2sound::linalg::Matrix;
use geo2sound::metrics::{evaluate_run, write_per_scene_csv, write_selections, RunInputs, SelectionRow};
use geo2sound::synth::{run_desk_benchmark, write_world, FOREST_FILE, MODEL_FILE};
use geo2sound::tensor_io::{load_manifest, read_tensor, SceneManifest};
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    EvaluateArgs, ExtractArgs, PlanArgs, SelectArgs, SynthBenchArgs, SynthWorldArgs,
    TrainAlignArgs, TrainForestArgs,
};

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn scene_clusters(base: &Path, s: &SceneManifest, cfg: &GeoAttrConfig) -> anyhow::Result<Vec<ClusterFeature>> {
    let image_path = SceneManifest::resolve(base, &s.image_path);
    let image = load_rgb_image(&image_path).with_context(|| format!("image {}", image_path.display()))?;
    let patch_path = SceneManifest::resolve(base, &s.patch_embedding_path);
    let tensor = read_tensor(&patch_path).with_context(|| format!("patch grid {}", patch_path.display()))?;
    let grid = PatchGrid::from_tensor(&tensor).with_context(|| format!("patch grid {}", patch_path.display()))?;
    Ok(cluster_features(&image, &grid, cfg)?)
}

pub fn extract_attrs(mut cfg: PipelineConfig, a: ExtractArgs) -> anyhow::Result<()> {
    if let Some(k) = a.k {
        cfg.geoattr.kmeans.k = k;
    }
    if let Some(m) = a.min_area {
        cfg.geoattr.min_area_ratio = m;
    }
    let scenes = load_manifest(&a.manifest)?;
    let base = manifest_dir(&a.manifest);
    let forest = Forest::load(&a.forest)?;

    let results: Vec<anyhow::Result<GeoRow>> = scenes
        .par_iter()
        .map(|s| {
            let clusters = scene_clusters(&base, s, &cfg.geoattr)?;
            let descriptor = descriptor_from_clusters(&clusters, &forest, cfg.geoattr.min_area_ratio)?;
            Ok(GeoRow {
                scene_id: s.scene_id.clone(),
                descriptor,
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (s, r) in scenes.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((s.scene_id.clone(), e)),
        }
    }
    if let Some((id, e)) = failures.first() {
        if !a.keep_going {
            let more = match failures.len() {
                1 => String::new(),
                n => format!(" (and {} more failing scenes)", n - 1),
            };
            bail!("scene {id}: {e:#}{more}");
        }
    }
    write_geo_csv(&a.out, &rows)?;
    if !failures.is_empty() {
        eprintln!("{} of {} scenes failed:", failures.len(), scenes.len());
        for (id, e) in &failures {
            eprintln!("  {id}: {e:#}");
        }
    }
    eprintln!("wrote {} descriptors to {}", rows.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ForestSummary {
    samples: usize,
    kept: usize,
    fell_back: bool,
    trees: usize,
}

pub fn train_attrs_classifier(mut cfg: PipelineConfig, a: TrainForestArgs) -> anyhow::Result<()> {
    if let Some(t) = a.trees {
        cfg.forest.n_trees = t;
    }
    if let Some(t) = a.threshold {
        cfg.forest.confidence_threshold = t;
    }
    if let Some(k) = a.k {
        cfg.geoattr.kmeans.k = k;
    }
    let scenes = load_manifest(&a.manifest)?;
    let base = manifest_dir(&a.manifest);
    let per_scene: Vec<Vec<ClusterFeature>> = scenes
        .par_iter()
        .map(|s| scene_clusters(&base, s, &cfg.geoattr).with_context(|| format!("scene {}", s.scene_id)))
        .collect::<anyhow::Result<_>>()?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in per_scene.iter().flatten() {
        rows.push(c.descriptor.feature_vector());
        labels.push(pseudo_label(&c.descriptor).0.index());
    }
    if rows.is_empty() {
        bail!("manifest {} has no scenes", a.manifest.display());
    }
    let x = Matrix::from_rows(&rows, rows[0].len());
    let outcome = two_stage_train(&x, &labels, CLASS_COUNT, &cfg.forest)?;
    outcome
        .forest
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let summary = ForestSummary {
        samples: labels.len(),
        kept: outcome.kept.len(),
        fell_back: outcome.fell_back,
        trees: outcome.forest.trees.len(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

pub fn train_align(mut cfg: PipelineConfig, a: TrainAlignArgs) -> anyhow::Result<()> {
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.max_epochs = v;
    }
    if let Some(v) = a.patience {
        t.patience = v;
    }
    if let Some(v) = a.hidden {
        t.hidden = v;
    }
    if let Some(v) = a.pca_dims {
        t.pca_dims = v;
    }
    let geo_rows = read_geo_csv(&a.geo)?;
    let mut geo = Matrix::zeros(geo_rows.len(), 5);
    for (i, r) in geo_rows.iter().enumerate() {
        geo.row_mut(i).copy_from_slice(&r.descriptor.to_array());
    }
    let targets = read_tensor(&a.targets)?
        .to_matrix()
        .with_context(|| format!("targets {}", a.targets.display()))?;
    if targets.rows() != geo.rows() {
        bail!(
            "{} has {} rows but {} has {}",
            a.geo.display(),
            geo.rows(),
            a.targets.display(),
            targets.rows()
        );
    }
    let (model, history) = train_alignment(&geo, &targets, &cfg.train)?;
    save_model(&a.out, &model)?;
    let history_path = a.history.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".history.json");
        PathBuf::from(p)
    });
    write_json(&history_path, &history)?;
    eprintln!(
        "best epoch {} of {}: val loss {:.4}, val cosine {:.4}{}",
        history.best_epoch,
        history.epochs.len(),
        history.best_val_loss,
        history.best_val_cosine,
        if history.stopped_early { " (early stop)" } else { "" }
    );
    Ok(())
}

fn load_candidates(base: &Path, s: &SceneManifest) -> anyhow::Result<Matrix> {
    if s.audio_embedding_paths.is_empty() {
        bail!("no candidates listed");
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(s.audio_embedding_paths.len());
    for p in &s.audio_embedding_paths {
        let path = SceneManifest::resolve(base, p);
        let t = read_tensor(&path).with_context(|| format!("candidate {}", path.display()))?;
        if !matches!(t.shape(), [_] | [1, _]) {
            bail!("candidate {} has shape {:?}, expected [D] or [1, D]", path.display(), t.shape());
        }
        rows.push(t.to_f64());
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        bail!("candidates have different widths");
    }
    Ok(Matrix::from_rows(&rows, d))
}

fn select_one(
    model: &ProjectionModel,
    geo: &HashMap<String, [f64; 5]>,
    base: &Path,
    s: &SceneManifest,
) -> anyhow::Result<SelectionRow> {
    let g = geo
        .get(&s.scene_id)
        .copied()
        .or(s.geo_descriptor)
        .ok_or_else(|| anyhow!("no geo descriptor (pass --geo or fill the manifest)"))?;
    let cands = load_candidates(base, s)?;
    let scores = model.score_candidates(&g, &cands)?;
    Ok(SelectionRow {
        scene_id: s.scene_id.clone(),
        selected_index: scores.selected,
        geoalign: scores.geoalign,
        scores: scores.scores,
    })
}

pub fn select(_cfg: PipelineConfig, a: SelectArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let scenes = load_manifest(&a.manifest)?;
    let base = manifest_dir(&a.manifest);
    let geo: HashMap<String, [f64; 5]> = match &a.geo {
        Some(p) => read_geo_csv(p)?
            .into_iter()
            .map(|r| (r.scene_id, r.descriptor.to_array()))
            .collect(),
        None => HashMap::new(),
    };

    let rows: Vec<SelectionRow> = scenes
        .par_iter()
        .map(|s| select_one(&model, &geo, &base, s).with_context(|| format!("scene {}", s.scene_id)))
        .collect::<anyhow::Result<_>>()?;
    write_selections(&a.out, &rows)?;
    eprintln!("wrote {} selections to {}", rows.len(), a.out.display());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let report = evaluate_run(&RunInputs {
        gen_dir: a.gen_dir,
        ref_dir: a.ref_dir,
    })?;
    write_json(&a.report, &report)?;
    if let Some(p) = &a.per_scene {
        write_per_scene_csv(p, &report.per_scene)?;
    }
    eprintln!(
        "FAD {:.4}  FD {:.4}  KL {:.4}  OVL {:.4}  IS {:.4}",
        report.fad, report.fd, report.kl, report.ovl, report.is_score
    );
    Ok(())
}

pub fn synth_bench(mut cfg: PipelineConfig, a: SynthBenchArgs) -> anyhow::Result<()> {
    let b = &mut cfg.synth;
    if let Some(n) = a.scenes {
        b.world.n_scenes = n;
    }
    if let Some(s) = a.noise {
        b.world.noise_sigma = s;
    }
    if let Some(e) = a.epochs {
        b.train.max_epochs = e;
    }
    let art = run_desk_benchmark(&cfg.synth)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, art.report.to_json()).with_context(|| format!("writing {}", a.out.display()))?;
    let dir = a.artifacts_dir.unwrap_or_else(|| manifest_dir(&a.out));
    fs::create_dir_all(&dir)?;
    save_model(dir.join(MODEL_FILE), &art.model)?;
    art.forest.save(dir.join(FOREST_FILE))?;

    for arm in &art.report.arms {
        let sweep: Vec<String> = arm
            .sweep
            .iter()
            .map(|p| format!("N={} acc {:.3} geoalign {:.3}", p.n, p.selection_accuracy, p.geoalign_mean))
            .collect();
        eprintln!("{:<13} val cosine {:.4}  {}", arm.arm.name(), arm.val_cosine, sweep.join("  "));
    }
    Ok(())
}

pub fn synth_world(mut cfg: PipelineConfig, a: SynthWorldArgs) -> anyhow::Result<()> {
    let w = &mut cfg.synth.world;
    if let Some(n) = a.scenes {
        w.n_scenes = n;
    }
    if let Some(s) = a.noise {
        w.noise_sigma = s;
    }
    if let Some(c) = a.candidates {
        w.candidate_count = c;
    }
    let files = write_world(w, &a.out)?;
    eprintln!("wrote {} scenes, manifest {}", files.n_scenes, files.manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct ScenePlan {
    plan: CandidatePlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    artifacts: Option<Vec<ArtifactRef>>,
}

fn hypothesis_set(s: &SceneManifest, mode: HypothesisMode, responses: Option<&Path>) -> anyhow::Result<HypothesisSet> {
    let c0 = s
        .text_hypotheses
        .first()
        .ok_or_else(|| anyhow!("no base caption"))?
        .clone();
    if mode == HypothesisMode::Basic {
        return Ok(HypothesisSet::basic(c0)?);
    }
    let expansions = if s.text_hypotheses.len() >= 3 {
        s.text_hypotheses[1..3].to_vec()
    } else if let Some(dir) = responses {
        let path = dir.join(format!("{}.txt", s.scene_id));
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        parse_hypotheses(&text)?.to_vec()
    } else {
        bail!("manifest holds no expansions; pass --responses or use --mode basic");
    };
    Ok(HypothesisSet::new(c0, expansions, mode)?)
}

pub fn hypothesis_plan(cfg: PipelineConfig, a: PlanArgs) -> anyhow::Result<()> {
    let mode = a.mode.unwrap_or(cfg.candidates.mode);
    let count = a.candidates.unwrap_or(cfg.candidates.count);
    if count == 0 {
        bail!("--candidates must be at least 1");
    }
    let scenes = load_manifest(&a.manifest)?;

    if let Some(dir) = &a.emit_prompts {
        let kind = match mode {
            HypothesisMode::Control => PromptKind::Control,
            _ => PromptKind::Ours,
        };
        fs::create_dir_all(dir)?;
        for s in &scenes {
            let c0 = s.text_hypotheses.first().map(String::as_str).unwrap_or("");
            let prompt = build_expansion_prompt(c0, kind).with_context(|| format!("scene {}", s.scene_id))?;
            fs::write(dir.join(format!("{}.prompt.txt", s.scene_id)), prompt)?;
        }
    }

    let generator: Option<Box<dyn AudioGenerator>> = match (a.generate, &a.replay_dir) {
        (false, _) => None,
        (true, Some(dir)) => Some(Box::new(ReplayGenerator::new(dir))),
        (true, None) => Some(Box::new(
            HttpGenerator::from_env(Duration::from_secs(120)).ok_or_else(|| {
                anyhow!(
                    "--generate needs --replay-dir or {}",
                    geo2sound::hypothesis::GENERATOR_URL_ENV
                )
            })?,
        )),
    };

    let mut out = Vec::with_capacity(scenes.len());
    for s in &scenes {
        let set = hypothesis_set(s, mode, a.responses.as_deref()).with_context(|| format!("scene {}", s.scene_id))?;
        let plan = build_plan_for_count(&s.scene_id, &set, count, cfg.seed);
        let artifacts = match &generator {
            Some(g) => Some(submit_generation(&plan, g.as_ref()).with_context(|| format!("scene {}", s.scene_id))?),
            None => None,
        };
        out.push(ScenePlan { plan, artifacts });
    }
    write_json(&a.out, &out)?;
    eprintln!("wrote {} plans of {count} candidates to {}", out.len(), a.out.display());
    Ok(())
}
