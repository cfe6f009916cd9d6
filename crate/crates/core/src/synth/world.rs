//! Procedural scenes: painted land-cover layouts, class-conditional patch
//! embeddings and audio embeddings tied to the true descriptor through a
//! fixed linear map.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Dirichlet, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geoattr::{GeoDescriptor, LandClass, PatchGrid, RgbImage, CLASS_COUNT};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::{derived, permutation, splitmix64, DetRng};
use crate::tensor_io::{write_manifest, write_tensor, SceneManifest, Tensor};

pub const AUDIO_DIM: usize = 32;
pub const DESCRIPTOR_DIM: usize = 5;

/// Largest candidate count the benchmark sweeps over.
pub const MAX_SWEEP_CANDIDATES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthWorldConfig {
    pub n_scenes: usize,
    /// Expected norm of the Gaussian noise added to a unit audio direction
    /// (per-coordinate std is `noise_sigma / sqrt(32)`).
    pub noise_sigma: f64,
    /// `5 × 32`, rows orthonormalized on load. `None` draws one from the seed.
    pub planted_map: Option<Vec<Vec<f64>>>,
    /// Side of the square image in pixels.
    pub image_size: usize,
    /// Patches per side.
    pub patch_grid: usize,
    pub embed_dim: usize,
    /// Expected norm of the noise around each unit class mean.
    pub patch_noise: f64,
    pub dirichlet_alpha: f64,
    pub candidate_count: usize,
    pub seed: u64,
}

impl Default for SynthWorldConfig {
    fn default() -> Self {
        Self {
            n_scenes: 1000,
            noise_sigma: 0.05,
            planted_map: None,
            image_size: 32,
            patch_grid: 8,
            embed_dim: 1024,
            patch_noise: 0.1,
            dirichlet_alpha: 1.0,
            candidate_count: 6,
            seed: 42,
        }
    }
}

impl SynthWorldConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if !(self.patch_noise >= 0.0 && self.patch_noise.is_finite()) {
            return bad(format!("patch_noise must be finite and >= 0, got {}", self.patch_noise));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return bad("dirichlet_alpha must be positive".into());
        }
        if self.patch_grid == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_grid) {
            return bad(format!(
                "image_size {} must be a positive multiple of patch_grid {}",
                self.image_size, self.patch_grid
            ));
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if self.candidate_count == 0 {
            return bad("candidate_count must be at least 1".into());
        }
        if self.n_scenes == 1 && self.candidate_count > 1 {
            return bad("distractor candidates need at least two scenes".into());
        }
        if let Some(m) = &self.planted_map {
            if m.len() != DESCRIPTOR_DIM || m.iter().any(|r| r.len() != AUDIO_DIM) {
                return bad(format!("planted_map must be {DESCRIPTOR_DIM}x{AUDIO_DIM}"));
            }
        }
        Ok(())
    }
}

/// Audio side of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAudio {
    /// Independent draw around the planted direction, used as the training
    /// target.
    pub reference: Vec<f64>,
    pub compatible: Vec<f64>,
    /// Draws around other scenes' planted directions.
    pub distractors: Matrix,
    slot_seed: u64,
}

impl SceneAudio {
    /// First `n − 1` distractors with the compatible embedding inserted at a
    /// scene- and `n`-dependent slot. Returns the candidates and that slot.
    ///
    /// Panics if `n` is zero or exceeds the distractor pool plus one.
    pub fn candidates(&self, n: usize) -> (Matrix, usize) {
        assert!(n >= 1 && n <= self.distractors.rows() + 1, "candidate count {n} out of range");
        let slot = (splitmix64(self.slot_seed ^ n as u64) % n as u64) as usize;
        let mut m = Matrix::zeros(n, self.compatible.len());
        let mut d = 0;
        for j in 0..n {
            if j == slot {
                m.row_mut(j).copy_from_slice(&self.compatible);
            } else {
                m.row_mut(j).copy_from_slice(self.distractors.row(d));
                d += 1;
            }
        }
        (m, slot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub scene_id: String,
    pub true_descriptor: GeoDescriptor,
    /// Class index of every patch, row-major.
    pub patch_classes: Vec<usize>,
    pub image: RgbImage,
    pub patches: PatchGrid,
    pub audio: SceneAudio,
    pub caption: String,
}

/// Fixed parts of a world plus the per-scene class proportions, which other
/// scenes need for their distractors.
#[derive(Debug, Clone)]
pub struct World {
    pub config: SynthWorldConfig,
    /// `5 × 32` with orthonormal rows.
    pub planted_map: Matrix,
    /// `5 × embed_dim` unit class means.
    pub class_means: Matrix,
    counts: Vec<[usize; CLASS_COUNT]>,
    distractor_pool: usize,
}

const TAG_MAP: u64 = u64::MAX;
const TAG_MEANS: u64 = u64::MAX - 1;

fn scene_tag(i: usize, stream: u64) -> u64 {
    ((i as u64) << 2) | stream
}

fn gaussian_vec(rng: &mut DetRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Gram–Schmidt over the rows; `None` when they are (numerically) dependent.
fn orthonormal_rows(rows: &[Vec<f64>]) -> Option<Matrix> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut v = r.clone();
        // two passes for stability
        for _ in 0..2 {
            for q in &out {
                let p = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = norm(&v);
        if !(n > 1e-9 * norm(r).max(1e-300)) {
            return None;
        }
        out.push(v.iter().map(|x| x / n).collect());
    }
    Some(Matrix::from_rows(&out, rows.first().map_or(0, |r| r.len())))
}

/// Rounds proportions to counts summing to `total` (largest remainder, lower
/// class first on ties).
fn apportion(p: &[f64; CLASS_COUNT], total: usize) -> [usize; CLASS_COUNT] {
    let mut counts = [0usize; CLASS_COUNT];
    let mut rem = [0.0; CLASS_COUNT];
    for c in 0..CLASS_COUNT {
        let exact = p[c] * total as f64;
        counts[c] = exact.floor() as usize;
        rem[c] = exact - counts[c] as f64;
    }
    let mut left = total - counts.iter().sum::<usize>().min(total);
    let mut order: Vec<usize> = (0..CLASS_COUNT).collect();
    order.sort_by(|&a, &b| rem[b].total_cmp(&rem[a]).then(a.cmp(&b)));
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[c] += 1;
        left -= 1;
    }
    counts
}

fn jitter(rng: &mut DetRng, base: [u8; 3], amp: i32) -> [u8; 3] {
    base.map(|v| (v as i32 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8)
}

/// Painted colour of one pixel of a class region.
pub fn paint_pixel(class: LandClass, y: usize, x: usize, rng: &mut DetRng) -> [u8; 3] {
    match class {
        LandClass::Vegetation => jitter(rng, [40, 140, 50], 6),
        LandClass::Water => jitter(rng, [25, 55, 115], 4),
        LandClass::BuiltUp => {
            if (y / 2 + x / 2).is_multiple_of(2) {
                [85, 85, 90]
            } else {
                [205, 205, 200]
            }
        }
        LandClass::Road => jitter(rng, [118, 118, 118], 3),
        LandClass::Other => jitter(rng, [230, 110, 40], 6),
    }
}

impl World {
    pub fn new(config: SynthWorldConfig) -> Result<Self, SynthError> {
        Self::with_pool(config, MAX_SWEEP_CANDIDATES)
    }

    /// Like [`World::new`] but sizes each scene's distractor pool for at
    /// least `max_candidates` candidates.
    pub fn with_pool(config: SynthWorldConfig, max_candidates: usize) -> Result<Self, SynthError> {
        config.validate()?;
        let seed = config.seed;

        let rows: Vec<Vec<f64>> = match &config.planted_map {
            Some(m) => m.clone(),
            None => {
                let mut rng = derived(seed, TAG_MAP);
                (0..DESCRIPTOR_DIM).map(|_| gaussian_vec(&mut rng, AUDIO_DIM, 1.0)).collect()
            }
        };
        let planted_map = orthonormal_rows(&rows)
            .ok_or_else(|| SynthError::InvalidConfig("planted_map rows are linearly dependent".into()))?;

        let mut rng = derived(seed, TAG_MEANS);
        let means: Vec<Vec<f64>> = (0..CLASS_COUNT)
            .map(|_| normalized(gaussian_vec(&mut rng, config.embed_dim, 1.0)))
            .collect();
        let class_means = Matrix::from_rows(&means, config.embed_dim);

        let dirichlet = Dirichlet::new([config.dirichlet_alpha; CLASS_COUNT])
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        let n_patches = config.patch_grid * config.patch_grid;
        let counts = (0..config.n_scenes)
            .map(|i| {
                let p: [f64; CLASS_COUNT] = dirichlet.sample(&mut derived(seed, scene_tag(i, 0)));
                apportion(&p, n_patches)
            })
            .collect();

        let distractor_pool = if config.n_scenes > 1 {
            config.candidate_count.max(max_candidates).max(1) - 1
        } else {
            0
        };
        Ok(Self {
            config,
            planted_map,
            class_means,
            counts,
            distractor_pool,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn distractor_pool(&self) -> usize {
        self.distractor_pool
    }

    pub fn scene_id(i: usize) -> String {
        format!("scene_{i:05}")
    }

    pub fn true_descriptor(&self, i: usize) -> GeoDescriptor {
        let total = (self.config.patch_grid * self.config.patch_grid) as f64;
        let p = self.counts[i].map(|c| c as f64 / total);
        GeoDescriptor::from_proportions(&p).expect("patch proportions form a distribution")
    }

    /// `normalize(Mᵀ d)` for a descriptor array.
    pub fn planted_direction(&self, d: &[f64; DESCRIPTOR_DIM]) -> Vec<f64> {
        let mut v = vec![0.0; AUDIO_DIM];
        for (k, &dk) in d.iter().enumerate() {
            for (a, m) in v.iter_mut().zip(self.planted_map.row(k)) {
                *a += dk * m;
            }
        }
        normalized(v)
    }

    fn noisy_audio(&self, scene: usize, rng: &mut DetRng) -> Vec<f64> {
        let mut v = self.planted_direction(&self.true_descriptor(scene).to_array());
        let scale = self.config.noise_sigma / (AUDIO_DIM as f64).sqrt();
        if scale > 0.0 {
            for a in &mut v {
                *a += scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        normalized(v)
    }

    /// Audio embeddings only; cheaper than [`World::scene`].
    pub fn scene_audio(&self, i: usize) -> SceneAudio {
        let mut rng = derived(self.config.seed, scene_tag(i, 2));
        let reference = self.noisy_audio(i, &mut rng);
        let compatible = self.noisy_audio(i, &mut rng);
        let n = self.len();
        let mut distractors = Matrix::zeros(self.distractor_pool, AUDIO_DIM);
        for j in 0..self.distractor_pool {
            let mut other = rng.random_range(0..n - 1);
            if other >= i {
                other += 1;
            }
            let v = self.noisy_audio(other, &mut rng);
            distractors.row_mut(j).copy_from_slice(&v);
        }
        SceneAudio {
            reference,
            compatible,
            distractors,
            slot_seed: rng.random(),
        }
    }

    /// Class layout: classes in a random order, each filling its patch count
    /// along a serpentine walk over the grid.
    fn layout(&self, i: usize, rng: &mut DetRng) -> Vec<usize> {
        let g = self.config.patch_grid;
        let order = permutation(CLASS_COUNT, rng);
        let mut sequence = Vec::with_capacity(g * g);
        for &c in &order {
            sequence.extend(std::iter::repeat_n(c, self.counts[i][c]));
        }
        let mut grid = vec![0; g * g];
        for (k, &c) in sequence.iter().enumerate() {
            let (r, col) = (k / g, k % g);
            let col = if r % 2 == 0 { col } else { g - 1 - col };
            grid[r * g + col] = c;
        }
        grid
    }

    pub fn scene(&self, i: usize) -> SynthScene {
        let cfg = &self.config;
        let mut rng = derived(cfg.seed, scene_tag(i, 1));
        let patch_classes = self.layout(i, &mut rng);

        let g = cfg.patch_grid;
        let px = cfg.image_size / g;
        let mut image = RgbImage::filled(cfg.image_size, cfg.image_size, [0, 0, 0]);
        for y in 0..cfg.image_size {
            for x in 0..cfg.image_size {
                let class = LandClass::ALL[patch_classes[(y / px) * g + x / px]];
                image.set_pixel(y, x, paint_pixel(class, y, x, &mut rng));
            }
        }

        let d = cfg.embed_dim;
        let scale = cfg.patch_noise / (d as f64).sqrt();
        let mut emb = Matrix::zeros(g * g, d);
        for (p, &c) in patch_classes.iter().enumerate() {
            let mean = self.class_means.row(c);
            for (e, m) in emb.row_mut(p).iter_mut().zip(mean) {
                *e = m + scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let patches = PatchGrid::new(g, g, emb).expect("grid shape is consistent");

        let true_descriptor = self.true_descriptor(i);
        let dominant = (0..CLASS_COUNT)
            .max_by(|&a, &b| self.counts[i][a].cmp(&self.counts[i][b]).then(b.cmp(&a)))
            .unwrap_or(0);
        let caption = format!(
            "an overhead view dominated by {}",
            LandClass::ALL[dominant].name().replace('_', "-")
        );

        SynthScene {
            scene_id: Self::scene_id(i),
            true_descriptor,
            patch_classes,
            image,
            patches,
            audio: self.scene_audio(i),
            caption,
        }
    }

    pub fn scenes(&self) -> Vec<SynthScene> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..self.len()).into_par_iter().map(|i| self.scene(i)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..self.len()).map(|i| self.scene(i)).collect()
        }
    }
}

pub fn generate_world(cfg: &SynthWorldConfig) -> Result<Vec<SynthScene>, SynthError> {
    Ok(World::new(cfg.clone())?.scenes())
}

/// Ground truth written next to a world's manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub scene_id: String,
    pub compatible_index: usize,
    pub true_descriptor: [f64; DESCRIPTOR_DIM],
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";
/// `n × 32` reference audio embeddings in manifest order.
pub const REFERENCE_AUDIO_FILE: &str = "reference_audio.npy";

#[derive(Debug, Clone, PartialEq)]
pub struct WorldFiles {
    pub manifest: PathBuf,
    pub truth: PathBuf,
    pub reference_audio: PathBuf,
    pub n_scenes: usize,
}

fn image_tensor(img: &RgbImage) -> Tensor {
    let data = img.data.iter().map(|&v| v as f32 / 255.0).collect();
    Tensor::new(vec![img.height, img.width, 3], data).expect("image shape")
}

fn patch_tensor(p: &PatchGrid) -> Tensor {
    Tensor::from_f64(vec![p.height, p.width, p.dim()], p.embeddings.as_slice()).expect("patch shape")
}

fn write_scene(dir: &Path, world: &World, i: usize) -> Result<(SceneManifest, TruthRow, Vec<f64>), SynthError> {
    let s = world.scene(i);
    let id = &s.scene_id;
    let image_rel = PathBuf::from("images").join(format!("{id}.npy"));
    let patch_rel = PathBuf::from("patches").join(format!("{id}.npy"));
    write_tensor(dir.join(&image_rel), &image_tensor(&s.image))?;
    write_tensor(dir.join(&patch_rel), &patch_tensor(&s.patches))?;

    let (cands, slot) = s.audio.candidates(world.config.candidate_count);
    let mut audio_paths = Vec::with_capacity(cands.rows());
    for (j, row) in cands.iter_rows().enumerate() {
        let rel = PathBuf::from("audio").join(format!("{id}_c{j}.npy"));
        write_tensor(dir.join(&rel), &Tensor::from_f64(vec![row.len()], row)?)?;
        audio_paths.push(rel);
    }
    let reference_rel = PathBuf::from("audio").join(format!("{id}_ref.npy"));
    write_tensor(
        dir.join(&reference_rel),
        &Tensor::from_f64(vec![AUDIO_DIM], &s.audio.reference)?,
    )?;

    let descriptor = s.true_descriptor.to_array();
    Ok((
        SceneManifest {
            scene_id: id.clone(),
            image_path: image_rel,
            patch_embedding_path: patch_rel,
            audio_embedding_paths: audio_paths,
            text_hypotheses: vec![s.caption],
            reference_audio_embedding_path: Some(reference_rel),
            geo_descriptor: Some(descriptor),
        },
        TruthRow {
            scene_id: id.clone(),
            compatible_index: slot,
            true_descriptor: descriptor,
        },
        s.audio.reference,
    ))
}

/// Writes every scene's tensors, the manifest, the ground truth and the
/// stacked reference audio under `dir`. Output is byte-identical for a fixed
/// config.
pub fn write_world(cfg: &SynthWorldConfig, dir: impl AsRef<Path>) -> Result<WorldFiles, SynthError> {
    let dir = dir.as_ref();
    let world = World::with_pool(cfg.clone(), cfg.candidate_count)?;
    for sub in ["images", "patches", "audio"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }

    #[cfg(feature = "parallel")]
    let rows: Vec<_> = {
        use rayon::prelude::*;
        (0..world.len())
            .into_par_iter()
            .map(|i| write_scene(dir, &world, i))
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..world.len())
        .map(|i| write_scene(dir, &world, i))
        .collect::<Result<_, _>>()?;

    let mut manifests = Vec::with_capacity(rows.len());
    let mut truth = Vec::with_capacity(rows.len());
    let mut reference = Vec::with_capacity(rows.len() * AUDIO_DIM);
    for (m, t, r) in rows {
        manifests.push(m);
        truth.push(t);
        reference.extend(r);
    }

    let files = WorldFiles {
        manifest: dir.join(MANIFEST_FILE),
        truth: dir.join(TRUTH_FILE),
        reference_audio: dir.join(REFERENCE_AUDIO_FILE),
        n_scenes: manifests.len(),
    };
    write_manifest(&files.manifest, &manifests)?;
    let mut text = serde_json::to_string_pretty(&truth).expect("truth serializes");
    text.push('\n');
    std::fs::write(&files.truth, text)?;
    write_tensor(
        &files.reference_audio,
        &Tensor::from_f64(vec![manifests.len(), AUDIO_DIM], &reference)?,
    )?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoattr::{cluster_descriptor, pseudo_label, LabelGrid};
    use crate::linalg::cosine;
    use crate::rng::seeded;

    fn small(n: usize, noise: f64) -> SynthWorldConfig {
        SynthWorldConfig {
            n_scenes: n,
            noise_sigma: noise,
            embed_dim: 16,
            ..SynthWorldConfig::default()
        }
    }

    #[test]
    fn empty_world() {
        let w = World::new(small(0, 0.05)).unwrap();
        assert!(w.is_empty());
        assert!(w.scenes().is_empty());
        let dir = tempfile::tempdir().unwrap();
        let files = write_world(&small(0, 0.05), dir.path()).unwrap();
        assert_eq!(files.n_scenes, 0);
        assert!(crate::tensor_io::load_manifest(&files.manifest).unwrap().is_empty());
    }

    #[test]
    fn planted_map_is_orthonormal() {
        let w = World::new(small(3, 0.05)).unwrap();
        let gram = w.planted_map.matmul(&w.planted_map.transpose());
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - e).abs() < 1e-12);
            }
        }
        for r in w.class_means.iter_rows() {
            assert!((norm(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_planted_map_rejected() {
        let mut rows = vec![vec![0.0; AUDIO_DIM]; DESCRIPTOR_DIM];
        for (k, r) in rows.iter_mut().enumerate() {
            r[k] = 1.0;
        }
        rows[4] = rows[3].iter().map(|v| 2.0 * v).collect();
        let cfg = SynthWorldConfig {
            planted_map: Some(rows),
            ..small(3, 0.0)
        };
        assert!(matches!(World::new(cfg), Err(SynthError::InvalidConfig(_))));
    }

    #[test]
    fn noiseless_compatible_matches_planted_direction() {
        let w = World::new(small(12, 0.0)).unwrap();
        for i in 0..12 {
            let s = w.scene(i);
            let dir = w.planted_direction(&s.true_descriptor.to_array());
            assert!((cosine(&s.audio.compatible, &dir).unwrap() - 1.0).abs() < 1e-12);
            assert!((cosine(&s.audio.reference, &dir).unwrap() - 1.0).abs() < 1e-12);
            let (only, slot) = s.audio.candidates(1);
            assert_eq!((only.rows(), slot), (1, 0));
        }
    }

    #[test]
    fn candidates_are_nested_with_one_compatible() {
        let w = World::new(small(20, 0.05)).unwrap();
        let a = w.scene_audio(7);
        let mut prev: Option<Matrix> = None;
        for n in 1..=MAX_SWEEP_CANDIDATES {
            let (c, slot) = a.candidates(n);
            assert_eq!(c.row(slot), a.compatible.as_slice());
            let matches = c.iter_rows().filter(|r| *r == a.compatible.as_slice()).count();
            assert_eq!(matches, 1);
            if let Some(p) = &prev {
                for r in p.iter_rows() {
                    assert!(c.iter_rows().any(|q| q == r));
                }
            }
            prev = Some(c);
        }
    }

    #[test]
    fn descriptor_matches_patch_counts() {
        let w = World::new(small(5, 0.05)).unwrap();
        for i in 0..5 {
            let s = w.scene(i);
            let d = s.true_descriptor.to_array();
            for c in 0..4 {
                let frac = s.patch_classes.iter().filter(|&&p| p == c).count() as f64 / 64.0;
                assert!((d[c] - frac).abs() < 1e-15);
            }
            assert!(d[4] >= 0.0 && d[4] <= 5f64.ln() + 1e-12);
        }
    }

    #[test]
    fn apportion_sums_to_total() {
        let mut rng = seeded(3);
        for _ in 0..200 {
            let raw: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
            let s: f64 = raw.iter().sum();
            let p = raw.map(|v| v / s);
            let c = apportion(&p, 64);
            assert_eq!(c.iter().sum::<usize>(), 64);
            for k in 0..5 {
                assert!((c[k] as f64 - p[k] * 64.0).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn painted_regions_get_their_pseudo_label() {
        let mut rng = seeded(1);
        for class in LandClass::ALL {
            let mut img = RgbImage::filled(16, 16, [0, 0, 0]);
            for y in 0..16 {
                for x in 0..16 {
                    img.set_pixel(y, x, paint_pixel(class, y, x, &mut rng));
                }
            }
            let labels = LabelGrid::new(16, 16, vec![0; 256]).unwrap();
            let d = cluster_descriptor(&img, &labels, 0, &[]).unwrap();
            assert_eq!(pseudo_label(&d).0, class, "{class:?}");
        }
    }

    #[test]
    fn written_world_is_deterministic_and_loadable() {
        let cfg = small(4, 0.05);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = write_world(&cfg, a.path()).unwrap();
        write_world(&cfg, b.path()).unwrap();
        for name in [MANIFEST_FILE, TRUTH_FILE, REFERENCE_AUDIO_FILE, "patches/scene_00002.npy", "audio/scene_00003_c5.npy"] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let scenes = crate::tensor_io::load_manifest(&fa.manifest).unwrap();
        assert_eq!(scenes.len(), 4);
        assert_eq!(scenes[1].audio_embedding_paths.len(), 6);
        let img = crate::geoattr::load_rgb_image(a.path().join(&scenes[0].image_path)).unwrap();
        assert_eq!(img, World::new(cfg).unwrap().scene(0).image);
    }
}
