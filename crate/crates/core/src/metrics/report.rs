//! Whole-run evaluation from directories of feature files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    clap_similarity, clap_similarity_batch, frechet_distance, inception_score, kl_divergence,
    kl_row, overlap, validate_probs, GaussianStats, MetricError,
};
use crate::linalg::Matrix;
use crate::tensor_io::read_tensor;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const FAD_FEATURES: &str = "fad_features.npy";
pub const FD_FEATURES: &str = "fd_features.npy";
pub const CLASS_PROBS: &str = "class_probs.npy";
pub const CLAP_TEXT: &str = "clap_text.npy";
pub const CLAP_AUDIO: &str = "clap_audio.npy";
pub const SELECTIONS: &str = "selections.csv";

/// One line of a selections file.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub scene_id: String,
    pub selected_index: usize,
    pub geoalign: f64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub scene_id: String,
    pub selected_index: Option<usize>,
    pub geoalign: Option<f64>,
    pub kl: Option<f64>,
    pub clap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub fad: f64,
    pub fd: f64,
    /// Absent when no paired text/audio embeddings were supplied.
    pub clap: Option<f64>,
    pub kl: f64,
    pub ovl: f64,
    pub is_score: f64,
    /// Absent when no selections file was supplied.
    pub geoalign_mean: Option<f64>,
    pub n_generated: usize,
    pub n_reference: usize,
    pub per_scene: Vec<SceneRow>,
}

#[derive(Debug, Clone)]
pub struct RunInputs {
    pub gen_dir: PathBuf,
    pub ref_dir: PathBuf,
}

/// Layout:
///
/// * both directories: `fad_features.npy` and `fd_features.npy` (`n × D`),
///   `class_probs.npy` (`n × C`, rows paired across directories);
/// * generated directory, optional: `clap_text.npy` and `clap_audio.npy`
///   (paired `n × D`), `selections.csv`.
///
/// Every missing or unreadable required file is reported in one error.
pub fn evaluate_run(inputs: &RunInputs) -> Result<MetricReport, MetricError> {
    let mut missing = Vec::new();
    let mut load = |dir: &Path, name: &str| -> Option<Matrix> {
        let p = dir.join(name);
        match read_tensor(&p).and_then(|t| t.to_matrix()) {
            Ok(m) => Some(m),
            Err(e) => {
                missing.push(format!("{}: {e}", p.display()));
                None
            }
        }
    };
    let gen_fad = load(&inputs.gen_dir, FAD_FEATURES);
    let ref_fad = load(&inputs.ref_dir, FAD_FEATURES);
    let gen_fd = load(&inputs.gen_dir, FD_FEATURES);
    let ref_fd = load(&inputs.ref_dir, FD_FEATURES);
    let gen_probs = load(&inputs.gen_dir, CLASS_PROBS);
    let ref_probs = load(&inputs.ref_dir, CLASS_PROBS);
    let optional = |name: &str| inputs.gen_dir.join(name).is_file();
    let clap_pair = if optional(CLAP_TEXT) || optional(CLAP_AUDIO) {
        Some((load(&inputs.gen_dir, CLAP_TEXT), load(&inputs.gen_dir, CLAP_AUDIO)))
    } else {
        None
    };
    let selections = if optional(SELECTIONS) {
        match read_selections(inputs.gen_dir.join(SELECTIONS)) {
            Ok(s) => Some(s),
            Err(e) => {
                missing.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    if !missing.is_empty() {
        return Err(MetricError::MissingInput(missing));
    }
    let (gen_fad, ref_fad) = (gen_fad.unwrap(), ref_fad.unwrap());
    let (gen_fd, ref_fd) = (gen_fd.unwrap(), ref_fd.unwrap());
    let (gen_probs, ref_probs) = (gen_probs.unwrap(), ref_probs.unwrap());

    let fad = frechet_distance(
        &GaussianStats::from_samples(&gen_fad)?,
        &GaussianStats::from_samples(&ref_fad)?,
    )?;
    let fd = frechet_distance(
        &GaussianStats::from_samples(&gen_fd)?,
        &GaussianStats::from_samples(&ref_fd)?,
    )?;
    let kl = kl_divergence(&gen_probs, &ref_probs)?;
    let ovl = overlap(&gen_probs, &ref_probs)?;
    let is_score = inception_score(&gen_probs)?;
    validate_probs(&ref_probs)?;

    let clap_mats = clap_pair.map(|(t, a)| (t.unwrap(), a.unwrap()));
    let clap = match &clap_mats {
        Some((t, a)) => Some(clap_similarity_batch(t, a)?),
        None => None,
    };

    let n = gen_probs.rows();
    let mut per_scene: Vec<SceneRow> = (0..n)
        .map(|i| SceneRow {
            scene_id: format!("scene_{i}"),
            selected_index: None,
            geoalign: None,
            kl: Some(kl_row(ref_probs.row(i), gen_probs.row(i))),
            clap: None,
        })
        .collect();
    if let Some((t, a)) = &clap_mats {
        if t.rows() == n {
            for (i, row) in per_scene.iter_mut().enumerate() {
                row.clap = Some(clap_similarity(t.row(i), a.row(i))?);
            }
        }
    }
    let geoalign_mean = match &selections {
        Some(sel) if !sel.is_empty() => {
            if sel.len() == n {
                for (row, s) in per_scene.iter_mut().zip(sel) {
                    row.scene_id = s.scene_id.clone();
                    row.selected_index = Some(s.selected_index);
                    row.geoalign = Some(s.geoalign);
                }
            } else {
                log::warn!(
                    "selections has {} rows but class_probs has {n}; per-scene rows keep positional ids",
                    sel.len()
                );
            }
            Some(sel.iter().map(|s| s.geoalign).sum::<f64>() / sel.len() as f64)
        }
        _ => None,
    };

    Ok(MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        fad,
        fd,
        clap,
        kl,
        ovl,
        is_score,
        geoalign_mean,
        n_generated: gen_fad.rows(),
        n_reference: ref_fad.rows(),
        per_scene,
    })
}

/// Columns: `scene_id,selected_index,geoalign,scores` with scores joined by `;`.
pub fn write_selections(path: impl AsRef<Path>, rows: &[SelectionRow]) -> Result<(), MetricError> {
    let path = path.as_ref();
    let io = |e: csv::Error| MetricError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["scene_id", "selected_index", "geoalign", "scores"])
        .map_err(io)?;
    for r in rows {
        let scores: Vec<String> = r.scores.iter().map(|s| s.to_string()).collect();
        w.write_record([
            r.scene_id.clone(),
            r.selected_index.to_string(),
            r.geoalign.to_string(),
            scores.join(";"),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| MetricError::Io(format!("{}: {e}", path.display())))
}

pub fn read_selections(path: impl AsRef<Path>) -> Result<Vec<SelectionRow>, MetricError> {
    let path = path.as_ref();
    let bad = |msg: String| MetricError::Io(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad(format!("row {} has {} fields, expected 4", line + 1, rec.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("row {}: {e}", line + 1)));
        let scores = if rec[3].trim().is_empty() {
            Vec::new()
        } else {
            rec[3].split(';').map(num).collect::<Result<_, _>>()?
        };
        out.push(SelectionRow {
            scene_id: rec[0].to_string(),
            selected_index: rec[1]
                .trim()
                .parse()
                .map_err(|e| bad(format!("row {}: {e}", line + 1)))?,
            geoalign: num(&rec[2])?,
            scores,
        });
    }
    Ok(out)
}

/// Per-scene table next to the JSON report. Empty cells mean "not available".
pub fn write_per_scene_csv(path: impl AsRef<Path>, rows: &[SceneRow]) -> Result<(), MetricError> {
    let path = path.as_ref();
    let io = |e: csv::Error| MetricError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["scene_id", "selected_index", "geoalign", "kl", "clap"])
        .map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scene_id.clone(),
            r.selected_index.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.geoalign),
            opt(r.kl),
            opt(r.clap),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| MetricError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::{write_tensor, Tensor};

    fn write(dir: &Path, name: &str, rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) {
        let data: Vec<f64> = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        write_tensor(dir.join(name), &Tensor::from_f64(vec![rows, cols], &data).unwrap()).unwrap();
    }

    fn populate(dir: &Path, shift: f64) {
        write(dir, FAD_FEATURES, 20, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 + shift);
        write(dir, FD_FEATURES, 20, 4, |i, j| ((i * 5 + j) % 13) as f64 * 0.5);
        write(dir, CLASS_PROBS, 20, 4, |i, j| if j == i % 4 { 0.7 } else { 0.1 });
    }

    #[test]
    fn self_comparison() {
        let dir = tempfile::tempdir().unwrap();
        populate(dir.path(), 0.0);
        let rep = evaluate_run(&RunInputs {
            gen_dir: dir.path().into(),
            ref_dir: dir.path().into(),
        })
        .unwrap();
        assert!(rep.fad.abs() < 1e-8);
        assert!(rep.fd.abs() < 1e-8);
        assert!(rep.kl.abs() < 1e-12);
        assert!((rep.ovl - 1.0).abs() < 1e-6);
        assert!(rep.is_score >= 1.0);
        assert_eq!(rep.clap, None);
        assert_eq!(rep.geoalign_mean, None);
        assert_eq!(rep.per_scene.len(), 20);
    }

    #[test]
    fn shifted_features_and_selections() {
        let gen = tempfile::tempdir().unwrap();
        let reference = tempfile::tempdir().unwrap();
        populate(gen.path(), 2.0);
        populate(reference.path(), 0.0);
        write(gen.path(), CLAP_TEXT, 20, 3, |i, j| (i + j + 1) as f64);
        write(gen.path(), CLAP_AUDIO, 20, 3, |i, j| (i + j + 1) as f64);
        let sel: Vec<SelectionRow> = (0..20)
            .map(|i| SelectionRow {
                scene_id: format!("s{i}"),
                selected_index: i % 6,
                geoalign: 0.5,
                scores: vec![0.5, 0.25],
            })
            .collect();
        write_selections(gen.path().join(SELECTIONS), &sel).unwrap();
        assert_eq!(read_selections(gen.path().join(SELECTIONS)).unwrap(), sel);

        let rep = evaluate_run(&RunInputs {
            gen_dir: gen.path().into(),
            ref_dir: reference.path().into(),
        })
        .unwrap();
        // a pure mean shift of 2 in 3 dims
        assert!((rep.fad - 12.0).abs() < 1e-8);
        assert!((rep.clap.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rep.geoalign_mean, Some(0.5));
        assert_eq!(rep.per_scene[3].scene_id, "s3");

        let json = serde_json::to_string(&rep).unwrap();
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        write_per_scene_csv(gen.path().join("scenes.csv"), &rep.per_scene).unwrap();
    }

    #[test]
    fn missing_inputs_are_aggregated() {
        let gen = tempfile::tempdir().unwrap();
        let reference = tempfile::tempdir().unwrap();
        populate(reference.path(), 0.0);
        match evaluate_run(&RunInputs {
            gen_dir: gen.path().into(),
            ref_dir: reference.path().into(),
        }) {
            Err(MetricError::MissingInput(list)) => assert_eq!(list.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
