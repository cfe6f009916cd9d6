//! Dense `f32` tensors in the `.npy` v1.0 layout and JSON scene manifests.
//!
//! Only little-endian `f32` (`'<f4'`) in C order is accepted. A file is the
//! six magic bytes `\x93NUMPY`, the version `1.0`, a little-endian `u16`
//! header length, an ASCII dict padded with spaces and a final `\n` so that
//! the payload starts on a 64-byte boundary, then the raw row-major data.

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
const PREAMBLE_LEN: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a tensor file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {0}.{1}")]
    UnsupportedVersion(u8, u8),
    #[error("unsupported dtype {0:?}, only '<f4' is accepted")]
    UnsupportedDtype(String),
    #[error("fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated file: header promises {expected} data bytes, found {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("{0} unexpected bytes after the data block")]
    TrailingBytes(usize),
    #[error("shape {shape:?} holds {expected} elements but {actual} were given")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat index {0}")]
    NonFiniteData(usize),
}

impl TensorError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::ShapeMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Narrows `f64` values to `f32`.
    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self, TensorError> {
        Self::new(shape, data.iter().map(|&v| v as f32).collect())
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Views a rank-2 tensor (or a rank-1 tensor as a single row) as a matrix.
    pub fn to_matrix(&self) -> Result<Matrix, TensorError> {
        match self.shape.as_slice() {
            [n] => Ok(Matrix::from_vec(1, *n, self.to_f64())),
            [r, c] => Ok(Matrix::from_vec(*r, *c, self.to_f64())),
            _ => Err(TensorError::ShapeMismatch {
                shape: self.shape.clone(),
                expected: 2,
                actual: self.shape.len(),
            }),
        }
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WriteMode {
    /// Reject NaN and infinities.
    #[default]
    Strict,
    Lenient,
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| TensorError::io(path, e))?;
    let mut reader = BufReader::new(file);
    read_tensor_from(&mut reader).map_err(|e| match e {
        TensorError::Io { source, .. } => TensorError::io(path, source),
        other => other,
    })
}

pub fn read_tensor_from<R: Read>(reader: &mut R) -> Result<Tensor, TensorError> {
    let io_err = |e| TensorError::io(Path::new("<reader>"), e);
    let mut preamble = [0u8; PREAMBLE_LEN];
    let got = read_up_to(reader, &mut preamble).map_err(io_err)?;
    if got < MAGIC.len() || &preamble[..6] != MAGIC {
        return Err(TensorError::BadMagic);
    }
    if got < PREAMBLE_LEN {
        return Err(TensorError::MalformedHeader("preamble cut short".into()));
    }
    if (preamble[6], preamble[7]) != (1, 0) {
        return Err(TensorError::UnsupportedVersion(preamble[6], preamble[7]));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut header = vec![0u8; header_len];
    let got = read_up_to(reader, &mut header).map_err(io_err)?;
    if got < header_len {
        return Err(TensorError::MalformedHeader("header cut short".into()));
    }
    let header = std::str::from_utf8(&header)
        .map_err(|_| TensorError::MalformedHeader("header is not ASCII".into()))?;
    let shape = parse_header(header)?;

    let count: usize = shape.iter().product();
    let expected = count * 4;
    let mut raw = Vec::with_capacity(expected);
    reader.read_to_end(&mut raw).map_err(io_err)?;
    if raw.len() < expected {
        return Err(TensorError::TruncatedFile {
            expected,
            actual: raw.len(),
        });
    }
    if raw.len() > expected {
        return Err(TensorError::TrailingBytes(raw.len() - expected));
    }
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(Tensor { shape, data })
}

fn read_up_to<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Parses `{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }` with
/// keys in any order.
fn parse_header(header: &str) -> Result<Vec<usize>, TensorError> {
    let malformed = |m: &str| TensorError::MalformedHeader(m.to_string());
    let body = header.trim_end_matches(['\n', ' ', '\0']).trim();
    let body = body
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| malformed("header is not a dict"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest).ok_or_else(|| malformed("expected a quoted key"))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| malformed("expected ':' after key"))?
            .trim_start();
        let after = match key {
            "descr" => {
                let (v, a) = take_quoted(after).ok_or_else(|| malformed("descr must be a string"))?;
                descr = Some(v.to_string());
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(malformed("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| malformed("shape must be a tuple"))?;
                let close = inner.find(')').ok_or_else(|| malformed("unterminated shape"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim_end_matches('L')
                            .parse::<usize>()
                            .map_err(|_| malformed("shape entries must be integers"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(malformed(&format!("unknown key {other:?}"))),
        };
        let after = after.trim_start();
        rest = after.strip_prefix(',').unwrap_or(after).trim_start();
    }

    let descr = descr.ok_or_else(|| malformed("missing descr"))?;
    if descr != "<f4" {
        return Err(TensorError::UnsupportedDtype(descr));
    }
    match fortran {
        Some(false) => {}
        Some(true) => return Err(TensorError::FortranOrder),
        None => return Err(malformed("missing fortran_order")),
    }
    shape.ok_or_else(|| malformed("missing shape"))
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next()?;
    if q != '\'' && q != '"' {
        return None;
    }
    let end = s[1..].find(q)? + 1;
    Some((&s[1..end], &s[end + 1..]))
}

fn header_bytes(shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');
    dict.into_bytes()
}

/// Writes with [`WriteMode::Strict`].
pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<(), TensorError> {
    write_tensor_with(path, t, WriteMode::Strict)
}

pub fn write_tensor_with(
    path: impl AsRef<Path>,
    t: &Tensor,
    mode: WriteMode,
) -> Result<(), TensorError> {
    let path = path.as_ref();
    if mode == WriteMode::Strict {
        if let Some(i) = t.first_non_finite() {
            return Err(TensorError::NonFiniteData(i));
        }
    }
    let file = fs::File::create(path).map_err(|e| TensorError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tensor_to(&mut w, t)
        .and_then(|_| w.flush())
        .map_err(|e| TensorError::io(path, e))
}

/// Serializes without any finiteness check.
pub fn write_tensor_to<W: Write>(w: &mut W, t: &Tensor) -> io::Result<()> {
    let header = header_bytes(&t.shape);
    w.write_all(MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&(header.len() as u16).to_le_bytes())?;
    w.write_all(&header)?;
    for v in &t.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

/// One scene's inputs. Paths are stored verbatim; relative paths resolve
/// against the manifest's directory (see [`SceneManifest::resolve`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scene_id: String,
    pub image_path: PathBuf,
    pub patch_embedding_path: PathBuf,
    /// Candidate order defines the candidate index.
    pub audio_embedding_paths: Vec<PathBuf>,
    pub text_hypotheses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_audio_embedding_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo_descriptor: Option<[f64; 5]>,
}

impl SceneManifest {
    pub fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

pub fn parse_manifest(json: &str) -> Result<Vec<SceneManifest>, ManifestError> {
    let scenes: Vec<SceneManifest> =
        serde_json::from_str(json).map_err(|e| ManifestError::SchemaViolation(e.to_string()))?;
    let mut seen = HashSet::new();
    for s in &scenes {
        if !seen.insert(s.scene_id.as_str()) {
            return Err(ManifestError::SchemaViolation(format!(
                "duplicate scene_id {:?}",
                s.scene_id
            )));
        }
        if let Some(g) = &s.geo_descriptor {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(ManifestError::SchemaViolation(format!(
                    "scene {:?}: non-finite geo_descriptor",
                    s.scene_id
                )));
            }
        }
    }
    Ok(scenes)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<SceneManifest>, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text)
}

pub fn write_manifest(
    path: impl AsRef<Path>,
    scenes: &[SceneManifest],
) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(scenes)
        .map_err(|e| ManifestError::SchemaViolation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
