//! Binary projection-model file.
//!
//! Layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! b"G2SPROJ\0" version
//! normalizer: len, mean[len], std[len]
//! pca:        D, k, mean[D], components[k·D], variance[k], rank_deficient (u32 0/1)
//! mlp:        layer_sizes_len, sizes[..], dropout, param_len, params[..]
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use super::mlp::Mlp;
use super::pca::PcaModel;
use super::train::Normalizer;
use super::{AlignError, ProjectionModel};
use crate::linalg::Matrix;

pub const MODEL_MAGIC: &[u8; 8] = b"G2SPROJ\0";
pub const MODEL_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| io::Error::other("length exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_f64s<W: Write>(w: &mut W, v: &[f64]) -> io::Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_model<W: Write>(w: &mut W, m: &ProjectionModel) -> io::Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;

    put_u32(w, m.normalizer.mean.len())?;
    put_f64s(w, &m.normalizer.mean)?;
    put_f64s(w, &m.normalizer.std)?;

    put_u32(w, m.pca.input_dim())?;
    put_u32(w, m.pca.dims())?;
    put_f64s(w, &m.pca.mean)?;
    put_f64s(w, m.pca.components.as_slice())?;
    put_f64s(w, &m.pca.explained_variance)?;
    put_u32(w, m.pca.rank_deficient as usize)?;

    put_u32(w, m.mlp.sizes.len())?;
    for &s in &m.mlp.sizes {
        put_u32(w, s)?;
    }
    put_f64s(w, &[m.mlp.dropout])?;
    put_u32(w, m.mlp.params.len())?;
    put_f64s(w, &m.mlp.params)
}

struct Cursor<'a, R> {
    r: &'a mut R,
}

impl<R: Read> Cursor<'_, R> {
    fn u32(&mut self) -> Result<usize, AlignError> {
        let mut b = [0u8; 4];
        self.r.read_exact(&mut b).map_err(truncated)?;
        Ok(u32::from_le_bytes(b) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, AlignError> {
        let mut buf = vec![0u8; n.checked_mul(8).ok_or_else(|| format_err("length overflow"))?];
        self.r.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn truncated(e: io::Error) -> AlignError {
    format_err(&format!("truncated model file: {e}"))
}

fn format_err(msg: &str) -> AlignError {
    AlignError::ModelFormat(msg.to_string())
}

/// Upper bound on any single array length, to reject garbage headers before
/// allocating.
const MAX_LEN: usize = 1 << 28;

pub fn read_model<R: Read>(r: &mut R) -> Result<ProjectionModel, AlignError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MODEL_MAGIC {
        return Err(format_err("not a projection model file"));
    }
    let mut c = Cursor { r };
    let version = c.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(format_err(&format!("unsupported model version {version}")));
    }
    let bounded = |n: usize| {
        if n > MAX_LEN {
            Err(format_err("implausible array length"))
        } else {
            Ok(n)
        }
    };

    let n = bounded(c.u32()?)?;
    let normalizer = Normalizer {
        mean: c.f64s(n)?,
        std: c.f64s(n)?,
    };

    let d = bounded(c.u32()?)?;
    let k = bounded(c.u32()?)?;
    let mean = c.f64s(d)?;
    let components = Matrix::from_vec(k, d, c.f64s(bounded(k * d)?)?);
    let explained_variance = c.f64s(k)?;
    let rank_deficient = c.u32()? != 0;
    let pca = PcaModel {
        mean,
        components,
        explained_variance,
        rank_deficient,
    };

    let layers = bounded(c.u32()?)?;
    if layers < 2 {
        return Err(format_err("network needs at least two layer sizes"));
    }
    let sizes = (0..layers).map(|_| c.u32()).collect::<Result<Vec<_>, _>>()?;
    let dropout = c.f64s(1)?[0];
    let p = bounded(c.u32()?)?;
    if p != Mlp::param_count(&sizes) {
        return Err(format_err("parameter count does not match layer sizes"));
    }
    let mlp = Mlp {
        sizes,
        params: c.f64s(p)?,
        dropout,
    };
    let mut rest = [0u8; 1];
    if c.r.read(&mut rest).map_err(truncated)? != 0 {
        return Err(format_err("trailing bytes after model"));
    }
    let model = ProjectionModel {
        normalizer,
        mlp,
        pca,
    };
    model.check()?;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, m: &ProjectionModel) -> Result<(), AlignError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(&mut buf, m).map_err(|e| AlignError::Io(format!("{}: {e}", path.display())))?;
    std::fs::write(path, buf).map_err(|e| AlignError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ProjectionModel, AlignError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| AlignError::Io(format!("{}: {e}", path.display())))?;
    read_model(&mut bytes.as_slice())
}
