//! `geo.csv`: one descriptor per scene.

use std::path::Path;

use super::{GeoAttrError, GeoDescriptor};

#[derive(Debug, Clone, PartialEq)]
pub struct GeoRow {
    pub scene_id: String,
    pub descriptor: GeoDescriptor,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> GeoAttrError {
    GeoAttrError::InvalidInput(format!("{}: {e}", path.display()))
}

/// Header `scene_id,vegetation,water,built_up,road,land_use_mix`.
pub fn write_geo_csv(path: impl AsRef<Path>, rows: &[GeoRow]) -> Result<(), GeoAttrError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["scene_id"];
    header.extend(GeoDescriptor::FIELDS);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.scene_id.clone()];
        rec.extend(r.descriptor.to_array().iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

pub fn read_geo_csv(path: impl AsRef<Path>) -> Result<Vec<GeoRow>, GeoAttrError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let expected: Vec<&str> = std::iter::once("scene_id").chain(GeoDescriptor::FIELDS).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(csv_err(path, format!("expected header {}", expected.join(","))));
    }
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let mut a = [0.0; 5];
            for (k, v) in a.iter_mut().enumerate() {
                *v = rec[k + 1]
                    .trim()
                    .parse()
                    .map_err(|e| csv_err(path, format!("row {}: {e}", line + 1)))?;
            }
            Ok(GeoRow {
                scene_id: rec[0].to_string(),
                descriptor: GeoDescriptor::from_array(a),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let rows: Vec<GeoRow> = (0..5)
            .map(|i| GeoRow {
                scene_id: format!("s,{i}"),
                descriptor: GeoDescriptor::from_array([0.1 * i as f64, 1.0 / 3.0, 0.0, 2e-17, 1.2345678901234567]),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("geo.csv");
        write_geo_csv(&p, &rows).unwrap();
        assert_eq!(read_geo_csv(&p).unwrap(), rows);
    }

    #[test]
    fn rejects_bad_header_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("geo.csv");
        std::fs::write(&p, "id,a,b,c,d,e\nx,1,2,3,4,5\n").unwrap();
        assert!(read_geo_csv(&p).is_err());
        std::fs::write(&p, "scene_id,vegetation,water,built_up,road,land_use_mix\nx,1,2,oops,4,5\n").unwrap();
        assert!(read_geo_csv(&p).is_err());
    }
}
