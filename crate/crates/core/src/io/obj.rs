//! Minimal OBJ support: vertex positions only.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::real::{real, Real};

/// Read `v x y z` lines from an OBJ file; everything else is ignored.
pub fn read_obj_vertices<T: Real>(path: impl AsRef<Path>) -> Result<PointCloud<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|_| Error::MissingAsset(path.to_path_buf()))?;
    let mut points = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let mut coord = [0.0f64; 3];
        for c in coord.iter_mut() {
            let tok = it.next().ok_or_else(|| {
                Error::Format(format!("{}:{}: short vertex line", path.display(), lineno + 1))
            })?;
            *c = tok.parse().map_err(|_| {
                Error::Format(format!(
                    "{}:{}: bad coordinate '{tok}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
        }
        points.push([real::<T>(coord[0]), real(coord[1]), real(coord[2])]);
    }
    if points.is_empty() {
        return Err(Error::Format(format!(
            "{}: no vertices found",
            path.display()
        )));
    }
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "obj".to_string());
    Ok(PointCloud::new(points, source_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn reads_vertices_and_skips_other_records() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.obj");
        std::fs::write(
            &path,
            "# comment\nv 1 2 3\nvn 0 0 1\nv -0.5 0.25 0\nf 1 2 1\n",
        )
        .unwrap();
        let cloud: PointCloud<f64> = read_obj_vertices(&path).unwrap();
        assert_eq!(cloud.points, vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 0.0]]);
    }

    #[test]
    fn bad_vertex_line_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.obj");
        std::fs::write(&path, "v 1 2\n").unwrap();
        assert!(matches!(
            read_obj_vertices::<f64>(&path),
            Err(Error::Format(_))
        ));
    }
}
