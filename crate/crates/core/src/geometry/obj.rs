//! Wavefront OBJ loader with a single diffuse texture.
//!
//! Vertices referenced with different texture coordinates are split so that
//! every output vertex has exactly one uv. Polygons are fan-triangulated.
//! Texture coordinates follow the OBJ convention (v = 0 at the image bottom).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::io;
use crate::scene::{Rgb, RgbImage};

/// Resolves a 1-based (or negative, relative) OBJ index against `len`.
fn resolve(idx: &str, len: usize, path: &Path, what: &str) -> Result<usize> {
    let i: i64 = idx
        .parse()
        .map_err(|_| Error::parse(path, format!("bad {what} index {idx:?}")))?;
    let r = if i > 0 { i - 1 } else { len as i64 + i };
    if i == 0 || r < 0 || r as usize >= len {
        return Err(Error::parse(
            path,
            format!("{what} index {i} out of range (have {len})"),
        ));
    }
    Ok(r as usize)
}

fn floats<const N: usize>(tok: &[&str], path: &Path, line: usize) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    if tok.len() < N {
        return Err(Error::parse(path, format!("line {line}: expected {N} numbers")));
    }
    for (o, t) in out.iter_mut().zip(tok) {
        *o = t
            .parse()
            .map_err(|_| Error::parse(path, format!("line {line}: bad number {t:?}")))?;
    }
    Ok(out)
}

/// Finds the first `map_Kd` in an MTL file.
fn texture_from_mtl(mtl: &Path) -> Result<Option<PathBuf>> {
    let text = io::read_to_string(mtl)?;
    let base = mtl.parent().unwrap_or(Path::new(""));
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("map_Kd") {
            // Options such as `-s 1 1 1` may precede the file name; the
            // file name is the last token.
            if let Some(name) = rest.split_whitespace().last() {
                return Ok(Some(base.join(name)));
            }
        }
    }
    Ok(None)
}

pub fn load_obj(path: &Path) -> Result<TriMesh> {
    let text = io::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));

    let mut positions: Vec<Vector3<f64>> = Vec::new();
    let mut vcolors: Vec<Option<Rgb>> = Vec::new();
    let mut texcoords: Vec<Vector2<f64>> = Vec::new();
    let mut mtllib: Option<PathBuf> = None;

    // Output vertex per distinct (position, texcoord) pair.
    let mut corner_map: HashMap<(usize, Option<usize>), u32> = HashMap::new();
    let mut corners: Vec<(usize, Option<usize>)> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let tok: Vec<&str> = line.split_whitespace().collect();
        let Some((&kind, args)) = tok.split_first() else {
            continue;
        };
        match kind {
            "v" => {
                let [x, y, z] = floats::<3>(args, path, lineno + 1)?;
                positions.push(Vector3::new(x, y, z));
                // Common extension: `v x y z r g b`.
                vcolors.push(if args.len() >= 6 {
                    let [_, _, _, r, g, b] = floats::<6>(args, path, lineno + 1)?;
                    Some([r, g, b].map(|c| c.clamp(0.0, 1.0)))
                } else {
                    None
                });
            }
            "vt" => {
                let [u, v] = floats::<2>(args, path, lineno + 1)?;
                texcoords.push(Vector2::new(u, v));
            }
            "mtllib" => {
                if let Some(name) = args.first() {
                    mtllib.get_or_insert_with(|| base.join(name));
                }
            }
            "f" => {
                if args.len() < 3 {
                    return Err(Error::parse(path, format!("line {}: face with < 3 vertices", lineno + 1)));
                }
                let mut poly = Vec::with_capacity(args.len());
                for corner in args {
                    let mut parts = corner.split('/');
                    let v = resolve(parts.next().unwrap_or(""), positions.len(), path, "vertex")?;
                    let vt = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve(s, texcoords.len(), path, "texcoord")?),
                        _ => None,
                    };
                    let key = (v, vt);
                    let id = *corner_map.entry(key).or_insert_with(|| {
                        corners.push(key);
                        (corners.len() - 1) as u32
                    });
                    poly.push(id);
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }

    // Vertices never referenced by a face are kept so indices in the file
    // stay meaningful for point-like content.
    let mut referenced = vec![false; positions.len()];
    for &(v, _) in &corners {
        referenced[v] = true;
    }
    for (v, r) in referenced.iter().enumerate() {
        if !r {
            corners.push((v, None));
        }
    }

    let vertices = corners.iter().map(|&(v, _)| positions[v]).collect();
    let colors = if !vcolors.is_empty() && vcolors.iter().all(Option::is_some) {
        Some(corners.iter().map(|&(v, _)| vcolors[v].unwrap()).collect())
    } else {
        None
    };

    let texture_path = match &mtllib {
        Some(mtl) => texture_from_mtl(mtl)?,
        None => None,
    };
    let mut mesh = TriMesh {
        vertices,
        faces,
        colors,
        normals: None,
        uvs: None,
        texture: None,
    };
    if let Some(tex) = texture_path {
        if !tex.exists() {
            return Err(Error::validation(format!(
                "texture {} referenced by {} does not exist",
                tex.display(),
                path.display()
            )));
        }
        let texture = RgbImage::load(&tex)?;
        let uvs = corners
            .iter()
            .map(|&(_, vt)| vt.map(|i| texcoords[i]).unwrap_or_else(Vector2::zeros))
            .collect();
        mesh.uvs = Some(uvs);
        mesh.texture = Some(texture);
    }
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_becomes_two_triangles() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.obj");
        std::fs::write(
            &p,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1 2/2 3/3 4/4\n",
        )
        .unwrap();
        let m = load_obj(&p).unwrap();
        assert_eq!(m.faces.len(), 2);
        assert_eq!(m.vertices.len(), 4);
        assert!(m.texture.is_none() && m.uvs.is_none());
    }

    fn cube_obj() -> String {
        // 8 positions, 14 texcoords in a cross layout, 6 quads with per-face
        // texcoords: 24 distinct (v, vt) pairs.
        let mut s = String::from("mtllib cube.mtl\n");
        for i in 0..8 {
            s += &format!("v {} {} {}\n", i & 1, (i >> 1) & 1, (i >> 2) & 1);
        }
        for i in 0..24 {
            s += &format!("vt {} {}\n", (i % 6) as f64 / 6.0, (i / 6) as f64 / 4.0);
        }
        let quads = [[1, 3, 4, 2], [5, 6, 8, 7], [1, 2, 6, 5], [3, 7, 8, 4], [1, 5, 7, 3], [2, 4, 8, 6]];
        for (f, q) in quads.iter().enumerate() {
            s += "f";
            for (k, v) in q.iter().enumerate() {
                s += &format!(" {}/{}", v, f * 4 + k + 1);
            }
            s += "\n";
        }
        s
    }

    #[test]
    fn cube_with_uv_islands_splits_to_24_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let obj = cube_obj();
        // Oracle: count distinct index pairs straight from the text.
        let distinct: std::collections::HashSet<&str> = obj
            .lines()
            .filter(|l| l.starts_with("f "))
            .flat_map(|l| l.split_whitespace().skip(1))
            .collect();
        assert_eq!(distinct.len(), 24);

        std::fs::write(dir.path().join("cube.obj"), &obj).unwrap();
        std::fs::write(dir.path().join("cube.mtl"), "newmtl m\nmap_Kd tex.png\n").unwrap();
        RgbImage::new(4, 4, [0.5, 0.5, 0.5]).save(&dir.path().join("tex.png")).unwrap();
        let m = load_obj(&dir.path().join("cube.obj")).unwrap();
        assert_eq!(m.vertices.len(), distinct.len());
        assert_eq!(m.faces.len(), 12);
        assert_eq!(m.uvs.as_ref().unwrap().len(), 24);
        assert!(m.texture.is_some());
    }

    #[test]
    fn missing_texture_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cube.obj"), cube_obj()).unwrap();
        std::fs::write(dir.path().join("cube.mtl"), "map_Kd nope.png\n").unwrap();
        assert!(load_obj(&dir.path().join("cube.obj")).is_err());
    }

    #[test]
    fn undefined_index_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(load_obj(&p), Err(Error::Parse { .. })));
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(load_obj(&p).unwrap().faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn vertex_colors_extension() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.obj");
        std::fs::write(&p, "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n").unwrap();
        let m = load_obj(&p).unwrap();
        assert_eq!(m.colors.unwrap()[2], [0.0, 0.0, 1.0]);
    }
}
