//! PLY reader and writer (ascii and binary little-endian).
//!
//! Vertices carry `x y z`, optionally `nx ny nz`, `red green blue` and
//! `radius`. A `face` element with a `vertex_indices` (or `vertex_index`)
//! list turns the file into a mesh; without faces it is a point cloud.

use std::path::Path;

use nalgebra::Vector3;

use super::mesh::{Model, PointCloud, TriMesh};
use crate::error::{Error, Result};
use crate::io;
use crate::scene::Rgb;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    /// Divisor that maps the type's range onto `[0, 1]` for color channels.
    fn color_scale(self) -> f64 {
        match self {
            Scalar::U8 => 255.0,
            Scalar::U16 => 65535.0,
            _ => 1.0,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let err = |msg: &str| Error::parse(path, msg.to_string());
    let mut pos = 0;
    let mut next_line = || -> Option<String> {
        if pos >= bytes.len() {
            return None;
        }
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[pos..end]).trim().to_string();
        pos = end + 1;
        Some(line)
    };
    if next_line().as_deref() != Some("ply") {
        return Err(err("missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line().ok_or_else(|| err("header ended without end_header"))?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(Error::UnsupportedFormat(format!(
                            "{}: PLY format {other}",
                            path.display()
                        )))
                    }
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| err("property before element"))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count).ok_or_else(|| err("bad list count type"))?,
                    item: Scalar::parse(item).ok_or_else(|| err("bad list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| err("property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| err("bad property type"))?,
                });
            }
            _ => return Err(err(&format!("unrecognized header line {line:?}"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| err("missing format line"))?,
        elements,
        body_offset: pos,
    })
}

/// Sequential value source over either body encoding.
enum Body<'a> {
    Ascii(std::str::SplitAsciiWhitespace<'a>),
    Binary { bytes: &'a [u8], pos: usize },
}

impl Body<'_> {
    fn read(&mut self, ty: Scalar, path: &Path) -> Result<f64> {
        match self {
            Body::Ascii(tokens) => {
                let tok = tokens
                    .next()
                    .ok_or_else(|| Error::parse(path, "unexpected end of ascii body"))?;
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, format!("bad number {tok:?}")))
            }
            Body::Binary { bytes, pos } => {
                let n = ty.size();
                if *pos + n > bytes.len() {
                    return Err(Error::parse(path, "unexpected end of binary body"));
                }
                let v = ty.read_le(&bytes[*pos..*pos + n]);
                *pos += n;
                Ok(v)
            }
        }
    }
}

/// Loads a PLY file: a mesh if it has faces, otherwise a point cloud.
pub fn load_ply(path: &Path) -> Result<Model> {
    let bytes = io::read_bytes(path)?;
    let header = parse_header(path, &bytes)?;
    let body_bytes = &bytes[header.body_offset.min(bytes.len())..];
    let ascii_text;
    let mut body = match header.format {
        PlyFormat::Ascii => {
            ascii_text = std::str::from_utf8(body_bytes)
                .map_err(|_| Error::parse(path, "ascii body is not valid UTF-8"))?;
            Body::Ascii(ascii_text.split_ascii_whitespace())
        }
        PlyFormat::BinaryLittleEndian => Body::Binary {
            bytes: body_bytes,
            pos: 0,
        },
    };

    let mut positions = Vec::new();
    let mut normals: Option<Vec<Vector3<f64>>> = None;
    let mut colors: Option<Vec<Rgb>> = None;
    let mut radii: Option<Vec<f64>> = None;
    let mut faces: Option<Vec<[u32; 3]>> = None;

    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => {
                let find = |n: &str| el.props.iter().position(|p| p.name() == n);
                let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
                    return Err(Error::UnsupportedFormat(format!(
                        "{}: vertex element lacks x/y/z",
                        path.display()
                    )));
                };
                let normal_idx = match (find("nx"), find("ny"), find("nz")) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    _ => None,
                };
                let color_idx = match (find("red"), find("green"), find("blue")) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    _ => None,
                };
                let radius_idx = find("radius");
                let color_scale = color_idx.map(|idx| {
                    idx.map(|i| match &el.props[i] {
                        Property::Scalar { ty, .. } => ty.color_scale(),
                        Property::List { .. } => 1.0,
                    })
                });
                positions.reserve(el.count);
                if normal_idx.is_some() {
                    normals = Some(Vec::with_capacity(el.count));
                }
                if color_idx.is_some() {
                    colors = Some(Vec::with_capacity(el.count));
                }
                if radius_idx.is_some() {
                    radii = Some(Vec::with_capacity(el.count));
                }
                let mut row = vec![0.0; el.props.len()];
                for _ in 0..el.count {
                    for (slot, p) in row.iter_mut().zip(&el.props) {
                        *slot = match p {
                            Property::Scalar { ty, .. } => body.read(*ty, path)?,
                            Property::List { .. } => {
                                return Err(Error::UnsupportedFormat(format!(
                                    "{}: list property {:?} on vertices",
                                    path.display(),
                                    p.name()
                                )))
                            }
                        };
                    }
                    positions.push(Vector3::new(row[ix], row[iy], row[iz]));
                    if let (Some(idx), Some(out)) = (normal_idx, normals.as_mut()) {
                        out.push(Vector3::new(row[idx[0]], row[idx[1]], row[idx[2]]));
                    }
                    if let (Some(idx), Some(scale), Some(out)) =
                        (color_idx, color_scale, colors.as_mut())
                    {
                        out.push([0, 1, 2].map(|c| (row[idx[c]] / scale[c]).clamp(0.0, 1.0)));
                    }
                    if let (Some(i), Some(out)) = (radius_idx, radii.as_mut()) {
                        out.push(row[i]);
                    }
                }
            }
            "face" => {
                let list = el.props.iter().position(|p| {
                    matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
                });
                let Some(list) = list else {
                    return Err(Error::UnsupportedFormat(format!(
                        "{}: face element without vertex_indices",
                        path.display()
                    )));
                };
                let mut out = Vec::with_capacity(el.count);
                let mut poly = Vec::new();
                for _ in 0..el.count {
                    for (pi, p) in el.props.iter().enumerate() {
                        match p {
                            Property::Scalar { ty, .. } => {
                                body.read(*ty, path)?;
                            }
                            Property::List { count, item, .. } => {
                                let n = body.read(*count, path)? as usize;
                                poly.clear();
                                for _ in 0..n {
                                    let v = body.read(*item, path)?;
                                    if pi == list {
                                        if v < 0.0 || v.fract() != 0.0 || v >= u32::MAX as f64 {
                                            return Err(Error::parse(path, format!("bad vertex index {v}")));
                                        }
                                        poly.push(v as u32);
                                    }
                                }
                                if pi == list {
                                    for k in 1..poly.len().saturating_sub(1) {
                                        out.push([poly[0], poly[k], poly[k + 1]]);
                                    }
                                }
                            }
                        }
                    }
                }
                faces = Some(out);
            }
            _ => skip_element(&mut body, el, path)?,
        }
    }

    let n = positions.len();
    if let Some(f) = faces.as_ref().and_then(|f| f.iter().find(|f| f.iter().any(|&i| i as usize >= n))) {
        return Err(Error::parse(path, format!("face {f:?} references vertex beyond {n}")));
    }

    match faces {
        Some(faces) => {
            let mesh = TriMesh {
                vertices: positions,
                faces,
                colors,
                normals,
                uvs: None,
                texture: None,
            };
            mesh.validate()?;
            Ok(Model::Mesh(mesh))
        }
        None => {
            let colors = colors.unwrap_or_else(|| vec![[0.5; 3]; n]);
            let cloud = PointCloud {
                points: positions,
                colors,
                normals,
                radii,
            };
            cloud.validate()?;
            Ok(Model::Cloud(cloud))
        }
    }
}

fn skip_element(body: &mut Body<'_>, el: &Element, path: &Path) -> Result<()> {
    for _ in 0..el.count {
        for p in &el.props {
            match p {
                Property::Scalar { ty, .. } => {
                    body.read(*ty, path)?;
                }
                Property::List { count, item, .. } => {
                    let n = body.read(*count, path)? as usize;
                    for _ in 0..n {
                        body.read(*item, path)?;
                    }
                }
            }
        }
    }
    Ok(())
}

struct VertexData<'a> {
    positions: &'a [Vector3<f64>],
    normals: Option<&'a [Vector3<f64>]>,
    colors: Option<&'a [Rgb]>,
    radii: Option<&'a [f64]>,
}

fn color_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(format: PlyFormat, v: &VertexData<'_>, faces: Option<&[[u32; 3]]>) -> Vec<u8> {
    use std::fmt::Write;
    let mut h = String::from("ply\n");
    let _ = writeln!(
        h,
        "format {} 1.0",
        match format {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    );
    h.push_str("comment generated by rephoto\n");
    let _ = writeln!(h, "element vertex {}", v.positions.len());
    h.push_str("property float x\nproperty float y\nproperty float z\n");
    if v.normals.is_some() {
        h.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    if v.colors.is_some() {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if v.radii.is_some() {
        h.push_str("property float radius\n");
    }
    if let Some(f) = faces {
        let _ = writeln!(h, "element face {}", f.len());
        h.push_str("property list uchar int vertex_indices\n");
    }
    h.push_str("end_header\n");

    let mut out = h.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut s = String::new();
            for i in 0..v.positions.len() {
                let p = v.positions[i];
                let _ = write!(s, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
                if let Some(n) = v.normals {
                    let _ = write!(s, " {} {} {}", n[i].x as f32, n[i].y as f32, n[i].z as f32);
                }
                if let Some(c) = v.colors {
                    let [r, g, b] = c[i].map(color_u8);
                    let _ = write!(s, " {r} {g} {b}");
                }
                if let Some(r) = v.radii {
                    let _ = write!(s, " {}", r[i] as f32);
                }
                s.push('\n');
            }
            for f in faces.unwrap_or(&[]) {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend_from_slice(s.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            let put = |out: &mut Vec<u8>, x: f64| out.extend_from_slice(&(x as f32).to_le_bytes());
            for i in 0..v.positions.len() {
                let p = v.positions[i];
                put(&mut out, p.x);
                put(&mut out, p.y);
                put(&mut out, p.z);
                if let Some(n) = v.normals {
                    put(&mut out, n[i].x);
                    put(&mut out, n[i].y);
                    put(&mut out, n[i].z);
                }
                if let Some(c) = v.colors {
                    out.extend_from_slice(&c[i].map(color_u8));
                }
                if let Some(r) = v.radii {
                    put(&mut out, r[i]);
                }
            }
            for f in faces.unwrap_or(&[]) {
                out.push(3);
                for &i in f {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

/// Writes a mesh. Texture coordinates are not stored in PLY.
pub fn save_mesh_ply(mesh: &TriMesh, path: &Path, format: PlyFormat) -> Result<()> {
    mesh.validate()?;
    let data = VertexData {
        positions: &mesh.vertices,
        normals: mesh.normals.as_deref(),
        colors: mesh.colors.as_deref(),
        radii: None,
    };
    io::write_bytes_atomic(path, &encode(format, &data, Some(&mesh.faces)))
}

pub fn save_cloud_ply(cloud: &PointCloud, path: &Path, format: PlyFormat) -> Result<()> {
    cloud.validate()?;
    let data = VertexData {
        positions: &cloud.points,
        normals: cloud.normals.as_deref(),
        colors: Some(&cloud.colors),
        radii: cloud.radii.as_deref(),
    };
    io::write_bytes_atomic(path, &encode(format, &data, None))
}

pub fn save_ply(model: &Model, path: &Path, format: PlyFormat) -> Result<()> {
    match model {
        Model::Mesh(m) => save_mesh_ply(m, path, format),
        Model::Cloud(c) => save_cloud_ply(c, path, format),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    const TRIANGLE: &str = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
property uchar red\nproperty uchar green\nproperty uchar blue\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n\
0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0 0 0 255\n3 0 1 2\n";

    #[test]
    fn ascii_triangle_is_a_mesh() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.ply", TRIANGLE.as_bytes());
        let mesh = load_ply(&p).unwrap().into_mesh().unwrap();
        assert_eq!((mesh.vertices.len(), mesh.faces.len()), (3, 1));
        assert_eq!(mesh.colors.unwrap()[1], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn vertices_only_is_a_cloud() {
        let dir = tempfile::tempdir().unwrap();
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n1 2 3\n4 5 6\n";
        let p = write(&dir, "c.ply", text.as_bytes());
        let cloud = load_ply(&p).unwrap().into_cloud().unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert_eq!(cloud.points[1], Vector3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn quads_are_fan_triangulated_and_extra_elements_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
element face 1\nproperty uchar flags\nproperty list uchar uint vertex_index\nelement edge 1\nproperty int a\nproperty int b\nend_header\n\
0 0 0\n1 0 0\n1 1 0\n0 1 0\n7 4 0 1 2 3\n0 1\n";
        let p = write(&dir, "q.ply", text.as_bytes());
        let mesh = load_ply(&p).unwrap().into_mesh().unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.ply", b"plx\n");
        assert!(matches!(load_ply(&p), Err(Error::Parse { .. })));
        let p = write(&dir, "b.ply", b"ply\nformat binary_big_endian 1.0\nend_header\n");
        assert!(matches!(load_ply(&p), Err(Error::UnsupportedFormat(_))));
        let bad_index = TRIANGLE.replace("3 0 1 2", "3 0 1 9");
        let p = write(&dir, "c.ply", bad_index.as_bytes());
        assert!(matches!(load_ply(&p), Err(Error::Parse { .. })));
        let truncated = &TRIANGLE[..TRIANGLE.len() - 8];
        let p = write(&dir, "d.ply", truncated.as_bytes());
        assert!(load_ply(&p).is_err());
        let no_xyz = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float q\nend_header\n1\n";
        let p = write(&dir, "e.ply", no_xyz.as_bytes());
        assert!(matches!(load_ply(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let src = write(&dir, "t.ply", TRIANGLE.as_bytes());
        let mut mesh = load_ply(&src).unwrap().into_mesh().unwrap();
        mesh.vertices[2].z = 0.1f32 as f64;
        mesh.compute_vertex_normals();
        let normals: Vec<_> = mesh.normals.as_ref().unwrap().iter().map(|n| n.map(|x| x as f32 as f64)).collect();
        mesh.normals = Some(normals);
        let a = dir.path().join("a.ply");
        save_mesh_ply(&mesh, &a, PlyFormat::BinaryLittleEndian).unwrap();
        let back = load_ply(&a).unwrap().into_mesh().unwrap();
        assert_eq!(back, mesh);
        let b = dir.path().join("b.ply");
        save_mesh_ply(&back, &b, PlyFormat::BinaryLittleEndian).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn cloud_with_radii_roundtrips_in_ascii() {
        let dir = tempfile::tempdir().unwrap();
        let mut cloud = PointCloud::new(
            vec![Vector3::new(0.5, 1.0, -2.0), Vector3::new(0.25, 0.0, 3.0)],
            vec![[1.0, 0.0, 0.2], [0.0, 0.6, 1.0]],
        )
        .unwrap();
        cloud.radii = Some(vec![0.125, 2.5]);
        let p = dir.path().join("c.ply");
        save_cloud_ply(&cloud, &p, PlyFormat::Ascii).unwrap();
        let back = load_ply(&p).unwrap().into_cloud().unwrap();
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.radii, cloud.radii);
        assert_eq!(back.colors, cloud.colors);
    }
}
