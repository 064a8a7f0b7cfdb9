//! PLY point clouds and triangle meshes.
//!
//! Clouds are written as binary little-endian vertices of
//! `float x, y, z; uchar red, green, blue; ushort owner` (17 bytes), with one
//! `comment owner <slot> <name>` header line per owner slot.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::geometry::Vec3;
use crate::projection::{ColoredPointCloud, OwnerId};
use crate::scene::{SceneError, SurfaceLabel, TriMesh};

pub const CLOUD_RECORD_BYTES: usize = 17;

#[derive(Debug, thiserror::Error)]
pub enum PlyError {
    #[error("refusing to export an empty point cloud")]
    EmptyCloud,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed PLY: {0}")]
    Format(String),
    #[error(transparent)]
    Mesh(#[from] SceneError),
}

fn format_err(msg: impl Into<String>) -> PlyError {
    PlyError::Format(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
    BinaryBe,
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
    fn parse(s: &str) -> Result<Self, PlyError> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(format_err(format!("unknown scalar type `{other}`"))),
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

    fn decode(self, b: &[u8], enc: Encoding) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if enc == Encoding::BinaryBe { <$t>::from_be_bytes(a) } else { <$t>::from_le_bytes(a) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

impl Element {
    fn find(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p.name() == name)
    }
}

#[derive(Debug, Clone)]
struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    comments: Vec<String>,
}

fn read_header(r: &mut impl BufRead) -> Result<Header, PlyError> {
    let mut line = String::new();
    let mut next = |line: &mut String| -> Result<bool, PlyError> {
        line.clear();
        let n = r.read_line(line).map_err(|e| format_err(e.to_string()))?;
        Ok(n > 0)
    };
    if !next(&mut line)? || line.trim_end() != "ply" {
        return Err(format_err("missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut comments = Vec::new();
    loop {
        if !next(&mut line)? {
            return Err(format_err("header ends before `end_header`"));
        }
        let text = line.trim_end_matches(['\r', '\n']);
        let mut words = text.split_whitespace();
        match words.next() {
            Some("format") => {
                encoding = Some(match words.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some("binary_big_endian") => Encoding::BinaryBe,
                    other => return Err(format_err(format!("unknown format {other:?}"))),
                });
            }
            Some("comment") => comments.push(text.splitn(2, ' ').nth(1).unwrap_or("").to_string()),
            Some("obj_info") => {}
            Some("element") => {
                let name = words.next().ok_or_else(|| format_err("element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| format_err(format!("element {name} without a valid count")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| format_err("property before any element"))?;
                let words: Vec<&str> = words.collect();
                let prop = match words.as_slice() {
                    ["list", c, i, name] => Property::List(name.to_string(), Scalar::parse(c)?, Scalar::parse(i)?),
                    [t, name] => Property::Scalar(name.to_string(), Scalar::parse(t)?),
                    _ => return Err(format_err(format!("bad property line `{text}`"))),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            None => {}
            Some(other) => return Err(format_err(format!("unexpected header keyword `{other}`"))),
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| format_err("missing format line"))?,
        elements,
        comments,
    })
}

/// One decoded row: scalars in `values`, lists in `lists`, both in property order.
#[derive(Default)]
struct Row {
    values: Vec<f64>,
    lists: Vec<Vec<f64>>,
}

struct BodyReader<R> {
    r: R,
    encoding: Encoding,
    tokens: std::vec::IntoIter<String>,
}

impl<R: BufRead> BodyReader<R> {
    fn token(&mut self) -> Result<f64, PlyError> {
        loop {
            if let Some(t) = self.tokens.next() {
                return t.parse().map_err(|_| format_err(format!("bad number `{t}`")));
            }
            let mut line = String::new();
            if self.r.read_line(&mut line).map_err(|e| format_err(e.to_string()))? == 0 {
                return Err(format_err("unexpected end of data"));
            }
            self.tokens = line.split_whitespace().map(str::to_string).collect::<Vec<_>>().into_iter();
        }
    }

    fn scalar(&mut self, ty: Scalar) -> Result<f64, PlyError> {
        if self.encoding == Encoding::Ascii {
            return self.token();
        }
        let mut buf = [0u8; 8];
        self.r
            .read_exact(&mut buf[..ty.size()])
            .map_err(|_| format_err("unexpected end of data"))?;
        Ok(ty.decode(&buf, self.encoding))
    }

    fn row(&mut self, el: &Element, row: &mut Row) -> Result<(), PlyError> {
        row.values.clear();
        row.lists.clear();
        for p in &el.props {
            match p {
                Property::Scalar(_, t) => {
                    let v = self.scalar(*t)?;
                    row.values.push(v);
                }
                Property::List(_, c, t) => {
                    let n = self.scalar(*c)?;
                    if !(n >= 0.0 && n.fract() == 0.0) {
                        return Err(format_err(format!("bad list length {n}")));
                    }
                    let items = (0..n as usize).map(|_| self.scalar(*t)).collect::<Result<Vec<_>, _>>()?;
                    row.lists.push(items);
                }
            }
        }
        Ok(())
    }
}

/// Reads every element, calling `visit(element_index, row)` per row.
fn read_body(
    r: impl BufRead,
    header: &Header,
    mut visit: impl FnMut(usize, &Row) -> Result<(), PlyError>,
) -> Result<(), PlyError> {
    let mut body = BodyReader {
        r,
        encoding: header.encoding,
        tokens: Vec::new().into_iter(),
    };
    let mut row = Row::default();
    for (e, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            body.row(el, &mut row)?;
            visit(e, &row)?;
        }
    }
    Ok(())
}

/// Index of `name` among the scalar properties of `el`.
fn scalar_slot(el: &Element, name: &str) -> Option<usize> {
    let idx = el.find(name)?;
    match el.props[idx] {
        Property::Scalar(..) => Some(el.props[..idx].iter().filter(|p| matches!(p, Property::Scalar(..))).count()),
        Property::List(..) => None,
    }
}

/// Cloud plus the owner names recorded in the header, indexed by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyCloud {
    pub cloud: ColoredPointCloud,
    pub owner_names: Vec<String>,
}

pub fn write_cloud(w: &mut impl Write, cloud: &ColoredPointCloud, owner_names: &[String]) -> std::io::Result<()> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    for (slot, name) in owner_names.iter().enumerate() {
        header.push_str(&format!("comment owner {slot} {name}\n"));
    }
    header.push_str(&format!(
        "element vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nproperty ushort owner\nend_header\n",
        cloud.len()
    ));
    w.write_all(header.as_bytes())?;
    let mut rec = [0u8; CLOUD_RECORD_BYTES];
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        for (k, c) in [p.x, p.y, p.z].into_iter().enumerate() {
            rec[4 * k..4 * k + 4].copy_from_slice(&(c as f32).to_le_bytes());
        }
        rec[12..15].copy_from_slice(&cloud.colors[i]);
        rec[15..17].copy_from_slice(&cloud.owners[i].to_le_bytes());
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn cloud_to_bytes(cloud: &ColoredPointCloud, owner_names: &[String]) -> Vec<u8> {
    let mut out = Vec::with_capacity(256 + cloud.len() * CLOUD_RECORD_BYTES);
    write_cloud(&mut out, cloud, owner_names).expect("writing to memory");
    out
}

pub fn export_ply(path: &Path, cloud: &ColoredPointCloud, owner_names: &[String]) -> Result<(), PlyError> {
    if cloud.is_empty() {
        return Err(PlyError::EmptyCloud);
    }
    let io = |source| PlyError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write_cloud(&mut w, cloud, owner_names).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_cloud(mut r: impl BufRead) -> Result<PlyCloud, PlyError> {
    let header = read_header(&mut r)?;
    let ve = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| format_err("no vertex element"))?;
    let el = &header.elements[ve];
    let slot = |n: &str| scalar_slot(el, n).ok_or_else(|| format_err(format!("vertex property `{n}` missing")));
    let xyz = [slot("x")?, slot("y")?, slot("z")?];
    let rgb = [slot("red")?, slot("green")?, slot("blue")?];
    let owner = scalar_slot(el, "owner");
    let mut cloud = ColoredPointCloud::with_capacity(el.count);
    read_body(r, &header, |e, row| {
        if e == ve {
            let v = &row.values;
            cloud.push(
                Vec3::new(v[xyz[0]], v[xyz[1]], v[xyz[2]]),
                [v[rgb[0]] as u8, v[rgb[1]] as u8, v[rgb[2]] as u8],
                0,
                owner.map_or(0, |o| v[o] as OwnerId),
            );
        }
        Ok(())
    })?;
    let mut owner_names = Vec::new();
    for c in &header.comments {
        let mut parts = c.splitn(3, ' ');
        if let (Some("owner"), Some(slot), Some(name)) = (parts.next(), parts.next(), parts.next()) {
            let slot: usize = slot.parse().map_err(|_| format_err(format!("bad owner comment `{c}`")))?;
            if owner_names.len() <= slot {
                owner_names.resize(slot + 1, String::new());
            }
            owner_names[slot] = name.to_string();
        }
    }
    Ok(PlyCloud { cloud, owner_names })
}

pub fn import_ply(path: &Path) -> Result<PlyCloud, PlyError> {
    let f = File::open(path).map_err(|source| PlyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_cloud(BufReader::new(f))
}

fn label_code(l: SurfaceLabel) -> u8 {
    l as u8
}

fn label_from_code(c: u8) -> Result<SurfaceLabel, PlyError> {
    use SurfaceLabel::*;
    [Wall, Floor, Ceiling, Baseboard, Door, Window, Object]
        .get(c as usize)
        .copied()
        .ok_or_else(|| format_err(format!("unknown surface label {c}")))
}

/// Binary mesh with double-precision vertices and an optional `label` face property.
pub fn write_mesh(w: &mut impl Write, mesh: &TriMesh) -> std::io::Result<()> {
    let labels = mesh.labels();
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar uint vertex_indices\n",
        mesh.vertices().len(),
        mesh.triangles().len()
    );
    if labels.is_some() {
        header.push_str("property uchar label\n");
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    for v in mesh.vertices() {
        for c in v.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        w.write_all(&[3])?;
        for i in tri {
            w.write_all(&i.to_le_bytes())?;
        }
        if let Some(l) = labels {
            w.write_all(&[label_code(l[t])])?;
        }
    }
    Ok(())
}

pub fn export_mesh(path: &Path, mesh: &TriMesh) -> Result<(), PlyError> {
    let io = |source| PlyError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write_mesh(&mut w, mesh).map_err(io)?;
    w.flush().map_err(io)
}

/// Reads positions and faces (ASCII or binary); polygons are fan-triangulated.
pub fn read_mesh(mut r: impl BufRead) -> Result<TriMesh, PlyError> {
    let header = read_header(&mut r)?;
    let pos = |n: &str| header.elements.iter().position(|e| e.name == n);
    let ve = pos("vertex").ok_or_else(|| format_err("no vertex element"))?;
    let fe = pos("face").ok_or_else(|| format_err("no face element"))?;
    let vel = &header.elements[ve];
    let fel = &header.elements[fe];
    let slot = |n: &str| scalar_slot(vel, n).ok_or_else(|| format_err(format!("vertex property `{n}` missing")));
    let xyz = [slot("x")?, slot("y")?, slot("z")?];
    let list = fel
        .props
        .iter()
        .filter(|p| matches!(p, Property::List(..)))
        .position(|p| p.name() == "vertex_indices" || p.name() == "vertex_index")
        .ok_or_else(|| format_err("face element has no vertex_indices list"))?;
    let label = scalar_slot(fel, "label");
    let mut vertices = Vec::with_capacity(vel.count);
    let mut triangles = Vec::with_capacity(fel.count);
    let mut labels = Vec::new();
    read_body(r, &header, |e, row| {
        if e == ve {
            let v = &row.values;
            vertices.push(Vec3::new(v[xyz[0]], v[xyz[1]], v[xyz[2]]));
        } else if e == fe {
            let idx = &row.lists[list];
            if idx.len() < 3 {
                return Err(format_err(format!("face with {} vertices", idx.len())));
            }
            let l = label.map(|s| label_from_code(row.values[s] as u8)).transpose()?;
            for k in 1..idx.len() - 1 {
                triangles.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                if let Some(l) = l {
                    labels.push(l);
                }
            }
        }
        Ok(())
    })?;
    Ok(TriMesh::new(vertices, triangles, label.map(|_| labels))?)
}

pub fn import_mesh(path: &Path) -> Result<TriMesh, PlyError> {
    let f = File::open(path).map_err(|source| PlyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_mesh(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_point() -> ColoredPointCloud {
        let mut c = ColoredPointCloud::new();
        c.push(Vec3::new(0.5, -1.25, 2.0), [10, 20, 30], 3, 1);
        c
    }

    #[test]
    fn one_point_file_layout() {
        let names = vec!["room".to_string(), "chair".to_string()];
        let bytes = cloud_to_bytes(&one_point(), &names);
        let text = String::from_utf8_lossy(&bytes);
        let end = text.find("end_header\n").unwrap() + "end_header\n".len();
        assert!(text[..end].contains("element vertex 1\n"));
        assert!(text[..end].contains("comment owner 1 chair\n"));
        assert_eq!(bytes.len() - end, CLOUD_RECORD_BYTES);
        let back = read_cloud(&bytes[..]).unwrap();
        assert_eq!(back.owner_names, names);
        assert_eq!(back.cloud.points, one_point().points);
        assert_eq!(back.cloud.owners, vec![1]);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = export_ply(&dir.path().join("x.ply"), &ColoredPointCloud::new(), &[]).unwrap_err();
        assert!(matches!(err, PlyError::EmptyCloud));
    }

    #[test]
    fn ascii_quad_mesh_is_fan_triangulated() {
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let m = read_mesh(text.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        assert!(m.labels().is_none());
    }

    #[test]
    fn labeled_mesh_round_trip() {
        let m = TriMesh::cuboid(Vec3::new(1.0, 2.0, 3.0)).with_labels(SurfaceLabel::Door);
        let mut bytes = Vec::new();
        write_mesh(&mut bytes, &m).unwrap();
        assert_eq!(read_mesh(&bytes[..]).unwrap(), m);
    }

    #[test]
    fn truncated_body_is_an_error() {
        let bytes = cloud_to_bytes(&one_point(), &[]);
        assert!(matches!(read_cloud(&bytes[..bytes.len() - 1]), Err(PlyError::Format(_))));
    }
}
