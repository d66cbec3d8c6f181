use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{Landmark, LandmarkSet, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    load_mesh_scaled(path, format, 1.0)
}

/// Loads a mesh and multiplies every coordinate by `unit_scale` (e.g. 10.0
/// for scans stored in centimetres).
pub fn load_mesh_scaled(path: impl AsRef<Path>, format: MeshFormat, unit_scale: f64) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let (mut vertices, faces) = match format {
        MeshFormat::Obj => parse_obj(&name, &String::from_utf8_lossy(&bytes))?,
        MeshFormat::Ply => parse_ply(&name, &bytes)?,
    };
    if unit_scale != 1.0 {
        for v in &mut vertices {
            v.coords *= unit_scale;
        }
    }
    TriangleMesh::new(vertices, faces)
}

type Soup = (Vec<Point3<f64>>, Vec<[usize; 3]>);

pub(crate) fn parse_obj(name: &str, text: &str) -> Result<Soup> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let loc = || format!("line {}", lineno + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let t = tok
                        .next()
                        .ok_or_else(|| Error::parse(name, loc(), "vertex needs 3 coordinates"))?;
                    *c = t
                        .parse()
                        .map_err(|_| Error::parse(name, loc(), format!("bad coordinate '{t}'")))?;
                }
                vertices.push(Point3::from(xyz));
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or(t);
                        let i: i64 = head
                            .parse()
                            .map_err(|_| Error::parse(name, loc(), format!("bad face index '{t}'")))?;
                        if i > 0 {
                            Ok((i - 1) as usize)
                        } else if i < 0 && (-i) as usize <= vertices.len() {
                            Ok(vertices.len() - (-i) as usize)
                        } else {
                            Err(Error::Structure(format!(
                                "{name} {}: face index {i} out of range",
                                loc()
                            )))
                        }
                    })
                    .collect::<Result<Vec<usize>>>()?;
                if idx.len() != 3 {
                    return Err(Error::parse(
                        name,
                        loc(),
                        format!("only triangles are supported, got a {}-gon", idx.len()),
                    ));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub(crate) fn parse_ply(name: &str, bytes: &[u8]) -> Result<Soup> {
    let header_end = find_subslice(bytes, b"end_header")
        .ok_or_else(|| Error::parse(name, "header", "missing end_header"))?;
    let mut body_start = header_end + b"end_header".len();
    // the header terminates at the first newline after end_header
    while body_start < bytes.len() && bytes[body_start] != b'\n' {
        body_start += 1;
    }
    body_start += 1;
    let header = String::from_utf8_lossy(&bytes[..header_end]);
    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(name, "line 1", "missing 'ply' magic")),
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for (lineno, line) in lines {
        let loc = format!("line {}", lineno + 1);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", ..] => binary = Some(false),
            ["format", "binary_little_endian", ..] => binary = Some(true),
            ["format", other, ..] => {
                return Err(Error::parse(name, loc, format!("unsupported format '{other}'")))
            }
            ["element", ename, count] => elements.push(Element {
                name: ename.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(name, &loc, format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, pname] => {
                let (ct, it) = Scalar::parse(ct)
                    .zip(Scalar::parse(it))
                    .ok_or_else(|| Error::parse(name, &loc, "bad list property types"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(name, &loc, "property before element"))?
                    .props
                    .push(Property::List(pname.to_string(), ct, it));
            }
            ["property", ty, pname] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(name, &loc, format!("bad property type '{ty}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(name, &loc, "property before element"))?
                    .props
                    .push(Property::Scalar(pname.to_string(), ty));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(Error::parse(name, loc, format!("unrecognized header line '{line}'"))),
        }
    }
    let binary = binary.ok_or_else(|| Error::parse(name, "header", "missing format line"))?;
    let body = &bytes[body_start.min(bytes.len())..];
    let mut reader: Box<dyn ValueReader> = if binary {
        Box::new(BinaryReader { data: body, pos: 0 })
    } else {
        Box::new(AsciiReader::new(body))
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let xyz_idx = if el.name == "vertex" {
            let find = |want: &str| {
                el.props
                    .iter()
                    .position(|p| matches!(p, Property::Scalar(n, _) if n == want))
                    .ok_or_else(|| Error::parse(name, "header", format!("vertex has no '{want}' property")))
            };
            Some([find("x")?, find("y")?, find("z")?])
        } else {
            None
        };
        for item in 0..el.count {
            let loc = || format!("{} {item}", el.name);
            let mut xyz = [0.0; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_, ty) => {
                        let v = reader.next(*ty).ok_or_else(|| Error::parse(name, loc(), "truncated data"))?;
                        if let Some(idx) = xyz_idx {
                            if let Some(c) = idx.iter().position(|&k| k == pi) {
                                xyz[c] = v;
                            }
                        }
                    }
                    Property::List(pname, ct, it) => {
                        let len = reader.next(*ct).ok_or_else(|| Error::parse(name, loc(), "truncated data"))?;
                        let len = len as usize;
                        let mut vals = Vec::with_capacity(len);
                        for _ in 0..len {
                            vals.push(reader.next(*it).ok_or_else(|| Error::parse(name, loc(), "truncated data"))?);
                        }
                        if el.name == "face" && (pname == "vertex_indices" || pname == "vertex_index") {
                            if len != 3 {
                                return Err(Error::parse(
                                    name,
                                    loc(),
                                    format!("only triangles are supported, got a {len}-gon"),
                                ));
                            }
                            let mut tri = [0usize; 3];
                            for (t, v) in tri.iter_mut().zip(&vals) {
                                if *v < 0.0 {
                                    return Err(Error::Structure(format!("{name} {}: negative vertex index", loc())));
                                }
                                *t = *v as usize;
                            }
                            faces.push(tri);
                        }
                    }
                }
            }
            if xyz_idx.is_some() {
                vertices.push(Point3::from(xyz));
            }
        }
    }
    Ok((vertices, faces))
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

trait ValueReader {
    fn next(&mut self, ty: Scalar) -> Option<f64>;
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn next(&mut self, ty: Scalar) -> Option<f64> {
        let end = self.pos + ty.size();
        let v = ty.read_le(self.data.get(self.pos..end)?);
        self.pos = end;
        Some(v)
    }
}

struct AsciiReader<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> AsciiReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        let text = std::str::from_utf8(data).unwrap_or("");
        Self {
            tokens: text.split_ascii_whitespace(),
        }
    }
}

impl ValueReader for AsciiReader<'_> {
    fn next(&mut self, _ty: Scalar) -> Option<f64> {
        self.tokens.next()?.parse().ok()
    }
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z).map_err(io)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkRow {
    label: String,
    x: f64,
    y: f64,
    z: f64,
}

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display(), "header", format!("{other:?}")),
    })?;
    let headers = rdr.headers()?.clone();
    let expected = ["label", "x", "y", "z"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::parse(
            path.display(),
            "line 1",
            format!("expected header 'label,x,y,z', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut entries = Vec::new();
    for (i, row) in rdr.deserialize::<LandmarkRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path.display(), format!("line {}", i + 2), e))?;
        entries.push(Landmark {
            label: row.label,
            position: Point3::new(row.x, row.y, row.z),
        });
    }
    LandmarkSet::new(entries)
}

pub fn save_landmarks(set: &LandmarkSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for lm in set {
        w.serialize(LandmarkRow {
            label: lm.label.clone(),
            x: lm.position.x,
            y: lm.position.y,
            z: lm.position.z,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
