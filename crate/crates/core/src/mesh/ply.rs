//! PLY export and a reader for the subset of PLY this crate writes
//! (plus the usual scalar property types).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{palette, Mesh};
use crate::error::{Error, Result};
use crate::raster::Label;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    #[default]
    Binary,
    Ascii,
}

fn color_u8(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ply(mesh: &Mesh, format: PlyFormat) -> Result<Vec<u8>> {
    mesh.validate()?;
    let mut header = String::from("ply\n");
    header.push_str(match format {
        PlyFormat::Binary => "format binary_little_endian 1.0\n",
        PlyFormat::Ascii => "format ascii 1.0\n",
    });
    let _ = write!(
        header,
        "element vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar label\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let mut out = header.into_bytes();
    let rgb = |n: usize| mesh.colors[n].map(color_u8);
    match format {
        PlyFormat::Binary => {
            for (n, v) in mesh.vertices.iter().enumerate() {
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                out.extend_from_slice(&rgb(n));
                out.push(mesh.labels[n]);
            }
            for t in &mesh.triangles {
                out.push(3);
                for i in t {
                    out.extend_from_slice(&(*i as i32).to_le_bytes());
                }
            }
        }
        PlyFormat::Ascii => {
            let mut body = String::new();
            for (n, v) in mesh.vertices.iter().enumerate() {
                let [r, g, b] = rgb(n);
                let _ = writeln!(body, "{} {} {} {r} {g} {b} {}", v[0], v[1], v[2], mesh.labels[n]);
            }
            for t in &mesh.triangles {
                let _ = writeln!(body, "3 {} {} {}", t[0], t[1], t[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
    }
    Ok(out)
}

pub fn write_ply(path: impl AsRef<Path>, mesh: &Mesh, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ply(mesh, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ply(&bytes)
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::format("ply", format!("unknown property type {other}"))),
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
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads back a mesh. Vertex colors come from the `label` property when
/// present, otherwise from `red/green/blue`.
pub fn decode_ply(bytes: &[u8]) -> Result<Mesh> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::format("ply", "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format("ply", "header is not UTF-8"))?;
    let body = &bytes[end + END.len()..];

    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::format("ply", "missing magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(Error::format("ply", format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::format("ply", format!("bad count in {line:?}")))?,
                props: Vec::new(),
            }),
            ["property", "list", n, item, name] => elements
                .last_mut()
                .ok_or_else(|| Error::format("ply", "property before element"))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(n)?, Scalar::parse(item)?)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::format("ply", "property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            _ => return Err(Error::format("ply", format!("unexpected header line {line:?}"))),
        }
    }
    let binary = binary.ok_or_else(|| Error::format("ply", "missing format line"))?;
    let mut reader: Box<dyn ValueReader> = if binary {
        Box::new(BinaryReader { bytes: body, at: 0 })
    } else {
        let text = std::str::from_utf8(body).map_err(|_| Error::format("ply", "body is not UTF-8"))?;
        Box::new(AsciiReader { tokens: text.split_ascii_whitespace() })
    };

    let mut mesh = Mesh::default();
    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [0f32; 3];
            let mut rgb = [0u8; 3];
            let mut label = None;
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = reader.next(*ty)?;
                        match name.as_str() {
                            "x" => pos[0] = v as f32,
                            "y" => pos[1] = v as f32,
                            "z" => pos[2] = v as f32,
                            "red" => rgb[0] = v as u8,
                            "green" => rgb[1] = v as u8,
                            "blue" => rgb[2] = v as u8,
                            "label" => label = Some(v as u8),
                            _ => {}
                        }
                    }
                    Property::List(name, count_ty, item_ty) => {
                        let n = reader.next(*count_ty)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(reader.next(*item_ty)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(Error::format("ply", "face with fewer than 3 vertices"));
                            }
                            for m in 1..n - 1 {
                                mesh.triangles.push([items[0], items[m], items[m + 1]].map(|i| i as u32));
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                mesh.vertices.push(pos);
                let color = match label {
                    Some(l) => palette(l)?,
                    None => rgb.map(|c| c as f32 / 255.0),
                };
                mesh.colors.push(color);
                mesh.labels.push(label.unwrap_or(Label::Other.id()));
            }
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

trait ValueReader {
    fn next(&mut self, ty: Scalar) -> Result<f64>;
}

struct BinaryReader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl ValueReader for BinaryReader<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        let end = self.at + ty.size();
        let b = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::format("ply", "truncated body"))?;
        self.at = end;
        Ok(ty.read_le(b))
    }
}

struct AsciiReader<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueReader for AsciiReader<'_> {
    fn next(&mut self, _: Scalar) -> Result<f64> {
        let tok = self.tokens.next().ok_or_else(|| Error::format("ply", "truncated body"))?;
        tok.parse().map_err(|_| Error::format("ply", format!("bad value {tok:?}")))
    }
}
