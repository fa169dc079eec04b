//! OBJ and PLY readers/writers.
//!
//! Labels travel as an integer `label` vertex property in PLY and as a
//! sidecar text file (one integer per vertex line, `<stem>.labels`) next to
//! an OBJ. Coordinates are written at full double precision, so a
//! save/load round trip reproduces vertices bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Point3, TriMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Loads an `.obj` or `.ply` mesh, including labels when present.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("obj") => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut mesh = read_obj(BufReader::new(file), path)?;
            let sidecar = label_sidecar(path);
            if sidecar.exists() {
                let labels = load_labels(&sidecar)?;
                mesh.set_labels(Some(labels)).map_err(|e| {
                    Error::format(&sidecar, 0, e.to_string())
                })?;
            }
            Ok(mesh)
        }
        Some("ply") => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_ply(BufReader::new(file), path)
        }
        _ => Err(Error::Usage(format!(
            "unsupported mesh extension for {} (expected .obj or .ply)",
            path.display()
        ))),
    }
}

/// Saves by extension; PLY is written as binary little-endian.
pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("obj") => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            write_obj(&mut w, mesh).map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))?;
            if let Some(labels) = mesh.labels() {
                save_labels(label_sidecar(path), labels)?;
            }
            Ok(())
        }
        Some("ply") => save_ply(path, mesh, PlyFormat::BinaryLittleEndian),
        _ => Err(Error::Usage(format!(
            "unsupported mesh extension for {} (expected .obj or .ply)",
            path.display()
        ))),
    }
}

pub fn save_ply(path: impl AsRef<Path>, mesh: &TriMesh, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply(&mut w, mesh, format)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Sidecar label path for an OBJ file.
pub fn label_sidecar(path: &Path) -> PathBuf {
    path.with_extension("labels")
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i32>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let v = text
            .parse::<i32>()
            .map_err(|_| Error::format(path, i + 1, format!("expected an integer label, got `{text}`")))?;
        labels.push(v);
    }
    Ok(labels)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[i32]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| {
        for l in labels {
            writeln!(w, "{l}")?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn read_obj(reader: impl BufRead, path: &Path) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let t = tok
                        .next()
                        .ok_or_else(|| Error::format(path, lineno, "vertex needs three coordinates"))?;
                    *slot = t
                        .parse()
                        .map_err(|_| Error::format(path, lineno, format!("bad coordinate `{t}`")))?;
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|_| Error::format(path, lineno, format!("bad face index `{t}`")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(Error::format(path, lineno, "face index 0 is invalid"));
                    };
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(Error::format(path, lineno, "face needs at least three vertices"));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                    face_lines.push(lineno);
                }
            }
            _ => {}
        }
    }
    let n = vertices.len() as i64;
    let mut out = Vec::with_capacity(faces.len());
    for (f, &lineno) in faces.iter().zip(&face_lines) {
        if let Some(bad) = f.iter().find(|&&v| v < 0 || v >= n) {
            return Err(Error::format(
                path,
                lineno,
                format!("face index {} out of range (mesh has {n} vertices)", bad + 1),
            ));
        }
        let f = [f[0] as usize, f[1] as usize, f[2] as usize];
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(Error::format(path, lineno, "face repeats a vertex"));
        }
        out.push(f);
    }
    TriMesh::new(vertices, out).map_err(|e| Error::format(path, 0, e.to_string()))
}

fn write_obj(w: &mut impl Write, mesh: &TriMesh) -> std::io::Result<()> {
    for p in mesh.vertices() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
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

    fn decode_le(self, b: &[u8]) -> f64 {
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

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads one element instance at a time from either body encoding.
trait PlyBody {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String>;
}

struct AsciiBody<R> {
    lines: std::io::Lines<R>,
    tokens: Vec<String>,
    pos: usize,
    line: usize,
}

impl<R: BufRead> AsciiBody<R> {
    /// Moves to the next non-empty line; every element instance starts on
    /// its own line.
    fn next_record(&mut self) -> std::result::Result<(), String> {
        loop {
            self.line += 1;
            match self.lines.next() {
                Some(Ok(l)) => {
                    let toks: Vec<String> = l.split_whitespace().map(String::from).collect();
                    if toks.is_empty() {
                        continue;
                    }
                    self.tokens = toks;
                    self.pos = 0;
                    return Ok(());
                }
                Some(Err(e)) => return Err(e.to_string()),
                None => return Err("unexpected end of file".into()),
            }
        }
    }
}

impl<R: BufRead> PlyBody for AsciiBody<R> {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| "too few values on line".to_string())?;
        self.pos += 1;
        let v: f64 = tok.parse().map_err(|_| format!("bad number `{tok}`"))?;
        if !matches!(ty, Scalar::F32 | Scalar::F64) && v.fract() != 0.0 {
            return Err(format!("expected an integer, got `{tok}`"));
        }
        Ok(v)
    }
}

struct BinaryBody<R> {
    reader: R,
    offset: usize,
}

impl<R: Read> PlyBody for BinaryBody<R> {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        let mut buf = [0u8; 8];
        let n = ty.size();
        self.reader
            .read_exact(&mut buf[..n])
            .map_err(|_| format!("unexpected end of data at byte {}", self.offset))?;
        self.offset += n;
        Ok(ty.decode_le(&buf[..n]))
    }
}

fn read_ply(mut reader: impl BufRead, path: &Path) -> Result<TriMesh> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<usize> {
        line.clear();
        lineno += 1;
        let n = reader.read_line(line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::format(path, lineno, "unexpected end of header"));
        }
        Ok(lineno)
    };
    let ln = next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(Error::format(path, ln, "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let header_end;
    loop {
        let ln = next_line(&mut reader, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, _version] => {
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(Error::format(path, ln, format!("unsupported PLY format `{other}`")))
                    }
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::format(path, ln, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let count = Scalar::parse(count)
                    .ok_or_else(|| Error::format(path, ln, format!("unknown type `{count}`")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| Error::format(path, ln, format!("unknown type `{item}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, ln, "property before any element"))?
                    .props
                    .push(Property::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::format(path, ln, format!("unknown type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, ln, "property before any element"))?
                    .props
                    .push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
            }
            ["end_header"] => {
                header_end = ln;
                break;
            }
            _ => {
                return Err(Error::format(path, ln, format!("unrecognized header line `{}`", line.trim())))
            }
        }
    }
    let format = format.ok_or_else(|| Error::format(path, header_end, "missing format line"))?;
    match format {
        PlyFormat::Ascii => {
            let mut body = AsciiBody {
                lines: reader.lines(),
                tokens: Vec::new(),
                pos: 0,
                line: header_end,
            };
            let result = read_elements(&elements, &mut body, |b| b.next_record());
            let line = body.line;
            result.map_err(|msg| Error::format(path, line, msg))
        }
        PlyFormat::BinaryLittleEndian => {
            let mut body = BinaryBody { reader, offset: 0 };
            read_elements(&elements, &mut body, |_| Ok(()))
                .map_err(|msg| Error::format(path, header_end, format!("binary body: {msg}")))
        }
    }
}

fn read_elements<B: PlyBody>(
    elements: &[Element],
    body: &mut B,
    mut start_record: impl FnMut(&mut B) -> std::result::Result<(), String>,
) -> std::result::Result<TriMesh, String> {
    let mut vertices = Vec::new();
    let mut labels: Option<Vec<i32>> = None;
    let mut faces = Vec::new();
    for el in elements {
        match el.name.as_str() {
            "vertex" => {
                let find = |n: &str| {
                    el.props
                        .iter()
                        .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
                };
                let (xi, yi, zi) = match (find("x"), find("y"), find("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err("vertex element lacks x/y/z".into()),
                };
                let li = find("label");
                if li.is_some() {
                    labels = Some(Vec::with_capacity(el.count));
                }
                vertices.reserve(el.count);
                for _ in 0..el.count {
                    start_record(body)?;
                    let mut p = [0.0; 3];
                    for (k, prop) in el.props.iter().enumerate() {
                        let v = read_property(prop, body)?;
                        if k == xi {
                            p[0] = v[0];
                        } else if k == yi {
                            p[1] = v[0];
                        } else if k == zi {
                            p[2] = v[0];
                        } else if Some(k) == li {
                            labels.as_mut().unwrap().push(v[0] as i32);
                        }
                    }
                    vertices.push(Point3::new(p[0], p[1], p[2]));
                }
            }
            "face" => {
                let list = el.props.iter().position(|p| {
                    matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
                });
                let Some(list) = list else {
                    return Err("face element lacks a vertex_indices list".into());
                };
                for fi in 0..el.count {
                    start_record(body)?;
                    for (k, prop) in el.props.iter().enumerate() {
                        let v = read_property(prop, body)?;
                        if k != list {
                            continue;
                        }
                        if v.len() < 3 {
                            return Err(format!("face {fi} has fewer than three vertices"));
                        }
                        let idx: Vec<usize> = v
                            .iter()
                            .map(|&x| {
                                if x < 0.0 || x as usize >= vertices.len() {
                                    Err(format!("face {fi} index {x} out of range"))
                                } else {
                                    Ok(x as usize)
                                }
                            })
                            .collect::<std::result::Result<_, _>>()?;
                        for j in 1..idx.len() - 1 {
                            let f = [idx[0], idx[j], idx[j + 1]];
                            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                                return Err(format!("face {fi} repeats a vertex"));
                            }
                            faces.push(f);
                        }
                    }
                }
            }
            _ => {
                for _ in 0..el.count {
                    start_record(body)?;
                    for prop in &el.props {
                        read_property(prop, body)?;
                    }
                }
            }
        }
    }
    let mesh = TriMesh::new(vertices, faces).map_err(|e| e.to_string())?;
    match labels {
        Some(l) => mesh.with_labels(l).map_err(|e| e.to_string()),
        None => Ok(mesh),
    }
}

fn read_property<B: PlyBody>(prop: &Property, body: &mut B) -> std::result::Result<Vec<f64>, String> {
    match prop {
        Property::Scalar { ty, .. } => Ok(vec![body.scalar(*ty)?]),
        Property::List { count, item, .. } => {
            let n = body.scalar(*count)?;
            if n < 0.0 {
                return Err("negative list length".into());
            }
            (0..n as usize).map(|_| body.scalar(*item)).collect()
        }
    }
}

fn write_ply(w: &mut impl Write, mesh: &TriMesh, format: PlyFormat) -> std::io::Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {fmt} 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if mesh.labels().is_some() {
        writeln!(w, "property int label")?;
    }
    writeln!(w, "element face {}", mesh.face_count())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    let labels = mesh.labels();
    match format {
        PlyFormat::Ascii => {
            for (i, p) in mesh.vertices().iter().enumerate() {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(l) = labels {
                    write!(w, " {}", l[i])?;
                }
                writeln!(w)?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for (i, p) in mesh.vertices().iter().enumerate() {
                for c in [p.x, p.y, p.z] {
                    w.write_all(&c.to_le_bytes())?;
                }
                if let Some(l) = labels {
                    w.write_all(&l[i].to_le_bytes())?;
                }
            }
            for f in mesh.faces() {
                w.write_all(&[3u8])?;
                for &v in f {
                    w.write_all(&(v as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}
