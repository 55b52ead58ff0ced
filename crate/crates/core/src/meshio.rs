//! Mesh files: Wavefront OBJ and PLY.
//!
//! OBJ: `v x y z [r g b]` and `f` records (polygons are fan-triangulated,
//! `v/vt/vn` and negative indices accepted). PLY: reads ASCII and binary
//! little-endian; writes binary little-endian with `float` positions and,
//! when the mesh is colored, `uchar` red/green/blue.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Color, Point, TriMesh};
use crate::raster::io::quantize8;

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let f = BufReader::new(File::open(path)?);
    match extension(path).as_str() {
        "obj" => read_obj(f),
        "ply" => read_ply(f),
        other => Err(Error::Format(format!("unsupported mesh extension `{other}`"))),
    }
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    let mut f = BufWriter::new(File::create(path)?);
    match extension(path).as_str() {
        "obj" => write_obj(&mut f, mesh)?,
        "ply" => write_ply(&mut f, mesh)?,
        other => return Err(Error::Format(format!("unsupported mesh extension `{other}`"))),
    }
    f.flush()?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn read_obj(r: impl BufRead) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut colors: Vec<Color> = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |what: &str| Error::Format(format!("obj line {}: {what}", n + 1));
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let nums: Vec<f64> = it
                    .map(|s| s.parse::<f64>().map_err(|_| bad("bad number")))
                    .collect::<Result<_>>()?;
                if nums.len() < 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                vertices.push(Point::new(nums[0], nums[1], nums[2]));
                if nums.len() >= 6 {
                    colors.push([nums[3] as f32, nums[4] as f32, nums[5] as f32]);
                }
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| {
                        let i: i64 = s
                            .split('/')
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| bad("bad face index"))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        usize::try_from(resolved).map_err(|_| bad("face index out of range"))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad("face needs 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let n = vertices.len();
    let mut mesh = TriMesh::new(vertices, faces)?;
    if !colors.is_empty() {
        if colors.len() != n {
            return Err(Error::Format("obj colors given for only some vertices".into()));
        }
        mesh.set_colors(colors)?;
    }
    Ok(mesh)
}

pub fn write_obj(w: &mut impl Write, mesh: &TriMesh) -> Result<()> {
    let colors = mesh.colors();
    for (i, v) in mesh.vertices().iter().enumerate() {
        match colors {
            Some(c) => writeln!(w, "v {} {} {} {} {} {}", v.x, v.y, v.z, c[i][0], c[i][1], c[i][2])?,
            None => writeln!(w, "v {} {} {}", v.x, v.y, v.z)?,
        }
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply(w: &mut impl Write, mesh: &TriMesh) -> Result<()> {
    let colored = mesh.colors().is_some();
    writeln!(w, "ply\nformat binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    if colored {
        writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.face_count())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    let mut buf = Vec::with_capacity(mesh.vertex_count() * 15 + mesh.face_count() * 13);
    for (i, v) in mesh.vertices().iter().enumerate() {
        for a in 0..3 {
            buf.extend_from_slice(&(v[a] as f32).to_le_bytes());
        }
        if let Some(c) = mesh.colors() {
            buf.extend(c[i].iter().map(|x| quantize8(*x)));
        }
    }
    for f in mesh.faces() {
        buf.push(3);
        for &i in f {
            let i = i32::try_from(i).map_err(|_| Error::Format("too many vertices for ply".into()))?;
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
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
            _ => return Err(Error::Format(format!("ply: unknown scalar type `{s}`"))),
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

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
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

/// Pulls scalars from either an ASCII token stream or a binary buffer.
enum Source<'a> {
    Ascii(std::str::SplitWhitespace<'a>),
    Binary(&'a [u8]),
}

impl Source<'_> {
    fn next(&mut self, t: Scalar) -> Result<f64> {
        match self {
            Source::Ascii(it) => it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format("ply: truncated ascii body".into())),
            Source::Binary(buf) => {
                let n = t.size();
                if buf.len() < n {
                    return Err(Error::Format("ply: truncated binary body".into()));
                }
                let v = t.decode(&buf[..n]);
                *buf = &buf[n..];
                Ok(v)
            }
        }
    }
}

pub fn read_ply(mut r: impl BufRead) -> Result<TriMesh> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Format("ply: missing magic".into()));
    }
    let mut ascii = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("ply: header not terminated".into()));
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => ascii = Some(true),
            ["format", "binary_little_endian", _] => ascii = Some(false),
            ["format", other, _] => return Err(Error::Format(format!("ply: unsupported format `{other}`"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Format(format!("ply: bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("ply: property before element".into()))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(ct)?, Scalar::parse(it)?)),
            ["property", t, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("ply: property before element".into()))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(t)?)),
            _ => {}
        }
    }
    let ascii = ascii.ok_or_else(|| Error::Format("ply: missing format line".into()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let text;
    let mut src = if ascii {
        text = String::from_utf8(body).map_err(|_| Error::Format("ply: ascii body is not utf-8".into()))?;
        Source::Ascii(text.split_whitespace())
    } else {
        Source::Binary(&body)
    };

    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [0.0; 3];
            let mut rgb = [None; 3];
            for p in &el.props {
                match p {
                    Property::Scalar(name, t) => {
                        let v = src.next(*t)?;
                        let scale = if *t == Scalar::U8 { 255.0 } else { 1.0 };
                        match name.as_str() {
                            "x" => pos[0] = v,
                            "y" => pos[1] = v,
                            "z" => pos[2] = v,
                            "red" | "r" => rgb[0] = Some((v / scale) as f32),
                            "green" | "g" => rgb[1] = Some((v / scale) as f32),
                            "blue" | "b" => rgb[2] = Some((v / scale) as f32),
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = src.next(*ct)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(src.next(*it)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(Error::Format("ply: face with fewer than 3 vertices".into()));
                            }
                            if idx.iter().any(|i| *i < 0.0) {
                                return Err(Error::Format("ply: negative face index".into()));
                            }
                            for k in 1..n - 1 {
                                faces.push([idx[0] as usize, idx[k] as usize, idx[k + 1] as usize]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Point::new(pos[0], pos[1], pos[2]));
                if let [Some(r), Some(g), Some(b)] = rgb {
                    colors.push([r, g, b]);
                }
            }
        }
    }
    let n = vertices.len();
    let mut mesh = TriMesh::new(vertices, faces)?;
    if !colors.is_empty() && colors.len() == n {
        mesh.set_colors(colors)?;
    }
    Ok(mesh)
}
