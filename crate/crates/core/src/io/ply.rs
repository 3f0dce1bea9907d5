//! PLY reader/writer for point clouds.
//!
//! The writer emits binary little-endian by default, with `double`
//! properties when the scalar is `f64` so coordinates round-trip
//! bit-exactly. The reader handles ascii, binary little- and big-endian
//! headers, the x/y/z, nx/ny/nz and red/green/blue properties, and skips
//! anything else by size.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::real::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

/// A parsed PLY vertex element: cloud plus optional per-point colors.
#[derive(Debug, Clone)]
pub struct PlyData<T> {
    pub cloud: PointCloud<T>,
    pub colors: Option<Vec<[u8; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarKind {
    F32,
    F64,
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
}

impl ScalarKind {
    fn parse(token: &str) -> Option<Self> {
        match token {
            "float" | "float32" => Some(ScalarKind::F32),
            "double" | "float64" => Some(ScalarKind::F64),
            "uchar" | "uint8" => Some(ScalarKind::U8),
            "char" | "int8" => Some(ScalarKind::I8),
            "ushort" | "uint16" => Some(ScalarKind::U16),
            "short" | "int16" => Some(ScalarKind::I16),
            "uint" | "uint32" => Some(ScalarKind::U32),
            "int" | "int32" => Some(ScalarKind::I32),
            _ => None,
        }
    }

}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: ScalarKind,
}

enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

/// Write `cloud` (and optional colors) to a PLY file.
pub fn write_ply<T: Real>(
    path: impl AsRef<Path>,
    cloud: &PointCloud<T>,
    colors: Option<&[[u8; 3]]>,
    encoding: PlyEncoding,
) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                got: c.len(),
            });
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    let scalar = if std::mem::size_of::<T>() == 8 {
        "double"
    } else {
        "float"
    };
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt} 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property {scalar} {axis}")?;
    }
    if cloud.normals.is_some() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(w, "property {scalar} {axis}")?;
        }
    }
    if colors.is_some() {
        for ch in ["red", "green", "blue"] {
            writeln!(w, "property uchar {ch}")?;
        }
    }
    writeln!(w, "end_header")?;

    let f64_scalar = scalar == "double";
    for i in 0..cloud.len() {
        let mut row: Vec<f64> = cloud.points[i].iter().map(|v| v.to_f64().unwrap()).collect();
        if let Some(ns) = &cloud.normals {
            row.extend(ns[i].iter().map(|v| v.to_f64().unwrap()));
        }
        match encoding {
            PlyEncoding::Ascii => {
                let mut line = String::new();
                for (k, v) in row.iter().enumerate() {
                    if k > 0 {
                        line.push(' ');
                    }
                    if f64_scalar {
                        line.push_str(&format!("{v}"));
                    } else {
                        line.push_str(&format!("{}", *v as f32));
                    }
                }
                if let Some(c) = colors {
                    line.push_str(&format!(" {} {} {}", c[i][0], c[i][1], c[i][2]));
                }
                writeln!(w, "{line}")?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in &row {
                    if f64_scalar {
                        w.write_f64::<LittleEndian>(*v)?;
                    } else {
                        w.write_f32::<LittleEndian>(*v as f32)?;
                    }
                }
                if let Some(c) = colors {
                    w.write_all(&c[i])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read the vertex element of a PLY file.
pub fn read_ply<T: Real>(path: impl AsRef<Path>) -> Result<PlyData<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|_| Error::MissingAsset(path.to_path_buf()))?;
    let mut reader = BufReader::new(file);

    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Format(format!(
            "{}: not a PLY file (missing magic)",
            path.display()
        )));
    }

    let mut format = None;
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<Property> = Vec::new();
    let mut in_vertex_element = false;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Format(format!(
                "{}: header ended before end_header",
                path.display()
            )));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["comment", ..] | [] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    "binary_big_endian" => Format::BinaryBe,
                    other => {
                        return Err(Error::Format(format!("unknown PLY format '{other}'")));
                    }
                });
            }
            ["element", "vertex", count] => {
                in_vertex_element = true;
                vertex_count = Some(count.parse().map_err(|_| {
                    Error::Format(format!("bad vertex count '{count}'"))
                })?);
            }
            ["element", ..] => {
                // later elements (faces etc.) are ignored; vertices come first
                in_vertex_element = false;
            }
            ["property", "list", ..] => {
                if in_vertex_element {
                    return Err(Error::Format(
                        "list properties on vertices are not supported".into(),
                    ));
                }
            }
            ["property", kind, name] => {
                if in_vertex_element {
                    let kind = ScalarKind::parse(kind).ok_or_else(|| {
                        Error::Format(format!("unsupported property type '{kind}'"))
                    })?;
                    properties.push(Property {
                        name: (*name).to_string(),
                        kind,
                    });
                }
            }
            ["end_header"] => break,
            other => {
                return Err(Error::Format(format!(
                    "unrecognized header line: {:?}",
                    other.join(" ")
                )));
            }
        }
    }

    let format = format.ok_or_else(|| Error::Format("missing format line".into()))?;
    let n = vertex_count.ok_or_else(|| Error::Format("missing vertex element".into()))?;

    let find = |name: &str| properties.iter().position(|p| p.name == name);
    let (px, py, pz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Format("vertex element lacks x/y/z".into())),
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };

    let mut points = Vec::with_capacity(n);
    let mut normals = normal_idx.map(|_| Vec::with_capacity(n));
    let mut colors = color_idx.map(|_| Vec::with_capacity(n));

    let mut row = vec![0.0f64; properties.len()];
    for vi in 0..n {
        match format {
            Format::Ascii => {
                line.clear();
                loop {
                    if reader.read_line(&mut line)? == 0 {
                        return Err(Error::Format(format!("vertex {vi}: unexpected EOF")));
                    }
                    if !line.trim().is_empty() {
                        break;
                    }
                    line.clear();
                }
                let mut it = line.split_whitespace();
                for (k, prop) in properties.iter().enumerate() {
                    let tok = it.next().ok_or_else(|| {
                        Error::Format(format!("vertex {vi}: missing '{}' value", prop.name))
                    })?;
                    row[k] = tok.parse().map_err(|_| {
                        Error::Format(format!("vertex {vi}: bad number '{tok}'"))
                    })?;
                }
            }
            Format::BinaryLe | Format::BinaryBe =>
            {
                #[allow(clippy::needless_range_loop)]
                for k in 0..properties.len() {
                    row[k] = read_binary_scalar(
                        &mut reader,
                        properties[k].kind,
                        matches!(format, Format::BinaryBe),
                    )
                    .map_err(|_| Error::Format(format!("vertex {vi}: unexpected EOF")))?;
                }
            }
        }
        points.push([real::<T>(row[px]), real(row[py]), real(row[pz])]);
        if let (Some((a, b, c)), Some(ns)) = (normal_idx, normals.as_mut()) {
            ns.push([real::<T>(row[a]), real(row[b]), real(row[c])]);
        }
        if let (Some((r, g, b)), Some(cs)) = (color_idx, colors.as_mut()) {
            cs.push([row[r] as u8, row[g] as u8, row[b] as u8]);
        }
    }

    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ply".to_string());
    let mut cloud = PointCloud::new(points, source_id);
    cloud.normals = normals;
    Ok(PlyData { cloud, colors })
}

fn read_binary_scalar(
    r: &mut impl Read,
    kind: ScalarKind,
    big_endian: bool,
) -> std::io::Result<f64> {
    macro_rules! rd {
        ($m:ident) => {
            if big_endian {
                r.$m::<BigEndian>()? as f64
            } else {
                r.$m::<LittleEndian>()? as f64
            }
        };
    }
    Ok(match kind {
        ScalarKind::F32 => rd!(read_f32),
        ScalarKind::F64 => rd!(read_f64),
        ScalarKind::U8 => r.read_u8()? as f64,
        ScalarKind::I8 => r.read_i8()? as f64,
        ScalarKind::U16 => rd!(read_u16),
        ScalarKind::I16 => rd!(read_i16),
        ScalarKind::U32 => rd!(read_u32),
        ScalarKind::I32 => rd!(read_i32),
    })
}

/// Quantize a heat value in [0,1] to the red channel.
pub fn heat_to_red(heat: f64) -> u8 {
    (heat.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Dequantize a red channel byte back to heat.
pub fn red_to_heat(red: u8) -> f64 {
    red as f64 / 255.0
}
