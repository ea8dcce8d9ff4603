//! Point-cloud files: whitespace-separated text (`xyz`, `xyzl`) and binary
//! little-endian PLY.
//!
//! Text output uses nine significant digits in scientific notation. PLY
//! stores coordinates as `float32`, so a coordinate survives a PLY round
//! trip exactly once it has been rounded to single precision.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{LabeledPointCloud, Point3, PointCloud, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xyz,
    Xyzl,
    Ply,
}

impl Format {
    /// Guess from the file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Format> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" => Ok(Format::Xyz),
            "xyzl" => Ok(Format::Xyzl),
            "ply" => Ok(Format::Ply),
            other => Err(Error::invalid(format!("unknown cloud format `{other}`"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Xyz => "xyz",
            Format::Xyzl => "xyzl",
            Format::Ply => "ply",
        })
    }
}

/// What a file held.
#[derive(Debug, Clone, PartialEq)]
pub enum CloudData {
    Plain(PointCloud),
    Labeled(LabeledPointCloud),
}

impl CloudData {
    pub fn cloud(&self) -> &PointCloud {
        match self {
            CloudData::Plain(c) => c,
            CloudData::Labeled(l) => l.cloud(),
        }
    }

    pub fn into_cloud(self) -> PointCloud {
        match self {
            CloudData::Plain(c) => c,
            CloudData::Labeled(l) => l.into_parts().0,
        }
    }

    pub fn len(&self) -> usize {
        self.cloud().len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud().is_empty()
    }
}

impl From<PointCloud> for CloudData {
    fn from(c: PointCloud) -> Self {
        CloudData::Plain(c)
    }
}

impl From<LabeledPointCloud> for CloudData {
    fn from(l: LabeledPointCloud) -> Self {
        CloudData::Labeled(l)
    }
}

pub fn read_cloud(path: impl AsRef<Path>, format: Format) -> Result<CloudData> {
    let file = File::open(path.as_ref())?;
    read_from(BufReader::new(file), format)
}

pub fn write_cloud(cloud: &CloudData, path: impl AsRef<Path>, format: Format) -> Result<()> {
    check_writable(cloud, format)?;
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_to(&mut w, cloud, format)?;
    w.flush()?;
    Ok(())
}

pub fn read_from<R: BufRead>(reader: R, format: Format) -> Result<CloudData> {
    match format {
        Format::Xyz => read_text(reader, false),
        Format::Xyzl => read_text(reader, true),
        Format::Ply => read_ply(reader),
    }
}

pub fn write_to<W: Write>(w: &mut W, cloud: &CloudData, format: Format) -> Result<()> {
    check_writable(cloud, format)?;
    match (format, cloud) {
        (Format::Xyz, CloudData::Plain(c)) => {
            for p in c {
                writeln!(w, "{} {} {}", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z))?;
            }
        }
        (Format::Xyzl, CloudData::Labeled(l)) => {
            for (p, s) in l.iter() {
                writeln!(
                    w,
                    "{} {} {} {}",
                    fmt_coord(p.x),
                    fmt_coord(p.y),
                    fmt_coord(p.z),
                    s.label()
                )?;
            }
        }
        (Format::Ply, _) => write_ply(w, cloud)?,
        _ => unreachable!("rejected by check_writable"),
    }
    Ok(())
}

fn check_writable(cloud: &CloudData, format: Format) -> Result<()> {
    match (format, cloud) {
        (Format::Xyz, CloudData::Labeled(_)) => Err(Error::invalid(
            "xyz cannot store labels; write labeled clouds as xyzl or ply",
        )),
        (Format::Xyzl, CloudData::Plain(_)) => {
            Err(Error::invalid("xyzl requires a labeled point cloud"))
        }
        _ => Ok(()),
    }
}

/// Nine significant digits, locale independent.
pub fn fmt_coord(v: f64) -> String {
    format!("{v:.8e}")
}

fn read_text<R: BufRead>(reader: R, labeled: bool) -> Result<CloudData> {
    let fields = if labeled { 4 } else { 3 };
    let mut points = Vec::new();
    let mut sources = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != fields {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {fields} fields, found {}", tokens.len()),
            });
        }
        let mut values = [0.0f64; 4];
        for (v, tok) in values.iter_mut().zip(&tokens) {
            *v = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("`{tok}` is not a number"),
            })?;
        }
        let p = Point3::new(values[0], values[1], values[2]);
        if !p.is_finite() {
            return Err(Error::validation(Some(lineno), "non-finite coordinate"));
        }
        points.push(p);
        if labeled {
            let source = match values[3] {
                0.0 => Source::Input,
                1.0 => Source::Coarse,
                v => {
                    return Err(Error::validation(
                        Some(lineno),
                        format!("label {v} is not 0 or 1"),
                    ))
                }
            };
            sources.push(source);
        }
    }
    if points.is_empty() {
        return Err(Error::validation(None, "file contains no points"));
    }
    let cloud = PointCloud::new(points)?;
    Ok(if labeled {
        CloudData::Labeled(LabeledPointCloud::new(cloud, sources)?)
    } else {
        CloudData::Plain(cloud)
    })
}

fn write_ply<W: Write>(w: &mut W, cloud: &CloudData) -> Result<()> {
    let labeled = matches!(cloud, CloudData::Labeled(_));
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n",
        cloud.len()
    )?;
    if labeled {
        writeln!(w, "property uchar label")?;
    }
    writeln!(w, "end_header")?;
    match cloud {
        CloudData::Plain(c) => {
            for p in c {
                write_f32s(w, p)?;
            }
        }
        CloudData::Labeled(l) => {
            for (p, s) in l.iter() {
                write_f32s(w, p)?;
                w.write_all(&[s.label()])?;
            }
        }
    }
    Ok(())
}

fn write_f32s<W: Write>(w: &mut W, p: &Point3) -> Result<()> {
    for v in [p.x, p.y, p.z] {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
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

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

struct PlyHeader {
    vertices: usize,
    properties: Vec<(String, Scalar)>,
    lines: usize,
}

fn parse_ply_header<R: BufRead>(reader: &mut R) -> Result<PlyHeader> {
    let mut lines = 0;
    let mut next_line = |reader: &mut R| -> Result<(usize, String)> {
        let mut buf = Vec::new();
        let n = reader.read_until(b'\n', &mut buf)?;
        lines += 1;
        if n == 0 {
            return Err(Error::Parse {
                line: lines,
                message: "unexpected end of PLY header".into(),
            });
        }
        let s = String::from_utf8(buf).map_err(|_| Error::Parse {
            line: lines,
            message: "PLY header is not ASCII".into(),
        })?;
        Ok((lines, s.trim_end_matches(['\n', '\r']).to_string()))
    };

    let (l, magic) = next_line(reader)?;
    if magic.trim() != "ply" {
        return Err(Error::Parse {
            line: l,
            message: "missing `ply` magic".into(),
        });
    }

    let mut vertices = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    let mut seen_element = false;
    loop {
        let (l, line) = next_line(reader)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: l, message };
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(parse_err(format!("unsupported PLY format `{fmt}`")));
                }
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(format!("bad element count `{count}`")))?;
                if *name == "vertex" {
                    if seen_element {
                        return Err(parse_err("vertex must be the first element".into()));
                    }
                    vertices = Some(count);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
                seen_element = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_err("list properties on vertices are not supported".into()));
            }
            ["property", ty, name] => {
                if in_vertex {
                    let scalar = Scalar::parse(ty)
                        .ok_or_else(|| parse_err(format!("unknown property type `{ty}`")))?;
                    properties.push((name.to_string(), scalar));
                }
            }
            ["property", ..] if !in_vertex => {}
            ["end_header"] => break,
            _ => return Err(parse_err(format!("unexpected header line `{line}`"))),
        }
    }

    let vertices = vertices.ok_or_else(|| Error::Parse {
        line: lines,
        message: "no vertex element".into(),
    })?;
    Ok(PlyHeader {
        vertices,
        properties,
        lines,
    })
}

fn read_ply<R: BufRead>(mut reader: R) -> Result<CloudData> {
    let header = parse_ply_header(&mut reader)?;
    let data_line = header.lines + 1;
    let find = |name: &str| header.properties.iter().position(|(n, _)| n == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => {
            return Err(Error::Parse {
                line: header.lines,
                message: "vertex element lacks x, y or z".into(),
            })
        }
    };
    let ilabel = find("label");

    let offsets: Vec<usize> = header
        .properties
        .iter()
        .scan(0, |acc, (_, s)| {
            let o = *acc;
            *acc += s.size();
            Some(o)
        })
        .collect();
    let stride: usize = header.properties.iter().map(|(_, s)| s.size()).sum();
    let field = |rec: &[u8], i: usize| header.properties[i].1.decode(&rec[offsets[i]..]);

    let mut record = vec![0u8; stride];
    let mut points = Vec::with_capacity(header.vertices);
    let mut sources = Vec::new();
    for v in 0..header.vertices {
        reader.read_exact(&mut record).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Parse {
                line: data_line,
                message: format!("file ends inside vertex {v}"),
            },
            _ => Error::Io(e),
        })?;
        let p = Point3::new(field(&record, ix), field(&record, iy), field(&record, iz));
        if !p.is_finite() {
            return Err(Error::validation(
                Some(data_line),
                format!("vertex {v} has a non-finite coordinate"),
            ));
        }
        points.push(p);
        if let Some(il) = ilabel {
            let raw = field(&record, il);
            let source = Source::from_label(raw as u8)
                .filter(|_| raw == 0.0 || raw == 1.0)
                .ok_or_else(|| {
                    Error::validation(Some(data_line), format!("vertex {v} label {raw} is not 0 or 1"))
                })?;
            sources.push(source);
        }
    }
    if points.is_empty() {
        return Err(Error::validation(None, "file contains no points"));
    }
    let cloud = PointCloud::new(points)?;
    Ok(match ilabel {
        Some(_) => CloudData::Labeled(LabeledPointCloud::new(cloud, sources)?),
        None => CloudData::Plain(cloud),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, format: Format) -> Result<CloudData> {
        read_from(text.as_bytes(), format)
    }

    #[test]
    fn reads_plain_xyz() {
        let c = parse("0 0 0\n1 0 0\n", Format::Xyz).unwrap();
        assert_eq!(
            c,
            CloudData::Plain(PointCloud::from_arrays(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap())
        );
    }

    #[test]
    fn comments_and_crlf() {
        let c = parse("# header\r\n0 0 0\r\n\r\n# x\r\n1 2 3\r\n", Format::Xyz).unwrap();
        assert_eq!(c.cloud().points()[1], Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn reads_xyzl_labels() {
        let c = parse("0 0 0 1\n", Format::Xyzl).unwrap();
        match c {
            CloudData::Labeled(l) => assert_eq!(l.sources(), &[Source::Coarse]),
            _ => panic!("expected labeled cloud"),
        }
    }

    #[test]
    fn nan_is_a_validation_error() {
        let err = parse("0 0 nan\n", Format::Xyz).unwrap_err();
        assert!(matches!(err, Error::Validation { line: Some(1), .. }), "{err}");
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse("0 0 0\n1 2\n", Format::Xyz).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("0 0 0\n# c\n1 x 2\n", Format::Xyz).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("0 0 0 2\n", Format::Xyzl).unwrap_err();
        assert!(matches!(err, Error::Validation { line: Some(1), .. }), "{err}");
        let err = parse("0 0 0 a\n", Format::Xyzl).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(parse("# nothing\n", Format::Xyz).is_err());
    }

    #[test]
    fn labeled_cloud_refuses_xyz() {
        let c = PointCloud::from_arrays(&[[0.0; 3]]).unwrap();
        let l = LabeledPointCloud::uniform(c.clone(), Source::Input);
        let mut out = Vec::new();
        assert!(write_to(&mut out, &CloudData::Labeled(l), Format::Xyz).is_err());
        assert!(write_to(&mut out, &CloudData::Plain(c), Format::Xyzl).is_err());
        assert!(out.is_empty());
    }

    #[test]
    fn ply_header_layout() {
        let c = PointCloud::from_arrays(&[[1.0, 2.0, 3.0]]).unwrap();
        let l = LabeledPointCloud::uniform(c, Source::Coarse);
        let mut out = Vec::new();
        write_to(&mut out, &CloudData::Labeled(l.clone()), Format::Ply).unwrap();
        let header_end = out.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        let header = std::str::from_utf8(&out[..header_end]).unwrap();
        assert!(header.contains("format binary_little_endian 1.0"));
        assert!(header.contains("element vertex 1"));
        assert!(header.contains("property uchar label"));
        assert_eq!(out.len() - header_end, 13);
        assert_eq!(read_from(&out[..], Format::Ply).unwrap(), CloudData::Labeled(l));
    }

    #[test]
    fn ply_with_double_coordinates_and_extra_properties() {
        let mut data = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 1\n\
property double x\nproperty double y\nproperty double z\nproperty uchar red\nend_header\n"
            .to_vec();
        for v in [0.1f64, 0.2, 0.3] {
            data.extend_from_slice(&v.to_le_bytes());
        }
        data.push(255);
        let c = read_from(&data[..], Format::Ply).unwrap();
        assert_eq!(c.cloud()[0], Point3::new(0.1, 0.2, 0.3));
    }

    #[test]
    fn truncated_ply_is_a_parse_error() {
        let c = PointCloud::from_arrays(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let mut out = Vec::new();
        write_to(&mut out, &CloudData::Plain(c), Format::Ply).unwrap();
        out.truncate(out.len() - 3);
        assert!(matches!(read_from(&out[..], Format::Ply), Err(Error::Parse { .. })));
        assert!(read_from(&b"ply\nformat ascii 1.0\nend_header\n"[..], Format::Ply).is_err());
    }

    #[test]
    fn format_names() {
        assert_eq!("PLY".parse::<Format>().unwrap(), Format::Ply);
        assert_eq!(Format::from_path(Path::new("a/b.xyzl")), Some(Format::Xyzl));
        assert!("obj".parse::<Format>().is_err());
    }
}
