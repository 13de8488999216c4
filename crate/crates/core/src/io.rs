//! Dataset files, JSON output and plain-text configuration.
//!
//! Datasets are CSV with one observation per row. Lines starting with `#`
//! are comments. Rows are renormalised to unit length; a row whose norm is
//! off by more than [`NORM_TOLERANCE`] is rejected with its line number.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::sample::DirectionalSample;
use crate::sphere::UnitVector;

/// Largest accepted deviation of a row's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DatasetFormat {
    /// `d` Cartesian coordinates per row.
    #[default]
    Cartesian,
    /// Two columns `theta,phi` in radians (d = 3).
    Spherical,
}

pub fn parse_dataset<R: Read>(reader: R, format: DatasetFormat, source: &str) -> Result<DirectionalSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut dim = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("not a finite number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let point = match format {
            DatasetFormat::Cartesian => {
                if values.len() < 2 {
                    return Err(parse_err(format!("expected at least 2 coordinates, got {}", values.len())));
                }
                let v = DVector::from_vec(values);
                let norm = v.norm();
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(parse_err(format!("row norm {norm} is not within {NORM_TOLERANCE} of 1")));
                }
                UnitVector::from_dvector(v / norm).map_err(|e| parse_err(e.to_string()))?
            }
            DatasetFormat::Spherical => {
                if values.len() != 2 {
                    return Err(parse_err(format!("expected theta,phi, got {} columns", values.len())));
                }
                UnitVector::from_spherical(values[0], values[1])
            }
        };
        match dim {
            None => dim = Some(point.dim()),
            Some(d) if d != point.dim() => {
                return Err(parse_err(format!("expected {d} coordinates, got {}", point.dim())));
            }
            _ => {}
        }
        points.push(point);
    }
    if points.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "dataset has no observations".into(),
        });
    }
    DirectionalSample::new(points, source)
}

pub fn read_dataset(path: &Path, format: DatasetFormat) -> Result<DirectionalSample> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(BufReader::new(file), format, &path.display().to_string())
}

/// Writes one row per point, coordinates with 17 significant digits.
pub fn write_dataset<W: Write>(mut w: W, sample: &DirectionalSample) -> Result<()> {
    let header: Vec<String> = (0..sample.dim()).map(|i| format!("x{}", i + 1)).collect();
    writeln!(w, "# {}", header.join(","))?;
    for p in sample.points() {
        let row: Vec<String> = p.as_slice().iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_dataset_file(path: &Path, sample: &DirectionalSample) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = io::BufWriter::new(file);
    write_dataset(&mut w, sample)?;
    w.flush()?;
    Ok(())
}

/// Round-trip representation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".to_string()
    }
}

/// Pretty JSON formatter printing every float with 17 significant digits.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Pretty-printed JSON with full-precision floats and a trailing newline.
/// Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("JSON serialisation failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Parses either a JSON object or `key = value` lines (`#` comments) into a
/// flat string map. JSON arrays become comma-separated lists.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let object = value.as_object().ok_or_else(|| Error::Parse {
            line: 1,
            message: "config must be a JSON object".into(),
        })?;
        return object
            .iter()
            .map(|(k, v)| Ok((k.clone(), json_scalar(k, v)?)))
            .collect();
    }
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String> {
    use serde_json::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|item| json_scalar(key, item))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.join(",")),
        _ => Err(Error::Parse {
            line: 0,
            message: format!("unsupported value for {key:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_renormalises() {
        let text = "# x,y,z\n0,0,1\n0.6,0.8,0.0004\n\n1.0005,0,0\n";
        let s = parse_dataset(text.as_bytes(), DatasetFormat::Cartesian, "t").unwrap();
        assert_eq!(s.len(), 3);
        for p in s.points() {
            assert!((p.coords().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let err = parse_dataset("# h\n0,0,1\n0,0,2\n".as_bytes(), DatasetFormat::Cartesian, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_dataset("0,0,1\n0,x,1\n".as_bytes(), DatasetFormat::Cartesian, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = parse_dataset("0,0,1\n0,1\n".as_bytes(), DatasetFormat::Cartesian, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(parse_dataset("# only a header\n".as_bytes(), DatasetFormat::Cartesian, "t").is_err());
    }

    #[test]
    fn spherical_columns() {
        let s = parse_dataset("0.5,1.0\n".as_bytes(), DatasetFormat::Spherical, "t").unwrap();
        assert_eq!(s.points()[0], UnitVector::from_spherical(0.5, 1.0));
    }

    #[test]
    fn dataset_roundtrip_keeps_full_precision() {
        let pts = vec![
            UnitVector::from_spherical(0.3, 1.7),
            UnitVector::from_spherical(2.9, -0.4),
        ];
        let s = DirectionalSample::new(pts, "t").unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &s).unwrap();
        let back = parse_dataset(buf.as_slice(), DatasetFormat::Cartesian, "t").unwrap();
        for (a, b) in s.points().iter().zip(back.points()) {
            assert!((a.coords() - b.coords()).amax() < 1e-15);
        }
    }

    #[test]
    fn json_uses_full_precision() {
        #[derive(Serialize)]
        struct T {
            a: f64,
            b: Vec<f64>,
            n: usize,
            bad: f64,
        }
        let json = to_json_string(&T {
            a: 0.1,
            b: vec![1.0, -2.5e-300],
            n: 3,
            bad: f64::NAN,
        })
        .unwrap();
        assert!(json.contains("\"a\": 1.0000000000000001e-1"), "{json}");
        assert!(json.contains("\"n\": 3"));
        assert!(json.contains("\"bad\": null"));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.1));
        assert_eq!(v["b"][1].as_f64(), Some(-2.5e-300));
    }

    #[test]
    fn config_formats_agree() {
        let kv = parse_config("# design\nid = l4\nreplications=10 # short\ntaus = 0.25,0.5\n").unwrap();
        let js = parse_config(r#"{"id": "l4", "replications": 10, "taus": [0.25, 0.5]}"#).unwrap();
        assert_eq!(kv, js);
        assert!(parse_config("no equals sign").is_err());
    }
}
