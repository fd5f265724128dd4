//! On-disk formats: 16-bit PCM WAV, binary PNM, a raw f64 matrix dump,
//! flat `key=value` text and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use ndarray::Array2;

use crate::audio::AudioClip;
use crate::geometry::Pose;
use crate::imagery::{LabelMask, RgbImage};
use crate::{Error, Result};

/// Magic of the f64 matrix dump; followed by rows and cols (u32 LE) and
/// the values row-major (f64 LE).
pub const MATRIX_MAGIC: &[u8; 8] = b"TSF64MAT";

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Mono 16-bit PCM. Samples are clamped to [-1, 1] and scaled by 32767.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec).map_err(|e| Error::format(path, e.to_string()))?;
        for &s in &clip.samples {
            w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        w.finalize().map_err(|e| Error::format(path, e.to_string()))?;
    }
    write_bytes(path, &buf.into_inner())
}

/// Reads a mono 16-bit PCM file; any other layout is a format error.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = read_bytes(path)?;
    let mut r = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::format(path, e.to_string()))?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::format(
            path,
            format!(
                "expected mono 16-bit PCM, found {} channel(s) at {} bits",
                spec.channels, spec.bits_per_sample
            ),
        ));
    }
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32767.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    AudioClip::new(samples, spec.sample_rate).map_err(|e| Error::format(path, e.to_string()))
}

fn write_pnm(path: &Path, data: &[u8], w: usize, h: usize, color: bool) -> Result<()> {
    let mut buf = Vec::new();
    let (subtype, ty) = if color {
        (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
    } else {
        (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8)
    };
    PnmEncoder::new(&mut buf)
        .with_subtype(subtype)
        .write_image(data, w as u32, h as u32, ty)
        .map_err(|e| Error::format(path, e.to_string()))?;
    write_bytes(path, &buf)
}

fn read_pnm(path: &Path) -> Result<DynamicImage> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let dec = PnmDecoder::new(BufReader::new(file)).map_err(|e| Error::format(path, e.to_string()))?;
    DynamicImage::from_decoder(dec).map_err(|e| Error::format(path, e.to_string()))
}

/// Binary PPM (P6).
pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    write_pnm(path, &img.data, img.width, img.height, true)
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    match read_pnm(path)? {
        DynamicImage::ImageRgb8(img) => Ok(RgbImage {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        }),
        _ => Err(Error::format(path, "expected an 8-bit color pixmap (P6)")),
    }
}

/// Binary PGM (P5) of raw byte values.
pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    write_pnm(path, data, width, height, false)
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    match read_pnm(path)? {
        DynamicImage::ImageLuma8(img) => Ok((img.width() as usize, img.height() as usize, img.into_raw())),
        _ => Err(Error::format(path, "expected an 8-bit graymap (P5)")),
    }
}

pub fn write_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    write_pgm(path, mask.width, mask.height, &mask.data)
}

pub fn read_mask(path: &Path) -> Result<LabelMask> {
    let (width, height, data) = read_pgm(path)?;
    Ok(LabelMask { width, height, data })
}

pub fn encode_matrix(m: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    if bytes.len() < 16 || &bytes[..8] != MATRIX_MAGIC {
        return Err(Error::format(path, "missing matrix header"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(Error::format(path, format!("{rows}x{cols} matrix needs {} bytes, found {}", rows * cols * 8, body.len())));
    }
    let vals = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), vals).expect("length checked"))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_bytes(path, &encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    decode_matrix(&read_bytes(path)?, path)
}

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; keys may not repeat.
pub fn parse_kv(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected key=value", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::format(path, format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::format(path, format!("line {}: duplicate key {k}", n + 1)));
        }
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_kv(&read_text(path)?, path)
}

pub fn format_kv(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Writes a CSV table with a header row.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
    I: IntoIterator<Item = R>,
{
    let mut w = csv::Writer::from_writer(BufWriter::new(Vec::new()));
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let buf = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    let mut bytes = buf.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    bytes.flush().ok();
    write_bytes(path, &bytes)
}

/// Reads a CSV table whose header must equal `header`.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let bytes = read_bytes(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let err = |e: csv::Error| Error::format(path, e.to_string());
    let found: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::format(path, format!("expected columns {header:?}, found {found:?}")));
    }
    r.records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()).map_err(err))
        .collect()
}

/// Parses one CSV cell.
pub fn cell<T: std::str::FromStr>(row: &[String], i: usize, path: &Path) -> Result<T> {
    row.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::format(path, format!("bad value in column {i} of row {row:?}")))
}

pub const POSE_COLUMNS: [&str; 8] = ["timestamp_s", "x_m", "y_m", "z_m", "qx", "qy", "qz", "qw"];

pub fn write_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    write_csv(
        path,
        &POSE_COLUMNS,
        poses.iter().map(|p| {
            let q = p.quat_xyzw();
            [p.timestamp_s, p.position.x, p.position.y, p.position.z, q[0], q[1], q[2], q[3]].map(|v| v.to_string())
        }),
    )
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    read_csv(path, &POSE_COLUMNS)?
        .iter()
        .map(|row| {
            let v: Vec<f64> = (0..8).map(|i| cell(row, i, path)).collect::<Result<_>>()?;
            Pose::from_components(v[0], [v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]]).map_err(|e| Error::format(path, e.to_string()))
        })
        .collect()
}
