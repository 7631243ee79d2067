//! Grayscale image files (binary PGM, 8-bit PNG) and CSV reports.
//!
//! Pixel bytes map to intensities by `/255`. Writing clamps to `[0, 1]`,
//! scales by 255 and rounds half to even.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "MTV_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary PGM (`P5`), maxval 255.
    Pgm,
    /// 8-bit grayscale PNG.
    Png,
}

impl ImageFormat {
    /// Format implied by the file extension; anything but `.png` is PGM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "png" => ImageFormat::Png,
            _ => ImageFormat::Pgm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFile {
    pub path: PathBuf,
    pub format: ImageFormat,
    pub width: usize,
    pub height: usize,
}

/// Reads a grayscale image; the format is sniffed from the file contents.
pub fn load_image(path: impl AsRef<Path>) -> Result<PixelImage> {
    load_image_file(path).map(|(img, _)| img)
}

pub fn load_image_file(path: impl AsRef<Path>) -> Result<(PixelImage, ImageFile)> {
    let path = path.as_ref();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(MtvError::NotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    let (format, width, height, pixels) = if bytes.starts_with(b"P5") {
        let (w, h, data) = parse_pgm(&bytes)?;
        (ImageFormat::Pgm, w, h, data)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        let (w, h, data) = decode_png(&bytes)?;
        (ImageFormat::Png, w, h, data)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        return Err(MtvError::UnsupportedFormat(
            "color PPM; convert to 8-bit grayscale (e.g. a P5 PGM) first".into(),
        ));
    } else {
        return Err(MtvError::UnsupportedFormat(format!(
            "{} is neither a binary PGM nor a PNG",
            path.display()
        )));
    };
    let img = PixelImage::from_vec(height, width, pixels.into_iter().map(|b| b as f64 / 255.0).collect())?;
    Ok((
        img,
        ImageFile {
            path: path.to_path_buf(),
            format,
            width,
            height,
        },
    ))
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(MtvError::CorruptImage("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MtvError::CorruptImage("malformed PGM header field".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(MtvError::UnsupportedFormat(format!(
            "PGM maxval {maxval}; only 8-bit (maxval 255) is supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(MtvError::CorruptImage("PGM with zero size".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(MtvError::CorruptImage("missing separator after PGM header".into()));
    }
    pos += 1;
    let need = width * height;
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| MtvError::CorruptImage(format!("expected {need} pixel bytes")))?;
    Ok((width, height, data.to_vec()))
}

fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| MtvError::CorruptImage(e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(MtvError::UnsupportedFormat(format!(
            "PNG color type {:?}; only 8-bit grayscale is supported, convert the image first",
            other.color()
        ))),
    }
}

/// Intensity to byte: clamp to `[0, 1]`, scale by 255, round half to even.
pub fn quantize_byte(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round_ties_even() as u8
}

/// Writes `img` as PNG when the extension is `.png`, binary PGM otherwise.
pub fn save_image(img: &PixelImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.as_slice().iter().map(|&v| quantize_byte(v)).collect();
    match ImageFormat::from_path(path) {
        ImageFormat::Pgm => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            write!(w, "P5\n{} {}\n255\n", img.cols(), img.rows())?;
            w.write_all(&bytes)?;
            w.flush()?;
        }
        ImageFormat::Png => {
            let buf = image::GrayImage::from_raw(img.cols() as u32, img.rows() as u32, bytes)
                .expect("buffer matches dimensions");
            buf.save_with_format(path, image::ImageFormat::Png)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
        }
    }
    Ok(())
}

/// Image files (`.pgm`, `.png`) directly inside `dir`, sorted by name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(MtvError::NotFound(dir.to_path_buf()));
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// One result line: one `(image, σ, λ, θ)` run of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub image_id: String,
    pub sigma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub psnr_db: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    pub objective: f64,
    /// `tv`, `mtv`, or the subcommand that produced the row.
    pub method: String,
}

pub const REPORT_HEADER: [&str; 9] = [
    "image_id",
    "sigma",
    "lambda",
    "theta",
    "psnr_db",
    "iterations",
    "runtime_ms",
    "objective",
    "method",
];

/// Writes a header line followed by one line per row.
pub fn write_csv(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())?;
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(MtvError::from)).collect()
}
