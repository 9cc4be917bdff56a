//! 8-bit image I/O (PNG, binary PGM/PPM). Intensities are mapped linearly
//! between `[0, 255]` on disk and `[0, 1]` in memory.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::imaging::{Raster, ShadowMask};

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn from_u8(v: u8) -> f64 {
    v as f64 / 255.0
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::domain(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") | Some("ppm") | Some("pnm") => Ok(ImageFormat::Pnm),
        _ => Err(Error::domain(format!(
            "unsupported image extension: {}",
            path.display()
        ))),
    }
}

/// Encodes a raster in the format implied by the file extension.
pub fn encode_raster(img: &Raster, format: ImageFormat) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = if img.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    let res = match format {
        ImageFormat::Png => {
            image::codecs::png::PngEncoder::new(&mut out).write_image(&bytes, w, h, color)
        }
        _ => {
            let subtype = if img.channels() == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(&mut out)
                .with_subtype(subtype)
                .write_image(&bytes, w, h, color)
        }
    };
    res.map_err(|e| Error::Image {
        path: "<memory>".into(),
        source: e,
    })?;
    Ok(out)
}

pub fn write_raster(path: &Path, img: &Raster) -> Result<()> {
    let bytes = encode_raster(img, format_for(path)?)?;
    atomic_write(path, &bytes)
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let format = format_for(path)?;
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let dynimg = image::load(Cursor::new(raw), format).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let gray = matches!(
        dynimg,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLumaA16(_)
    );
    if gray {
        let data = dynimg.to_luma8().into_raw().into_iter().map(from_u8).collect();
        Raster::new(h, w, 1, data)
    } else {
        let data = dynimg.to_rgb8().into_raw().into_iter().map(from_u8).collect();
        Raster::new(h, w, 3, data)
    }
}

/// Masks are stored as single-channel images with values 0 / 255.
pub fn write_mask(path: &Path, mask: &ShadowMask) -> Result<()> {
    write_raster(path, &mask.to_raster())
}

pub fn read_mask(path: &Path) -> Result<ShadowMask> {
    Ok(ShadowMask::from_raster(&read_raster(path)?))
}
