//! PNG/TIFF reading and PNG writing for channels, masks and composites.

use std::path::Path;

use cellquad_core::maskimport::InstanceMask;
use cellquad_core::raster::{GrayImage16, GrayImage8, Plane, RgbImage};
use image::{DynamicImage, ExtendedColorType, ImageBuffer, Luma};

use crate::error::{Error, Result};

/// A single-channel microscope image at its native bit depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Channel {
    Eight(GrayImage8),
    Sixteen(GrayImage16),
}

impl Channel {
    pub fn width(&self) -> u32 {
        match self {
            Channel::Eight(p) => p.width(),
            Channel::Sixteen(p) => p.width(),
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            Channel::Eight(p) => p.height(),
            Channel::Sixteen(p) => p.height(),
        }
    }

    /// Percentile window mapped onto 0..=255.
    pub fn stretch(&self, p_low: f64, p_high: f64) -> Result<GrayImage8> {
        Ok(match self {
            Channel::Eight(p) => cellquad_core::raster::percentile_stretch(p, p_low, p_high)?,
            Channel::Sixteen(p) => cellquad_core::raster::percentile_stretch(p, p_low, p_high)?,
        })
    }

    /// Plain bit-depth reduction (top byte of 16-bit data).
    pub fn to_u8(&self) -> GrayImage8 {
        match self {
            Channel::Eight(p) => p.clone(),
            Channel::Sixteen(p) => p.map(|v| (v >> 8) as u8),
        }
    }
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn plane<P: Copy>(path: &Path, w: u32, h: u32, samples: Vec<P>) -> Result<Plane<P>> {
    Plane::from_samples(w, h, samples).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_channel(path: &Path) -> Result<Channel> {
    let img = open(path)?;
    let (w, h) = (img.width(), img.height());
    Ok(match img {
        DynamicImage::ImageLuma8(b) => Channel::Eight(plane(path, w, h, b.into_raw())?),
        DynamicImage::ImageLuma16(b) => Channel::Sixteen(plane(path, w, h, b.into_raw())?),
        other if other.color().bytes_per_pixel() / other.color().channel_count() > 1 => {
            Channel::Sixteen(plane(path, w, h, other.into_luma16().into_raw())?)
        }
        other => Channel::Eight(plane(path, w, h, other.into_luma8().into_raw())?),
    })
}

/// Instance mask: pixel value = instance id, 0 = background.
pub fn read_mask(path: &Path) -> Result<InstanceMask> {
    let img = open(path)?;
    let (w, h) = (img.width(), img.height());
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::Image {
                path: path.to_path_buf(),
                message: format!("mask must be single-channel 8/16-bit, got {:?}", other.color()),
            })
        }
    };
    plane(path, w, h, labels)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    let samples = img.into_raw().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    plane(path, w, h, samples)
}

pub fn dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn save(path: &Path, bytes: &[u8], w: u32, h: u32, color: ExtendedColorType) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image::save_buffer_with_format(path, bytes, w, h, color, image::ImageFormat::Png).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    let bytes: Vec<u8> = img.samples().iter().flatten().copied().collect();
    save(path, &bytes, img.width(), img.height(), ExtendedColorType::Rgb8)
}

pub fn write_gray16_png(path: &Path, img: &GrayImage16) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width(), img.height(), img.samples().to_vec()).expect("sample count checked by Plane");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Masks are stored as 16-bit PNG; ids above 65535 are rejected.
pub fn write_mask_png(path: &Path, mask: &InstanceMask) -> Result<()> {
    let mut samples = Vec::with_capacity(mask.samples().len());
    for &v in mask.samples() {
        samples.push(u16::try_from(v).map_err(|_| Error::Data(format!("{}: instance id {v} exceeds 16 bits", path.display())))?);
    }
    let plane = GrayImage16::from_samples(mask.width(), mask.height(), samples)?;
    write_gray16_png(path, &plane)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = GrayImage16::from_samples(3, 2, vec![0, 1, 256, 4095, 40000, 65535]).unwrap();
        write_gray16_png(&p, &img).unwrap();
        assert_eq!(read_channel(&p).unwrap(), Channel::Sixteen(img.clone()));
        let mask = read_mask(&p).unwrap();
        assert_eq!(mask.samples(), &[0, 1, 256, 4095, 40000, 65535]);
        assert_eq!(dimensions(&p).unwrap(), (3, 2));
    }

    #[test]
    fn rgb_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let img = RgbImage::from_samples(2, 1, vec![[1, 2, 3], [250, 0, 9]]).unwrap();
        write_rgb_png(&p, &img).unwrap();
        assert_eq!(read_rgb(&p).unwrap(), img);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_channel(Path::new("/nonexistent/x.png")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("/nonexistent/x.png"));
    }

    #[test]
    fn tiff_channel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tif");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(2, 2, vec![10, 20, 30, 40]).unwrap();
        buf.save_with_format(&p, image::ImageFormat::Tiff).unwrap();
        match read_channel(&p).unwrap() {
            Channel::Sixteen(c) => assert_eq!(c.samples(), &[10, 20, 30, 40]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
