//! PNG input and output for images, trimaps and mattes.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb as PixelRgb, RgbImage};

use crate::error::{MattingError, Result};
use crate::types::{ImageRgb, Matte, Region, Trimap};

/// Sample depth of written PNGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(Self::Eight),
            16 => Ok(Self::Sixteen),
            other => Err(MattingError::InvalidParam(format!(
                "bit depth must be 8 or 16, got {other}"
            ))),
        }
    }
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    img.color().bytes_per_pixel() / img.color().channel_count() > 1
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if is_sixteen_bit(&img) {
        img.into_rgb16()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 65535.0))
            .collect()
    } else {
        img.into_rgb8()
            .pixels()
            .map(|p| p.0.map(|v| f64::from(v) / 255.0))
            .collect()
    };
    ImageRgb::new(w, h, data)
}

/// Grayscale values in `[0, 1]` with the image dimensions.
pub fn load_gray(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if is_sixteen_bit(&img) {
        img.into_luma16()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 65535.0)
            .collect()
    } else {
        img.into_luma8().pixels().map(|p| f64::from(p.0[0]) / 255.0).collect()
    };
    Ok((w, h, data))
}

/// Gray levels of at least 0.8 are foreground, at most 0.2 background, the rest unknown.
pub fn load_trimap(path: impl AsRef<Path>) -> Result<Trimap> {
    let (w, h, data) = load_gray(path)?;
    Trimap::new(w, h, data.into_iter().map(Region::from_gray).collect())
}

pub fn load_matte(path: impl AsRef<Path>) -> Result<Matte> {
    let (w, h, data) = load_gray(path)?;
    Matte::new(w, h, data)
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn save_gray(path: &Path, width: usize, height: usize, values: &[f64], depth: BitDepth) -> Result<()> {
    let (w, h) = (width as u32, height as u32);
    match depth {
        BitDepth::Eight => {
            let buf: GrayImage = ImageBuffer::from_fn(w, h, |x, y| Luma([quantize8(values[(y * w + x) as usize])]));
            buf.save(path)?;
        }
        BitDepth::Sixteen => {
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_fn(w, h, |x, y| Luma([quantize16(values[(y * w + x) as usize])]));
            buf.save(path)?;
        }
    }
    Ok(())
}

pub fn save_matte(matte: &Matte, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    save_gray(path.as_ref(), matte.width(), matte.height(), matte.values(), depth)
}

/// Writes F as white, B as black and U as mid gray.
pub fn save_trimap(trimap: &Trimap, path: impl AsRef<Path>) -> Result<()> {
    let values: Vec<f64> = trimap.labels().iter().map(|r| r.to_gray()).collect();
    save_gray(path.as_ref(), trimap.width(), trimap.height(), &values, BitDepth::Eight)
}

pub fn save_image(image: &ImageRgb, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let px = |x: u32, y: u32| image.at(x as usize, y as usize);
    match depth {
        BitDepth::Eight => {
            let buf: RgbImage = ImageBuffer::from_fn(w, h, |x, y| PixelRgb(px(x, y).map(quantize8)));
            buf.save(path.as_ref())?;
        }
        BitDepth::Sixteen => {
            let buf: ImageBuffer<PixelRgb<u16>, Vec<u16>> =
                ImageBuffer::from_fn(w, h, |x, y| PixelRgb(px(x, y).map(quantize16)));
            buf.save(path.as_ref())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageRgb::from_fn(5, 3, |x, y| [x as f64 / 255.0, y as f64 * 3.0 / 255.0, 1.0]).unwrap();
        let path = dir.path().join("img.png");
        save_image(&img, &path, BitDepth::Eight).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);

        let matte = Matte::from_fn(4, 4, |x, y| ((x * 4 + y) * 17) as f64 / 255.0);
        let path = dir.path().join("matte.png");
        save_matte(&matte, &path, BitDepth::Eight).unwrap();
        assert_eq!(load_matte(&path).unwrap(), matte);
    }

    #[test]
    fn sixteen_bit_keeps_precision() {
        let dir = tempfile::tempdir().unwrap();
        let matte = Matte::from_fn(7, 2, |x, _| x as f64 / 7.0);
        let path = dir.path().join("m16.png");
        save_matte(&matte, &path, BitDepth::Sixteen).unwrap();
        let back = load_matte(&path).unwrap();
        for (a, b) in matte.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn trimap_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tri = Trimap::from_fn(6, 2, |x, _| match x % 3 {
            0 => Region::Foreground,
            1 => Region::Unknown,
            _ => Region::Background,
        });
        let path = dir.path().join("tri.png");
        save_trimap(&tri, &path).unwrap();
        assert_eq!(load_trimap(&path).unwrap(), tri);
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(load_image("/nonexistent/x.png").is_err());
        assert!(BitDepth::from_bits(12).is_err());
    }
}
