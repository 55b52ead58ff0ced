//! PNG reading and writing.
//!
//! Colour images are written with 8 bits per channel, quantized by
//! round-half-up (`floor(v * 255 + 0.5)`). Masks are single-channel 0/255.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, LumaA, Rgb, Rgba};

use super::{BinaryMask, RasterImage};
use crate::error::{Error, Result};

#[inline]
pub fn quantize8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) as f64 * 255.0 + 0.5).floor() as u8
}

#[inline]
pub fn quantize16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) as f64 * 65535.0 + 0.5).floor() as u16
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let img = image::open(path.as_ref())?;
    from_dynamic(img)
}

pub fn from_dynamic(img: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let channels = img.color().channel_count() as usize;
    let data: Vec<f32> = match (channels, sixteen) {
        (1, false) => img.into_luma8().into_raw().iter().map(|v| *v as f32 / 255.0).collect(),
        (2, false) => img.into_luma_alpha8().into_raw().iter().map(|v| *v as f32 / 255.0).collect(),
        (3, false) => img.into_rgb8().into_raw().iter().map(|v| *v as f32 / 255.0).collect(),
        (1, true) => img.into_luma16().into_raw().iter().map(|v| *v as f32 / 65535.0).collect(),
        (2, true) => img.into_luma_alpha16().into_raw().iter().map(|v| *v as f32 / 65535.0).collect(),
        (3, true) => img.into_rgb16().into_raw().iter().map(|v| *v as f32 / 65535.0).collect(),
        (_, true) => img.into_rgba16().into_raw().iter().map(|v| *v as f32 / 65535.0).collect(),
        _ => img.into_rgba8().into_raw().iter().map(|v| *v as f32 / 255.0).collect(),
    };
    let channels = if channels > 4 { 4 } else { channels };
    RasterImage::from_vec(w, h, channels, data)
}

pub fn write_image(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img.data().iter().map(|v| quantize8(*v)).collect();
    let bad = || Error::Format("pixel buffer size".into());
    match img.channels() {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
        2 => ImageBuffer::<LumaA<u8>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
        _ => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
    }
    Ok(())
}

/// 16-bit PNG; used for two-channel positional maps.
pub fn write_image16(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u16> = img.data().iter().map(|v| quantize16(*v)).collect();
    let bad = || Error::Format("pixel buffer size".into());
    match img.channels() {
        1 => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
        2 => ImageBuffer::<LumaA<u16>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
        3 => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
        _ => ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, raw).ok_or_else(bad)?.save(path)?,
    }
    Ok(())
}

/// Any pixel with luminance above one half is foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = read_image(path)?;
    Ok(mask_from_image(&img))
}

pub fn mask_from_image(img: &RasterImage) -> BinaryMask {
    BinaryMask::from_fn(img.width(), img.height(), |x, y| img.luminance(x, y) > 0.5)
}

pub fn mask_to_image(mask: &BinaryMask) -> RasterImage {
    RasterImage::from_fn(mask.width(), mask.height(), 1, |x, y, _| {
        if mask.get(x, y) {
            1.0
        } else {
            0.0
        }
    })
    .expect("non-empty mask")
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    if mask.width() == 0 || mask.height() == 0 {
        return Err(Error::ZeroSize {
            width: mask.width(),
            height: mask.height(),
        });
    }
    write_image(path, &mask_to_image(mask))
}
