//! Camera-aligned raster buffers: color images, boolean masks and depth maps.

use std::io::Cursor;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};

/// Row-major raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type Rgb8 = [u8; 3];
pub type RgbImage = Raster<Rgb8>;
pub type BitMask = Raster<bool>;
/// Euclidean ray length in meters; misses are `+inf`.
pub type DepthMap = Raster<f64>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "raster data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn same_dims<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = y * self.width + x;
        self.data[i] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U, V>(&self, other: &Raster<U>, mut f: impl FnMut(&T, &U) -> V) -> Raster<V> {
        assert!(self.same_dims(other), "raster dimension mismatch");
        Raster {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }
}

impl BitMask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    pub fn and(&self, other: &BitMask) -> BitMask {
        self.zip_map(other, |a, b| *a && *b)
    }

    pub fn or(&self, other: &BitMask) -> BitMask {
        self.zip_map(other, |a, b| *a || *b)
    }

    pub fn and_not(&self, other: &BitMask) -> BitMask {
        self.zip_map(other, |a, b| *a && !*b)
    }

    pub fn not(&self) -> BitMask {
        self.map(|b| !*b)
    }

    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.same_dims(other) && self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

impl DepthMap {
    pub fn finite_mask(&self) -> BitMask {
        self.map(|d| d.is_finite())
    }

    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &d in &self.data {
            if d.is_finite() {
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PngError {
    #[error("png codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("expected a {expected} png, found {found:?}")]
    Layout {
        expected: &'static str,
        found: image::ColorType,
    },
}

fn encode<P, C>(buf: ImageBuffer<P, C>) -> Vec<u8>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory png encoding cannot fail");
    out.into_inner()
}

pub fn rgb_to_png(img: &RgbImage) -> Vec<u8> {
    let raw: Vec<u8> = img.data.iter().flat_map(|p| p.iter().copied()).collect();
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw).unwrap();
    encode(buf)
}

pub fn rgb_from_png(bytes: &[u8]) -> Result<RgbImage, PngError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let found = img.color();
    let rgb = match img {
        image::DynamicImage::ImageRgb8(b) => b,
        image::DynamicImage::ImageRgba8(_) | image::DynamicImage::ImageLuma8(_) => img.to_rgb8(),
        _ => {
            return Err(PngError::Layout {
                expected: "8-bit rgb",
                found,
            })
        }
    };
    let (w, h) = rgb.dimensions();
    let data = rgb.pixels().map(|p| p.0).collect();
    Ok(Raster::from_vec(w as usize, h as usize, data))
}

/// 8-bit grayscale, 255 = true.
pub fn mask_to_png(mask: &BitMask) -> Vec<u8> {
    let raw: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(mask.width as u32, mask.height as u32, raw).unwrap();
    encode(buf)
}

/// Any non-zero gray value (or any non-black RGB pixel) reads as true.
pub fn mask_from_png(bytes: &[u8]) -> Result<BitMask, PngError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let found = img.color();
    let gray = match img {
        image::DynamicImage::ImageLuma8(b) => b,
        image::DynamicImage::ImageRgb8(_)
        | image::DynamicImage::ImageRgba8(_)
        | image::DynamicImage::ImageLumaA8(_) => img.to_luma8(),
        _ => {
            return Err(PngError::Layout {
                expected: "8-bit grayscale",
                found,
            })
        }
    };
    let (w, h) = gray.dimensions();
    let data = gray.pixels().map(|p| p.0[0] != 0).collect();
    Ok(Raster::from_vec(w as usize, h as usize, data))
}

pub fn gray16_to_png(img: &Raster<u16>) -> Vec<u8> {
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, img.data.clone()).unwrap();
    encode(buf)
}

pub fn gray16_from_png(bytes: &[u8]) -> Result<Raster<u16>, PngError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    match img {
        image::DynamicImage::ImageLuma16(b) => {
            let (w, h) = b.dimensions();
            Ok(Raster::from_vec(w as usize, h as usize, b.into_raw()))
        }
        other => Err(PngError::Layout {
            expected: "16-bit grayscale",
            found: other.color(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_codecs_are_lossless() {
        let img = RgbImage::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 70, 9]);
        assert_eq!(rgb_from_png(&rgb_to_png(&img)).unwrap(), img);
        let mask = BitMask::from_fn(7, 4, |x, y| (x + y) % 3 == 0);
        assert_eq!(mask_from_png(&mask_to_png(&mask)).unwrap(), mask);
        let depth = Raster::from_fn(4, 4, |x, y| (x * 9000 + y * 17) as u16);
        assert_eq!(gray16_from_png(&gray16_to_png(&depth)).unwrap(), depth);
    }

    #[test]
    fn mask_set_ops() {
        let a = BitMask::from_fn(4, 1, |x, _| x < 2);
        let b = BitMask::from_fn(4, 1, |x, _| x % 2 == 0);
        assert_eq!(a.and(&b).count(), 1);
        assert_eq!(a.or(&b).count(), 3);
        assert_eq!(a.and_not(&b).coords().collect::<Vec<_>>(), vec![(1, 0)]);
        assert!(a.and(&b).is_subset_of(&a));
    }
}
