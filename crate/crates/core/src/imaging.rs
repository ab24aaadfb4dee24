//! Small image helpers shared across modules.

use image::{GrayImage, Luma, Rgb, RgbImage, Rgba, RgbaImage};

use crate::geometry::ImageSize;

/// Background color of sketches, targets and completed renders.
pub const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);

/// Boolean per-pixel mask in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[(y * width + x) as usize] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> ImageSize {
        ImageSize {
            width: self.width,
            height: self.height,
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    /// 0 / 255 grayscale rendering of the mask.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[0] >= 128)
    }

    /// Intersection over union; 1.0 when both masks are empty.
    pub fn iou(&self, other: &Mask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.data.iter().zip(&other.data) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

pub fn transparent_canvas(size: ImageSize) -> RgbaImage {
    RgbaImage::from_pixel(size.width, size.height, Rgba([0, 0, 0, 0]))
}

pub fn image_size_of<P: image::Pixel>(img: &image::ImageBuffer<P, Vec<P::Subpixel>>) -> ImageSize {
    ImageSize {
        width: img.width(),
        height: img.height(),
    }
}

/// Drops the alpha channel, painting transparent pixels with `background`.
pub fn flatten_over(img: &RgbaImage, background: Rgb<u8>) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        let a = p[3] as u32;
        let mix = |c: u8, b: u8| ((c as u32 * a + b as u32 * (255 - a) + 127) / 255) as u8;
        Rgb([mix(p[0], background[0]), mix(p[1], background[1]), mix(p[2], background[2])])
    })
}

/// Bilinear resize of a square RGB image; identity when the size already matches.
pub fn resize_rgb(img: &RgbImage, size: ImageSize) -> RgbImage {
    if img.width() == size.width && img.height() == size.height {
        return img.clone();
    }
    image::imageops::resize(img, size.width, size.height, image::imageops::FilterType::Triangle)
}
