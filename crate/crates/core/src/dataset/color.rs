//! sRGB <-> CIELAB (D65) conversion.

use image::{Rgb, Rgb32FImage, RgbImage};
use nalgebra::{Matrix3, Vector3};

const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_xyz() -> Matrix3<f64> {
    Matrix3::new(
        0.4124564, 0.3575761, 0.1804375, //
        0.2126729, 0.7151522, 0.0721750, //
        0.0193339, 0.1191920, 0.9503041,
    )
}

fn xyz_to_srgb() -> Matrix3<f64> {
    srgb_to_xyz().try_inverse().expect("sRGB primaries are independent")
}

fn linearize(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn delinearize(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

const DELTA: f64 = 6.0 / 29.0;

fn f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// `(L*, a*, b*)` of an 8-bit sRGB color.
pub fn srgb_to_lab(px: Rgb<u8>) -> [f64; 3] {
    let rgb = Vector3::new(
        linearize(px[0] as f64 / 255.0),
        linearize(px[1] as f64 / 255.0),
        linearize(px[2] as f64 / 255.0),
    );
    let xyz = srgb_to_xyz() * rgb;
    let fx = f(xyz.x / WHITE[0]);
    let fy = f(xyz.y / WHITE[1]);
    let fz = f(xyz.z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Nearest 8-bit sRGB color of a CIELAB triple (out-of-gamut values clip).
pub fn lab_to_srgb(lab: [f64; 3]) -> Rgb<u8> {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = Vector3::new(WHITE[0] * f_inv(fx), WHITE[1] * f_inv(fy), WHITE[2] * f_inv(fz));
    let rgb = xyz_to_srgb() * xyz;
    let q = |c: f64| (delinearize(c.clamp(0.0, 1.0)) * 255.0).round().clamp(0.0, 255.0) as u8;
    Rgb([q(rgb.x), q(rgb.y), q(rgb.z)])
}

/// Per-pixel CIELAB image with `f32` channels `(L*, a*, b*)`.
pub fn rgb_to_lab(image: &RgbImage) -> Rgb32FImage {
    Rgb32FImage::from_fn(image.width(), image.height(), |x, y| {
        let [l, a, b] = srgb_to_lab(*image.get_pixel(x, y));
        Rgb([l as f32, a as f32, b as f32])
    })
}

pub fn lab_to_rgb(image: &Rgb32FImage) -> RgbImage {
    RgbImage::from_fn(image.width(), image.height(), |x, y| {
        let p = image.get_pixel(x, y);
        lab_to_srgb([p[0] as f64, p[1] as f64, p[2] as f64])
    })
}

/// 8-bit storage form: `L * 255 / 100`, `a + 128`, `b + 128`, rounded and clamped.
pub fn encode_lab8(image: &Rgb32FImage) -> RgbImage {
    let q = |v: f32| v.round().clamp(0.0, 255.0) as u8;
    RgbImage::from_fn(image.width(), image.height(), |x, y| {
        let p = image.get_pixel(x, y);
        Rgb([q(p[0] * 2.55), q(p[1] + 128.0), q(p[2] + 128.0)])
    })
}

pub fn decode_lab8(image: &RgbImage) -> Rgb32FImage {
    Rgb32FImage::from_fn(image.width(), image.height(), |x, y| {
        let p = image.get_pixel(x, y);
        Rgb([p[0] as f32 / 2.55, p[1] as f32 - 128.0, p[2] as f32 - 128.0])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook route: CIE kappa/epsilon constants, sRGB primaries rounded to
    /// four digits, white from the 2-degree observer tables.
    fn reference_lab(r: u8, g: u8, b: u8) -> [f64; 3] {
        let lin = |c: u8| {
            let v = c as f64 / 255.0;
            if v > 0.04045 {
                ((v + 0.055) / 1.055).powf(2.4)
            } else {
                v / 12.92
            }
        };
        let (r, g, b) = (lin(r), lin(g), lin(b));
        let x = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.9505;
        let y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
        let z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.0890;
        let eps = 216.0 / 24389.0;
        let kappa = 24389.0 / 27.0;
        let ff = |t: f64| if t > eps { t.powf(1.0 / 3.0) } else { (kappa * t + 16.0) / 116.0 };
        [116.0 * ff(y) - 16.0, 500.0 * (ff(x) - ff(y)), 200.0 * (ff(y) - ff(z))]
    }

    #[test]
    fn white_and_black() {
        let w = srgb_to_lab(Rgb([255, 255, 255]));
        assert!((w[0] - 100.0).abs() < 1e-4 && w[1].abs() < 1e-3 && w[2].abs() < 1e-3, "{w:?}");
        let k = srgb_to_lab(Rgb([0, 0, 0]));
        assert!(k.iter().all(|v| v.abs() < 1e-12), "{k:?}");
    }

    #[test]
    fn pure_red_matches_reference() {
        let got = srgb_to_lab(Rgb([255, 0, 0]));
        let want = reference_lab(255, 0, 0);
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 0.05, "{got:?} vs {want:?}");
        }
        // frozen from the reference route above
        assert!((got[0] - 53.24).abs() < 0.01 && (got[1] - 80.09).abs() < 0.01 && (got[2] - 67.20).abs() < 0.01);
    }

    #[test]
    fn reference_agrees_on_a_grid() {
        for r in (0..=255u16).step_by(51) {
            for g in (0..=255u16).step_by(51) {
                for b in (0..=255u16).step_by(51) {
                    let got = srgb_to_lab(Rgb([r as u8, g as u8, b as u8]));
                    let want = reference_lab(r as u8, g as u8, b as u8);
                    for i in 0..3 {
                        assert!((got[i] - want[i]).abs() < 0.1, "{r},{g},{b}: {got:?} vs {want:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn every_gray_level_round_trips() {
        for v in 0..=255u8 {
            assert_eq!(lab_to_srgb(srgb_to_lab(Rgb([v, v, v]))), Rgb([v, v, v]));
        }
    }
}
