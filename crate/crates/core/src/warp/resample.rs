use image::{Rgb, RgbImage, Rgba, RgbaImage};
use nalgebra::Point2;

use crate::geometry::ImageSize;
use crate::imaging::transparent_canvas;

use super::{Homography, HomographyError, Polygon};

/// Source pixels covered by `polygon` (pixel centers inside) with alpha 255;
/// everything else fully transparent.
pub fn crop_patch(image: &RgbImage, polygon: &Polygon) -> RgbaImage {
    let mut out = transparent_canvas(ImageSize {
        width: image.width(),
        height: image.height(),
    });
    if let Some((x0, y0, x1, y1)) = polygon.pixel_bounds(image.width(), image.height()) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if polygon.contains(&Point2::new(x as f64 + 0.5, y as f64 + 0.5)) {
                    let Rgb([r, g, b]) = *image.get_pixel(x, y);
                    out.put_pixel(x, y, Rgba([r, g, b, 255]));
                }
            }
        }
    }
    out
}

/// Per-pixel sampling weight of a source layer: its alpha, restricted to
/// pixel centers inside `polygon`.
fn source_weights(source: &RgbaImage, polygon: &Polygon) -> Vec<f32> {
    let (w, h) = source.dimensions();
    let mut weights = vec![0f32; w as usize * h as usize];
    if let Some((x0, y0, x1, y1)) = polygon.pixel_bounds(w, h) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let a = source.get_pixel(x, y)[3];
                if a > 0 && polygon.contains(&Point2::new(x as f64 + 0.5, y as f64 + 0.5)) {
                    weights[(y * w + x) as usize] = a as f32 / 255.0;
                }
            }
        }
    }
    weights
}

/// Inverse warping of a patch layer.
///
/// Every destination pixel whose center lies inside `dst_polygon` is mapped
/// back through `H^-1` and sampled bilinearly from `source`, using only source
/// pixels that are inside `src_polygon` and not transparent (the bilinear
/// weights are renormalized over those). Samples that fall outside the source
/// frame, or next to no usable source pixel, stay transparent. Drawn pixels
/// get alpha 255, so the alpha channel is the destination polygon coverage
/// clipped to the frame.
pub fn warp_patch(
    source: &RgbaImage,
    src_polygon: &Polygon,
    dst_polygon: &Polygon,
    h: &Homography,
    out_size: ImageSize,
) -> Result<RgbaImage, HomographyError> {
    let inv = h.inverse()?;
    let mut out = transparent_canvas(out_size);
    let Some((x0, y0, x1, y1)) = dst_polygon.pixel_bounds(out_size.width, out_size.height) else {
        return Ok(out);
    };
    let (sw, sh) = source.dimensions();
    if sw == 0 || sh == 0 {
        return Ok(out);
    }
    let weights = source_weights(source, src_polygon);
    let ref_sign = inv.apply_with_weight(&dst_polygon.centroid()).1.signum();

    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            if !dst_polygon.contains(&p) {
                continue;
            }
            let (q, w) = inv.apply_with_weight(&p);
            if w.signum() != ref_sign || !q.x.is_finite() || !q.y.is_finite() {
                continue;
            }
            if q.x < 0.0 || q.y < 0.0 || q.x > sw as f64 || q.y > sh as f64 {
                continue;
            }
            if let Some(c) = sample_bilinear(source, &weights, q.x - 0.5, q.y - 0.5) {
                out.put_pixel(x, y, c);
            }
        }
    }
    Ok(out)
}

/// Bilinear sample at continuous pixel-index coordinates (pixel centers at
/// integers), renormalized over usable neighbors. Falls back to the nearest
/// usable pixel in the surrounding 4x4 block.
fn sample_bilinear(source: &RgbaImage, weights: &[f32], fx: f64, fy: f64) -> Option<Rgba<u8>> {
    let (w, h) = source.dimensions();
    let xf = fx.floor();
    let yf = fy.floor();
    let tx = fx - xf;
    let ty = fy - yf;
    let clamp_x = |v: i64| v.clamp(0, w as i64 - 1) as u32;
    let clamp_y = |v: i64| v.clamp(0, h as i64 - 1) as u32;
    let (xi, yi) = (xf as i64, yf as i64);
    let taps = [
        (xi, yi, (1.0 - tx) * (1.0 - ty)),
        (xi + 1, yi, tx * (1.0 - ty)),
        (xi, yi + 1, (1.0 - tx) * ty),
        (xi + 1, yi + 1, tx * ty),
    ];
    let mut acc = [0f64; 3];
    let mut total = 0f64;
    for &(sx, sy, bw) in &taps {
        if bw == 0.0 {
            continue;
        }
        let (cx, cy) = (clamp_x(sx), clamp_y(sy));
        let sw = weights[(cy * w + cx) as usize] as f64 * bw;
        if sw > 0.0 {
            let px = source.get_pixel(cx, cy);
            for c in 0..3 {
                acc[c] += sw * px[c] as f64;
            }
            total += sw;
        }
    }
    if total > 1e-9 {
        let ch = |c: usize| (acc[c] / total).round().clamp(0.0, 255.0) as u8;
        return Some(Rgba([ch(0), ch(1), ch(2), 255]));
    }
    // nearest usable pixel around the sample
    let mut best: Option<(f64, u32, u32)> = None;
    for sy in (yi - 1)..=(yi + 2) {
        for sx in (xi - 1)..=(xi + 2) {
            if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                continue;
            }
            let (cx, cy) = (sx as u32, sy as u32);
            if weights[(cy * w + cx) as usize] > 0.0 {
                let d = (sx as f64 - fx).powi(2) + (sy as f64 - fy).powi(2);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, cx, cy));
                }
            }
        }
    }
    best.map(|(_, cx, cy)| {
        let p = source.get_pixel(cx, cy);
        Rgba([p[0], p[1], p[2], 255])
    })
}
