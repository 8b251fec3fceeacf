//! Pixel-level template matching by zero-mean normalized cross-correlation.

use crate::backend::GrayImage;
use crate::error::{Error, Result};
use crate::tensor::{normalize01, upsample_to_pixels, AttentionMap, Scale};

/// Side of the canonical template the target is resized to.
pub const TEMPLATE_SIZE: usize = 28;

/// Zero-mean normalized cross-correlation of `template` at every valid
/// placement in `image`. Placements over a constant region score 0.
pub fn ncc_valid(image: &GrayImage, template: &GrayImage) -> Result<AttentionMap> {
    let (tw, th) = (template.width(), template.height());
    let (w, h) = (image.width(), image.height());
    if tw > w || th > h {
        return Err(Error::Dimension(format!(
            "template {tw}x{th} larger than image {w}x{h}"
        )));
    }
    let n = (tw * th) as f64;
    let t_mean = template.pixels().iter().sum::<f64>() / n;
    let t_dev: Vec<f64> = template.pixels().iter().map(|v| v - t_mean).collect();
    let t_energy: f64 = t_dev.iter().map(|v| v * v).sum();

    // summed-area tables of the image and its square, (w+1) x (h+1)
    let stride = w + 1;
    let mut sum = vec![0.0; stride * (h + 1)];
    let mut sq = vec![0.0; stride * (h + 1)];
    for y in 0..h {
        let (mut row, mut row_sq) = (0.0, 0.0);
        for x in 0..w {
            let v = image.get(x, y);
            row += v;
            row_sq += v * v;
            sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
            sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + row_sq;
        }
    }
    let rect = |t: &[f64], x: usize, y: usize| {
        t[(y + th) * stride + x + tw] - t[y * stride + x + tw] - t[(y + th) * stride + x] + t[y * stride + x]
    };

    let (out_w, out_h) = (w - tw + 1, h - th + 1);
    let mut out = Vec::with_capacity(out_w * out_h);
    let pixels = image.pixels();
    for y in 0..out_h {
        for x in 0..out_w {
            let s = rect(&sum, x, y);
            let var = rect(&sq, x, y) - s * s / n;
            let denom = (var.max(0.0) * t_energy).sqrt();
            if denom <= 1e-12 {
                out.push(0.0);
                continue;
            }
            let mut num = 0.0;
            for ty in 0..th {
                let row = &pixels[(y + ty) * w + x..][..tw];
                for (a, b) in row.iter().zip(&t_dev[ty * tw..][..tw]) {
                    num += a * b;
                }
            }
            out.push((num / denom).clamp(-1.0, 1.0));
        }
    }
    AttentionMap::new(out_h, out_w, out)
}

/// Attention map for the template-matching baseline: the target is resized
/// to the canonical template and its correlation peak positions are placed
/// under the template centre.
pub fn template_attention(search: &GrayImage, target: &GrayImage, size: usize) -> Result<AttentionMap> {
    let template = target.resized(size, size);
    let grid = ncc_valid(search, &template)?;
    let placed = upsample_to_pixels(&grid, Scale::ONE, size, size, search.height(), search.width());
    Ok(normalize01(&placed))
}
