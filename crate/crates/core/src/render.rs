//! PNG overlays of scanpaths and plots of cumulative performance curves.

use std::path::Path;

use font8x8::{UnicodeFonts, BASIC_FONTS};
use image::{ImageBuffer, Rgb, RgbImage};
use imageproc::drawing::{
    draw_filled_circle_mut, draw_filled_rect_mut, draw_hollow_circle_mut, draw_hollow_rect_mut,
    draw_line_segment_mut,
};
use imageproc::rect::Rect;

use crate::backend::GrayImage;
use crate::error::{Error, Result};
use crate::harness::write_atomic;
use crate::metrics::PerformanceCurve;
use crate::search::Scanpath;
use crate::tensor::{AttentionMap, PixelWindow};

const MARKER_RADIUS: i32 = 12;
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const MARKER: Rgb<u8> = Rgb([230, 40, 40]);
const FOUND: Rgb<u8> = Rgb([40, 200, 60]);
const TARGET_BOX: Rgb<u8> = Rgb([255, 210, 0]);
const GRID: Rgb<u8> = Rgb([220, 220, 220]);

/// Categorical colours for curves, cycled.
const PALETTE: [Rgb<u8>; 8] = [
    Rgb([31, 119, 180]),
    Rgb([214, 39, 40]),
    Rgb([44, 160, 44]),
    Rgb([255, 127, 14]),
    Rgb([148, 103, 189]),
    Rgb([140, 86, 75]),
    Rgb([227, 119, 194]),
    Rgb([23, 190, 207]),
];

/// Where things were drawn, for callers and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct Marker {
    pub label: String,
    pub x: i32,
    pub y: i32,
    pub color: [u8; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanpathLayout {
    pub width: u32,
    pub height: u32,
    pub markers: Vec<Marker>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveLayout {
    pub width: u32,
    pub height: u32,
    pub legend: Vec<String>,
}

/// Draws 8x8 glyphs scaled by `scale` with the top-left corner at (x, y).
pub fn draw_label(img: &mut RgbImage, text: &str, x: i32, y: i32, scale: u32, color: Rgb<u8>) {
    let (w, h) = (img.width() as i32, img.height() as i32);
    for (i, ch) in text.chars().enumerate() {
        let Some(glyph) = BASIC_FONTS.get(ch) else { continue };
        let gx = x + (i as i32) * 8 * scale as i32;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                for dy in 0..scale as i32 {
                    for dx in 0..scale as i32 {
                        let px = gx + col * scale as i32 + dx;
                        let py = y + row as i32 * scale as i32 + dy;
                        if px >= 0 && py >= 0 && px < w && py < h {
                            img.put_pixel(px as u32, py as u32, color);
                        }
                    }
                }
            }
        }
    }
}

fn label_width(text: &str, scale: u32) -> i32 {
    (text.chars().count() as u32 * 8 * scale) as i32
}

fn draw_arrow(img: &mut RgbImage, from: (f32, f32), to: (f32, f32), color: Rgb<u8>) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len = dx.hypot(dy);
    if len <= 2.0 * MARKER_RADIUS as f32 {
        draw_line_segment_mut(img, from, to, color);
        return;
    }
    let (ux, uy) = (dx / len, dy / len);
    let r = MARKER_RADIUS as f32;
    let start = (from.0 + ux * r, from.1 + uy * r);
    let tip = (to.0 - ux * r, to.1 - uy * r);
    draw_line_segment_mut(img, start, tip, color);
    let head = 10.0;
    for side in [-1.0f32, 1.0] {
        let (bx, by) = (tip.0 - ux * head, tip.1 - uy * head);
        let wing = (bx - uy * head * 0.5 * side, by + ux * head * 0.5 * side);
        draw_line_segment_mut(img, tip, wing, color);
    }
}

fn gray_to_rgb(search: &GrayImage, attention: Option<(&AttentionMap, f64)>) -> RgbImage {
    let (w, h) = (search.width(), search.height());
    ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let g = search.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0;
        match attention {
            Some((map, alpha)) if map.width() == w && map.height() == h => {
                let a = map.get(x as usize, y as usize).clamp(0.0, 1.0) * alpha;
                let r = g * (1.0 - a) + 255.0 * a;
                let gb = g * (1.0 - a);
                Rgb([r.round() as u8, gb.round() as u8, gb.round() as u8])
            }
            _ => {
                let v = g.round() as u8;
                Rgb([v, v, v])
            }
        }
    })
}

/// Numbered fixation markers joined by arrows over the search image, with
/// the target box outlined. The finding fixation is drawn in green.
pub fn scanpath_overlay(
    search: &GrayImage,
    target_bbox: &PixelWindow,
    scanpath: &Scanpath,
    attention: Option<(&AttentionMap, f64)>,
) -> (RgbImage, ScanpathLayout) {
    let mut img = gray_to_rgb(search, attention);
    let (x0, x1, y0, y1) = target_bbox.bounds();
    if x1 > x0 && y1 > y0 {
        for inset in 0..2 {
            let (w, h) = ((x1 - x0 - 2 * inset) as u32, (y1 - y0 - 2 * inset) as u32);
            if w > 0 && h > 0 {
                draw_hollow_rect_mut(
                    &mut img,
                    Rect::at((x0 + inset) as i32, (y0 + inset) as i32).of_size(w, h),
                    TARGET_BOX,
                );
            }
        }
    }
    let points: Vec<(f32, f32)> = scanpath.fixations.iter().map(|&(x, y)| (x as f32, y as f32)).collect();
    for w in points.windows(2) {
        draw_arrow(&mut img, w[0], w[1], WHITE);
    }
    let mut markers = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let label = (i + 1).to_string();
        let color = if scanpath.found_at == Some(i + 1) { FOUND } else { MARKER };
        let c = (p.0.round() as i32, p.1.round() as i32);
        draw_filled_circle_mut(&mut img, c, MARKER_RADIUS, color);
        draw_hollow_circle_mut(&mut img, c, MARKER_RADIUS, BLACK);
        let scale = 1;
        draw_label(&mut img, &label, c.0 - label_width(&label, scale) / 2, c.1 - 4, scale, WHITE);
        markers.push(Marker {
            label,
            x: c.0,
            y: c.1,
            color: color.0,
        });
    }
    let layout = ScanpathLayout {
        width: img.width(),
        height: img.height(),
        markers,
    };
    (img, layout)
}

pub fn render_scanpath(
    search: &GrayImage,
    target_bbox: &PixelWindow,
    scanpath: &Scanpath,
    attention: Option<(&AttentionMap, f64)>,
    out_path: impl AsRef<Path>,
) -> Result<ScanpathLayout> {
    let (img, layout) = scanpath_overlay(search, target_bbox, scanpath, attention);
    save_png(&img, out_path.as_ref())?;
    Ok(layout)
}

pub const PLOT_WIDTH: u32 = 720;
pub const PLOT_HEIGHT: u32 = 480;
const MARGIN_LEFT: i32 = 64;
const MARGIN_RIGHT: i32 = 200;
const MARGIN_TOP: i32 = 24;
const MARGIN_BOTTOM: i32 = 48;

/// Cumulative curves with standard-error bars, an optional chance reference
/// drawn in black, and one legend entry per curve.
pub fn curves_plot(curves: &[PerformanceCurve], chance: Option<&[f64]>) -> Result<(RgbImage, CurveLayout)> {
    if curves.is_empty() {
        return Err(Error::Empty("curves"));
    }
    let mut img = RgbImage::from_pixel(PLOT_WIDTH, PLOT_HEIGHT, WHITE);
    let (pw, ph) = (
        PLOT_WIDTH as i32 - MARGIN_LEFT - MARGIN_RIGHT,
        PLOT_HEIGHT as i32 - MARGIN_TOP - MARGIN_BOTTOM,
    );
    let n_max = curves
        .iter()
        .map(|c| c.cumulative.len())
        .chain(chance.map(<[f64]>::len))
        .max()
        .unwrap_or(1)
        .max(1);
    let to_px = |k: usize, p: f64| -> (f32, f32) {
        let x = MARGIN_LEFT as f32 + pw as f32 * (k as f32 / n_max as f32);
        let y = MARGIN_TOP as f32 + ph as f32 * (1.0 - p.clamp(0.0, 1.0) as f32);
        (x, y)
    };

    for tick in 0..=4 {
        let p = tick as f64 / 4.0;
        let (_, y) = to_px(0, p);
        draw_line_segment_mut(&mut img, (MARGIN_LEFT as f32, y), ((MARGIN_LEFT + pw) as f32, y), GRID);
        let label = format!("{p:.2}");
        draw_label(&mut img, &label, MARGIN_LEFT - label_width(&label, 1) - 6, y as i32 - 4, 1, BLACK);
    }
    let step = (n_max / 10).max(1);
    for k in (step..=n_max).step_by(step) {
        let (x, y) = to_px(k, 0.0);
        draw_line_segment_mut(&mut img, (x, y), (x, y + 4.0), BLACK);
        let label = k.to_string();
        draw_label(&mut img, &label, x as i32 - label_width(&label, 1) / 2, y as i32 + 8, 1, BLACK);
    }
    let origin = to_px(0, 0.0);
    draw_line_segment_mut(&mut img, origin, to_px(n_max, 0.0), BLACK);
    draw_line_segment_mut(&mut img, origin, to_px(0, 1.0), BLACK);
    let xlabel = "fixation number";
    draw_label(
        &mut img,
        xlabel,
        MARGIN_LEFT + pw / 2 - label_width(xlabel, 1) / 2,
        PLOT_HEIGHT as i32 - 16,
        1,
        BLACK,
    );

    if let Some(ch) = chance {
        let mut prev = to_px(0, 0.0);
        for (k, &p) in ch.iter().enumerate() {
            let next = to_px(k + 1, p);
            draw_line_segment_mut(&mut img, prev, next, BLACK);
            prev = next;
        }
    }

    let mut legend = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut prev = to_px(0, 0.0);
        for (k, (&p, &se)) in c.cumulative.iter().zip(&c.stderr).enumerate() {
            let next = to_px(k + 1, p);
            draw_line_segment_mut(&mut img, prev, next, color);
            let (lo, hi) = (to_px(k + 1, p - se), to_px(k + 1, p + se));
            draw_line_segment_mut(&mut img, lo, hi, color);
            draw_line_segment_mut(&mut img, (lo.0 - 3.0, lo.1), (lo.0 + 3.0, lo.1), color);
            draw_line_segment_mut(&mut img, (hi.0 - 3.0, hi.1), (hi.0 + 3.0, hi.1), color);
            draw_filled_circle_mut(&mut img, (next.0 as i32, next.1 as i32), 2, color);
            prev = next;
        }
        let ly = MARGIN_TOP + 8 + 16 * i as i32;
        let lx = MARGIN_LEFT + pw + 16;
        draw_filled_rect_mut(&mut img, Rect::at(lx, ly).of_size(12, 8), color);
        draw_label(&mut img, &c.label, lx + 18, ly, 1, BLACK);
        legend.push(c.label.clone());
    }
    if chance.is_some() {
        let ly = MARGIN_TOP + 8 + 16 * curves.len() as i32;
        let lx = MARGIN_LEFT + pw + 16;
        draw_filled_rect_mut(&mut img, Rect::at(lx, ly).of_size(12, 8), BLACK);
        draw_label(&mut img, "chance", lx + 18, ly, 1, BLACK);
    }
    let layout = CurveLayout {
        width: PLOT_WIDTH,
        height: PLOT_HEIGHT,
        legend,
    };
    Ok((img, layout))
}

pub fn render_curves(
    curves: &[PerformanceCurve],
    chance: Option<&[f64]>,
    out_path: impl AsRef<Path>,
) -> Result<CurveLayout> {
    let (img, layout) = curves_plot(curves, chance)?;
    save_png(&img, out_path.as_ref())?;
    Ok(layout)
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageOutputFormat::Png)?;
    write_atomic(path, &bytes)
}
