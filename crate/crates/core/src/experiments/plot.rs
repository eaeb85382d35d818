//! Minimal raster plots: heatmaps and log-scale line charts.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::Result;

const MARGIN: u32 = 40;
const FLAGGED: Rgb<u8> = Rgb([200, 40, 40]);

/// Renders `values[row][col]` as grey cells, white for the smallest value
/// and black for the largest. Row 0 is drawn at the bottom. Non-finite cells
/// are drawn red.
pub fn write_heatmap(path: &Path, values: &[Vec<f64>], cell_px: u32) -> Result<()> {
    let rows = values.len() as u32;
    let cols = values.first().map_or(0, Vec::len) as u32;
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = RgbImage::new((cols * cell_px).max(1), (rows * cell_px).max(1));
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let color = if v.is_finite() {
                let g = (255.0 * (1.0 - (v - lo) / span)).round().clamp(0.0, 255.0) as u8;
                Rgb([g, g, g])
            } else {
                FLAGGED
            };
            let y0 = (rows - 1 - i as u32) * cell_px;
            let x0 = j as u32 * cell_px;
            for y in y0..y0 + cell_px {
                for x in x0..x0 + cell_px {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    img.save(path)?;
    Ok(())
}

pub struct Series<'a> {
    pub points: &'a [(f64, f64)],
    pub color: [u8; 3],
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, c);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Line chart with a log10 y axis shared by all series. Non-positive or
/// non-finite points are skipped.
pub fn write_log_curves(path: &Path, series: &[Series<'_>], width: u32, height: u32) -> Result<()> {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0)
    };
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        let ly = y.log10();
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(ly);
        ymax = ymax.max(ly);
    }
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let (pw, ph) = (width - 2 * MARGIN, height - 2 * MARGIN);
    let axis = Rgb([0, 0, 0]);
    let corners = [
        (MARGIN, MARGIN),
        (MARGIN + pw, MARGIN),
        (MARGIN + pw, MARGIN + ph),
        (MARGIN, MARGIN + ph),
    ];
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        line(&mut img, (a.0 as i64, a.1 as i64), (b.0 as i64, b.1 as i64), axis);
    }
    if xmin.is_finite() {
        let xs = if xmax > xmin { xmax - xmin } else { 1.0 };
        let ys = if ymax > ymin { ymax - ymin } else { 1.0 };
        // light grid line at every power of ten
        for decade in ymin.ceil() as i64..=ymax.floor() as i64 {
            let py = (MARGIN + ph) as f64 - (decade as f64 - ymin) / ys * ph as f64;
            let py = py.round() as i64;
            line(
                &mut img,
                (MARGIN as i64 + 1, py),
                ((MARGIN + pw) as i64 - 1, py),
                Rgb([220, 220, 220]),
            );
        }
        let to_px = |x: f64, y: f64| {
            let px = MARGIN as f64 + (x - xmin) / xs * pw as f64;
            let py = (MARGIN + ph) as f64 - (y.log10() - ymin) / ys * ph as f64;
            (px.round() as i64, py.round() as i64)
        };
        for s in series {
            let c = Rgb(s.color);
            let mut prev = None;
            for &(x, y) in s.points {
                if !(x.is_finite() && y.is_finite() && y > 0.0) {
                    prev = None;
                    continue;
                }
                let p = to_px(x, y);
                if let Some(q) = prev {
                    line(&mut img, q, p, c);
                }
                prev = Some(p);
            }
        }
    }
    img.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_polarity_and_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.png");
        write_heatmap(&p, &[vec![0.0, 1.0], vec![0.5, f64::NAN]], 2).unwrap();
        let img = image::open(&p).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (4, 4));
        // row 0 at the bottom: smallest value is white, largest black
        assert_eq!(img.get_pixel(0, 3), &Rgb([255, 255, 255]));
        assert_eq!(img.get_pixel(2, 3), &Rgb([0, 0, 0]));
        assert_eq!(img.get_pixel(0, 0), &Rgb([128, 128, 128]));
        assert_eq!(img.get_pixel(3, 0), &FLAGGED);
    }

    #[test]
    fn curves_render() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let a: Vec<(f64, f64)> = (0..50).map(|t| (t as f64, (-(t as f64) / 10.0).exp())).collect();
        let b = vec![(0.0, 0.0), (1.0, f64::NAN)];
        write_log_curves(
            &p,
            &[
                Series {
                    points: &a,
                    color: [0, 0, 255],
                },
                Series {
                    points: &b,
                    color: [255, 0, 0],
                },
            ],
            200,
            150,
        )
        .unwrap();
        let img = image::open(&p).unwrap().to_rgb8();
        assert!(img.pixels().any(|px| *px == Rgb([0, 0, 255])));
    }
}
