//! Three stacked traces (reference, synthetic, processed synthetic) on a
//! shared time axis, rendered to PNG without any font or plotting backend.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::preprocess::Window;
use crate::respmetrics::CleanedRespSignal;

const WIDTH: u32 = 1200;
const PANEL_H: u32 = 210;
const TOP: u32 = 16;
const LEFT: u32 = 60;
const RIGHT: u32 = 24;
const AXIS_H: u32 = 70;
const TITLE_H: u32 = 26;
const SCALE: u32 = 2;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const COLORS: [Rgb<u8>; 3] = [Rgb([31, 119, 180]), Rgb([214, 39, 40]), Rgb([44, 160, 44])];

pub const TITLES: [&str; 3] = [
    "REFERENCE RESPIRATORY SIGNAL",
    "SYNTHETIC RESPIRATORY SIGNAL",
    "PROCESSED SYNTHETIC RESPIRATORY SIGNAL",
];

fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0, 0, 0, 0, 0, 0x0C, 0x0C],
        '-' => [0, 0, 0, 0x1F, 0, 0, 0],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        ':' => [0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0],
        _ => [0; 7],
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn text(img: &mut RgbImage, x: u32, y: u32, s: &str, c: Rgb<u8>) {
    for (i, ch) in s.chars().enumerate() {
        let ox = x + i as u32 * 6 * SCALE;
        for (row, bits) in glyph(ch).iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    for dy in 0..SCALE {
                        for dx in 0..SCALE {
                            put(
                                img,
                                (ox + col * SCALE + dx) as i64,
                                (y + row as u32 * SCALE + dy) as i64,
                                c,
                            );
                        }
                    }
                }
            }
        }
    }
}

fn text_width(s: &str) -> u32 {
    s.chars().count() as u32 * 6 * SCALE
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(img, x, y, c);
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

fn concat(ws: &[Window]) -> Result<(f64, f64, f64, Vec<f64>)> {
    let first = ws
        .first()
        .ok_or_else(|| Error::arg("plot: empty window sequence"))?;
    let fs = first.sampling_rate_hz;
    let mut end = first.start_time_s;
    let mut samples = Vec::new();
    for w in ws {
        if w.sampling_rate_hz != fs || (w.start_time_s - end).abs() > 1e-6 {
            return Err(Error::arg(
                "plot: windows are not contiguous at a common rate",
            ));
        }
        end = w.start_time_s + w.duration_s();
        samples.extend_from_slice(&w.samples);
    }
    Ok((first.start_time_s, end, fs, samples))
}

/// Render reference, synthetic and processed synthetic respiration as three
/// stacked panels sharing one time axis. The output is deterministic for
/// fixed inputs.
pub fn render_comparison_plot(
    reference: &[Window],
    synthetic: &[Window],
    processed: &CleanedRespSignal,
    out_path: &Path,
) -> Result<()> {
    let (t0, t1, fs_r, r) = concat(reference)?;
    let (s0, s1, fs_s, s) = concat(synthetic)?;
    let tol = 0.5 / fs_r.min(fs_s).min(processed.sampling_rate_hz);
    if (t0 - s0).abs() > tol || (t1 - s1).abs() > tol {
        return Err(Error::arg(format!(
            "plot: reference spans [{t0}, {t1}) s but synthetic spans [{s0}, {s1}) s"
        )));
    }
    if (processed.duration_s() - (t1 - t0)).abs() > tol {
        return Err(Error::arg(format!(
            "plot: processed signal lasts {} s, expected {} s",
            processed.duration_s(),
            t1 - t0
        )));
    }

    let height = TOP + 3 * PANEL_H + AXIS_H;
    let mut img = RgbImage::from_pixel(WIDTH, height, WHITE);
    let x_left = LEFT as f64;
    let x_right = (WIDTH - RIGHT) as f64;
    let span = t1 - t0;
    let to_x = |t: f64| x_left + (t - t0) / span * (x_right - x_left);

    let tick_step = [1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0, 120.0, 300.0, 600.0]
        .into_iter()
        .find(|st| span / st <= 12.0)
        .unwrap_or(span / 10.0);
    let ticks: Vec<f64> = (0..)
        .map(|i| (t0 / tick_step).ceil() * tick_step + i as f64 * tick_step)
        .take_while(|t| *t <= t1 + 1e-9)
        .collect();

    let traces: [(&[f64], f64); 3] = [
        (&r, fs_r),
        (&s, fs_s),
        (&processed.samples, processed.sampling_rate_hz),
    ];
    for (k, (ys, fs)) in traces.iter().enumerate() {
        let top = TOP + k as u32 * PANEL_H;
        text(&mut img, LEFT, top, TITLES[k], BLACK);
        let y_top = (top + TITLE_H) as f64;
        let y_bot = (top + PANEL_H - 12) as f64;
        for &t in &ticks {
            let x = to_x(t).round() as i64;
            line(&mut img, (x, y_top as i64), (x, y_bot as i64), GRID);
        }
        let (lo, hi) = ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let range = if hi > lo { hi - lo } else { 1.0 };
        let to_y = |v: f64| y_bot - 4.0 - (v - lo) / range * (y_bot - y_top - 8.0);
        let mut prev: Option<(i64, i64)> = None;
        for (i, &v) in ys.iter().enumerate() {
            let p = (
                to_x(t0 + i as f64 / fs).round() as i64,
                to_y(v).round() as i64,
            );
            if let Some(q) = prev {
                line(&mut img, q, p, COLORS[k]);
            }
            prev = Some(p);
        }
        let (xl, xr, yt, yb) = (x_left as i64, x_right as i64, y_top as i64, y_bot as i64);
        line(&mut img, (xl, yt), (xr, yt), BLACK);
        line(&mut img, (xl, yb), (xr, yb), BLACK);
        line(&mut img, (xl, yt), (xl, yb), BLACK);
        line(&mut img, (xr, yt), (xr, yb), BLACK);
    }

    let axis_y = TOP + 3 * PANEL_H - 12;
    for &t in &ticks {
        let x = to_x(t).round() as i64;
        line(&mut img, (x, axis_y as i64), (x, axis_y as i64 + 6), BLACK);
        let label = format!("{}", (t * 10.0).round() / 10.0);
        let w = text_width(&label);
        text(
            &mut img,
            (x as u32).saturating_sub(w / 2),
            axis_y + 12,
            &label,
            BLACK,
        );
    }
    let xlabel = "TIME (S)";
    text(
        &mut img,
        (WIDTH - text_width(xlabel)) / 2,
        axis_y + 40,
        xlabel,
        BLACK,
    );

    img.save_with_format(out_path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(out_path, io),
            other => Error::io(out_path, std::io::Error::other(other.to_string())),
        })
}
