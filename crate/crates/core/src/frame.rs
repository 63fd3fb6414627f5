//! RGB raster, PPM (P6) I/O and the few drawing primitives the compositor
//! needs.

use std::io::{Read, Write};
use std::path::Path;

use crate::geometry::Pixel;
use crate::par::{self, Exec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const SKY: Rgb = Rgb([150, 190, 230]);
    pub const GRASS: Rgb = Rgb([86, 130, 70]);
    pub const ROAD: Rgb = Rgb([105, 105, 110]);
    pub const PAINT: Rgb = Rgb([235, 235, 225]);
    pub const POST_RED: Rgb = Rgb([200, 50, 40]);
    pub const POST_ORANGE: Rgb = Rgb([230, 140, 30]);
    /// Reserved for the CG model; nothing in the scene palette uses it.
    pub const CG_MODEL: Rgb = Rgb([255, 0, 255]);
    pub const AXLE_LINE: Rgb = Rgb([255, 220, 0]);
    pub const TRAJECTORY: Rgb = Rgb([0, 255, 255]);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&fill.0);
        }
        Frame { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::invalid("raster length does not match dimensions"));
        }
        Ok(Frame { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Rgb([self.data[i], self.data[i + 1], self.data[i + 2]])
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&c.0);
    }

    /// Row span `[min_y, max_y]` of pixels with exactly colour `c`.
    pub fn rows_with_color(&self, c: Rgb) -> Option<(u32, u32)> {
        let row_len = self.width as usize * 3;
        let mut span: Option<(u32, u32)> = None;
        for (y, row) in self.data.chunks(row_len).enumerate() {
            if row.chunks(3).any(|p| p == c.0) {
                let y = y as u32;
                span = Some(match span {
                    None => (y, y),
                    Some((lo, _)) => (lo, y),
                });
            }
        }
        span
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_ppm())?;
        Ok(())
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_ppm(&buf)
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        // header: magic, width, height, maxval separated by whitespace,
        // then exactly one whitespace byte before the raster
        let mut fields = Vec::with_capacity(4);
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(Error::parse("ppm", "truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|e| Error::parse("ppm", e.to_string()))?);
        }
        if fields[0] != "P6" {
            return Err(Error::parse("ppm", format!("unsupported magic {}", fields[0])));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|e| Error::parse("ppm", e.to_string()));
        let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(Error::parse("ppm", "only maxval 255 is supported"));
        }
        let raster = bytes.get(i + 1..).unwrap_or_default();
        Frame::from_raw(w, h, raster.to_vec())
    }

    /// Draws a 1-px line. Endpoints may lie far outside the image.
    pub fn draw_line(&mut self, a: Pixel, b: Pixel, c: Rgb) {
        let Some((a, b)) = clip_to_rect(a, b, self.width as f64, self.height as f64) else {
            return;
        };
        let (x0, y0) = (a.u - 0.5, a.v - 0.5);
        let (x1, y1) = (b.u - 0.5, b.v - 0.5);
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let x = (x0 + (x1 - x0) * t).round();
            let y = (y0 + (y1 - y0) * t).round();
            if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
                self.set(x as u32, y as u32, c);
            }
        }
    }

    /// Samples the centred sub-window covering `scale` of each image
    /// dimension and stretches it back to full resolution (bilinear).
    pub fn zoom_center(&self, scale: f64, exec: Exec) -> Frame {
        if scale >= 1.0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let (cx, cy) = (0.5 * w as f64, 0.5 * h as f64);
        // column taps are shared by every row; weights are 8-bit fixed point
        let cols: Vec<(usize, usize, u32)> = (0..w)
            .map(|x| {
                let (x0, x1, fx) = tap(cx + (x as f64 + 0.5 - cx) * scale - 0.5, w);
                (x0 * 3, x1 * 3, weight(fx))
            })
            .collect();
        let mut out = Frame::new(self.width, self.height, Rgb([0, 0, 0]));
        let src = &self.data;
        par::for_each_row(exec, out.data_mut(), w * 3, |y, row| {
            let (y0, y1, fy) = tap(cy + (y as f64 + 0.5 - cy) * scale - 0.5, h);
            let wy = weight(fy);
            let r0 = &src[y0 * w * 3..(y0 + 1) * w * 3];
            let r1 = &src[y1 * w * 3..(y1 + 1) * w * 3];
            for (px, &(x0, x1, wx)) in row.chunks_exact_mut(3).zip(&cols) {
                for ch in 0..3 {
                    let top = r0[x0 + ch] as u32 * (256 - wx) + r0[x1 + ch] as u32 * wx;
                    let bot = r1[x0 + ch] as u32 * (256 - wx) + r1[x1 + ch] as u32 * wx;
                    px[ch] = ((top * (256 - wy) + bot * wy + (1 << 15)) >> 16) as u8;
                }
            }
        });
        out
    }
}

fn weight(f: f64) -> u32 {
    (f * 256.0).round() as u32
}

fn tap(s: f64, n: usize) -> (usize, usize, f64) {
    let s = s.clamp(0.0, (n - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, s - i0 as f64)
}

/// Liang–Barsky clip of a segment to `[0, w] x [0, h]`.
fn clip_to_rect(a: Pixel, b: Pixel, w: f64, h: f64) -> Option<(Pixel, Pixel)> {
    let (dx, dy) = (b.u - a.u, b.v - a.v);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [(-dx, a.u), (dx, w - a.u), (-dy, a.v), (dy, h - a.v)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some((Pixel { u: a.u + t0 * dx, v: a.v + t0 * dy }, Pixel { u: a.u + t1 * dx, v: a.v + t1 * dy }))
}

/// Even-odd span fill of a projected polygon on one scanline. Covers pixels
/// whose centre lies inside.
pub(crate) fn fill_polygon_row(row: &mut [u8], y: usize, poly: &[Pixel], c: Rgb) {
    let width = row.len() / 3;
    let yc = y as f64 + 0.5;
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if (a.v <= yc && b.v > yc) || (b.v <= yc && a.v > yc) {
            xs.push(a.u + (yc - a.v) / (b.v - a.v) * (b.u - a.u));
        }
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    for pair in xs.chunks_exact(2) {
        let x0 = (pair[0] - 0.5).ceil().max(0.0);
        let x1 = (pair[1] - 0.5).ceil().min(width as f64);
        if x1 <= x0 {
            continue;
        }
        for x in x0 as usize..x1 as usize {
            row[x * 3..x * 3 + 3].copy_from_slice(&c.0);
        }
    }
}
