//! Artifact writers: CSV matrices, PGM heatmaps, segment CSV, SVG overlays
//! and JSON records. Output is deterministic for identical inputs: no
//! timestamps, fixed float formatting, struct-ordered JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::geodesic::GeodesicSegment;
use crate::geom::Point2;
use crate::march::Grid;

/// Grid values as a dense CSV matrix, one row per grid row (y increasing),
/// preceded by a header line with the geometry.
pub fn write_grid_csv(path: &Path, grid: &Grid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "# nx={} ny={} x0={:.17e} x1={:.17e} y0={:.17e} y1={:.17e}",
        grid.nx, grid.ny, grid.window.x0, grid.window.x1, grid.window.y0, grid.window.y1
    )?;
    for j in 0..grid.ny {
        let mut line = String::with_capacity(grid.nx * 24);
        for i in 0..grid.nx {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.12e}", grid.get(i, j)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// 8-bit binary PGM heatmap, values normalized over the finite range.
pub fn write_grid_pgm(path: &Path, grid: &Grid) -> Result<()> {
    let lo = grid.min_value();
    let hi = grid.max_value();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", grid.nx, grid.ny)?;
    let mut bytes = Vec::with_capacity(grid.nx * grid.ny);
    // top row first (image convention)
    for j in (0..grid.ny).rev() {
        for i in 0..grid.nx {
            let v = grid.get(i, j);
            let b = if v.is_finite() { (255.0 * (v - lo) / span).clamp(0.0, 255.0) as u8 } else { 255 };
            bytes.push(b);
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn write_segment_csv(path: &Path, seg: &GeodesicSegment) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,y,vx,vy")?;
    for s in &seg.samples {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.t, s.pos.x, s.pos.y, s.vel.x, s.vel.y
        )?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

const B64: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

fn base64(data: &[u8]) -> String {
    let mut out = String::with_capacity((data.len() + 2) / 3 * 4);
    for chunk in data.chunks(3) {
        let b = [chunk[0], *chunk.get(1).unwrap_or(&0), *chunk.get(2).unwrap_or(&0)];
        let n = ((b[0] as u32) << 16) | ((b[1] as u32) << 8) | b[2] as u32;
        out.push(B64[(n >> 18) as usize & 63] as char);
        out.push(B64[(n >> 12) as usize & 63] as char);
        out.push(if chunk.len() > 1 { B64[(n >> 6) as usize & 63] as char } else { '=' });
        out.push(if chunk.len() > 2 { B64[n as usize & 63] as char } else { '=' });
    }
    out
}

/// Uncompressed 24-bit BMP of the grid, used as the raster layer inside SVG
/// overlays (broad viewer support without an image dependency).
fn grid_bmp(grid: &Grid) -> Vec<u8> {
    let lo = grid.min_value();
    let hi = grid.max_value();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (grid.nx as u32, grid.ny as u32);
    let row_bytes = ((3 * w + 3) / 4) * 4;
    let data_size = row_bytes * h;
    let mut out = Vec::with_capacity((54 + data_size) as usize);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(54 + data_size).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&54u32.to_le_bytes());
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&24u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&data_size.to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    // BMP rows run bottom-up, matching the grid's y orientation
    for j in 0..grid.ny {
        let mut row = Vec::with_capacity(row_bytes as usize);
        for i in 0..grid.nx {
            let v = grid.get(i, j);
            let b = if v.is_finite() { (255.0 * (v - lo) / span).clamp(0.0, 255.0) as u8 } else { 255 };
            row.extend_from_slice(&[b, b, b]);
        }
        while row.len() < row_bytes as usize {
            row.push(0);
        }
        out.extend_from_slice(&row);
    }
    out
}

/// Minimal SVG canvas in window coordinates (y up).
pub struct SvgCanvas {
    window: crate::geom::Window,
    px: usize,
    body: String,
}

impl SvgCanvas {
    pub fn new(window: crate::geom::Window, px: usize) -> Self {
        SvgCanvas { window, px, body: String::new() }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        let sx = self.px as f64 / self.window.width();
        let sy = self.px as f64 / self.window.height();
        ((p.x - self.window.x0) * sx, (self.window.y1 - p.y) * sy)
    }

    pub fn raster(&mut self, grid: &Grid) {
        let bmp = grid_bmp(grid);
        let (x0, y0) = self.map(Point2::new(self.window.x0, self.window.y1));
        self.body.push_str(&format!(
            "<image x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" preserveAspectRatio=\"none\" href=\"data:image/bmp;base64,{}\"/>\n",
            self.px,
            self.px,
            base64(&bmp)
        ));
    }

    pub fn polyline(&mut self, pts: &[Point2], color: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        self.body.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
    }

    pub fn circle(&mut self, p: Point2, r_px: f64, color: &str) {
        let (x, y) = self.map(p);
        self.body.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r_px}\" fill=\"{color}\"/>\n"
        ));
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
            self.px, self.px, self.px, self.px
        )?;
        w.write_all(self.body.as_bytes())?;
        writeln!(w, "</svg>")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Window;

    #[test]
    fn base64_known_vectors() {
        assert_eq!(base64(b""), "");
        assert_eq!(base64(b"f"), "Zg==");
        assert_eq!(base64(b"fo"), "Zm8=");
        assert_eq!(base64(b"foo"), "Zm9v");
        assert_eq!(base64(b"foobar"), "Zm9vYmFy");
    }

    #[test]
    fn writers_produce_files() {
        let dir = std::env::temp_dir().join("singloc_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let g = Grid::from_fn(Window::square(1.0), 17, 17, |p| p.x + p.y);
        write_grid_csv(&dir.join("g.csv"), &g).unwrap();
        write_grid_pgm(&dir.join("g.pgm"), &g).unwrap();
        let csv = std::fs::read_to_string(dir.join("g.csv")).unwrap();
        assert!(csv.lines().count() == 18);
        let pgm = std::fs::read(dir.join("g.pgm")).unwrap();
        assert!(pgm.starts_with(b"P5\n17 17\n255\n"));
        assert_eq!(pgm.len(), 13 + 17 * 17);
        let mut svg = SvgCanvas::new(Window::square(1.0), 64);
        svg.raster(&g);
        svg.polyline(
            &[Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)],
            "#ff0000",
            1.0,
        );
        svg.save(&dir.join("g.svg")).unwrap();
        let s = std::fs::read_to_string(dir.join("g.svg")).unwrap();
        assert!(s.contains("data:image/bmp;base64,"));
        assert!(s.contains("polyline"));
    }

    #[test]
    fn deterministic_output() {
        let g = Grid::from_fn(Window::square(1.0), 9, 9, |p| p.x * p.y);
        let dir = std::env::temp_dir().join("singloc_export_det");
        std::fs::create_dir_all(&dir).unwrap();
        write_grid_csv(&dir.join("a.csv"), &g).unwrap();
        write_grid_csv(&dir.join("b.csv"), &g).unwrap();
        let a = std::fs::read(dir.join("a.csv")).unwrap();
        let b = std::fs::read(dir.join("b.csv")).unwrap();
        assert_eq!(a, b);
    }
}
