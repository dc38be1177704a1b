//! SVG diagrams in the value plane, on a 1000×1000 view box.

use std::fmt::Write;

use fsforge_core::Complex64;

const SIZE: f64 = 1000.0;
const MARGIN: f64 = 60.0;

/// Affine map from a bounding box in ℂ to view-box coordinates, with equal
/// scales on both axes and `Im` pointing up.
struct Frame {
    center: Complex64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[Complex64]) -> Self {
        let (mut lo, mut hi) = (Complex64::new(f64::MAX, f64::MAX), Complex64::new(f64::MIN, f64::MIN));
        for p in points.iter().filter(|p| p.is_finite()) {
            lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        if lo.re > hi.re {
            return Frame {
                center: Complex64::new(0.0, 0.0),
                scale: 1.0,
            };
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-9);
        Frame {
            center: (lo + hi) * 0.5,
            scale: (SIZE - 2.0 * MARGIN) / span,
        }
    }

    fn map(&self, z: Complex64) -> (f64, f64) {
        let d = (z - self.center) * self.scale;
        (SIZE / 2.0 + d.re, SIZE / 2.0 - d.im)
    }
}

/// Convex hull by the monotone chain, counterclockwise.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = points.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: Complex64, a: Complex64, b: Complex64| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// What to draw: critical values, an optional hull, segments and polylines.
#[derive(Default)]
pub struct ValuePlot {
    pub values: Vec<Complex64>,
    pub hull: bool,
    pub segments: Vec<(Complex64, Complex64)>,
    pub polylines: Vec<Vec<Complex64>>,
    /// Direction of the reference ray from the origin, if drawn.
    pub ray: Option<f64>,
}

impl ValuePlot {
    pub fn render(&self) -> String {
        let mut extent = self.values.clone();
        extent.extend(self.polylines.iter().flatten().copied());
        if self.ray.is_some() {
            extent.push(Complex64::new(0.0, 0.0));
        }
        let frame = Frame::fit(&extent);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1000 1000" width="1000" height="1000">"#
        );
        let _ = writeln!(out, r##"<rect width="1000" height="1000" fill="#ffffff"/>"##);
        if let Some(alpha) = self.ray {
            let (x0, y0) = frame.map(Complex64::new(0.0, 0.0));
            let (x1, y1) = (x0 + 2000.0 * alpha.cos(), y0 - 2000.0 * alpha.sin());
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="#999999" stroke-dasharray="8 6"/>"##
            );
        }
        if self.hull {
            let hull = convex_hull(&self.values);
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="#eef3fb" stroke="#6b8cc7" stroke-width="2"/>"##,
                points_attr(&frame, &hull)
            );
        }
        for &(a, b) in &self.segments {
            let ((x0, y0), (x1, y1)) = (frame.map(a), frame.map(b));
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="#555555" stroke-width="1.5"/>"##
            );
        }
        for line in &self.polylines {
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="3"/>"##,
                points_attr(&frame, line)
            );
        }
        for (k, &w) in self.values.iter().enumerate() {
            let (x, y) = frame.map(w);
            let _ = writeln!(out, r##"<circle cx="{x:.3}" cy="{y:.3}" r="9" fill="#1f3a68"/>"##);
            let _ = writeln!(
                out,
                r##"<text x="{:.3}" y="{:.3}" font-size="24" font-family="sans-serif">{k}</text>"##,
                x + 12.0,
                y - 12.0
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn points_attr(frame: &Frame, points: &[Complex64]) -> String {
    points
        .iter()
        .map(|&z| {
            let (x, y) = frame.map(z);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Two side-by-side heat maps of nonnegative fields on an `ns × nt` grid,
/// each downsampled to at most 64 cells per side.
pub fn heat_maps(ns: usize, nt: usize, panels: &[(&str, &[f64])]) -> String {
    let cells = 64usize;
    let (bs, bt) = (ns.div_ceil(cells), nt.div_ceil(cells));
    let (cs, ct) = (ns.div_ceil(bs), nt.div_ceil(bt));
    let panel_width = SIZE / panels.len().max(1) as f64;
    let side = panel_width - 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1000 1000" width="1000" height="1000">"#
    );
    let _ = writeln!(out, r##"<rect width="1000" height="1000" fill="#ffffff"/>"##);
    for (p, (title, data)) in panels.iter().enumerate() {
        let mut block = vec![0.0f64; cs * ct];
        for i in 0..ns {
            for j in 0..nt {
                let b = &mut block[(i / bs) * ct + j / bt];
                *b = b.max(data[i * nt + j]);
            }
        }
        let max = block.iter().copied().fold(0.0, f64::max);
        let x0 = p as f64 * panel_width + 20.0;
        let y0 = (SIZE - side) / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{x0:.3}" y="{:.3}" font-size="24" font-family="sans-serif">{title} (max {max:.3e})</text>"#,
            y0 - 16.0
        );
        let (w, h) = (side / cs as f64, side / ct as f64);
        for a in 0..cs {
            for b in 0..ct {
                let level = if max > 0.0 { block[a * ct + b] / max } else { 0.0 };
                let shade = (255.0 * (1.0 - level)).round() as u8;
                // s runs left to right, t bottom to top.
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#ff{shade:02x}{shade:02x}"/>"##,
                    x0 + a as f64 * w,
                    y0 + (ct - 1 - b) as f64 * h,
                    w + 0.05,
                    h + 0.05
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_drops_interior_points() {
        let pts = [
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.5, 0.5),
            Complex64::new(1.0, 0.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 3);
        assert!(!hull.contains(&Complex64::new(0.5, 0.5)));
    }

    #[test]
    fn plot_has_one_circle_per_value() {
        let plot = ValuePlot {
            values: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.5)],
            hull: true,
            segments: vec![(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.5))],
            polylines: vec![vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.5)]],
            ray: Some(1.0),
        };
        let svg = plot.render();
        assert!(svg.contains(r#"viewBox="0 0 1000 1000""#));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 1);
    }

    #[test]
    fn heat_map_downsamples() {
        let data = vec![1.0; 128 * 128];
        let svg = heat_maps(128, 128, &[("a", &data), ("b", &data)]);
        assert_eq!(svg.matches("<rect").count(), 1 + 2 * 64 * 64);
    }
}
