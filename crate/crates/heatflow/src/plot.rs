//! SVG pictures of support arcs, branch points, zeros, disks and trajectories.

use num_complex::Complex64;
use svg::node::element::{Circle, Polyline, Rectangle};
use svg::Document;

use crate::dynamics::TrajectoryBundle;
use crate::measure::LimitMeasure;

type C = Complex64;

#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub arcs: Vec<Vec<C>>,
    pub branch_points: Vec<C>,
    pub zeros: Vec<C>,
    pub disks: Vec<(C, f64)>,
    pub trajectories: Vec<Vec<C>>,
}

impl Scene {
    pub fn with_measure(mut self, lm: &LimitMeasure) -> Self {
        self.arcs.extend(lm.arcs.iter().map(|a| a.samples.iter().map(|s| s.z).collect()));
        self.branch_points.extend(lm.branch_points.iter().map(|b| b.z));
        self
    }

    pub fn with_zeros(mut self, zs: &[C]) -> Self {
        self.zeros.extend_from_slice(zs);
        self
    }

    pub fn with_disks(mut self, disks: &[(C, f64)]) -> Self {
        self.disks.extend_from_slice(disks);
        self
    }

    /// One path per particle.
    pub fn with_trajectories(mut self, b: &TrajectoryBundle) -> Self {
        let n = b.positions.first().map_or(0, Vec::len);
        self.trajectories.extend((0..n).map(|j| b.positions.iter().map(|p| p[j]).collect()));
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.arcs.iter().flatten().chain(&self.branch_points).chain(&self.zeros).chain(self.trajectories.iter().flatten());
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut grow = |x: f64, y: f64| {
            b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
        };
        pts.for_each(|z| grow(z.re, z.im));
        for (c, r) in &self.disks {
            grow(c.re - r, c.im - r);
            grow(c.re + r, c.im + r);
        }
        if !b.0.is_finite() {
            return (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.1 * (b.1 - b.0).max(b.3 - b.2).max(1e-9);
        (b.0 - pad, b.1 + pad, b.2 - pad, b.3 + pad)
    }

    /// Square-pixel rendering at the given width.
    pub fn render(&self, width: f64) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let s = width / (x1 - x0);
        let height = (y1 - y0) * s;
        let map = |z: C| ((z.re - x0) * s, (y1 - z.im) * s);
        let pts = |zs: &[C]| zs.iter().map(|&z| map(z)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ");
        let mut doc = Document::new().set("viewBox", (0.0, 0.0, width, height)).set("width", width).set("height", height);
        doc = doc.add(Rectangle::new().set("width", width).set("height", height).set("fill", "white"));
        for (c, r) in &self.disks {
            let (x, y) = map(*c);
            doc = doc.add(Circle::new().set("cx", x).set("cy", y).set("r", r * s).set("fill", "none").set("stroke", "#999").set("stroke-dasharray", "4 3"));
        }
        for tr in &self.trajectories {
            doc = doc.add(Polyline::new().set("points", pts(tr)).set("fill", "none").set("stroke", "orange").set("stroke-width", 0.8));
        }
        for arc in &self.arcs {
            doc = doc.add(Polyline::new().set("points", pts(arc)).set("fill", "none").set("stroke", "#1f4fd8").set("stroke-width", 1.6));
        }
        for z in &self.zeros {
            let (x, y) = map(*z);
            doc = doc.add(Circle::new().set("cx", x).set("cy", y).set("r", 1.8).set("fill", "black"));
        }
        for z in &self.branch_points {
            let (x, y) = map(*z);
            doc = doc.add(Circle::new().set("cx", x).set("cy", y).set("r", 3.5).set("fill", "red"));
        }
        doc.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_element() {
        let sc = Scene {
            arcs: vec![vec![C::new(-2.0, 0.0), C::new(2.0, 0.0)]],
            branch_points: vec![C::new(-2.0, 0.0), C::new(2.0, 0.0)],
            zeros: vec![C::new(0.0, 0.0)],
            disks: vec![(C::new(0.0, 0.0), 2.2)],
            trajectories: vec![vec![C::new(0.0, 0.1), C::new(0.5, 0.1)]],
        };
        let out = sc.render(400.0);
        assert!(out.starts_with("<svg"));
        assert_eq!(out.matches("<polyline").count(), 2);
        assert_eq!(out.matches("<circle").count(), 4);
        assert_eq!(Scene::default().render(100.0).matches("<rect").count(), 1);
    }
}
