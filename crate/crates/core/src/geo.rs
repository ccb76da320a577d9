use serde::{Deserialize, Serialize};

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned study area anchored at the origin, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Default for Area {
    fn default() -> Self {
        Self {
            width: 10_000.0,
            height: 10_000.0,
        }
    }
}

impl Area {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    /// Cell centers of a `rows × cols` grid laid over the area, row-major
    /// starting at the origin corner.
    pub fn grid_centers(&self, rows: usize, cols: usize) -> Vec<Point> {
        let cw = self.width / cols as f64;
        let ch = self.height / rows as f64;
        (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| Point::new((c as f64 + 0.5) * cw, (r as f64 + 0.5) * ch))
            })
            .collect()
    }
}
