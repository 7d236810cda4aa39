use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Planar point in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm_sq().sqrt()
    }

    pub fn distance_sq(self, other: Self) -> T {
        (self - other).norm_sq()
    }
}

impl<T: Real> Add for Point<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn centroid(&self) -> Point<T> {
        let half = T::lit(0.5);
        Point::new(
            (self.x_min + self.x_max) * half,
            (self.y_min + self.y_max) * half,
        )
    }

    /// Closed containment.
    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn to_polygon(&self) -> ConvexPolygon<T> {
        ConvexPolygon {
            vertices: vec![
                Point::new(self.x_min, self.y_min),
                Point::new(self.x_max, self.y_min),
                Point::new(self.x_max, self.y_max),
                Point::new(self.x_min, self.y_max),
            ],
        }
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon<T> {
    pub vertices: Vec<Point<T>>,
}

impl<T: Real> ConvexPolygon<T> {
    /// Shoelace area.
    pub fn area(&self) -> T {
        let n = self.vertices.len();
        if n < 3 {
            return T::zero();
        }
        let twice = (0..n).fold(T::zero(), |acc, k| {
            acc + self.vertices[k].cross(self.vertices[(k + 1) % n])
        });
        twice.abs() * T::lit(0.5)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Closed containment test against every edge.
    pub fn contains(&self, p: Point<T>) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            (b - a).cross(p - a) >= T::zero()
        })
    }

    pub fn bounding_box(&self) -> Rect<T> {
        let mut r = Rect::new(
            T::infinity(),
            T::infinity(),
            T::neg_infinity(),
            T::neg_infinity(),
        );
        for v in &self.vertices {
            r.x_min = r.x_min.min(v.x);
            r.y_min = r.y_min.min(v.y);
            r.x_max = r.x_max.max(v.x);
            r.y_max = r.y_max.max(v.y);
        }
        r
    }

    /// Keeps the part where `normal . p <= offset` (Sutherland-Hodgman).
    pub fn clip(&self, normal: Point<T>, offset: T) -> Self {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let da = normal.dot(a) - offset;
            let db = normal.dot(b) - offset;
            let a_in = da <= T::zero();
            let b_in = db <= T::zero();
            if a_in {
                out.push(a);
            }
            if a_in != b_in {
                let t = da / (da - db);
                out.push(a + (b - a) * t);
            }
        }
        Self { vertices: out }
    }
}

/// Voronoi cells of `sites` clipped to `region`, in site order.
///
/// Cell `i` is the region minus every half-plane closer to another site.
pub fn voronoi_cells<T: Real>(sites: &[Point<T>], region: &Rect<T>) -> Vec<ConvexPolygon<T>> {
    let half = T::lit(0.5);
    sites
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let mut cell = region.to_polygon();
            // Nearer sites are likelier to cut deep; clipping them first keeps
            // the working polygon small.
            let mut order: Vec<usize> = (0..sites.len()).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                yi.distance_sq(sites[a])
                    .partial_cmp(&yi.distance_sq(sites[b]))
                    .unwrap_or(Ordering::Equal)
            });
            for j in order {
                let yj = sites[j];
                // Closer to yi than to yj: (yj - yi) . p <= (|yj|^2 - |yi|^2) / 2.
                let normal = yj - yi;
                let offset = (yj.norm_sq() - yi.norm_sq()) * half;
                cell = cell.clip(normal, offset);
                if cell.is_empty() {
                    break;
                }
            }
            cell
        })
        .collect()
}
