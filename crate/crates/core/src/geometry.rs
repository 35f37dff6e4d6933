//! Port boundary polygons, winding-number containment and the speed-dependent
//! elliptical ship domain.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::dynamics::{ShipParams, State};

/// Distance below which a point counts as lying on an edge [m].
pub const EDGE_EPS: f64 = 1e-9;
/// Tolerance on the winding angle when testing containment [rad].
pub const WINDING_TOL: f64 = 1e-6;
/// Default number of ship-domain vertices.
pub const DEFAULT_DOMAIN_VERTICES: usize = 16;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 4 stored points (3 distinct), got {0}")]
    TooFewPoints(usize),
    #[error("polygon is not closed: first point {first:?} differs from last point {last:?}")]
    NotClosed { first: Point, last: Point },
    #[error("polygon vertices {0} and {1} coincide")]
    RepeatedVertex(usize, usize),
    #[error("polygon vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("ship domain needs at least 8 vertices, got {0}")]
    TooFewDomainVertices(usize),
}

/// Closed simple polygon with counter-clockwise vertex order.
///
/// "Counter-clockwise" refers to the standard orientation in the (x, y) plane,
/// i.e. positive signed area.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon from a closed vertex list (first point repeated last).
    /// Clockwise input is reversed.
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        let n = points.len();
        for (i, p) in points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(GeometryError::NonFinite(i));
            }
        }
        if n < 4 {
            if n >= 1 && points[0] != points[n - 1] {
                return Err(GeometryError::NotClosed {
                    first: points[0],
                    last: points[n - 1],
                });
            }
            return Err(GeometryError::TooFewPoints(n));
        }
        if points[0] != points[n - 1] {
            return Err(GeometryError::NotClosed {
                first: points[0],
                last: points[n - 1],
            });
        }
        for i in 0..n - 1 {
            if points[i] == points[i + 1] {
                return Err(GeometryError::RepeatedVertex(i, i + 1));
            }
        }
        let mut poly = Self { vertices: points };
        let area = poly.signed_area();
        if area == 0.0 {
            return Err(GeometryError::Degenerate);
        }
        if area < 0.0 {
            poly.vertices.reverse();
        }
        Ok(poly)
    }

    /// Builds a polygon from an open vertex list by appending the first point.
    pub fn closing(mut points: Vec<Point>) -> Result<Self, GeometryError> {
        if let Some(&first) = points.first() {
            if points.last() != Some(&first) || points.len() == 1 {
                points.push(first);
            }
        }
        Self::new(points)
    }

    /// Stored vertices, closed (first == last).
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Shoelace area, positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
    }

    /// (min_x, min_y, max_x, max_y).
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1])),
        )
    }

    /// Smallest distance from `q` to any edge.
    pub fn boundary_distance(&self, q: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(q, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Euclidean distance from `q` to the segment `ab`.
pub fn segment_distance(q: Point, a: Point, b: Point) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (q[0] - a[0], q[1] - a[1]);
    let len_sq = ex * ex + ey * ey;
    let t = if len_sq > 0.0 {
        ((wx * ex + wy * ey) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (wx - t * ex).hypot(wy - t * ey)
}

/// Outcome of a winding-number evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Winding {
    /// Sum of signed subtended angles [rad].
    Angle(f64),
    /// The point lies within [`EDGE_EPS`] of an edge.
    OnBoundary,
}

impl Winding {
    /// Angle with boundary points mapped to 0 (outside).
    pub fn angle_or_outside(self) -> f64 {
        match self {
            Winding::Angle(a) => a,
            Winding::OnBoundary => 0.0,
        }
    }
}

/// Sum of the signed angles subtended at `q` by every polygon edge.
pub fn winding_number(q: Point, polygon: &Polygon) -> Winding {
    let mut total = 0.0;
    for (a, b) in polygon.edges() {
        if segment_distance(q, a, b) <= EDGE_EPS {
            return Winding::OnBoundary;
        }
        let (ax, ay) = (a[0] - q[0], a[1] - q[1]);
        let (bx, by) = (b[0] - q[0], b[1] - q[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    Winding::Angle(total)
}

/// True iff the winding angle is within [`WINDING_TOL`] of 2pi.
pub fn is_inside(q: Point, polygon: &Polygon) -> bool {
    match winding_number(q, polygon) {
        Winding::Angle(a) => (a - TAU).abs() <= WINDING_TOL,
        Winding::OnBoundary => false,
    }
}

/// Distance to the boundary, positive inside and negative outside.
pub fn signed_distance(q: Point, polygon: &Polygon) -> f64 {
    let d = polygon.boundary_distance(q);
    if is_inside(q, polygon) {
        d
    } else {
        -d
    }
}

/// Elliptical ship domain sampled at evenly spaced parameter angles.
#[derive(Debug, Clone, PartialEq)]
pub struct ShipDomain {
    pub vertices: Vec<Point>,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub center: Point,
    pub heading: f64,
}

/// Domain half-axes for a given resultant speed.
pub fn domain_axes(speed: f64, params: &ShipParams) -> (f64, f64) {
    let p = &params.particulars;
    let s = speed / p.nominal_speed;
    (
        0.5 * p.length * (1.0 + params.domain.k_a * s),
        0.5 * p.breadth * (1.0 + params.domain.k_b * s),
    )
}

/// Samples the speed-dependent domain ellipse around midship.
pub fn ship_domain_vertices(
    state: &State,
    params: &ShipParams,
    n_sd: usize,
) -> Result<ShipDomain, GeometryError> {
    if n_sd < 8 {
        return Err(GeometryError::TooFewDomainVertices(n_sd));
    }
    let (a, b) = domain_axes(state.speed(), params);
    let (s, c) = state.psi.sin_cos();
    let vertices = (0..n_sd)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / n_sd as f64;
            let (ex, ey) = (a * t.cos(), b * t.sin());
            [state.x + ex * c - ey * s, state.y + ex * s + ey * c]
        })
        .collect();
    Ok(ShipDomain {
        vertices,
        semi_major: a,
        semi_minor: b,
        center: [state.x, state.y],
        heading: state.psi,
    })
}

/// Winding angle minus 2pi for every domain vertex. Boundary vertices count as
/// outside.
pub fn collision_residuals(
    state: &State,
    polygon: &Polygon,
    params: &ShipParams,
    n_sd: usize,
) -> Result<Vec<f64>, GeometryError> {
    let dom = ship_domain_vertices(state, params, n_sd)?;
    Ok(dom
        .vertices
        .iter()
        .map(|&q| winding_number(q, polygon).angle_or_outside() - TAU)
        .collect())
}

/// True iff every domain vertex lies inside the polygon.
pub fn domain_inside(
    state: &State,
    polygon: &Polygon,
    params: &ShipParams,
    n_sd: usize,
) -> Result<bool, GeometryError> {
    let dom = ship_domain_vertices(state, params, n_sd)?;
    Ok(dom.vertices.iter().all(|&q| is_inside(q, polygon)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::closing(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn square_examples() {
        let sq = unit_square();
        let w = winding_number([0.5, 0.5], &sq).angle_or_outside();
        assert!((w - TAU).abs() < 1e-12);
        let w = winding_number([10.0, 10.0], &sq).angle_or_outside();
        assert!(w.abs() < 1e-12);
        assert!(is_inside([0.5, 0.5], &sq));
        assert!(!is_inside([10.0, 10.0], &sq));
        assert_eq!(winding_number([1.0, 0.5], &sq), Winding::OnBoundary);
        assert!(!is_inside([0.0, 0.0], &sq));
    }

    #[test]
    fn loader_normalises_orientation() {
        let cw = Polygon::closing(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(cw.signed_area() > 0.0);
        assert!(is_inside([0.5, 0.5], &cw));
    }

    #[test]
    fn loader_rejects_bad_input() {
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]),
            Err(GeometryError::NotClosed { .. })
        ));
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]),
            Err(GeometryError::TooFewPoints(3))
        ));
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]),
            Err(GeometryError::RepeatedVertex(1, 2))
        ));
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 0.0]]),
            Err(GeometryError::Degenerate)
        ));
    }

    #[test]
    fn domain_at_rest_is_hull_size() {
        let p = ShipParams::ship_a();
        let d = ship_domain_vertices(&State::new(5.0, 2.0, 0.0, 0.0, 0.0, 0.0), &p, 16).unwrap();
        assert_eq!(d.semi_major, 1.5);
        assert_eq!(d.semi_minor, 0.2);
        assert_eq!(d.vertices.len(), 16);
        assert!((d.vertices[0][0] - 6.5).abs() < 1e-15);
        assert!((d.vertices[8][0] - 3.5).abs() < 1e-12);
        assert!(ship_domain_vertices(&State::default(), &p, 7).is_err());
    }

    #[test]
    fn domain_grows_with_speed() {
        let p = ShipParams::ship_a();
        let slow = ship_domain_vertices(&State::new(0.0, 0.0, 0.0, 0.2, 0.0, 0.0), &p, 16).unwrap();
        let fast = ship_domain_vertices(&State::new(0.0, 0.0, 0.0, 0.4, 0.0, 0.0), &p, 16).unwrap();
        assert!(fast.semi_major > slow.semi_major);
        assert!(fast.semi_minor > slow.semi_minor);
    }

    #[test]
    fn collision_residual_shapes() {
        let p = ShipParams::ship_a();
        let big = Polygon::closing(vec![[-50.0, -50.0], [50.0, -50.0], [50.0, 50.0], [-50.0, 50.0]])
            .unwrap();
        let r = collision_residuals(&State::new(0.0, 0.0, 0.3, 0.1, 0.0, 0.0), &big, &p, 16).unwrap();
        assert_eq!(r.len(), 16);
        assert!(r.iter().all(|x| x.abs() < WINDING_TOL));
        let r = collision_residuals(&State::new(49.5, 0.0, 0.0, 0.1, 0.0, 0.0), &big, &p, 16).unwrap();
        assert!(r.iter().any(|x| (x + TAU).abs() < 1e-9));
    }

    #[test]
    fn signed_distance_sign() {
        let sq = unit_square();
        assert!((signed_distance([0.5, 0.25], &sq) - 0.25).abs() < 1e-15);
        assert!((signed_distance([1.5, 0.5], &sq) + 0.5).abs() < 1e-15);
    }
}
