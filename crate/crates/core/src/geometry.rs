//! Geometric primitives: circles, closed polylines with arc-length
//! parameterization, link positions and minimum distances.
//!
//! Circles are handled with exact trigonometry. General trajectories are
//! closed polylines; a location on them is an arc-length `s` measured from
//! vertex 0 in vertex order, taken modulo the path length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{wrap, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("trajectories overlap or intersect")]
    OverlappingTrajectories,
    #[error("invalid closed path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Point2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Point2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Self) -> F {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &Self) -> (F, F) {
        (self.x - other.x, self.y - other.y)
    }

    /// Direction angle of the vector `self -> other`, in `(-pi, pi]`.
    pub fn heading_to(&self, other: &Self) -> F {
        (other.y - self.y).atan2(other.x - self.x)
    }

    fn lerp(&self, other: &Self, t: F) -> Self {
        Self::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// An angle normalized to `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent, bound = "F: Scalar")]
pub struct AngularPosition<F>(F);

impl<F: Scalar> AngularPosition<F> {
    pub fn new(radians: F) -> Self {
        Self(wrap(radians, F::TAU()))
    }

    pub fn radians(self) -> F {
        self.0
    }

    /// Rotate by `delta` radians (counter-clockwise for positive values).
    pub fn rotate(self, delta: F) -> Self {
        Self::new(self.0 + delta)
    }

    pub fn antipode(self) -> Self {
        self.rotate(F::PI())
    }

    /// Smallest absolute angular difference, in `[0, pi]`.
    pub fn separation(self, other: Self) -> F {
        crate::scalar::residue(self.0 - other.0, F::TAU())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Circle<F> {
    pub center: Point2<F>,
    #[serde(default = "unit_radius")]
    pub radius: F,
}

fn unit_radius<F: Scalar>() -> F {
    F::one()
}

impl<F: Scalar> Circle<F> {
    pub fn new(center: Point2<F>, radius: F) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::Degenerate("non-finite circle center".into()));
        }
        if radius <= F::zero() || !radius.is_finite() {
            return Err(GeometryError::Degenerate(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(x: F, y: F) -> Self {
        Self {
            center: Point2::new(x, y),
            radius: F::one(),
        }
    }

    pub fn point_at(&self, angle: AngularPosition<F>) -> Point2<F> {
        let a = angle.radians();
        Point2::new(
            self.center.x + self.radius * a.cos(),
            self.center.y + self.radius * a.sin(),
        )
    }

    /// Gap between the two circles (negative when they overlap).
    pub fn gap(&self, other: &Self) -> F {
        self.center.dist(&other.center) - self.radius - other.radius
    }

    pub fn disjoint(&self, other: &Self) -> bool {
        self.gap(other) > F::zero()
    }
}

/// Link positions `(phi_ij, phi_ji)`: the angle on each circle closest to the
/// other one. `phi_ji = phi_ij + pi`.
pub fn link_positions<F: Scalar>(
    ci: &Circle<F>,
    cj: &Circle<F>,
) -> Result<(AngularPosition<F>, AngularPosition<F>), GeometryError> {
    if ci.center == cj.center {
        return Err(GeometryError::Degenerate(
            "coincident circle centers".into(),
        ));
    }
    let phi = AngularPosition::new(ci.center.heading_to(&cj.center));
    Ok((phi, phi.antipode()))
}

/// Angle of the line through both centers, reduced to `[0, pi)`.
pub fn line_angle<F: Scalar>(ci: &Circle<F>, cj: &Circle<F>) -> Result<F, GeometryError> {
    if ci.center == cj.center {
        return Err(GeometryError::Degenerate(
            "coincident circle centers".into(),
        ));
    }
    Ok(wrap(ci.center.heading_to(&cj.center), F::PI()))
}

/// Closed polyline trajectory. The closing segment from the last vertex back to
/// vertex 0 is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "F: Scalar")]
pub struct ClosedPath<F> {
    vertices: Vec<Point2<F>>,
    #[serde(skip)]
    cumulative: Vec<F>,
    #[serde(skip)]
    length: F,
}

impl<'de, F: Scalar> Deserialize<'de> for ClosedPath<F> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(bound = "F: Scalar")]
        struct Raw<F> {
            vertices: Vec<Point2<F>>,
        }
        let raw = Raw::<F>::deserialize(d)?;
        ClosedPath::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

impl<F: Scalar> ClosedPath<F> {
    pub fn new(vertices: Vec<Point2<F>>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPath(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidPath("non-finite vertex".into()));
        }
        let n = vertices.len();
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = F::zero();
        cumulative.push(acc);
        for k in 0..n {
            let seg = vertices[k].dist(&vertices[(k + 1) % n]);
            if seg <= F::zero() || seg.is_nan() {
                return Err(GeometryError::InvalidPath(format!(
                    "zero-length segment at vertex {k}"
                )));
            }
            acc = acc + seg;
            cumulative.push(acc);
        }
        let path = Self {
            vertices,
            cumulative,
            length: acc,
        };
        path.check_simple()?;
        Ok(path)
    }

    /// Axis-aligned rectangle with vertex 0 at the lower-left corner, listed
    /// counter-clockwise.
    pub fn rectangle(x0: F, y0: F, w: F, h: F) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x0 + w, y0),
            Point2::new(x0 + w, y0 + h),
            Point2::new(x0, y0 + h),
        ])
    }

    pub fn vertices(&self) -> &[Point2<F>] {
        &self.vertices
    }

    pub fn length(&self) -> F {
        self.length
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len()
    }

    fn segment(&self, k: usize) -> (Point2<F>, Point2<F>) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    /// Point at arc-length `s` from vertex 0 (taken modulo the length).
    pub fn position_at(&self, s: F) -> Point2<F> {
        let s = wrap(s, self.length);
        // cumulative is sorted; find the segment containing s
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite arc length"))
        {
            Ok(k) => k.min(self.vertices.len() - 1),
            Err(k) => k - 1,
        };
        let (a, b) = self.segment(k);
        let seg_len = self.cumulative[k + 1] - self.cumulative[k];
        a.lerp(&b, (s - self.cumulative[k]) / seg_len)
    }

    /// Arc length of the point at parameter `t` on segment `k`, in `[0, length)`.
    fn arc_of(&self, k: usize, t: F) -> F {
        let seg_len = self.cumulative[k + 1] - self.cumulative[k];
        wrap(self.cumulative[k] + t * seg_len, self.length)
    }

    fn check_simple(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        for a in 0..n {
            for b in (a + 1)..n {
                let adjacent = b == a + 1 || (a == 0 && b == n - 1);
                let (p, q) = self.segment(a);
                let (r, s) = self.segment(b);
                if adjacent {
                    // adjacent segments may only share their common vertex
                    let (shared, other_a, other_b) = if b == a + 1 { (q, p, s) } else { (p, q, r) };
                    if folds_back(shared, other_a, other_b) {
                        return Err(GeometryError::InvalidPath(format!(
                            "segments {a} and {b} overlap"
                        )));
                    }
                } else if segments_intersect(p, q, r, s) {
                    return Err(GeometryError::InvalidPath(format!(
                        "segments {a} and {b} intersect"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether `p` lies inside the polygon (even-odd rule).
    pub fn contains(&self, p: &Point2<F>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for k in 0..n {
            let (a, b) = self.segment(k);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Result of [`min_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPair<F> {
    pub distance: F,
    /// Arc-length location on the first path.
    pub s_i: F,
    /// Arc-length location on the second path.
    pub s_j: F,
    pub point_i: Point2<F>,
    pub point_j: Point2<F>,
}

/// Minimum Euclidean distance between two disjoint closed polylines, with the
/// arc-length locations of the closest points.
///
/// When two segments run parallel at the minimum distance the closest pair is
/// the middle of their overlap. Remaining ties are broken by the
/// lexicographically smallest `(s_i, s_j)`.
pub fn min_distance<F: Scalar>(
    pi: &ClosedPath<F>,
    pj: &ClosedPath<F>,
) -> Result<ClosestPair<F>, GeometryError> {
    // (distance, segment on i, parameter on i, segment on j, parameter on j)
    let mut candidates: Vec<(F, usize, F, usize, F)> = Vec::new();
    for a in 0..pi.segment_count() {
        let (p, q) = pi.segment(a);
        for b in 0..pj.segment_count() {
            let (r, s) = pj.segment(b);
            if segments_intersect(p, q, r, s) {
                return Err(GeometryError::OverlappingTrajectories);
            }
            // for non-crossing segments the minimum is attained at an endpoint
            for (end, t_end) in [(p, F::zero()), (q, F::one())] {
                let t = project(&end, &r, &s);
                candidates.push((end.dist(&r.lerp(&s, t)), a, t_end, b, t));
            }
            for (end, t_end) in [(r, F::zero()), (s, F::one())] {
                let t = project(&end, &p, &q);
                candidates.push((end.dist(&p.lerp(&q, t)), a, t, b, t_end));
            }
        }
    }
    // nested paths never cross but are not disjoint regions either
    if pi.contains(&pj.vertices[0]) || pj.contains(&pi.vertices[0]) {
        return Err(GeometryError::OverlappingTrajectories);
    }
    let best = candidates.iter().map(|c| c.0).fold(F::infinity(), F::min);
    let tol = F::tie_tol() * (F::one() + best);
    let tied: Vec<_> = candidates
        .into_iter()
        .filter(|c| c.0 <= best + tol)
        .collect();

    let make = |a: usize, ti: F, b: usize, tj: F| {
        let (p, q) = pi.segment(a);
        let (r, s) = pj.segment(b);
        let point_i = p.lerp(&q, ti);
        let point_j = r.lerp(&s, tj);
        ClosestPair {
            distance: point_i.dist(&point_j),
            s_i: pi.arc_of(a, ti),
            s_j: pj.arc_of(b, tj),
            point_i,
            point_j,
        }
    };
    let mut overlaps = Vec::new();
    let mut points = Vec::new();
    for c in &tied {
        points.push(make(c.1, c.2, c.3, c.4));
        let group = tied.iter().filter(|d| d.1 == c.1 && d.3 == c.3);
        let (lo, hi) = group.fold((F::infinity(), F::neg_infinity()), |(lo, hi), d| {
            (lo.min(d.2), hi.max(d.2))
        });
        let seg_len = pi.segment(c.1).0.dist(&pi.segment(c.1).1);
        if (hi - lo) * seg_len > tol {
            let mid = (lo + hi) * F::lit(0.5);
            let (r, s) = pj.segment(c.3);
            let tj = project(&pi.segment(c.1).0.lerp(&pi.segment(c.1).1, mid), &r, &s);
            overlaps.push(make(c.1, mid, c.3, tj));
        }
    }
    let pool = if overlaps.is_empty() {
        points
    } else {
        overlaps
    };
    pool.into_iter()
        .min_by(|x, y| {
            (x.s_i, x.s_j)
                .partial_cmp(&(y.s_i, y.s_j))
                .expect("finite arc lengths")
        })
        .ok_or_else(|| GeometryError::Degenerate("empty path".into()))
}

/// Parameter in `[0, 1]` of the projection of `p` onto segment `a-b`.
fn project<F: Scalar>(p: &Point2<F>, a: &Point2<F>, b: &Point2<F>) -> F {
    let (dx, dy) = b.sub(a);
    let (px, py) = p.sub(a);
    let len2 = dx * dx + dy * dy;
    let t = (px * dx + py * dy) / len2;
    t.max(F::zero()).min(F::one())
}

fn orient<F: Scalar>(a: Point2<F>, b: Point2<F>, c: Point2<F>) -> F {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment<F: Scalar>(a: Point2<F>, b: Point2<F>, p: Point2<F>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
fn segments_intersect<F: Scalar>(p: Point2<F>, q: Point2<F>, r: Point2<F>, s: Point2<F>) -> bool {
    let d1 = orient(r, s, p);
    let d2 = orient(r, s, q);
    let d3 = orient(p, q, r);
    let d4 = orient(p, q, s);
    let zero = F::zero();
    if ((d1 > zero && d2 < zero) || (d1 < zero && d2 > zero))
        && ((d3 > zero && d4 < zero) || (d3 < zero && d4 > zero))
    {
        return true;
    }
    (d1 == zero && on_segment(r, s, p))
        || (d2 == zero && on_segment(r, s, q))
        || (d3 == zero && on_segment(p, q, r))
        || (d4 == zero && on_segment(p, q, s))
}

/// Adjacent segments `shared-a` and `shared-b` fold back onto each other.
fn folds_back<F: Scalar>(shared: Point2<F>, a: Point2<F>, b: Point2<F>) -> bool {
    if orient(shared, a, b) != F::zero() {
        return false;
    }
    let (ax, ay) = a.sub(&shared);
    let (bx, by) = b.sub(&shared);
    ax * bx + ay * by > F::zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn unit_square(x: f64, y: f64) -> ClosedPath<f64> {
        ClosedPath::rectangle(x, y, 1.0, 1.0).unwrap()
    }

    #[test]
    fn link_positions_axis_and_diagonal() {
        let o = Circle::<f64>::unit(0.0, 0.0);
        let (a, b) = link_positions(&o, &Circle::unit(3.0, 0.0)).unwrap();
        assert!(a.radians().abs() < 1e-12 && (b.radians() - PI).abs() < 1e-12);
        let (a, b) = link_positions(&o, &Circle::unit(0.0, 3.0)).unwrap();
        assert!((a.radians() - FRAC_PI_2).abs() < 1e-12);
        assert!((b.radians() - 3.0 * FRAC_PI_2).abs() < 1e-12);
        let (a, b) = link_positions(&o, &Circle::unit(3.0, 3.0)).unwrap();
        // direction (1,1)/sqrt2
        let v = o.point_at(a);
        assert!((v.x - v.y).abs() < 1e-12 && v.x > 0.0);
        assert!((a.radians() - FRAC_PI_4).abs() < 1e-12);
        assert!((b.radians() - 5.0 * FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn coincident_centers_are_degenerate() {
        let c = Circle::unit(1.0, 1.0);
        assert!(matches!(
            link_positions(&c, &c),
            Err(GeometryError::Degenerate(_))
        ));
        assert!(matches!(
            line_angle(&c, &c),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn line_angle_reduced_mod_pi() {
        let o = Circle::<f64>::unit(0.0, 0.0);
        assert!(line_angle(&o, &Circle::unit(3.0, 0.0)).unwrap().abs() < 1e-12);
        assert!((line_angle(&o, &Circle::unit(0.0, 3.0)).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!(
            (line_angle(&o, &Circle::unit(-3.0, 3.0)).unwrap() - 3.0 * FRAC_PI_4).abs() < 1e-12
        );
        let back = line_angle(&Circle::unit(-3.0, 3.0), &o).unwrap();
        assert!((back - 3.0 * FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn circle_rejects_bad_radius() {
        assert!(Circle::new(Point2::new(0.0, 0.0), 0.0).is_err());
        assert!(Circle::new(Point2::new(0.0, f64::NAN), 1.0).is_err());
    }

    #[test]
    fn squares_side_by_side() {
        let a = unit_square(0.0, 0.0);
        let b = unit_square(3.0, 0.0);
        let c = min_distance(&a, &b).unwrap();
        assert!((c.distance - 2.0).abs() < 1e-12);
        // facing edges: a's right edge spans s in [1,2], b's left edge s in [3,4];
        // the link sits in the middle of the overlap
        assert!((c.s_i - 1.5).abs() < 1e-12);
        assert!((c.s_j - 3.5).abs() < 1e-12);
    }

    #[test]
    fn squares_stacked_gap() {
        let a = unit_square(0.0, 0.0);
        let b = unit_square(0.0, 5.0);
        assert!((min_distance(&a, &b).unwrap().distance - 4.0).abs() < 1e-12);
    }

    #[test]
    fn intersecting_paths_rejected() {
        let a = unit_square(0.0, 0.0);
        let b = unit_square(0.5, 0.5);
        assert_eq!(
            min_distance(&a, &b),
            Err(GeometryError::OverlappingTrajectories)
        );
        let outer = ClosedPath::rectangle(-5.0, -5.0, 10.0, 10.0).unwrap();
        assert_eq!(
            min_distance(&outer, &a),
            Err(GeometryError::OverlappingTrajectories)
        );
    }

    #[test]
    fn position_at_walks_the_perimeter() {
        let sq = unit_square(0.0, 0.0);
        assert_eq!(sq.position_at(0.0), Point2::new(0.0, 0.0));
        assert_eq!(sq.position_at(2.0), Point2::new(1.0, 1.0));
        assert_eq!(sq.position_at(4.0), sq.position_at(0.0));
        let p = sq.position_at(3.5);
        assert!((p.x - 0.0).abs() < 1e-12 && (p.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_paths() {
        assert!(
            ClosedPath::<f64>::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).is_err()
        );
        // bow tie
        let bow = ClosedPath::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        assert!(matches!(bow, Err(GeometryError::InvalidPath(_))));
        let dup = ClosedPath::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn generic_over_f32() {
        let a = ClosedPath::<f32>::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = ClosedPath::<f32>::rectangle(0.0, 5.0, 1.0, 1.0).unwrap();
        assert!((min_distance(&a, &b).unwrap().distance - 4.0).abs() < 1e-5);
        let (phi, back) =
            link_positions(&Circle::<f32>::unit(0.0, 0.0), &Circle::unit(0.0, 3.0)).unwrap();
        assert!((phi.radians() - std::f32::consts::FRAC_PI_2).abs() < 1e-6);
        assert!((back.separation(phi) - std::f32::consts::PI).abs() < 1e-5);
    }
}
