//! Vector algebra, reflecting surfaces, absorbing spheres and mirror images.
//!
//! All lengths are in micrometers. Plane normals point into the valid
//! (molecule-accessible) domain, so "inside the domain" is a single sign
//! test on [`Plane::signed_distance`].

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::real::Real;

/// Tolerance on unit length and orthogonality of surface frames.
pub const FRAME_TOLERANCE: f64 = 1e-12;

/// Two image centers whose distances from the real receiver differ by less
/// than this (relative) are treated as equidistant.
const IMAGE_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.as_f64(), self.y.as_f64(), self.z.as_f64()]
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a zero or
    /// non-finite vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n.is_finite() && n > T::zero() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Infinite reflecting plane. The normal is unit length and points into the
/// valid domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<T> {
    point: Vec3<T>,
    normal: Vec3<T>,
}

impl<T: Real> Plane<T> {
    /// Builds a plane through `point`; `normal` is normalized here.
    pub fn new(point: Vec3<T>, normal: Vec3<T>) -> Result<Self> {
        if !point.is_finite() {
            return Err(Error::InvalidParameter("plane point must be finite".into()));
        }
        let normal = normal.normalized().ok_or_else(|| {
            Error::InvalidParameter("plane normal must be a non-zero finite vector".into())
        })?;
        Ok(Self { point, normal })
    }

    /// Plane `x = x0` with normal `+x`.
    pub fn x_equals(x0: T) -> Self {
        Self {
            point: Vec3::new(x0, T::zero(), T::zero()),
            normal: Vec3::new(T::one(), T::zero(), T::zero()),
        }
    }

    #[inline]
    pub fn point(&self) -> Vec3<T> {
        self.point
    }

    #[inline]
    pub fn normal(&self) -> Vec3<T> {
        self.normal
    }

    /// Positive on the valid side.
    #[inline]
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        (p - self.point).dot(self.normal)
    }

    /// Same plane with the opposite valid side.
    pub fn flipped(&self) -> Self {
        Self {
            point: self.point,
            normal: -self.normal,
        }
    }
}

/// Finite rectangular reflecting layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    center: Vec3<T>,
    normal: Vec3<T>,
    u_axis: Vec3<T>,
    v_axis: Vec3<T>,
    half_u: T,
    half_v: T,
}

impl<T: Real> Rect<T> {
    /// `v_axis` is completed as `normal × u_axis`.
    pub fn new(
        center: Vec3<T>,
        normal: Vec3<T>,
        u_axis: Vec3<T>,
        half_u: T,
        half_v: T,
    ) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter("rect center must be finite".into()));
        }
        if !(half_u > T::zero() && half_v > T::zero() && half_u.is_finite() && half_v.is_finite()) {
            return Err(Error::InvalidParameter(
                "rect half extents must be finite and > 0".into(),
            ));
        }
        let normal = normal.normalized().ok_or_else(|| {
            Error::InvalidParameter("rect normal must be a non-zero finite vector".into())
        })?;
        let u_axis = u_axis.normalized().ok_or_else(|| {
            Error::InvalidParameter("rect u axis must be a non-zero finite vector".into())
        })?;
        if normal.dot(u_axis).abs() > T::lit(FRAME_TOLERANCE) {
            return Err(Error::InvalidParameter(
                "rect u axis must be orthogonal to its normal".into(),
            ));
        }
        let v_axis = normal.cross(u_axis);
        Ok(Self {
            center,
            normal,
            u_axis,
            v_axis,
            half_u,
            half_v,
        })
    }

    /// Square of side `side` lying in the plane `x = x0`, centered at
    /// `(x0, y0, z0)`, normal `+x`.
    pub fn square_x(center: Vec3<T>, side: T) -> Self {
        let half = side / T::lit(2.0);
        Self {
            center,
            normal: Vec3::new(T::one(), T::zero(), T::zero()),
            u_axis: Vec3::new(T::zero(), T::one(), T::zero()),
            v_axis: Vec3::new(T::zero(), T::zero(), T::one()),
            half_u: half,
            half_v: half,
        }
    }

    pub fn center(&self) -> Vec3<T> {
        self.center
    }
    pub fn normal(&self) -> Vec3<T> {
        self.normal
    }
    pub fn u_axis(&self) -> Vec3<T> {
        self.u_axis
    }
    pub fn v_axis(&self) -> Vec3<T> {
        self.v_axis
    }
    pub fn half_u(&self) -> T {
        self.half_u
    }
    pub fn half_v(&self) -> T {
        self.half_v
    }

    /// The infinite plane containing the rectangle, same orientation.
    pub fn supporting_plane(&self) -> Plane<T> {
        Plane {
            point: self.center,
            normal: self.normal,
        }
    }

    #[inline]
    fn contains_in_plane(&self, p: Vec3<T>) -> bool {
        let rel = p - self.center;
        rel.dot(self.u_axis).abs() <= self.half_u && rel.dot(self.v_axis).abs() <= self.half_v
    }

    /// Euclidean distance from `p` to the (filled) rectangle.
    pub fn distance_to(&self, p: Vec3<T>) -> T {
        let rel = p - self.center;
        let du = (rel.dot(self.u_axis).abs() - self.half_u).max(T::zero());
        let dv = (rel.dot(self.v_axis).abs() - self.half_v).max(T::zero());
        let dn = rel.dot(self.normal);
        (du * du + dv * dv + dn * dn).sqrt()
    }

    /// Euclidean distance from `p` to the rectangle's boundary edges.
    pub fn rim_distance(&self, p: Vec3<T>) -> T {
        let rel = p - self.center;
        let a = rel.dot(self.u_axis).abs();
        let b = rel.dot(self.v_axis).abs();
        let in_plane = if a <= self.half_u && b <= self.half_v {
            (self.half_u - a).min(self.half_v - b)
        } else {
            let du = (a - self.half_u).max(T::zero());
            let dv = (b - self.half_v).max(T::zero());
            (du * du + dv * dv).sqrt()
        };
        let dn = rel.dot(self.normal);
        (in_plane * in_plane + dn * dn).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflector<T> {
    Plane(Plane<T>),
    Rect(Rect<T>),
}

impl<T: Real> Reflector<T> {
    pub fn supporting_plane(&self) -> Plane<T> {
        match self {
            Reflector::Plane(p) => *p,
            Reflector::Rect(r) => r.supporting_plane(),
        }
    }

    /// Distance from `p` to the reflecting surface itself.
    #[inline]
    pub fn distance_to(&self, p: Vec3<T>) -> T {
        match self {
            Reflector::Plane(pl) => pl.signed_distance(p).abs(),
            Reflector::Rect(r) => r.distance_to(p),
        }
    }
}

/// Fully absorbing spherical receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbingSphere<T> {
    center: Vec3<T>,
    radius: T,
}

impl<T: Real> AbsorbingSphere<T> {
    pub fn new(center: Vec3<T>, radius: T) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter(
                "receiver center must be finite".into(),
            ));
        }
        if !(radius > T::zero() && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "receiver radius must be finite and > 0, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn center(&self) -> Vec3<T> {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> T {
        self.radius
    }

    #[inline]
    pub fn contains(&self, p: Vec3<T>) -> bool {
        (p - self.center).norm_squared() <= self.radius * self.radius
    }

    /// Distance from `p` to the sphere surface; negative inside.
    #[inline]
    pub fn surface_distance(&self, p: Vec3<T>) -> T {
        (p - self.center).norm() - self.radius
    }
}

/// The real receiver followed by its mirror images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet<T> {
    /// Index 0 is the real receiver.
    pub spheres: Vec<AbsorbingSphere<T>>,
    /// Center-to-center distance from the transmitter to each sphere.
    pub distances_from_tx: Vec<T>,
    /// Sequence of plane indices (0 = first plane, 1 = second) whose
    /// reflections, applied in order to the real center, produce each image.
    pub reflections: Vec<Vec<usize>>,
}

/// Location where a segment crosses a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentHit<T> {
    /// Fraction of the segment `a → b` at the crossing.
    pub s: T,
    pub point: Vec3<T>,
}

/// Reflects the normal component of `p` about `plane`; tangential
/// components are unchanged.
#[inline]
pub fn mirror_point<T: Real>(p: Vec3<T>, plane: &Plane<T>) -> Vec3<T> {
    let sd = plane.signed_distance(p);
    p - plane.normal * (sd + sd)
}

pub fn mirror_sphere<T: Real>(
    s: &AbsorbingSphere<T>,
    plane: &Plane<T>,
) -> Result<AbsorbingSphere<T>> {
    let distance = plane.signed_distance(s.center).abs();
    if distance < s.radius {
        return Err(Error::SphereIntersectsPlane {
            distance: distance.as_f64(),
            radius: s.radius.as_f64(),
        });
    }
    Ok(AbsorbingSphere {
        center: mirror_point(s.center, plane),
        radius: s.radius,
    })
}

/// Angle at `tx` between the directions to `c_i` and `c_j`, in `[0, π]`.
pub fn angular_separation<T: Real>(tx: Vec3<T>, c_i: Vec3<T>, c_j: Vec3<T>) -> Result<T> {
    let a = c_i - tx;
    let b = c_j - tx;
    if a.norm_squared() == T::zero() || b.norm_squared() == T::zero() {
        return Err(Error::DegenerateGeometry(
            "transmitter coincides with a receiver center".into(),
        ));
    }
    // atan2 of |a × b| and a · b is accurate at both ends of [0, π].
    Ok(a.cross(b).norm().atan2(a.dot(b)))
}

/// Builds the real receiver plus the `k` nearest images of the parallel
/// mirror lattice formed by `p1` and `p2`.
///
/// Images are ordered by increasing distance from the real center; images at
/// equal distance are ordered with the one on the side `p1`'s normal points
/// to first.
pub fn generate_images_two_planes<T: Real>(
    tx: Vec3<T>,
    rx: &AbsorbingSphere<T>,
    p1: &Plane<T>,
    p2: &Plane<T>,
    k: usize,
) -> Result<ImageSet<T>> {
    let alignment = p1.normal.dot(p2.normal);
    if (alignment.abs() - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::PlanesNotParallel(alignment.abs().as_f64()));
    }
    if alignment > T::zero() {
        return Err(Error::SphereOutsideSlab(
            "plane normals must face each other to enclose a slab".into(),
        ));
    }
    let c = rx.center;
    let (d1, d2) = (p1.signed_distance(c), p2.signed_distance(c));
    if d1 < rx.radius || d2 < rx.radius {
        return Err(Error::SphereOutsideSlab(format!(
            "center distances to planes are {d1} and {d2}, radius {}",
            rx.radius
        )));
    }

    let planes = [*p1, *p2];
    let mut candidates: Vec<(Vec3<T>, Vec<usize>)> = Vec::with_capacity(2 * k);
    for first in 0..2 {
        let mut center = c;
        let mut chain = Vec::with_capacity(k);
        for m in 0..k {
            let idx = (first + m) % 2;
            center = mirror_point(center, &planes[idx]);
            chain.push(idx);
            candidates.push((center, chain.clone()));
        }
    }

    let axis = p1.normal;
    candidates.sort_by(|(a, _), (b, _)| {
        let (da, db) = ((*a - c).norm(), (*b - c).norm());
        let scale = T::one().max(da.max(db));
        if (da - db).abs() <= T::lit(IMAGE_TIE_TOLERANCE) * scale {
            // Positive side of p1's normal first.
            (*b - c)
                .dot(axis)
                .partial_cmp(&(*a - c).dot(axis))
                .unwrap_or(Ordering::Equal)
        } else {
            da.partial_cmp(&db).unwrap_or(Ordering::Equal)
        }
    });
    candidates.truncate(k);

    let mut spheres = Vec::with_capacity(k + 1);
    let mut reflections = Vec::with_capacity(k + 1);
    spheres.push(*rx);
    reflections.push(Vec::new());
    for (center, chain) in candidates {
        spheres.push(AbsorbingSphere {
            center,
            radius: rx.radius,
        });
        reflections.push(chain);
    }
    let distances_from_tx = spheres.iter().map(|s| s.center.distance(tx)).collect();
    Ok(ImageSet {
        spheres,
        distances_from_tx,
        reflections,
    })
}

/// Where the segment `a → b` crosses a reflector.
///
/// A plane is one-sided: any segment ending on its invalid side crosses it
/// (a start point that has drifted behind the plane by rounding reports
/// `s = 0`). A rectangle is two-sided and is only hit when the crossing
/// point lies within its bounds.
#[inline]
pub fn segment_boundary_hit<T: Real>(
    a: Vec3<T>,
    b: Vec3<T>,
    reflector: &Reflector<T>,
) -> Option<SegmentHit<T>> {
    match reflector {
        Reflector::Plane(plane) => {
            let db = plane.signed_distance(b);
            if db >= T::zero() {
                return None;
            }
            let da = plane.signed_distance(a);
            let s = if da <= T::zero() {
                T::zero()
            } else {
                da / (da - db)
            };
            Some(SegmentHit {
                s,
                point: a + (b - a) * s,
            })
        }
        Reflector::Rect(rect) => {
            let plane = rect.supporting_plane();
            let da = plane.signed_distance(a);
            let db = plane.signed_distance(b);
            let crosses = (da > T::zero() && db < T::zero()) || (da < T::zero() && db > T::zero());
            if !crosses {
                return None;
            }
            let s = da / (da - db);
            let point = a + (b - a) * s;
            rect.contains_in_plane(point)
                .then_some(SegmentHit { s, point })
        }
    }
}

/// Earliest point where the segment `a → b` enters the ball; `s = 0` when
/// `a` is already inside.
#[inline]
pub fn segment_sphere_entry<T: Real>(
    a: Vec3<T>,
    b: Vec3<T>,
    sphere: &AbsorbingSphere<T>,
) -> Option<SegmentHit<T>> {
    let f = a - sphere.center;
    let r2 = sphere.radius * sphere.radius;
    let c = f.norm_squared() - r2;
    if c <= T::zero() {
        return Some(SegmentHit {
            s: T::zero(),
            point: a,
        });
    }
    let d = b - a;
    let half_b = f.dot(d);
    if half_b >= T::zero() {
        // Moving away from (or tangent to) the center.
        return None;
    }
    let aa = d.norm_squared();
    let disc = half_b * half_b - aa * c;
    if disc < T::zero() {
        return None;
    }
    // Entry root; c / q form avoids cancellation.
    let q = -half_b + disc.sqrt();
    let s = c / q;
    if s > T::one() {
        return None;
    }
    Some(SegmentHit {
        s,
        point: a + d * s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn sphere(c: Vec3<f64>, r: f64) -> AbsorbingSphere<f64> {
        AbsorbingSphere::new(c, r).unwrap()
    }

    #[test]
    fn mirror_point_examples() {
        let x0 = Plane::x_equals(0.0);
        assert_eq!(mirror_point(v(3.0, 2.0, 1.0), &x0), v(-3.0, 2.0, 1.0));
        assert_eq!(mirror_point(v(0.0, 5.0, 7.0), &x0), v(0.0, 5.0, 7.0));
        assert_eq!(
            mirror_point(v(10.0, 0.0, 0.0), &Plane::x_equals(4.0)),
            v(-2.0, 0.0, 0.0)
        );
    }

    #[test]
    fn mirror_sphere_examples() {
        let m = mirror_sphere(&sphere(v(10.0, 0.0, 0.0), 5.0), &Plane::x_equals(0.0)).unwrap();
        assert_eq!(m.center(), v(-10.0, 0.0, 0.0));
        assert_eq!(m.radius(), 5.0);
        let m = mirror_sphere(&sphere(v(10.0, 0.0, 0.0), 5.0), &Plane::x_equals(4.0)).unwrap();
        assert_eq!(m.center(), v(-2.0, 0.0, 0.0));
        let err = mirror_sphere(&sphere(v(4.0, 0.0, 0.0), 5.0), &Plane::x_equals(0.0)).unwrap_err();
        assert!(matches!(err, Error::SphereIntersectsPlane { .. }));
    }

    #[test]
    fn angular_separation_examples() {
        let phi =
            angular_separation(v(20.0, 0.0, 0.0), v(10.0, 0.0, 0.0), v(-2.0, 0.0, 0.0)).unwrap();
        assert_eq!(phi, 0.0);
        let phi =
            angular_separation(v(0.0, 0.0, 10.0), v(10.0, 0.0, 0.0), v(-10.0, 0.0, 0.0)).unwrap();
        assert!((phi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let phi =
            angular_separation(v(1.0, 2.0, 3.0), v(4.0, -1.0, 0.5), v(4.0, -1.0, 0.5)).unwrap();
        assert_eq!(phi, 0.0);
        let opposite =
            angular_separation(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(-3.0, 0.0, 0.0)).unwrap();
        assert_eq!(opposite, std::f64::consts::PI);
        assert!(matches!(
            angular_separation(v(1.0, 1.0, 1.0), v(1.0, 1.0, 1.0), v(0.0, 0.0, 0.0)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn plane_normal_is_normalized() {
        let p = Plane::new(v(0.0, 0.0, 0.0), v(0.0, 3.0, 4.0)).unwrap();
        assert!((p.normal().norm() - 1.0).abs() < FRAME_TOLERANCE);
        assert!(Plane::new(v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rect_frame_is_orthonormal() {
        let r = Rect::new(
            v(1.0, 2.0, 3.0),
            v(1.0, 1.0, 0.0),
            v(-1.0, 1.0, 0.0),
            2.0,
            3.0,
        )
        .unwrap();
        let (n, u, w) = (r.normal(), r.u_axis(), r.v_axis());
        for (a, b) in [(n, u), (n, w), (u, w)] {
            assert!(a.dot(b).abs() < FRAME_TOLERANCE);
        }
        for a in [n, u, w] {
            assert!((a.norm() - 1.0).abs() < FRAME_TOLERANCE);
        }
        assert!(Rect::new(
            v(0.0, 0.0, 0.0),
            v(1.0, 0.0, 0.0),
            v(1.0, 1.0, 0.0),
            1.0,
            1.0
        )
        .is_err());
        assert!(Rect::new(
            v(0.0, 0.0, 0.0),
            v(1.0, 0.0, 0.0),
            v(0.0, 1.0, 0.0),
            0.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn segment_boundary_hit_examples() {
        let plane = Reflector::Plane(Plane::x_equals(0.0));
        let hit = segment_boundary_hit(v(1.0, 0.0, 0.0), v(-1.0, 0.0, 0.0), &plane).unwrap();
        assert_eq!(hit.s, 0.5);
        assert_eq!(hit.point, v(0.0, 0.0, 0.0));

        let rect = Reflector::Rect(Rect::square_x(v(0.0, 0.0, 0.0), 40.0));
        assert!(segment_boundary_hit(v(1.0, 50.0, 0.0), v(-1.0, 50.0, 0.0), &rect).is_none());
        assert!(segment_boundary_hit(v(1.0, 0.0, 0.0), v(0.5, 0.0, 0.0), &plane).is_none());

        // Rectangles reflect from both faces.
        let back = segment_boundary_hit(v(-1.0, 3.0, 0.0), v(3.0, 3.0, 0.0), &rect).unwrap();
        assert_eq!(back.s, 0.25);
    }

    #[test]
    fn rect_distances() {
        let r = Rect::square_x(v(0.0, 0.0, 0.0), 40.0);
        assert_eq!(r.distance_to(v(3.0, 5.0, 0.0)), 3.0);
        assert_eq!(r.rim_distance(v(3.0, 5.0, 0.0)), 234f64.sqrt());
        assert_eq!(r.rim_distance(v(0.0, 12.0, 19.0)), 1.0);
        assert_eq!(r.rim_distance(v(4.0, 23.0, 0.0)), 5.0);
        assert_eq!(r.distance_to(v(0.0, 23.0, 24.0)), 5.0);
        assert_eq!(r.rim_distance(v(0.0, 23.0, 24.0)), 5.0);
    }

    #[test]
    fn segment_sphere_entry_examples() {
        let s = sphere(v(10.0, 0.0, 0.0), 5.0);
        let hit = segment_sphere_entry(v(20.0, 0.0, 0.0), v(10.0, 0.0, 0.0), &s).unwrap();
        assert_eq!(hit.s, 0.5);
        assert_eq!(hit.point, v(15.0, 0.0, 0.0));
        assert!(segment_sphere_entry(v(20.0, 0.0, 0.0), v(16.0, 0.0, 0.0), &s).is_none());
        let inside = segment_sphere_entry(v(11.0, 1.0, 0.0), v(30.0, 0.0, 0.0), &s).unwrap();
        assert_eq!(inside.s, 0.0);
        // Grazing miss and a chord that passes through.
        assert!(segment_sphere_entry(v(20.0, 5.1, 0.0), v(0.0, 5.1, 0.0), &s).is_none());
        let through = segment_sphere_entry(v(20.0, 3.0, 0.0), v(0.0, 3.0, 0.0), &s).unwrap();
        assert!((through.s - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_plane_lattice_matches_textbook_positions() {
        // Planes x = 0 and x = L; receiver at x = c.
        let (l, c) = (30.0, 11.0);
        let p1 = Plane::x_equals(0.0);
        let p2 = Plane::x_equals(l).flipped();
        let rx = sphere(v(c, 1.0, -2.0), 4.0);
        let set = generate_images_two_planes(v(c, 1.0, 20.0), &rx, &p1, &p2, 12).unwrap();
        assert_eq!(set.spheres.len(), 13);
        let mut lattice = Vec::new();
        for k in -10i32..=10 {
            let k = f64::from(k);
            lattice.push(2.0 * k * l + c);
            lattice.push(2.0 * k * l - c);
        }
        for s in &set.spheres[1..] {
            let x = s.center().x;
            assert!(x != c);
            assert!(
                lattice.iter().any(|&u| (u - x).abs() < 1e-9),
                "{x} not in lattice"
            );
            assert_eq!((s.center().y, s.center().z), (1.0, -2.0));
        }
        let d: Vec<f64> = set
            .spheres
            .iter()
            .map(|s| s.center().distance(rx.center()))
            .collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1] + 1e-9));
    }

    #[test]
    fn two_plane_centered_spacing() {
        // d = 3, r_r = 5: planes 8 um either side of the center.
        let rx = sphere(v(10.0, 0.0, 0.0), 5.0);
        let p1 = Plane::x_equals(2.0);
        let p2 = Plane::x_equals(18.0).flipped();
        let set = generate_images_two_planes(v(10.0, 0.0, 10.0), &rx, &p1, &p2, 4).unwrap();
        let xs: Vec<f64> = set.spheres.iter().map(|s| s.center().x).collect();
        assert_eq!(xs, vec![10.0, 26.0, -6.0, 42.0, -22.0]);
        let empty = generate_images_two_planes(v(10.0, 0.0, 10.0), &rx, &p1, &p2, 0).unwrap();
        assert_eq!(empty.spheres, vec![rx]);
        assert_eq!(empty.distances_from_tx, vec![10.0]);
    }

    #[test]
    fn two_plane_errors() {
        let rx = sphere(v(10.0, 0.0, 0.0), 5.0);
        let p1 = Plane::x_equals(2.0);
        let tilted = Plane::new(v(18.0, 0.0, 0.0), v(-1.0, 0.1, 0.0)).unwrap();
        assert!(matches!(
            generate_images_two_planes(v(10.0, 0.0, 10.0), &rx, &p1, &tilted, 3),
            Err(Error::PlanesNotParallel(_))
        ));
        let near = Plane::x_equals(13.0).flipped();
        assert!(matches!(
            generate_images_two_planes(v(10.0, 0.0, 10.0), &rx, &p1, &near, 3),
            Err(Error::SphereOutsideSlab(_))
        ));
    }

    fn arb_vec(range: f64) -> impl Strategy<Value = Vec3<f64>> {
        (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_unit() -> impl Strategy<Value = Vec3<f64>> {
        arb_vec(1.0)
            .prop_filter("non-degenerate", |v| v.norm() > 1e-3)
            .prop_map(|v| v.normalized().unwrap())
    }

    fn arb_plane() -> impl Strategy<Value = Plane<f64>> {
        (arb_vec(50.0), arb_unit()).prop_map(|(p, n)| Plane::new(p, n).unwrap())
    }

    proptest! {
        #[test]
        fn mirror_is_an_involution(p in arb_vec(100.0), plane in arb_plane()) {
            let back = mirror_point(mirror_point(p, &plane), &plane);
            prop_assert!(back.distance(p) < 1e-9);
        }

        #[test]
        fn mirror_preserves_plane_distance(p in arb_vec(100.0), plane in arb_plane()) {
            let m = mirror_point(p, &plane);
            prop_assert!((plane.signed_distance(p) + plane.signed_distance(m)).abs() < 1e-9);
        }

        #[test]
        fn angular_separation_symmetry(tx in arb_vec(20.0), a in arb_vec(20.0), b in arb_vec(20.0)) {
            prop_assume!(tx.distance(a) > 1e-3 && tx.distance(b) > 1e-3);
            let ab = angular_separation(tx, a, b).unwrap();
            let ba = angular_separation(tx, b, a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=std::f64::consts::PI).contains(&ab));
            prop_assert!(angular_separation(tx, a, a).unwrap().abs() < 1e-12);
            // Zero only when directions coincide.
            let da = (a - tx).normalized().unwrap();
            let db = (b - tx).normalized().unwrap();
            if da.distance(db) > 1e-6 {
                prop_assert!(ab > 1e-12);
            }
        }

        #[test]
        fn rect_hit_agrees_with_plane_hit(
            a in arb_vec(30.0), b in arb_vec(30.0), center in arb_vec(10.0), n in arb_unit(),
        ) {
            let u = n.cross(Vec3::new(0.3, -0.7, 0.2)).normalized();
            prop_assume!(u.is_some());
            let rect = Rect::new(center, n, u.unwrap(), 12.0, 7.0).unwrap();
            let plane = rect.supporting_plane();
            prop_assume!(plane.signed_distance(a) > 0.0);
            let from_rect = segment_boundary_hit(a, b, &Reflector::Rect(rect));
            let from_plane = segment_boundary_hit(a, b, &Reflector::Plane(plane));
            if let Some(p) = from_plane {
                if rect.contains_in_plane(p.point) {
                    let r = from_rect.unwrap();
                    prop_assert!((r.s - p.s).abs() < 1e-12);
                    prop_assert!(r.point.distance(p.point) < 1e-9);
                } else {
                    prop_assert!(from_rect.is_none());
                }
            } else {
                prop_assert!(from_rect.is_none());
            }
        }

        #[test]
        fn image_chains_replay_to_images(
            gap1 in 0.0f64..10.0, gap2 in 0.0f64..10.0, r in 0.5f64..6.0, k in 0usize..15, n in arb_unit(),
        ) {
            let c = Vec3::new(1.0, -4.0, 2.5);
            let p1 = Plane::new(c - n * (r + gap1), n).unwrap();
            let p2 = Plane::new(c + n * (r + gap2), -n).unwrap();
            let rx = AbsorbingSphere::new(c, r).unwrap();
            let tx = c + n.cross(Vec3::new(0.0, 0.0, 1.0)) * 3.0 + Vec3::new(0.0, 9.0, 0.0);
            let set = generate_images_two_planes(tx, &rx, &p1, &p2, k).unwrap();
            prop_assert_eq!(set.spheres.len(), k + 1);
            let planes = [p1, p2];
            for (i, s) in set.spheres.iter().enumerate() {
                prop_assert_eq!(s.radius(), r);
                prop_assert!((set.distances_from_tx[i] - s.center().distance(tx)).abs() < 1e-9);
                let mut back = s.center();
                for &idx in set.reflections[i].iter().rev() {
                    back = mirror_point(back, &planes[idx]);
                }
                prop_assert!(back.distance(c) < 1e-9);
            }
            if (gap1 - gap2).abs() < 1e-12 && k >= 4 {
                let step = 2.0 * (gap1 + r);
                let along: Vec<f64> = set.spheres.iter().map(|s| (s.center() - c).dot(n)).collect();
                prop_assert!((along[1] - step).abs() < 1e-9);
                prop_assert!((along[2] + step).abs() < 1e-9);
                prop_assert!((along[3] - 2.0 * step).abs() < 1e-9);
            }
        }
    }
}
