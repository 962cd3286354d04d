//! Planar convex shapes and their support/cost machinery.
//!
//! A convex set `S` is described here entirely through two scalar functions of
//! a direction `c`: the support function `sup { c·x : x in S }` and the cost
//! function `inf { c·x : x in S }`. Both are exact for every shape variant.
//! Certificate constraints additionally need a smoothed ellipsoid support that
//! stays differentiable at `c = 0`; see [`smoothed_ellipsoid_support`].

use serde::{Deserialize, Serialize};

/// Default smoothing constant for ellipsoid support terms inside certificates.
pub const DEFAULT_SMOOTHING_EPS: f64 = 1e-9;

/// Errors from shape construction and support queries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("direction vector must be finite and nonzero")]
    ZeroDirection,
    #[error("polytope needs at least one vertex")]
    EmptyPolytope,
    #[error("ellipsoid matrix must be symmetric positive definite")]
    NotPositiveDefinite,
    #[error("radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
    #[error("hull needs at least one member")]
    EmptyHull,
    #[error("hull members cannot themselves be hulls")]
    NestedHull,
    #[error("scale factor must be finite and nonnegative, got {0}")]
    BadScale(f64),
    #[error("shape contains a non-finite coordinate")]
    NonFinite,
}

/// A point or direction in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Counterclockwise perpendicular `(-y, x)`.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 1e-300 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Direction of angle `theta` measured from the positive x axis.
    #[inline]
    pub fn from_angle(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl std::ops::Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

/// Symmetric 2x2 matrix stored as `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    #[inline]
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat2 { xx, xy, yy }
    }

    /// Identity scaled by `k`.
    #[inline]
    pub fn scaled_identity(k: f64) -> Self {
        SymMat2::new(k, 0.0, k)
    }

    /// Quadratic form `v' M v`.
    #[inline]
    pub fn quad(self, v: Vec2) -> f64 {
        v.dot(self * v)
    }

    #[inline]
    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn is_positive_definite(self) -> bool {
        self.xx.is_finite()
            && self.xy.is_finite()
            && self.yy.is_finite()
            && self.xx > 0.0
            && self.det() > 0.0
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }
}

impl std::ops::Mul<Vec2> for SymMat2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }
}

impl TryFrom<[[f64; 2]; 2]> for SymMat2 {
    type Error = String;

    fn try_from(m: [[f64; 2]; 2]) -> Result<Self, String> {
        if (m[0][1] - m[1][0]).abs() > 1e-12 * (1.0 + m[0][1].abs().max(m[1][0].abs())) {
            return Err(format!(
                "matrix is not symmetric: off-diagonal entries {} and {}",
                m[0][1], m[1][0]
            ));
        }
        Ok(SymMat2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]))
    }
}

impl From<SymMat2> for [[f64; 2]; 2] {
    fn from(m: SymMat2) -> Self {
        [[m.xx, m.xy], [m.xy, m.yy]]
    }
}

/// Planar rotation, stored as the cosine/sine pair of its angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot2 {
    cos: f64,
    sin: f64,
}

impl Rot2 {
    pub const IDENTITY: Rot2 = Rot2 { cos: 1.0, sin: 0.0 };

    #[inline]
    pub fn from_angle(psi: f64) -> Self {
        Rot2 {
            cos: psi.cos(),
            sin: psi.sin(),
        }
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.sin.atan2(self.cos)
    }

    #[inline]
    pub fn cos(self) -> f64 {
        self.cos
    }

    #[inline]
    pub fn sin(self) -> f64 {
        self.sin
    }

    /// `R v`.
    #[inline]
    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.cos * v.x - self.sin * v.y,
            self.sin * v.x + self.cos * v.y,
        )
    }

    /// `R' v` (the inverse rotation).
    #[inline]
    pub fn apply_transpose(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.cos * v.x + self.sin * v.y,
            -self.sin * v.x + self.cos * v.y,
        )
    }

    /// `(dR/dpsi) v`, the angle derivative of [`Rot2::apply`].
    #[inline]
    pub fn derivative_apply(self, v: Vec2) -> Vec2 {
        Vec2::new(
            -self.sin * v.x - self.cos * v.y,
            self.cos * v.x - self.sin * v.y,
        )
    }

    /// `(dR/dpsi)' v`, the angle derivative of [`Rot2::apply_transpose`].
    #[inline]
    pub fn derivative_transpose_apply(self, v: Vec2) -> Vec2 {
        Vec2::new(
            -self.sin * v.x + self.cos * v.y,
            -self.cos * v.x - self.sin * v.y,
        )
    }

    /// `R M R'`, the congruence transform of a symmetric matrix.
    pub fn rotate_sym(self, m: SymMat2) -> SymMat2 {
        let (c, s) = (self.cos, self.sin);
        let xx = c * (c * m.xx - s * m.xy) - s * (c * m.xy - s * m.yy);
        let xy = c * (s * m.xx + c * m.xy) - s * (s * m.xy + c * m.yy);
        let yy = s * (s * m.xx + c * m.xy) + c * (s * m.xy + c * m.yy);
        SymMat2::new(xx, xy, yy)
    }
}

/// Rotation matrix and its angle derivative packed as column pairs.
///
/// Returns `(R, dR/dpsi)` with each matrix given by the images of the basis
/// vectors, `(R e_x, R e_y)`.
pub fn rotation_and_derivative(psi: f64) -> (Rot2, [Vec2; 2]) {
    let r = Rot2::from_angle(psi);
    let d = [Vec2::new(-r.sin, r.cos), Vec2::new(-r.cos, -r.sin)];
    (r, d)
}

/// Rigid placement: a rotation followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub rotation: Rot2,
    pub translation: Vec2,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        rotation: Rot2::IDENTITY,
        translation: Vec2::ZERO,
    };

    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Pose2 {
            rotation: Rot2::from_angle(psi),
            translation: Vec2::new(x, y),
        }
    }

    /// Maps a body-frame point to the world frame.
    #[inline]
    pub fn transform(self, p: Vec2) -> Vec2 {
        self.rotation.apply(p) + self.translation
    }
}

/// A convex set in the plane.
///
/// `Inflated` is the Minkowski sum of its base with the origin-centered ball
/// of radius `r`; `Hull` is the convex hull of the union of its members.
/// Hulls never nest: members must be non-hull shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConvexShape {
    Point {
        q: Vec2,
    },
    Polytope {
        vertices: Vec<Vec2>,
    },
    Ellipsoid {
        #[serde(rename = "P")]
        p: SymMat2,
    },
    Ball {
        r: f64,
    },
    Inflated {
        base: Box<ConvexShape>,
        r: f64,
    },
    Hull {
        members: Vec<ConvexShape>,
    },
}

impl ConvexShape {
    pub fn point(q: Vec2) -> Result<Self, GeomError> {
        let s = ConvexShape::Point { q };
        s.validate()?;
        Ok(s)
    }

    pub fn polytope(vertices: Vec<Vec2>) -> Result<Self, GeomError> {
        let s = ConvexShape::Polytope { vertices };
        s.validate()?;
        Ok(s)
    }

    pub fn ellipsoid(p: SymMat2) -> Result<Self, GeomError> {
        let s = ConvexShape::Ellipsoid { p };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(r: f64) -> Result<Self, GeomError> {
        let s = ConvexShape::Ball { r };
        s.validate()?;
        Ok(s)
    }

    pub fn inflated(base: ConvexShape, r: f64) -> Result<Self, GeomError> {
        let s = ConvexShape::Inflated {
            base: Box::new(base),
            r,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn hull(members: Vec<ConvexShape>) -> Result<Self, GeomError> {
        let s = ConvexShape::Hull { members };
        s.validate()?;
        Ok(s)
    }

    /// Checks the structural invariants of the shape tree.
    ///
    /// Call this after deserializing a shape from untrusted input; the
    /// `ConvexShape::*` constructors run it automatically.
    pub fn validate(&self) -> Result<(), GeomError> {
        match self {
            ConvexShape::Point { q } => {
                if !q.is_finite() {
                    return Err(GeomError::NonFinite);
                }
            }
            ConvexShape::Polytope { vertices } => {
                if vertices.is_empty() {
                    return Err(GeomError::EmptyPolytope);
                }
                if vertices.iter().any(|v| !v.is_finite()) {
                    return Err(GeomError::NonFinite);
                }
            }
            ConvexShape::Ellipsoid { p } => {
                if !p.is_finite() {
                    return Err(GeomError::NonFinite);
                }
                if !p.is_positive_definite() {
                    return Err(GeomError::NotPositiveDefinite);
                }
            }
            ConvexShape::Ball { r } => {
                if !r.is_finite() || *r < 0.0 {
                    return Err(GeomError::BadRadius(*r));
                }
            }
            ConvexShape::Inflated { base, r } => {
                if !r.is_finite() || *r < 0.0 {
                    return Err(GeomError::BadRadius(*r));
                }
                base.validate()?;
            }
            ConvexShape::Hull { members } => {
                if members.is_empty() {
                    return Err(GeomError::EmptyHull);
                }
                for m in members {
                    if matches!(m, ConvexShape::Hull { .. }) {
                        return Err(GeomError::NestedHull);
                    }
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Support function `sup { c·x : x in S }`.
    pub fn support(&self, c: Vec2) -> Result<f64, GeomError> {
        check_direction(c)?;
        Ok(self.support_unchecked(c))
    }

    /// Cost function `inf { c·x : x in S }`, equal to `-support(-c)`.
    pub fn cost(&self, c: Vec2) -> Result<f64, GeomError> {
        check_direction(c)?;
        Ok(-self.support_unchecked(-c))
    }

    pub(crate) fn support_unchecked(&self, c: Vec2) -> f64 {
        match self {
            ConvexShape::Point { q } => c.dot(*q),
            ConvexShape::Polytope { vertices } => vertices
                .iter()
                .map(|v| c.dot(*v))
                .fold(f64::NEG_INFINITY, f64::max),
            ConvexShape::Ellipsoid { p } => p.quad(c).max(0.0).sqrt(),
            ConvexShape::Ball { r } => r * c.norm(),
            ConvexShape::Inflated { base, r } => base.support_unchecked(c) + r * c.norm(),
            ConvexShape::Hull { members } => members
                .iter()
                .map(|m| m.support_unchecked(c))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Scales the set about the origin by `k >= 0`.
    pub fn scale(&self, k: f64) -> Result<ConvexShape, GeomError> {
        if !k.is_finite() || k < 0.0 {
            return Err(GeomError::BadScale(k));
        }
        let scaled = match self {
            ConvexShape::Point { q } => ConvexShape::Point { q: *q * k },
            ConvexShape::Polytope { vertices } => ConvexShape::Polytope {
                vertices: vertices.iter().map(|v| *v * k).collect(),
            },
            ConvexShape::Ellipsoid { p } => ConvexShape::Ellipsoid {
                p: SymMat2::new(p.xx * k * k, p.xy * k * k, p.yy * k * k),
            },
            ConvexShape::Ball { r } => ConvexShape::Ball { r: r * k },
            ConvexShape::Inflated { base, r } => ConvexShape::Inflated {
                base: Box::new(base.scale(k)?),
                r: r * k,
            },
            ConvexShape::Hull { members } => ConvexShape::Hull {
                members: members
                    .iter()
                    .map(|m| m.scale(k))
                    .collect::<Result<_, _>>()?,
            },
        };
        // Scaling an ellipsoid by k = 0 collapses it to a point; the zero
        // matrix fails the positive-definite invariant, so degrade explicitly.
        if k == 0.0 {
            return Ok(collapse_to_origin(&scaled));
        }
        Ok(scaled)
    }

    /// Vertices of the set if it is a polytope-like shape (no curved parts).
    pub fn vertex_list(&self) -> Option<Vec<Vec2>> {
        match self {
            ConvexShape::Point { q } => Some(vec![*q]),
            ConvexShape::Polytope { vertices } => Some(vertices.clone()),
            ConvexShape::Hull { members } => {
                let mut out = Vec::new();
                for m in members {
                    out.extend(m.vertex_list()?);
                }
                Some(out)
            }
            _ => None,
        }
    }
}

fn collapse_to_origin(s: &ConvexShape) -> ConvexShape {
    match s {
        ConvexShape::Ellipsoid { .. } | ConvexShape::Ball { .. } => {
            ConvexShape::Point { q: Vec2::ZERO }
        }
        ConvexShape::Inflated { base, .. } => collapse_to_origin(base),
        ConvexShape::Hull { members } => ConvexShape::Hull {
            members: members.iter().map(collapse_to_origin).collect(),
        },
        other => other.clone(),
    }
}

#[inline]
fn check_direction(c: Vec2) -> Result<(), GeomError> {
    if !c.is_finite() || (c.x == 0.0 && c.y == 0.0) {
        return Err(GeomError::ZeroDirection);
    }
    Ok(())
}

/// A convex shape under a rigid placement `R S + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedShape {
    pub shape: ConvexShape,
    pub pose: Pose2,
}

impl PlacedShape {
    pub fn new(shape: ConvexShape, pose: Pose2) -> Self {
        PlacedShape { shape, pose }
    }

    /// Support of the placed set: `support_S(R'c) + c·t`.
    pub fn support(&self, c: Vec2) -> Result<f64, GeomError> {
        check_direction(c)?;
        Ok(self.support_unchecked(c))
    }

    /// Cost of the placed set: `cost_S(R'c) + c·t`.
    pub fn cost(&self, c: Vec2) -> Result<f64, GeomError> {
        check_direction(c)?;
        Ok(self.cost_unchecked(c))
    }

    pub(crate) fn support_unchecked(&self, c: Vec2) -> f64 {
        self.shape
            .support_unchecked(self.pose.rotation.apply_transpose(c))
            + c.dot(self.pose.translation)
    }

    pub(crate) fn cost_unchecked(&self, c: Vec2) -> f64 {
        -self.support_unchecked(-c)
    }

    /// World-frame vertices for polytope-like shapes.
    pub fn vertex_list(&self) -> Option<Vec<Vec2>> {
        Some(
            self.shape
                .vertex_list()?
                .into_iter()
                .map(|v| self.pose.transform(v))
                .collect(),
        )
    }
}

/// Smoothed ellipsoid support `sqrt(c'Pc + eps)` and its gradient `Pc / value`.
///
/// For `eps > 0` the value is differentiable everywhere, upper-bounds the
/// exact support `sqrt(c'Pc)`, and exceeds it by at most `sqrt(eps)`.
pub fn smoothed_ellipsoid_support(p: SymMat2, c: Vec2, eps: f64) -> (f64, Vec2) {
    let pc = p * c;
    let value = (c.dot(pc) + eps).sqrt();
    (value, pc / value)
}
