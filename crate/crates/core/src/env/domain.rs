use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryRole {
    Absorbing,
    Reflecting,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    Rectangle { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

/// Identifies one boundary piece of a [`Domain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPiece {
    Outer,
    Inner,
    Left,
    Right,
    Bottom,
    Top,
}

/// Planar region with a role (absorbing or reflecting) per boundary piece.
///
/// Pieces are ordered `[Outer]` for a disk, `[Inner, Outer]` for an annulus
/// and `[Left, Right, Bottom, Top]` for a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    shape: Shape,
    roles: Vec<BoundaryRole>,
}

impl Domain {
    pub fn disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Domain { shape: Shape::Disk { radius }, roles: vec![BoundaryRole::Absorbing] })
    }

    pub fn annulus(inner: f64, outer: f64, inner_role: BoundaryRole, outer_role: BoundaryRole) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) || !outer.is_finite() {
            return Err(Error::InvalidDomain(format!("annulus needs 0 < ρ < R₀, got ρ = {inner}, R₀ = {outer}")));
        }
        Domain::checked(Shape::Annulus { inner, outer }, vec![inner_role, outer_role])
    }

    /// Rectangle with roles ordered left, right, bottom, top.
    pub fn rectangle(x_min: f64, x_max: f64, y_min: f64, y_max: f64, roles: [BoundaryRole; 4]) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !(x_min < x_max && y_min < y_max) || !finite {
            return Err(Error::InvalidDomain(format!(
                "rectangle needs a < b and c < d, got [{x_min}, {x_max}] × [{y_min}, {y_max}]"
            )));
        }
        Domain::checked(Shape::Rectangle { x_min, x_max, y_min, y_max }, roles.to_vec())
    }

    fn checked(shape: Shape, roles: Vec<BoundaryRole>) -> Result<Self> {
        if !roles.contains(&BoundaryRole::Absorbing) {
            return Err(Error::InvalidDomain("at least one boundary piece must be absorbing".into()));
        }
        Ok(Domain { shape, roles })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pieces(&self) -> &'static [BoundaryPiece] {
        match self.shape {
            Shape::Disk { .. } => &[BoundaryPiece::Outer],
            Shape::Annulus { .. } => &[BoundaryPiece::Inner, BoundaryPiece::Outer],
            Shape::Rectangle { .. } => &[BoundaryPiece::Left, BoundaryPiece::Right, BoundaryPiece::Bottom, BoundaryPiece::Top],
        }
    }

    pub fn roles(&self) -> &[BoundaryRole] {
        &self.roles
    }

    pub fn role(&self, piece: BoundaryPiece) -> Option<BoundaryRole> {
        self.pieces().iter().position(|p| *p == piece).map(|i| self.roles[i])
    }

    /// Strict interior test.
    pub fn contains(&self, p: Vec2) -> bool {
        match self.shape {
            Shape::Disk { radius } => p.norm_sq() < radius * radius,
            Shape::Annulus { inner, outer } => {
                let r2 = p.norm_sq();
                r2 > inner * inner && r2 < outer * outer
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                p.x > x_min && p.x < x_max && p.y > y_min && p.y < y_max
            }
        }
    }

    /// Boundary piece that `p` lies on, within absolute tolerance `tol`.
    pub fn boundary_piece_at(&self, p: Vec2, tol: f64) -> Option<BoundaryPiece> {
        match self.shape {
            Shape::Disk { radius } => ((p.norm() - radius).abs() <= tol).then_some(BoundaryPiece::Outer),
            Shape::Annulus { inner, outer } => {
                let r = p.norm();
                if (r - inner).abs() <= tol {
                    Some(BoundaryPiece::Inner)
                } else if (r - outer).abs() <= tol {
                    Some(BoundaryPiece::Outer)
                } else {
                    None
                }
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                let inside_y = p.y >= y_min - tol && p.y <= y_max + tol;
                let inside_x = p.x >= x_min - tol && p.x <= x_max + tol;
                if inside_y && (p.x - x_min).abs() <= tol {
                    Some(BoundaryPiece::Left)
                } else if inside_y && (p.x - x_max).abs() <= tol {
                    Some(BoundaryPiece::Right)
                } else if inside_x && (p.y - y_min).abs() <= tol {
                    Some(BoundaryPiece::Bottom)
                } else if inside_x && (p.y - y_max).abs() <= tol {
                    Some(BoundaryPiece::Top)
                } else {
                    None
                }
            }
        }
    }

    /// First boundary crossing of the open segment `x + s u`, `0 < s ≤ len`,
    /// for a unit direction `u` starting in the closed domain. Pieces the
    /// walker is moving away from are ignored, so a walker sitting on a
    /// boundary after a reflection does not re-hit it.
    #[inline]
    pub fn first_hit(&self, x: Vec2, u: Vec2, len: f64) -> Option<(f64, BoundaryPiece)> {
        match self.shape {
            Shape::Disk { radius } => outer_circle_hit(x, u, len, radius).map(|s| (s, BoundaryPiece::Outer)),
            Shape::Annulus { inner, outer } => {
                let hit_in = inner_circle_hit(x, u, len, inner);
                let hit_out = outer_circle_hit(x, u, len, outer);
                match (hit_in, hit_out) {
                    (Some(a), Some(b)) if a <= b => Some((a, BoundaryPiece::Inner)),
                    (_, Some(b)) => Some((b, BoundaryPiece::Outer)),
                    (Some(a), None) => Some((a, BoundaryPiece::Inner)),
                    (None, None) => None,
                }
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                let mut best: Option<(f64, BoundaryPiece)> = None;
                let mut consider = |s: f64, piece| {
                    if s <= len && best.is_none_or(|(b, _)| s < b) {
                        best = Some((s.max(0.0), piece));
                    }
                };
                if u.x > 0.0 {
                    consider((x_max - x.x) / u.x, BoundaryPiece::Right);
                } else if u.x < 0.0 {
                    consider((x_min - x.x) / u.x, BoundaryPiece::Left);
                }
                if u.y > 0.0 {
                    consider((y_max - x.y) / u.y, BoundaryPiece::Top);
                } else if u.y < 0.0 {
                    consider((y_min - x.y) / u.y, BoundaryPiece::Bottom);
                }
                best
            }
        }
    }

    /// Outward unit normal of `piece` at boundary point `p`.
    pub fn outward_normal(&self, piece: BoundaryPiece, p: Vec2) -> Vec2 {
        match piece {
            BoundaryPiece::Outer => p.normalized().unwrap_or(Vec2::E1),
            BoundaryPiece::Inner => -p.normalized().unwrap_or(Vec2::E1),
            BoundaryPiece::Left => -Vec2::E1,
            BoundaryPiece::Right => Vec2::E1,
            BoundaryPiece::Bottom => -Vec2::E2,
            BoundaryPiece::Top => Vec2::E2,
        }
    }

    /// Snap `p` exactly onto `piece`.
    pub fn project(&self, piece: BoundaryPiece, p: Vec2) -> Vec2 {
        match (self.shape, piece) {
            (Shape::Disk { radius }, _) | (Shape::Annulus { outer: radius, .. }, BoundaryPiece::Outer) => {
                p.normalized().map_or(p, |n| n * radius)
            }
            (Shape::Annulus { inner, .. }, BoundaryPiece::Inner) => p.normalized().map_or(p, |n| n * inner),
            (Shape::Rectangle { x_min, .. }, BoundaryPiece::Left) => Vec2::new(x_min, p.y),
            (Shape::Rectangle { x_max, .. }, BoundaryPiece::Right) => Vec2::new(x_max, p.y),
            (Shape::Rectangle { y_min, .. }, BoundaryPiece::Bottom) => Vec2::new(p.x, y_min),
            (Shape::Rectangle { y_max, .. }, BoundaryPiece::Top) => Vec2::new(p.x, y_max),
            _ => p,
        }
    }
}

/// Exit through a circle of radius `r` from inside.
#[inline]
fn outer_circle_hit(x: Vec2, u: Vec2, len: f64, r: f64) -> Option<f64> {
    let b = x.dot(u);
    let c = x.norm_sq() - r * r;
    // convexity: both ends inside means the whole chord is inside
    if c + len * (2.0 * b + len) <= 0.0 {
        return None;
    }
    let disc = (b * b - c).max(0.0);
    let s = -b + disc.sqrt();
    (s <= len).then_some(s.max(0.0))
}

/// Entry into a disk of radius `r` from outside it.
#[inline]
fn inner_circle_hit(x: Vec2, u: Vec2, len: f64, r: f64) -> Option<f64> {
    let b = x.dot(u);
    if b >= 0.0 {
        return None;
    }
    let c = x.norm_sq() - r * r;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let s = -b - disc.sqrt();
    (s <= len).then_some(s.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryRole::*;

    #[test]
    fn validation() {
        assert!(Domain::disk(0.0).is_err());
        assert!(Domain::annulus(1.0, 1.0, Absorbing, Absorbing).is_err());
        assert!(Domain::annulus(0.5, 3.0, Reflecting, Reflecting).is_err());
        assert!(Domain::rectangle(1.0, 0.0, 0.0, 1.0, [Absorbing; 4]).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 0.0, 1.0, [Reflecting; 4]).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 0.0, 1.0, [Reflecting, Reflecting, Absorbing, Reflecting]).is_ok());
    }

    #[test]
    fn disk_exit_distance() {
        let d = Domain::disk(3.0).unwrap();
        let (s, piece) = d.first_hit(Vec2::ZERO, Vec2::from_angle(0.3), 10.0).unwrap();
        assert!((s - 3.0).abs() < 1e-14);
        assert_eq!(piece, BoundaryPiece::Outer);
        assert!(d.first_hit(Vec2::ZERO, Vec2::E1, 2.9).is_none());
    }

    #[test]
    fn annulus_prefers_nearest_circle() {
        let d = Domain::annulus(0.5, 3.0, Absorbing, Absorbing).unwrap();
        let (s, piece) = d.first_hit(Vec2::new(1.0, 0.0), -Vec2::E1, 10.0).unwrap();
        assert_eq!(piece, BoundaryPiece::Inner);
        assert!((s - 0.5).abs() < 1e-14);
        // tangent line misses the hole
        let (s, piece) = d.first_hit(Vec2::new(1.0, 0.6), -Vec2::E1, 10.0).unwrap();
        assert_eq!(piece, BoundaryPiece::Outer);
        assert!((s - (1.0 + (9.0_f64 - 0.36).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn rectangle_slab_clipping() {
        let d = Domain::rectangle(-1.0, 1.0, -1.0, 1.0, [Absorbing; 4]).unwrap();
        let u = Vec2::new(1.0, 2.0).normalized().unwrap();
        let (s, piece) = d.first_hit(Vec2::ZERO, u, 5.0).unwrap();
        assert_eq!(piece, BoundaryPiece::Top);
        assert!((s - 0.5 * 5.0_f64.sqrt()).abs() < 1e-14);
        // sitting on the left edge heading right does not re-hit it
        let (_, piece) = d.first_hit(Vec2::new(-1.0, 0.0), Vec2::E1, 5.0).unwrap();
        assert_eq!(piece, BoundaryPiece::Right);
    }
}
