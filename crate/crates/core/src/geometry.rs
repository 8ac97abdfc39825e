//! Continuous collision detection between constant-velocity disks.
//!
//! Every moving body is described by a [`MotionSegment`]: a start position, a
//! constant velocity and a closed time span. Two bodies collide when the
//! distance between their centers drops strictly below `R`, the sum of their
//! radii. The test is solved in closed form from the quadratic
//! `|w + dv * s|^2 = R^2` on the common time span.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Slack subtracted from `R^2` before comparing squared distances. Contact at
/// exactly `R` is never a collision.
pub const COLLISION_SLACK: f64 = 1e-9;

/// Slack used by the planners. Half of [`COLLISION_SLACK`], so a plan that
/// sits exactly on its own boundary is still clear of the validator's, while
/// contact at exactly `R` stays legal for both.
pub const PLANNING_SLACK: f64 = 0.5 * COLLISION_SLACK;

/// Relative velocities with a squared norm below this are treated as zero.
const PARALLEL_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// A closed time interval `[lo, hi]`; `hi` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TimeInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        TimeInterval { lo, hi }
    }

    pub fn unbounded_from(lo: f64) -> Self {
        TimeInterval {
            lo,
            hi: f64::INFINITY,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi == f64::INFINITY
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn intersect(&self, other: &TimeInterval) -> Option<TimeInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(TimeInterval { lo, hi })
    }
}

/// Constant-velocity motion of a disk center over `[t_start, t_end]`.
///
/// `origin` is the position at `t_start`. Waits and terminal parking are
/// segments with zero velocity; only those may have `t_end = +inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub origin: Point2,
    pub velocity: Point2,
    pub t_start: f64,
    pub t_end: f64,
}

impl MotionSegment {
    pub fn new(origin: Point2, velocity: Point2, t_start: f64, t_end: f64) -> Self {
        debug_assert!(t_start <= t_end);
        debug_assert!(t_end.is_finite() || velocity == Point2::ZERO);
        MotionSegment {
            origin,
            velocity,
            t_start,
            t_end,
        }
    }

    /// Stationary body at `at` for the whole of `[t_start, t_end]`.
    pub fn stationary(at: Point2, t_start: f64, t_end: f64) -> Self {
        Self::new(at, Point2::ZERO, t_start, t_end)
    }

    /// Straight move from `from` to `to` over `[t_start, t_end]`.
    pub fn between(from: Point2, to: Point2, t_start: f64, t_end: f64) -> Self {
        let dt = t_end - t_start;
        let velocity = if dt > 0.0 {
            (to - from) * (1.0 / dt)
        } else {
            Point2::ZERO
        };
        Self::new(from, velocity, t_start, t_end)
    }

    pub fn position_at(&self, t: f64) -> Point2 {
        if self.velocity == Point2::ZERO {
            return self.origin;
        }
        self.origin + self.velocity * (t - self.t_start)
    }

    /// Position at `t_end` (the origin for unbounded segments).
    pub fn end_position(&self) -> Point2 {
        if self.t_end.is_finite() {
            self.position_at(self.t_end)
        } else {
            self.origin
        }
    }

    pub fn span(&self) -> TimeInterval {
        TimeInterval {
            lo: self.t_start,
            hi: self.t_end,
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        MotionSegment {
            t_start: self.t_start + dt,
            t_end: self.t_end + dt,
            ..*self
        }
    }
}

/// Maximal sub-interval of the common time span on which `a` and `b` are
/// strictly closer than `r`. `None` if they never are.
pub fn collision_window(a: &MotionSegment, b: &MotionSegment, r: f64) -> Option<TimeInterval> {
    collision_window_with_slack(a, b, r, COLLISION_SLACK)
}

/// [`collision_window`] with the squared-distance threshold `r^2 - slack`.
pub fn collision_window_with_slack(
    a: &MotionSegment,
    b: &MotionSegment,
    r: f64,
    slack: f64,
) -> Option<TimeInterval> {
    let overlap = a.span().intersect(&b.span())?;
    let lo = overlap.lo;
    let span = overlap.hi - lo;

    let w0 = b.position_at(lo) - a.position_at(lo);
    let dv = b.velocity - a.velocity;
    let reach_sq = r * r - slack;
    let c = w0.norm_sq() - reach_sq;

    let qa = dv.norm_sq();
    if qa < PARALLEL_EPS {
        return (c < 0.0).then_some(overlap);
    }
    let qb = 2.0 * w0.dot(dv);
    let disc = qb * qb - 4.0 * qa * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (qb + if qb >= 0.0 { sq } else { -sq });
    let (mut s1, mut s2) = (q / qa, c / q);
    if s1 > s2 {
        std::mem::swap(&mut s1, &mut s2);
    }
    if s1 < span && s2 > 0.0 {
        Some(TimeInterval {
            lo: lo + s1.max(0.0),
            hi: lo + s2.min(span),
        })
    } else {
        None
    }
}

/// Earliest time at which `a` and `b` are strictly closer than `r`.
///
/// When the bodies approach from outside this is the infimum of the
/// colliding set, i.e. the instant of first contact.
pub fn first_collision(a: &MotionSegment, b: &MotionSegment, r: f64) -> Option<f64> {
    collision_window(a, b, r).map(|w| w.lo)
}

/// Smallest distance between the centers of `a` and `b` over their common
/// span, or `None` if the spans do not overlap.
pub fn min_separation(a: &MotionSegment, b: &MotionSegment) -> Option<f64> {
    let overlap = a.span().intersect(&b.span())?;
    let w0 = b.position_at(overlap.lo) - a.position_at(overlap.lo);
    let dv = b.velocity - a.velocity;
    let qa = dv.norm_sq();
    if qa < PARALLEL_EPS {
        return Some(w0.norm());
    }
    let s = (-w0.dot(dv) / qa).clamp(0.0, overlap.hi - overlap.lo);
    Some((w0 + dv * s).norm())
}

/// Squared distance from point `p` to the segment `[a, b]`.
pub fn point_segment_dist_sq(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return (p - a).norm_sq();
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_sq()
}
