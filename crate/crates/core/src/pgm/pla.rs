//! Optimal error-bounded piecewise linear approximation.
//!
//! Streaming variant of O'Rourke's feasibility test: each point `(x, y)`
//! contributes the vertical segment `[y - ε, y + ε]`, and the algorithm keeps
//! the convex hulls of the upper and lower ends together with the two extreme
//! feasible lines (minimum and maximum slope). A point is rejected exactly
//! when no single line can pass through every segment seen so far, so cutting
//! greedily at the first rejection yields the fewest segments.
//!
//! All geometry runs on `i128` integers; only the emitted line is floating point.

use std::cmp::Ordering;

use crate::dataset::Key;
use crate::error::{Error, Result};

/// Upper bound on ε that keeps every cross product inside `i128`.
pub const MAX_EPSILON: u64 = 1 << 40;

/// One piece of the approximation: `position ≈ intercept + slope * (x - first_key)`
/// for keys from `first_key` up to the next segment's first key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub first_key: Key,
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    pub const SIZE_BYTES: usize = 24;

    #[inline]
    pub fn predict(&self, key: Key) -> f64 {
        self.intercept + self.slope * key.saturating_sub(self.first_key) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Point {
    x: i128,
    y: i128,
}

#[derive(Debug, Clone, Copy)]
struct Slope {
    dx: i128,
    dy: i128,
}

impl std::ops::Sub for Point {
    type Output = Slope;

    fn sub(self, o: Point) -> Slope {
        Slope {
            dx: self.x - o.x,
            dy: self.y - o.y,
        }
    }
}

impl Slope {
    // Only ever compares slopes whose dx share a sign.
    fn cmp(&self, o: &Slope) -> Ordering {
        (self.dy * o.dx).cmp(&(self.dx * o.dy))
    }

    fn lt(&self, o: &Slope) -> bool {
        self.cmp(o) == Ordering::Less
    }

    fn gt(&self, o: &Slope) -> bool {
        self.cmp(o) == Ordering::Greater
    }

    fn as_f64(&self) -> f64 {
        self.dy as f64 / self.dx as f64
    }
}

fn cross(o: Point, a: Point, b: Point) -> i128 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Incremental builder: feed points in increasing `x`; `add_point` returns
/// false when the point cannot join the current segment.
#[derive(Debug, Clone)]
pub struct OptimalPla {
    epsilon: i128,
    // [0]: upper end of min-slope line, [1]: lower end of max-slope line,
    // [2]: lower end of min-slope line, [3]: upper end of max-slope line
    rect: [Point; 4],
    upper: Vec<Point>,
    lower: Vec<Point>,
    upper_start: usize,
    lower_start: usize,
    points_in_hull: usize,
    /// points in the current segment, kept after a rejection closes it
    count: usize,
    first_x: Key,
    last_x: Option<Key>,
}

impl OptimalPla {
    pub fn new(epsilon: u64) -> Result<Self> {
        if epsilon > MAX_EPSILON {
            return Err(Error::InvalidParameter(format!(
                "error bound {epsilon} exceeds {MAX_EPSILON}"
            )));
        }
        Ok(OptimalPla {
            epsilon: epsilon as i128,
            rect: [Point::default(); 4],
            upper: Vec::new(),
            lower: Vec::new(),
            upper_start: 0,
            lower_start: 0,
            points_in_hull: 0,
            count: 0,
            first_x: 0,
            last_x: None,
        })
    }

    /// Number of points in the current (or just-closed) segment.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn add_point(&mut self, x: Key, y: i64) -> Result<bool> {
        if let Some(last) = self.last_x {
            if x <= last {
                return Err(Error::InvalidParameter(format!(
                    "keys must be strictly increasing: {x} after {last}"
                )));
            }
        }
        Ok(self.push(x, y))
    }

    fn push(&mut self, x: Key, y: i64) -> bool {
        let xi = x as i128;
        let p1 = Point {
            x: xi,
            y: y as i128 + self.epsilon,
        };
        let p2 = Point {
            x: xi,
            y: y as i128 - self.epsilon,
        };

        if self.points_in_hull == 0 {
            self.last_x = Some(x);
            self.first_x = x;
            self.rect[0] = p1;
            self.rect[1] = p2;
            self.upper.clear();
            self.lower.clear();
            self.upper.push(p1);
            self.lower.push(p2);
            self.upper_start = 0;
            self.lower_start = 0;
            self.points_in_hull = 1;
            self.count = 1;
            return true;
        }

        if self.points_in_hull == 1 {
            self.last_x = Some(x);
            self.rect[2] = p2;
            self.rect[3] = p1;
            self.upper.push(p1);
            self.lower.push(p2);
            self.points_in_hull = 2;
            self.count = 2;
            return true;
        }

        let slope1 = self.rect[2] - self.rect[0];
        let slope2 = self.rect[3] - self.rect[1];
        let outside_line1 = (p1 - self.rect[2]).lt(&slope1);
        let outside_line2 = (p2 - self.rect[3]).gt(&slope2);
        if outside_line1 || outside_line2 {
            // leave the rectangle intact so `segment` still describes the
            // finished piece; the caller restarts with this point
            self.points_in_hull = 0;
            return false;
        }
        self.last_x = Some(x);

        if (p1 - self.rect[1]).lt(&slope2) {
            // tighten the max-slope line: pivot on the lower hull point that
            // minimises the slope towards p1
            let mut min = self.lower[self.lower_start] - p1;
            let mut min_i = self.lower_start;
            for i in self.lower_start + 1..self.lower.len() {
                let val = self.lower[i] - p1;
                if val.gt(&min) {
                    break;
                }
                min = val;
                min_i = i;
            }
            self.rect[1] = self.lower[min_i];
            self.rect[3] = p1;
            self.lower_start = min_i;

            let mut end = self.upper.len();
            while end >= self.upper_start + 2
                && cross(self.upper[end - 2], self.upper[end - 1], p1) <= 0
            {
                end -= 1;
            }
            self.upper.truncate(end);
            self.upper.push(p1);
        }

        if (p2 - self.rect[0]).gt(&slope1) {
            let mut max = self.upper[self.upper_start] - p2;
            let mut max_i = self.upper_start;
            for i in self.upper_start + 1..self.upper.len() {
                let val = self.upper[i] - p2;
                if val.lt(&max) {
                    break;
                }
                max = val;
                max_i = i;
            }
            self.rect[0] = self.upper[max_i];
            self.rect[2] = p2;
            self.upper_start = max_i;

            let mut end = self.lower.len();
            while end >= self.lower_start + 2
                && cross(self.lower[end - 2], self.lower[end - 1], p2) >= 0
            {
                end -= 1;
            }
            self.lower.truncate(end);
            self.lower.push(p2);
        }

        self.points_in_hull += 1;
        self.count += 1;
        true
    }

    /// A feasible line for the current (or just-closed) segment.
    ///
    /// Takes the midpoint slope between the two extreme feasible lines; the
    /// matching convex combination of the two lines is itself feasible. The
    /// slope is raised towards zero when the midpoint is negative.
    pub fn segment(&self) -> Segment {
        let first_x = self.first_x as i128;
        if self.count == 1 {
            return Segment {
                first_key: self.first_x,
                slope: 0.0,
                intercept: ((self.rect[0].y + self.rect[1].y) / 2) as f64,
            };
        }
        let min_slope = self.rect[2] - self.rect[0];
        let max_slope = self.rect[3] - self.rect[1];
        // value of each extreme line at first_x, as an exact ratio
        let value_at_first = |anchor: Point, s: Slope| -> f64 {
            let num = anchor.y * s.dx - s.dy * (anchor.x - first_x);
            num as f64 / s.dx as f64
        };
        let (s1, v1) = (min_slope.as_f64(), value_at_first(self.rect[0], min_slope));
        let (s2, v2) = (max_slope.as_f64(), value_at_first(self.rect[1], max_slope));
        let (slope, intercept) = if s1 + s2 >= 0.0 {
            ((s1 + s2) * 0.5, (v1 + v2) * 0.5)
        } else if s2 > s1 {
            let target = s2.min(0.0);
            let w = (s2 - target) / (s2 - s1);
            (target, w * v1 + (1.0 - w) * v2)
        } else {
            (s1, v1)
        };
        Segment {
            first_key: self.first_x,
            slope,
            intercept,
        }
    }
}

/// Greedy longest-feasible-prefix segmentation of `points` within `±epsilon`.
pub fn optimal_pla(points: &[(Key, i64)], epsilon: u64) -> Result<Vec<Segment>> {
    let mut pla = OptimalPla::new(epsilon)?;
    let mut out = Vec::new();
    for &(x, y) in points {
        if !pla.add_point(x, y)? {
            out.push(pla.segment());
            pla.push(x, y);
        }
    }
    if !pla.is_empty() {
        out.push(pla.segment());
    }
    Ok(out)
}

/// Streaming form used by the index builder; keys must already be strictly
/// increasing.
pub(crate) fn segment_stream<I>(points: I, epsilon: u64) -> Result<Vec<Segment>>
where
    I: IntoIterator<Item = (Key, i64)>,
{
    let mut pla = OptimalPla::new(epsilon)?;
    let mut out = Vec::new();
    for (x, y) in points {
        if !pla.push(x, y) {
            out.push(pla.segment());
            pla.push(x, y);
        }
    }
    if !pla.is_empty() {
        out.push(pla.segment());
    }
    Ok(out)
}
