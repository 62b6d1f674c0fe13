//! Contour and polygon primitives shared by every stage.
//!
//! Contours are closed 8-connected chains of pixel centres; regions are
//! 4-connected pixel sets. A contour is stored counter-clockwise as seen on
//! screen (x right, y down), starting at the raster-first pixel.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;
use crate::scalar::{sqrt2, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn is_8_neighbour(self, o: Point) -> bool {
        self != o && (self.x - o.x).abs() <= 1 && (self.y - o.y).abs() <= 1
    }

    #[inline]
    pub fn dist<T: Scalar>(self, o: Point) -> T {
        let dx = T::lit((self.x - o.x) as f64);
        let dy = T::lit((self.y - o.y) as f64);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Moore neighbourhood, clockwise on screen starting at west.
const MOORE: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn moore_index(dx: i32, dy: i32) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a unit 8-neighbour step")
}

/// Closed 8-connected chain of pixel coordinates.
///
/// Chains around one-pixel-wide parts of a region walk out and back along the
/// same pixels, so a point may repeat and `p[i-1] == p[i+1]` occurs at spur
/// tips. Chains of fewer than three points are rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contour {
    points: Vec<Point>,
}

impl Contour {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::input(format!(
                "contour needs at least 3 points, got {}",
                points.len()
            )));
        }
        let n = points.len();
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            if !a.is_8_neighbour(b) {
                return Err(Error::input(format!(
                    "contour points {i} {a:?} and {} {b:?} are not 8-neighbours",
                    (i + 1) % n
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn at(&self, i: isize) -> Point {
        let n = self.points.len() as isize;
        self.points[i.rem_euclid(n) as usize]
    }

    pub fn translated(&self, dx: i32, dy: i32) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    /// Twice the signed shoelace area over pixel centres; negative means
    /// counter-clockwise on screen.
    pub fn signed_area2(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.x as i64 * b.y as i64 - b.x as i64 * a.y as i64
            })
            .sum()
    }

    /// Length of the step from point `i` to point `i + 1`: 1 or sqrt(2).
    #[inline]
    pub fn step<T: Scalar>(&self, i: usize) -> T {
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        if a.x != b.x && a.y != b.y {
            sqrt2()
        } else {
            T::one()
        }
    }
}

/// Cumulative step lengths for O(1) along-contour distance queries.
#[derive(Clone, Debug)]
pub struct ChainLengths<T> {
    prefix: Vec<T>,
}

impl<T: Scalar> ChainLengths<T> {
    pub fn new(c: &Contour) -> Self {
        let mut prefix = Vec::with_capacity(c.len() + 1);
        prefix.push(T::zero());
        let mut acc = T::zero();
        for i in 0..c.len() {
            acc = acc + c.step::<T>(i);
            prefix.push(acc);
        }
        Self { prefix }
    }

    pub fn total(&self) -> T {
        *self.prefix.last().expect("prefix is never empty")
    }

    /// Step length walking forward from `i` to `j`.
    pub fn forward(&self, i: usize, j: usize) -> T {
        if j >= i {
            self.prefix[j] - self.prefix[i]
        } else {
            self.total() - (self.prefix[i] - self.prefix[j])
        }
    }

    /// Shorter of the two along-chain distances between `i` and `j`.
    pub fn between(&self, i: usize, j: usize) -> T {
        let f = self.forward(i, j);
        f.min(self.total() - f)
    }
}

/// Hierarchical parcel identifier; children of `3` are `3.1`, `3.2`, ...
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParcelId(Vec<u32>);

impl ParcelId {
    pub fn root(n: u32) -> Self {
        Self(vec![n])
    }

    pub fn child(&self, k: u32) -> Self {
        let mut v = self.0.clone();
        v.push(k);
        Self(v)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for ParcelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for ParcelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: std::result::Result<Vec<u32>, _> = s.split('.').map(str::parse).collect();
        match parts {
            Ok(v) if !v.is_empty() => Ok(Self(v)),
            _ => Err(Error::input(format!("invalid parcel id {s:?}"))),
        }
    }
}

impl Serialize for ParcelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParcelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extracted,
    SplitMincut,
    SplitLcd,
}

/// A candidate field: outer contour in image coordinates plus the filled
/// region in its own bounding-box frame.
///
/// The mask is one 4-connected component. Holes are normally filled when the
/// parcel is built; a hole is only kept when filling it would swallow another
/// parcel or non-cropland pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Parcel {
    pub id: ParcelId,
    pub stage: Stage,
    contour: Contour,
    mask: BinaryMask,
    origin: (usize, usize),
}

impl Parcel {
    /// Builds a parcel from a mask holding exactly one 4-connected component.
    /// `origin` is the image position of the mask's top-left pixel.
    pub fn from_mask(mask: &BinaryMask, origin: (usize, usize), id: ParcelId, stage: Stage) -> Result<Self> {
        let (bx0, by0, bx1, by1) =
            bounding_box(mask).ok_or_else(|| Error::input("parcel mask is empty"))?;
        let (w, h) = (bx1 - bx0 + 1, by1 - by0 + 1);
        let tight = BinaryMask::from_fn(w, h, |x, y| mask.get(x + bx0, y + by0));
        let (_, n) = label_components4(&tight);
        if n != 1 {
            return Err(Error::input(format!(
                "parcel mask must be one 4-connected component, found {n}"
            )));
        }
        let local = trace_contours(&tight)
            .pop()
            .ok_or_else(|| Error::input("parcel is too small to form a contour"))?;
        let ox = origin.0 + bx0;
        let oy = origin.1 + by0;
        Ok(Self {
            id,
            stage,
            contour: local.translated(ox as i32, oy as i32),
            mask: tight,
            origin: (ox, oy),
        })
    }

    pub fn contour(&self) -> &Contour {
        &self.contour
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    /// Image position of the mask's top-left pixel.
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    /// Inclusive-exclusive bounding box `(x0, y0, x1, y1)` in image coordinates.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        (
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.mask.width(),
            self.origin.1 + self.mask.height(),
        )
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.mask
            .get_i(x - self.origin.0 as i64, y - self.origin.1 as i64)
    }

    /// Set pixels in image coordinates, raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (ox, oy) = self.origin;
        self.mask.iter_set().map(move |(x, y)| (x + ox, y + oy))
    }

    /// Paints the parcel into a full-frame mask.
    pub fn paint(&self, frame: &mut BinaryMask) {
        for (x, y) in self.pixels() {
            if x < frame.width() && y < frame.height() {
                frame.set(x, y, true);
            }
        }
    }

    pub fn to_frame_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut m = BinaryMask::new(width, height);
        self.paint(&mut m);
        m
    }

    pub fn area(&self) -> usize {
        area(self)
    }
}

/// Inclusive bounding box of set pixels.
pub fn bounding_box(mask: &BinaryMask) -> Option<(usize, usize, usize, usize)> {
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for (x, y) in mask.iter_set() {
        bb = Some(match bb {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    bb
}

/// 4-connected component labels (0 = clear), numbered in raster order of
/// each component's first pixel.
pub fn label_components4(mask: &BinaryMask) -> (Vec<u32>, u32) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }
    (labels, next)
}

/// Moore-neighbour trace of the outer boundary of the component containing
/// `start`, which must be that component's raster-first pixel. `inside`
/// decides membership. Stops once the first transition out of `start`
/// repeats. The chain comes out clockwise on screen.
fn moore_trace(start: Point, inside: impl Fn(i32, i32) -> bool) -> Vec<Point> {
    let next_from = |c: Point, bdir: usize| -> Option<(Point, usize)> {
        for t in 1..=8 {
            let k = (bdir + t) % 8;
            let (dx, dy) = MOORE[k];
            if inside(c.x + dx, c.y + dy) {
                let n = Point::new(c.x + dx, c.y + dy);
                let (bx, by) = MOORE[(k + 7) % 8];
                let back = Point::new(c.x + bx, c.y + by);
                return Some((n, moore_index(back.x - n.x, back.y - n.y)));
            }
        }
        None
    };

    let mut pts = vec![start];
    let (mut c, mut bdir) = (start, 0usize);
    let mut first_move: Option<Point> = None;
    loop {
        let Some((n, nb)) = next_from(c, bdir) else {
            return pts;
        };
        if c == start {
            match first_move {
                Some(p1) if p1 == n => break,
                None => first_move = Some(n),
                _ => {}
            }
        }
        pts.push(n);
        c = n;
        bdir = nb;
    }
    if pts.len() > 1 && pts.last() == Some(&start) {
        pts.pop();
    }
    pts
}

/// One outer contour per 4-connected component (raster order of the
/// components' first pixels). Components too small to form a three-point
/// chain are skipped; holes are ignored.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (labels, n) = label_components4(mask);
    let w = mask.width();
    let mut seen = vec![false; n as usize + 1];
    let mut out = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 || seen[l as usize] {
            continue;
        }
        seen[l as usize] = true;
        let start = Point::new((i % w) as i32, (i / w) as i32);
        let inside = |x: i32, y: i32| {
            x >= 0
                && y >= 0
                && (x as usize) < w
                && (y as usize) < mask.height()
                && labels[y as usize * w + x as usize] == l
        };
        let mut pts = moore_trace(start, inside);
        // Reverse everything after the start point: clockwise -> counter-clockwise.
        pts[1..].reverse();
        if let Ok(c) = Contour::new(pts) {
            out.push(c);
        }
    }
    out
}

/// Region enclosed by a contour (boundary pixels included), returned in a
/// frame whose top-left pixel sits at the returned image position.
pub fn fill_contour(c: &Contour) -> (BinaryMask, (i32, i32)) {
    let x0 = c.points().iter().map(|p| p.x).min().unwrap_or(0) - 1;
    let y0 = c.points().iter().map(|p| p.y).min().unwrap_or(0) - 1;
    let x1 = c.points().iter().map(|p| p.x).max().unwrap_or(0) + 1;
    let y1 = c.points().iter().map(|p| p.y).max().unwrap_or(0) + 1;
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut wall = BinaryMask::new(w, h);
    for p in c.points() {
        wall.set((p.x - x0) as usize, (p.y - y0) as usize, true);
    }
    let outside = flood4(&wall.complement(), &[(0, 0)]);
    let filled = BinaryMask::from_fn(w - 2, h - 2, |x, y| !outside.get(x + 1, y + 1));
    (filled, (x0 + 1, y0 + 1))
}

/// 4-connected flood over set pixels of `passable` from the given seeds.
pub(crate) fn flood4(passable: &BinaryMask, seeds: &[(usize, usize)]) -> BinaryMask {
    let (w, h) = (passable.width(), passable.height());
    let mut out = BinaryMask::new(w, h);
    let mut queue = VecDeque::new();
    for &(x, y) in seeds {
        if passable.get(x, y) && !out.get(x, y) {
            out.set(x, y, true);
            queue.push_back((x, y));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let mut push = |nx: usize, ny: usize| {
            if passable.get(nx, ny) && !out.get(nx, ny) {
                out.set(nx, ny, true);
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            push(x - 1, y);
        }
        if x + 1 < w {
            push(x + 1, y);
        }
        if y > 0 {
            push(x, y - 1);
        }
        if y + 1 < h {
            push(x, y + 1);
        }
    }
    out
}

/// Pixel count of the parcel mask.
pub fn area(p: &Parcel) -> usize {
    p.mask().count()
}

/// Chain length of the contour: axis steps count 1, diagonal steps sqrt(2).
pub fn perimeter<T: Scalar>(p: &Parcel) -> T {
    contour_length(p.contour())
}

pub fn contour_length<T: Scalar>(c: &Contour) -> T {
    (0..c.len()).fold(T::zero(), |acc, i| acc + c.step::<T>(i))
}

/// Convex hull of the pixel squares covered by a contour.
///
/// Vertices are pixel corners, so a solid `n x n` square has hull area
/// `n^2`, matching its pixel count.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexHull<T> {
    pub vertices: Vec<(i64, i64)>,
    pub area: T,
    pub perimeter: T,
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; collinear points are dropped.
pub fn monotone_chain(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoelace area of a simple polygon (absolute value).
pub fn shoelace_area<T: Scalar>(vs: &[(i64, i64)]) -> T {
    let n = vs.len();
    if n < 3 {
        return T::zero();
    }
    let s: i64 = (0..n)
        .map(|i| {
            let (a, b) = (vs[i], vs[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    T::lit(s.abs() as f64 / 2.0)
}

pub fn polygon_perimeter<T: Scalar>(vs: &[(i64, i64)]) -> T {
    let n = vs.len();
    if n < 2 {
        return T::zero();
    }
    (0..n).fold(T::zero(), |acc, i| {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        let (dx, dy) = (T::lit((b.0 - a.0) as f64), T::lit((b.1 - a.1) as f64));
        acc + (dx * dx + dy * dy).sqrt()
    })
}

pub fn convex_hull<T: Scalar>(p: &Parcel) -> ConvexHull<T> {
    let corners = p
        .contour()
        .points()
        .iter()
        .flat_map(|q| {
            let (x, y) = (q.x as i64, q.y as i64);
            [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
        })
        .collect();
    let vertices = monotone_chain(corners);
    ConvexHull {
        area: shoelace_area(&vertices),
        perimeter: polygon_perimeter(&vertices),
        vertices,
    }
}

/// Mean over distinct boundary pixels of `min(row run, column run)` through
/// that pixel.
pub fn mean_width<T: Scalar>(p: &Parcel) -> T {
    let m = p.mask();
    let (ox, oy) = p.origin();
    let mut pts: Vec<Point> = p.contour().points().to_vec();
    pts.sort_unstable();
    pts.dedup();
    let run = |x: usize, y: usize, horizontal: bool| -> usize {
        let step = |i: i64| -> bool {
            if horizontal {
                m.get_i(x as i64 + i, y as i64)
            } else {
                m.get_i(x as i64, y as i64 + i)
            }
        };
        let mut n = 1;
        let mut i = 1;
        while step(i) {
            n += 1;
            i += 1;
        }
        i = -1;
        while step(i) {
            n += 1;
            i -= 1;
        }
        n
    };
    let total: usize = pts
        .iter()
        .map(|q| {
            let (x, y) = (q.x as usize - ox, q.y as usize - oy);
            run(x, y, true).min(run(x, y, false))
        })
        .sum();
    T::count(total) / T::count(pts.len())
}

/// Width over length, clamped to 1.
///
/// Length comes from the rectangle identity `P = 2 (L + W)` applied to the
/// pixel-extent perimeter. The centre chain runs half a pixel inside the
/// region's outer edge, which for a convex region is exactly 4 shorter, so
/// the extent perimeter is `perimeter + 4`. This keeps perimeter and the
/// run-length widths in the same units.
pub fn aspect_ratio<T: Scalar>(p: &Parcel) -> T {
    let w = mean_width::<T>(p);
    let extent = perimeter::<T>(p) + T::lit(4.0);
    let length = w.max(extent / T::lit(2.0) - w);
    if length <= T::zero() {
        return T::one();
    }
    (w / length).min(T::one())
}

/// Angle in degrees between `p[i-w] -> p[i]` and `p[i] -> p[i+w]`, indices
/// cyclic. 0 is straight on, 180 a full reversal.
pub fn turn_angle<T: Scalar>(c: &Contour, i: usize, w: usize) -> T {
    let i = i as isize;
    let w = w as isize;
    let (a, b, d) = (c.at(i - w), c.at(i), c.at(i + w));
    let v1 = ((b.x - a.x) as f64, (b.y - a.y) as f64);
    let v2 = ((d.x - b.x) as f64, (d.y - b.y) as f64);
    let n1 = v1.0.hypot(v1.1);
    let n2 = v2.0.hypot(v2.1);
    if n1 == 0.0 || n2 == 0.0 {
        return T::zero();
    }
    let cos = ((v1.0 * v2.0 + v1.1 * v2.1) / (n1 * n2)).clamp(-1.0, 1.0);
    T::lit(cos.acos().to_degrees())
}

/// Indices of a cyclic sequence that beat the `w` values before them and
/// are not beaten by the `w` values after them, so a flat peak keeps its
/// first index.
pub fn find_neighbourhood_max<T: Scalar>(values: &[T], w: usize) -> Vec<usize> {
    let n = values.len() as isize;
    (0..values.len())
        .filter(|&i| {
            let v = values[i];
            (1..=w as isize).all(|d| {
                let before = values[(i as isize - d).rem_euclid(n) as usize];
                let after = values[(i as isize + d).rem_euclid(n) as usize];
                v > before && v >= after
            })
        })
        .collect()
}

/// Shorter along-chain distance between indices `i` and `j`.
pub fn contour_distance<T: Scalar>(c: &Contour, i: usize, j: usize) -> T {
    ChainLengths::new(c).between(i, j)
}

/// 8-connected Bresenham rasterisation from `a` to `b`, inclusive.
pub fn bresenham(a: Point, b: Point) -> Vec<Point> {
    let (mut x, mut y) = (a.x, a.y);
    let dx = (b.x - a.x).abs();
    let dy = -(b.y - a.y).abs();
    let sx = if a.x < b.x { 1 } else { -1 };
    let sy = if a.y < b.y { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push(Point::new(x, y));
        if x == b.x && y == b.y {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// True iff every Bresenham pixel of `a`-`b` lies in the parcel.
pub fn segment_inside(p: &Parcel, a: Point, b: Point) -> bool {
    bresenham(a, b)
        .iter()
        .all(|q| p.contains(q.x as i64, q.y as i64))
}

/// Per-orientation Euclidean distance transforms of an edge mask.
///
/// Edge pixels are bucketed by the orientation of the edge line itself
/// (gradient angle plus 90 degrees, modulo 180) into bins centred on
/// multiples of `180 / bins` degrees. A bin with no edge pixels holds
/// `+inf` everywhere.
#[derive(Clone, Debug)]
pub struct DirectionalDistanceField<T> {
    width: usize,
    height: usize,
    bins: usize,
    fields: Vec<Vec<T>>,
}

fn orientation_bin(theta: f64, bins: usize) -> usize {
    let pi = std::f64::consts::PI;
    let t = theta.rem_euclid(pi);
    ((t / (pi / bins as f64)).round() as usize) % bins
}

/// Exact 1-D squared distance transform (Felzenszwalb–Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and parabola q dominates everywhere.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance to the nearest set pixel; `+inf` when none.
pub(crate) fn euclidean_distance_transform(w: usize, h: usize, seeds: &[bool]) -> Vec<f64> {
    const FAR: f64 = 1e20;
    if !seeds.iter().any(|&s| s) {
        return vec![f64::INFINITY; w * h];
    }
    let n = w.max(h);
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut grid: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    let mut col = vec![0f64; h];
    let mut col_out = vec![0f64; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        edt_1d(&col, &mut col_out, &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0f64; w];
    for y in 0..h {
        edt_1d(&grid[y * w..(y + 1) * w], &mut row_out, &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    grid.into_iter().map(|d| d.sqrt()).collect()
}

impl<T: Scalar> DirectionalDistanceField<T> {
    /// `orientations` holds one gradient angle (radians) per pixel.
    pub fn build(edges: &BinaryMask, orientations: &[T], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("orientation bin count must be at least 1"));
        }
        let (w, h) = (edges.width(), edges.height());
        if orientations.len() != w * h {
            return Err(Error::input("orientation grid does not match edge mask"));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut seeds = vec![vec![false; w * h]; bins];
        for (i, &e) in edges.bits().iter().enumerate() {
            if e {
                let b = orientation_bin(orientations[i].to_f64_lossy() + half_pi, bins);
                seeds[b][i] = true;
            }
        }
        let fields = seeds
            .iter()
            .map(|s| {
                euclidean_distance_transform(w, h, s)
                    .into_iter()
                    .map(|d| if d.is_finite() { T::lit(d) } else { T::infinity() })
                    .collect()
            })
            .collect();
        Ok(Self {
            width: w,
            height: h,
            bins,
            fields,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn distance(&self, bin: usize, x: usize, y: usize) -> T {
        self.fields[bin][y * self.width + x]
    }

    /// Bin selected by a segment's direction.
    pub fn segment_bin(&self, a: Point, b: Point) -> usize {
        let theta = ((b.y - a.y) as f64).atan2((b.x - a.x) as f64);
        orientation_bin(theta, self.bins)
    }

    /// Mean distance, in the segment's orientation bin, over
    /// `max(8, ceil(|ab|))` evenly spaced samples rounded to pixels.
    /// Returns `+inf` when the bin holds no edge pixels.
    pub fn query(&self, a: Point, b: Point) -> Result<T> {
        let inb = |p: Point| {
            p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
        };
        if !inb(a) || !inb(b) {
            return Err(Error::input(format!(
                "segment {a:?}-{b:?} outside {}x{} field",
                self.width, self.height
            )));
        }
        if a == b {
            return Err(Error::input("chamfer query needs two distinct points"));
        }
        let bin = self.segment_bin(a, b);
        let len = ((b.x - a.x) as f64).hypot((b.y - a.y) as f64);
        let k = (len.ceil() as usize).max(8);
        let mut sum = T::zero();
        for s in 0..k {
            let t = s as f64 / (k - 1) as f64;
            let x = (a.x as f64 + t * (b.x - a.x) as f64).round() as usize;
            let y = (a.y as f64 + t * (b.y - a.y) as f64).round() as usize;
            sum = sum + self.distance(bin, x, y);
        }
        Ok(sum / T::count(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parcel(mask: &BinaryMask) -> Parcel {
        Parcel::from_mask(mask, (0, 0), ParcelId::root(1), Stage::Extracted).unwrap()
    }

    fn rect(w: usize, h: usize, rw: usize, rh: usize, ox: usize, oy: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (ox..ox + rw).contains(&x) && (oy..oy + rh).contains(&y))
    }

    #[test]
    fn trace_small_square() {
        let m = rect(5, 5, 3, 3, 1, 1);
        let cs = trace_contours(&m);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.len(), 8);
        assert_eq!(c.points()[0], Point::new(1, 1));
        assert!(c.signed_area2() < 0, "counter-clockwise on screen");
        assert!(trace_contours(&BinaryMask::new(4, 4)).is_empty());
        let two = BinaryMask::from_fn(10, 4, |x, y| (1..3).contains(&y) && (x < 3 || x > 6));
        assert_eq!(trace_contours(&two).len(), 2);
    }

    #[test]
    fn trace_spur_and_line() {
        let line = BinaryMask::from_fn(6, 3, |x, y| y == 1 && (1..5).contains(&x));
        let c = &trace_contours(&line)[0];
        assert_eq!(c.len(), 6);
        assert_eq!(contour_length::<f64>(c), 6.0);
        let domino = BinaryMask::from_fn(4, 3, |x, y| y == 1 && (1..3).contains(&x));
        assert!(trace_contours(&domino).is_empty());
    }

    #[test]
    fn area_and_perimeter() {
        let sq = parcel(&rect(14, 14, 10, 10, 2, 2));
        assert_eq!(area(&sq), 100);
        assert_relative_eq!(perimeter::<f64>(&sq), 36.0, epsilon = 1e-12);
        let moved = Parcel::from_mask(&rect(14, 14, 10, 10, 2, 2), (7, 3), ParcelId::root(2), Stage::Extracted).unwrap();
        assert_eq!(perimeter::<f64>(&moved), perimeter::<f64>(&sq));
        assert_eq!(moved.origin(), (9, 5));

        let l = parcel(&BinaryMask::from_fn(10, 10, |x, y| !(x >= 5 && y >= 5)));
        assert_eq!(area(&l), 75);
    }

    #[test]
    fn diamond_perimeter_uses_diagonal_steps() {
        // |x - 6| + |y - 6| <= 4: boundary chain is 16 diagonal steps.
        let d = parcel(&BinaryMask::from_fn(13, 13, |x, y| {
            (x as i64 - 6).abs() + (y as i64 - 6).abs() <= 4
        }));
        assert_relative_eq!(perimeter::<f64>(&d), 16.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hull_examples() {
        let sq = parcel(&rect(12, 12, 10, 10, 1, 1));
        let h = convex_hull::<f64>(&sq);
        assert_relative_eq!(h.area, 100.0);
        assert_relative_eq!(h.perimeter, 40.0);
        let l = parcel(&BinaryMask::from_fn(10, 10, |x, y| !(x >= 5 && y >= 5)));
        let h = convex_hull::<f64>(&l);
        assert_relative_eq!(h.area, 87.5);
        assert_relative_eq!(h.area / 75.0, 87.5 / 75.0);
        assert_eq!(h.vertices.len(), 5);
    }

    #[test]
    fn width_and_aspect() {
        let r = parcel(&rect(104, 14, 100, 10, 2, 2));
        assert_relative_eq!(mean_width::<f64>(&r), 10.0, epsilon = 1e-12);
        assert_relative_eq!(aspect_ratio::<f64>(&r), 0.1, epsilon = 1e-9);
        let sq = parcel(&rect(12, 12, 10, 10, 1, 1));
        assert_relative_eq!(mean_width::<f64>(&sq), 10.0);
        assert_relative_eq!(aspect_ratio::<f64>(&sq), 1.0);
        let snake = parcel(&rect(54, 3, 50, 1, 2, 1));
        assert_relative_eq!(mean_width::<f64>(&snake), 1.0);
        assert_relative_eq!(aspect_ratio::<f64>(&snake), 0.02, epsilon = 1e-12);
        assert_relative_eq!(aspect_ratio::<f32>(&r), 0.1f32, epsilon = 1e-6);
    }

    #[test]
    fn turn_angles() {
        let sq = parcel(&rect(24, 24, 20, 20, 2, 2));
        let c = sq.contour();
        // Index 0 is the top-left corner; index 10 is mid-way along a side.
        assert_relative_eq!(turn_angle::<f64>(c, 10, 3), 0.0, epsilon = 1e-9);
        assert_relative_eq!(turn_angle::<f64>(c, 0, 3), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn contour_distance_examples() {
        let sq = parcel(&rect(14, 14, 10, 10, 2, 2));
        let c = sq.contour();
        assert_relative_eq!(contour_distance::<f64>(c, 3, 4), 1.0);
        assert_relative_eq!(contour_distance::<f64>(c, 0, 18), 18.0);
        assert_relative_eq!(contour_distance::<f64>(c, 18, 0), 18.0);
        assert_relative_eq!(contour_distance::<f64>(c, 5, 5), 0.0);
    }

    #[test]
    fn segment_inside_cases() {
        let sq = parcel(&rect(14, 14, 10, 10, 2, 2));
        assert!(segment_inside(&sq, Point::new(2, 2), Point::new(11, 11)));
        assert!(segment_inside(&sq, Point::new(2, 5), Point::new(2, 5)));
        let u = parcel(&BinaryMask::from_fn(20, 12, |x, y| y < 4 || x < 5 || x >= 15));
        assert!(!segment_inside(&u, Point::new(4, 10), Point::new(15, 10)));
    }

    #[test]
    fn bresenham_is_8_connected() {
        let pts = bresenham(Point::new(0, 0), Point::new(7, -3));
        assert_eq!(pts.first(), Some(&Point::new(0, 0)));
        assert_eq!(pts.last(), Some(&Point::new(7, -3)));
        for w in pts.windows(2) {
            assert!(w[0].is_8_neighbour(w[1]));
        }
    }

    #[test]
    fn chamfer_basic_cases() {
        let empty = BinaryMask::new(8, 8);
        let f = DirectionalDistanceField::<f64>::build(&empty, &vec![0.0; 64], 4).unwrap();
        for b in 0..4 {
            assert!(f.distance(b, 3, 3).is_infinite());
        }
        // Horizontal edge line: gradient vertical.
        let line = BinaryMask::from_fn(24, 16, |_, y| y == 5);
        let orient = vec![std::f64::consts::FRAC_PI_2; 24 * 16];
        let f = DirectionalDistanceField::build(&line, &orient, 16).unwrap();
        let bin = f.segment_bin(Point::new(2, 5), Point::new(20, 5));
        assert_eq!(f.distance(bin, 7, 5), 0.0);
        assert_eq!(f.query(Point::new(2, 5), Point::new(20, 5)).unwrap(), 0.0);
        assert_relative_eq!(f.query(Point::new(2, 8), Point::new(20, 8)).unwrap(), 3.0);
        assert!(f.query(Point::new(0, 0), Point::new(30, 0)).is_err());
        assert!(f.query(Point::new(1, 1), Point::new(1, 1)).is_err());
        // Vertical segment falls in a different bin: no edges there.
        assert!(f.query(Point::new(3, 1), Point::new(3, 12)).unwrap().is_infinite());
    }

    #[test]
    fn parcel_id_roundtrip() {
        let id = ParcelId::root(4).child(2).child(11);
        assert_eq!(id.to_string(), "4.2.11");
        assert_eq!("4.2.11".parse::<ParcelId>().unwrap(), id);
        assert!("4..1".parse::<ParcelId>().is_err());
        assert!(ParcelId::root(2) < ParcelId::root(10));
    }
}
