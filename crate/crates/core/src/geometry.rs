//! Polygonal domains with a tagged boundary partition, structured triangular
//! meshes and arc-length parameterized boundary curves.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub type Point = [f64; 2];

const GEOM_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("expected one boundary tag per polygon side: {sides} sides, {tags} tags")]
    TagCountMismatch { sides: usize, tags: usize },
    #[error("polygon side {0} has zero length")]
    DegenerateSide(usize),
    #[error("polygon is not simple: sides {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("polygon is clockwise (signed area {0}); vertices must be counterclockwise")]
    Clockwise(f64),
    #[error("no side is tagged gammaD; the grounded portion must be nonempty")]
    MissingDirichlet,
    #[error("domain diameter {diameter} exceeds the stated bound {bound}")]
    DiameterBound { diameter: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("structured meshing needs an axis-aligned rectangle: {0}")]
    NotRectangle(String),
    #[error("no boundary side carries tag {0}")]
    TagAbsent(BoundaryTag),
    #[error("inner portion at distance {rho} is empty")]
    EmptyPortion { rho: f64 },
}

/// Boundary partition labels. The derived order Γ₁ < Γ₂ < Γ_D is the corner
/// ownership order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
    GammaD,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Gamma1 => "gamma1",
            BoundaryTag::Gamma2 => "gamma2",
            BoundaryTag::GammaD => "gammaD",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "gamma1" | "g1" => Ok(BoundaryTag::Gamma1),
            "2" | "gamma2" | "g2" => Ok(BoundaryTag::Gamma2),
            "d" | "gammad" | "gd" => Ok(BoundaryTag::GammaD),
            other => Err(format!("unknown boundary tag '{other}' (use 1, 2 or D)")),
        }
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return norm(sub(p, a));
    }
    let s = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    norm(sub(p, [a[0] + s * ab[0], a[1] + s * ab[1]]))
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| point_segment_distance(r, p, q) <= GEOM_EPS;
    (d1.abs() <= GEOM_EPS && on(a, b, c))
        || (d2.abs() <= GEOM_EPS && on(a, b, d))
        || (d3.abs() <= GEOM_EPS && on(c, d, a))
        || (d4.abs() <= GEOM_EPS && on(c, d, b))
}

/// One straight side of the polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Side {
    pub index: usize,
    pub start: Point,
    pub end: Point,
    pub tag: BoundaryTag,
}

impl Side {
    pub fn length(&self) -> f64 {
        norm(sub(self.end, self.start))
    }

    /// Outward unit normal (the polygon is counterclockwise).
    pub fn normal(&self) -> Point {
        let d = sub(self.end, self.start);
        let l = norm(d);
        [d[1] / l, -d[0] / l]
    }

    pub fn tangent(&self) -> Point {
        let d = sub(self.end, self.start);
        let l = norm(d);
        [d[0] / l, d[1] / l]
    }

    pub fn point_at(&self, s: f64) -> Point {
        let tau = self.tangent();
        [self.start[0] + s * tau[0], self.start[1] + s * tau[1]]
    }

    pub fn contains(&self, p: Point) -> bool {
        point_segment_distance(p, self.start, self.end) <= 1e-9 * self.length().max(1.0)
    }
}

/// The domain Ω: a simple counterclockwise polygon whose sides are tagged
/// Γ₁, Γ₂ or Γ_D, plus the a priori constants of the admissible class.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    vertices: Vec<Point>,
    tags: Vec<BoundaryTag>,
    /// Characteristic radius r0 of the boundary regularity class.
    pub r0: f64,
    /// Lipschitz character M. Stored for reporting.
    pub lipschitz_m: f64,
    /// A priori diameter bound D.
    pub diameter_bound: f64,
}

impl DomainSpec {
    pub fn new(
        vertices: Vec<Point>,
        tags: Vec<BoundaryTag>,
        r0: f64,
        lipschitz_m: f64,
        diameter_bound: f64,
    ) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if tags.len() != n {
            return Err(GeometryError::TagCountMismatch { sides: n, tags: tags.len() });
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!("r0 must be positive, got {r0}")));
        }
        if !(lipschitz_m > 0.0 && lipschitz_m.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!(
                "Lipschitz character M must be positive, got {lipschitz_m}"
            )));
        }
        for i in 0..n {
            if norm(sub(vertices[(i + 1) % n], vertices[i])) <= GEOM_EPS {
                return Err(GeometryError::DegenerateSide(i));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(GeometryError::Clockwise(area));
        }
        if !tags.contains(&BoundaryTag::GammaD) {
            return Err(GeometryError::MissingDirichlet);
        }
        let spec = DomainSpec { vertices, tags, r0, lipschitz_m, diameter_bound };
        let diameter = spec.diameter();
        if diameter > diameter_bound * (1.0 + 1e-12) {
            return Err(GeometryError::DiameterBound { diameter, bound: diameter_bound });
        }
        Ok(spec)
    }

    /// Axis-aligned rectangle `[0, width] x [0, height]` with tags given in the
    /// order bottom, right, top, left.
    pub fn rectangle(width: f64, height: f64, tags: [BoundaryTag; 4]) -> Result<Self, GeometryError> {
        let vertices = vec![[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]];
        let diam = width.hypot(height);
        DomainSpec::new(vertices, tags.to_vec(), 0.1 * width.min(height), 1.0, diam)
    }

    /// Unit square with Γ_D = bottom ∪ left, Γ₂ = right, Γ₁ = top.
    pub fn unit_square() -> Self {
        use BoundaryTag::*;
        DomainSpec::rectangle(1.0, 1.0, [GammaD, Gamma2, Gamma1, GammaD])
            .expect("unit square is a valid domain")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    pub fn sides(&self) -> impl Iterator<Item = Side> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Side {
            index: i,
            start: self.vertices[i],
            end: self.vertices[(i + 1) % n],
            tag: self.tags[i],
        })
    }

    pub fn side(&self, i: usize) -> Side {
        let n = self.vertices.len();
        Side { index: i, start: self.vertices[i], end: self.vertices[(i + 1) % n], tag: self.tags[i] }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(norm(sub(*a, *b)));
            }
        }
        d
    }

    /// Area centroid of the polygon.
    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = cross(p, q);
            a2 += c;
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [cx / (3.0 * a2), cy / (3.0 * a2)]
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.tags.contains(&tag)
    }

    pub fn tagged_length(&self, tag: BoundaryTag) -> f64 {
        self.sides().filter(|s| s.tag == tag).map(|s| s.length()).sum()
    }

    pub fn contains(&self, p: Point) -> bool {
        // even-odd ray casting
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.sides()
            .map(|s| point_segment_distance(p, s.start, s.end))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to ∂Ω \ Γ_tag, the closure of the sides carrying other tags.
    pub fn distance_to_complement(&self, p: Point, tag: BoundaryTag) -> f64 {
        self.sides()
            .filter(|s| s.tag != tag)
            .map(|s| point_segment_distance(p, s.start, s.end))
            .fold(f64::INFINITY, f64::min)
    }

    /// Tag owning a boundary point. Corners shared by differently tagged sides
    /// go to the smaller tag in the order Γ₁ < Γ₂ < Γ_D.
    pub fn tag_at(&self, p: Point) -> Option<BoundaryTag> {
        self.sides().filter(|s| s.contains(p)).map(|s| s.tag).min()
    }

    /// Arc-length parameterization of the sides carrying `tag`.
    pub fn path(&self, tag: BoundaryTag) -> Result<TaggedPath, GeometryError> {
        TaggedPath::new(self, tag)
    }
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n])).sum::<f64>()
}

/// The sides of one tag, concatenated in counterclockwise order and
/// parameterized by cumulative arc length. The path starts at the beginning of
/// a maximal run of consecutive sides with that tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPath {
    pub tag: BoundaryTag,
    sides: Vec<Side>,
    offsets: Vec<f64>,
    length: f64,
}

impl TaggedPath {
    fn new(domain: &DomainSpec, tag: BoundaryTag) -> Result<Self, GeometryError> {
        let n = domain.vertices.len();
        let tagged: Vec<usize> = (0..n).filter(|&i| domain.tags[i] == tag).collect();
        if tagged.is_empty() {
            return Err(GeometryError::TagAbsent(tag));
        }
        // start at a tagged side whose predecessor is not tagged
        let start = tagged
            .iter()
            .copied()
            .find(|&i| domain.tags[(i + n - 1) % n] != tag)
            .unwrap_or(0);
        let mut sides = Vec::new();
        let mut offsets = Vec::new();
        let mut t = 0.0;
        for k in 0..n {
            let i = (start + k) % n;
            if domain.tags[i] == tag {
                let side = domain.side(i);
                offsets.push(t);
                t += side.length();
                sides.push(side);
            }
        }
        Ok(TaggedPath { tag, sides, offsets, length: t })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    /// Arc-length offset of the start of each side.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Index into `sides()` of the side holding parameter `t`. A parameter at a
    /// junction belongs to the following side, except at the very end.
    pub fn side_index(&self, t: f64) -> usize {
        let tol = 1e-12 * self.length.max(1.0);
        let mut idx = 0;
        for (k, off) in self.offsets.iter().enumerate() {
            if t + tol >= *off {
                idx = k;
            }
        }
        idx
    }

    pub fn point_at(&self, t: f64) -> Point {
        let k = self.side_index(t);
        self.sides[k].point_at(t - self.offsets[k])
    }

    pub fn normal_at(&self, t: f64) -> Point {
        self.sides[self.side_index(t)].normal()
    }

    /// Arc-length parameter of a point lying on side `side_index` of the polygon.
    pub fn param_on_side(&self, polygon_side: usize, p: Point) -> Option<f64> {
        self.sides
            .iter()
            .position(|s| s.index == polygon_side)
            .map(|k| self.offsets[k] + norm(sub(p, self.sides[k].start)))
    }

    /// Parameters where consecutive sides meet (excluding the path ends).
    pub fn junctions(&self) -> &[f64] {
        &self.offsets[1..]
    }
}

/// Ordered samples along a tagged boundary portion.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub tag: BoundaryTag,
    pub t: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
}

impl BoundaryCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Unit tangent in the direction of increasing arc length.
    pub fn tangent(&self, i: usize) -> Point {
        let n = self.normals[i];
        [-n[1], n[0]]
    }

    /// Samples `m` equispaced arc-length points along `path`.
    pub fn sample(path: &TaggedPath, m: usize) -> BoundaryCurve {
        let len = path.length();
        let t: Vec<f64> = (0..m).map(|i| len * i as f64 / (m - 1) as f64).collect();
        BoundaryCurve::at(path, &t)
    }

    /// Samples `path` at the given parameters.
    pub fn at(path: &TaggedPath, t: &[f64]) -> BoundaryCurve {
        BoundaryCurve {
            tag: path.tag,
            t: t.to_vec(),
            points: t.iter().map(|&s| path.point_at(s)).collect(),
            normals: t.iter().map(|&s| path.normal_at(s)).collect(),
        }
    }
}

/// Sub-curve of `curve` at Euclidean distance greater than `rho` from the rest
/// of the boundary, ∂Ω \ Γ_tag. The exact crossing points (distance = rho)
/// close each retained piece so the arc length of the portion is exact.
pub fn inner_portion(
    domain: &DomainSpec,
    curve: &BoundaryCurve,
    rho: f64,
) -> Result<BoundaryCurve, GeometryError> {
    if !(rho >= 0.0) {
        return Err(GeometryError::InvalidParameter(format!("rho must be nonnegative, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(curve.clone());
    }
    if rho >= 0.5 * curve.arc_length() {
        return Err(GeometryError::EmptyPortion { rho });
    }
    let path = domain.path(curve.tag)?;
    let dist = |t: f64| domain.distance_to_complement(path.point_at(t), curve.tag);
    let inside: Vec<bool> = curve.points.iter().map(|&p| domain.distance_to_complement(p, curve.tag) > rho).collect();

    let crossing = |mut a: f64, mut b: f64| {
        // a is outside, b inside or vice versa
        let a_in = dist(a) > rho;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (dist(m) > rho) == a_in {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-15 * path.length().max(1.0) {
                break;
            }
        }
        if a_in { a } else { b }
    };

    let mut ts = Vec::new();
    for i in 0..curve.len() {
        if i > 0 && inside[i] != inside[i - 1] {
            let tc = crossing(curve.t[i - 1], curve.t[i]);
            let tc = if inside[i] { tc.max(curve.t[i - 1]) } else { tc };
            if ts.last().is_none_or(|&l: &f64| tc > l) {
                ts.push(tc);
            }
        }
        if inside[i] && ts.last().is_none_or(|&l: &f64| curve.t[i] > l) {
            ts.push(curve.t[i]);
        }
    }
    if ts.len() < 2 {
        return Err(GeometryError::EmptyPortion { rho });
    }
    let mut out = BoundaryCurve::at(&path, &ts);
    out.tag = curve.tag;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints ordered along the counterclockwise boundary.
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    /// Arc-length coordinates of the endpoints on the tag's path.
    pub t: [f64; 2],
    /// Polygon side holding the edge.
    pub side: usize,
}

/// Conforming triangulation of a domain with tagged boundary edges.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: DomainSpec,
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Maximum edge length.
    pub h: f64,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * cross(sub(b, a), sub(c, a))
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Mask of nodes touching a Γ_D edge.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for e in self.edges_with_tag(BoundaryTag::GammaD) {
            mask[e.nodes[0]] = true;
            mask[e.nodes[1]] = true;
        }
        mask
    }

    /// Checks conformity, orientation and boundary consistency.
    pub fn validate(&self) -> Result<(), String> {
        use std::collections::HashMap;
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, tri) in self.triangles.iter().enumerate() {
            if self.triangle_area(k) <= 0.0 {
                return Err(format!("triangle {k} has nonpositive area"));
            }
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, c)) = edge_count.iter().find(|(_, &c)| c > 2) {
            return Err(format!("edge {e:?} shared by {c} triangles"));
        }
        let mut boundary: Vec<(usize, usize)> =
            edge_count.iter().filter(|(_, &c)| c == 1).map(|(&e, _)| e).collect();
        let mut tagged: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])))
            .collect();
        boundary.sort_unstable();
        tagged.sort_unstable();
        if boundary != tagged {
            return Err("tagged boundary edges differ from the mesh boundary".into());
        }
        for e in &self.boundary_edges {
            let mid = [
                0.5 * (self.nodes[e.nodes[0]][0] + self.nodes[e.nodes[1]][0]),
                0.5 * (self.nodes[e.nodes[0]][1] + self.nodes[e.nodes[1]][1]),
            ];
            let side = self.domain.side(e.side);
            if !side.contains(mid) || side.tag != e.tag {
                return Err(format!("boundary edge {:?} disagrees with polygon side {}", e.nodes, e.side));
            }
        }
        Ok(())
    }
}

/// Structured triangulation of an axis-aligned rectangular domain with `n`
/// subdivisions per unit length; each grid cell is split along its diagonal.
/// Every polygon vertex must fall on a grid node.
pub fn build_rectangle_mesh(spec: &DomainSpec, n: usize) -> Result<Mesh, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidParameter("need at least one subdivision per unit length".into()));
    }
    let xs: Vec<f64> = spec.vertices.iter().map(|v| v[0]).collect();
    let ys: Vec<f64> = spec.vertices.iter().map(|v| v[1]).collect();
    let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (w, ht) = (x1 - x0, y1 - y0);
    if (spec.area() - w * ht).abs() > 1e-10 * w * ht {
        return Err(GeometryError::NotRectangle("polygon does not fill its bounding box".into()));
    }
    for s in spec.sides() {
        let d = sub(s.end, s.start);
        if d[0].abs() > 1e-12 && d[1].abs() > 1e-12 {
            return Err(GeometryError::NotRectangle(format!("side {} is not axis-aligned", s.index)));
        }
    }
    let nx = ((w * n as f64).round() as usize).max(1);
    let ny = ((ht * n as f64).round() as usize).max(1);
    let (dx, dy) = (w / nx as f64, ht / ny as f64);
    for (i, v) in spec.vertices.iter().enumerate() {
        let gi = (v[0] - x0) / dx;
        let gj = (v[1] - y0) / dy;
        if (gi - gi.round()).abs() > 1e-9 || (gj - gj.round()).abs() > 1e-9 {
            return Err(GeometryError::NotRectangle(format!("vertex {i} does not lie on a grid node")));
        }
    }

    // number along the shorter direction first to keep the matrix band narrow
    let x_fast = nx <= ny;
    let id = |i: usize, j: usize| if x_fast { j * (nx + 1) + i } else { i * (ny + 1) + j };
    let mut nodes = vec![[0.0; 2]; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { x1 } else { x0 + i as f64 * dx };
            let y = if j == ny { y1 } else { y0 + j as f64 * dy };
            nodes[id(i, j)] = [x, y];
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
        }
    }

    // perimeter walk, counterclockwise
    let mut perimeter: Vec<(usize, usize)> = Vec::new();
    perimeter.extend((0..nx).map(|i| (id(i, 0), id(i + 1, 0))));
    perimeter.extend((0..ny).map(|j| (id(nx, j), id(nx, j + 1))));
    perimeter.extend((0..nx).rev().map(|i| (id(i + 1, ny), id(i, ny))));
    perimeter.extend((0..ny).rev().map(|j| (id(0, j + 1), id(0, j))));

    let mut paths = std::collections::HashMap::new();
    for tag in [BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::GammaD] {
        if spec.has_tag(tag) {
            paths.insert(tag, spec.path(tag)?);
        }
    }
    let mut boundary_edges = Vec::with_capacity(perimeter.len());
    for (a, b) in perimeter {
        let (pa, pb) = (nodes[a], nodes[b]);
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let side = spec
            .sides()
            .find(|s| s.contains(mid))
            .ok_or_else(|| GeometryError::NotRectangle("boundary edge outside every side".into()))?;
        let path = &paths[&side.tag];
        let t0 = path.param_on_side(side.index, pa).expect("side on its own path");
        let t1 = path.param_on_side(side.index, pb).expect("side on its own path");
        boundary_edges.push(BoundaryEdge { nodes: [a, b], tag: side.tag, t: [t0, t1], side: side.index });
    }

    Ok(Mesh { domain: spec.clone(), nodes, triangles, boundary_edges, h: dx.hypot(dy) })
}

/// `m` arc-length equispaced samples with outward normals along the portion
/// of the mesh boundary carrying `tag`.
pub fn trace_sample(mesh: &Mesh, tag: BoundaryTag, m: usize) -> Result<BoundaryCurve, GeometryError> {
    if m < 2 {
        return Err(GeometryError::InvalidParameter(format!("need at least 2 samples, got {m}")));
    }
    if !mesh.boundary_edges.iter().any(|e| e.tag == tag) {
        return Err(GeometryError::TagAbsent(tag));
    }
    let path = mesh.domain.path(tag)?;
    Ok(BoundaryCurve::sample(&path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryTag::*;

    #[test]
    fn mesh_counts() {
        let sq = DomainSpec::unit_square();
        let m = build_rectangle_mesh(&sq, 2).unwrap();
        assert_eq!((m.nodes.len(), m.triangles.len(), m.boundary_edges.len()), (9, 8, 8));
        let m = build_rectangle_mesh(&sq, 1).unwrap();
        assert_eq!((m.nodes.len(), m.triangles.len(), m.boundary_edges.len()), (4, 2, 4));
        m.validate().unwrap();
    }

    #[test]
    fn rectangle_mesh_size() {
        let r = DomainSpec::rectangle(2.0, 1.0, [GammaD, Gamma2, Gamma1, GammaD]).unwrap();
        let m = build_rectangle_mesh(&r, 4).unwrap();
        assert!((m.h - 2f64.sqrt() / 4.0).abs() < 1e-12);
        m.validate().unwrap();
        let m8 = build_rectangle_mesh(&r, 8).unwrap();
        assert_eq!(m8.h * 2.0, m.h);
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let tags = vec![GammaD, Gamma1, Gamma2, GammaD];
        assert!(matches!(DomainSpec::new(cw, tags.clone(), 0.1, 1.0, 2.0), Err(GeometryError::Clockwise(_))));
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            DomainSpec::new(bowtie, tags.clone(), 0.1, 1.0, 2.0),
            Err(GeometryError::SelfIntersecting(..))
        ));
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(
            DomainSpec::new(sq.clone(), vec![Gamma1, Gamma2, Gamma1, Gamma2], 0.1, 1.0, 2.0),
            Err(GeometryError::MissingDirichlet)
        );
        assert!(matches!(
            DomainSpec::new(sq, tags, 0.1, 1.0, 1.0),
            Err(GeometryError::DiameterBound { .. })
        ));
    }

    #[test]
    fn trace_sample_axis_sides() {
        let mesh = build_rectangle_mesh(&DomainSpec::unit_square(), 4).unwrap();
        let top = trace_sample(&mesh, Gamma1, 3).unwrap();
        assert_eq!(top.t, vec![0.0, 0.5, 1.0]);
        assert!(top.normals.iter().all(|n| *n == [0.0, 1.0]));
        let right = trace_sample(&mesh, Gamma2, 2).unwrap();
        assert!(right.normals.iter().all(|n| *n == [1.0, 0.0]));
    }

    #[test]
    fn trace_sample_corner_takes_following_normal() {
        let spec = DomainSpec::rectangle(1.0, 1.0, [GammaD, Gamma2, Gamma2, GammaD]).unwrap();
        let mesh = build_rectangle_mesh(&spec, 4).unwrap();
        let c = trace_sample(&mesh, Gamma2, 5).unwrap();
        assert_eq!(c.t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(c.normals[1], [1.0, 0.0]);
        assert_eq!(c.normals[2], [0.0, 1.0]);
        assert_eq!(c.points[2], [1.0, 1.0]);
    }

    #[test]
    fn trace_sample_missing_tag() {
        let spec = DomainSpec::rectangle(1.0, 1.0, [GammaD, Gamma2, Gamma2, GammaD]).unwrap();
        let mesh = build_rectangle_mesh(&spec, 2).unwrap();
        assert_eq!(trace_sample(&mesh, Gamma1, 3), Err(GeometryError::TagAbsent(Gamma1)));
    }

    #[test]
    fn corner_ownership() {
        let sq = DomainSpec::unit_square();
        assert_eq!(sq.tag_at([1.0, 1.0]), Some(Gamma1));
        assert_eq!(sq.tag_at([1.0, 0.0]), Some(Gamma2));
        assert_eq!(sq.tag_at([0.0, 0.0]), Some(GammaD));
        assert_eq!(sq.tag_at([0.5, 0.5]), None);
    }

    #[test]
    fn inner_portion_identity_and_segment() {
        let sq = DomainSpec::unit_square();
        let path = sq.path(Gamma2).unwrap();
        let c = BoundaryCurve::sample(&path, 11);
        assert_eq!(inner_portion(&sq, &c, 0.0).unwrap(), c);
        let p = inner_portion(&sq, &c, 0.25).unwrap();
        assert!((p.arc_length() - 0.5).abs() < 1e-12);
        assert!((p.t[0] - 0.25).abs() < 1e-12);
        assert!(matches!(inner_portion(&sq, &c, 0.6), Err(GeometryError::EmptyPortion { .. })));
    }

    #[test]
    fn inner_portion_l_shaped() {
        let spec = DomainSpec::rectangle(1.0, 1.0, [GammaD, Gamma2, Gamma2, GammaD]).unwrap();
        let path = spec.path(Gamma2).unwrap();
        let c = BoundaryCurve::sample(&path, 41);
        let p = inner_portion(&spec, &c, 0.25).unwrap();
        // brute-force oracle: fine scan of distances to the grounded sides
        let k = 200_000;
        let mut first = None;
        let mut last = None;
        for i in 0..=k {
            let t = 2.0 * i as f64 / k as f64;
            let q = path.point_at(t);
            let dist = point_segment_distance(q, [0.0, 0.0], [1.0, 0.0])
                .min(point_segment_distance(q, [0.0, 1.0], [0.0, 0.0]));
            if dist > 0.25 {
                first.get_or_insert(t);
                last = Some(t);
            }
        }
        let (first, last) = (first.unwrap(), last.unwrap());
        assert!((p.t[0] - first).abs() < 2.0 / k as f64);
        assert!((p.t[p.len() - 1] - last).abs() < 2.0 / k as f64);
        assert!((p.t[0] - 0.25).abs() < 1e-12 && (p.t[p.len() - 1] - 1.75).abs() < 1e-12);
    }
}
