//! Closed triangulated surfaces carrying an edge-length metric and per-vertex
//! conformal factors.
//!
//! A [`TriSurface`] stores combinatorics plus reference edge lengths and is
//! immutable once built, so it can be shared across threads. A
//! [`ConformalState`] owns a vector of vertex log factors `u` over a shared
//! surface; the induced metric is `l_ij = exp(u_i + u_j) * l0_ij`. All
//! geometric quantities (corner angles, angle-defect curvature, barycentric
//! areas, cotangent weights) are derived from the induced metric.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub mod gen;
pub mod io;

/// Errors from surface construction and the mesh file format.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {tri} references vertex {vertex}, but only {num_vertices} vertices are declared")]
    VertexOutOfRange {
        tri: usize,
        vertex: usize,
        num_vertices: usize,
    },
    #[error("triangle {tri} repeats a vertex")]
    RepeatedVertex { tri: usize },
    #[error("duplicate length for edge ({}, {})", edge[0], edge[1])]
    DuplicateEdge { edge: [usize; 2] },
    #[error("missing length for edge ({}, {})", edge[0], edge[1])]
    MissingEdge { edge: [usize; 2] },
    #[error("length given for ({}, {}), which is not an edge of any triangle", edge[0], edge[1])]
    UnknownEdge { edge: [usize; 2] },
    #[error("edge ({}, {}) has non-positive or non-finite length {value}", edge[0], edge[1])]
    BadLength { edge: [usize; 2], value: f64 },
    #[error("surface failed validation: {report}")]
    Invalid { report: ValidationReport },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A structural defect found by [`TriSurface::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Edge not shared by exactly two triangles.
    EdgeFaceCount { edge: [usize; 2], count: usize },
    /// Two incident triangles traverse the edge in the same direction.
    OrientationClash { edge: [usize; 2] },
    /// Reference lengths violate the strict triangle inequality.
    TriangleInequality { tri: usize, lengths: [f64; 3] },
    /// Vertex with no incident triangle.
    IsolatedVertex { vertex: usize },
    /// Incident triangles do not close into a single cycle around the vertex.
    VertexLinkBroken { vertex: usize },
    /// More than one connected component.
    Disconnected { components: usize },
    /// Euler characteristic is odd or exceeds 2, so no closed oriented genus fits.
    BadEulerCharacteristic { chi: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EdgeFaceCount { edge, count } => {
                write!(f, "edge ({}, {}) lies in {} triangles", edge[0], edge[1], count)
            }
            Violation::OrientationClash { edge } => {
                write!(f, "edge ({}, {}) traversed twice in the same direction", edge[0], edge[1])
            }
            Violation::TriangleInequality { tri, lengths } => write!(
                f,
                "triangle {} has lengths ({}, {}, {}) violating the triangle inequality",
                tri, lengths[0], lengths[1], lengths[2]
            ),
            Violation::IsolatedVertex { vertex } => write!(f, "vertex {vertex} is isolated"),
            Violation::VertexLinkBroken { vertex } => {
                write!(f, "vertex {vertex} has a link that is not a single cycle")
            }
            Violation::Disconnected { components } => {
                write!(f, "surface has {components} connected components")
            }
            Violation::BadEulerCharacteristic { chi } => {
                write!(f, "Euler characteristic {chi} admits no closed oriented genus")
            }
        }
    }
}

/// Outcome of structural validation of a [`TriSurface`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Every edge is shared by exactly two triangles.
    pub closed: bool,
    /// The two triangles on each edge traverse it in opposite directions.
    pub oriented: bool,
    /// Strict triangle inequality holds for the reference lengths.
    pub triangle_inequality: bool,
    /// One connected component.
    pub connected: bool,
    /// `V - E + F`.
    pub euler_characteristic: i64,
    /// `(2 - chi) / 2` when the surface is closed, oriented and connected.
    pub genus: Option<u64>,
    /// Every defect found, with the offending simplex.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// True when the surface is a closed oriented connected triangulated
    /// surface with a genuine metric.
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passes() {
            return write!(
                f,
                "closed oriented surface, chi = {}, genus = {}",
                self.euler_characteristic,
                self.genus.unwrap_or(0)
            );
        }
        write!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            write!(f, " [{v}]")?;
        }
        Ok(())
    }
}

/// Immutable combinatorics and reference metric of a triangulated surface.
///
/// Construction checks only what is needed to index consistently (vertex
/// ranges, one length per combinatorial edge); manifoldness and metric
/// validity are reported by [`TriSurface::validate`] so that defective
/// fixtures can still be represented.
#[derive(Debug)]
pub struct TriSurface {
    num_vertices: usize,
    triangles: Vec<[usize; 3]>,
    /// Canonical `i < j` pairs, sorted lexicographically.
    edges: Vec<[usize; 2]>,
    /// Reference length per edge, aligned with `edges`.
    lengths: Vec<f64>,
    edge_index: BTreeMap<[usize; 2], usize>,
    /// Triangles incident to each edge.
    edge_triangles: Vec<Vec<usize>>,
    /// Triangles incident to each vertex.
    vertex_triangles: Vec<Vec<usize>>,
    /// Neighboring vertices, deduplicated and sorted.
    vertex_neighbors: Vec<Vec<usize>>,
}

impl TriSurface {
    /// Builds a surface from oriented triangles and one reference length per
    /// combinatorial edge.
    ///
    /// `lengths` must mention every edge of `triangles` exactly once (in any
    /// vertex order); duplicates, misses, unknown pairs and non-positive
    /// values are rejected.
    pub fn new(
        num_vertices: usize,
        triangles: Vec<[usize; 3]>,
        lengths: &[(usize, usize, f64)],
    ) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= num_vertices {
                    return Err(MeshError::VertexOutOfRange {
                        tri: t,
                        vertex: v,
                        num_vertices,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { tri: t });
            }
        }

        let mut edge_set: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = canonical_edge(tri[k], tri[(k + 1) % 3]);
                edge_set.entry(e).or_default().push(t);
            }
        }

        let edges: Vec<[usize; 2]> = edge_set.keys().copied().collect();
        let edge_index: BTreeMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let edge_triangles: Vec<Vec<usize>> = edges.iter().map(|e| edge_set[e].clone()).collect();

        let mut lens = vec![f64::NAN; edges.len()];
        for &(a, b, l) in lengths {
            let e = canonical_edge(a, b);
            let idx = *edge_index.get(&e).ok_or(MeshError::UnknownEdge { edge: e })?;
            if !lens[idx].is_nan() {
                return Err(MeshError::DuplicateEdge { edge: e });
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(MeshError::BadLength { edge: e, value: l });
            }
            lens[idx] = l;
        }
        if let Some(idx) = lens.iter().position(|l| l.is_nan()) {
            return Err(MeshError::MissingEdge { edge: edges[idx] });
        }

        let mut vertex_triangles = vec![Vec::new(); num_vertices];
        let mut vertex_neighbors = vec![Vec::new(); num_vertices];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                vertex_triangles[tri[k]].push(t);
            }
        }
        for e in &edges {
            vertex_neighbors[e[0]].push(e[1]);
            vertex_neighbors[e[1]].push(e[0]);
        }
        for n in &mut vertex_neighbors {
            n.sort_unstable();
            n.dedup();
        }

        Ok(TriSurface {
            num_vertices,
            triangles,
            edges,
            lengths: lens,
            edge_index,
            edge_triangles,
            vertex_triangles,
            vertex_neighbors,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Canonical `i < j` edge pairs in lexicographic order.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Reference lengths aligned with [`TriSurface::edges`].
    pub fn reference_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&canonical_edge(a, b)).copied()
    }

    pub fn triangles_of_edge(&self, edge: usize) -> &[usize] {
        &self.edge_triangles[edge]
    }

    pub fn triangles_of_vertex(&self, vertex: usize) -> &[usize] {
        &self.vertex_triangles[vertex]
    }

    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        &self.vertex_neighbors[vertex]
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Checks closedness, orientability, the strict triangle inequality for
    /// the reference metric, vertex links, connectivity and the Euler
    /// characteristic, and reports every violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();

        let mut closed = true;
        for (e, tris) in self.edge_triangles.iter().enumerate() {
            if tris.len() != 2 {
                closed = false;
                violations.push(Violation::EdgeFaceCount {
                    edge: self.edges[e],
                    count: tris.len(),
                });
            }
        }

        // Orientability: each directed edge appears at most once over all
        // triangle boundaries. With closedness this forces the two triangles
        // on every edge to traverse it in opposite directions.
        let mut oriented = true;
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        for ((a, b), count) in &directed {
            if *count > 1 {
                oriented = false;
                violations.push(Violation::OrientationClash {
                    edge: canonical_edge(*a, *b),
                });
            }
        }

        let mut triangle_inequality = true;
        for (t, _) in self.triangles.iter().enumerate() {
            let l = self.triangle_reference_lengths(t);
            if !strict_triangle_inequality(l[0], l[1], l[2]) {
                triangle_inequality = false;
                violations.push(Violation::TriangleInequality { tri: t, lengths: l });
            }
        }

        for v in 0..self.num_vertices {
            if self.vertex_triangles[v].is_empty() {
                violations.push(Violation::IsolatedVertex { vertex: v });
            } else if closed && oriented && !self.vertex_link_is_cycle(v) {
                violations.push(Violation::VertexLinkBroken { vertex: v });
            }
        }

        let components = self.connected_components();
        let connected = components == 1;
        if !connected {
            violations.push(Violation::Disconnected { components });
        }

        let chi = self.euler_characteristic();
        let genus = if closed && oriented && connected && chi <= 2 && chi % 2 == 0 {
            Some(((2 - chi) / 2) as u64)
        } else {
            if closed && oriented && connected {
                violations.push(Violation::BadEulerCharacteristic { chi });
            }
            None
        };

        ValidationReport {
            closed,
            oriented,
            triangle_inequality,
            connected,
            euler_characteristic: chi,
            genus,
            violations,
        }
    }

    /// Reference lengths of triangle `t`, ordered opposite to each corner:
    /// entry `k` is the length of the edge not containing vertex `k` of the
    /// triangle.
    pub fn triangle_reference_lengths(&self, t: usize) -> [f64; 3] {
        let tri = self.triangles[t];
        let mut out = [0.0; 3];
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            out[k] = self.lengths[self.edge_index[&canonical_edge(a, b)]];
        }
        out
    }

    fn connected_components(&self) -> usize {
        if self.num_vertices == 0 {
            return 0;
        }
        let mut seen = vec![false; self.num_vertices];
        let mut components = 0;
        for start in 0..self.num_vertices {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &self.vertex_neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }

    /// True when the incident triangles of `v` glue into one closed fan.
    /// Assumes every incident edge already has exactly two triangles.
    fn vertex_link_is_cycle(&self, v: usize) -> bool {
        let tris = &self.vertex_triangles[v];
        if tris.is_empty() {
            return false;
        }
        // Walk the fan: from a triangle, cross the incident edge (v, next)
        // to the neighboring triangle, until we return to the start.
        let start = tris[0];
        let mut prev = start;
        let mut cur = {
            let (_, b) = opposite_corners(self.triangles[start], v);
            match self.other_triangle(v, b, start) {
                Some(t) => t,
                None => return false,
            }
        };
        let mut count = 1;
        while cur != start {
            count += 1;
            if count > tris.len() {
                return false;
            }
            let (a, b) = opposite_corners(self.triangles[cur], v);
            let shared_prev = self
                .edge_shared_with(v, a, prev)
                .then_some(a)
                .or_else(|| self.edge_shared_with(v, b, prev).then_some(b));
            let next_across = match shared_prev {
                Some(w) => if w == a { b } else { a },
                None => return false,
            };
            let next = match self.other_triangle(v, next_across, cur) {
                Some(t) => t,
                None => return false,
            };
            prev = cur;
            cur = next;
        }
        count == tris.len()
    }

    fn edge_shared_with(&self, v: usize, w: usize, tri: usize) -> bool {
        self.edge_id(v, w)
            .map(|e| self.edge_triangles[e].contains(&tri))
            .unwrap_or(false)
    }

    fn other_triangle(&self, v: usize, w: usize, tri: usize) -> Option<usize> {
        let e = self.edge_id(v, w)?;
        let tris = &self.edge_triangles[e];
        if tris.len() != 2 {
            return None;
        }
        Some(if tris[0] == tri { tris[1] } else { tris[0] })
    }
}

fn canonical_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// The two corners of `tri` other than `v`.
fn opposite_corners(tri: [usize; 3], v: usize) -> (usize, usize) {
    if tri[0] == v {
        (tri[1], tri[2])
    } else if tri[1] == v {
        (tri[2], tri[0])
    } else {
        (tri[0], tri[1])
    }
}

fn strict_triangle_inequality(a: f64, b: f64, c: f64) -> bool {
    a.is_finite()
        && b.is_finite()
        && c.is_finite()
        && a + b > c
        && b + c > a
        && c + a > b
}

/// Corner angles of a triangle from its side lengths; entry `k` is the angle
/// opposite side `k` (law of cosines, argument clamped against roundoff).
pub fn triangle_angles(l: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = l[(k + 1) % 3];
        let b = l[(k + 2) % 3];
        let c = l[k];
        let cos = ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0);
        out[k] = cos.acos();
    }
    out
}

/// Triangle area from side lengths, using the numerically stable form of
/// Heron's formula.
pub fn triangle_area(l: [f64; 3]) -> f64 {
    let mut s = l;
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let (a, b, c) = (s[0], s[1], s[2]);
    let t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * t.max(0.0).sqrt()
}

/// Per-vertex conformal factors over a shared surface.
///
/// A state is a plain value: cloning it copies the factor vector while the
/// underlying surface stays shared. `time` records the flow time that
/// produced the state (zero for initial data).
#[derive(Debug, Clone)]
pub struct ConformalState {
    surface: Arc<TriSurface>,
    u: Vec<f64>,
    time: f64,
}

impl ConformalState {
    /// Wraps factors `u` (one per vertex) over `surface` at time zero.
    ///
    /// # Panics
    /// If `u.len()` differs from the vertex count.
    pub fn new(surface: Arc<TriSurface>, u: Vec<f64>) -> Self {
        assert_eq!(
            u.len(),
            surface.num_vertices(),
            "one conformal factor per vertex"
        );
        ConformalState { surface, u, time: 0.0 }
    }

    /// The flat state `u = 0` (induced metric equals the reference metric).
    pub fn reference(surface: Arc<TriSurface>) -> Self {
        let n = surface.num_vertices();
        ConformalState::new(surface, vec![0.0; n])
    }

    pub fn surface(&self) -> &Arc<TriSurface> {
        &self.surface
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Returns a copy with factors replaced and the given time stamp.
    pub fn with_u(&self, u: Vec<f64>, time: f64) -> Self {
        assert_eq!(u.len(), self.surface.num_vertices());
        ConformalState {
            surface: Arc::clone(&self.surface),
            u,
            time,
        }
    }

    /// Induced length of edge `e`: `exp(u_i + u_j) * l0`.
    pub fn edge_length(&self, e: usize) -> f64 {
        let [i, j] = self.surface.edges()[e];
        (self.u[i] + self.u[j]).exp() * self.surface.reference_lengths()[e]
    }

    /// All induced edge lengths, aligned with [`TriSurface::edges`].
    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.surface.num_edges()).map(|e| self.edge_length(e)).collect()
    }

    /// Induced lengths of triangle `t`, entry `k` opposite corner `k`.
    pub fn triangle_lengths(&self, t: usize) -> [f64; 3] {
        let tri = self.surface.triangles()[t];
        let mut out = [0.0; 3];
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            let e = self.surface.edge_id(a, b).expect("triangle edge exists");
            out[k] = self.edge_length(e);
        }
        out
    }

    /// True when every induced triangle satisfies the strict triangle
    /// inequality with finite lengths.
    pub fn is_valid(&self) -> bool {
        (0..self.surface.num_triangles()).all(|t| {
            let l = self.triangle_lengths(t);
            strict_triangle_inequality(l[0], l[1], l[2])
        })
    }

    /// Corner angles per triangle; entry `k` of triangle `t` is the angle at
    /// vertex `triangles()[t][k]` in the induced metric.
    pub fn corner_angles(&self) -> Vec<[f64; 3]> {
        (0..self.surface.num_triangles())
            .map(|t| triangle_angles(self.triangle_lengths(t)))
            .collect()
    }

    /// Angle-defect curvature `K_i = 2*pi - sum of incident corner angles`.
    pub fn vertex_curvature(&self) -> Vec<f64> {
        let angles = self.corner_angles();
        let mut defect = vec![0.0; self.surface.num_vertices()];
        for (t, tri) in self.surface.triangles().iter().enumerate() {
            for k in 0..3 {
                defect[tri[k]] += angles[t][k];
            }
        }
        for d in &mut defect {
            *d = 2.0 * std::f64::consts::PI - *d;
        }
        defect
    }

    /// Barycentric vertex areas: one third of each incident triangle area.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.surface.num_vertices()];
        for (t, tri) in self.surface.triangles().iter().enumerate() {
            let a = triangle_area(self.triangle_lengths(t)) / 3.0;
            for &v in tri {
                areas[v] += a;
            }
        }
        areas
    }

    /// Total induced area.
    pub fn total_area(&self) -> f64 {
        (0..self.surface.num_triangles())
            .map(|t| triangle_area(self.triangle_lengths(t)))
            .sum()
    }

    /// Cotangent edge weights `w_ij = (cot a_ij + cot b_ij) / 2` over the
    /// angles opposite the edge in its two incident triangles, aligned with
    /// [`TriSurface::edges`].
    pub fn cotan_weights(&self) -> Vec<f64> {
        let mut weights = vec![0.0; self.surface.num_edges()];
        for (t, tri) in self.surface.triangles().iter().enumerate() {
            let angles = triangle_angles(self.triangle_lengths(t));
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let e = self.surface.edge_id(a, b).expect("triangle edge exists");
                weights[e] += 0.5 / angles[k].tan();
            }
        }
        weights
    }

    /// Applies the cotangent Laplacian: `(Lf)_i = sum_j w_ij (f_j - f_i)`.
    ///
    /// The operator is symmetric with the constants in its kernel; its
    /// quadratic form is the negative of the Dirichlet energy of the
    /// piecewise-linear interpolation of `f`.
    pub fn laplacian_apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.surface.num_vertices());
        let weights = self.cotan_weights();
        apply_weighted_laplacian(self.surface.edges(), &weights, f)
    }
}

/// `(Lf)_i = sum_j w_ij (f_j - f_i)` for precomputed edge weights.
pub fn apply_weighted_laplacian(edges: &[[usize; 2]], weights: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for (e, &[i, j]) in edges.iter().enumerate() {
        let w = weights[e];
        let d = f[j] - f[i];
        out[i] += w * d;
        out[j] -= w * d;
    }
    out
}
