//! Reference surface generators and test fixtures.
//!
//! All generators return fully validated closed oriented surfaces:
//!
//! - [`tetrahedron`]: the minimal sphere, four unit-length faces;
//! - [`sphere`]: an icosahedron subdivided `frequency` times and projected to
//!   the unit sphere, with chordal edge lengths;
//! - [`flat_torus`]: an `n x m` unit grid with identified opposite sides,
//!   every vertex flat;
//! - [`polygon_scheme`]: the `4g`-gon with side word `a b a^-1 b^-1 ...`
//!   triangulated by a barycentric grid and glued along its sides, flat
//!   except for a single cone vertex carrying all of `2 pi chi`.
//!
//! [`perturbed`] produces the deliberately broken fixtures used to exercise
//! validation, and [`smooth_random_field`] draws smoothed per-vertex noise
//! that keeps the induced metric inside the triangle-inequality region.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::{ConformalState, MeshError, TriSurface};

/// Regular tetrahedron with unit edge lengths (genus 0, 4 vertices).
pub fn tetrahedron() -> TriSurface {
    let triangles = vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]];
    let lengths: Vec<(usize, usize, f64)> = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        .iter()
        .map(|&(a, b)| (a, b, 1.0))
        .collect();
    TriSurface::new(4, triangles, &lengths).expect("tetrahedron is well formed")
}

/// Raw icosahedron coordinates (radius `sqrt(1 + phi^2)`) and its 20
/// counterclockwise faces.
pub(crate) fn icosahedron() -> ([[f64; 3]; 12], [[usize; 3]; 20]) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let positions = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let faces = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (positions, faces)
}

/// Icosahedron subdivided `frequency` times, vertices projected to the unit
/// sphere, edge lengths chordal. `frequency = 1` is the raw icosahedron;
/// `frequency = f` has `10 f^2 + 2` vertices.
pub fn sphere(frequency: usize) -> TriSurface {
    assert!(frequency >= 1, "subdivision frequency must be positive");
    let (base_positions, faces) = icosahedron();

    // Subdivision points are interned by combinatorial key so that shared
    // edge points coincide exactly across neighboring faces.
    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
    enum Key {
        Corner(usize),
        Edge { a: usize, b: usize, step: usize },
        Interior { face: usize, i: usize, j: usize },
    }

    let f = frequency;
    let mut ids: BTreeMap<Key, usize> = BTreeMap::new();
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut intern = |key: Key, pos: [f64; 3]| -> usize {
        *ids.entry(key).or_insert_with(|| {
            let n = (pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]).sqrt();
            positions.push([pos[0] / n, pos[1] / n, pos[2] / n]);
            positions.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(20 * f * f);
    for (face_id, face) in faces.iter().enumerate() {
        let [va, vb, vc] = *face;
        let (pa, pb, pc) = (base_positions[va], base_positions[vb], base_positions[vc]);
        // Grid point (i, j): weights (f - i - j, i, j) on (A, B, C).
        let mut grid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for i in 0..=f {
            for j in 0..=(f - i) {
                let a = f - i - j;
                let key = if a == f {
                    Key::Corner(va)
                } else if i == f {
                    Key::Corner(vb)
                } else if j == f {
                    Key::Corner(vc)
                } else if a == 0 {
                    // On edge (B, C), `j` steps from B.
                    edge_key(vb, vc, j, f)
                } else if j == 0 {
                    edge_key(va, vb, i, f)
                } else if i == 0 {
                    edge_key(va, vc, j, f)
                } else {
                    Key::Interior { face: face_id, i, j }
                };
                let pos = [
                    (a as f64 * pa[0] + i as f64 * pb[0] + j as f64 * pc[0]) / f as f64,
                    (a as f64 * pa[1] + i as f64 * pb[1] + j as f64 * pc[1]) / f as f64,
                    (a as f64 * pa[2] + i as f64 * pb[2] + j as f64 * pc[2]) / f as f64,
                ];
                grid.insert((i, j), intern(key, pos));
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                triangles.push([grid[&(i, j)], grid[&(i + 1, j)], grid[&(i, j + 1)]]);
                if i + j + 2 <= f {
                    triangles.push([grid[&(i + 1, j)], grid[&(i + 1, j + 1)], grid[&(i, j + 1)]]);
                }
            }
        }

        fn edge_key(a: usize, b: usize, step: usize, f: usize) -> Key {
            if a < b {
                Key::Edge { a, b, step }
            } else {
                Key::Edge { a: b, b: a, step: f - step }
            }
        }
    }

    finish_from_positions(positions.len(), triangles, |v| positions[v], "icosphere")
}

/// Flat `n x m` grid torus with unit squares split along one diagonal.
/// Requires `n, m >= 3` to keep the edge set simple.
pub fn flat_torus(n: usize, m: usize) -> TriSurface {
    assert!(n >= 3 && m >= 3, "grid torus needs at least 3 x 3 vertices");
    let id = |i: usize, j: usize| (i % n) * m + (j % m);
    let mut triangles = Vec::with_capacity(2 * n * m);
    let mut lengths = Vec::with_capacity(3 * n * m);
    let diag = 2.0_f64.sqrt();
    for i in 0..n {
        for j in 0..m {
            let v00 = id(i, j);
            let v10 = id(i + 1, j);
            let v01 = id(i, j + 1);
            let v11 = id(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
            lengths.push((v00, v10, 1.0));
            lengths.push((v00, v01, 1.0));
            lengths.push((v00, v11, diag));
        }
    }
    TriSurface::new(n * m, triangles, &lengths).expect("grid torus is well formed")
}

/// Genus `g >= 2` surface from the `4g`-gon with side word
/// `prod_i a_i b_i a_i^-1 b_i^-1`, triangulated by a barycentric grid with
/// `rings` subdivisions per sector and glued along identified sides.
///
/// The flat polygon metric descends to the quotient: every vertex is flat
/// except the single glued corner vertex, which carries angle defect
/// `2 pi chi = 2 pi (2 - 2g)`. Vertex count is
/// `2 + 2g (rings - 1) + 2 g rings (rings - 1)`.
pub fn polygon_scheme(genus: usize, rings: usize) -> TriSurface {
    assert!(genus >= 2, "polygon scheme gluing is for genus >= 2");
    assert!(rings >= 3, "need at least 3 rings for a clean gluing");
    let p = 4 * genus;
    let r = rings;

    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy, Debug)]
    enum Key {
        Center,
        /// On the spoke from the center to corner `spoke`, `step` in `1..=r`;
        /// `step == r` is the corner itself.
        Radial { spoke: usize, step: usize },
        /// Interior of polygon side `side`, `step` in `1..=r-1` from the
        /// side's starting corner.
        Side { side: usize, step: usize },
        Interior { sector: usize, b: usize, c: usize },
    }

    let corner_pos = |k: usize| -> [f64; 2] {
        let theta = 2.0 * std::f64::consts::PI * (k % p) as f64 / p as f64;
        [theta.cos(), theta.sin()]
    };

    let mut ids: BTreeMap<Key, usize> = BTreeMap::new();
    let mut positions: Vec<[f64; 2]> = Vec::new();
    let mut intern = |key: Key, pos: [f64; 2]| -> usize {
        *ids.entry(key).or_insert_with(|| {
            positions.push(pos);
            positions.len() - 1
        })
    };

    // Intern every sector grid point and record the triangles by provisional id.
    let mut triangles_prov: Vec<[usize; 3]> = Vec::with_capacity(p * r * r);
    for k in 0..p {
        let ck = corner_pos(k);
        let cn = corner_pos(k + 1);
        let mut grid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for b in 0..=r {
            for c in 0..=(r - b) {
                let a = r - b - c;
                let key = if a == r {
                    Key::Center
                } else if c == 0 {
                    Key::Radial { spoke: k, step: b }
                } else if b == 0 {
                    Key::Radial { spoke: (k + 1) % p, step: c }
                } else if a == 0 {
                    Key::Side { side: k, step: c }
                } else {
                    Key::Interior { sector: k, b, c }
                };
                let pos = [
                    (b as f64 * ck[0] + c as f64 * cn[0]) / r as f64,
                    (b as f64 * ck[1] + c as f64 * cn[1]) / r as f64,
                ];
                grid.insert((b, c), intern(key, pos));
            }
        }
        for b in 0..r {
            for c in 0..(r - b) {
                triangles_prov.push([grid[&(b, c)], grid[&(b + 1, c)], grid[&(b, c + 1)]]);
                if b + c + 2 <= r {
                    triangles_prov.push([grid[&(b + 1, c)], grid[&(b + 1, c + 1)], grid[&(b, c + 1)]]);
                }
            }
        }
    }

    // Glue sides pairwise, reversing direction: side 4q with 4q+2 and side
    // 4q+1 with 4q+3 realize the relators a_q b_q a_q^-1 b_q^-1.
    let mut uf = UnionFind::new(positions.len());
    let key_id = |key: Key, ids: &BTreeMap<Key, usize>| -> usize { ids[&key] };
    for q in 0..genus {
        for (s, s2) in [(4 * q, 4 * q + 2), (4 * q + 1, 4 * q + 3)] {
            for step in 1..r {
                uf.union(
                    key_id(Key::Side { side: s, step }, &ids),
                    key_id(Key::Side { side: s2, step: r - step }, &ids),
                );
            }
            let corner = |k: usize| Key::Radial { spoke: k % p, step: r };
            uf.union(key_id(corner(s), &ids), key_id(corner(s2 + 1), &ids));
            uf.union(key_id(corner(s + 1), &ids), key_id(corner(s2), &ids));
        }
    }

    // Renumber representatives densely, in provisional-id order.
    let mut final_id = vec![usize::MAX; positions.len()];
    let mut count = 0;
    for v in 0..positions.len() {
        let root = uf.find(v);
        if final_id[root] == usize::MAX {
            final_id[root] = count;
            count += 1;
        }
        final_id[v] = final_id[root];
    }

    let triangles: Vec<[usize; 3]> = triangles_prov
        .iter()
        .map(|t| [final_id[t[0]], final_id[t[1]], final_id[t[2]]])
        .collect();

    // Glued edges have congruent realizations in both sectors; the first one
    // encountered supplies the length.
    let mut lengths: BTreeMap<[usize; 2], f64> = BTreeMap::new();
    for (t, tri) in triangles_prov.iter().enumerate() {
        for e in 0..3 {
            let (pa, pb) = (tri[e], tri[(e + 1) % 3]);
            let (fa, fb) = (final_id[pa], final_id[pb]);
            let key = if fa < fb { [fa, fb] } else { [fb, fa] };
            let d = dist2(positions[pa], positions[pb]);
            lengths.entry(key).or_insert(d);
            let _ = t;
        }
    }
    let lengths: Vec<(usize, usize, f64)> =
        lengths.into_iter().map(|(e, l)| (e[0], e[1], l)).collect();

    TriSurface::new(count, triangles, &lengths).expect("polygon scheme is well formed")
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn finish_from_positions<F: Fn(usize) -> [f64; 3]>(
    num_vertices: usize,
    triangles: Vec<[usize; 3]>,
    pos: F,
    what: &str,
) -> TriSurface {
    let mut seen: BTreeMap<[usize; 2], ()> = BTreeMap::new();
    let mut lengths = Vec::new();
    for tri in &triangles {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let key = if a < b { [a, b] } else { [b, a] };
            if seen.insert(key, ()).is_none() {
                let (pa, pb) = (pos(a), pos(b));
                let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                    .sqrt();
                lengths.push((key[0], key[1], d));
            }
        }
    }
    TriSurface::new(num_vertices, triangles, &lengths)
        .unwrap_or_else(|e| panic!("{what} construction failed: {e}"))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Deliberate defects for exercising validation.
#[derive(Debug, Clone, Copy)]
pub enum Mutation {
    /// Reverse the orientation of one triangle.
    ReverseTriangle(usize),
    /// Remove one triangle, opening three edges.
    DeleteTriangle(usize),
    /// Multiply one reference length, breaking the triangle inequality for
    /// large factors.
    ScaleEdge { a: usize, b: usize, factor: f64 },
}

/// Applies a [`Mutation`] and rebuilds the surface without validating it.
pub fn perturbed(surface: &TriSurface, mutation: Mutation) -> Result<TriSurface, MeshError> {
    let mut triangles = surface.triangles().to_vec();
    let mut lengths: Vec<(usize, usize, f64)> = surface
        .edges()
        .iter()
        .zip(surface.reference_lengths())
        .map(|(e, &l)| (e[0], e[1], l))
        .collect();
    match mutation {
        Mutation::ReverseTriangle(t) => {
            triangles[t].swap(1, 2);
        }
        Mutation::DeleteTriangle(t) => {
            triangles.remove(t);
        }
        Mutation::ScaleEdge { a, b, factor } => {
            let e = surface.edge_id(a, b).ok_or(MeshError::UnknownEdge {
                edge: if a < b { [a, b] } else { [b, a] },
            })?;
            lengths[e].2 *= factor;
        }
    }
    TriSurface::new(surface.num_vertices(), triangles, &lengths)
}

/// Smoothed per-vertex noise: iid uniform values relaxed by `passes` rounds
/// of neighbor averaging, then rescaled to sup-norm `sup`. Smoothing keeps
/// adjacent factors close, which keeps the induced metric valid at the
/// amplitudes used for flow initial data.
pub fn smooth_random_field<R: Rng + ?Sized>(
    surface: &TriSurface,
    rng: &mut R,
    sup: f64,
    passes: usize,
) -> Vec<f64> {
    let n = surface.num_vertices();
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    for _ in 0..passes {
        let prev = u.clone();
        for v in 0..n {
            let nbrs = surface.neighbors(v);
            if nbrs.is_empty() {
                continue;
            }
            let avg: f64 = nbrs.iter().map(|&w| prev[w]).sum::<f64>() / nbrs.len() as f64;
            u[v] = 0.5 * prev[v] + 0.5 * avg;
        }
    }
    let max = u.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if max > 0.0 {
        for x in &mut u {
            *x *= sup / max;
        }
    }
    u
}

/// Draws a random valid state with `|u|_inf <= sup`, increasing the smoothing
/// effort until the induced metric satisfies the triangle inequality.
pub fn random_valid_state<R: Rng + ?Sized>(
    surface: &Arc<TriSurface>,
    rng: &mut R,
    sup: f64,
) -> ConformalState {
    for passes in 2..64 {
        let u = smooth_random_field(surface, rng, sup, passes);
        let state = ConformalState::new(Arc::clone(surface), u);
        if state.is_valid() {
            return state;
        }
    }
    // Heavy smoothing flattens the field toward a constant, which is always
    // valid, so this point is unreachable for genuine surfaces.
    ConformalState::reference(Arc::clone(surface))
}
