//! Discrete unit-sphere domains.
//!
//! Every ODF in this crate is sampled on a fixed set of unit directions with
//! quadrature weights, so spherical integrals become weighted sums. Grids are
//! built by icosahedron subdivision; each direction's weight is the exact
//! area of its spherical Voronoi cell, computed from the circumcenters of the
//! incident triangles. Since the icosphere vertex set is closed under
//! negation, a hemisphere variant stores one direction per antipodal pair
//! and doubles weighted sums at evaluation time.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Maximum subdivision level accepted by the constructors.
pub const MAX_LEVEL: u32 = 5;

const FOUR_PI: f64 = 4.0 * PI;

/// A fixed set of unit directions with positive quadrature weights.
///
/// Full-sphere grids have weights summing to 4π. Hemisphere grids
/// (`antipodal_symmetric() == true`) carry one direction per antipodal pair,
/// weights summing to 2π, and double every weighted sum at evaluation, which
/// is exact for antipodally symmetric integrands such as ODFs.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    level: u32,
    antipodal: bool,
    directions: Vec<Vector3<f64>>,
    weights: Vec<f64>,
    /// One-ring adjacency from the triangulation (canonical indices).
    neighbors: Vec<Vec<u32>>,
    /// Full grids: index of the exactly negated direction.
    /// Hemisphere grids: identity (pairs are identified).
    antipode: Vec<u32>,
    nn_index: NnIndex,
}

impl SphereGrid {
    /// Builds a full-sphere icosphere grid. Level 0 is the icosahedron
    /// (12 directions); level L has 10·4^L + 2 directions.
    pub fn icosphere(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::invalid(format!(
                "subdivision level {level} out of range 0..={MAX_LEVEL}"
            )));
        }
        let (directions, faces) = subdivide_icosahedron(level);
        let weights = voronoi_weights(&directions, &faces);
        let neighbors = adjacency(directions.len(), &faces);
        let antipode = antipode_map(&directions)?;
        let nn_index = NnIndex::build(&directions, false);
        Ok(SphereGrid {
            level,
            antipodal: false,
            directions,
            weights,
            neighbors,
            antipode,
            nn_index,
        })
    }

    /// Builds the hemisphere variant: one direction per antipodal pair,
    /// weights summing to 2π, weighted sums doubled at evaluation.
    pub fn icosphere_hemisphere(level: u32) -> Result<Self> {
        let full = SphereGrid::icosphere(level)?;
        let mut keep = Vec::new();
        let mut canonical = vec![u32::MAX; full.len()];
        for (k, d) in full.directions.iter().enumerate() {
            if in_canonical_half(d) {
                canonical[k] = keep.len() as u32;
                keep.push(k);
            }
        }
        for (k, &pair) in full.antipode.iter().enumerate() {
            if canonical[k] == u32::MAX {
                canonical[k] = canonical[pair as usize];
            }
        }
        let directions: Vec<_> = keep.iter().map(|&k| full.directions[k]).collect();
        let weights: Vec<_> = keep.iter().map(|&k| full.weights[k]).collect();
        let mut neighbors: Vec<Vec<u32>> = keep
            .iter()
            .map(|&k| {
                let mut ns: Vec<u32> = full.neighbors[k]
                    .iter()
                    .map(|&n| canonical[n as usize])
                    .collect();
                ns.sort_unstable();
                ns.dedup();
                ns
            })
            .collect();
        for (i, ns) in neighbors.iter_mut().enumerate() {
            ns.retain(|&n| n != i as u32);
        }
        let antipode = (0..directions.len() as u32).collect();
        let nn_index = NnIndex::build(&directions, true);
        Ok(SphereGrid {
            level,
            antipodal: true,
            directions,
            weights,
            neighbors,
            antipode,
            nn_index,
        })
    }

    /// Reassembles a grid from stored directions and weights (binary IO).
    /// The triangulation is not persisted, so adjacency is rebuilt from
    /// nearest neighbors only when both counts and invariants check out.
    pub fn from_parts(
        directions: Vec<Vector3<f64>>,
        weights: Vec<f64>,
        antipodal: bool,
    ) -> Result<Self> {
        let k = directions.len();
        if k < 6 {
            return Err(Error::Validation(format!(
                "sphere grid needs at least 6 directions, got {k}"
            )));
        }
        if weights.len() != k {
            return Err(Error::Validation(format!(
                "{} weights for {k} directions",
                weights.len()
            )));
        }
        for (i, d) in directions.iter().enumerate() {
            if (d.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "direction {i} has norm {} (must be 1 within 1e-12)",
                    d.norm()
                )));
            }
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Validation("non-positive quadrature weight".into()));
        }
        let total: f64 = crate::parallel::pairwise_sum(&weights);
        let expected = if antipodal { 2.0 * PI } else { FOUR_PI };
        if (total - expected).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "quadrature weights sum to {total}, expected {expected}"
            )));
        }
        let antipode = if antipodal {
            (0..k as u32).collect()
        } else {
            antipode_map(&directions).unwrap_or_else(|_| (0..k as u32).collect())
        };
        let nn_index = NnIndex::build(&directions, antipodal);
        // Level is unknown for reconstructed grids; infer from the count when
        // it matches an icosphere, otherwise mark as custom with u32::MAX.
        let level = (0..=MAX_LEVEL)
            .find(|&l| {
                let full = 10usize * 4usize.pow(l) + 2;
                k == full || (antipodal && k == full / 2)
            })
            .unwrap_or(u32::MAX);
        let neighbors = knn_adjacency(&directions, antipodal);
        Ok(SphereGrid {
            level,
            antipodal,
            directions,
            weights,
            neighbors,
            antipode,
            nn_index,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn antipodal_symmetric(&self) -> bool {
        self.antipodal
    }

    /// Factor applied to weighted sums: 2 for hemisphere grids, 1 otherwise.
    pub fn eval_factor(&self) -> f64 {
        if self.antipodal {
            2.0
        } else {
            1.0
        }
    }

    /// One-ring neighbors of direction `k` in the triangulation.
    pub fn neighbors(&self, k: usize) -> &[u32] {
        &self.neighbors[k]
    }

    /// Index of the exactly negated direction (full grids only; identity on
    /// hemisphere grids, where pairs are identified).
    pub fn antipode(&self, k: usize) -> usize {
        self.antipode[k] as usize
    }

    /// Structural equality: two grids are interchangeable as ODF domains.
    pub fn same_grid(&self, other: &SphereGrid) -> bool {
        if std::ptr::eq(self, other) {
            return true;
        }
        self.antipodal == other.antipodal
            && self.directions.len() == other.directions.len()
            && self == other
    }

    /// ∫ f ds as the weighted sum Σ_k w_k f_k (doubled on hemisphere grids).
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} directions",
                values.len(),
                self.len()
            )));
        }
        Ok(self.eval_factor() * self.weighted_sum(values))
    }

    /// Σ_k w_k v_k without the hemisphere factor; callers that already folded
    /// the factor into their weights use this directly.
    pub(crate) fn weighted_sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let products: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        crate::parallel::pairwise_sum(&products)
    }

    /// Angular distance from `query` to direction `k` under the grid metric
    /// (antipodal pairs identified on hemisphere grids).
    #[inline]
    pub(crate) fn angular_distance(&self, query: &Vector3<f64>, k: usize) -> f64 {
        let mut c = query.dot(&self.directions[k]);
        if self.antipodal {
            c = c.abs();
        }
        c.clamp(-1.0, 1.0).acos()
    }

    /// The three nearest directions to `query` with their angular distances,
    /// sorted by (distance, index). `query` must be unit length.
    pub fn nearest_three(&self, query: &Vector3<f64>) -> ([usize; 3], [f64; 3]) {
        self.nn_index.nearest_three(self, query)
    }

    /// Estimates the sampled function at an arbitrary unit direction by
    /// inverse-angular-distance weighting over the three nearest directions.
    /// Exact when `query` coincides with a grid direction.
    pub fn interpolate(&self, values: &[f64], query: &Vector3<f64>) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} directions",
                values.len(),
                self.len()
            )));
        }
        if (query.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "interpolation query has norm {}",
                query.norm()
            )));
        }
        let (idx, dist) = self.nearest_three(query);
        Ok(interpolate_from_neighbors(values, &idx, &dist))
    }
}

impl PartialEq for SphereGrid {
    fn eq(&self, other: &Self) -> bool {
        self.antipodal == other.antipodal
            && self.directions == other.directions
            && self.weights == other.weights
    }
}

/// Queries closer than this to a grid direction snap to the nodal value.
/// `acos` of a unit dot product carries ~1e-8 of rounding noise, so the
/// threshold sits well above that and far below any node spacing.
pub(crate) const NODAL_SNAP: f64 = 1e-6;

/// Inverse-distance blend over a nearest-neighbor set; nodally exact.
#[inline]
pub(crate) fn interpolate_from_neighbors(
    values: &[f64],
    idx: &[usize; 3],
    dist: &[f64; 3],
) -> f64 {
    if dist[0] < NODAL_SNAP {
        return values[idx[0]];
    }
    let inv = [1.0 / dist[0], 1.0 / dist[1], 1.0 / dist[2]];
    let total = inv[0] + inv[1] + inv[2];
    (inv[0] * values[idx[0]] + inv[1] * values[idx[1]] + inv[2] * values[idx[2]]) / total
}

fn in_canonical_half(d: &Vector3<f64>) -> bool {
    d.z > 0.0 || (d.z == 0.0 && (d.y > 0.0 || (d.y == 0.0 && d.x > 0.0)))
}

/// Vertices and faces of the icosahedron subdivided `level` times, with all
/// vertices on the unit sphere. The vertex set is exactly closed under
/// negation at every level because the seed solid is centrally symmetric and
/// edge midpoints of negated edges are negated midpoints, bit for bit.
fn subdivide_icosahedron(level: u32) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (t, 1.0, 0.0),
        (-t, 1.0, 0.0),
        (t, -1.0, 0.0),
        (-t, -1.0, 0.0),
        (1.0, 0.0, t),
        (1.0, 0.0, -t),
        (-1.0, 0.0, t),
        (-1.0, 0.0, -t),
        (0.0, t, 1.0),
        (0.0, -t, 1.0),
        (0.0, t, -1.0),
        (0.0, -t, -1.0),
    ]
    .into_iter()
    .map(|(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();

    let mut faces: Vec<[usize; 3]> = vec![
        [0, 8, 4],
        [1, 10, 7],
        [2, 9, 11],
        [7, 3, 1],
        [0, 5, 10],
        [3, 9, 6],
        [3, 11, 9],
        [8, 6, 4],
        [2, 4, 9],
        [3, 7, 11],
        [4, 2, 0],
        [9, 4, 6],
        [2, 11, 5],
        [0, 10, 8],
        [5, 0, 2],
        [10, 5, 7],
        [1, 6, 8],
        [1, 8, 10],
        [6, 1, 3],
        [11, 7, 5],
    ];

    for _ in 0..level {
        let mut midpoint = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let mut mid = |u: usize, v: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
                let key = if u < v { (u, v) } else { (v, u) };
                *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[u] + vertices[v]).normalize();
                    vertices.push(m);
                    vertices.len() - 1
                })
            };
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Unsigned area of the spherical triangle spanned by unit vectors, via the
/// Van Oosterom–Strackee formula.
fn spherical_triangle_area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let num = a.dot(&b.cross(c)).abs();
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Exact spherical Voronoi cell areas for a Delaunay-triangulated point set:
/// each vertex's cell is the spherical polygon of incident-face circumcenters
/// ordered around the vertex, and its area is a fan of spherical triangles.
fn voronoi_weights(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> Vec<f64> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    let mut circumcenters = Vec::with_capacity(faces.len());
    for (f, &[a, b, c]) in faces.iter().enumerate() {
        let (va, vb, vc) = (&vertices[a], &vertices[b], &vertices[c]);
        let mut cc = (vb - va).cross(&(vc - va));
        if cc.dot(&(va + vb + vc)) < 0.0 {
            cc = -cc;
        }
        circumcenters.push(cc.normalize());
        incident[a].push(f);
        incident[b].push(f);
        incident[c].push(f);
    }

    let mut weights = Vec::with_capacity(vertices.len());
    for (k, v) in vertices.iter().enumerate() {
        let ring = &incident[k];
        // Order the circumcenters by angle in the tangent plane at v.
        let first = &circumcenters[ring[0]];
        let e1 = (first - v * v.dot(first)).normalize();
        let e2 = v.cross(&e1);
        let mut ordered: Vec<(f64, usize)> = ring
            .iter()
            .map(|&f| {
                let c = &circumcenters[f];
                (c.dot(&e2).atan2(c.dot(&e1)), f)
            })
            .collect();
        ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut area = 0.0;
        for i in 0..ordered.len() {
            let c0 = &circumcenters[ordered[i].1];
            let c1 = &circumcenters[ordered[(i + 1) % ordered.len()].1];
            area += spherical_triangle_area(v, c0, c1);
        }
        weights.push(area);
    }
    weights
}

fn adjacency(n: usize, faces: &[[usize; 3]]) -> Vec<Vec<u32>> {
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &[a, b, c] in faces {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            neighbors[u].push(v as u32);
            neighbors[v].push(u as u32);
        }
    }
    for ns in &mut neighbors {
        ns.sort_unstable();
        ns.dedup();
    }
    neighbors
}

/// Fallback adjacency for reconstructed grids: the six nearest directions.
fn knn_adjacency(directions: &[Vector3<f64>], antipodal: bool) -> Vec<Vec<u32>> {
    let metric = |q: &Vector3<f64>, d: &Vector3<f64>| {
        let mut c = q.dot(d);
        if antipodal {
            c = c.abs();
        }
        c.clamp(-1.0, 1.0).acos()
    };
    directions
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let mut order: Vec<(f64, u32)> = directions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(j, d)| (metric(q, d), j as u32))
                .collect();
            order.sort_by(|a, b| a.partial_cmp(b).unwrap());
            order.truncate(6);
            let mut ns: Vec<u32> = order.into_iter().map(|(_, j)| j).collect();
            ns.sort_unstable();
            ns
        })
        .collect()
}

fn antipode_map(directions: &[Vector3<f64>]) -> Result<Vec<u32>> {
    // +0.0 and -0.0 are the same direction component; canonicalize before
    // hashing so negation round-trips bitwise.
    let bits = |x: f64| if x == 0.0 { 0.0_f64.to_bits() } else { x.to_bits() };
    let key = |d: &Vector3<f64>| (bits(d.x), bits(d.y), bits(d.z));
    let lookup: HashMap<_, u32> = directions
        .iter()
        .enumerate()
        .map(|(i, d)| (key(d), i as u32))
        .collect();
    directions
        .iter()
        .map(|d| {
            lookup.get(&key(&-d)).copied().ok_or_else(|| {
                Error::Validation("direction set is not closed under negation".into())
            })
        })
        .collect()
}

/// Cube-map bucket index for exact nearest-direction queries.
///
/// Each cell of a 6·res² cube map stores every direction that could be among
/// the three nearest of some query falling in the cell: if d₃ is the
/// third-nearest distance from the cell center and ρ the cell's angular
/// circumradius, any direction within d₃ + 2ρ of the center is a candidate
/// superset (triangle inequality), so scanning the cell list is exact.
#[derive(Debug, Clone)]
struct NnIndex {
    res: usize,
    cells: Vec<Vec<u32>>,
}

impl NnIndex {
    fn build(directions: &[Vector3<f64>], antipodal: bool) -> Self {
        let res = 16usize;
        let metric = |q: &Vector3<f64>, d: &Vector3<f64>| {
            let mut c = q.dot(d);
            if antipodal {
                c = c.abs();
            }
            c.clamp(-1.0, 1.0).acos()
        };
        let mut cells = vec![Vec::new(); 6 * res * res];
        for face in 0..6 {
            for iu in 0..res {
                for iv in 0..res {
                    let cell = (face * res + iu) * res + iv;
                    let corner = |du: usize, dv: usize| {
                        cube_to_sphere(
                            face,
                            (iu + du) as f64 / res as f64,
                            (iv + dv) as f64 / res as f64,
                        )
                    };
                    let center =
                        cube_to_sphere(face, (iu as f64 + 0.5) / res as f64, (iv as f64 + 0.5) / res as f64);
                    let rho = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|&(du, dv)| {
                            let c = corner(du, dv);
                            center.dot(&c).clamp(-1.0, 1.0).acos()
                        })
                        .fold(0.0_f64, f64::max);
                    let mut dists: Vec<f64> =
                        directions.iter().map(|d| metric(&center, d)).collect();
                    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let d3 = dists[2.min(dists.len() - 1)];
                    let radius = d3 + 2.0 * rho + 1e-9;
                    for (j, d) in directions.iter().enumerate() {
                        if metric(&center, d) <= radius {
                            cells[cell].push(j as u32);
                        }
                    }
                }
            }
        }
        NnIndex { res, cells }
    }

    fn cell_of(&self, q: &Vector3<f64>) -> usize {
        let (face, u, v) = sphere_to_cube(q);
        let clamp = |x: f64| ((x * self.res as f64) as usize).min(self.res - 1);
        (face * self.res + clamp(u)) * self.res + clamp(v)
    }

    fn nearest_three(&self, grid: &SphereGrid, query: &Vector3<f64>) -> ([usize; 3], [f64; 3]) {
        let candidates = &self.cells[self.cell_of(query)];
        let mut best = [(f64::INFINITY, usize::MAX); 3];
        for &j in candidates {
            let j = j as usize;
            let d = grid.angular_distance(query, j);
            let entry = (d, j);
            if entry < best[2] {
                best[2] = entry;
                if best[2] < best[1] {
                    best.swap(1, 2);
                }
                if best[1] < best[0] {
                    best.swap(0, 1);
                }
            }
        }
        (
            [best[0].1, best[1].1, best[2].1],
            [best[0].0, best[1].0, best[2].0],
        )
    }
}

fn cube_to_sphere(face: usize, u: f64, v: f64) -> Vector3<f64> {
    let a = 2.0 * u - 1.0;
    let b = 2.0 * v - 1.0;
    let p = match face {
        0 => Vector3::new(1.0, a, b),
        1 => Vector3::new(-1.0, a, b),
        2 => Vector3::new(a, 1.0, b),
        3 => Vector3::new(a, -1.0, b),
        4 => Vector3::new(a, b, 1.0),
        _ => Vector3::new(a, b, -1.0),
    };
    p.normalize()
}

fn sphere_to_cube(q: &Vector3<f64>) -> (usize, f64, f64) {
    let (ax, ay, az) = (q.x.abs(), q.y.abs(), q.z.abs());
    if ax >= ay && ax >= az {
        let face = if q.x >= 0.0 { 0 } else { 1 };
        (face, 0.5 * (q.y / ax + 1.0), 0.5 * (q.z / ax + 1.0))
    } else if ay >= ax && ay >= az {
        let face = if q.y >= 0.0 { 2 } else { 3 };
        (face, 0.5 * (q.x / ay + 1.0), 0.5 * (q.z / ay + 1.0))
    } else {
        let face = if q.z >= 0.0 { 4 } else { 5 };
        (face, 0.5 * (q.x / az + 1.0), 0.5 * (q.y / az + 1.0))
    }
}
