//! Convex hulls in arbitrary dimension: incremental insertion of the farthest
//! outside point (quickhull) with simplicial facets.

/// Facet hyperplane `normal . x = offset`; hull points satisfy `normal . x <= offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexHull {
    pub dim: usize,
    pub facets: Vec<Facet>,
    /// Indices of input points that are hull vertices, ascending.
    pub vertices: Vec<usize>,
    /// A point strictly inside the hull.
    pub interior: Vec<f64>,
    pub volume: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Remove from `v` its components along the orthonormal `basis` (twice, for stability).
fn reject(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for u in basis {
            let c = dot(v, u);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting; `m` is row-major `n x n`.
pub fn determinant(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
            .unwrap();
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
            }
        }
    }
    det
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

const NONE: usize = usize::MAX;
const MAX_DIM: usize = 7;

/// Faces in flat arrays: face `f` owns `vertices[f*d..f*d+d]` (sorted),
/// `normals[f*d..]` and `neighbors[f*d..]`, where `neighbors[f*d+i]` shares
/// the ridge opposite `vertices[f*d+i]`.
struct Builder<'a> {
    dim: usize,
    points: &'a [Vec<f64>],
    interior: Vec<f64>,
    eps: f64,
    vertices: Vec<usize>,
    normals: Vec<f64>,
    offsets: Vec<f64>,
    neighbors: Vec<usize>,
    /// Unassigned points strictly above each face.
    outside: Vec<Vec<usize>>,
    alive: Vec<bool>,
    mark: Vec<u32>,
    epoch: u32,
}

/// Key of a ridge given its sorted vertices; ids below 2^21, at most six of them.
fn ridge_key(verts: impl Iterator<Item = usize>) -> u128 {
    verts.fold(0u128, |k, v| (k << 21) | (v as u128 + 1))
}

impl Builder<'_> {
    fn len(&self) -> usize {
        self.offsets.len()
    }

    fn face_vertices(&self, f: usize) -> &[usize] {
        &self.vertices[f * self.dim..(f + 1) * self.dim]
    }

    fn distance(&self, f: usize, p: usize) -> f64 {
        let d = self.dim;
        dot(&self.normals[f * d..(f + 1) * d], &self.points[p]) - self.offsets[f]
    }

    /// Add the face through `verts` (sorted), oriented away from the interior
    /// point; `None` when the vertices are affinely dependent.
    fn push_face(&mut self, verts: &[usize]) -> Option<usize> {
        let d = self.dim;
        let base = &self.points[verts[0]];
        // null vector of the edge matrix by elimination with complete pivoting
        let mut a = [[0.0f64; MAX_DIM]; MAX_DIM];
        for (row, &v) in a.iter_mut().zip(&verts[1..]) {
            for k in 0..d {
                row[k] = self.points[v][k] - base[k];
            }
        }
        let mut cols: [usize; MAX_DIM] = std::array::from_fn(|i| i);
        let rows = d - 1;
        for k in 0..rows {
            let (mut pr, mut pc, mut best) = (k, k, 0.0);
            for i in k..rows {
                for j in k..d {
                    let v = a[i][j].abs();
                    if v > best {
                        (pr, pc, best) = (i, j, v);
                    }
                }
            }
            if best <= self.eps {
                return None;
            }
            a.swap(k, pr);
            if pc != k {
                for row in a.iter_mut().take(rows) {
                    row.swap(k, pc);
                }
                cols.swap(k, pc);
            }
            let pivot = a[k];
            for i in k + 1..rows {
                let f = a[i][k] / pivot[k];
                for j in k..d {
                    a[i][j] -= f * pivot[j];
                }
            }
        }
        let mut x = [0.0f64; MAX_DIM];
        x[d - 1] = 1.0;
        for k in (0..d - 1).rev() {
            let s: f64 = (k + 1..d).map(|j| a[k][j] * x[j]).sum();
            x[k] = -s / a[k][k];
        }
        let mut normal = [0.0f64; MAX_DIM];
        for j in 0..d {
            normal[cols[j]] = x[j];
        }
        let n = normal[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        let side: f64 = (0..d).map(|k| normal[k] * (base[k] - self.interior[k])).sum::<f64>() / n;
        if side.abs() <= self.eps {
            return None;
        }
        let scale = side.signum() / n;
        let normal = &normal[..d];
        self.normals.extend(normal.iter().map(|v| v * scale));
        let offset = dot(&self.normals[self.normals.len() - d..], base);
        self.vertices.extend_from_slice(verts);
        self.offsets.push(offset);
        self.neighbors.extend(std::iter::repeat(NONE).take(d));
        self.outside.push(Vec::new());
        self.alive.push(true);
        self.mark.push(0);
        Some(self.len() - 1)
    }

    /// Give each point to the first of `faces` it lies above; the rest are inside.
    fn assign(&mut self, points: Vec<usize>, faces: &[usize]) -> Vec<usize> {
        let mut touched = Vec::new();
        for p in points {
            if let Some(&f) = faces.iter().find(|&&f| self.distance(f, p) > self.eps) {
                if self.outside[f].is_empty() {
                    touched.push(f);
                }
                self.outside[f].push(p);
            }
        }
        touched
    }

    /// Add the farthest outside point of `f0` to the hull.
    fn expand(&mut self, f0: usize) -> Vec<usize> {
        let d = self.dim;
        let apex = *self.outside[f0]
            .iter()
            .max_by(|&&a, &&b| self.distance(f0, a).total_cmp(&self.distance(f0, b)).then(b.cmp(&a)))
            .expect("non-empty outside set");

        // visible region by flood fill; marks: epoch = visible, epoch + 1 = not visible
        self.epoch += 2;
        let (vis_mark, hid_mark) = (self.epoch, self.epoch + 1);
        self.mark[f0] = vis_mark;
        let mut stack = vec![f0];
        let mut visible = Vec::new();
        let mut horizon = Vec::new();
        while let Some(f) = stack.pop() {
            visible.push(f);
            for slot in 0..d {
                let nb = self.neighbors[f * d + slot];
                if nb == NONE || !self.alive[nb] {
                    continue;
                }
                if self.mark[nb] != vis_mark && self.mark[nb] != hid_mark {
                    if self.distance(nb, apex) > self.eps {
                        self.mark[nb] = vis_mark;
                        stack.push(nb);
                    } else {
                        self.mark[nb] = hid_mark;
                    }
                }
                if self.mark[nb] == hid_mark {
                    horizon.push((f, slot));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            self.alive[f] = false;
            orphans.extend(std::mem::take(&mut self.outside[f]).into_iter().filter(|&p| p != apex));
        }

        let mut created = Vec::new();
        let mut open: Vec<(u128, usize, usize)> = Vec::new();
        let mut verts = Vec::with_capacity(d);
        for (f, slot) in horizon {
            let outer = self.neighbors[f * d + slot];
            verts.clear();
            verts.extend(self.face_vertices(f).iter().enumerate().filter(|(i, _)| *i != slot).map(|(_, v)| *v));
            verts.push(apex);
            verts.sort_unstable();
            let Some(id) = self.push_face(&verts) else {
                continue;
            };
            created.push(id);
            let apex_slot = verts.iter().position(|&v| v == apex).unwrap();
            self.neighbors[id * d + apex_slot] = outer;
            if let Some(k) = (0..d).find(|&k| self.neighbors[outer * d + k] == f) {
                self.neighbors[outer * d + k] = id;
            }
            for slot in (0..d).filter(|&s| s != apex_slot) {
                let key = ridge_key(verts.iter().enumerate().filter(|(i, _)| *i != slot).map(|(_, v)| *v));
                open.push((key, id, slot));
            }
        }
        // ridges through the apex pair up between new faces
        open.sort_unstable();
        for w in open.windows(2) {
            if w[0].0 == w[1].0 {
                self.neighbors[w[0].1 * d + w[0].2] = w[1].1;
                self.neighbors[w[1].1 * d + w[1].2] = w[0].1;
            }
        }
        self.assign(orphans, &created)
    }
}

/// Convex hull of `points` (all of dimension `dim >= 2`). Returns `None` when
/// the points do not span `dim` dimensions.
pub fn convex_hull(points: &[Vec<f64>], dim: usize) -> Option<ConvexHull> {
    if dim < 2 || points.len() < dim + 1 {
        return None;
    }
    assert!(dim <= MAX_DIM && points.len() < 1 << 21, "hull limited to 7 dimensions and 2^21 points");
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let eps = 1e-10 * scale;
    // initial simplex: greedily maximize distance to the current affine hull
    let first = (0..points.len())
        .max_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(b.cmp(&a)))
        .unwrap();
    let mut simplex = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while simplex.len() < dim + 1 {
        let base = &points[simplex[0]];
        let mut best = (usize::MAX, 0.0, Vec::new());
        for (i, p) in points.iter().enumerate() {
            let mut e = sub(p, base);
            reject(&mut e, &basis);
            let n = dot(&e, &e).sqrt();
            if n > best.1 {
                best = (i, n, e);
            }
        }
        if best.1 <= 1e3 * eps {
            return None;
        }
        let (i, n, mut e) = best;
        e.iter_mut().for_each(|x| *x /= n);
        basis.push(e);
        simplex.push(i);
    }
    let interior: Vec<f64> = (0..dim)
        .map(|k| simplex.iter().map(|&i| points[i][k]).sum::<f64>() / (dim + 1) as f64)
        .collect();
    let mut b = Builder {
        dim,
        points,
        interior,
        eps,
        vertices: Vec::new(),
        normals: Vec::new(),
        offsets: Vec::new(),
        neighbors: Vec::new(),
        outside: Vec::new(),
        alive: Vec::new(),
        mark: Vec::new(),
        epoch: 0,
    };
    // face k leaves out sorted[k]; its neighbor across vertex v is the face leaving out v
    let mut sorted = simplex.clone();
    sorted.sort_unstable();
    for skip in 0..=dim {
        let verts: Vec<usize> = sorted.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
        b.push_face(&verts)?;
    }
    for k in 0..=dim {
        for slot in 0..dim {
            let v = b.vertices[k * dim + slot];
            b.neighbors[k * dim + slot] = sorted.iter().position(|&s| s == v).unwrap();
        }
    }
    let rest: Vec<usize> = (0..points.len()).filter(|i| !simplex.contains(i)).collect();
    let initial: Vec<usize> = (0..=dim).collect();
    let mut pending = b.assign(rest, &initial);
    while let Some(f) = pending.pop() {
        if b.alive[f] && !b.outside[f].is_empty() {
            let mut more = b.expand(f);
            more.reverse();
            pending.extend(more);
        }
    }
    let facets: Vec<Facet> = (0..b.len())
        .filter(|&f| b.alive[f])
        .map(|f| Facet {
            vertices: b.face_vertices(f).to_vec(),
            normal: b.normals[f * dim..(f + 1) * dim].to_vec(),
            offset: b.offsets[f],
        })
        .collect();
    let mut vertices: Vec<usize> = facets.iter().flat_map(|f| f.vertices.iter().copied()).collect();
    vertices.sort_unstable();
    vertices.dedup();
    let mut volume = 0.0;
    let mut m = vec![0.0; dim * dim];
    for f in &facets {
        for (r, &v) in f.vertices.iter().enumerate() {
            for k in 0..dim {
                m[r * dim + k] = points[v][k] - b.interior[k];
            }
        }
        volume += determinant(&mut m, dim).abs();
    }
    volume /= factorial(dim);
    Some(ConvexHull {
        dim,
        facets,
        vertices,
        interior: b.interior,
        volume,
    })
}

impl ConvexHull {
    /// Signed distance of `p` to the boundary, negative inside: the largest facet distance.
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        self.facets
            .iter()
            .map(|f| dot(&f.normal, p) - f.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest facet offset, i.e. the distance from the origin to the boundary
    /// when the origin is inside (negative otherwise).
    pub fn min_offset(&self) -> f64 {
        self.facets.iter().map(|f| f.offset).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners(dim: usize, h: f64) -> Vec<Vec<f64>> {
        (0..1usize << dim)
            .map(|m| (0..dim).map(|k| if m >> k & 1 == 1 { h } else { -h }).collect())
            .collect()
    }

    #[test]
    fn hypercubes() {
        for dim in 2..=6 {
            let hull = convex_hull(&cube_corners(dim, 1.0), dim).unwrap();
            assert!((hull.volume - 2f64.powi(dim as i32)).abs() < 1e-9, "dim {dim}");
            assert!((hull.min_offset() - 1.0).abs() < 1e-12);
            assert_eq!(hull.vertices.len(), 1 << dim);
        }
    }

    #[test]
    fn interior_points_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = cube_corners(4, 1.0);
        for _ in 0..200 {
            pts.push((0..4).map(|_| rng.gen_range(-0.99..0.99)).collect());
        }
        let hull = convex_hull(&pts, 4).unwrap();
        assert_eq!(hull.vertices, (0..16).collect::<Vec<_>>());
        assert!((hull.volume - 16.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_and_cross_polytope() {
        // standard simplex in 3d: volume 1/6
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let hull = convex_hull(&pts, 3).unwrap();
        assert!((hull.volume - 1.0 / 6.0).abs() < 1e-12);
        // cross polytope in 6d: volume 2^6 / 6!, inradius 1/sqrt(6)
        let mut pts = Vec::new();
        for k in 0..6 {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; 6];
                p[k] = s;
                pts.push(p);
            }
        }
        let hull = convex_hull(&pts, 6).unwrap();
        assert!((hull.volume - 64.0 / 720.0).abs() < 1e-12);
        assert!((hull.min_offset() - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(hull.facets.len(), 64);
    }

    #[test]
    fn flat_sets_are_degenerate() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64, 0.0]).collect();
        assert!(convex_hull(&pts, 3).is_none());
    }

    #[test]
    fn random_points_lie_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [2, 3, 6] {
            let pts: Vec<Vec<f64>> = (0..60).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let hull = convex_hull(&pts, dim).unwrap();
            for p in &pts {
                assert!(hull.signed_distance(p) <= 1e-9);
            }
            for f in &hull.facets {
                let norm: f64 = f.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }
}
