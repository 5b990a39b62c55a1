use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::kdtree::KdTree;
use super::transform::RigidTransform;
use crate::error::{Error, Result};

/// Unit normals must be within this distance of length one.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// Oriented point set: positions in meters with outward unit normals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::InvalidCloud(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !((n.norm() - 1.0).abs() <= NORMAL_TOLERANCE))
        {
            return Err(Error::InvalidCloud(format!(
                "normal {i} has length {}",
                normals[i].norm()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} is not finite")));
        }
        Ok(Self {
            points,
            normals,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{} weights for {} points",
                weights.len(),
                self.points.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidCloud("negative weight".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn point(&self, i: usize) -> &Vector3<f64> {
        &self.points[i]
    }

    pub fn normal(&self, i: usize) -> &Vector3<f64> {
        &self.normals[i]
    }

    /// Per-point weight; 1 when the cloud carries none.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn transformed(&self, tf: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| tf.transform_point(p)).collect(),
            normals: self.normals.iter().map(|n| tf.transform_vector(n)).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }

    pub fn centroid(&self) -> Vector3<f64> {
        if self.points.is_empty() {
            return Vector3::zeros();
        }
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Exact nearest target point for every query as `(target index, distance)`.
pub fn nearest_neighbors(queries: &PointCloud, target: &PointCloud) -> Result<Vec<(usize, f64)>> {
    if target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(target.points());
    Ok(queries
        .points()
        .iter()
        .map(|q| tree.nearest(q).expect("tree is non-empty"))
        .collect())
}

/// Result of normal estimation; points with rank-deficient neighborhoods are dropped.
#[derive(Clone, Debug)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    /// Input index of each point kept in `cloud`.
    pub kept: Vec<usize>,
    /// Input indices whose neighborhood was degenerate.
    pub invalid: Vec<usize>,
}

/// PCA normals over `k` nearest neighbors, flipped to face `viewpoint`.
pub fn estimate_normals(
    points: &[Vector3<f64>],
    k: usize,
    viewpoint: &Vector3<f64>,
) -> Result<NormalEstimate> {
    if k < 3 {
        return Err(Error::InvalidCloud(format!("need k >= 3 neighbors, got {k}")));
    }
    if points.len() < k {
        return Err(Error::InvalidCloud(format!(
            "need at least {k} points, got {}",
            points.len()
        )));
    }
    let tree = KdTree::build(points);
    let mut kept = Vec::new();
    let mut invalid = Vec::new();
    let mut normals = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let nbrs = tree.k_nearest(p, k);
        let mean = nbrs.iter().map(|&(j, _)| points[j]).sum::<Vector3<f64>>() / nbrs.len() as f64;
        let mut cov = Matrix3::zeros();
        for &(j, _) in &nbrs {
            let d = points[j] - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (l1, l2) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
        if l2 <= 0.0 || l1 <= 1e-10 * l2 {
            invalid.push(i);
            continue;
        }
        let mut n: Vector3<f64> = eig.eigenvectors.column(order[0]).normalize();
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        kept.push(i);
        normals.push(n);
    }
    let cloud = PointCloud::new(kept.iter().map(|&i| points[i]).collect(), normals)?;
    Ok(NormalEstimate {
        cloud,
        kept,
        invalid,
    })
}
