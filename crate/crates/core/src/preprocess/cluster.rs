use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{KdTree, PointCloud};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Linking distance in metres.
    pub tolerance: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            min_cluster_size: 50,
            max_cluster_size: usize::MAX,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "cluster tolerance must be positive".into(),
            ));
        }
        if self.min_cluster_size == 0 || self.min_cluster_size > self.max_cluster_size {
            return Err(Error::InvalidConfig(
                "cluster sizes need 0 < min <= max".into(),
            ));
        }
        Ok(())
    }
}

/// Connected components of the `distance <= tolerance` graph, each as sorted
/// input indices. Components outside the size bounds are dropped; the rest
/// are ordered by size descending, then by smallest index.
pub fn euclidean_cluster_indices<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &ClusterConfig,
) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Ok(Vec::new());
    }
    let pts = cloud.points();
    let tree = KdTree::build(pts)?;
    let tol = T::lit(cfg.tolerance);
    let mut seen = vec![false; pts.len()];
    let mut clusters = Vec::new();
    let mut queue = Vec::new();
    for start in 0..pts.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.clear();
        queue.push(start);
        let mut head = 0;
        while head < queue.len() {
            let p = queue[head];
            head += 1;
            for (j, _) in tree.within_radius(&pts[p], tol) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        if (cfg.min_cluster_size..=cfg.max_cluster_size).contains(&queue.len()) {
            let mut c = queue.clone();
            c.sort_unstable();
            clusters.push(c);
        }
    }
    // components were discovered in order of their smallest index
    clusters.sort_by(|a: &Vec<usize>, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    Ok(clusters)
}

pub fn euclidean_cluster<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &ClusterConfig,
) -> Result<Vec<PointCloud<T>>> {
    Ok(euclidean_cluster_indices(cloud, cfg)?
        .iter()
        .map(|idx| cloud.select(idx))
        .collect())
}
