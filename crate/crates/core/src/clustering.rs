//! Connected-component clustering of position candidates over the
//! `d_cluster` threshold graph, with weighted centers and variances, and the
//! final per-cluster position pick.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::positioning::PositionCandidate;
use serde::{Deserialize, Serialize};

/// Distance-table mode materializes the full boolean adjacency (O(n^2)
/// memory); streaming mode keeps only visited flags (O(n) memory) and
/// recomputes distances during the search. Both produce identical
/// partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    DistanceTable,
    Streaming,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Connectivity threshold, meters (strict: d < d_cluster connects).
    pub d_cluster: f64,
    pub memory_mode: MemoryMode,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            d_cluster: 5.0,
            memory_mode: MemoryMode::Streaming,
        }
    }
}

/// A connected component of candidates.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Member candidate indices, ascending.
    pub members: Vec<usize>,
    pub total_weight: f64,
    /// Weighted center of the members (unweighted mean if all weights are
    /// zero).
    pub center: Vec3,
    /// Trace of the weighted covariance of member positions, m^2.
    pub variance: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Groups candidates into exact connected components of the threshold graph.
/// Output clusters are sorted by descending total weight, ties broken by the
/// smallest member index.
pub fn cluster_candidates(
    candidates: &[PositionCandidate],
    cfg: &ClusterConfig,
) -> Result<Vec<Cluster>> {
    if cfg.d_cluster <= 0.0 {
        return Err(Error::Invalid("d_cluster must be positive".into()));
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let components = match cfg.memory_mode {
        MemoryMode::DistanceTable => components_with_table(candidates, cfg.d_cluster),
        MemoryMode::Streaming => components_streaming(candidates, cfg.d_cluster),
    };

    let mut clusters: Vec<Cluster> = components
        .into_iter()
        .map(|members| summarize(candidates, members))
        .collect();
    clusters.sort_by(|a, b| {
        b.total_weight
            .partial_cmp(&a.total_weight)
            .unwrap()
            .then(a.members[0].cmp(&b.members[0]))
    });
    Ok(clusters)
}

fn components_with_table(candidates: &[PositionCandidate], d: f64) -> Vec<Vec<usize>> {
    let n = candidates.len();
    let mut adjacent = vec![false; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let close = candidates[i].position.distance(candidates[j].position) < d;
            adjacent[i * n + j] = close;
            adjacent[j * n + i] = close;
        }
    }
    let mut visited = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..n {
                if !visited[j] && adjacent[i * n + j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn components_streaming(candidates: &[PositionCandidate], d: f64) -> Vec<Vec<usize>> {
    let n = candidates.len();
    let mut visited = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(i) = stack.pop() {
            members.push(i);
            let pi = candidates[i].position;
            for (j, c) in candidates.iter().enumerate() {
                if !visited[j] && pi.distance(c.position) < d {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn summarize(candidates: &[PositionCandidate], members: Vec<usize>) -> Cluster {
    let total_weight: f64 = members.iter().map(|&i| candidates[i].weight).sum();
    let center = if total_weight > 0.0 {
        let mut acc = Vec3::ZERO;
        for &i in &members {
            acc = acc + candidates[i].position * candidates[i].weight;
        }
        acc / total_weight
    } else {
        let mut acc = Vec3::ZERO;
        for &i in &members {
            acc = acc + candidates[i].position;
        }
        acc / members.len() as f64
    };
    let variance = if total_weight > 0.0 {
        members
            .iter()
            .map(|&i| candidates[i].weight * (candidates[i].position - center).norm_squared())
            .sum::<f64>()
            / total_weight
    } else {
        members
            .iter()
            .map(|&i| (candidates[i].position - center).norm_squared())
            .sum::<f64>()
            / members.len() as f64
    };
    Cluster {
        members,
        total_weight,
        center,
        variance,
    }
}

/// The most likely cluster: maximum total weight (ties toward the smallest
/// member index).
pub fn select_cluster(clusters: &[Cluster]) -> Result<&Cluster> {
    clusters
        .iter()
        .max_by(|a, b| {
            a.total_weight
                .partial_cmp(&b.total_weight)
                .unwrap()
                .then(b.members[0].cmp(&a.members[0]))
        })
        .ok_or(Error::NoPosition)
}

/// How the final position is read off the selected cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickStrategy {
    /// The member with the largest weight.
    MaxPosterior,
    /// The weighted mean over the cluster.
    WeightedMean,
    /// Midpoint of the two picks above.
    Combined,
}

/// Reads the final position from a cluster under the chosen strategy.
pub fn pick_position(
    cluster: &Cluster,
    candidates: &[PositionCandidate],
    strategy: PickStrategy,
) -> Vec3 {
    let max_posterior = || {
        let &best = cluster
            .members
            .iter()
            .max_by(|&&a, &&b| {
                candidates[a]
                    .weight
                    .partial_cmp(&candidates[b].weight)
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .expect("cluster is non-empty");
        candidates[best].position
    };
    match strategy {
        PickStrategy::MaxPosterior => max_posterior(),
        PickStrategy::WeightedMean => cluster.center,
        PickStrategy::Combined => (max_posterior() + cluster.center) * 0.5,
    }
}
