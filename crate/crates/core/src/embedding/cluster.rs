//! Entity clustering on the unit sphere.
//!
//! Seeded k-means with cosine distance, k-means++ initialization and
//! restarts; the restart with the best within-cluster cohesion wins.
//! Everything is deterministic given the run seed.

use super::{aggregate, cosine, EmbeddingVector};
use crate::error::{Error, Result};
use crate::graph::{DisciplineId, EntityId};
use crate::util::derive_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

pub const DEFAULT_KMEANS_RESTARTS: usize = 20;
const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub String);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A set of semantically related entities within one discipline; the unit of
/// evolutionary variation and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCluster {
    pub id: ClusterId,
    pub discipline: DisciplineId,
    pub members: BTreeSet<EntityId>,
    pub centroid: EmbeddingVector,
    pub fitness: Option<f64>,
    pub generation: u32,
}

impl EntityCluster {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Integrity(format!("cluster {} has no members", self.id)));
        }
        self.centroid.validate()?;
        if let Some(f) = self.fitness {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Integrity(format!(
                    "cluster {} fitness outside [0,1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Normalized mean of the indexed vectors; a zero-sum mean falls back to the
/// first indexed vector.
fn centroid_of(vectors: &[EmbeddingVector], indices: &[usize]) -> EmbeddingVector {
    let members: Vec<EmbeddingVector> = indices.iter().map(|i| vectors[*i].clone()).collect();
    aggregate(&members).expect("non-empty member set")
}

/// Mean cosine of every vector to the centroid of its group: the objective
/// k-means maximizes and the quantity oracles compare against.
pub fn partition_cohesion(vectors: &[EmbeddingVector], groups: &[Vec<usize>]) -> Result<f64> {
    let total: usize = groups.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::validation("cohesion of an empty partition"));
    }
    let mut sum = 0.0;
    for group in groups {
        if group.is_empty() {
            continue;
        }
        let centroid = centroid_of(vectors, group);
        for &i in group {
            sum += cosine(&vectors[i], &centroid)?;
        }
    }
    Ok(sum / total as f64)
}

fn kmeans_plus_plus_init(
    vectors: &[EmbeddingVector],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<EmbeddingVector> {
    let n = vectors.len();
    let mut chosen: Vec<usize> = vec![rng.random_range(0..n)];
    while chosen.len() < k {
        // weight by cosine distance to the nearest chosen centroid
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let best = chosen
                    .iter()
                    .map(|&c| cosine(&vectors[i], &vectors[c]).unwrap_or(-1.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                (1.0 - best).max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total <= 0.0 {
            // all points coincide with chosen centroids; take first unchosen
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        chosen.push(next);
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn assign(vectors: &[EmbeddingVector], centroids: &[EmbeddingVector]) -> Vec<usize> {
    vectors
        .iter()
        .map(|v| {
            let mut best = 0usize;
            let mut best_cos = f64::NEG_INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let s = cosine(v, c).unwrap_or(-1.0);
                if s > best_cos {
                    best_cos = s;
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn groups_from_assignment(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); k];
    for (i, &g) in assignment.iter().enumerate() {
        groups[g].push(i);
    }
    groups
}

/// Moves the worst-fitting point of the largest group into each empty group.
fn repair_empty_groups(vectors: &[EmbeddingVector], groups: &mut [Vec<usize>]) {
    loop {
        let Some(empty) = groups.iter().position(Vec::is_empty) else {
            return;
        };
        let mut donor = None;
        let mut worst_cos = f64::INFINITY;
        for (g, group) in groups.iter().enumerate() {
            if group.len() < 2 {
                continue;
            }
            let centroid = centroid_of(vectors, group);
            for &i in group {
                let s = cosine(&vectors[i], &centroid).unwrap_or(1.0);
                if s < worst_cos {
                    worst_cos = s;
                    donor = Some((g, i));
                }
            }
        }
        let Some((g, i)) = donor else {
            return;
        };
        groups[g].retain(|&x| x != i);
        groups[empty].push(i);
    }
}

/// Partitions `vectors` into `min(k, n)` non-empty groups of indices.
///
/// Deterministic in `(seed, restarts)`; the best restart by
/// [`partition_cohesion`] is returned, earlier restarts winning ties.
pub fn kmeans_partition(
    vectors: &[EmbeddingVector],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Vec<Vec<usize>>> {
    if vectors.is_empty() {
        return Err(Error::validation("cannot cluster zero vectors"));
    }
    if k == 0 {
        return Err(Error::validation("cluster count must be positive"));
    }
    let k = k.min(vectors.len());
    if k == vectors.len() {
        return Ok((0..vectors.len()).map(|i| vec![i]).collect());
    }
    if k == 1 {
        return Ok(vec![(0..vectors.len()).collect()]);
    }
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = derive_rng(seed, &format!("kmeans:{restart}"));
        let mut centroids = kmeans_plus_plus_init(vectors, k, &mut rng);
        let mut assignment = assign(vectors, &centroids);
        for _ in 0..MAX_LLOYD_ITERATIONS {
            let mut groups = groups_from_assignment(&assignment, k);
            repair_empty_groups(vectors, &mut groups);
            centroids = groups
                .iter()
                .map(|g| centroid_of(vectors, g))
                .collect();
            let next: Vec<usize> = {
                let mut next = assignment.clone();
                for (g, group) in groups.iter().enumerate() {
                    for &i in group {
                        next[i] = g;
                    }
                }
                // re-assign against fresh centroids
                let reassigned = assign(vectors, &centroids);
                for (slot, value) in next.iter_mut().zip(reassigned) {
                    *slot = value;
                }
                next
            };
            if next == assignment {
                break;
            }
            assignment = next;
        }
        let mut groups = groups_from_assignment(&assignment, k);
        repair_empty_groups(vectors, &mut groups);
        let cohesion = partition_cohesion(vectors, &groups)?;
        if best.as_ref().map(|(c, _)| cohesion > *c).unwrap_or(true) {
            best = Some((cohesion, groups));
        }
    }
    let (_, groups) = best.expect("at least one restart");
    Ok(groups.into_iter().filter(|g| !g.is_empty()).collect())
}

/// Clusters a discipline's entities into `min(k, n)` semantic clusters.
///
/// Input order does not matter; members are canonicalized by entity id and
/// cluster ids are assigned in order of each cluster's smallest member.
pub fn cluster_entities(
    discipline: &DisciplineId,
    items: &[(EntityId, EmbeddingVector)],
    k: usize,
    generation: u32,
    seed: u64,
) -> Result<Vec<EntityCluster>> {
    if items.is_empty() {
        return Err(Error::validation("cannot cluster an empty entity set"));
    }
    let mut sorted: Vec<(EntityId, EmbeddingVector)> = items.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let vectors: Vec<EmbeddingVector> = sorted.iter().map(|(_, v)| v.clone()).collect();
    let groups = kmeans_partition(&vectors, k, seed, DEFAULT_KMEANS_RESTARTS)?;
    let mut clusters: Vec<(EntityId, EntityCluster)> = groups
        .into_iter()
        .map(|group| {
            let members: BTreeSet<EntityId> =
                group.iter().map(|&i| sorted[i].0.clone()).collect();
            let centroid = centroid_of(&vectors, &group);
            let smallest = members.iter().next().expect("non-empty").clone();
            (
                smallest,
                EntityCluster {
                    id: ClusterId(String::new()),
                    discipline: discipline.clone(),
                    members,
                    centroid,
                    fitness: None,
                    generation,
                },
            )
        })
        .collect();
    clusters.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(clusters
        .into_iter()
        .enumerate()
        .map(|(idx, (_, mut cluster))| {
            cluster.id = ClusterId(format!("{discipline}-g{generation:04}-k{idx:02}"));
            cluster
        })
        .collect())
}

/// The cluster whose centroid is most cosine-similar to the topic embedding;
/// ties break toward the lowest cluster id.
pub fn top_cluster<'a>(
    clusters: &'a [EntityCluster],
    topic: &EmbeddingVector,
) -> Result<&'a EntityCluster> {
    if clusters.is_empty() {
        return Err(Error::validation("top_cluster requires at least one cluster"));
    }
    let mut best: Option<(&EntityCluster, f64)> = None;
    for cluster in clusters {
        let s = cosine(&cluster.centroid, topic)?;
        let better = match &best {
            None => true,
            Some((current, best_s)) => {
                s > *best_s || (s == *best_s && cluster.id < current.id)
            }
        };
        if better {
            best = Some((cluster, s));
        }
    }
    Ok(best.expect("non-empty input").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::unit(values.to_vec()).unwrap()
    }

    fn eid(n: usize) -> EntityId {
        EntityId(format!("e{n:06}"))
    }

    /// Exhaustive best 2-partition by cohesion (both sides non-empty).
    fn best_two_partition(vectors: &[EmbeddingVector]) -> f64 {
        let n = vectors.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    a.push(i);
                } else {
                    b.push(i);
                }
            }
            let cohesion = partition_cohesion(vectors, &[a, b]).unwrap();
            if cohesion > best {
                best = cohesion;
            }
        }
        best
    }

    #[test]
    fn singleton_cluster() {
        let d = DisciplineId("d000000".into());
        let items = vec![(eid(0), unit(&[0.6, 0.8]))];
        let clusters = cluster_entities(&d, &items, 1, 0, 7).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members.len(), 1);
        assert_eq!(clusters[0].centroid, unit(&[0.6, 0.8]));
        assert_eq!(clusters[0].generation, 0);
    }

    #[test]
    fn two_well_separated_groups_match_exhaustive_oracle() {
        let d = DisciplineId("d000000".into());
        let items = vec![
            (eid(0), unit(&[1.0, 0.0])),
            (eid(1), unit(&[0.99, 0.14])),
            (eid(2), unit(&[0.0, 1.0])),
            (eid(3), unit(&[0.14, 0.99])),
        ];
        let clusters = cluster_entities(&d, &items, 2, 0, 11).unwrap();
        assert_eq!(clusters.len(), 2);
        let groups: Vec<BTreeSet<EntityId>> =
            clusters.iter().map(|c| c.members.clone()).collect();
        let expected_a: BTreeSet<EntityId> = [eid(0), eid(1)].into_iter().collect();
        let expected_b: BTreeSet<EntityId> = [eid(2), eid(3)].into_iter().collect();
        assert!(groups.contains(&expected_a));
        assert!(groups.contains(&expected_b));

        let vectors: Vec<EmbeddingVector> = items.iter().map(|(_, v)| v.clone()).collect();
        let attained = partition_cohesion(
            &vectors,
            &[vec![0, 1], vec![2, 3]],
        )
        .unwrap();
        assert!((attained - best_two_partition(&vectors)).abs() < 1e-9);
    }

    #[test]
    fn partition_law_holds() {
        let d = DisciplineId("d000000".into());
        let mut items = Vec::new();
        for i in 0..9 {
            let angle = i as f64 * 0.7;
            items.push((eid(i), unit(&[angle.cos(), angle.sin()])));
        }
        let clusters = cluster_entities(&d, &items, 3, 2, 5).unwrap();
        let mut seen = BTreeSet::new();
        for cluster in &clusters {
            assert_eq!(cluster.generation, 2);
            for m in &cluster.members {
                assert!(seen.insert(m.clone()), "member {m} appears twice");
            }
        }
        assert_eq!(seen.len(), items.len());
    }

    #[test]
    fn clustering_is_deterministic() {
        let d = DisciplineId("d000000".into());
        let mut items = Vec::new();
        for i in 0..8 {
            let angle = i as f64 * 0.9;
            items.push((eid(i), unit(&[angle.cos(), angle.sin()])));
        }
        let a = cluster_entities(&d, &items, 3, 0, 42).unwrap();
        let b = cluster_entities(&d, &items, 3, 0, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn top_cluster_matches_argmax_and_breaks_ties_by_id() {
        let d = DisciplineId("d000000".into());
        let mk = |idx: usize, centroid: &[f64]| EntityCluster {
            id: ClusterId(format!("c{idx}")),
            discipline: d.clone(),
            members: [eid(idx)].into_iter().collect(),
            centroid: unit(centroid),
            fitness: None,
            generation: 0,
        };
        let clusters = vec![mk(0, &[1.0, 0.0]), mk(1, &[0.0, 1.0])];
        let topic = unit(&[0.9, 0.436]);
        // exhaustive comparison over both clusters
        let s0 = cosine(&clusters[0].centroid, &topic).unwrap();
        let s1 = cosine(&clusters[1].centroid, &topic).unwrap();
        assert!(s0 > s1);
        assert_eq!(top_cluster(&clusters, &topic).unwrap().id, clusters[0].id);

        let single = vec![mk(5, &[0.0, 1.0])];
        assert_eq!(top_cluster(&single, &topic).unwrap().id, single[0].id);

        // equal similarity -> lower id wins
        let tied = vec![mk(1, &[1.0, 0.0]), mk(0, &[1.0, 0.0])];
        assert_eq!(top_cluster(&tied, &unit(&[1.0, 0.0])).unwrap().id.0, "c0");
        assert!(top_cluster(&[], &topic).is_err());
    }

    #[test]
    fn top_cluster_invariant_under_topic_rescaling() {
        let d = DisciplineId("d000000".into());
        let mk = |idx: usize, centroid: &[f64]| EntityCluster {
            id: ClusterId(format!("c{idx}")),
            discipline: d.clone(),
            members: [eid(idx)].into_iter().collect(),
            centroid: unit(centroid),
            fitness: None,
            generation: 0,
        };
        let clusters = vec![mk(0, &[1.0, 0.2]), mk(1, &[0.1, 1.0])];
        let topic_small = EmbeddingVector::new(vec![0.03, 0.01]).unwrap();
        let topic_large = EmbeddingVector::new(vec![300.0, 100.0]).unwrap();
        assert_eq!(
            top_cluster(&clusters, &topic_small).unwrap().id,
            top_cluster(&clusters, &topic_large).unwrap().id
        );
    }
}
