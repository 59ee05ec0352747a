//! Multi-level knowledge graph: a static discipline layer, an evolving
//! entity layer, `has_entity` edges from disciplines to entities, and
//! similarity-gated cross-entity edges.

mod persist;
mod wiki;

pub use persist::SCHEMA_VERSION;
pub use wiki::{wiki_ingest, WikiCandidate, WikiSource};

use crate::embedding::{cosine, EmbeddingCache};
use crate::error::{Error, Result};
use crate::util::Warning;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DisciplineId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl fmt::Display for DisciplineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemanticType {
    Theory,
    Model,
    Material,
    Phenomenon,
    Method,
    Other,
}

/// First-layer node; the discipline set is static across evolution rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discipline {
    pub id: DisciplineId,
    pub name: String,
    pub layer: u8,
}

/// Second-layer node; the unit the evolutionary loop acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub label: String,
    pub semantic_type: SemanticType,
    pub disciplines: BTreeSet<DisciplineId>,
    /// Key into the sidecar embedding cache, set once embedded.
    pub embedding_ref: Option<String>,
    pub frequency: u64,
    pub fitness: Option<f64>,
}

/// Candidate produced by extraction + classification, ready for ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub label: String,
    pub semantic_type: SemanticType,
    pub relevant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    HasEntity,
    CrossEntity,
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    /// Entities inserted or merged into, in candidate order.
    pub entities: Vec<EntityId>,
    pub inserted: usize,
    pub merged: usize,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    tau: f64,
    next_discipline_seq: u64,
    next_entity_seq: u64,
    disciplines: BTreeMap<DisciplineId, Discipline>,
    entities: BTreeMap<EntityId, Entity>,
    has_entity: BTreeSet<(DisciplineId, EntityId)>,
    /// Keyed by the (lower, higher) entity id pair; logically symmetric.
    cross_entity: BTreeMap<(EntityId, EntityId), f64>,
}

impl KnowledgeGraph {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            next_discipline_seq: 0,
            next_entity_seq: 0,
            disciplines: BTreeMap::new(),
            entities: BTreeMap::new(),
            has_entity: BTreeSet::new(),
            cross_entity: BTreeMap::new(),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn disciplines(&self) -> impl Iterator<Item = &Discipline> {
        self.disciplines.values()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn discipline(&self, id: &DisciplineId) -> Option<&Discipline> {
        self.disciplines.get(id)
    }

    pub fn discipline_by_name(&self, name: &str) -> Option<&Discipline> {
        let wanted = name.trim().to_lowercase();
        self.disciplines
            .values()
            .find(|d| d.name.to_lowercase() == wanted)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn cross_entity_edges(&self) -> impl Iterator<Item = (&EntityId, &EntityId, f64)> {
        self.cross_entity.iter().map(|((a, b), w)| (a, b, *w))
    }

    pub fn has_entity_edges(&self) -> impl Iterator<Item = &(DisciplineId, EntityId)> {
        self.has_entity.iter()
    }

    /// Registers a new first-layer discipline node.
    pub fn add_discipline(&mut self, name: &str) -> Result<DisciplineId> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::validation("discipline name must be non-empty"));
        }
        if self.discipline_by_name(trimmed).is_some() {
            return Err(Error::DuplicateDiscipline(trimmed.to_string()));
        }
        let id = DisciplineId(format!("d{:06}", self.next_discipline_seq));
        self.next_discipline_seq += 1;
        self.disciplines.insert(
            id.clone(),
            Discipline {
                id: id.clone(),
                name: trimmed.to_string(),
                layer: 1,
            },
        );
        Ok(id)
    }

    fn entity_by_label_mut(&mut self, label_norm: &str) -> Option<&mut Entity> {
        self.entities
            .values_mut()
            .find(|e| e.label.to_lowercase() == label_norm)
    }

    pub fn entity_by_label(&self, label: &str) -> Option<&Entity> {
        let wanted = label.trim().to_lowercase();
        self.entities
            .values()
            .find(|e| e.label.to_lowercase() == wanted)
    }

    /// Inserts the relevant candidates under `discipline`, deduplicating by
    /// label: a label already known (under any discipline) merges discipline
    /// membership instead of creating an alias.
    pub fn ingest_entities(
        &mut self,
        discipline: &DisciplineId,
        candidates: &[EntityCandidate],
    ) -> Result<IngestOutcome> {
        if !self.disciplines.contains_key(discipline) {
            return Err(Error::NotFound(format!("discipline {discipline}")));
        }
        let mut outcome = IngestOutcome::default();
        for candidate in candidates {
            if !candidate.relevant {
                continue;
            }
            let label = candidate.label.trim();
            if label.is_empty() {
                outcome
                    .warnings
                    .push(Warning::new("empty_label", "skipped empty candidate label"));
                continue;
            }
            let label_norm = label.to_lowercase();
            if let Some(existing) = self.entity_by_label_mut(&label_norm) {
                let id = existing.id.clone();
                let newly_linked = existing.disciplines.insert(discipline.clone());
                self.has_entity.insert((discipline.clone(), id.clone()));
                if newly_linked {
                    outcome.merged += 1;
                }
                if !outcome.entities.contains(&id) {
                    outcome.entities.push(id);
                }
            } else {
                let id = EntityId(format!("e{:06}", self.next_entity_seq));
                self.next_entity_seq += 1;
                let mut disciplines = BTreeSet::new();
                disciplines.insert(discipline.clone());
                self.entities.insert(
                    id.clone(),
                    Entity {
                        id: id.clone(),
                        label: label.to_string(),
                        semantic_type: candidate.semantic_type,
                        disciplines,
                        embedding_ref: None,
                        frequency: 0,
                        fitness: None,
                    },
                );
                self.has_entity.insert((discipline.clone(), id.clone()));
                outcome.inserted += 1;
                outcome.entities.push(id);
            }
        }
        Ok(outcome)
    }

    pub fn set_embedding_ref(&mut self, id: &EntityId, key: String) -> Result<()> {
        let entity = self
            .entities
            .get_mut(id)
            .ok_or_else(|| Error::NotFound(format!("entity {id}")))?;
        entity.embedding_ref = Some(key);
        Ok(())
    }

    pub fn bump_frequency(&mut self, id: &EntityId) {
        if let Some(entity) = self.entities.get_mut(id) {
            entity.frequency += 1;
        }
    }

    pub fn set_entity_fitness(&mut self, id: &EntityId, fitness: f64) {
        if let Some(entity) = self.entities.get_mut(id) {
            entity.fitness = Some(fitness.clamp(0.0, 1.0));
        }
    }

    pub fn entities_of(&self, discipline: &DisciplineId) -> Vec<&Entity> {
        self.entities
            .values()
            .filter(|e| e.disciplines.contains(discipline))
            .collect()
    }

    /// Rebuilds the cross-entity edge set against `tau`: an edge exists for an
    /// unordered pair iff the cosine of their cached embeddings strictly
    /// exceeds `tau`. Re-running is idempotent; stale edges are dropped.
    /// Returns the number of edges added.
    pub fn link_cross_entities(&mut self, tau: f64, cache: &EmbeddingCache) -> Result<usize> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::validation("tau must lie in (0, 1)"));
        }
        let mut vectors = BTreeMap::new();
        for entity in self.entities.values() {
            let key = entity
                .embedding_ref
                .as_ref()
                .ok_or_else(|| Error::EmbeddingMissing(entity.id.to_string()))?;
            let vector = cache
                .get(key)
                .ok_or_else(|| Error::EmbeddingMissing(entity.id.to_string()))?;
            vectors.insert(entity.id.clone(), vector);
        }
        let ids: Vec<EntityId> = self.entities.keys().cloned().collect();
        let mut fresh = BTreeMap::new();
        let mut added = 0usize;
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let similarity = cosine(&vectors[&ids[i]], &vectors[&ids[j]])?;
                if similarity > tau {
                    let key = (ids[i].clone(), ids[j].clone());
                    if !self.cross_entity.contains_key(&key) {
                        added += 1;
                    }
                    fresh.insert(key, similarity);
                }
            }
        }
        self.cross_entity = fresh;
        self.tau = tau;
        Ok(added)
    }

    /// Weight of the cross-entity edge between two entities, if present.
    pub fn cross_weight(&self, a: &EntityId, b: &EntityId) -> Option<f64> {
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.cross_entity.get(&key).copied()
    }

    /// Removes the listed entities and every incident edge. Unknown ids are
    /// tolerated and surfaced as warnings.
    pub fn prune_entities(&mut self, ids: &BTreeSet<EntityId>) -> (usize, Vec<Warning>) {
        let mut removed = 0usize;
        let mut warnings = Vec::new();
        for id in ids {
            if self.entities.remove(id).is_some() {
                removed += 1;
                self.has_entity.retain(|(_, e)| e != id);
                self.cross_entity.retain(|(a, b), _| a != id && b != id);
            } else {
                warnings.push(Warning::new(
                    "unknown_entity",
                    format!("prune skipped unknown entity {id}"),
                ));
            }
        }
        (removed, warnings)
    }

    /// Structural invariant check, also applied after loading from disk.
    pub fn validate(&self) -> Result<()> {
        for discipline in self.disciplines.values() {
            if discipline.name.trim().is_empty() {
                return Err(Error::Integrity("discipline name is empty".into()));
            }
            if discipline.layer != 1 {
                return Err(Error::Integrity(format!(
                    "discipline {} is not on layer 1",
                    discipline.id
                )));
            }
        }
        for entity in self.entities.values() {
            if entity.label.trim().is_empty() {
                return Err(Error::Integrity(format!("entity {} has empty label", entity.id)));
            }
            if entity.disciplines.is_empty() {
                return Err(Error::Integrity(format!(
                    "entity {} belongs to no discipline",
                    entity.id
                )));
            }
            for d in &entity.disciplines {
                if !self.disciplines.contains_key(d) {
                    return Err(Error::Integrity(format!(
                        "entity {} references unknown discipline {d}",
                        entity.id
                    )));
                }
            }
            if let Some(f) = entity.fitness {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::Integrity(format!(
                        "entity {} fitness outside [0,1]",
                        entity.id
                    )));
                }
            }
        }
        for (d, e) in &self.has_entity {
            if !self.disciplines.contains_key(d) {
                return Err(Error::Integrity(format!(
                    "has_entity edge references unknown discipline {d}"
                )));
            }
            if !self.entities.contains_key(e) {
                return Err(Error::Integrity(format!(
                    "has_entity edge references unknown entity {e}"
                )));
            }
        }
        for ((a, b), weight) in &self.cross_entity {
            if a == b {
                return Err(Error::Integrity(format!(
                    "cross-entity edge connects {a} to itself"
                )));
            }
            if !self.entities.contains_key(a) || !self.entities.contains_key(b) {
                return Err(Error::Integrity(format!(
                    "cross-entity edge ({a}, {b}) references a pruned entity"
                )));
            }
            if !(*weight > self.tau) {
                return Err(Error::Integrity(format!(
                    "cross-entity edge ({a}, {b}) weight {weight} does not exceed tau {}",
                    self.tau
                )));
            }
            if !(-1.0..=1.0).contains(weight) {
                return Err(Error::Integrity(format!(
                    "cross-entity edge ({a}, {b}) weight {weight} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}
