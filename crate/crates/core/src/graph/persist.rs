//! Versioned on-disk graph format.
//!
//! One JSON document with sections `{schema_version, tau, disciplines[],
//! entities[], edges[]}`. Entity embeddings are stored by reference key into
//! the sidecar embedding cache file, never inline.

use super::{Discipline, DisciplineId, EdgeKind, Entity, EntityId, KnowledgeGraph};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    kind: EdgeKind,
    a: String,
    b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    schema_version: u32,
    tau: f64,
    next_discipline_seq: u64,
    next_entity_seq: u64,
    disciplines: Vec<Discipline>,
    entities: Vec<Entity>,
    edges: Vec<EdgeRecord>,
}

/// Byte offset of a serde_json error inside `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0usize;
    for (i, l) in text.split('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    offset
}

impl KnowledgeGraph {
    /// Writes the graph as a versioned JSON document.
    pub fn snapshot(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = GraphFile {
            schema_version: SCHEMA_VERSION,
            tau: self.tau,
            next_discipline_seq: self.next_discipline_seq,
            next_entity_seq: self.next_entity_seq,
            disciplines: self.disciplines.values().cloned().collect(),
            entities: self.entities.values().cloned().collect(),
            edges: self
                .has_entity
                .iter()
                .map(|(d, e)| EdgeRecord {
                    kind: EdgeKind::HasEntity,
                    a: d.0.clone(),
                    b: e.0.clone(),
                    weight: None,
                })
                .chain(self.cross_entity.iter().map(|((a, b), w)| EdgeRecord {
                    kind: EdgeKind::CrossEntity,
                    a: a.0.clone(),
                    b: b.0.clone(),
                    weight: Some(*w),
                }))
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Format {
            message: e.to_string(),
            offset: None,
        })?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Loads a graph snapshot, rejecting unknown schema versions, malformed
    /// documents (with a byte offset) and invariant violations.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            message: e.to_string(),
            offset: Some(byte_offset(&text, e.line(), e.column())),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                message: format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    file.schema_version
                ),
                offset: None,
            });
        }
        let mut disciplines = BTreeMap::new();
        for d in file.disciplines {
            if disciplines.insert(d.id.clone(), d).is_some() {
                return Err(Error::Integrity("duplicate discipline id".into()));
            }
        }
        let mut entities = BTreeMap::new();
        for e in file.entities {
            if entities.insert(e.id.clone(), e).is_some() {
                return Err(Error::Integrity("duplicate entity id".into()));
            }
        }
        let mut has_entity = BTreeSet::new();
        let mut cross_entity = BTreeMap::new();
        for edge in file.edges {
            match edge.kind {
                EdgeKind::HasEntity => {
                    has_entity.insert((DisciplineId(edge.a), EntityId(edge.b)));
                }
                EdgeKind::CrossEntity => {
                    let weight = edge.weight.ok_or_else(|| {
                        Error::Integrity("cross-entity edge missing weight".into())
                    })?;
                    let (a, b) = (EntityId(edge.a), EntityId(edge.b));
                    let key = if a <= b { (a, b) } else { (b, a) };
                    cross_entity.insert(key, weight);
                }
            }
        }
        let graph = KnowledgeGraph {
            tau: file.tau,
            next_discipline_seq: file.next_discipline_seq,
            next_entity_seq: file.next_entity_seq,
            disciplines,
            entities,
            has_entity,
            cross_entity,
        };
        graph.validate()?;
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingCache, EmbeddingVector};
    use crate::graph::{EntityCandidate, SemanticType};

    fn sample_graph() -> (KnowledgeGraph, EmbeddingCache) {
        let mut g = KnowledgeGraph::new(0.8);
        let d = g.add_discipline("Physics").unwrap();
        let mut cache = EmbeddingCache::new();
        for (i, values) in [[1.0, 0.0], [0.9, 0.43589]].iter().enumerate() {
            let label = format!("term-{i}");
            g.ingest_entities(
                &d,
                &[EntityCandidate {
                    label: label.clone(),
                    semantic_type: SemanticType::Phenomenon,
                    relevant: true,
                }],
            )
            .unwrap();
            let id = g.entity_by_label(&label).unwrap().id.clone();
            let key = format!("mock:m:{label}");
            cache.insert(key.clone(), &EmbeddingVector::unit(values.to_vec()).unwrap());
            g.set_embedding_ref(&id, key).unwrap();
        }
        g.link_cross_entities(0.8, &cache).unwrap();
        (g, cache)
    }

    #[test]
    fn snapshot_load_round_trip_is_identical() {
        let (g, _) = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.snapshot(&path).unwrap();
        let loaded = KnowledgeGraph::load(&path).unwrap();
        assert_eq!(g.tau(), loaded.tau());
        assert_eq!(
            g.entities().collect::<Vec<_>>(),
            loaded.entities().collect::<Vec<_>>()
        );
        assert_eq!(
            g.cross_entity_edges().collect::<Vec<_>>(),
            loaded.cross_entity_edges().collect::<Vec<_>>()
        );
        // weights preserved exactly (well under the 1e-12 bound)
        for ((_, _, w1), (_, _, w2)) in g.cross_entity_edges().zip(loaded.cross_entity_edges()) {
            assert_eq!(w1, w2);
        }
    }

    #[test]
    fn load_rejects_weight_at_or_below_tau() {
        let (g, _) = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.snapshot(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // push tau above the stored edge weight
        let tampered = text.replace("\"tau\": 0.8", "\"tau\": 0.9999");
        std::fs::write(&path, tampered).unwrap();
        match KnowledgeGraph::load(&path) {
            Err(Error::Integrity(msg)) => assert!(msg.contains("does not exceed tau")),
            other => panic!("expected IntegrityError, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_truncated_file_with_offset() {
        let (g, _) = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.snapshot(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        match KnowledgeGraph::load(&path) {
            Err(Error::Format { offset, .. }) => assert!(offset.is_some()),
            other => panic!("expected FormatError, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_unknown_schema_version() {
        let (g, _) = sample_graph();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.snapshot(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"schema_version\": 1", "\"schema_version\": 99"))
            .unwrap();
        assert!(matches!(
            KnowledgeGraph::load(&path),
            Err(Error::Format { .. })
        ));
    }
}
