//! Immutable typed knowledge-graph store: adjacency, entity-type indexing,
//! hop distances, and triple verbalization. The graph is directed; hop
//! distances are measured on the undirected entity graph.

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $kind:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}{}", $kind, self.0)
            }
        }
    };
}

id_type!(EntityId, "e");
id_type!(RelationId, "r");
id_type!(TripleId, "t");
id_type!(TypeId, "ty");

/// A directed (head, relation, tail) fact. Self-loops are permitted; the
/// triple set of a graph contains no duplicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

struct EntityInfo {
    name: String,
    ty: TypeId,
}

pub struct KnowledgeGraph {
    entities: Vec<EntityInfo>,
    entity_by_name: HashMap<String, EntityId>,
    types: Vec<String>,
    relations: Vec<String>,
    relation_by_name: HashMap<String, RelationId>,
    triples: Vec<Triple>,
    triple_set: HashMap<Triple, TripleId>,
    in_edges: Vec<Vec<(EntityId, RelationId)>>,
    out_edges: Vec<Vec<(EntityId, RelationId)>>,
    undirected: Vec<Vec<EntityId>>,
    by_type: Vec<Vec<EntityId>>,
}

impl KnowledgeGraph {
    /// Parse a graph from the two TSV sources. `types_tsv` rows are
    /// `entity_name<TAB>type_label`; `triples_tsv` rows are
    /// `head_name<TAB>relation_name<TAB>tail_name`.
    pub fn parse(triples_tsv: &str, types_tsv: &str) -> Result<Self> {
        let mut entities: Vec<EntityInfo> = Vec::new();
        let mut entity_by_name: HashMap<String, EntityId> = HashMap::new();
        let mut types: Vec<String> = Vec::new();
        let mut type_by_name: HashMap<String, TypeId> = HashMap::new();

        for (lineno, line) in types_tsv.lines().enumerate() {
            let line_1 = lineno + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::MalformedRow {
                    line: line_1,
                    msg: format!("expected `entity<TAB>type`, got {:?}", line),
                });
            }
            let (name, ty_name) = (fields[0], fields[1]);
            if entity_by_name.contains_key(name) {
                return Err(Error::DuplicateTypeAssignment {
                    name: name.to_string(),
                    line: line_1,
                });
            }
            let ty = *type_by_name.entry(ty_name.to_string()).or_insert_with(|| {
                types.push(ty_name.to_string());
                TypeId(types.len() as u32 - 1)
            });
            let id = EntityId(entities.len() as u32);
            entities.push(EntityInfo {
                name: name.to_string(),
                ty,
            });
            entity_by_name.insert(name.to_string(), id);
        }

        let mut relations: Vec<String> = Vec::new();
        let mut relation_by_name: HashMap<String, RelationId> = HashMap::new();
        let mut triples: Vec<Triple> = Vec::new();
        let mut triple_set: HashMap<Triple, TripleId> = HashMap::new();

        for (lineno, line) in triples_tsv.lines().enumerate() {
            let line_1 = lineno + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::MalformedRow {
                    line: line_1,
                    msg: format!("expected `head<TAB>relation<TAB>tail`, got {:?}", line),
                });
            }
            let lookup = |name: &str| -> Result<EntityId> {
                entity_by_name
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::UnknownEntity {
                        name: name.to_string(),
                        line: line_1,
                    })
            };
            let head = lookup(fields[0])?;
            let tail = lookup(fields[2])?;
            let relation = *relation_by_name
                .entry(fields[1].to_string())
                .or_insert_with(|| {
                    relations.push(fields[1].to_string());
                    RelationId(relations.len() as u32 - 1)
                });
            let triple = Triple {
                head,
                relation,
                tail,
            };
            match triple_set.entry(triple) {
                Entry::Occupied(_) => {
                    return Err(Error::DuplicateTriple {
                        line: line_1,
                        head: fields[0].to_string(),
                        relation: fields[1].to_string(),
                        tail: fields[2].to_string(),
                    });
                }
                Entry::Vacant(slot) => {
                    slot.insert(TripleId(triples.len() as u32));
                    triples.push(triple);
                }
            }
        }

        if triples.is_empty() {
            return Err(Error::EmptyGraph);
        }

        let n = entities.len();
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        let mut undirected = vec![Vec::new(); n];
        for t in &triples {
            in_edges[t.tail.index()].push((t.head, t.relation));
            out_edges[t.head.index()].push((t.tail, t.relation));
            undirected[t.head.index()].push(t.tail);
            undirected[t.tail.index()].push(t.head);
        }
        for nbrs in &mut undirected {
            nbrs.sort_unstable();
            nbrs.dedup();
        }

        let mut by_type = vec![Vec::new(); types.len()];
        for (i, e) in entities.iter().enumerate() {
            by_type[e.ty.index()].push(EntityId(i as u32));
        }

        Ok(KnowledgeGraph {
            entities,
            entity_by_name,
            types,
            relations,
            relation_by_name,
            triples,
            triple_set,
            in_edges,
            out_edges,
            undirected,
            by_type,
        })
    }

    /// Load from files on disk.
    pub fn load(
        triples_path: impl AsRef<std::path::Path>,
        types_path: impl AsRef<std::path::Path>,
    ) -> Result<Self> {
        let read = |p: &std::path::Path| {
            std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))
        };
        let triples = read(triples_path.as_ref())?;
        let types = read(types_path.as_ref())?;
        Self::parse(&triples, &types)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn check_triple_id(&self, t: TripleId) -> Result<()> {
        if t.index() >= self.triples.len() {
            return Err(Error::InvalidId {
                kind: "triple",
                id: t.index(),
                count: self.triples.len(),
            });
        }
        Ok(())
    }

    pub fn triple(&self, t: TripleId) -> Triple {
        self.triples[t.index()]
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.entities[e.index()].name
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_by_name.get(name).copied()
    }

    pub fn entity_type(&self, e: EntityId) -> TypeId {
        self.entities[e.index()].ty
    }

    pub fn type_name(&self, ty: TypeId) -> &str {
        &self.types[ty.index()]
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t == name).map(|i| TypeId(i as u32))
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        &self.relations[r.index()]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_by_name.get(name).copied()
    }

    /// Incoming edges of an entity as (source, relation) pairs, in triple order.
    pub fn in_edges(&self, e: EntityId) -> &[(EntityId, RelationId)] {
        &self.in_edges[e.index()]
    }

    pub fn out_edges(&self, e: EntityId) -> &[(EntityId, RelationId)] {
        &self.out_edges[e.index()]
    }

    pub fn entities_of_type(&self, ty: TypeId) -> &[EntityId] {
        &self.by_type[ty.index()]
    }

    pub fn contains_triple(&self, t: &Triple) -> bool {
        self.triple_set.contains_key(t)
    }

    pub fn triple_id(&self, t: &Triple) -> Option<TripleId> {
        self.triple_set.get(t).copied()
    }

    /// Undirected entity-level BFS distances (in hops) from the entities
    /// incident to `from`. `None` means unreachable.
    pub fn hop_distances_from(&self, from: &[TripleId]) -> Result<Vec<Option<u32>>> {
        let mut dist: Vec<Option<u32>> = vec![None; self.entity_count()];
        let mut queue = VecDeque::new();
        for &t in from {
            self.check_triple_id(t)?;
            let tr = self.triple(t);
            for e in [tr.head, tr.tail] {
                if dist[e.index()].is_none() {
                    dist[e.index()] = Some(0);
                    queue.push_back(e);
                }
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].expect("queued nodes have distances");
            for &v in &self.undirected[u.index()] {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Minimum undirected hop count between any entity incident to `from` and
    /// any entity incident to `to`; 0 means a shared entity, `None` means
    /// unreachable.
    pub fn hop_distance(&self, from: &[TripleId], to: TripleId) -> Result<Option<u32>> {
        self.check_triple_id(to)?;
        let dist = self.hop_distances_from(from)?;
        let tr = self.triple(to);
        Ok(match (dist[tr.head.index()], dist[tr.tail.index()]) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        })
    }

    /// Uniform draw over the entities of a type; deterministic under a seeded rng.
    pub fn sample_entity_of_type(&self, type_label: &str, rng: &mut impl Rng) -> Result<EntityId> {
        let ty = self
            .type_id(type_label)
            .ok_or_else(|| Error::UnknownType(type_label.to_string()))?;
        let members = self.entities_of_type(ty);
        if members.is_empty() {
            return Err(Error::EmptyType(type_label.to_string()));
        }
        Ok(members[rng.gen_range(0..members.len())])
    }

    /// Deterministic token sequence of a triple: head tokens, relation tokens,
    /// tail tokens, lowercased, split on whitespace and underscores.
    pub fn verbalize_triple(&self, t: TripleId) -> Result<Vec<String>> {
        self.check_triple_id(t)?;
        let tr = self.triple(t);
        let mut tokens = tokenize(self.entity_name(tr.head));
        tokens.extend(tokenize(self.relation_name(tr.relation)));
        tokens.extend(tokenize(self.entity_name(tr.tail)));
        Ok(tokens)
    }

    /// Verbalization of an arbitrary triple (e.g. a perturbed negative that is
    /// not part of the graph's fact set).
    pub fn verbalize(&self, tr: &Triple) -> Vec<String> {
        let mut tokens = tokenize(self.entity_name(tr.head));
        tokens.extend(tokenize(self.relation_name(tr.relation)));
        tokens.extend(tokenize(self.entity_name(tr.tail)));
        tokens
    }

    pub fn to_triples_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(self.entity_name(t.head));
            out.push('\t');
            out.push_str(self.relation_name(t.relation));
            out.push('\t');
            out.push_str(self.entity_name(t.tail));
            out.push('\n');
        }
        out
    }

    pub fn to_types_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entities {
            out.push_str(&e.name);
            out.push('\t');
            out.push_str(&self.types[e.ty.index()]);
            out.push('\n');
        }
        out
    }
}

/// Lowercase and split a display name into tokens (whitespace and underscores).
pub fn tokenize(name: &str) -> Vec<String> {
    name.to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn small_graph() -> KnowledgeGraph {
        let types = "a\tperson\nb\tperson\nc\tcity\nd\tcity\n";
        let triples = "a\tknows\tb\nb\tlives_in\tc\nc\tnear\td\n";
        KnowledgeGraph::parse(triples, types).unwrap()
    }

    #[test]
    fn counts_and_adjacency() {
        let g = small_graph();
        assert_eq!(g.triple_count(), 3);
        assert_eq!(g.entity_count(), 4);
        assert_eq!(g.relation_count(), 3);
        let b = g.entity_id("b").unwrap();
        assert_eq!(g.in_edges(b).len(), 1);
        assert_eq!(g.out_edges(b).len(), 1);
        let a = g.entity_id("a").unwrap();
        assert_eq!(g.in_edges(a).len(), 0);
    }

    #[test]
    fn empty_triples_rejected() {
        let err = KnowledgeGraph::parse("", "a\tperson\n").unwrap_err();
        assert!(matches!(err, Error::EmptyGraph));
    }

    #[test]
    fn duplicate_triple_names_line() {
        let types = "a\tperson\nb\tperson\n";
        let triples = "a\tknows\tb\na\tknows\tb\n";
        match KnowledgeGraph::parse(triples, types).unwrap_err() {
            Error::DuplicateTriple { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_entity_and_malformed_row() {
        let types = "a\tperson\n";
        assert!(matches!(
            KnowledgeGraph::parse("a\tknows\tzz\n", types).unwrap_err(),
            Error::UnknownEntity { .. }
        ));
        assert!(matches!(
            KnowledgeGraph::parse("a\tknows\n", types).unwrap_err(),
            Error::MalformedRow { line: 1, .. }
        ));
        assert!(matches!(
            KnowledgeGraph::parse("a\tknows\ta\n", "a\tperson\na\thuman\n").unwrap_err(),
            Error::DuplicateTypeAssignment { line: 2, .. }
        ));
    }

    #[test]
    fn hop_distance_cases() {
        let g = small_graph();
        // Shares entity b.
        assert_eq!(g.hop_distance(&[TripleId(0)], TripleId(1)).unwrap(), Some(0));
        // Chain a-b-c-d: from (a,knows,b) to (c,near,d) is b->c = 1 hop.
        assert_eq!(g.hop_distance(&[TripleId(0)], TripleId(2)).unwrap(), Some(1));

        let types = "a\tx\nb\tx\nc\tx\nd\tx\n";
        let triples = "a\tr\tb\nc\tr\td\n";
        let g2 = KnowledgeGraph::parse(triples, types).unwrap();
        assert_eq!(g2.hop_distance(&[TripleId(0)], TripleId(1)).unwrap(), None);
    }

    #[test]
    fn hop_distance_matches_bfs_oracle_and_is_symmetric() {
        // Independent BFS over the undirected entity graph.
        fn oracle(edges: &[(usize, usize)], n: usize, src: usize) -> Vec<Option<u32>> {
            let mut adj = vec![Vec::new(); n];
            for &(a, b) in edges {
                adj[a].push(b);
                adj[b].push(a);
            }
            let mut dist = vec![None; n];
            dist[src] = Some(0u32);
            let mut q = std::collections::VecDeque::from([src]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(dist[u].unwrap() + 1);
                        q.push_back(v);
                    }
                }
            }
            dist
        }

        let mut rng = rng_from(41);
        use rand::Rng;
        for _ in 0..10 {
            let n = rng.gen_range(5..=50);
            let m = rng.gen_range(n..3 * n);
            let mut types = String::new();
            for i in 0..n {
                types.push_str(&format!("n{i}\tthing\n"));
            }
            let mut triples = String::new();
            let mut seen = std::collections::HashSet::new();
            let mut edges = Vec::new();
            for _ in 0..m {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                if seen.insert((a, b)) {
                    triples.push_str(&format!("n{a}\tr\tn{b}\n"));
                    edges.push((a, b));
                }
            }
            if edges.is_empty() {
                continue;
            }
            let g = KnowledgeGraph::parse(&triples, &types).unwrap();

            // Self-loop triples give singleton entity sets, making entity-pair
            // distances directly observable.
            let ent_dist = |a: usize, b: usize| -> Option<u32> {
                oracle(&edges, n, a)[b]
            };
            for t in 0..edges.len().min(5) {
                let (th, tt) = edges[t];
                let d = g
                    .hop_distance(&[TripleId(0)], TripleId(t as u32))
                    .unwrap();
                let (fh, ft) = edges[0];
                let expect = [ent_dist(fh, th), ent_dist(fh, tt), ent_dist(ft, th), ent_dist(ft, tt)]
                    .into_iter()
                    .flatten()
                    .min();
                assert_eq!(d, expect);
            }
            // Symmetry and triangle inequality on entity pairs.
            for _ in 0..10 {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                let c = rng.gen_range(0..n);
                let dab = ent_dist(a, b);
                assert_eq!(dab, ent_dist(b, a));
                if let (Some(ab), Some(bc), Some(ac)) = (dab, ent_dist(b, c), ent_dist(a, c)) {
                    assert!(ac <= ab + bc);
                }
            }
        }
    }

    #[test]
    fn sampling_is_uniform_and_type_safe() {
        let g = small_graph();
        let mut rng = rng_from(5);
        // Singleton behavior needs a type with one member.
        let types = "a\tperson\nb\tcity\nc\tcity\nd\tcity\ne\tcity\n";
        let triples = "a\tin\tb\n";
        let g1 = KnowledgeGraph::parse(triples, types).unwrap();
        for _ in 0..10 {
            assert_eq!(
                g1.sample_entity_of_type("person", &mut rng).unwrap(),
                g1.entity_id("a").unwrap()
            );
        }
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let e = g1.sample_entity_of_type("city", &mut rng).unwrap();
            assert_eq!(g1.type_name(g1.entity_type(e)), "city");
            counts[e.index() - 1] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.25).abs() < 0.05 * 0.25 + 0.02, "freq {freq}");
        }
        assert!(matches!(
            g.sample_entity_of_type("nope", &mut rng),
            Err(Error::UnknownType(_))
        ));
    }

    #[test]
    fn verbalization() {
        let types = "Al Jardine\tperson\nguitarist\trole\nx\tthing\n";
        let triples = "Al Jardine\tis_a\tguitarist\nx\tr\tx\n";
        let g = KnowledgeGraph::parse(triples, types).unwrap();
        assert_eq!(
            g.verbalize_triple(TripleId(0)).unwrap(),
            vec!["al", "jardine", "is", "a", "guitarist"]
        );
        let selfloop = g.verbalize_triple(TripleId(1)).unwrap();
        assert_eq!(selfloop, vec!["x", "r", "x"]);
        assert_eq!(
            g.verbalize_triple(TripleId(0)).unwrap(),
            g.verbalize_triple(TripleId(0)).unwrap()
        );
    }

    #[test]
    fn tsv_round_trip() {
        let g = small_graph();
        let g2 = KnowledgeGraph::parse(&g.to_triples_tsv(), &g.to_types_tsv()).unwrap();
        assert_eq!(g.to_triples_tsv(), g2.to_triples_tsv());
        assert_eq!(g.to_types_tsv(), g2.to_types_tsv());
        assert_eq!(g.triples(), g2.triples());
    }
}
