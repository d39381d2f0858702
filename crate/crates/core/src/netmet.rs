//! Point-in-time follow-graph snapshots and per-user network features.
//!
//! Closeness and constraint use the undirected projection of the follow
//! graph; density counts directed ties. A snapshot taken at `t` holds the
//! edges created strictly before `t` and the users incident to them.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::Follow;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkFeatures {
    pub in_degree: usize,
    pub out_degree: usize,
    pub closeness: f64,
    pub constraint: f64,
    pub density: f64,
}

/// Timestamped follow edges, sorted by creation time.
#[derive(Debug, Clone, Default)]
pub struct TemporalGraph {
    nodes: Vec<String>,
    edges: Vec<(usize, usize, Timestamp)>,
}

impl TemporalGraph {
    /// Builds the graph, keeping the earliest timestamp of repeated edges.
    pub fn from_follows(follows: &[Follow]) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut nodes: Vec<String> = Vec::new();
        let mut earliest: HashMap<(usize, usize), (Timestamp, usize)> = HashMap::new();
        for (order, f) in follows.iter().enumerate() {
            if f.src == f.dst {
                return Err(Error::Validation(format!("self-follow by {:?}", f.src)));
            }
            let s = intern(&mut index, &mut nodes, &f.src);
            let d = intern(&mut index, &mut nodes, &f.dst);
            earliest
                .entry((s, d))
                .and_modify(|slot| {
                    if f.timestamp < slot.0 {
                        *slot = (f.timestamp, order);
                    }
                })
                .or_insert((f.timestamp, order));
        }
        let mut edges: Vec<(usize, usize, Timestamp, usize)> = earliest
            .into_iter()
            .map(|((s, d), (t, order))| (s, d, t, order))
            .collect();
        edges.sort_by_key(|&(_, _, t, order)| (t, order));
        Ok(TemporalGraph {
            nodes,
            edges: edges.into_iter().map(|(s, d, t, _)| (s, d, t)).collect(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// Graph of all edges with timestamp strictly before `t`.
    pub fn snapshot_at(&self, t: Timestamp) -> Snapshot {
        let mut cursor = self.cursor();
        cursor.advance_to(t);
        cursor.snapshot
    }

    /// Incremental snapshots for non-decreasing query times.
    pub fn cursor(&self) -> SnapshotCursor<'_> {
        SnapshotCursor {
            graph: self,
            next: 0,
            snapshot: Snapshot::default(),
        }
    }
}

pub struct SnapshotCursor<'g> {
    graph: &'g TemporalGraph,
    next: usize,
    snapshot: Snapshot,
}

impl SnapshotCursor<'_> {
    /// Adds edges created before `t`. Query times must not decrease.
    pub fn advance_to(&mut self, t: Timestamp) -> &Snapshot {
        while let Some(&(s, d, ts)) = self.graph.edges.get(self.next) {
            if ts >= t {
                break;
            }
            let s = self.snapshot.add_node(&self.graph.nodes[s]);
            let d = self.snapshot.add_node(&self.graph.nodes[d]);
            self.snapshot.add_edge(s, d);
            self.next += 1;
        }
        &self.snapshot
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }
}

fn intern<'a>(index: &mut HashMap<&'a str, usize>, nodes: &mut Vec<String>, name: &'a str) -> usize {
    *index.entry(name).or_insert_with(|| {
        nodes.push(name.to_string());
        nodes.len() - 1
    })
}

/// A static directed graph.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    names: Vec<String>,
    index: HashMap<String, usize>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    undirected: Vec<Vec<usize>>,
    edge_set: HashSet<(usize, usize)>,
}

impl Snapshot {
    /// Nodes named `"0"..n`, with the given directed edges. Self-loops and
    /// repeats are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Snapshot {
        let mut g = Snapshot::default();
        for i in 0..n {
            g.add_node(&i.to_string());
        }
        for &(s, d) in edges {
            g.add_edge(s, d);
        }
        g
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        self.undirected.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, src: usize, dst: usize) {
        if src == dst || !self.edge_set.insert((src, dst)) {
            return;
        }
        self.out[src].push(dst);
        self.inc[dst].push(src);
        if !self.edge_set.contains(&(dst, src)) {
            self.undirected[src].push(dst);
            self.undirected[dst].push(src);
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_set.len()
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edge_set.contains(&(src, dst))
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// Directed edges as `(src, dst)` name pairs, sorted.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut e: Vec<_> = self
            .edge_set
            .iter()
            .map(|&(s, d)| (self.names[s].clone(), self.names[d].clone()))
            .collect();
        e.sort();
        e
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        self.node(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn in_degree(&self, name: &str) -> Result<usize> {
        Ok(self.inc[self.lookup(name)?].len())
    }

    pub fn out_degree(&self, name: &str) -> Result<usize> {
        Ok(self.out[self.lookup(name)?].len())
    }

    pub fn closeness(&self, name: &str) -> Result<f64> {
        Ok(self.closeness_at(self.lookup(name)?))
    }

    pub fn constraint(&self, name: &str) -> Result<f64> {
        Ok(self.constraint_at(self.lookup(name)?))
    }

    pub fn ego_density(&self, name: &str) -> Result<f64> {
        Ok(self.density_at(self.lookup(name)?))
    }

    pub fn features(&self, name: &str) -> Result<NetworkFeatures> {
        Ok(self.features_at(self.lookup(name)?))
    }

    pub fn features_at(&self, u: usize) -> NetworkFeatures {
        NetworkFeatures {
            in_degree: self.inc[u].len(),
            out_degree: self.out[u].len(),
            closeness: self.closeness_at(u),
            constraint: self.constraint_at(u),
            density: self.density_at(u),
        }
    }

    /// Component-scaled closeness: `(r/(n-1)) · (r/Σ dist)` over the `r`
    /// nodes reachable from `u` in the undirected projection.
    pub fn closeness_at(&self, u: usize) -> f64 {
        let n = self.n_nodes();
        if n < 2 {
            return 0.0;
        }
        let mut dist = vec![usize::MAX; n];
        dist[u] = 0;
        let mut queue = VecDeque::from([u]);
        let mut reached = 0usize;
        let mut total = 0usize;
        while let Some(v) = queue.pop_front() {
            for &w in &self.undirected[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    reached += 1;
                    total += dist[w];
                    queue.push_back(w);
                }
            }
        }
        closeness_formula(reached, total, n)
    }

    /// Burt's constraint over the ego network of `u` and the users `u`
    /// follows, with unit undirected tie weights.
    pub fn constraint_at(&self, u: usize) -> f64 {
        let alters = &self.out[u];
        if alters.is_empty() {
            return 0.0;
        }
        let mut ego: Vec<usize> = Vec::with_capacity(alters.len() + 1);
        ego.push(u);
        ego.extend(alters.iter().copied());
        // ties of each ego member inside the ego network
        let degree: HashMap<usize, usize> = ego
            .iter()
            .map(|&i| (i, ego.iter().filter(|&&j| j != i && self.adjacent(i, j)).count()))
            .collect();
        let p = |i: usize, j: usize| -> f64 {
            if i != j && self.adjacent(i, j) {
                1.0 / degree[&i] as f64
            } else {
                0.0
            }
        };
        alters
            .iter()
            .map(|&j| {
                let indirect: f64 = alters
                    .iter()
                    .filter(|&&q| q != j)
                    .map(|&q| p(u, q) * p(q, j))
                    .sum();
                let c = p(u, j) + indirect;
                c * c
            })
            .sum()
    }

    /// Directed ties among the users `u` follows over `|S|(|S|-1)`.
    pub fn density_at(&self, u: usize) -> f64 {
        let alters = &self.out[u];
        let s = alters.len();
        if s < 2 {
            return 0.0;
        }
        let ties = alters
            .iter()
            .flat_map(|&a| alters.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| a != b && self.has_edge(a, b))
            .count();
        ties as f64 / (s * (s - 1)) as f64
    }
}

/// `(r/(n-1)) · (r/total)`; 0 when nothing is reachable.
pub fn closeness_formula(reached: usize, total_distance: usize, n: usize) -> f64 {
    if reached == 0 || n < 2 {
        return 0.0;
    }
    // one rounding: r² / ((n - 1) Σ dist)
    (reached * reached) as f64 / ((n - 1) * total_distance) as f64
}

pub fn snapshot_at(g: &TemporalGraph, t: Timestamp) -> Snapshot {
    g.snapshot_at(t)
}
