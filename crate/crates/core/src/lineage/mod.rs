//! Detections, label images and the lineage graph shared by every other module.

mod region;
mod tracks;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use region::{BBox, Detection, Frame, LabelFrame, Run, SegmentationSequence, SequenceError};
pub use tracks::{
    build_tracks, graph_stats, validate_binary_divisions, DivisionViolation, GraphStats, Track,
};

/// Mask label; 0 is background.
pub type Label = u16;

/// Identity of a detection: labels are only unique within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub frame: u32,
    pub label: Label,
}

impl NodeKey {
    pub const fn new(frame: u32, label: Label) -> Self {
        Self { frame, label }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.frame, self.label)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("label 0 is reserved for background: node {0}")]
    BackgroundLabel(NodeKey),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeKey),
    #[error("edge {parent} -> {child} references a node not in the graph")]
    UnknownNode { parent: NodeKey, child: NodeKey },
    #[error("edge {parent} -> {child} does not go forward in time")]
    NotForward { parent: NodeKey, child: NodeKey },
    #[error("node {node} has more than one parent ({first} and {second})")]
    MultipleParents {
        node: NodeKey,
        first: NodeKey,
        second: NodeKey,
    },
}

/// Acyclic oriented graph of detections. Every edge points strictly forward
/// in time and every node has at most one parent; out-degree is unbounded.
///
/// Immutable once built. Nodes are kept sorted by key and children lists are
/// sorted, so iteration order is deterministic.
#[derive(Debug, Clone, Default)]
pub struct LineageGraph {
    keys: Vec<NodeKey>,
    index: HashMap<NodeKey, u32>,
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    edge_count: usize,
}

impl PartialEq for LineageGraph {
    fn eq(&self, other: &Self) -> bool {
        self.keys == other.keys && self.parent == other.parent
    }
}

impl Eq for LineageGraph {}

impl LineageGraph {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a graph, rejecting anything that breaks the lineage invariants.
    /// Duplicate edges are collapsed.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeKey>,
        edges: impl IntoIterator<Item = (NodeKey, NodeKey)>,
    ) -> Result<Self, GraphError> {
        let mut keys: Vec<NodeKey> = nodes.into_iter().collect();
        keys.sort_unstable();
        for w in keys.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateNode(w[0]));
            }
        }
        if let Some(k) = keys.iter().find(|k| k.label == 0) {
            return Err(GraphError::BackgroundLabel(*k));
        }
        let index: HashMap<NodeKey, u32> = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (*k, i as u32))
            .collect();
        let mut parent: Vec<Option<u32>> = vec![None; keys.len()];
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); keys.len()];
        let mut edge_count = 0;
        for (p, c) in edges {
            let (Some(&pi), Some(&ci)) = (index.get(&p), index.get(&c)) else {
                return Err(GraphError::UnknownNode {
                    parent: p,
                    child: c,
                });
            };
            if p.frame >= c.frame {
                return Err(GraphError::NotForward {
                    parent: p,
                    child: c,
                });
            }
            match parent[ci as usize] {
                Some(existing) if existing == pi => continue,
                Some(existing) => {
                    return Err(GraphError::MultipleParents {
                        node: c,
                        first: keys[existing as usize],
                        second: p,
                    })
                }
                None => {}
            }
            parent[ci as usize] = Some(pi);
            children[pi as usize].push(ci);
            edge_count += 1;
        }
        for list in &mut children {
            list.sort_unstable();
        }
        let graph = Self {
            keys,
            index,
            parent,
            children,
            edge_count,
        };
        debug_assert!(graph.is_acyclic());
        Ok(graph)
    }

    /// The same node set without any edges.
    pub fn without_edges(&self) -> Self {
        Self {
            keys: self.keys.clone(),
            index: self.index.clone(),
            parent: vec![None; self.keys.len()],
            children: vec![Vec::new(); self.keys.len()],
            edge_count: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.keys.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Nodes in (frame, label) order.
    pub fn nodes(&self) -> &[NodeKey] {
        &self.keys
    }

    pub fn contains(&self, key: NodeKey) -> bool {
        self.index.contains_key(&key)
    }

    pub fn index_of(&self, key: NodeKey) -> Option<usize> {
        self.index.get(&key).map(|&i| i as usize)
    }

    pub fn key(&self, index: usize) -> NodeKey {
        self.keys[index]
    }

    pub fn parent(&self, key: NodeKey) -> Option<NodeKey> {
        let i = self.index_of(key)?;
        self.parent[i].map(|p| self.keys[p as usize])
    }

    pub fn children(&self, key: NodeKey) -> impl Iterator<Item = NodeKey> + '_ {
        let list: &[u32] = match self.index_of(key) {
            Some(i) => &self.children[i],
            None => &[],
        };
        list.iter().map(|&c| self.keys[c as usize])
    }

    pub fn out_degree(&self, key: NodeKey) -> usize {
        self.index_of(key).map_or(0, |i| self.children[i].len())
    }

    pub fn has_edge(&self, parent: NodeKey, child: NodeKey) -> bool {
        match (self.index_of(parent), self.index_of(child)) {
            (Some(p), Some(c)) => self.parent[c] == Some(p as u32),
            _ => false,
        }
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> impl Iterator<Item = (NodeKey, NodeKey)> + '_ {
        self.children.iter().enumerate().flat_map(move |(p, cs)| {
            cs.iter()
                .map(move |&c| (self.keys[p], self.keys[c as usize]))
        })
    }

    /// Largest frame index holding a node.
    pub fn last_frame(&self) -> Option<u32> {
        self.keys.last().map(|k| k.frame)
    }

    pub(crate) fn parent_index(&self, i: usize) -> Option<usize> {
        self.parent[i].map(|p| p as usize)
    }

    pub(crate) fn children_indices(&self, i: usize) -> &[u32] {
        &self.children[i]
    }

    fn is_acyclic(&self) -> bool {
        self.edges().all(|(p, c)| p.frame < c.frame)
    }
}
