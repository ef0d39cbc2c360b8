use serde::{Deserialize, Serialize};

use super::{LineageGraph, NodeKey};

/// Maximal division-free chain of detections on consecutive frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub id: u32,
    pub begin_frame: u32,
    pub end_frame: u32,
    /// 0 when the track has no parent.
    pub parent_track: u32,
    pub members: Vec<NodeKey>,
}

/// Cuts the graph after every node that does not continue as a single child
/// on the next frame: divisions, disappearances and frame gaps.
///
/// Track ids are assigned 1.. in order of the first member's key.
pub fn build_tracks(graph: &LineageGraph) -> Vec<Track> {
    let n = graph.node_count();
    let continues = |i: usize| -> Option<usize> {
        match graph.children_indices(i) {
            [c] if graph.key(*c as usize).frame == graph.key(i).frame + 1 => Some(*c as usize),
            _ => None,
        }
    };
    let starts_track = |i: usize| match graph.parent_index(i) {
        None => true,
        Some(p) => continues(p) != Some(i),
    };

    let mut track_of = vec![0u32; n];
    let mut tracks = Vec::new();
    for start in (0..n).filter(|&i| starts_track(i)) {
        let id = tracks.len() as u32 + 1;
        let mut members = vec![graph.key(start)];
        track_of[start] = id;
        let mut cur = start;
        while let Some(next) = continues(cur) {
            track_of[next] = id;
            members.push(graph.key(next));
            cur = next;
        }
        tracks.push(Track {
            id,
            begin_frame: members[0].frame,
            end_frame: members[members.len() - 1].frame,
            parent_track: 0,
            members,
        });
    }
    for t in &mut tracks {
        let first = graph.index_of(t.members[0]).expect("member in graph");
        if let Some(p) = graph.parent_index(first) {
            t.parent_track = track_of[p];
        }
    }
    tracks
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisionViolation {
    pub node: NodeKey,
    pub out_degree: usize,
}

/// Nodes with more than two children. Legal in general, but never expected in
/// native-interval ground truth.
pub fn validate_binary_divisions(graph: &LineageGraph) -> Vec<DivisionViolation> {
    graph
        .nodes()
        .iter()
        .map(|&k| (k, graph.out_degree(k)))
        .filter(|&(_, d)| d > 2)
        .map(|(node, out_degree)| DivisionViolation { node, out_degree })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub instances: u64,
    pub edges: u64,
    pub tracks: u64,
    pub divisions: u64,
    pub disappearances: u64,
    pub cells_per_frame: Vec<u64>,
}

/// Counts for a graph. `frame_count` fixes the sequence length; when `None`
/// the last occupied frame is taken as the final frame. Disappearances are
/// childless nodes on any frame but the final one.
pub fn graph_stats(graph: &LineageGraph, frame_count: Option<u32>) -> GraphStats {
    let frames = frame_count
        .or_else(|| graph.last_frame().map(|f| f + 1))
        .unwrap_or(0);
    let mut cells_per_frame = vec![0u64; frames as usize];
    let mut divisions = 0;
    let mut disappearances = 0;
    for &k in graph.nodes() {
        if let Some(c) = cells_per_frame.get_mut(k.frame as usize) {
            *c += 1;
        }
        match graph.out_degree(k) {
            0 if k.frame + 1 < frames => disappearances += 1,
            d if d >= 2 => divisions += 1,
            _ => {}
        }
    }
    GraphStats {
        instances: graph.node_count() as u64,
        edges: graph.edge_count() as u64,
        tracks: build_tracks(graph).len() as u64,
        divisions,
        disappearances,
        cells_per_frame,
    }
}
