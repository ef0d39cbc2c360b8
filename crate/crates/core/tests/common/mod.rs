#![allow(dead_code)]

use std::collections::BTreeSet;

use cellbench::io::LineageRow;
use cellbench::lineage::{Label, LabelFrame, LineageGraph, NodeKey, SegmentationSequence};
use cellbench::matching::NodeMatching;
use rand::Rng;

pub fn key(frame: u32, label: Label) -> NodeKey {
    NodeKey::new(frame, label)
}

/// One-row frames with each label on its own pixel, in the given order.
pub fn point_frames(frames: &[Vec<Label>]) -> SegmentationSequence {
    let width = frames.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let images = frames
        .iter()
        .map(|labels| {
            let mut row = labels.clone();
            row.resize(width, 0);
            LabelFrame::new(width as u32, 1, row).unwrap()
        })
        .collect();
    SegmentationSequence::new(images, 1.0).unwrap()
}

/// Random lineage forest with binary divisions, deaths and late births,
/// stopping before it would exceed `max_nodes`.
pub fn random_lineage(
    rng: &mut impl Rng,
    max_nodes: usize,
) -> (SegmentationSequence, LineageGraph) {
    let frames = rng.gen_range(6..=24);
    let mut alive: Vec<Label> = (1..=rng.gen_range(1..=3)).collect();
    let mut per_frame = vec![alive.clone()];
    let mut edges = Vec::new();
    let mut total = alive.len();
    for t in 1..frames {
        let mut next = Vec::new();
        let mut frame_edges = Vec::new();
        for &u in &alive {
            let r: f64 = rng.gen();
            let children = if r < 0.08 {
                0
            } else if r < 0.33 {
                2
            } else {
                1
            };
            for _ in 0..children {
                let v = next.len() as Label + 1;
                next.push(v);
                frame_edges.push((key(t - 1, u), key(t, v)));
            }
        }
        if rng.gen_bool(0.1) {
            next.push(next.len() as Label + 1);
        }
        if next.is_empty() || total + next.len() > max_nodes {
            break;
        }
        total += next.len();
        edges.extend(frame_edges);
        per_frame.push(next.clone());
        alive = next;
    }
    let seq = point_frames(&per_frame);
    let graph = LineageGraph::new(seq.node_keys(), edges).unwrap();
    (seq, graph)
}

/// Induced edges on the kept frames by exhaustive ancestor-path search:
/// `(u, v)` qualifies when `u` is an ancestor of `v` and every node strictly
/// between them sits on a dropped frame. Keys keep original frame numbers.
pub fn induced_edges_oracle(g: &LineageGraph, kept: &[u32]) -> BTreeSet<(NodeKey, NodeKey)> {
    let kept_set: BTreeSet<u32> = kept.iter().copied().collect();
    let on_kept: Vec<NodeKey> = g
        .nodes()
        .iter()
        .copied()
        .filter(|n| kept_set.contains(&n.frame))
        .collect();
    let mut out = BTreeSet::new();
    for &u in &on_kept {
        for &v in &on_kept {
            if v.frame <= u.frame {
                continue;
            }
            let mut path = Vec::new();
            let mut cur = g.parent(v);
            while let Some(a) = cur {
                if a == u {
                    break;
                }
                path.push(a);
                cur = g.parent(a);
            }
            if cur == Some(u) && path.iter().all(|a| !kept_set.contains(&a.frame)) {
                out.insert((u, v));
            }
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Node sets of the division-free runs of `g`, found by walking back from
/// every node to the start of its run.
pub fn naive_tracks(g: &LineageGraph) -> Vec<BTreeSet<NodeKey>> {
    let head = |mut n: NodeKey| loop {
        match g.parent(n) {
            Some(p) if g.out_degree(p) == 1 && p.frame + 1 == n.frame => n = p,
            _ => return n,
        }
    };
    let mut groups: std::collections::BTreeMap<NodeKey, BTreeSet<NodeKey>> = Default::default();
    for &n in g.nodes() {
        groups.entry(head(n)).or_default().insert(n);
    }
    groups.into_values().collect()
}

/// Complete-track counts `(tp, fp, fn)` by set comparison.
pub fn ct_oracle(gt: &LineageGraph, pred: &LineageGraph, m: &NodeMatching) -> (u64, u64, u64) {
    let pred_tracks = naive_tracks(pred);
    let gt_tracks = naive_tracks(gt);
    let mut hit = BTreeSet::new();
    let mut tp = 0;
    for t in &gt_tracks {
        let image: Option<BTreeSet<NodeKey>> = t.iter().map(|&n| m.pred_of(n)).collect();
        if let Some(image) = image {
            if image.len() == t.len() {
                if let Some(i) = pred_tracks.iter().position(|p| *p == image) {
                    tp += 1;
                    hit.insert(i);
                }
            }
        }
    }
    let fp = (pred_tracks.len() - hit.len()) as u64;
    (tp, fp, gt_tracks.len() as u64 - tp)
}

/// Valid random lineage table: parents end before their children begin.
pub fn random_rows(rng: &mut impl Rng) -> Vec<LineageRow> {
    let n = rng.gen_range(0..30);
    let mut rows: Vec<LineageRow> = Vec::with_capacity(n);
    for id in 1..=n as u32 {
        let begin = rng.gen_range(0..200);
        let end = begin + rng.gen_range(0..50);
        let candidates: Vec<u32> = rows
            .iter()
            .filter(|r| r.end < begin)
            .map(|r| r.track_id)
            .collect();
        let parent = if !candidates.is_empty() && rng.gen_bool(0.6) {
            candidates[rng.gen_range(0..candidates.len())]
        } else {
            0
        };
        rows.push(LineageRow::new(id, begin, end, parent));
    }
    rows
}

pub fn random_mask(rng: &mut impl Rng) -> LabelFrame {
    let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
    let labels = (0..w * h)
        .map(|_| match rng.gen_range(0..4) {
            0 => 0,
            1 => u16::MAX,
            _ => rng.gen(),
        })
        .collect();
    LabelFrame::new(w, h, labels).unwrap()
}
