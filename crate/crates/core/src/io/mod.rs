//! Lineage tables (`track.txt`), 16-bit PGM label masks and dataset
//! directories made of both.

mod pgm;
mod table;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lineage::{
    build_tracks, GraphError, Label, LabelFrame, LineageGraph, NodeKey, SegmentationSequence,
    SequenceError,
};

pub use pgm::{
    decode as decode_label_frame, encode as encode_label_frame, read_label_frame, write_label_frame,
};
pub use table::{read_lineage_table, write_lineage_table, LineageRow};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Integrity { line: usize, message: String },
    #[error("PGM format: {0}")]
    Format(String),
    #[error("PGM raster truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("declared track regions missing from masks: {}", fmt_keys(.missing))]
    MissingRegions { missing: Vec<NodeKey> },
    #[error("graph and masks disagree: {0}")]
    Consistency(String),
    #[error("track id {0} does not fit a 16-bit mask label")]
    LabelOverflow(u32),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: Box<IoError> },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

fn fmt_keys(keys: &[NodeKey]) -> String {
    let shown: Vec<String> = keys.iter().take(10).map(|k| k.to_string()).collect();
    let more = keys.len().saturating_sub(10);
    if more > 0 {
        format!("{} and {more} more", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

fn at(path: &Path) -> impl FnOnce(IoError) -> IoError + '_ {
    move |e| IoError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

/// Builds the lineage graph described by a table over a mask sequence.
///
/// Every detection becomes a node. Each row contributes edges between its
/// consecutive frames, and a parent id links the mother's last detection to
/// the daughter's first.
pub fn assemble_graph(
    rows: &[LineageRow],
    frames: &SegmentationSequence,
) -> Result<LineageGraph, IoError> {
    let mut missing = Vec::new();
    let mut edges = Vec::new();
    let by_id: HashMap<u32, &LineageRow> = rows.iter().map(|r| (r.track_id, r)).collect();
    for r in rows {
        let Ok(label) = Label::try_from(r.track_id) else {
            return Err(IoError::LabelOverflow(r.track_id));
        };
        for f in r.begin..=r.end {
            if frames.detection(NodeKey::new(f, label)).is_none() {
                missing.push(NodeKey::new(f, label));
            } else if f > r.begin {
                edges.push((NodeKey::new(f - 1, label), NodeKey::new(f, label)));
            }
        }
        if r.parent != 0 {
            let p = by_id.get(&r.parent).ok_or_else(|| IoError::Integrity {
                line: 0,
                message: format!("track {} has unknown parent {}", r.track_id, r.parent),
            })?;
            let plabel =
                Label::try_from(p.track_id).map_err(|_| IoError::LabelOverflow(p.track_id))?;
            edges.push((NodeKey::new(p.end, plabel), NodeKey::new(r.begin, label)));
        }
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        missing.dedup();
        return Err(IoError::MissingRegions { missing });
    }
    Ok(LineageGraph::new(frames.node_keys(), edges)?)
}

/// Converts a graph over `seq` into a lineage table plus masks labelled by
/// track id.
///
/// When every track already carries a single label that no other track uses,
/// the masks are returned unchanged and node keys survive the round trip.
/// Otherwise masks are relabelled with the ids from [`build_tracks`].
pub fn export_tracks(
    graph: &LineageGraph,
    seq: &SegmentationSequence,
) -> Result<(Vec<LineageRow>, SegmentationSequence), IoError> {
    let detections: Vec<NodeKey> = seq.node_keys().collect();
    if detections.as_slice() != graph.nodes() {
        return Err(IoError::Consistency(format!(
            "graph has {} nodes, masks have {} detections or different keys",
            graph.node_count(),
            detections.len()
        )));
    }
    let tracks = build_tracks(graph);

    let mut seen = BTreeMap::new();
    let keeps_labels = tracks.iter().all(|t| {
        let l = t.members[0].label;
        t.members.iter().all(|m| m.label == l) && seen.insert(l, t.id).is_none()
    });

    if keeps_labels {
        let id_of: HashMap<u32, u32> = tracks
            .iter()
            .map(|t| (t.id, t.members[0].label as u32))
            .collect();
        let mut rows: Vec<LineageRow> = tracks
            .iter()
            .map(|t| {
                LineageRow::new(
                    id_of[&t.id],
                    t.begin_frame,
                    t.end_frame,
                    id_of.get(&t.parent_track).copied().unwrap_or(0),
                )
            })
            .collect();
        rows.sort_by_key(|r| r.track_id);
        return Ok((rows, seq.clone()));
    }

    if let Some(t) = tracks.last().filter(|t| t.id > Label::MAX as u32) {
        return Err(IoError::LabelOverflow(t.id));
    }
    let mut maps: Vec<BTreeMap<Label, Label>> = vec![BTreeMap::new(); seq.len()];
    for t in &tracks {
        for m in &t.members {
            maps[m.frame as usize].insert(m.label, t.id as Label);
        }
    }
    let images = seq
        .frames()
        .iter()
        .zip(&maps)
        .map(|(f, map)| f.image().relabel(map))
        .collect();
    let relabelled = SegmentationSequence::new(images, seq.frame_interval_minutes())?;
    let rows = tracks
        .iter()
        .map(|t| LineageRow::new(t.id, t.begin_frame, t.end_frame, t.parent_track))
        .collect();
    Ok((rows, relabelled))
}

/// File naming inside a dataset directory: `<prefix><index:0digits><suffix>`
/// masks plus one lineage table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetLayout {
    pub mask_prefix: String,
    pub mask_digits: usize,
    pub mask_suffix: String,
    pub table_name: String,
    pub frame_interval_minutes: f64,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            mask_prefix: "mask".into(),
            mask_digits: 4,
            mask_suffix: ".pgm".into(),
            table_name: "track.txt".into(),
            frame_interval_minutes: 1.0,
        }
    }
}

impl DatasetLayout {
    pub fn mask_name(&self, index: usize) -> String {
        format!(
            "{}{:0width$}{}",
            self.mask_prefix,
            index,
            self.mask_suffix,
            width = self.mask_digits
        )
    }
}

/// A loaded dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sequence: SegmentationSequence,
    pub rows: Vec<LineageRow>,
    pub graph: LineageGraph,
}

/// Reads consecutively numbered masks starting at 0 and the lineage table.
/// A missing table is treated as an edgeless lineage.
pub fn read_dataset(dir: &Path, layout: &DatasetLayout) -> Result<Dataset, IoError> {
    let mut paths = Vec::new();
    loop {
        let p = dir.join(layout.mask_name(paths.len()));
        if !p.is_file() {
            break;
        }
        paths.push(p);
    }
    let images = paths
        .par_iter()
        .map(|p| {
            let f = fs::File::open(p).map_err(IoError::from).map_err(at(p))?;
            read_label_frame(BufReader::new(f)).map_err(at(p))
        })
        .collect::<Result<Vec<LabelFrame>, IoError>>()?;
    let sequence = SegmentationSequence::new(images, layout.frame_interval_minutes)?;
    let table = dir.join(&layout.table_name);
    let rows = if table.is_file() {
        let f = fs::File::open(&table)
            .map_err(IoError::from)
            .map_err(at(&table))?;
        read_lineage_table(BufReader::new(f)).map_err(at(&table))?
    } else {
        Vec::new()
    };
    let graph = assemble_graph(&rows, &sequence)?;
    Ok(Dataset {
        sequence,
        rows,
        graph,
    })
}

/// Writes `graph` over `seq` as masks and a lineage table. Returns the rows
/// that were written.
pub fn write_dataset(
    dir: &Path,
    layout: &DatasetLayout,
    graph: &LineageGraph,
    seq: &SegmentationSequence,
) -> Result<Vec<LineageRow>, IoError> {
    let (rows, masks) = export_tracks(graph, seq)?;
    fs::create_dir_all(dir)?;
    masks
        .frames()
        .par_iter()
        .enumerate()
        .try_for_each(|(i, f)| {
            let p = dir.join(layout.mask_name(i));
            write_atomic(&p, &encode_label_frame(f.image())).map_err(at(&p))
        })?;
    let mut text = Vec::new();
    write_lineage_table(&rows, &mut text)?;
    let p = dir.join(&layout.table_name);
    write_atomic(&p, &text).map_err(at(&p))?;
    Ok(rows)
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Width-5 frames with one pixel per label at column `label - 1`.
    fn sequence(frames: &[&[Label]]) -> SegmentationSequence {
        let images = frames
            .iter()
            .map(|ls| {
                let mut f = LabelFrame::blank(5, 1);
                for &l in *ls {
                    f.set(l as u32 - 1, 0, l);
                }
                f
            })
            .collect();
        SegmentationSequence::new(images, 1.0).unwrap()
    }

    #[test]
    fn single_track_three_frames() {
        let seq = sequence(&[&[1], &[1], &[1]]);
        let g = assemble_graph(&[LineageRow::new(1, 0, 2, 0)], &seq).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
    }

    #[test]
    fn mother_and_two_daughters() {
        let seq = sequence(&[&[1], &[1], &[1], &[2, 3]]);
        let rows = [
            LineageRow::new(1, 0, 2, 0),
            LineageRow::new(2, 3, 3, 1),
            LineageRow::new(3, 3, 3, 1),
        ];
        let g = assemble_graph(&rows, &seq).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (5, 4));
        assert_eq!(crate::lineage::graph_stats(&g, None).divisions, 1);
    }

    #[test]
    fn missing_region_is_listed() {
        let seq = sequence(&[&[1], &[]]);
        match assemble_graph(&[LineageRow::new(1, 0, 1, 0)], &seq) {
            Err(IoError::MissingRegions { missing }) => {
                assert_eq!(missing, vec![NodeKey::new(1, 1)])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn export_keeps_track_labels() {
        let seq = sequence(&[&[1], &[1], &[2, 3]]);
        let rows = vec![
            LineageRow::new(1, 0, 1, 0),
            LineageRow::new(2, 2, 2, 1),
            LineageRow::new(3, 2, 2, 1),
        ];
        let g = assemble_graph(&rows, &seq).unwrap();
        let (out, masks) = export_tracks(&g, &seq).unwrap();
        assert_eq!(out, rows);
        assert_eq!(masks, seq);
    }

    #[test]
    fn export_relabels_mixed_label_tracks() {
        // one chain whose label changes from 4 to 2
        let seq = sequence(&[&[4], &[2]]);
        let g =
            LineageGraph::new(seq.node_keys(), [(NodeKey::new(0, 4), NodeKey::new(1, 2))]).unwrap();
        let (rows, masks) = export_tracks(&g, &seq).unwrap();
        assert_eq!(rows, vec![LineageRow::new(1, 0, 1, 0)]);
        let back = assemble_graph(&rows, &masks).unwrap();
        assert_eq!(
            back.edges().collect::<Vec<_>>(),
            vec![(NodeKey::new(0, 1), NodeKey::new(1, 1))]
        );
    }

    #[test]
    fn empty_graph_exports_nothing() {
        let (rows, masks) =
            export_tracks(&LineageGraph::empty(), &SegmentationSequence::empty()).unwrap();
        assert!(rows.is_empty());
        assert!(masks.is_empty());
    }

    #[test]
    fn dataset_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let seq = sequence(&[&[1], &[1], &[2, 3]]);
        let rows = [
            LineageRow::new(1, 0, 1, 0),
            LineageRow::new(2, 2, 2, 1),
            LineageRow::new(3, 2, 2, 1),
        ];
        let g = assemble_graph(&rows, &seq).unwrap();
        let layout = DatasetLayout::default();
        write_dataset(dir.path(), &layout, &g, &seq).unwrap();
        assert!(dir.path().join("mask0002.pgm").is_file());
        let back = read_dataset(dir.path(), &layout).unwrap();
        assert_eq!(back.graph, g);
        assert_eq!(back.sequence, seq);
    }
}
