use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Label, NodeKey};

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("label raster has {actual} samples, expected {width}x{height}")]
    RasterSize {
        width: u32,
        height: u32,
        actual: usize,
    },
    #[error("frame {frame} is {width}x{height}, sequence is {expected_width}x{expected_height}")]
    DimensionMismatch {
        frame: usize,
        width: u32,
        height: u32,
        expected_width: u32,
        expected_height: u32,
    },
    #[error("frame interval must be positive, got {0}")]
    Interval(f64),
}

/// Horizontal run of pixels `[col, col + len)` on one image row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub row: u32,
    pub col: u32,
    pub len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

/// One labelled region of a frame. Pixels are stored as row runs; centroid
/// and area are computed once at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: Label,
    /// `(x, y)` mean of pixel coordinates.
    pub centroid: [f64; 2],
    pub area: u64,
    pub bbox: BBox,
    pub runs: Vec<Run>,
}

impl Detection {
    fn from_runs(label: Label, runs: Vec<Run>) -> Self {
        let mut area = 0u64;
        let mut sum_x = 0f64;
        let mut sum_y = 0f64;
        let mut bbox = BBox {
            min_x: u32::MAX,
            min_y: u32::MAX,
            max_x: 0,
            max_y: 0,
        };
        for r in &runs {
            let n = r.len as u64;
            area += n;
            // sum of col..col+len-1
            sum_x += (n * r.col as u64) as f64 + (n * (n - 1) / 2) as f64;
            sum_y += (n * r.row as u64) as f64;
            bbox.min_x = bbox.min_x.min(r.col);
            bbox.max_x = bbox.max_x.max(r.col + r.len - 1);
            bbox.min_y = bbox.min_y.min(r.row);
            bbox.max_y = bbox.max_y.max(r.row);
        }
        let centroid = [sum_x / area as f64, sum_y / area as f64];
        Self {
            label,
            centroid,
            area,
            bbox,
            runs,
        }
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.col..r.col + r.len).map(move |x| (x, r.row)))
    }
}

/// A 2D label image: 0 is background, every other value names one region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFrame {
    width: u32,
    height: u32,
    labels: Vec<u16>,
}

impl LabelFrame {
    pub fn new(width: u32, height: u32, labels: Vec<u16>) -> Result<Self, SequenceError> {
        if labels.len() != width as usize * height as usize {
            return Err(SequenceError::RasterSize {
                width,
                height,
                actual: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn blank(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.labels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, label: u16) {
        let w = self.width;
        self.labels[(y * w + x) as usize] = label;
    }

    /// Rewrites every label through `map`; labels missing from the map become
    /// background.
    pub fn relabel(&self, map: &BTreeMap<Label, Label>) -> LabelFrame {
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    0
                } else {
                    map.get(&l).copied().unwrap_or(0)
                }
            })
            .collect();
        LabelFrame {
            width: self.width,
            height: self.height,
            labels,
        }
    }

    /// Extracts one [`Detection`] per distinct nonzero label, sorted by label.
    pub fn regions(&self) -> Vec<Detection> {
        let mut runs: BTreeMap<Label, Vec<Run>> = BTreeMap::new();
        let w = self.width as usize;
        for (row, line) in self.labels.chunks(w.max(1)).enumerate() {
            let mut col = 0usize;
            while col < line.len() {
                let l = line[col];
                let start = col;
                while col < line.len() && line[col] == l {
                    col += 1;
                }
                if l != 0 {
                    runs.entry(l).or_default().push(Run {
                        row: row as u32,
                        col: start as u32,
                        len: (col - start) as u32,
                    });
                }
            }
        }
        runs.into_iter()
            .map(|(l, r)| Detection::from_runs(l, r))
            .collect()
    }
}

/// A label image together with its extracted detections.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    image: LabelFrame,
    detections: Vec<Detection>,
}

impl Frame {
    pub fn new(image: LabelFrame) -> Self {
        let detections = image.regions();
        Self { image, detections }
    }

    pub fn image(&self) -> &LabelFrame {
        &self.image
    }

    /// Detections sorted by label.
    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn detection(&self, label: Label) -> Option<&Detection> {
        self.detections
            .binary_search_by_key(&label, |d| d.label)
            .ok()
            .map(|i| &self.detections[i])
    }
}

/// Ordered frames of one time-lapse, all sharing the same dimensions.
///
/// Frames are reference counted so that subsampled views share pixel data
/// with the sequence they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationSequence {
    frames: Vec<Arc<Frame>>,
    frame_interval_minutes: f64,
}

impl SegmentationSequence {
    pub fn new(
        images: Vec<LabelFrame>,
        frame_interval_minutes: f64,
    ) -> Result<Self, SequenceError> {
        Self::from_frames(
            images
                .into_iter()
                .map(|i| Arc::new(Frame::new(i)))
                .collect(),
            frame_interval_minutes,
        )
    }

    pub fn from_frames(
        frames: Vec<Arc<Frame>>,
        frame_interval_minutes: f64,
    ) -> Result<Self, SequenceError> {
        if !(frame_interval_minutes > 0.0) {
            return Err(SequenceError::Interval(frame_interval_minutes));
        }
        if let Some(first) = frames.first() {
            let (ew, eh) = (first.image.width, first.image.height);
            for (i, f) in frames.iter().enumerate() {
                if f.image.width != ew || f.image.height != eh {
                    return Err(SequenceError::DimensionMismatch {
                        frame: i,
                        width: f.image.width,
                        height: f.image.height,
                        expected_width: ew,
                        expected_height: eh,
                    });
                }
            }
        }
        Ok(Self {
            frames,
            frame_interval_minutes,
        })
    }

    pub fn empty() -> Self {
        Self {
            frames: Vec::new(),
            frame_interval_minutes: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> &Frame {
        &self.frames[index]
    }

    pub fn frames(&self) -> &[Arc<Frame>] {
        &self.frames
    }

    pub fn frame_interval_minutes(&self) -> f64 {
        self.frame_interval_minutes
    }

    /// `(width, height)` of the frames, `None` for an empty sequence.
    pub fn dimensions(&self) -> Option<(u32, u32)> {
        self.frames.first().map(|f| (f.image.width, f.image.height))
    }

    pub fn detection(&self, key: NodeKey) -> Option<&Detection> {
        self.frames.get(key.frame as usize)?.detection(key.label)
    }

    /// Every detection key in (frame, label) order.
    pub fn node_keys(&self) -> impl Iterator<Item = NodeKey> + '_ {
        self.frames.iter().enumerate().flat_map(|(t, f)| {
            f.detections
                .iter()
                .map(move |d| NodeKey::new(t as u32, d.label))
        })
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }
}
