//! Seeded rod-cell colony simulator producing label masks and the exact
//! lineage behind them.
//!
//! Cells are capsules that grow linearly, divide after a sampled number of
//! frames into two daughters rotated apart by the snap angle, are pushed
//! apart until disjoint, and vanish once their centre leaves the chamber
//! through the left or right border.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lineage::{
    GraphError, Label, LabelFrame, LineageGraph, NodeKey, SegmentationSequence, SequenceError,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid colony parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColonyParams {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub initial_cells: u32,
    /// Mean number of frames a cell is present before dividing; `None`
    /// disables division.
    pub division_time: Option<f64>,
    /// Half-width of the uniform jitter added to each sampled division time.
    pub division_jitter: f64,
    /// Tip-to-tip length at birth.
    pub rod_length: f64,
    pub rod_width: f64,
    /// Total angle between the two daughters right after division.
    pub snap_angle_deg: f64,
    /// Length gained per frame.
    pub growth_rate: f64,
    /// Orientation of initial cells is drawn from `±initial_angle_deg`.
    pub initial_angle_deg: f64,
    /// Remove cells whose centre crosses the left or right border.
    pub exit_at_borders: bool,
    pub frames: u32,
    /// Minimum gap in pixels the overlap relaxation keeps between cells.
    pub spacing: f64,
    pub relax_iterations: u32,
}

impl Default for ColonyParams {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 256,
            height: 96,
            initial_cells: 4,
            division_time: Some(8.0),
            division_jitter: 1.5,
            rod_length: 16.0,
            rod_width: 6.0,
            snap_angle_deg: 30.0,
            growth_rate: 2.0,
            initial_angle_deg: 15.0,
            exit_at_borders: true,
            frames: 40,
            spacing: 1.0,
            relax_iterations: 60,
        }
    }
}

impl ColonyParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::Params(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return fail("chamber dimensions must be positive");
        }
        if self.frames == 0 {
            return fail("frames must be positive");
        }
        if self.initial_cells == 0 {
            return fail("initial_cells must be positive");
        }
        if !(self.rod_width > 0.0 && self.rod_length >= self.rod_width) {
            return fail("rod width must be positive and not exceed the rod length");
        }
        if (self.rod_width.ceil() as u32) > self.height {
            return fail("rods are wider than the chamber");
        }
        if let Some(d) = self.division_time {
            if !(d - self.division_jitter >= 2.0) {
                return fail("division time minus jitter must be at least 2 frames");
            }
        }
        if !(self.division_jitter >= 0.0 && self.growth_rate >= 0.0 && self.spacing >= 0.0) {
            return fail("jitter, growth rate and spacing must be non-negative");
        }
        if !(self.snap_angle_deg.is_finite() && self.initial_angle_deg.is_finite()) {
            return fail("angles must be finite");
        }
        Ok(())
    }
}

/// Something that stopped generation early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationWarning {
    /// First frame that could not be produced.
    pub frame: u32,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticColony {
    pub sequence: SegmentationSequence,
    pub graph: LineageGraph,
    pub warnings: Vec<GenerationWarning>,
}

#[derive(Debug, Clone)]
struct Cell {
    label: Label,
    center: [f64; 2],
    angle: f64,
    length: f64,
    age: u32,
    division_age: Option<u32>,
}

impl Cell {
    fn axis(&self) -> [f64; 2] {
        [self.angle.cos(), self.angle.sin()]
    }

    fn half_segment(&self, width: f64) -> f64 {
        ((self.length - width) / 2.0).max(0.0)
    }

    fn segment(&self, width: f64) -> ([f64; 2], [f64; 2]) {
        let h = self.half_segment(width);
        let [ux, uy] = self.axis();
        let [cx, cy] = self.center;
        ([cx - ux * h, cy - uy * h], [cx + ux * h, cy + uy * h])
    }
}

struct Simulator<'p> {
    params: &'p ColonyParams,
    rng: ChaCha8Rng,
    next_label: u32,
}

impl<'p> Simulator<'p> {
    fn division_age(&mut self) -> Option<u32> {
        let mean = self.params.division_time?;
        let j = self.params.division_jitter;
        let raw = if j > 0.0 {
            mean + Uniform::new_inclusive(-j, j).sample(&mut self.rng)
        } else {
            mean
        };
        Some((raw.round() as u32).max(2))
    }

    fn new_label(&mut self) -> Option<Label> {
        let l = Label::try_from(self.next_label).ok()?;
        self.next_label += 1;
        Some(l)
    }

    fn relax(&self, cells: &mut [Cell]) {
        let p = self.params;
        let (w, h) = (p.rod_width, p.height as f64);
        let min_gap = w + p.spacing;
        let clamp_y = |c: &mut Cell| {
            let lo = w / 2.0;
            c.center[1] = c.center[1].clamp(lo, (h - lo).max(lo));
        };
        cells.iter_mut().for_each(clamp_y);
        let reach = cells.iter().map(|c| c.length).fold(0.0, f64::max) + min_gap;
        for _ in 0..p.relax_iterations {
            let mut order: Vec<usize> = (0..cells.len()).collect();
            order.sort_by(|&a, &b| {
                cells[a].center[0]
                    .total_cmp(&cells[b].center[0])
                    .then(a.cmp(&b))
            });
            let mut moved = false;
            for (oi, &i) in order.iter().enumerate() {
                for &j in &order[oi + 1..] {
                    if cells[j].center[0] - cells[i].center[0] > reach {
                        break;
                    }
                    let (a0, a1) = cells[i].segment(w);
                    let (b0, b1) = cells[j].segment(w);
                    let (pa, pb) = closest_points(a0, a1, b0, b1);
                    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                    let d = dx.hypot(dy);
                    if d >= min_gap {
                        continue;
                    }
                    let (nx, ny) = if d > 1e-9 {
                        (dx / d, dy / d)
                    } else {
                        let ci = cells[i].center;
                        let cj = cells[j].center;
                        let (ex, ey) = (cj[0] - ci[0], cj[1] - ci[1]);
                        let e = ex.hypot(ey);
                        if e > 1e-9 {
                            (ex / e, ey / e)
                        } else {
                            (1.0, 0.0)
                        }
                    };
                    let push = (min_gap - d) / 2.0 + 1e-6;
                    cells[i].center[0] -= nx * push;
                    cells[i].center[1] -= ny * push;
                    cells[j].center[0] += nx * push;
                    cells[j].center[1] += ny * push;
                    clamp_y(&mut cells[i]);
                    clamp_y(&mut cells[j]);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }

    fn rasterize(&self, cells: &[Cell]) -> LabelFrame {
        let p = self.params;
        let mut img = LabelFrame::blank(p.width, p.height);
        let r = p.rod_width / 2.0;
        let mut by_label: Vec<&Cell> = cells.iter().collect();
        by_label.sort_by_key(|c| c.label);
        for c in by_label {
            let (a, b) = c.segment(p.rod_width);
            let x0 = (a[0].min(b[0]) - r).floor().max(0.0) as u32;
            let x1 = ((a[0].max(b[0]) + r).ceil().max(0.0) as u32).min(p.width);
            let y0 = (a[1].min(b[1]) - r).floor().max(0.0) as u32;
            let y1 = ((a[1].max(b[1]) + r).ceil().max(0.0) as u32).min(p.height);
            for y in y0..y1 {
                for x in x0..x1 {
                    let q = [x as f64 + 0.5, y as f64 + 0.5];
                    if img.get(x, y) == 0 && point_segment_distance(q, a, b) <= r {
                        img.set(x, y, c.label);
                    }
                }
            }
        }
        img
    }
}

/// Simulate a colony. Generation stops early (with a warning) when a cell
/// cannot be given any pixel or labels run out; everything produced up to
/// that frame is returned.
pub fn generate(params: &ColonyParams) -> Result<SyntheticColony, SynthError> {
    params.validate()?;
    let mut sim = Simulator {
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        next_label: 1,
    };
    let (w, h) = (params.width as f64, params.height as f64);
    let half_angle = params.initial_angle_deg.to_radians();
    let snap = params.snap_angle_deg.to_radians() / 2.0;

    let mut cells = Vec::new();
    for _ in 0..params.initial_cells {
        let x = Uniform::new_inclusive(0.3 * w, 0.7 * w).sample(&mut sim.rng);
        let y = Uniform::new_inclusive(0.0, h).sample(&mut sim.rng);
        let angle = if half_angle > 0.0 {
            Uniform::new_inclusive(-half_angle, half_angle).sample(&mut sim.rng)
        } else {
            0.0
        };
        let division_age = sim.division_age();
        let label = sim.new_label().expect("initial labels fit");
        cells.push(Cell {
            label,
            center: [x, y],
            angle,
            length: params.rod_length,
            age: 0,
            division_age,
        });
    }
    sim.relax(&mut cells);

    let mut images = Vec::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut warnings = Vec::new();

    for t in 0..params.frames {
        if t > 0 {
            let mut next = Vec::with_capacity(cells.len());
            let mut overflow = false;
            for mut c in std::mem::take(&mut cells) {
                c.age += 1;
                c.length += params.growth_rate;
                if c.division_age.is_some_and(|d| c.age >= d) {
                    let [ux, uy] = c.axis();
                    let offset = c.length / 4.0;
                    let sign = if Uniform::new(0u8, 2).sample(&mut sim.rng) == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    for side in [-1.0, 1.0] {
                        let Some(label) = sim.new_label() else {
                            overflow = true;
                            break;
                        };
                        let division_age = sim.division_age();
                        let daughter = Cell {
                            label,
                            center: [
                                c.center[0] + side * ux * offset,
                                c.center[1] + side * uy * offset,
                            ],
                            angle: c.angle + side * sign * snap,
                            length: params.rod_length,
                            age: 0,
                            division_age,
                        };
                        edges.push((NodeKey::new(t - 1, c.label), NodeKey::new(t, label)));
                        next.push(daughter);
                    }
                } else {
                    edges.push((NodeKey::new(t - 1, c.label), NodeKey::new(t, c.label)));
                    next.push(c);
                }
            }
            if overflow {
                warnings.push(GenerationWarning {
                    frame: t,
                    message: "ran out of 16-bit labels".into(),
                });
                edges.retain(|(_, v)| v.frame < t);
                break;
            }
            sim.relax(&mut next);
            if params.exit_at_borders {
                next.retain(|c| (0.0..w).contains(&c.center[0]));
                let alive: std::collections::HashSet<Label> =
                    next.iter().map(|c| c.label).collect();
                edges.retain(|(_, v)| v.frame < t || alive.contains(&v.label));
            }
            cells = next;
        }
        let img = sim.rasterize(&cells);
        let mut present = vec![false; sim.next_label as usize];
        for &l in img.labels() {
            present[l as usize] = true;
        }
        if let Some(c) = cells.iter().find(|c| !present[c.label as usize]) {
            warnings.push(GenerationWarning {
                frame: t,
                message: format!("no room to place cell {} (chamber overflow)", c.label),
            });
            edges.retain(|(_, v)| v.frame < t);
            break;
        }
        nodes.extend(cells.iter().map(|c| NodeKey::new(t, c.label)));
        images.push(img);
    }

    let sequence = SegmentationSequence::new(images, 1.0)?;
    let graph = LineageGraph::new(nodes, edges)?;
    Ok(SyntheticColony {
        sequence,
        graph,
        warnings,
    })
}

fn point_segment_distance(q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (q[0] - a[0] - s * dx).hypot(q[1] - a[1] - s * dy)
}

/// Closest points between segments `p0p1` and `q0q1`.
fn closest_points(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let d2 = [q1[0] - q0[0], q1[1] - q0[1]];
    let r = [p0[0] - q0[0], p0[1] - q0[1]];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, r));
    const EPS: f64 = 1e-12;
    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = dot(d1, r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    (
        [p0[0] + d1[0] * s, p0[1] + d1[1] * s],
        [q0[0] + d2[0] * t, q0[1] + d2[1] * t],
    )
}
