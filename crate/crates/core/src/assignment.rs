//! Linear assignment.
//!
//! [`solve`] runs the shortest-augmenting-path Hungarian method with dual
//! potentials (O(n^3)) on a square padding of the matrix, then walks the
//! equality subgraph of the optimal duals to pick the lexicographically
//! smallest optimal assignment, so ties are broken by lowest (row, col).

use std::collections::VecDeque;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("no feasible assignment: row {row} cannot be completed")]
    Infeasible { row: usize },
    #[error("cost matrix is {rows}x{cols} but {len} cells were given")]
    Shape {
        rows: usize,
        cols: usize,
        len: usize,
    },
}

/// Dense cost matrix; `None` marks a forbidden cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    cells: Vec<Option<T>>,
}

impl<T: Scalar> CostMatrix<T> {
    /// All cells forbidden.
    pub fn forbidden(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![None; rows * cols],
        }
    }

    pub fn from_cells(
        rows: usize,
        cols: usize,
        cells: Vec<Option<T>>,
    ) -> Result<Self, AssignmentError> {
        if cells.len() != rows * cols {
            return Err(AssignmentError::Shape {
                rows,
                cols,
                len: cells.len(),
            });
        }
        Ok(Self { rows, cols, cells })
    }

    /// Every cell feasible.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, AssignmentError> {
        let cols = rows.first().map_or(0, Vec::len);
        let cells: Vec<Option<T>> = rows
            .iter()
            .flat_map(|r| r.iter().copied().map(Some))
            .collect();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AssignmentError::Shape {
                rows: rows.len(),
                cols,
                len: cells.len(),
            });
        }
        Self::from_cells(rows.len(), cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cost: Option<T>) {
        self.cells[row * self.cols + col] = cost;
    }

    /// Smallest feasible cost.
    pub fn min_cost(&self) -> Option<T> {
        self.cells
            .iter()
            .flatten()
            .copied()
            .reduce(|a, b| a.min_val(b))
    }

    /// Square `(n + m)` matrix for linking `n` sources to `m` targets with
    /// birth and death alternatives.
    ///
    /// Layout: linking block top-left; death block top-right with `death` on
    /// the diagonal; birth block bottom-left with `birth` on the diagonal;
    /// bottom-right is the transpose of the linking pattern filled with the
    /// minimum linking cost. Off-diagonal birth/death cells are forbidden.
    pub fn augment(&self, birth: T, death: T) -> Self {
        self.augment_with_fill(birth, death, self.min_cost())
    }

    /// [`augment`](Self::augment) with an explicit bottom-right fill, for
    /// solving independent blocks of a larger problem consistently.
    pub fn augment_with_fill(&self, birth: T, death: T, fill: Option<T>) -> Self {
        let (n, m) = (self.rows, self.cols);
        let size = n + m;
        let mut out = Self::forbidden(size, size);
        for i in 0..n {
            for j in 0..m {
                if let Some(c) = self.get(i, j) {
                    out.set(i, j, Some(c));
                    out.set(n + j, m + i, fill);
                }
            }
            out.set(i, m + i, Some(death));
        }
        for j in 0..m {
            out.set(n + j, j, Some(birth));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// Column assigned to each row; `None` only when rows outnumber columns.
    pub row_to_col: Vec<Option<usize>>,
    pub cost: T,
}

/// Minimum-cost assignment of every row (or every column, if there are fewer
/// columns). Among optimal assignments the one whose column sequence is
/// lexicographically smallest is returned.
pub fn solve<T: Scalar>(costs: &CostMatrix<T>) -> Result<Assignment<T>, AssignmentError> {
    let (rows, cols) = (costs.rows, costs.cols);
    let n = rows.max(cols);
    if n == 0 {
        return Ok(Assignment {
            row_to_col: vec![None; rows],
            cost: T::zero(),
        });
    }
    // padding rows/cols cost zero and absorb the surplus side
    let cell = |i: usize, j: usize| -> Option<T> {
        if i < rows && j < cols {
            costs.get(i, j)
        } else {
            Some(T::zero())
        }
    };

    let (u, v, mut col_of) = hungarian(n, &cell)?;
    lexicographic_repair(n, &cell, &u, &v, &mut col_of);

    let mut cost = T::zero();
    let mut row_to_col = vec![None; rows];
    for (i, slot) in row_to_col.iter_mut().enumerate() {
        let j = col_of[i];
        if j < cols {
            cost = cost + costs.get(i, j).expect("assigned cell is feasible");
            *slot = Some(j);
        }
    }
    Ok(Assignment { row_to_col, cost })
}

type Duals<T> = (Vec<T>, Vec<T>, Vec<usize>);

/// Returns row potentials, column potentials (both 0-based) and the column
/// assigned to each row.
fn hungarian<T: Scalar>(
    n: usize,
    cell: &impl Fn(usize, usize) -> Option<T>,
) -> Result<Duals<T>, AssignmentError> {
    let zero = T::zero();
    // 1-based with index 0 as the virtual root column
    let mut u = vec![zero; n + 1];
    let mut v = vec![zero; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv: Vec<Option<T>> = vec![None; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = None);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if let Some(c) = cell(i0 - 1, j - 1) {
                    let cur = c - u[i0] - v[j];
                    if minv[j].is_none_or(|m| cur < m) {
                        minv[j] = Some(cur);
                        way[j] = j0;
                    }
                }
                if let Some(m) = minv[j] {
                    if delta.is_none_or(|d| m < d) {
                        delta = Some(m);
                        j1 = j;
                    }
                }
            }
            let Some(delta) = delta else {
                return Err(AssignmentError::Infeasible { row: i - 1 });
            };
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] = u[row_of[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(m) = minv[j] {
                    minv[j] = Some(m - delta);
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    Ok((u[1..].to_vec(), v[1..].to_vec(), col_of))
}

/// Every optimal assignment uses only cells with zero reduced cost under the
/// optimal duals. Row by row, take the smallest tight column that still
/// admits a perfect matching of the remaining rows, repairing the current
/// matching along an alternating path.
fn lexicographic_repair<T: Scalar>(
    n: usize,
    cell: &impl Fn(usize, usize) -> Option<T>,
    u: &[T],
    v: &[T],
    col_of: &mut [usize],
) {
    let scale = (0..n)
        .flat_map(|i| (0..n).filter_map(move |j| cell(i, j)))
        .fold(
            T::zero(),
            |acc, c| if c.abs_val() > acc { c.abs_val() } else { acc },
        );
    let tol = T::tie_tolerance(scale);
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| cell(i, j).is_some_and(|c| (c - u[i] - v[j]).abs_val() <= tol))
                .collect()
        })
        .collect();
    for i in 0..n {
        debug_assert!(tight[i].contains(&col_of[i]));
    }

    let mut row_of = vec![0usize; n];
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }
    let mut fixed_col = vec![false; n];
    for i in 0..n {
        for &j in &tight[i] {
            if fixed_col[j] {
                continue;
            }
            if col_of[i] == j {
                break;
            }
            // give j to i; the displaced row must reach i's old column
            let displaced = row_of[j];
            let target = col_of[i];
            if let Some(path) =
                alternating_path(displaced, target, j, &tight, col_of, &row_of, &fixed_col, i)
            {
                // path: columns taken in order by displaced, then successive rows
                let mut row = displaced;
                for &c in &path {
                    let next = row_of[c];
                    col_of[row] = c;
                    row_of[c] = row;
                    row = next;
                }
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
        }
        fixed_col[col_of[i]] = true;
    }
}

/// BFS over tight cells from `start` row to `target` column, never using
/// fixed columns, `blocked` (the column being handed out) or row `skip`.
#[allow(clippy::too_many_arguments)]
fn alternating_path(
    start: usize,
    target: usize,
    blocked: usize,
    tight: &[Vec<usize>],
    col_of: &[usize],
    row_of: &[usize],
    fixed_col: &[bool],
    skip: usize,
) -> Option<Vec<usize>> {
    let n = tight.len();
    let mut prev_col: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([(start, usize::MAX)]);
    while let Some((row, via)) = queue.pop_front() {
        for &c in &tight[row] {
            if seen[c] || fixed_col[c] || c == blocked || c == col_of[row] {
                continue;
            }
            seen[c] = true;
            prev_col[c] = Some(via);
            if c == target {
                let mut path = vec![c];
                let mut cur = c;
                while let Some(p) = prev_col[cur].filter(|&p| p != usize::MAX) {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            let next = row_of[c];
            if next != skip {
                queue.push_back((next, c));
            }
        }
    }
    None
}
