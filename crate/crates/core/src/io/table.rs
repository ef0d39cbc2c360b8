use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::IoError;

/// One `L B E P` record: track id, first frame, last frame, parent track id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineageRow {
    pub track_id: u32,
    pub begin: u32,
    pub end: u32,
    pub parent: u32,
}

impl LineageRow {
    pub const fn new(track_id: u32, begin: u32, end: u32, parent: u32) -> Self {
        Self {
            track_id,
            begin,
            end,
            parent,
        }
    }
}

/// Parses a lineage table. Blank lines are skipped; rows are returned in
/// file order after referential integrity has been checked.
pub fn read_lineage_table(reader: impl BufRead) -> Result<Vec<LineageRow>, IoError> {
    let mut rows = Vec::new();
    let mut line_of = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(IoError::Parse {
                line: lineno,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0u32; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|e| IoError::Parse {
                line: lineno,
                message: format!("{f:?}: {e}"),
            })?;
        }
        let row = LineageRow::new(vals[0], vals[1], vals[2], vals[3]);
        if row.track_id == 0 {
            return Err(IoError::Parse {
                line: lineno,
                message: "track id 0 is reserved".into(),
            });
        }
        if row.begin > row.end {
            return Err(IoError::Parse {
                line: lineno,
                message: format!("begin frame {} after end frame {}", row.begin, row.end),
            });
        }
        if line_of.insert(row.track_id, lineno).is_some() {
            return Err(IoError::Integrity {
                line: lineno,
                message: format!("duplicate track id {}", row.track_id),
            });
        }
        rows.push(row);
    }
    check_parents(&rows, &line_of)?;
    Ok(rows)
}

fn check_parents(rows: &[LineageRow], line_of: &HashMap<u32, usize>) -> Result<(), IoError> {
    let by_id: HashMap<u32, &LineageRow> = rows.iter().map(|r| (r.track_id, r)).collect();
    for r in rows.iter().filter(|r| r.parent != 0) {
        let line = line_of.get(&r.track_id).copied().unwrap_or(0);
        match by_id.get(&r.parent) {
            None => {
                return Err(IoError::Integrity {
                    line,
                    message: format!("track {} has unknown parent {}", r.track_id, r.parent),
                })
            }
            Some(p) if p.end >= r.begin => {
                return Err(IoError::Integrity {
                    line,
                    message: format!(
                        "parent {} ends at frame {}, not before track {} begins at {}",
                        p.track_id, p.end, r.track_id, r.begin
                    ),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

pub fn write_lineage_table(rows: &[LineageRow], mut writer: impl Write) -> Result<(), IoError> {
    for r in rows {
        writeln!(writer, "{} {} {} {}", r.track_id, r.begin, r.end, r.parent)?;
    }
    Ok(())
}
