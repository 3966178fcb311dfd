//! ASCII grid maps.
//!
//! Format: a `version <n>` line, a `name <domain>` line, then the rows of the
//! map. `#` is a wall, `.` a free cell; any other character marks a free cell
//! carrying that landmark symbol. Blank lines and lines starting with `;` are
//! ignored.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

/// Cardinal movement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    North,
    South,
    West,
    East,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::North, Dir::South, Dir::West, Dir::East];

    fn delta(self) -> (i32, i32) {
        match self {
            Dir::North => (-1, 0),
            Dir::South => (1, 0),
            Dir::West => (0, -1),
            Dir::East => (0, 1),
        }
    }
}

/// Free cells of a map with dense position ids, neighbor tables and landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub name: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    /// `(row, col)` of every free cell, indexed by position id.
    cells: Vec<(usize, usize)>,
    /// Position id of each `(row, col)`, `None` for walls.
    index: Vec<Option<u8>>,
    /// Neighbor position per direction; the cell itself when blocked.
    neighbors: Vec<[u8; 4]>,
    landmarks: BTreeMap<char, Vec<u8>>,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<GridSpec> {
        let mut version = None;
        let mut name = None;
        let mut rows: Vec<(usize, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if let Some(v) = line.strip_prefix("version ") {
                version = Some(v.trim().parse::<u32>().map_err(|_| Error::Map {
                    line: i + 1,
                    reason: format!("bad version {v:?}"),
                })?);
            } else if let Some(n) = line.strip_prefix("name ") {
                name = Some(n.trim().to_string());
            } else {
                rows.push((i + 1, line));
            }
        }
        let version = version.ok_or(Error::Map {
            line: 1,
            reason: "missing version line".into(),
        })?;
        let name = name.ok_or(Error::Map {
            line: 1,
            reason: "missing name line".into(),
        })?;
        let height = rows.len();
        let width = rows.iter().map(|(_, r)| r.chars().count()).max().unwrap_or(0);
        if height == 0 || width == 0 {
            return Err(Error::Map {
                line: 1,
                reason: "empty map".into(),
            });
        }
        let mut cells = Vec::new();
        let mut index = alloc::vec![None; width * height];
        let mut landmarks: BTreeMap<char, Vec<u8>> = BTreeMap::new();
        for (r, (line_no, row)) in rows.iter().enumerate() {
            for (c, ch) in row.chars().enumerate() {
                if ch == '#' || ch == ' ' {
                    continue;
                }
                if cells.len() >= u8::MAX as usize {
                    return Err(Error::Map {
                        line: *line_no,
                        reason: "more than 255 free cells".into(),
                    });
                }
                let id = cells.len() as u8;
                index[r * width + c] = Some(id);
                cells.push((r, c));
                if ch != '.' {
                    landmarks.entry(ch).or_default().push(id);
                }
            }
        }
        let mut neighbors = Vec::with_capacity(cells.len());
        for (id, &(r, c)) in cells.iter().enumerate() {
            let mut n = [id as u8; 4];
            for (k, d) in Dir::ALL.iter().enumerate() {
                let (dr, dc) = d.delta();
                let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < height && (nc as usize) < width {
                    if let Some(j) = index[nr as usize * width + nc as usize] {
                        n[k] = j;
                    }
                }
            }
            neighbors.push(n);
        }
        Ok(GridSpec {
            name,
            version,
            width,
            height,
            cells,
            index,
            neighbors,
            landmarks,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn coords(&self, pos: u8) -> (usize, usize) {
        self.cells[pos as usize]
    }

    pub fn position_at(&self, row: usize, col: usize) -> Option<u8> {
        if row < self.height && col < self.width {
            self.index[row * self.width + col]
        } else {
            None
        }
    }

    /// Neighbor in a direction, or `pos` itself when a wall is in the way.
    #[inline]
    pub fn neighbor(&self, pos: u8, dir: Dir) -> u8 {
        let k = match dir {
            Dir::North => 0,
            Dir::South => 1,
            Dir::West => 2,
            Dir::East => 3,
        };
        self.neighbors[pos as usize][k]
    }

    /// Chebyshev distance between two cells.
    pub fn distance(&self, a: u8, b: u8) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }

    /// Cells carrying landmark symbol `ch`.
    pub fn landmark(&self, ch: char) -> &[u8] {
        self.landmarks.get(&ch).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The single cell of a landmark that must appear exactly once.
    pub fn unique_landmark(&self, ch: char) -> Result<u8> {
        match self.landmark(ch) {
            [p] => Ok(*p),
            other => Err(Error::Map {
                line: 0,
                reason: format!("landmark {ch:?} appears {} times", other.len()),
            }),
        }
    }

    pub fn landmark_symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.landmarks.keys().copied()
    }

    /// Renders the map with `overlay(pos)` replacing free-cell symbols.
    pub fn render(&self, mut overlay: impl FnMut(u8) -> Option<char>) -> String {
        let mut out = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let ch = match self.index[r * self.width + c] {
                    None => '#',
                    Some(p) => overlay(p).unwrap_or_else(|| {
                        self.landmarks
                            .iter()
                            .find(|(_, cells)| cells.contains(&p))
                            .map(|(&ch, _)| ch)
                            .unwrap_or('.')
                    }),
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    /// Cells reachable from `start` through `passable` cells.
    pub fn reachable_from(&self, start: u8, passable: impl Fn(u8) -> bool) -> Vec<bool> {
        let mut seen = alloc::vec![false; self.num_cells()];
        let mut stack = alloc::vec![start];
        seen[start as usize] = true;
        while let Some(p) = stack.pop() {
            for d in Dir::ALL {
                let q = self.neighbor(p, d);
                if !seen[q as usize] && passable(q) {
                    seen[q as usize] = true;
                    stack.push(q);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: &str = "version 1\nname demo\n#####\n#A..#\n#.#B#\n#####\n";

    #[test]
    fn parses_cells_and_landmarks() {
        let g = GridSpec::parse(MAP).unwrap();
        assert_eq!((g.width, g.height, g.num_cells()), (5, 4, 5));
        let a = g.unique_landmark('A').unwrap();
        let b = g.unique_landmark('B').unwrap();
        assert_eq!(g.coords(a), (1, 1));
        assert_eq!(g.coords(b), (2, 3));
        assert_eq!(g.neighbor(a, Dir::North), a, "wall blocks");
        assert_eq!(g.coords(g.neighbor(a, Dir::East)), (1, 2));
        assert_eq!(g.distance(a, b), 2);
        assert_eq!(g.render(|_| None), "#####\n#A..#\n#.#B#\n#####\n");
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(GridSpec::parse("#..#\n").is_err());
    }
}
