use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Row-major cell index: `y * width + x`.
pub type VertexId = usize;

pub const UNREACHABLE: u32 = u32::MAX;

/// 4-connected occupancy grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, blocked: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("grid dimensions must be at least 1x1".into()));
        }
        if blocked.len() != width * height {
            return Err(Error::Invalid(format!(
                "occupancy has {} cells, expected {}",
                blocked.len(),
                width * height
            )));
        }
        Ok(GridMap {
            width,
            height,
            blocked,
        })
    }

    pub fn open(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height]).expect("non-empty open grid")
    }

    /// Builds a grid from rows of MovingAI glyphs.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut blocked = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::parse(y + 1, "ragged row"));
            }
            for c in row.chars() {
                blocked.push(glyph_blocked(c).ok_or_else(|| {
                    Error::parse(y + 1, format!("unknown map glyph `{c}`"))
                })?);
            }
        }
        Self::new(width, height, blocked)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn vertex(&self, x: usize, y: usize) -> VertexId {
        y * self.width + x
    }

    pub fn coords(&self, v: VertexId) -> (usize, usize) {
        (v % self.width, v / self.width)
    }

    pub fn in_bounds(&self, v: VertexId) -> bool {
        v < self.num_cells()
    }

    pub fn is_free(&self, v: VertexId) -> bool {
        self.in_bounds(v) && !self.blocked[v]
    }

    pub fn is_blocked_xy(&self, x: usize, y: usize) -> bool {
        self.blocked[self.vertex(x, y)]
    }

    pub fn free_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.num_cells()).filter(|&v| !self.blocked[v])
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// Free 4-neighbors of `v`, in the fixed order right, down, left, up.
    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        let (x, y) = self.coords(v);
        let cand = [
            (x + 1 < self.width).then(|| v + 1),
            (y + 1 < self.height).then(|| v + self.width),
            (x > 0).then(|| v - 1),
            (y > 0).then(|| v - self.width),
        ];
        cand.into_iter().flatten().filter(|&n| !self.blocked[n])
    }

    pub fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        self.neighbors(a).any(|n| n == b)
    }

    /// BFS distances to every cell from `source`; blocked or disconnected
    /// cells get [`UNREACHABLE`].
    pub fn distances_from(&self, source: VertexId) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.num_cells()];
        if !self.is_free(source) {
            return dist;
        }
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            for n in self.neighbors(v) {
                if dist[n] == UNREACHABLE {
                    dist[n] = d;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Parses the MovingAI `.map` format.
    pub fn parse_movingai(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let mut lineno = 0usize;
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lineno += 1;
            lines
                .next()
                .map(|l| (lineno, l))
                .ok_or_else(|| Error::parse(lineno, format!("unexpected end of file, expected {what}")))
        };

        let (ln, ty) = next("`type` header")?;
        if !ty.trim_start().starts_with("type") {
            return Err(Error::parse(ln, "expected `type <name>` header"));
        }
        let mut height = None;
        let mut width = None;
        for _ in 0..2 {
            let (ln, l) = next("dimension header")?;
            let mut it = l.split_whitespace();
            let key = it.next().unwrap_or("");
            let val: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(ln, format!("bad dimension line `{l}`")))?;
            match key {
                "height" if height.is_none() => height = Some(val),
                "width" if width.is_none() => width = Some(val),
                _ => return Err(Error::parse(ln, format!("unexpected header `{l}`"))),
            }
        }
        let (height, width) = (height.unwrap(), width.unwrap());
        let (ln, m) = next("`map` line")?;
        if m.trim() != "map" {
            return Err(Error::parse(ln, "expected `map`"));
        }
        if width == 0 || height == 0 {
            return Err(Error::parse(ln, "grid dimensions must be at least 1x1"));
        }

        let mut blocked = Vec::with_capacity(width * height);
        for _ in 0..height {
            let (ln, row) = next("grid row")?;
            if row.chars().count() != width {
                return Err(Error::parse(
                    ln,
                    format!("row has {} cells, header says width {width}", row.chars().count()),
                ));
            }
            for c in row.chars() {
                blocked.push(
                    glyph_blocked(c)
                        .ok_or_else(|| Error::parse(ln, format!("unknown map glyph `{c}`")))?,
                );
            }
        }
        for (ln, extra) in std::iter::from_fn(|| next("").ok()) {
            if !extra.trim().is_empty() {
                return Err(Error::parse(ln, format!("more than {height} rows")));
            }
        }
        Self::new(width, height, blocked)
    }

    pub fn to_movingai(&self) -> String {
        let mut out = String::with_capacity(self.num_cells() + self.height + 48);
        let _ = write!(out, "type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width);
        for row in self.blocked.chunks(self.width) {
            out.extend(row.iter().map(|&b| if b { '@' } else { '.' }));
            out.push('\n');
        }
        out
    }
}

fn glyph_blocked(c: char) -> Option<bool> {
    match c {
        '.' | 'G' => Some(false),
        '@' | 'O' | 'T' => Some(true),
        _ => None,
    }
}
