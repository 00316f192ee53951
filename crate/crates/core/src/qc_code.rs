//! Quasi-cyclic parity-check matrices.
//!
//! A [`BaseMatrix`] holds one shift per `Z x Z` block: `-1` is the zero block and
//! `alpha >= 0` is the identity cyclically shifted right by `alpha`, so row `i` of
//! the block has its single one in column `(i + alpha) mod Z`. [`QCCode`] is the
//! expanded sparse matrix with row-major and column-major adjacency plus the
//! layer schedule used by the layered decoder (one layer per block-row).
//!
//! Text format of a base matrix:
//!
//! ```text
//! rows cols Z
//! s00 s01 ... s0(cols-1)
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::bits::BitVector;
use crate::error::{Error, Position, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BaseMatrix {
    rows: usize,
    cols: usize,
    z: usize,
    shifts: Vec<i32>,
}

impl BaseMatrix {
    /// Validates and builds a base matrix from a row-major shift grid.
    pub fn new(rows: usize, cols: usize, z: usize, shifts: Vec<i32>) -> Result<Self> {
        if z == 0 {
            return Err(Error::InvalidBase("lifting size Z must be positive".into()));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidBase(
                "base matrix must have at least one row and column".into(),
            ));
        }
        if shifts.len() != rows * cols {
            return Err(Error::InvalidBase(format!(
                "grid has {} entries, expected {rows}x{cols}",
                shifts.len()
            )));
        }
        for (k, &s) in shifts.iter().enumerate() {
            if s < -1 || s >= z as i32 {
                return Err(Error::InvalidBase(format!(
                    "shift {s} at ({}, {}) outside [-1, {})",
                    k / cols,
                    k % cols,
                    z
                )));
            }
        }
        let base = BaseMatrix {
            rows,
            cols,
            z,
            shifts,
        };
        for r in 0..rows {
            if (0..cols).all(|c| base.shift(r, c).is_none()) {
                return Err(Error::InvalidBase(format!("block-row {r} is empty")));
            }
        }
        for c in 0..cols {
            if (0..rows).all(|r| base.shift(r, c).is_none()) {
                return Err(Error::InvalidBase(format!("block-column {c} is empty")));
            }
        }
        Ok(base)
    }

    pub fn from_rows(z: usize, grid: &[Vec<i32>]) -> Result<Self> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidBase("ragged rows".into()));
        }
        BaseMatrix::new(rows, cols, z, grid.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn z(&self) -> usize {
        self.z
    }

    /// Shift of block `(r, c)`, `None` for the zero block.
    #[inline]
    pub fn shift(&self, r: usize, c: usize) -> Option<usize> {
        let s = self.shifts[r * self.cols + c];
        (s >= 0).then_some(s as usize)
    }

    pub fn raw_shifts(&self) -> &[i32] {
        &self.shifts
    }

    /// Count of non-zero blocks.
    pub fn nonzero_blocks(&self) -> usize {
        self.shifts.iter().filter(|&&s| s >= 0).count()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

        let (hline, header) = lines.next().ok_or_else(|| Error::Parse {
            pos: Position { line: 1, column: 1 },
            msg: "missing header 'rows cols Z'".into(),
        })?;
        let head = parse_ints(header, hline + 1)?;
        if head.len() != 3 || head.iter().any(|&v| v <= 0) {
            return Err(Error::Parse {
                pos: Position {
                    line: hline + 1,
                    column: 1,
                },
                msg: "header must be three positive integers 'rows cols Z'".into(),
            });
        }
        let (rows, cols, z) = (head[0] as usize, head[1] as usize, head[2] as usize);

        let mut shifts = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (ln, line) in lines {
            if seen == rows {
                return Err(Error::Parse {
                    pos: Position {
                        line: ln + 1,
                        column: 1,
                    },
                    msg: format!("more than {rows} rows"),
                });
            }
            let toks = tokens(line);
            if toks.len() != cols {
                return Err(Error::Parse {
                    pos: Position {
                        line: ln + 1,
                        column: toks.get(cols).map_or(line.len() + 1, |t| t.0),
                    },
                    msg: format!("expected {cols} entries, found {}", toks.len()),
                });
            }
            for (col, tok) in toks {
                let v: i64 = tok.parse().map_err(|_| Error::Parse {
                    pos: Position {
                        line: ln + 1,
                        column: col,
                    },
                    msg: format!("'{tok}' is not an integer"),
                })?;
                if v < -1 || v >= z as i64 {
                    return Err(Error::Parse {
                        pos: Position {
                            line: ln + 1,
                            column: col,
                        },
                        msg: format!("shift {v} outside [-1, {z})"),
                    });
                }
                shifts.push(v as i32);
            }
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Parse {
                pos: Position {
                    line: text.lines().count().max(1),
                    column: 1,
                },
                msg: format!("expected {rows} rows, found {seen}"),
            });
        }
        BaseMatrix::new(rows, cols, z, shifts)
    }

    /// Canonical text form: header line, then one line per block-row with single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.rows, self.cols, self.z);
        for r in 0..self.rows {
            let row = &self.shifts[r * self.cols..(r + 1) * self.cols];
            let line: Vec<String> = row.iter().map(i32::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        BaseMatrix::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_ints(line: &str, line_no: usize) -> Result<Vec<i64>> {
    tokens(line)
        .into_iter()
        .map(|(col, t)| {
            t.parse().map_err(|_| Error::Parse {
                pos: Position {
                    line: line_no,
                    column: col,
                },
                msg: format!("'{t}' is not an integer"),
            })
        })
        .collect()
}

/// One non-zero block of a layer: block-column and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub col: usize,
    pub shift: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QCCode {
    base: BaseMatrix,
    n: usize,
    m: usize,
    rate: f64,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    layer_blocks: Vec<Vec<Block>>,
    layers: Vec<usize>,
}

/// Expands a base matrix into its sparse parity-check matrix.
pub fn expand(base: &BaseMatrix) -> QCCode {
    let z = base.z;
    let n = base.cols * z;
    let m = base.rows * z;

    let layer_blocks: Vec<Vec<Block>> = (0..base.rows)
        .map(|r| {
            (0..base.cols)
                .filter_map(|c| base.shift(r, c).map(|shift| Block { col: c, shift }))
                .collect()
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut col_idx = Vec::with_capacity(base.nonzero_blocks() * z);
    row_ptr.push(0);
    for blocks in &layer_blocks {
        for i in 0..z {
            for b in blocks {
                col_idx.push((b.col * z + (i + b.shift) % z) as u32);
            }
            row_ptr.push(col_idx.len());
        }
    }

    let mut col_deg = vec![0usize; n];
    for &c in &col_idx {
        col_deg[c as usize] += 1;
    }
    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    for d in &col_deg {
        col_ptr.push(col_ptr.last().unwrap() + d);
    }
    let mut fill = col_ptr[..n].to_vec();
    let mut row_idx = vec![0u32; col_idx.len()];
    for row in 0..m {
        for &c in &col_idx[row_ptr[row]..row_ptr[row + 1]] {
            row_idx[fill[c as usize]] = row as u32;
            fill[c as usize] += 1;
        }
    }

    QCCode {
        base: base.clone(),
        n,
        m,
        rate: 1.0 - m as f64 / n as f64,
        row_ptr,
        col_idx,
        col_ptr,
        row_idx,
        layer_blocks,
        layers: (0..base.rows).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeStats {
    pub n_total: usize,
    pub n_avr: f64,
    /// degree -> number of check rows with that weight
    pub row_hist: BTreeMap<usize, usize>,
    /// degree -> number of columns with that weight
    pub col_hist: BTreeMap<usize, usize>,
}

impl QCCode {
    pub fn base(&self) -> &BaseMatrix {
        &self.base
    }

    /// Code length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of check rows.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn z(&self) -> usize {
        self.base.z
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Overrides the rate with the designer's declared value.
    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    /// Replaces the layer processing order. Must be a permutation of block-rows.
    pub fn with_layer_order(mut self, order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; self.base.rows];
        if order.len() != self.base.rows {
            return Err(Error::InvalidParameter(format!(
                "layer order has {} entries, code has {} block-rows",
                order.len(),
                self.base.rows
            )));
        }
        for &l in &order {
            if l >= self.base.rows || std::mem::replace(&mut seen[l], true) {
                return Err(Error::InvalidParameter(format!(
                    "layer order is not a permutation (entry {l})"
                )));
            }
        }
        self.layers = order;
        Ok(self)
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    /// Non-zero blocks of block-row `r`, ascending block-column.
    pub fn layer_blocks(&self, r: usize) -> &[Block] {
        &self.layer_blocks[r]
    }

    pub fn edge_count(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices of check `row`, ascending block order.
    #[inline]
    pub fn row(&self, row: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    /// Index of the first edge of `row` in the row-major edge numbering.
    #[inline]
    pub fn row_start(&self, row: usize) -> usize {
        self.row_ptr[row]
    }

    /// Check rows touching column `col`, ascending.
    #[inline]
    pub fn col(&self, col: usize) -> &[u32] {
        &self.row_idx[self.col_ptr[col]..self.col_ptr[col + 1]]
    }

    pub fn syndrome(&self, word: &BitVector) -> Result<BitVector> {
        if word.len() != self.n {
            return Err(Error::Length {
                expected: self.n,
                actual: word.len(),
            });
        }
        let mut s = BitVector::zeros(self.m);
        for row in 0..self.m {
            let parity = self
                .row(row)
                .iter()
                .fold(false, |acc, &c| acc ^ word.get(c as usize));
            if parity {
                s.set(row, true);
            }
        }
        Ok(s)
    }

    pub fn stats(&self) -> CodeStats {
        let mut row_hist = BTreeMap::new();
        for r in 0..self.m {
            *row_hist.entry(self.row(r).len()).or_insert(0) += 1;
        }
        let mut col_hist = BTreeMap::new();
        for c in 0..self.n {
            *col_hist.entry(self.col(c).len()).or_insert(0) += 1;
        }
        let n_total = self.edge_count();
        CodeStats {
            n_total,
            n_avr: n_total as f64 / self.m as f64,
            row_hist,
            col_hist,
        }
    }

    /// Row-support listing: one line per check, weight then column indices.
    pub fn support_listing(&self) -> String {
        let mut out = String::with_capacity(self.edge_count() * 6);
        for r in 0..self.m {
            let row = self.row(r);
            let _ = write!(out, "{}", row.len());
            for c in row {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
        out
    }
}
