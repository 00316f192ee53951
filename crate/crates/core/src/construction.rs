//! Multi-edge-type degree distributions and quasi-cyclic PEG construction.
//!
//! A distribution lists variable and check node classes. Each class has a
//! fraction of `n` (the code length) and one degree per edge type. Edges of
//! type `t` only join variable and check sockets of type `t`.
//!
//! File format:
//!
//! ```text
//! # comment
//! edge_types 3
//! rate 0.1          (optional, checked against 1 - Σ chk fractions)
//! sigma 2.56        (optional, informational)
//! var 0.075 2 21 0
//! chk 0.025 12 0 0
//! ```

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Position, Result};
use crate::qc_code::{BaseMatrix, QCCode};

const TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeClass {
    pub fraction: f64,
    pub degrees: Vec<usize>,
}

impl NodeClass {
    pub fn total_degree(&self) -> usize {
        self.degrees.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetDegreeDistribution {
    pub edge_types: usize,
    pub var_classes: Vec<NodeClass>,
    pub chk_classes: Vec<NodeClass>,
    pub rate: Option<f64>,
    pub threshold_sigma: Option<f64>,
}

fn parse_err(line: usize, column: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        pos: Position { line, column },
        msg: msg.into(),
    }
}

impl MetDegreeDistribution {
    pub fn parse(text: &str) -> Result<Self> {
        let mut edge_types = None;
        let mut rate = None;
        let mut sigma = None;
        let mut pending: Vec<(usize, bool, NodeClass, usize)> = Vec::new();

        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.split('#').next().unwrap_or("");
            let mut tokens = Vec::new();
            let mut col = 0;
            for tok in line.split_whitespace() {
                let at = line[col..].find(tok).unwrap() + col;
                col = at + tok.len();
                tokens.push((at + 1, tok));
            }
            let Some(&(c0, key)) = tokens.first() else {
                continue;
            };
            let num = |i: usize| -> Result<f64> {
                let (c, t) = tokens
                    .get(i)
                    .ok_or_else(|| parse_err(ln, raw.len() + 1, "missing value"))?;
                t.parse::<f64>()
                    .map_err(|_| parse_err(ln, *c, format!("expected a number, found '{t}'")))
            };
            match key {
                "edge_types" => {
                    let (c, t) = tokens
                        .get(1)
                        .ok_or_else(|| parse_err(ln, raw.len() + 1, "missing value"))?;
                    let k = t
                        .parse::<usize>()
                        .map_err(|_| parse_err(ln, *c, format!("bad edge type count '{t}'")))?;
                    if k == 0 {
                        return Err(parse_err(ln, *c, "edge type count must be positive"));
                    }
                    edge_types = Some(k);
                }
                "rate" => rate = Some(num(1)?),
                "sigma" => sigma = Some(num(1)?),
                "var" | "chk" => {
                    let fraction = num(1)?;
                    let mut degrees = Vec::new();
                    for &(c, t) in &tokens[2..] {
                        degrees.push(
                            t.parse::<usize>()
                                .map_err(|_| parse_err(ln, c, format!("bad degree '{t}'")))?,
                        );
                    }
                    pending.push((ln, key == "var", NodeClass { fraction, degrees }, c0));
                }
                other => return Err(parse_err(ln, c0, format!("unknown keyword '{other}'"))),
            }
        }

        let edge_types = edge_types.ok_or_else(|| parse_err(1, 1, "missing 'edge_types' line"))?;
        let mut var_classes = Vec::new();
        let mut chk_classes = Vec::new();
        for (ln, is_var, class, c0) in pending {
            if class.degrees.len() != edge_types {
                return Err(parse_err(
                    ln,
                    c0,
                    format!(
                        "expected {edge_types} degrees, found {}",
                        class.degrees.len()
                    ),
                ));
            }
            if is_var {
                var_classes.push(class);
            } else {
                chk_classes.push(class);
            }
        }
        Ok(MetDegreeDistribution {
            edge_types,
            var_classes,
            chk_classes,
            rate,
            threshold_sigma: sigma,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("edge_types {}\n", self.edge_types);
        if let Some(r) = self.rate {
            let _ = writeln!(out, "rate {r}");
        }
        if let Some(s) = self.threshold_sigma {
            let _ = writeln!(out, "sigma {s}");
        }
        for (tag, classes) in [("var", &self.var_classes), ("chk", &self.chk_classes)] {
            for c in classes {
                let _ = write!(out, "{tag} {}", c.fraction);
                for d in &c.degrees {
                    let _ = write!(out, " {d}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Edge density of type `t` on the variable side, per code bit.
    pub fn var_edges(&self, t: usize) -> f64 {
        self.var_classes
            .iter()
            .map(|c| c.fraction * c.degrees[t] as f64)
            .sum()
    }

    pub fn chk_edges(&self, t: usize) -> f64 {
        self.chk_classes
            .iter()
            .map(|c| c.fraction * c.degrees[t] as f64)
            .sum()
    }

    /// `1 - Σ chk fractions`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.chk_classes.iter().map(|c| c.fraction).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub design_rate: f64,
    /// Per edge type, edges per code bit.
    pub edge_density: Vec<f64>,
}

pub fn validate_distribution(dist: &MetDegreeDistribution) -> Result<ValidationReport> {
    if dist.var_classes.is_empty() || dist.chk_classes.is_empty() {
        return Err(Error::InvalidDistribution(
            "needs at least one variable and one check class".into(),
        ));
    }
    for c in dist.var_classes.iter().chain(&dist.chk_classes) {
        if c.degrees.len() != dist.edge_types {
            return Err(Error::InvalidDistribution(format!(
                "class has {} degrees for {} edge types",
                c.degrees.len(),
                dist.edge_types
            )));
        }
        if !(c.fraction >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "negative fraction {}",
                c.fraction
            )));
        }
        if c.total_degree() == 0 {
            return Err(Error::InvalidDistribution(
                "class with zero total degree".into(),
            ));
        }
    }
    let var_sum: f64 = dist.var_classes.iter().map(|c| c.fraction).sum();
    if (var_sum - 1.0).abs() > TOL {
        return Err(Error::InvalidDistribution(format!(
            "variable fractions sum to {var_sum}, expected 1"
        )));
    }
    let mut edge_density = Vec::with_capacity(dist.edge_types);
    for t in 0..dist.edge_types {
        let (v, c) = (dist.var_edges(t), dist.chk_edges(t));
        if (v - c).abs() > TOL {
            return Err(Error::EdgeImbalance {
                edge_type: t + 1,
                var: format!("{v:.6}"),
                chk: format!("{c:.6}"),
            });
        }
        edge_density.push(v);
    }
    let design_rate = dist.design_rate();
    if let Some(r) = dist.rate {
        if (r - design_rate).abs() > TOL {
            return Err(Error::InvalidDistribution(format!(
                "declared rate {r} but check fractions give {design_rate:.6}"
            )));
        }
    }
    Ok(ValidationReport {
        design_rate,
        edge_density,
    })
}

/// Integer block counts for each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub var_counts: Vec<usize>,
    pub chk_counts: Vec<usize>,
    /// True when some class count had to be rounded.
    pub rounded: bool,
}

fn largest_remainder(fractions: &[f64], scale: f64, total: usize) -> (Vec<usize>, bool) {
    let exact: Vec<f64> = fractions.iter().map(|f| f * scale).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let rounded = exact.iter().any(|x| (x - x.round()).abs() > 1e-9);
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(order.len() * 2) {
        if assigned >= total {
            break;
        }
        counts[i] += 1;
        assigned += 1;
    }
    (counts, rounded)
}

/// Rounds class fractions to counts over `blocks` block-columns, then checks
/// that every edge type balances exactly.
pub fn realize(dist: &MetDegreeDistribution, blocks: usize) -> Result<Realization> {
    validate_distribution(dist)?;
    if blocks == 0 {
        return Err(Error::InvalidParameter(
            "block count must be positive".into(),
        ));
    }
    let vf: Vec<f64> = dist.var_classes.iter().map(|c| c.fraction).collect();
    let (var_counts, r1) = largest_remainder(&vf, blocks as f64, blocks);
    let cf: Vec<f64> = dist.chk_classes.iter().map(|c| c.fraction).collect();
    let rows = (cf.iter().sum::<f64>() * blocks as f64).round() as usize;
    let (chk_counts, r2) = largest_remainder(&cf, blocks as f64, rows);
    for t in 0..dist.edge_types {
        let v: usize = dist
            .var_classes
            .iter()
            .zip(&var_counts)
            .map(|(c, &k)| c.degrees[t] * k)
            .sum();
        let c: usize = dist
            .chk_classes
            .iter()
            .zip(&chk_counts)
            .map(|(c, &k)| c.degrees[t] * k)
            .sum();
        if v != c {
            return Err(Error::EdgeImbalance {
                edge_type: t + 1,
                var: v.to_string(),
                chk: c.to_string(),
            });
        }
    }
    if r1 || r2 {
        log::warn!(
            "class fractions rounded to block counts: var {var_counts:?}, chk {chk_counts:?}"
        );
    }
    Ok(Realization {
        var_counts,
        chk_counts,
        rounded: r1 || r2,
    })
}

/// A constructed base matrix plus its per-type block degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PegOutput {
    pub base: BaseMatrix,
    /// `col_degrees[c][t]`: edges of type `t` on block-column `c`.
    pub col_degrees: Vec<Vec<usize>>,
    pub row_degrees: Vec<Vec<usize>>,
    pub realization: Realization,
}

impl PegOutput {
    /// The distribution actually realized, with fractions over block counts.
    pub fn realized_distribution(&self, edge_types: usize) -> MetDegreeDistribution {
        let collect = |degs: &[Vec<usize>], denom: usize| {
            let mut classes: Vec<(Vec<usize>, usize)> = Vec::new();
            for d in degs {
                match classes.iter_mut().find(|(k, _)| k == d) {
                    Some((_, n)) => *n += 1,
                    None => classes.push((d.clone(), 1)),
                }
            }
            classes
                .into_iter()
                .map(|(degrees, n)| NodeClass {
                    fraction: n as f64 / denom as f64,
                    degrees,
                })
                .collect()
        };
        let cols = self.col_degrees.len();
        MetDegreeDistribution {
            edge_types,
            var_classes: collect(&self.col_degrees, cols),
            chk_classes: collect(&self.row_degrees, cols),
            rate: None,
            threshold_sigma: None,
        }
    }
}

/// Builds a base matrix realizing `dist` with length `n` and lifting `z`.
pub fn qc_peg(dist: &MetDegreeDistribution, n: usize, z: usize, seed: u64) -> Result<BaseMatrix> {
    Ok(qc_peg_detailed(dist, n, z, seed)?.base)
}

struct Graph {
    z: usize,
    /// per block-column: (block-row, shift)
    cols: Vec<Vec<(usize, usize)>>,
    /// per block-row: (block-column, shift)
    rows: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// BFS distances (in edges) from variable `start` to every check node.
    fn check_distances(
        &self,
        start: usize,
        dv: &mut [u32],
        dc: &mut [u32],
        queue: &mut VecDeque<(bool, usize)>,
    ) {
        let z = self.z;
        dv.fill(u32::MAX);
        dc.fill(u32::MAX);
        queue.clear();
        dv[start] = 0;
        queue.push_back((true, start));
        while let Some((is_var, node)) = queue.pop_front() {
            let (blk, x) = (node / z, node % z);
            if is_var {
                let d = dv[node] + 1;
                for &(r, a) in &self.cols[blk] {
                    let c = r * z + (x + z - a) % z;
                    if dc[c] == u32::MAX {
                        dc[c] = d;
                        queue.push_back((false, c));
                    }
                }
            } else {
                let d = dc[node] + 1;
                for &(cb, a) in &self.rows[blk] {
                    let v = cb * z + (x + a) % z;
                    if dv[v] == u32::MAX {
                        dv[v] = d;
                        queue.push_back((true, v));
                    }
                }
            }
        }
    }
}

pub fn qc_peg_detailed(
    dist: &MetDegreeDistribution,
    n: usize,
    z: usize,
    seed: u64,
) -> Result<PegOutput> {
    if z == 0 || !n.is_multiple_of(z) {
        return Err(Error::InvalidParameter(format!(
            "length {n} is not a multiple of lifting size {z}"
        )));
    }
    let nb = n / z;
    let real = realize(dist, nb)?;
    let k = dist.edge_types;

    let mut col_class = Vec::with_capacity(nb);
    for (ci, &cnt) in real.var_counts.iter().enumerate() {
        col_class.extend(std::iter::repeat_n(ci, cnt));
    }
    let mut row_cap: Vec<Vec<usize>> = Vec::new();
    for (ci, &cnt) in real.chk_counts.iter().enumerate() {
        for _ in 0..cnt {
            row_cap.push(dist.chk_classes[ci].degrees.clone());
        }
    }
    let mb = row_cap.len();
    let row_target = row_cap.clone();
    for (c, &cls) in col_class.iter().enumerate() {
        let d = dist.var_classes[cls].total_degree();
        if d > mb {
            return Err(Error::Construction(format!(
                "block-column {c} needs degree {d} but only {mb} block-rows exist"
            )));
        }
    }

    // degree-1 columns last: they cannot close cycles and must not starve rows
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by_key(|&c| {
        (
            dist.var_classes[col_class[c]].total_degree() == 1,
            col_class[c],
            c,
        )
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph {
        z,
        cols: vec![Vec::new(); nb],
        rows: vec![Vec::new(); mb],
    };
    let mut col_degrees = vec![vec![0usize; k]; nb];
    let mut dv = vec![0u32; n];
    let mut dc = vec![0u32; mb * z];
    let mut queue = VecDeque::new();
    let mut ties = Vec::new();

    for &c in &order {
        let degrees = &dist.var_classes[col_class[c]].degrees;
        for t in 0..k {
            for _ in 0..degrees[t] {
                g.check_distances(c * z, &mut dv, &mut dc, &mut queue);
                // best (distance, remaining capacity, -row) over eligible rows
                let mut best: Option<(u32, usize, usize)> = None;
                for r in 0..mb {
                    if row_cap[r][t] == 0 || g.cols[c].iter().any(|&(rr, _)| rr == r) {
                        continue;
                    }
                    let far = (0..z).map(|i| dc[r * z + i]).max().unwrap();
                    let key = (far, row_cap[r][t], r);
                    let better = match best {
                        None => true,
                        Some((bd, bc, br)) => {
                            far > bd || (far == bd && (key.1 > bc || (key.1 == bc && r < br)))
                        }
                    };
                    if better {
                        best = Some(key);
                    }
                }
                let Some((far, _, r)) = best else {
                    return Err(Error::Construction(format!(
                        "no block-row with free type-{} capacity for block-column {c}",
                        t + 1
                    )));
                };
                ties.clear();
                ties.extend((0..z).filter(|&i| dc[r * z + i] == far));
                let i = *ties.choose(&mut rng).unwrap();
                let shift = (z - i) % z;
                g.cols[c].push((r, shift));
                g.rows[r].push((c, shift));
                row_cap[r][t] -= 1;
                col_degrees[c][t] += 1;
            }
        }
    }

    let mut shifts = vec![-1i32; mb * nb];
    for (c, list) in g.cols.iter().enumerate() {
        for &(r, a) in list {
            shifts[r * nb + c] = a as i32;
        }
    }
    let base = BaseMatrix::new(mb, nb, z, shifts)?;
    Ok(PegOutput {
        base,
        col_degrees,
        row_degrees: row_target,
        realization: real,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Girth {
    Exact(usize),
    /// No cycle shorter than the cap.
    AtLeast(usize),
}

impl Girth {
    pub fn at_least(&self, g: usize) -> bool {
        match *self {
            Girth::Exact(x) => x >= g,
            Girth::AtLeast(cap) => cap >= g,
        }
    }
}

impl std::fmt::Display for Girth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Girth::Exact(g) => write!(f, "{g}"),
            Girth::AtLeast(c) => write!(f, ">={c}"),
        }
    }
}

/// Tanner-graph girth. Every variable in a block-column is equivalent under the
/// quasi-cyclic automorphism, so one BFS per block-column suffices.
pub fn girth(code: &QCCode, cap: usize) -> Result<Girth> {
    if cap < 4 || !cap.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "girth cap must be even and >= 4, got {cap}"
        )));
    }
    let (n, m, z) = (code.n(), code.m(), code.z());
    // node ids: variables 0..n, checks n..n+m
    let mut dist = vec![u32::MAX; n + m];
    let mut parent = vec![usize::MAX; n + m];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    let mut best = usize::MAX;
    let limit = cap.min(best);
    for blk in 0..n / z {
        let start = blk * z;
        for &t in &touched {
            dist[t] = u32::MAX;
            parent[t] = usize::MAX;
        }
        touched.clear();
        queue.clear();
        dist[start] = 0;
        touched.push(start);
        queue.push_back(start);
        'bfs: while let Some(u) = queue.pop_front() {
            let du = dist[u] as usize;
            if 2 * du + 1 >= best.min(limit) {
                break;
            }
            let neigh: Box<dyn Iterator<Item = usize>> = if u < n {
                Box::new(code.col(u).iter().map(|&r| n + r as usize))
            } else {
                Box::new(code.row(u - n).iter().map(|&c| c as usize))
            };
            for w in neigh {
                if w == parent[u] {
                    continue;
                }
                if dist[w] == u32::MAX {
                    dist[w] = du as u32 + 1;
                    parent[w] = u;
                    touched.push(w);
                    queue.push_back(w);
                } else {
                    let len = du + dist[w] as usize + 1;
                    if len < best {
                        best = len;
                    }
                    if best <= 4 {
                        break 'bfs;
                    }
                }
            }
        }
    }
    Ok(if best < cap {
        Girth::Exact(best)
    } else {
        Girth::AtLeast(cap)
    })
}
