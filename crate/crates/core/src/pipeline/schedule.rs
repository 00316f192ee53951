//! Per-cycle read schedule of one decoding iteration.

use crate::error::{Error, Result};
use crate::pipeline::layout::MemoryLayout;
use crate::qc_code::QCCode;

/// One read cycle: which two words to fetch and how to align them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RomEntry {
    pub layer: usize,
    /// Sub-block index within the circulant, 1-based.
    pub c: usize,
    /// Position of the block within its layer.
    pub block: usize,
    pub col: usize,
    pub lead: usize,
    pub trail: usize,
    pub shift: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressSchedule {
    p: usize,
    k: usize,
    z: usize,
    entries: Vec<RomEntry>,
}

impl AddressSchedule {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Sub-blocks per circulant, `Z / p`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn entries(&self) -> &[RomEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Consecutive entry ranges sharing one (layer, sub-block) pair.
    pub fn groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.entries.len() {
            let boundary = i == self.entries.len()
                || (self.entries[i].layer, self.entries[i].c)
                    != (self.entries[start].layer, self.entries[start].c);
            if boundary {
                out.push(start..i);
                start = i;
            }
        }
        out
    }
}

pub fn build_schedule(code: &QCCode, layout: &MemoryLayout) -> Result<AddressSchedule> {
    let z = code.z();
    let p = layout.p();
    if layout.n() != code.n() {
        return Err(Error::Layout(format!(
            "layout covers {} variables, code has {}",
            layout.n(),
            code.n()
        )));
    }
    if !z.is_multiple_of(p) {
        return Err(Error::Layout(format!("p = {p} does not divide Z = {z}")));
    }
    let k = z / p;
    if k != 1 && !k.is_multiple_of(2) {
        // adjacent words of one circulant must sit in different banks
        return Err(Error::Layout(format!("Z/p = {k} must be 1 or even")));
    }
    let mut entries = Vec::with_capacity(code.edge_count() / p);
    for &layer in code.layers() {
        for j in 0..k {
            for (block, blk) in code.layer_blocks(layer).iter().enumerate() {
                let o = (j * p + blk.shift) % z;
                let a = o / p;
                entries.push(RomEntry {
                    layer,
                    c: j + 1,
                    block,
                    col: blk.col,
                    lead: blk.col * k + a,
                    trail: blk.col * k + (a + 1) % k,
                    shift: o % p,
                });
            }
        }
    }
    Ok(AddressSchedule { p, k, z, entries })
}

/// Read cycles per iteration: each layer needs `ceil(edges / p)` cycles.
pub fn cycles_per_iteration(code: &QCCode, p: usize) -> usize {
    let z = code.z();
    code.layers()
        .iter()
        .map(|&l| (code.layer_blocks(l).len() * z).div_ceil(p.max(1)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::layout::build_layout;
    use crate::qc_code::{expand, BaseMatrix};

    fn toy() -> QCCode {
        expand(&BaseMatrix::from_rows(4, &[vec![1, 0, 2], vec![3, -1, 1]]).unwrap())
    }

    #[test]
    fn covers_every_edge_once() {
        let code = toy();
        let layout = build_layout(code.n(), 2).unwrap();
        let sched = build_schedule(&code, &layout).unwrap();
        assert_eq!(sched.k(), 2);
        assert_eq!(sched.len(), code.edge_count() / 2);
        assert_eq!(sched.len(), cycles_per_iteration(&code, 2));
        let mut hits = vec![0; code.edge_count()];
        for e in sched.entries() {
            assert!(e.shift < 2 * sched.p());
            assert!((1..=sched.k()).contains(&e.c));
            assert_ne!(layout.word(e.lead).0, layout.word(e.trail).0);
            for x in 0..2 {
                let row = e.layer * 4 + (e.c - 1) * 2 + x;
                hits[code.row_start(row) + e.block] += 1;
                let var = e.lead * 2 + e.shift + x;
                let var = if var >= (e.col + 1) * 4 { var - 4 } else { var };
                assert_eq!(code.row(row)[e.block] as usize, var);
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
        assert_eq!(sched.groups().len(), 4);
    }

    #[test]
    fn cycle_counts() {
        let code = toy();
        assert_eq!(cycles_per_iteration(&code, 2), code.edge_count() / 2);
        assert_eq!(cycles_per_iteration(&code, 4), 5);
        // 3 edges per row of width 4 with p = 3: ceil(12/3) + ceil(8/3)
        assert_eq!(cycles_per_iteration(&code, 3), 4 + 3);
        for p in 1..9 {
            assert!(cycles_per_iteration(&code, p) * p >= code.edge_count());
        }
        let flat = expand(&BaseMatrix::from_rows(100, &[vec![0, 1, 2, 3]]).unwrap());
        assert_eq!(cycles_per_iteration(&flat, 100), 4);
    }

    #[test]
    fn rejects_misaligned() {
        let code = toy();
        assert!(build_schedule(&code, &build_layout(12, 3).unwrap()).is_err());
        let z6 = expand(&BaseMatrix::from_rows(6, &[vec![0, 1]]).unwrap());
        // k = 3 would place adjacent words in one bank
        assert!(build_schedule(&z6, &build_layout(12, 2).unwrap()).is_err());
        assert!(build_schedule(&code, &build_layout(24, 2).unwrap()).is_err());
    }
}
