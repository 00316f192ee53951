//! Dual-bank variable-message memory layout.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bank {
    L,
    R,
}

impl fmt::Display for Bank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bank::L => f.write_str("RAM_L"),
            Bank::R => f.write_str("RAM_R"),
        }
    }
}

/// Where one variable message lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub bank: Bank,
    pub address: usize,
    pub lane: usize,
}

/// Variables are packed `p` per word in index order; consecutive words
/// alternate between the two banks, so any two adjacent words can be read in
/// the same cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryLayout {
    n: usize,
    p: usize,
}

pub fn build_layout(n: usize, p: usize) -> Result<MemoryLayout> {
    if p == 0 || n == 0 {
        return Err(Error::Layout(format!(
            "n = {n} and p = {p} must be positive"
        )));
    }
    if !n.is_multiple_of(p) {
        return Err(Error::Layout(format!("p = {p} does not divide n = {n}")));
    }
    if !(n / p).is_multiple_of(2) {
        return Err(Error::Layout(format!("n/p = {} is odd", n / p)));
    }
    Ok(MemoryLayout { n, p })
}

impl MemoryLayout {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total words across both banks.
    pub fn words(&self) -> usize {
        self.n / self.p
    }

    pub fn words_per_bank(&self) -> usize {
        self.words() / 2
    }

    /// Bank and address of global word `g`.
    pub fn word(&self, g: usize) -> (Bank, usize) {
        let bank = if g.is_multiple_of(2) {
            Bank::L
        } else {
            Bank::R
        };
        (bank, g / 2)
    }

    pub fn locate(&self, var: usize) -> Slot {
        let (bank, address) = self.word(var / self.p);
        Slot {
            bank,
            address,
            lane: var % self.p,
        }
    }

    /// Variable indices stored in `bank`, one inner vector per address.
    pub fn bank_contents(&self, bank: Bank) -> Vec<Vec<usize>> {
        let first = match bank {
            Bank::L => 0,
            Bank::R => 1,
        };
        (first..self.words())
            .step_by(2)
            .map(|g| (g * self.p..(g + 1) * self.p).collect())
            .collect()
    }
}
