//! Evaluation store for one run, and its binary file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SNMC1"
//! u64 p, u64 n, u64 m, u64 l, u64 seed, u64 branch_count
//! f64[n*p] X design, f64[n*p] X̃ design
//! per branch: f64[n*m] values, u8[ceil(n*m/8)] fill bitmap (LSB first)
//! u64 FNV-1a checksum of everything above
//! ```

use std::fs;
use std::hash::Hasher;
use std::ops::Range;
use std::path::Path;

use fnv::FnvHasher;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::RepetitionBlock;

const MAGIC: &[u8; 4] = b"SNMC";
const VERSION: u8 = b'1';
const HEADER_LEN: usize = 5 + 6 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Base,
    /// Pick-frozen branch of group `j` (zero-based).
    Freeze(usize),
}

impl Branch {
    fn index(self) -> usize {
        match self {
            Branch::Base => 0,
            Branch::Freeze(j) => j + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BranchData {
    pub(crate) values: Vec<f64>,
    pub(crate) filled: Vec<bool>,
}

/// `φ` values of the base branch and of each pick-frozen branch, on an
/// `n × m` grid of (exploration, repetition) cells, with both input designs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTable {
    p: usize,
    n: usize,
    m: usize,
    seed: u64,
    x: Vec<f64>,
    x_tilde: Vec<f64>,
    pub(crate) branches: Vec<BranchData>,
}

impl EvaluationTable {
    pub fn new(p: usize, n: usize, m: usize, groups: usize, seed: u64) -> Self {
        let branch = BranchData {
            values: vec![0.0; n * m],
            filled: vec![false; n * m],
        };
        EvaluationTable {
            p,
            n,
            m,
            seed,
            x: vec![0.0; n * p],
            x_tilde: vec![0.0; n * p],
            branches: vec![branch; groups + 1],
        }
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn explorations(&self) -> usize {
        self.n
    }

    pub fn repetitions(&self) -> usize {
        self.m
    }

    pub fn groups(&self) -> usize {
        self.branches.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn x_tilde(&self, i: usize) -> &[f64] {
        &self.x_tilde[i * self.p..(i + 1) * self.p]
    }

    pub(crate) fn designs_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x, &mut self.x_tilde)
    }

    pub fn get(&self, branch: Branch, i: usize, k: usize) -> Option<f64> {
        let b = &self.branches[branch.index()];
        let idx = i * self.m + k;
        b.filled[idx].then(|| b.values[idx])
    }

    /// Writes a cell; each cell can be written once.
    pub fn set(&mut self, branch: Branch, i: usize, k: usize, value: f64) -> Result<()> {
        if i >= self.n || k >= self.m {
            return Err(Error::ShapeMismatch(format!(
                "cell ({i}, {k}) outside {}x{}",
                self.n, self.m
            )));
        }
        let m = self.m;
        let b = &mut self.branches[branch.index()];
        let idx = i * m + k;
        if b.filled[idx] {
            return Err(Error::TableFormat(format!(
                "cell ({i}, {k}) of {branch:?} written twice"
            )));
        }
        b.values[idx] = value;
        b.filled[idx] = true;
        Ok(())
    }

    pub fn filled_count(&self) -> usize {
        self.branches
            .iter()
            .map(|b| b.filled.iter().filter(|&&f| f).count())
            .sum()
    }

    /// Leading `n × m` block of a branch; every cell must be filled.
    pub fn block(&self, branch: Branch, n: usize, m: usize) -> Result<RepetitionBlock> {
        if n > self.n || m > self.m {
            return Err(Error::ShapeMismatch(format!(
                "{n}x{m} block of a {}x{} table",
                self.n, self.m
            )));
        }
        let b = &self.branches[branch.index()];
        let mut values = Vec::with_capacity(n * m);
        for i in 0..n {
            let row = i * self.m;
            if let Some(k) = b.filled[row..row + m].iter().position(|f| !f) {
                return Err(Error::TableFormat(format!(
                    "cell ({i}, {k}) of {branch:?} is empty"
                )));
            }
            values.extend_from_slice(&b.values[row..row + m]);
        }
        RepetitionBlock::new(n, m, values)
    }

    /// Evaluates `eval(x_i, x̃_i, i, k)` for every cell of `rows × reps` in
    /// parallel over rows and stores the results. Errors are reported for
    /// the lowest failing row.
    pub(crate) fn fill<F>(
        &mut self,
        branch: Branch,
        rows: Range<usize>,
        reps: Range<usize>,
        eval: F,
    ) -> Result<()>
    where
        F: Fn(&[f64], &[f64], usize, usize) -> Result<f64> + Sync,
    {
        if rows.end > self.n || reps.end > self.m {
            return Err(Error::ShapeMismatch(format!(
                "cells {rows:?} x {reps:?} outside {}x{}",
                self.n, self.m
            )));
        }
        if rows.is_empty() || reps.is_empty() {
            return Ok(());
        }
        let (p, m) = (self.p, self.m);
        let (x, x_tilde) = (&self.x, &self.x_tilde);
        let b = &mut self.branches[branch.index()];
        let start = rows.start;
        let outcomes: Vec<Result<()>> = b
            .values
            .par_chunks_mut(m)
            .zip(b.filled.par_chunks_mut(m))
            .enumerate()
            .skip(start)
            .take(rows.len())
            .map(|(i, (values, filled))| {
                let xi = &x[i * p..(i + 1) * p];
                let xti = &x_tilde[i * p..(i + 1) * p];
                for k in reps.clone() {
                    if filled[k] {
                        return Err(Error::TableFormat(format!(
                            "cell ({i}, {k}) of {branch:?} written twice"
                        )));
                    }
                    values[k] = eval(xi, xti, i, k)?;
                    filled[k] = true;
                }
                Ok(())
            })
            .collect();
        outcomes.into_iter().collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            HEADER_LEN + 8 * (2 * self.x.len() + self.branches.len() * self.n * self.m),
        );
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        let header = [self.p, self.n, self.m, self.groups()].map(|v| v as u64);
        for v in header
            .into_iter()
            .chain([self.seed, self.branches.len() as u64])
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.x.iter().chain(&self.x_tilde) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for b in &self.branches {
            for v in &b.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let mut bits = vec![0u8; b.filled.len().div_ceil(8)];
            for (idx, _) in b.filled.iter().enumerate().filter(|(_, f)| **f) {
                bits[idx / 8] |= 1 << (idx % 8);
            }
            out.extend_from_slice(&bits);
        }
        let sum = checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + 8 {
            return Err(Error::TableFormat(format!(
                "partial file: {} bytes",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::TableFormat("not an evaluation table".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::VersionMismatch { found: bytes[4] });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if checksum(body) != u64::from_le_bytes(tail.try_into().expect("8 bytes")) {
            return Err(Error::Checksum);
        }
        let mut r = Reader { buf: body, pos: 5 };
        let p = r.len()?;
        let n = r.len()?;
        let m = r.len()?;
        let l = r.len()?;
        let seed = r.u64()?;
        let branch_count = r.len()?;
        if branch_count != l + 1 || p == 0 {
            return Err(Error::TableFormat(format!(
                "inconsistent header: p={p}, l={l}, branches={branch_count}"
            )));
        }
        let x = r.f64s(n * p)?;
        let x_tilde = r.f64s(n * p)?;
        let mut branches = Vec::with_capacity(branch_count);
        for _ in 0..branch_count {
            let values = r.f64s(n * m)?;
            let bits = r.take((n * m).div_ceil(8))?;
            let filled = (0..n * m)
                .map(|idx| bits[idx / 8] >> (idx % 8) & 1 == 1)
                .collect();
            branches.push(BranchData { values, filled });
        }
        if r.pos != body.len() {
            return Err(Error::TableFormat(format!(
                "{} trailing bytes",
                body.len() - r.pos
            )));
        }
        Ok(EvaluationTable {
            p,
            n,
            m,
            seed,
            x,
            x_tilde,
            branches,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads a table and checks it was produced for a `p`-dimensional model.
    pub fn load_expecting(path: impl AsRef<Path>, p: usize) -> Result<Self> {
        let table = Self::load(path)?;
        if table.p != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: table.p,
            });
        }
        Ok(table)
    }
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::TableFormat("partial file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::TableFormat("size overflow".into()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| Error::TableFormat("size overflow".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
