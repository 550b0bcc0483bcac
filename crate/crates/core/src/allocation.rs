//! Partitions and feature allocations of `[n] = {1, ..., n}`.
//!
//! Both structures are kept in a canonical form so that equality, hashing and
//! the compact text encoding are independent of how the blocks were supplied.
//!
//! * [`Partition`]: blocks sorted by least element.
//! * [`FeatureAllocation`]: unique blocks sorted by size (descending), then
//!   least element, then lexicographically; duplicates are stored once with a
//!   multiplicity count.
//!
//! # Text encoding
//!
//! ```text
//! record := '[' [ block { ',' block } ] ']'
//! block  := '[' index { ',' index } ']'
//! index  := decimal integer >= 1
//! ```
//!
//! Whitespace between tokens is ignored on input and never emitted. Blocks are
//! written in canonical order with their indices ascending; duplicate feature
//! blocks are written once per copy. A partition determines its `n` (the
//! largest index), a feature allocation does not, so its parser takes `n`.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A block: a nonempty, strictly increasing list of 1-based indices.
pub type Block = Vec<usize>;

fn validate_block(block: &[usize], n: usize) -> Result<()> {
    if block.is_empty() {
        return Err(Error::InvalidStructure("empty block".into()));
    }
    for w in block.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidStructure(format!(
                "block {block:?} is not strictly increasing"
            )));
        }
    }
    if block[0] == 0 || *block.last().unwrap() > n {
        return Err(Error::InvalidStructure(format!(
            "block {block:?} has an index outside 1..={n}"
        )));
    }
    Ok(())
}

fn normalize_block(mut block: Block) -> Block {
    block.sort_unstable();
    block
}

/// Order used for feature blocks: size descending, least element, then lexicographic.
fn feature_block_order(a: &Block, b: &Block) -> std::cmp::Ordering {
    b.len()
        .cmp(&a.len())
        .then_with(|| a[0].cmp(&b[0]))
        .then_with(|| a.cmp(b))
}

/// A partition of `[n]` into disjoint, nonempty, exhaustive blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    blocks: Vec<Block>,
}

impl Partition {
    /// Builds a partition, sorting blocks and indices into canonical form.
    pub fn new(n: usize, blocks: Vec<Block>) -> Result<Self> {
        let mut blocks: Vec<Block> = blocks.into_iter().map(normalize_block).collect();
        let mut seen = vec![false; n + 1];
        for block in &blocks {
            validate_block(block, n)?;
            for &i in block {
                if seen[i] {
                    return Err(Error::InvalidStructure(format!(
                        "index {i} appears in more than one block"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = (1..=n).find(|&i| !seen[i]) {
            return Err(Error::InvalidStructure(format!(
                "index {missing} is not covered by any block"
            )));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// The partition of `[0]` with no blocks.
    pub fn empty() -> Self {
        Self {
            n: 0,
            blocks: Vec::new(),
        }
    }

    /// Builds from blocks already known to be valid; only reorders them.
    pub(crate) fn from_valid_blocks(n: usize, mut blocks: Vec<Block>) -> Self {
        blocks.sort_unstable_by_key(|b| b[0]);
        debug_assert_eq!(blocks.iter().map(Vec::len).sum::<usize>(), n);
        Self { n, blocks }
    }

    /// Builds a partition from 0-based cluster ids, one per index.
    pub fn from_assignments(assignments: &[usize]) -> Self {
        induced_partition(assignments)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block sizes in canonical block order.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Block id (0-based, canonical order) of every index, in index order.
    pub fn assignments(&self) -> Vec<usize> {
        let mut z = vec![0; self.n];
        for (k, block) in self.blocks.iter().enumerate() {
            for &i in block {
                z[i - 1] = k;
            }
        }
        z
    }

    /// Restriction to `[m]`: every block intersected with `[m]`, empties dropped.
    pub fn restrict(&self, m: usize) -> Result<Self> {
        if m > self.n {
            return Err(Error::Domain(format!(
                "cannot restrict a partition of [{}] to [{m}]",
                self.n
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&i| i <= m).collect::<Block>())
            .filter(|b| !b.is_empty())
            .collect();
        Ok(Self::from_valid_blocks(m, blocks))
    }

    /// All partitions of `[n + 1]` that restrict to `self`: index `n + 1`
    /// joins each existing block in turn, then forms a singleton.
    pub fn extensions(&self) -> Vec<Partition> {
        let new = self.n + 1;
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        for k in 0..self.blocks.len() {
            let mut blocks = self.blocks.clone();
            blocks[k].push(new);
            out.push(Self::from_valid_blocks(new, blocks));
        }
        let mut blocks = self.blocks.clone();
        blocks.push(vec![new]);
        out.push(Self::from_valid_blocks(new, blocks));
        out
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_blocks(f, self.blocks.iter())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let blocks = parse_blocks(s)?;
        let n = blocks.iter().map(Vec::len).sum();
        Partition::new(n, blocks)
    }
}

/// A multiset of nonempty subsets of `[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureAllocation {
    n: usize,
    /// Unique blocks in canonical order with their multiplicities.
    blocks: Vec<(Block, usize)>,
}

impl FeatureAllocation {
    /// Builds a feature allocation from blocks listed with repetition.
    pub fn new(n: usize, blocks: Vec<Block>) -> Result<Self> {
        let mut counts: HashMap<Block, usize> = HashMap::new();
        for block in blocks {
            let block = normalize_block(block);
            validate_block(&block, n)?;
            *counts.entry(block).or_insert(0) += 1;
        }
        Ok(Self::from_counts(n, counts.into_iter().collect()))
    }

    /// The allocation of `[n]` in which no index belongs to any feature.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            blocks: Vec::new(),
        }
    }

    fn from_counts(n: usize, mut blocks: Vec<(Block, usize)>) -> Self {
        blocks.sort_unstable_by(|a, b| feature_block_order(&a.0, &b.0));
        Self { n, blocks }
    }

    /// Builds from a binary membership matrix: `member(i, k)` says whether
    /// index `i + 1` belongs to feature `k`. All-zero columns are dropped.
    pub fn from_membership(n: usize, columns: usize, member: impl Fn(usize, usize) -> bool) -> Self {
        let mut counts: HashMap<Block, usize> = HashMap::new();
        for k in 0..columns {
            let block: Block = (0..n).filter(|&i| member(i, k)).map(|i| i + 1).collect();
            if !block.is_empty() {
                *counts.entry(block).or_insert(0) += 1;
            }
        }
        Self::from_counts(n, counts.into_iter().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of blocks `K`, counting duplicates.
    pub fn num_blocks(&self) -> usize {
        self.blocks.iter().map(|(_, m)| m).sum()
    }

    /// Unique blocks with their multiplicities, in canonical order.
    pub fn unique_blocks(&self) -> &[(Block, usize)] {
        &self.blocks
    }

    /// Every block, duplicates repeated, in canonical order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> + '_ {
        self.blocks
            .iter()
            .flat_map(|(b, m)| std::iter::repeat_n(b, *m))
    }

    /// Block sizes with repetition, in canonical order (hence nonincreasing).
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks().map(Vec::len).collect()
    }

    /// Number of unique blocks `H` and their multiplicities sorted descending.
    pub fn multiplicities(&self) -> (usize, Vec<usize>) {
        let mut rho: Vec<usize> = self.blocks.iter().map(|(_, m)| *m).collect();
        rho.sort_unstable_by(|a, b| b.cmp(a));
        (rho.len(), rho)
    }

    pub fn restrict(&self, m: usize) -> Result<Self> {
        if m > self.n {
            return Err(Error::Domain(format!(
                "cannot restrict a feature allocation of [{}] to [{m}]",
                self.n
            )));
        }
        let mut counts: HashMap<Block, usize> = HashMap::new();
        for (block, mult) in &self.blocks {
            let cut: Block = block.iter().copied().filter(|&i| i <= m).collect();
            if !cut.is_empty() {
                *counts.entry(cut).or_insert(0) += mult;
            }
        }
        Ok(Self::from_counts(m, counts.into_iter().collect()))
    }

    /// Parses the text encoding; `n` must be supplied since trailing indices
    /// in no feature leave no trace in the text.
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        Self::new(n, parse_blocks(s)?)
    }
}

impl fmt::Display for FeatureAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_blocks(f, self.blocks())
    }
}

/// A feature allocation together with an ordering of its `K` blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedFeatureAllocation {
    base: FeatureAllocation,
    order: Vec<usize>,
}

impl OrderedFeatureAllocation {
    /// `order[j]` is the canonical position of the block placed `j`-th.
    pub fn new(base: FeatureAllocation, order: Vec<usize>) -> Result<Self> {
        let k = base.num_blocks();
        let mut seen = vec![false; k];
        if order.len() != k {
            return Err(Error::InvalidStructure(format!(
                "ordering has {} entries for {k} blocks",
                order.len()
            )));
        }
        for &j in &order {
            if j >= k || seen[j] {
                return Err(Error::InvalidStructure(format!(
                    "ordering {order:?} is not a permutation of 0..{k}"
                )));
            }
            seen[j] = true;
        }
        Ok(Self { base, order })
    }

    /// The identity ordering over the canonical blocks.
    pub fn canonical(base: FeatureAllocation) -> Self {
        let order = (0..base.num_blocks()).collect();
        Self { base, order }
    }

    pub fn base(&self) -> &FeatureAllocation {
        &self.base
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn ordered_blocks(&self) -> Vec<&Block> {
        let blocks: Vec<&Block> = self.base.blocks().collect();
        self.order.iter().map(|&j| blocks[j]).collect()
    }
}

/// Structures supporting restriction to a prefix `[m]`.
pub trait Restrict: Sized + PartialEq {
    fn size(&self) -> usize;
    fn restrict_to(&self, m: usize) -> Result<Self>;
}

impl Restrict for Partition {
    fn size(&self) -> usize {
        self.n
    }

    fn restrict_to(&self, m: usize) -> Result<Self> {
        self.restrict(m)
    }
}

impl Restrict for FeatureAllocation {
    fn size(&self) -> usize {
        self.n
    }

    fn restrict_to(&self, m: usize) -> Result<Self> {
        self.restrict(m)
    }
}

/// True iff sizes strictly increase and each element restricts to its predecessor.
pub fn check_consistency<T: Restrict>(seq: &[T]) -> bool {
    seq.windows(2).all(|w| {
        w[0].size() < w[1].size()
            && w[1]
                .restrict_to(w[0].size())
                .map(|r| r == w[0])
                .unwrap_or(false)
    })
}

/// Per-index labels, one label per index (clusters) or a finite label set
/// per index (features).
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSequence<L> {
    Cluster(Vec<L>),
    Feature(Vec<Vec<L>>),
}

impl<L> LabelSequence<L> {
    pub fn len(&self) -> usize {
        match self {
            LabelSequence::Cluster(z) => z.len(),
            LabelSequence::Feature(y) => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partition whose blocks are the sets of indices sharing a label.
pub fn induced_partition<L: Eq + Hash>(labels: &[L]) -> Partition {
    let mut slot: HashMap<&L, usize> = HashMap::new();
    let mut blocks: Vec<Block> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let k = *slot.entry(label).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[k].push(i + 1);
    }
    // Blocks are created in order of first appearance, so already canonical.
    Partition {
        n: labels.len(),
        blocks,
    }
}

/// Feature allocation with one block per distinct label.
pub fn induced_feature_allocation<L: Eq + Hash>(labels: &[Vec<L>]) -> FeatureAllocation {
    let mut slot: HashMap<&L, usize> = HashMap::new();
    let mut blocks: Vec<Block> = Vec::new();
    for (i, set) in labels.iter().enumerate() {
        for label in set {
            let k = *slot.entry(label).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            // A label repeated within one index's set counts once.
            if blocks[k].last() != Some(&(i + 1)) {
                blocks[k].push(i + 1);
            }
        }
    }
    let mut counts: HashMap<Block, usize> = HashMap::new();
    for b in blocks {
        *counts.entry(b).or_insert(0) += 1;
    }
    FeatureAllocation::from_counts(labels.len(), counts.into_iter().collect())
}

fn write_blocks<'a>(
    f: &mut fmt::Formatter<'_>,
    blocks: impl Iterator<Item = &'a Block>,
) -> fmt::Result {
    f.write_str("[")?;
    for (k, block) in blocks.enumerate() {
        if k > 0 {
            f.write_str(",")?;
        }
        f.write_str("[")?;
        for (j, i) in block.iter().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("]")?;
    }
    f.write_str("]")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.error(format!(
                "expected '{}', found {}",
                c as char,
                other.map_or("end of input".to_string(), |x| format!("'{}'", x as char))
            ))),
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an index".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                pos: start,
                msg: "index out of range".into(),
            })
    }

    fn error(&self, msg: String) -> Error {
        Error::Parse { pos: self.pos, msg }
    }
}

fn parse_blocks(s: &str) -> Result<Vec<Block>> {
    let mut cur = Cursor {
        bytes: s.as_bytes(),
        pos: 0,
    };
    let mut blocks = Vec::new();
    cur.expect(b'[')?;
    if cur.peek() == Some(b']') {
        cur.pos += 1;
    } else {
        loop {
            cur.expect(b'[')?;
            let mut block = vec![cur.number()?];
            while cur.peek() == Some(b',') {
                cur.pos += 1;
                block.push(cur.number()?);
            }
            cur.expect(b']')?;
            blocks.push(block);
            match cur.peek() {
                Some(b',') => cur.pos += 1,
                _ => break,
            }
        }
        cur.expect(b']')?;
    }
    if cur.peek().is_some() {
        return Err(cur.error("trailing input".into()));
    }
    Ok(blocks)
}
