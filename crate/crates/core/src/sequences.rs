//! Block-constructed symbolic sequences and their observables.
//!
//! A [`BlockSpec`] describes an infinite sequence made of constant blocks:
//! block `i` has length `ℓ_i` given by a [`LengthRule`] and carries the symbol
//! `symbols[i % symbols.len()]`. Block lengths are computed lazily in checked
//! 128-bit arithmetic, so sequences whose blocks grow super-exponentially can be
//! streamed without materializing them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::ObservableStream;

pub type Symbol = i32;

/// How successive block lengths are produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LengthRule {
    /// `ℓ_i = base^i · ℓ_0`, `i = 0, 1, …`
    Geometric { base: u64 },
    /// `ℓ_1 = initial`, `ℓ_i = i · Σ_{k<i} ℓ_k` for `i ≥ 2`.
    Cumulative,
    /// The listed lengths, repeated cyclically.
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    initial_block_length: u64,
    rule: LengthRule,
    symbols: Vec<Symbol>,
}

impl BlockSpec {
    pub fn new(initial_block_length: u64, rule: LengthRule, symbols: Vec<Symbol>) -> Result<Self> {
        if initial_block_length == 0 {
            return Err(Error::invalid("initial block length must be positive"));
        }
        if symbols.is_empty() {
            return Err(Error::invalid("symbol cycle must be non-empty"));
        }
        match &rule {
            LengthRule::Geometric { base } if *base == 0 => {
                return Err(Error::invalid("geometric base must be positive"));
            }
            LengthRule::Explicit(lengths) if lengths.is_empty() || lengths.contains(&0) => {
                return Err(Error::invalid("explicit lengths must be a non-empty list of positive integers"));
            }
            _ => {}
        }
        Ok(Self { initial_block_length, rule, symbols })
    }

    pub fn geometric(base: u64, symbols: Vec<Symbol>) -> Result<Self> {
        Self::new(1, LengthRule::Geometric { base }, symbols)
    }

    pub fn cumulative(symbols: Vec<Symbol>) -> Result<Self> {
        Self::new(1, LengthRule::Cumulative, symbols)
    }

    pub fn explicit(lengths: Vec<u64>, symbols: Vec<Symbol>) -> Result<Self> {
        let first = lengths.first().copied().unwrap_or(0);
        Self::new(first.max(1), LengthRule::Explicit(lengths), symbols)
    }

    /// One 0, two 1s, four 0s, eight 1s, …
    pub fn example1() -> Self {
        Self::geometric(2, vec![0, 1]).expect("valid")
    }

    /// Blocks of lengths 1, 2, 9, 48, … with each block `i` times the total before it.
    pub fn example2() -> Self {
        Self::cumulative(vec![0, 1]).expect("valid")
    }

    pub fn initial_block_length(&self) -> u64 {
        self.initial_block_length
    }

    pub fn rule(&self) -> &LengthRule {
        &self.rule
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Lazy block lengths `ℓ_0, ℓ_1, …` (cumulative rule: `ℓ_1, ℓ_2, …`).
    pub fn block_lengths(&self) -> BlockLengths {
        BlockLengths { rule: self.rule.clone(), initial: self.initial_block_length as u128, index: 0, last: 0, prefix: 0 }
    }

    /// Cursor positioned at the first symbol.
    pub fn cursor(&self) -> SymbolCursor {
        SymbolCursor { symbols: self.symbols.clone(), lengths: self.block_lengths(), block: 0, remaining: 0, failed: false }
    }

    /// Cursor positioned at 0-based `offset`, skipping whole blocks.
    pub fn cursor_at(&self, offset: u128) -> Result<SymbolCursor> {
        let mut cursor = self.cursor();
        cursor.seek(offset)?;
        Ok(cursor)
    }
}

/// Iterator over block lengths in checked 128-bit arithmetic.
#[derive(Debug, Clone)]
pub struct BlockLengths {
    rule: LengthRule,
    initial: u128,
    index: u64,
    last: u128,
    prefix: u128,
}

impl BlockLengths {
    fn advance(&mut self) -> Result<u128> {
        let i = self.index;
        let len = match &self.rule {
            LengthRule::Geometric { base } => {
                if i == 0 {
                    self.initial
                } else {
                    self.last.checked_mul(*base as u128).ok_or_else(|| Error::Overflow(format!("geometric block {i} exceeds 128 bits")))?
                }
            }
            LengthRule::Cumulative => {
                if i == 0 {
                    self.initial
                } else {
                    // 1-based block index is i + 1
                    self.prefix
                        .checked_mul(i as u128 + 1)
                        .ok_or_else(|| Error::Overflow(format!("cumulative block {} exceeds 128 bits", i + 1)))?
                }
            }
            LengthRule::Explicit(lengths) => lengths[(i % lengths.len() as u64) as usize] as u128,
        };
        self.prefix = self.prefix.checked_add(len).ok_or_else(|| Error::Overflow("total sequence length exceeds 128 bits".into()))?;
        self.last = len;
        self.index += 1;
        Ok(len)
    }
}

impl Iterator for BlockLengths {
    type Item = Result<u128>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.advance())
    }
}

/// Pull-based symbol iterator with O(1) state; yields an error (once) on length overflow.
#[derive(Debug, Clone)]
pub struct SymbolCursor {
    symbols: Vec<Symbol>,
    lengths: BlockLengths,
    block: u64,
    remaining: u128,
    failed: bool,
}

impl SymbolCursor {
    fn enter_next_block(&mut self) -> Result<()> {
        let len = self.lengths.advance()?;
        self.block = self.lengths.index;
        self.remaining = len;
        Ok(())
    }

    /// Index (0-based) of the block the next symbol belongs to.
    fn current_symbol(&self) -> Symbol {
        self.symbols[((self.block - 1) % self.symbols.len() as u64) as usize]
    }

    /// Skips `offset` symbols.
    pub fn seek(&mut self, mut offset: u128) -> Result<()> {
        loop {
            if self.remaining == 0 {
                self.enter_next_block()?;
            }
            if offset < self.remaining {
                self.remaining -= offset;
                return Ok(());
            }
            offset -= self.remaining;
            self.remaining = 0;
        }
    }
}

impl Iterator for SymbolCursor {
    type Item = Result<Symbol>;

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.remaining == 0 {
            if let Err(e) = self.enter_next_block() {
                self.failed = true;
                return Some(Err(e));
            }
        }
        self.remaining -= 1;
        Some(Ok(self.current_symbol()))
    }
}

/// First `n` symbols of the block construction.
pub fn generate(spec: &BlockSpec, n: usize) -> Result<Vec<Symbol>> {
    generate_at(spec, 0, n)
}

/// `n` symbols starting at 0-based `offset`.
pub fn generate_at(spec: &BlockSpec, offset: u128, n: usize) -> Result<Vec<Symbol>> {
    if n == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    spec.cursor_at(offset)?.take(n).collect()
}

/// Symbol → real lookup table with its bound `M = max |value|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableMap {
    table: BTreeMap<Symbol, f64>,
    bound: f64,
}

impl ObservableMap {
    pub fn new(table: BTreeMap<Symbol, f64>) -> Result<Self> {
        if let Some((s, v)) = table.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("observable value for symbol {s} is not finite: {v}")));
        }
        let bound = table.values().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { table, bound })
    }

    pub fn from_pairs(pairs: &[(Symbol, f64)]) -> Result<Self> {
        Self::new(pairs.iter().copied().collect())
    }

    pub fn identity(symbols: &[Symbol]) -> Self {
        Self::new(symbols.iter().map(|&s| (s, s as f64)).collect()).expect("finite")
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn table(&self) -> &BTreeMap<Symbol, f64> {
        &self.table
    }

    pub fn get(&self, symbol: Symbol) -> Result<f64> {
        self.table.get(&symbol).copied().ok_or(Error::UnmappedSymbol(symbol))
    }

    /// Fails on the first symbol without an entry.
    pub fn check_covers(&self, symbols: &[Symbol]) -> Result<()> {
        symbols.iter().try_for_each(|&s| self.get(s).map(|_| ()))
    }
}

/// Maps a finite symbol sequence through `map`.
pub fn observe(seq: &[Symbol], map: &ObservableMap) -> Result<ObservableStream> {
    let values = seq.iter().map(|&s| map.get(s)).collect::<Result<Vec<_>>>()?;
    Ok(ObservableStream::from_iter_ok(values.into_iter(), Some(map.bound())))
}

/// A block construction together with its observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct SequenceSpec {
    pub blocks: BlockSpec,
    pub observable: ObservableMap,
}

impl SequenceSpec {
    pub fn new(blocks: BlockSpec, observable: ObservableMap) -> Result<Self> {
        observable.check_covers(blocks.symbols())?;
        Ok(Self { blocks, observable })
    }

    pub fn example1() -> Self {
        Self::new(BlockSpec::example1(), ObservableMap::identity(&[0, 1])).expect("covered")
    }

    pub fn example2() -> Self {
        Self::new(BlockSpec::example2(), ObservableMap::identity(&[0, 1])).expect("covered")
    }

    /// Lazy `φ` stream over the infinite block sequence.
    pub fn stream(&self) -> ObservableStream {
        let map = self.observable.clone();
        let bound = Some(map.bound());
        let cursor = self.blocks.cursor();
        ObservableStream::new(cursor.map(move |s| s.and_then(|s| map.get(s))), bound)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengths: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<u64>,
    symbols: Vec<Symbol>,
    observable: BTreeMap<Symbol, f64>,
}

impl TryFrom<SpecDocument> for SequenceSpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        let initial = doc.initial.unwrap_or(1);
        let blocks = match doc.rule.as_str() {
            "geometric" => {
                let base = doc.base.ok_or_else(|| Error::invalid("geometric rule requires \"base\""))?;
                BlockSpec::new(initial, LengthRule::Geometric { base }, doc.symbols)?
            }
            "cumulative" => BlockSpec::new(initial, LengthRule::Cumulative, doc.symbols)?,
            "explicit" => {
                let lengths = doc.lengths.ok_or_else(|| Error::invalid("explicit rule requires \"lengths\""))?;
                BlockSpec::explicit(lengths, doc.symbols)?
            }
            other => return Err(Error::invalid(format!("unknown rule {other:?}"))),
        };
        SequenceSpec::new(blocks, ObservableMap::new(doc.observable)?)
    }
}

impl From<SequenceSpec> for SpecDocument {
    fn from(spec: SequenceSpec) -> Self {
        let initial = spec.blocks.initial_block_length;
        let (rule, base, lengths, initial) = match spec.blocks.rule {
            LengthRule::Geometric { base } => ("geometric", Some(base), None, (initial != 1).then_some(initial)),
            LengthRule::Cumulative => ("cumulative", None, None, (initial != 1).then_some(initial)),
            LengthRule::Explicit(lengths) => ("explicit", None, Some(lengths), None),
        };
        SpecDocument { rule: rule.to_string(), base, lengths, initial, symbols: spec.blocks.symbols, observable: spec.observable.table }
    }
}

/// The ±1 sequence `1, −1, −1, 1, 1, 1, …` whose run `i` has length `i`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignedRunSequence;

impl SignedRunSequence {
    /// 1-based position at which run `i` starts.
    pub fn run_start(run: u64) -> u64 {
        1 + run * (run - 1) / 2
    }

    /// Run index containing 1-based `position`.
    pub fn run_of(position: u64) -> u64 {
        assert!(position >= 1, "positions are 1-based");
        // largest i with 1 + i(i-1)/2 <= position
        let mut i = ((1.0 + (8.0 * position as f64 - 7.0).sqrt()) / 2.0) as u64;
        i = i.max(1);
        while Self::run_start(i) > position {
            i -= 1;
        }
        while Self::run_start(i + 1) <= position {
            i += 1;
        }
        i
    }

    pub fn sign_of_run(run: u64) -> i32 {
        if run % 2 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn symbol_at(position: u64) -> i32 {
        Self::sign_of_run(Self::run_of(position))
    }

    /// Symbols from position 1 on.
    pub fn iter() -> impl Iterator<Item = i32> + Send {
        SignedRunIter::new().map(|(sign, _)| sign)
    }
}

/// `f(σ^{position−1} j)`: remaining run length at `position` times the sign there.
pub fn example3_f(position: u64) -> f64 {
    let run = SignedRunSequence::run_of(position);
    let remaining = SignedRunSequence::run_start(run) + run - position;
    SignedRunSequence::sign_of_run(run) as f64 * remaining as f64
}

/// Unbounded stream `f(j), f(σj), f(σ²j), …` in O(1) per value.
pub fn example3_stream() -> ObservableStream {
    ObservableStream::from_iter_ok(SignedRunIter::new().map(|(sign, remaining)| sign as f64 * remaining as f64), None)
}

/// Yields `(sign, remaining run length)` per position.
struct SignedRunIter {
    run: u64,
    remaining: u64,
}

impl SignedRunIter {
    fn new() -> Self {
        Self { run: 0, remaining: 0 }
    }
}

impl Iterator for SignedRunIter {
    type Item = (i32, u64);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            self.run += 1;
            self.remaining = self.run;
        }
        let item = (SignedRunSequence::sign_of_run(self.run), self.remaining);
        self.remaining -= 1;
        Some(item)
    }
}
