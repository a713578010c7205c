//! Resolution of the `INPUT` argument shared by several subcommands.

use std::fs;
use std::path::Path;

use birkhoff::entropy;
use birkhoff::sequences::{self, SequenceSpec, SignedRunSequence};
use birkhoff::{Error, ObservableStream, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub enum Source {
    Spec(SequenceSpec),
    Example3,
    Bernoulli(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Input {
    pub name: String,
    pub source: Source,
    /// Hex sha256 of the file bytes, or of the built-in name.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

impl Input {
    pub fn resolve(arg: &str) -> Result<Self> {
        let builtin = |source| Ok(Self { name: arg.to_owned(), source, hash: sha256_hex(arg.as_bytes()) });
        match arg {
            "example1" => return builtin(Source::Spec(SequenceSpec::example1())),
            "example2" => return builtin(Source::Spec(SequenceSpec::example2())),
            "example3" => return builtin(Source::Example3),
            _ => {}
        }
        if let Some(p) = arg.strip_prefix("bernoulli:") {
            let p: f64 = p.parse().map_err(|_| invalid(format!("bad probability in '{arg}'")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("probability must lie in [0, 1], got {p}")));
            }
            return builtin(Source::Bernoulli(p));
        }
        let path = Path::new(arg);
        let bytes = fs::read(path)?;
        let hash = sha256_hex(&bytes);
        let text = String::from_utf8(bytes).map_err(|_| invalid(format!("{arg} is not UTF-8")))?;
        let source = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Source::Spec(SequenceSpec::from_json(&text)?),
            Some("csv") => Source::Values(read_values(&text)?),
            _ => {
                return Err(invalid(format!("unknown input '{arg}': expected example1|example2|example3|bernoulli:p or a .json/.csv file")))
            }
        };
        Ok(Self { name: arg.to_owned(), source, hash })
    }

    pub fn stream(&self, seed: u64) -> Result<ObservableStream> {
        match &self.source {
            Source::Spec(spec) => Ok(spec.stream()),
            Source::Example3 => Ok(sequences::example3_stream()),
            Source::Bernoulli(p) => entropy::bernoulli_stream(*p, seed),
            Source::Values(v) => ObservableStream::from_values(v.clone()),
        }
    }

    /// Up to `n` `(symbol, phi)` pairs.
    pub fn symbols(&self, n: usize, seed: u64) -> Result<Vec<(i64, f64)>> {
        match &self.source {
            Source::Spec(spec) => {
                let symbols = sequences::generate(&spec.blocks, n)?;
                symbols.into_iter().map(|s| Ok((i64::from(s), spec.observable.get(s)?))).collect()
            }
            Source::Example3 => {
                Ok((1..=n as u64).map(|pos| (i64::from(SignedRunSequence::symbol_at(pos)), sequences::example3_f(pos))).collect())
            }
            Source::Bernoulli(_) => {
                let values = self.stream(seed)?.take_values(n)?;
                Ok(values.into_iter().map(|v| (v as i64, v)).collect())
            }
            Source::Values(_) => Err(invalid("generate needs a symbolic input, not a CSV value stream")),
        }
    }
}

/// Values from a CSV: a `phi` or `value` column if headed, otherwise the last column.
fn read_values(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = reader.records();
    let mut column = None;
    let mut values = Vec::new();
    let parse = |rec: &csv::StringRecord, col: usize, line: usize| -> Result<f64> {
        let field = rec.get(col).ok_or_else(|| invalid(format!("row {line} has no column {col}")))?;
        field.trim().parse::<f64>().map_err(|_| invalid(format!("row {line}: '{field}' is not a number")))
    };
    if let Some(first) = records.next() {
        let first = first.map_err(|e| invalid(e.to_string()))?;
        let last = first.len().saturating_sub(1);
        match first.iter().position(|f| matches!(f.trim(), "phi" | "value")) {
            Some(c) => column = Some(c),
            None if first.iter().all(|f| f.trim().parse::<f64>().is_ok()) => {
                values.push(parse(&first, last, 1)?);
                column = Some(last);
            }
            None => column = Some(last),
        }
    }
    let col = column.ok_or_else(|| invalid("empty CSV input"))?;
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| invalid(e.to_string()))?;
        values.push(parse(&rec, col, i + 2)?);
    }
    if values.is_empty() {
        return Err(invalid("CSV input has no values"));
    }
    Ok(values)
}
