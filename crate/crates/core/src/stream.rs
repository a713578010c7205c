//! Pull-based bounded observable streams.

use crate::error::{Error, Result};

/// A lazily generated real sequence `φ(x_0), φ(x_1), …` with an optional declared bound `M`.
pub struct ObservableStream {
    inner: Box<dyn Iterator<Item = Result<f64>> + Send>,
    bound: Option<f64>,
}

impl ObservableStream {
    pub fn new<I>(iter: I, bound: Option<f64>) -> Self
    where
        I: Iterator<Item = Result<f64>> + Send + 'static,
    {
        Self { inner: Box::new(iter), bound }
    }

    /// Wraps an infallible iterator.
    pub fn from_iter_ok<I>(iter: I, bound: Option<f64>) -> Self
    where
        I: Iterator<Item = f64> + Send + 'static,
    {
        Self::new(iter.map(Ok), bound)
    }

    /// Finite stream over owned values; the bound is their max absolute value.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite stream value {bad}")));
        }
        let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self::from_iter_ok(values.into_iter(), Some(bound)))
    }

    pub fn constant(value: f64) -> Self {
        Self::from_iter_ok(std::iter::repeat(value), Some(value.abs()))
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    /// Drains up to `n` values.
    pub fn take_values(self, n: usize) -> Result<Vec<f64>> {
        self.take(n).collect()
    }
}

impl Iterator for ObservableStream {
    type Item = Result<f64>;

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next()
    }
}

impl std::fmt::Debug for ObservableStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObservableStream").field("bound", &self.bound).finish_non_exhaustive()
    }
}
