//! Alphabets and observed series.

use crate::error::{BctError, Result};

/// A symbol index in `0..m`.
pub type Symbol = u8;

/// A finite symbol set `{0, .., m-1}` with display labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(BctError::AlphabetTooSmall(labels.len()));
        }
        if labels.len() > 256 {
            return Err(BctError::AlphabetTooLarge(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(BctError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Alphabet { labels })
    }

    /// The alphabet `{0, .., m-1}` labelled by its decimal indices.
    pub fn numeric(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| i.to_string()).collect())
    }

    /// `A, C, G, T` mapped to `0, 1, 2, 3`.
    pub fn dna() -> Self {
        Self::new(["A", "C", "G", "T"].iter().map(|s| s.to_string()).collect())
            .expect("static alphabet")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, symbol: Symbol) -> &str {
        &self.labels[symbol as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<Symbol> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| i as Symbol)
    }

    pub fn check(&self, symbol: usize) -> Result<Symbol> {
        if symbol < self.size() {
            Ok(symbol as Symbol)
        } else {
            Err(BctError::SymbolOutOfRange {
                symbol,
                size: self.size(),
            })
        }
    }
}

/// Observations `x_1..x_n` together with the initial context `x_{-D+1}..x_0`.
///
/// Both sequences are stored in time order; `context.last()` is `x_0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series {
    alphabet: Alphabet,
    context: Vec<Symbol>,
    data: Vec<Symbol>,
}

impl Series {
    pub fn new(alphabet: Alphabet, context: Vec<Symbol>, data: Vec<Symbol>) -> Result<Self> {
        let m = alphabet.size();
        for &s in context.iter().chain(data.iter()) {
            if s as usize >= m {
                return Err(BctError::SymbolOutOfRange {
                    symbol: s as usize,
                    size: m,
                });
            }
        }
        Ok(Series {
            alphabet,
            context,
            data,
        })
    }

    /// Splits a raw symbol stream: the first `depth` symbols become the
    /// initial context and are excluded from the observations.
    pub fn consume_prefix(alphabet: Alphabet, symbols: Vec<Symbol>, depth: usize) -> Result<Self> {
        if symbols.len() < depth {
            return Err(BctError::InsufficientContext {
                needed: depth,
                available: symbols.len(),
            });
        }
        let mut context = symbols;
        let data = context.split_off(depth);
        Self::new(alphabet, context, data)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn m(&self) -> usize {
        self.alphabet.size()
    }

    pub fn context(&self) -> &[Symbol] {
        &self.context
    }

    pub fn data(&self) -> &[Symbol] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The series restricted to its first `len` observations.
    pub fn prefix(&self, len: usize) -> Series {
        Series {
            alphabet: self.alphabet.clone(),
            context: self.context.clone(),
            data: self.data[..len.min(self.data.len())].to_vec(),
        }
    }

    /// Context followed by data, in time order.
    pub fn full(&self) -> Vec<Symbol> {
        let mut v = self.context.clone();
        v.extend_from_slice(&self.data);
        v
    }

    /// The `depth` symbols preceding observation `i` (0-based), most recent first.
    pub fn preceding(&self, i: usize, depth: usize) -> Vec<Symbol> {
        let full_pos = self.context.len() + i;
        let full = |k: usize| {
            if k < self.context.len() {
                self.context[k]
            } else {
                self.data[k - self.context.len()]
            }
        };
        (1..=depth).map(|d| full(full_pos - d)).collect()
    }
}
