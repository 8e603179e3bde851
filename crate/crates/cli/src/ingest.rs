//! Reading symbol sequences from text, CSV, FASTA and numeric files.

use bct_core::alphabet::{Alphabet, Symbol};
use bct_core::error::{BctError, Result};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Whitespace-separated symbol labels.
    SymbolsText,
    /// A single FASTA record over A, C, G, T.
    DnaFasta,
    /// Comma- or whitespace-separated integer symbols.
    IntegerCsv,
    /// Real values binned by thresholds.
    QuantizedNumeric,
}

/// How to turn a file into symbols.
#[derive(Clone, Debug)]
pub struct IngestSpec {
    pub format: Format,
    /// Declared alphabet; detected from the data when absent.
    pub alphabet: Option<Alphabet>,
    /// Ascending cut points for [`Format::QuantizedNumeric`].
    pub thresholds: Vec<f64>,
    /// Quantize percentage changes between successive values instead of the values.
    pub percent_change: bool,
}

impl IngestSpec {
    pub fn new(format: Format) -> Self {
        IngestSpec {
            format,
            alphabet: None,
            thresholds: Vec::new(),
            percent_change: false,
        }
    }
}

pub fn ingest(path: &Path, spec: &IngestSpec) -> Result<(Alphabet, Vec<Symbol>)> {
    let text = std::fs::read_to_string(path)?;
    ingest_str(&text, spec)
}

pub fn ingest_str(text: &str, spec: &IngestSpec) -> Result<(Alphabet, Vec<Symbol>)> {
    match spec.format {
        Format::SymbolsText => labels(text.split_whitespace(), spec.alphabet.as_ref()),
        Format::IntegerCsv => integers(tokens(text), spec.alphabet.as_ref()),
        Format::DnaFasta => fasta(text),
        Format::QuantizedNumeric => quantize(text, &spec.thresholds, spec.percent_change),
    }
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

fn labels<'a>(
    toks: impl Iterator<Item = &'a str>,
    declared: Option<&Alphabet>,
) -> Result<(Alphabet, Vec<Symbol>)> {
    let toks: Vec<&str> = toks.collect();
    let alphabet = match declared {
        Some(a) => a.clone(),
        None => detect(&toks)?,
    };
    let symbols = toks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            alphabet.index_of(t).ok_or_else(|| {
                BctError::Ingest(format!("unknown symbol {t:?} at position {}", i + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((alphabet, symbols))
}

/// Integer labels give `{0..max}`; anything else gives the sorted distinct labels.
fn detect(toks: &[&str]) -> Result<Alphabet> {
    let distinct: BTreeSet<&str> = toks.iter().copied().collect();
    let numbers: Option<Vec<usize>> = distinct.iter().map(|t| t.parse::<usize>().ok()).collect();
    match numbers {
        Some(ns) => Alphabet::numeric(ns.iter().copied().max().map_or(2, |x| (x + 1).max(2))),
        None => {
            let mut labels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
            if labels.len() == 1 {
                return Err(BctError::Ingest(format!(
                    "only one distinct symbol {:?}; declare the alphabet",
                    labels[0]
                )));
            }
            labels.sort();
            Alphabet::new(labels)
        }
    }
}

fn integers<'a>(
    toks: impl Iterator<Item = &'a str>,
    declared: Option<&Alphabet>,
) -> Result<(Alphabet, Vec<Symbol>)> {
    let values = toks
        .enumerate()
        .map(|(i, t)| {
            t.parse::<usize>().map_err(|_| {
                BctError::Ingest(format!("unknown symbol {t:?} at position {}", i + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let alphabet = match declared {
        Some(a) => a.clone(),
        None => Alphabet::numeric(values.iter().copied().max().map_or(2, |x| (x + 1).max(2)))?,
    };
    let symbols = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            alphabet.check(v).map_err(|_| {
                BctError::Ingest(format!("unknown symbol \"{v}\" at position {}", i + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((alphabet, symbols))
}

fn fasta(text: &str) -> Result<(Alphabet, Vec<Symbol>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.starts_with('>') => {}
        _ => {
            return Err(BctError::Ingest(
                "malformed FASTA: missing '>' header line".into(),
            ))
        }
    }
    let mut symbols = Vec::new();
    for (lineno, line) in lines {
        if line.starts_with('>') {
            return Err(BctError::Ingest(format!(
                "malformed FASTA: second record at line {}; only one record is supported",
                lineno + 1
            )));
        }
        for (col, c) in line.trim_end().chars().enumerate() {
            let s = match c.to_ascii_uppercase() {
                'A' => 0,
                'C' => 1,
                'G' => 2,
                'T' => 3,
                _ => {
                    return Err(BctError::Ingest(format!(
                        "unknown symbol {c:?} at line {}, column {}",
                        lineno + 1,
                        col + 1
                    )))
                }
            };
            symbols.push(s);
        }
    }
    Ok((Alphabet::dna(), symbols))
}

fn quantize(
    text: &str,
    thresholds: &[f64],
    percent_change: bool,
) -> Result<(Alphabet, Vec<Symbol>)> {
    if thresholds.is_empty() {
        return Err(BctError::Ingest(
            "quantized-numeric input needs at least one threshold".into(),
        ));
    }
    if thresholds
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(BctError::Ingest(
            "thresholds must be strictly increasing".into(),
        ));
    }
    if thresholds.len() > 255 {
        return Err(BctError::Ingest(
            "at most 255 thresholds are supported".into(),
        ));
    }
    let values = tokens(text)
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    BctError::Ingest(format!("invalid number {t:?} at position {}", i + 1))
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let series: Vec<f64> = if percent_change {
        values
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                if w[0] == 0.0 {
                    Err(BctError::Ingest(format!(
                        "zero value at position {} in percent-change mode",
                        i + 1
                    )))
                } else {
                    Ok(100.0 * (w[1] - w[0]) / w[0])
                }
            })
            .collect::<Result<_>>()?
    } else {
        values
    };
    let symbols = series
        .iter()
        .map(|&v| thresholds.iter().filter(|&&t| t < v).count() as Symbol)
        .collect();
    Ok((Alphabet::numeric(thresholds.len() + 1)?, symbols))
}
