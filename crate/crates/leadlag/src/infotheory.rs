//! Plug-in entropy, mutual information and Lempel-Ziv entropy rate.
//!
//! All quantities are in bits. The plug-in estimator is the entropy of
//! the empirical distribution and is biased downward, which keeps the
//! link validation conservative.

use crate::symbolize::SymbolSeries;
use crate::{Error, Result};

/// Negative MI smaller than this in magnitude is treated as rounding.
const MI_CLAMP: f64 = 1e-12;

/// Joint count table of two symbol series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// row-major q_x x q_y counts
    pub counts: Vec<u64>,
    pub qx: usize,
    pub qy: usize,
    pub n: usize,
}

impl ContingencyTable {
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.qy + b]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.qx).map(|a| (0..self.qy).map(|b| self.get(a, b)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.qy).map(|b| (0..self.qx).map(|a| self.get(a, b)).sum()).collect()
    }
}

/// Lempel-Ziv entropy-rate estimate in bits per symbol.
#[derive(Debug, Clone, Copy)]
pub struct EntropyRate {
    pub value: f64,
    pub n: usize,
    pub q: usize,
    /// true when n is too short for the estimate to have converged
    pub unreliable: bool,
}

fn entropy_of_counts(counts: impl Iterator<Item = u64>, n: usize) -> f64 {
    let n = n as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// H = −Σ (Λ(x)/n) log₂(Λ(x)/n) over the empirical distribution.
pub fn plugin_entropy(s: &SymbolSeries) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut counts = vec![0u64; s.q];
    for &v in &s.symbols {
        counts[v as usize] += 1;
    }
    Ok(entropy_of_counts(counts.into_iter(), s.len()))
}

pub fn contingency(x: &SymbolSeries, y: &SymbolSeries) -> Result<ContingencyTable> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySeries);
    }
    let (qx, qy) = (x.q, y.q);
    let mut counts = vec![0u64; qx * qy];
    for (&a, &b) in x.symbols.iter().zip(&y.symbols) {
        counts[a as usize * qy + b as usize] += 1;
    }
    Ok(ContingencyTable {
        counts,
        qx,
        qy,
        n: x.len(),
    })
}

/// I = H(x) + H(y) − H(x,y), the joint entropy taken over the paired
/// symbol stream. Tiny negative rounding is clamped to zero.
pub fn mutual_information(x: &SymbolSeries, y: &SymbolSeries) -> Result<f64> {
    let table = contingency(x, y)?;
    Ok(mi_from_table(&table))
}

pub fn mi_from_table(table: &ContingencyTable) -> f64 {
    let hx = entropy_of_counts(table.row_sums().into_iter(), table.n);
    let hy = entropy_of_counts(table.col_sums().into_iter(), table.n);
    let hxy = entropy_of_counts(table.counts.iter().copied(), table.n);
    let mi = hx + hy - hxy;
    if mi < 0.0 && mi > -MI_CLAMP {
        0.0
    } else {
        mi
    }
}

/// Lempel-Ziv-76 phrase complexity of a symbol sequence.
///
/// Scans left to right, counting the minimal number of phrases such that
/// each new phrase is not a substring of the preceding text (Kaspar and
/// Schuster's formulation of the LZ76 parsing).
pub fn lz76_complexity(s: &[u8]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let mut complexity = 1;
    let mut prefix_len = 1; // length of s[..i] against which we match
    let mut component_len = 1; // current candidate phrase length
    let mut max_match = 0;
    let mut offset = 1; // match attempt start within the prefix
    while prefix_len + component_len <= n {
        if s[offset - 1 + component_len - 1] == s[prefix_len + component_len - 1] {
            component_len += 1;
        } else {
            max_match = max_match.max(component_len - 1);
            offset += 1;
            if offset == prefix_len + 1 {
                // no earlier occurrence: close the phrase
                complexity += 1;
                prefix_len += max_match + 1;
                component_len = 1;
                offset = 1;
                max_match = 0;
            } else {
                component_len = 1;
            }
        }
    }
    if component_len > 1 {
        complexity += 1;
    }
    complexity
}

/// ĥ = C_LZ76(s) · log₂(n) / n bits per symbol.
///
/// Finite-n estimates may slightly exceed log₂ q; values are reported
/// raw. Estimates for n < 100 are flagged unreliable.
pub fn lz_entropy_rate(s: &SymbolSeries) -> Result<EntropyRate> {
    let n = s.len();
    if n < 2 {
        return Err(Error::InsufficientData { n, q: s.q });
    }
    let c = lz76_complexity(&s.symbols);
    Ok(EntropyRate {
        value: c as f64 * (n as f64).log2() / n as f64,
        n,
        q: s.q,
        unreliable: n < 100,
    })
}
