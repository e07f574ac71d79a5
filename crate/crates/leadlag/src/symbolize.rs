//! Equal-population quantile discretization of return series.
//!
//! Each value is mapped to `floor(rank * q / n)` where `rank` is its
//! zero-based stable rank (ties broken by original position), so bin
//! populations differ by at most one regardless of ties.

use ndarray::ArrayView2;

use crate::{Error, Result};

/// A discretized series over the alphabet `0..q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSeries {
    pub symbols: Vec<u8>,
    pub q: usize,
}

impl SymbolSeries {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// One SymbolSeries per asset, common length and alphabet.
#[derive(Debug, Clone)]
pub struct SymbolMatrix {
    pub columns: Vec<SymbolSeries>,
    pub q: usize,
}

pub fn quantile_symbolize(x: &[f64], q: usize) -> Result<SymbolSeries> {
    if q < 2 {
        return Err(Error::InvalidArgument {
            msg: format!("bin count q={q} must be at least 2"),
        });
    }
    if q > u8::MAX as usize + 1 {
        return Err(Error::InvalidArgument {
            msg: format!("bin count q={q} exceeds the symbol alphabet limit"),
        });
    }
    let n = x.len();
    if n < q {
        return Err(Error::InsufficientData { n, q });
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep original order, fixing each tie's rank
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap().then(i.cmp(&j)));
    let mut symbols = vec![0u8; n];
    for (rank, &idx) in order.iter().enumerate() {
        symbols[idx] = (rank * q / n) as u8;
    }
    Ok(SymbolSeries { symbols, q })
}

/// Symbolize every column independently (each asset uses its own quantiles).
pub fn symbolize_matrix(a: ArrayView2<f64>, q: usize) -> Result<SymbolMatrix> {
    let columns = a
        .columns()
        .into_iter()
        .map(|col| quantile_symbolize(col.as_standard_layout().as_slice().unwrap(), q))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolMatrix { columns, q })
}
