//! Price ingestion, log returns and lag-aligned pair matrices.
//!
//! Returns are always computed within a trading day; the lagged pair
//! matrices A (leader rows) and B (rows lambda steps later) likewise
//! never pair rows across a day boundary.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    /// `timestamp,day,SYM1,SYM2,...`
    Wide,
    /// `timestamp,day,symbol,price`
    Long,
}

/// Timestamped per-symbol price observations with trading-day labels.
///
/// Invariants: all prices strictly positive, timestamps strictly
/// increasing, day labels non-decreasing, no missing cells.
#[derive(Debug, Clone)]
pub struct PriceMatrix {
    pub symbols: Vec<String>,
    pub timestamps: Vec<String>,
    pub day_index: Vec<i64>,
    /// rows = timestamps, columns = symbols
    pub prices: Array2<f64>,
}

/// Log-return matrix sampled every `tau` steps within each trading day.
#[derive(Debug, Clone)]
pub struct ReturnMatrix {
    pub symbols: Vec<String>,
    pub day_index: Vec<i64>,
    pub returns: Array2<f64>,
    pub tau: usize,
}

/// Aligned matrices A (earlier returns) and B (returns `lambda` steps
/// later), built day by day so no row pair spans a day boundary.
#[derive(Debug, Clone)]
pub struct LaggedPair {
    pub symbols: Vec<String>,
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub lambda: usize,
    /// day label of each aligned row pair
    pub day_index: Vec<i64>,
}

impl LaggedPair {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.a.ncols()
    }
}

/// Outcome of an ingest: the matrix plus symbols dropped for missing data.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub matrix: PriceMatrix,
    pub dropped: Vec<String>,
}

pub fn ingest_csv(path: &Path, format: CsvFormat) -> Result<Ingested> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut text = String::new();
    file.read_to_string(&mut text)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    ingest_str(&text, format)
}

pub fn ingest_str(text: &str, format: CsvFormat) -> Result<Ingested> {
    match format {
        CsvFormat::Wide => ingest_wide(text),
        CsvFormat::Long => ingest_long(text),
    }
}

fn parse_price(field: &str, line: usize) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse {
            line,
            msg: format!("invalid price {field:?}"),
        })
}

fn parse_day(field: &str, line: usize) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid day label {:?}", field.trim()),
    })
}

fn ingest_wide(text: &str) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.len() < 3 || headers.get(0) != Some("timestamp") || headers.get(1) != Some("day") {
        return Err(Error::Parse {
            line: 1,
            msg: "wide header must be `timestamp,day,SYM1,...`".into(),
        });
    }
    let symbols: Vec<String> = headers.iter().skip(2).map(|s| s.to_string()).collect();

    let mut timestamps = Vec::new();
    let mut day_index = Vec::new();
    // per-symbol column, None for blank cells
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); symbols.len()];

    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() != symbols.len() + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, got {}", symbols.len() + 2, rec.len()),
            });
        }
        timestamps.push(rec[0].to_string());
        day_index.push(parse_day(&rec[1], line)?);
        for (j, sym) in symbols.iter().enumerate() {
            let v = parse_price(&rec[j + 2], line)?;
            if let Some(p) = v {
                if p <= 0.0 {
                    return Err(Error::NonPositivePrice {
                        symbol: sym.clone(),
                        row: line,
                        value: p,
                    });
                }
            }
            cols[j].push(v);
        }
    }
    assemble(symbols, timestamps, day_index, cols)
}

fn ingest_long(text: &str) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expect = ["timestamp", "day", "symbol", "price"];
    if headers.iter().collect::<Vec<_>>() != expect {
        return Err(Error::Parse {
            line: 1,
            msg: "long header must be `timestamp,day,symbol,price`".into(),
        });
    }

    // (timestamp, day) in first-seen order; symbol -> price per timestamp
    let mut ts_order: Vec<(String, i64)> = Vec::new();
    let mut ts_pos: BTreeMap<String, usize> = BTreeMap::new();
    let mut symbols: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, String), f64> = BTreeMap::new();

    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let ts = rec[0].to_string();
        let day = parse_day(&rec[1], line)?;
        let sym = rec[2].to_string();
        let price = parse_price(&rec[3], line)?.ok_or_else(|| Error::Parse {
            line,
            msg: "missing price".into(),
        })?;
        if price <= 0.0 {
            return Err(Error::NonPositivePrice {
                symbol: sym,
                row: line,
                value: price,
            });
        }
        let row = *ts_pos.entry(ts.clone()).or_insert_with(|| {
            ts_order.push((ts.clone(), day));
            ts_order.len() - 1
        });
        if !symbols.contains(&sym) {
            symbols.push(sym.clone());
        }
        if cells.insert((row, sym.clone()), price).is_some() {
            return Err(Error::DuplicateEntry {
                timestamp: ts,
                symbol: sym,
            });
        }
    }

    let timestamps: Vec<String> = ts_order.iter().map(|(t, _)| t.clone()).collect();
    let day_index: Vec<i64> = ts_order.iter().map(|(_, d)| *d).collect();
    let cols: Vec<Vec<Option<f64>>> = symbols
        .iter()
        .map(|s| {
            (0..timestamps.len())
                .map(|r| cells.get(&(r, s.clone())).copied())
                .collect()
        })
        .collect();
    assemble(symbols, timestamps, day_index, cols)
}

fn assemble(
    symbols: Vec<String>,
    timestamps: Vec<String>,
    day_index: Vec<i64>,
    cols: Vec<Vec<Option<f64>>>,
) -> Result<Ingested> {
    for w in timestamps.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Parse {
                line: 0,
                msg: format!("timestamps not strictly increasing near {:?}", w[1]),
            });
        }
    }
    for w in day_index.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Parse {
                line: 0,
                msg: "day labels must be non-decreasing".into(),
            });
        }
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (sym, col) in symbols.iter().zip(&cols) {
        if col.iter().all(|v| v.is_some()) {
            kept.push(sym.clone());
        } else {
            dropped.push(sym.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput);
    }

    let n = timestamps.len();
    let mut prices = Array2::zeros((n, kept.len()));
    let mut k = 0;
    for (sym, col) in symbols.iter().zip(&cols) {
        if dropped.contains(sym) {
            continue;
        }
        for (r, v) in col.iter().enumerate() {
            prices[[r, k]] = v.unwrap();
        }
        k += 1;
    }

    Ok(Ingested {
        matrix: PriceMatrix {
            symbols: kept,
            timestamps,
            day_index,
            prices,
        },
        dropped,
    })
}

/// Contiguous row ranges of equal day label, in order.
fn day_blocks(day_index: &[i64]) -> Vec<(i64, std::ops::Range<usize>)> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=day_index.len() {
        if i == day_index.len() || day_index[i] != day_index[start] {
            blocks.push((day_index[start], start..i));
            start = i;
        }
    }
    blocks
}

/// r_{n,t} = ln p_n(t) − ln p_n(t−tau), computed within each trading day.
pub fn log_returns(p: &PriceMatrix, tau: usize) -> Result<ReturnMatrix> {
    if tau == 0 {
        return Err(Error::InvalidArgument {
            msg: "tau must be positive".into(),
        });
    }
    let blocks = day_blocks(&p.day_index);
    for (day, range) in &blocks {
        if range.len() <= tau {
            return Err(Error::DayTooShort {
                day: *day,
                rows: range.len(),
                required: tau,
            });
        }
    }
    let n_rows: usize = blocks.iter().map(|(_, r)| r.len() - tau).sum();
    let mut returns = Array2::zeros((n_rows, p.symbols.len()));
    let mut day_index = Vec::with_capacity(n_rows);
    let mut out = 0;
    for (day, range) in &blocks {
        for t in range.start + tau..range.end {
            for c in 0..p.symbols.len() {
                returns[[out, c]] = p.prices[[t, c]].ln() - p.prices[[t - tau, c]].ln();
            }
            day_index.push(*day);
            out += 1;
        }
    }
    Ok(ReturnMatrix {
        symbols: p.symbols.clone(),
        day_index,
        returns,
        tau,
    })
}

/// Within each day of length d, A takes the first d−lambda rows and B the
/// last d−lambda; days with d ≤ lambda contribute nothing.
pub fn build_lagged_pair(r: &ReturnMatrix, lambda: usize) -> Result<LaggedPair> {
    let blocks = day_blocks(&r.day_index);
    let t_rows: usize = blocks
        .iter()
        .map(|(_, rng)| rng.len().saturating_sub(lambda))
        .sum();
    if t_rows == 0 {
        return Err(Error::EmptyLaggedPair { lambda });
    }
    let cols = r.symbols.len();
    let mut a = Array2::zeros((t_rows, cols));
    let mut b = Array2::zeros((t_rows, cols));
    let mut day_index = Vec::with_capacity(t_rows);
    let mut out = 0;
    for (day, rng) in &blocks {
        if rng.len() <= lambda {
            continue;
        }
        for i in rng.start..rng.end - lambda {
            for c in 0..cols {
                a[[out, c]] = r.returns[[i, c]];
                b[[out, c]] = r.returns[[i + lambda, c]];
            }
            day_index.push(*day);
            out += 1;
        }
    }
    Ok(LaggedPair {
        symbols: r.symbols.clone(),
        a,
        b,
        lambda,
        day_index,
    })
}
