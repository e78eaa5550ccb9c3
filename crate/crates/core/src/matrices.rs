//! DeVore's deterministic binary measurement matrices, small fixture matrices,
//! and the two plain-text matrix formats.
//!
//! A DeVore matrix for a prime `p` and degree bound `r` has one column per
//! polynomial `Q` of degree at most `r` over `Z_p` and one row per point
//! `(x, y) ∈ Z_p × Z_p`; the entry is 1 exactly when `y = Q(x) mod p`.
//! Columns are ordered by the coefficient vector `(c₀, …, c_r)` with the
//! constant coefficient varying fastest, rows by `x·p + y`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rip::rip_order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeVoreParams {
    pub p: u64,
    pub r: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_truncate: Option<usize>,
}

/// The prime selection together with the two terms it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimeChoice {
    /// `(⌈tk⌉ − 1)·r / δ`
    pub coherence_term: f64,
    /// `n^{1/(r+1)}`
    pub size_term: f64,
    pub threshold: f64,
    pub p: u64,
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `p ≥ max{(⌈tk⌉−1)r/δ, n^{1/(r+1)}}`.
///
/// With `strict` set, a threshold that is itself prime is skipped, giving
/// the smallest prime strictly greater than the threshold.
pub fn devore_min_prime(t: f64, k: usize, delta: f64, n: usize, r: u32, strict: bool) -> Result<PrimeChoice> {
    if !(t > 1.0) || k == 0 || n == 0 || r == 0 {
        return Err(Error::InvalidParameter(
            "devore_min_prime needs t > 1 and positive k, n, r".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let order = rip_order(t, k);
    let coherence_term = (order as f64 - 1.0) * r as f64 / delta;
    let size_term = (n as f64).powf(1.0 / (r as f64 + 1.0));
    let threshold = coherence_term.max(size_term);
    let mut p = (threshold.ceil() as u64).max(2);
    if strict && p as f64 == threshold && is_prime(p) {
        p += 1;
    }
    while !is_prime(p) {
        p += 1;
    }
    Ok(PrimeChoice {
        coherence_term,
        size_term,
        threshold,
        p,
    })
}

/// Builds the DeVore matrix, optionally scaling every column to unit norm.
pub fn devore_matrix(params: &DeVoreParams, normalize: bool) -> Result<DMatrix<f64>> {
    let p = params.p;
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if params.r == 0 {
        return Err(Error::InvalidParameter("degree bound r must be at least 1".into()));
    }
    let full = (p as u128).pow(params.r + 1);
    let n = match params.n_truncate {
        Some(n) if (n as u128) > full => {
            return Err(Error::InvalidParameter(format!(
                "n_truncate = {n} exceeds the {full} available columns"
            )))
        }
        Some(n) => n,
        None => usize::try_from(full)
            .map_err(|_| Error::InvalidParameter("matrix too large".into()))?,
    };
    let pu = p as usize;
    let m = pu * pu;
    let value = if normalize { 1.0 / (p as f64).sqrt() } else { 1.0 };
    let mut a = DMatrix::zeros(m, n);
    let mut coeffs = vec![0u64; params.r as usize + 1];
    for col in 0..n {
        // coefficient vector of column `col`, constant term fastest
        let mut rest = col as u64;
        for c in coeffs.iter_mut() {
            *c = rest % p;
            rest /= p;
        }
        for x in 0..p {
            // Horner
            let y = coeffs.iter().rev().fold(0u64, |acc, &c| (acc * x + c) % p);
            a[(x as usize * pu + y as usize, col)] = value;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMatrix {
    Identity,
    Gaussian { seed: u64 },
    DuplicatedColumn,
}

/// Fixture matrices:
///
/// * `Identity`: ones on the main diagonal.
/// * `Gaussian`: i.i.d. standard normal entries, columns scaled to unit norm.
/// * `DuplicatedColumn`: columns `e₀, e₀, e₁, …, e_{n−2}` (needs `n ≤ m + 1`).
pub fn test_matrix(kind: TestMatrix, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
    }
    match kind {
        TestMatrix::Identity => Ok(DMatrix::identity(m, n)),
        TestMatrix::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
            for mut col in a.column_iter_mut() {
                let nrm = col.norm();
                col /= nrm;
            }
            Ok(a)
        }
        TestMatrix::DuplicatedColumn => {
            if n < 2 || n > m + 1 {
                return Err(Error::InvalidParameter(format!(
                    "duplicated-column fixture needs 2 ≤ n ≤ m + 1, got m = {m}, n = {n}"
                )));
            }
            let mut a = DMatrix::zeros(m, n);
            a[(0, 0)] = 1.0;
            for j in 1..n {
                a[(j - 1, j)] = 1.0;
            }
            Ok(a)
        }
    }
}

/// Header-less CSV: one row per line, `,`-separated, newline-terminated.
/// Values use the shortest representation that parses back to the same bits.
pub fn to_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(a.nrows() * a.ncols() * 4);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", a[(i, j)]).expect("write to string");
        }
        out.push('\n');
    }
    out
}

/// Sparse triplet text: a `m n nnz` header, then one `row col value` line per
/// nonzero (0-based indices, column-major order).
pub fn to_triplets(a: &DMatrix<f64>) -> String {
    let nnz = a.iter().filter(|v| **v != 0.0).count();
    let mut out = format!("{} {} {}\n", a.nrows(), a.ncols(), nnz);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if v != 0.0 {
                writeln!(out, "{i} {j} {v}").expect("write to string");
            }
        }
    }
    out
}

/// Error raised while reading a matrix file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Parses the CSV format written by [`to_csv`]. Blank lines are skipped.
pub fn parse_csv(text: &str) -> std::result::Result<DMatrix<f64>, ParseError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(ln + 1, col + 1, format!("'{}' is not a number", field.trim())))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    ln + 1,
                    row.len().min(first.len()) + 1,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, 1, "no data"));
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Parses the triplet format written by [`to_triplets`].
pub fn parse_triplets(text: &str) -> std::result::Result<DMatrix<f64>, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, 1, "missing header"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(parse_err(hl + 1, 1, "header must be `m n nnz`"));
    }
    let mut dims = [0usize; 3];
    for (c, tok) in head.iter().enumerate() {
        dims[c] = tok
            .parse()
            .map_err(|_| parse_err(hl + 1, c + 1, format!("'{tok}' is not a count")))?;
    }
    let [m, n, nnz] = dims;
    let mut a = DMatrix::zeros(m, n);
    let mut seen = 0;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(ln + 1, 1, "expected `row col value`"));
        }
        let i: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(ln + 1, 1, format!("'{}' is not an index", toks[0])))?;
        let j: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(ln + 1, 2, format!("'{}' is not an index", toks[1])))?;
        let v: f64 = toks[2]
            .parse()
            .map_err(|_| parse_err(ln + 1, 3, format!("'{}' is not a number", toks[2])))?;
        if i >= m || j >= n {
            return Err(parse_err(ln + 1, 1, format!("entry ({i}, {j}) outside {m}×{n}")));
        }
        a[(i, j)] = v;
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(hl + 1, 3, format!("header declares {nnz} entries, found {seen}")));
    }
    Ok(a)
}

/// Reads either format: a first line of three whitespace-separated tokens
/// is taken as a triplet header, anything else as CSV.
pub fn parse_matrix(text: &str) -> std::result::Result<DMatrix<f64>, ParseError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if !first.contains(',') && first.split_whitespace().count() == 3 {
        parse_triplets(text)
    } else {
        parse_csv(text)
    }
}
