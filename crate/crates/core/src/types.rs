//! Method-of-types machinery: joint types, type-class sizes and members,
//! uniform sampling, and the type-set predicates used by the converse bounds.
//!
//! Sequences are symbol vectors over 0..d with big-endian lexicographic ranks.
//! Enumeration is always in lexicographic order so that codes and decoders
//! built from it are reproducible.

use crate::error::{Error, Result};
use crate::prob::JointPmf;
use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default cap on enumerated members (sequences or sequence pairs).
pub const ENUM_CAP: u64 = 5_000_000;

/// Empirical joint distribution of a length-n pair sequence, with denominator n.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "JointTypeFile", into = "JointTypeFile")]
pub struct JointType {
    counts: Vec<u64>,
    dx: usize,
    dy: usize,
    n: u64,
}

/// On-disk schema: `{"n": int, "counts": [[int]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointTypeFile {
    pub n: u64,
    pub counts: Vec<Vec<u64>>,
}

impl TryFrom<JointTypeFile> for JointType {
    type Error = Error;
    fn try_from(file: JointTypeFile) -> Result<Self> {
        let t = JointType::new(&file.counts)?;
        if t.n != file.n {
            return Err(Error::Schema(format!(
                "counts sum to {} but n field says {}",
                t.n, file.n
            )));
        }
        Ok(t)
    }
}

impl From<JointType> for JointTypeFile {
    fn from(t: JointType) -> Self {
        let counts = (0..t.dx)
            .map(|x| t.counts[x * t.dy..(x + 1) * t.dy].to_vec())
            .collect();
        JointTypeFile { n: t.n, counts }
    }
}

impl JointType {
    pub fn new(rows: &[Vec<u64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyShape);
        }
        let dy = rows[0].len();
        let mut counts = Vec::with_capacity(rows.len() * dy);
        for row in rows {
            if row.len() != dy {
                return Err(Error::ShapeMismatch {
                    expected: format!("{dy} columns"),
                    got: format!("{} columns", row.len()),
                });
            }
            counts.extend_from_slice(row);
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::Domain {
                what: "joint type blocklength",
                value: 0.0,
            });
        }
        Ok(Self {
            counts,
            dx: rows.len(),
            dy,
            n,
        })
    }

    pub fn from_flat(counts: Vec<u64>, dx: usize, dy: usize) -> Result<Self> {
        let rows: Vec<Vec<u64>> = (0..dx).map(|x| counts[x * dy..(x + 1) * dy].to_vec()).collect();
        Self::new(&rows)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.dy + y]
    }

    pub fn x_counts(&self) -> Vec<u64> {
        (0..self.dx)
            .map(|x| self.counts[x * self.dy..(x + 1) * self.dy].iter().sum())
            .collect()
    }

    pub fn y_counts(&self) -> Vec<u64> {
        (0..self.dy)
            .map(|y| (0..self.dx).map(|x| self.counts[x * self.dy + y]).sum())
            .collect()
    }

    /// Empirical joint pmf counts/n.
    pub fn empirical(&self) -> JointPmf {
        let n = self.n as f64;
        let probs = self.counts.iter().map(|&c| c as f64 / n).collect();
        JointPmf::new(vec![self.dx, self.dy], probs).expect("counts/n is a valid pmf")
    }

    /// Entropy of the empirical X marginal, in bits.
    pub fn x_entropy(&self) -> f64 {
        entropy_of_counts(&self.x_counts())
    }
}

fn entropy_of_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Multinomial coefficient n!/∏ counts!, exactly.
pub fn multinomial(counts: &[u64]) -> BigUint {
    let mut result = BigUint::from(1u32);
    let mut seen = 0u64;
    for &c in counts {
        for i in 1..=c {
            seen += 1;
            result = result * BigUint::from(seen) / BigUint::from(i);
        }
    }
    result
}

/// log2 of a multinomial coefficient, accurate to well below 1e-9.
pub fn log2_multinomial(counts: &[u64]) -> f64 {
    log2_biguint(&multinomial(counts))
}

fn log2_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1023 {
        let x: f64 = v.to_string().parse().unwrap_or(f64::MAX);
        return x.log2();
    }
    // keep the top 64 bits, account for the shift
    let shift = bits - 64;
    let top = v >> shift;
    let x: f64 = top.to_string().parse().unwrap_or(f64::MAX);
    x.log2() + shift as f64
}

/// Number of joint types for blocklength n over a k-cell alphabet: C(n+k−1, k−1).
pub fn count_joint_types(n: u64, cells: usize) -> BigUint {
    let mut counts = vec![0u64; 2];
    counts[0] = n;
    counts[1] = cells as u64 - 1;
    multinomial(&counts)
}

/// All joint types of blocklength n over dx × dy, in lexicographic count order.
pub fn enumerate_joint_types(n: u64, dx: usize, dy: usize, cap: u64) -> Result<Vec<JointType>> {
    let total = count_joint_types(n, dx * dy);
    if total > BigUint::from(cap) {
        return Err(Error::EnumerationCap {
            needed: total.try_into().unwrap_or(u128::MAX),
            cap,
        });
    }
    let cells = dx * dy;
    let mut out = Vec::new();
    let mut counts = vec![0u64; cells];
    fill_types(&mut counts, 0, n, dx, dy, &mut out);
    Ok(out)
}

fn fill_types(
    counts: &mut Vec<u64>,
    cell: usize,
    remaining: u64,
    dx: usize,
    dy: usize,
    out: &mut Vec<JointType>,
) {
    if cell + 1 == counts.len() {
        counts[cell] = remaining;
        out.push(JointType {
            counts: counts.clone(),
            dx,
            dy,
            n: counts.iter().sum(),
        });
        return;
    }
    for c in 0..=remaining {
        counts[cell] = c;
        fill_types(counts, cell + 1, remaining - c, dx, dy, out);
    }
}

/// Big-endian lexicographic rank of a sequence over alphabet size d.
pub fn seq_rank(seq: &[u8], d: usize) -> u64 {
    seq.iter().fold(0u64, |acc, &s| acc * d as u64 + s as u64)
}

/// Inverse of [`seq_rank`].
pub fn rank_seq(rank: u64, d: usize, n: usize) -> Vec<u8> {
    let mut seq = vec![0u8; n];
    let mut r = rank;
    for i in (0..n).rev() {
        seq[i] = (r % d as u64) as u8;
        r /= d as u64;
    }
    seq
}

/// A pair of length-n sequences together with its lexicographic index within
/// the owning joint type class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencePair {
    pub x_seq: Vec<u8>,
    pub y_seq: Vec<u8>,
    pub rank: u128,
}

/// Joint type of a pair of equal-length sequences.
pub fn joint_type_of(x: &[u8], y: &[u8], dx: usize, dy: usize) -> Result<JointType> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let mut counts = vec![0u64; dx * dy];
    for (&a, &b) in x.iter().zip(y) {
        if a as usize >= dx || b as usize >= dy {
            return Err(Error::Domain {
                what: "symbol out of alphabet range",
                value: a.max(b) as f64,
            });
        }
        counts[a as usize * dy + b as usize] += 1;
    }
    JointType::from_flat(counts, dx, dy)
}

/// Iterator over all multiset permutations of a symbol multiset, ascending
/// lexicographic. Symbol i appears counts[i] times.
pub struct MultisetPermutations {
    current: Option<Vec<u8>>,
}

impl MultisetPermutations {
    pub fn new(counts: &[u64]) -> Self {
        let mut start = Vec::new();
        for (sym, &c) in counts.iter().enumerate() {
            start.extend(std::iter::repeat(sym as u8).take(c as usize));
        }
        Self {
            current: if start.is_empty() { None } else { Some(start) },
        }
    }
}

impl Iterator for MultisetPermutations {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let seq = self.current.take()?;
        // classic next-permutation to advance for the following call
        let mut next = seq.clone();
        let n = next.len();
        let mut i = n.wrapping_sub(2);
        while i < n && next[i] >= next[i + 1] {
            i = i.wrapping_sub(1);
        }
        if i < n {
            let mut j = n - 1;
            while next[j] <= next[i] {
                j -= 1;
            }
            next.swap(i, j);
            next[i + 1..].reverse();
            self.current = Some(next);
        }
        Some(seq)
    }
}

/// Members of the class of a marginal type, lexicographic, cap-guarded.
pub fn enumerate_marginal_class(counts: &[u64], cap: u64) -> Result<MultisetPermutations> {
    let size = multinomial(counts);
    if size > BigUint::from(cap) {
        return Err(Error::EnumerationCap {
            needed: size.try_into().unwrap_or(u128::MAX),
            cap,
        });
    }
    Ok(MultisetPermutations::new(counts))
}

/// Iterator over the members of a joint type class, in lexicographic order of
/// the fused pair-symbol sequence, with running rank attached.
pub struct TypeClassIter {
    inner: MultisetPermutations,
    dy: usize,
    next_rank: u128,
}

impl Iterator for TypeClassIter {
    type Item = SequencePair;

    fn next(&mut self) -> Option<SequencePair> {
        let fused = self.inner.next()?;
        let (x_seq, y_seq) = split_pair_symbols(&fused, self.dy);
        let rank = self.next_rank;
        self.next_rank += 1;
        Some(SequencePair { x_seq, y_seq, rank })
    }
}

fn split_pair_symbols(fused: &[u8], dy: usize) -> (Vec<u8>, Vec<u8>) {
    let x = fused.iter().map(|&s| s / dy as u8).collect();
    let y = fused.iter().map(|&s| s % dy as u8).collect();
    (x, y)
}

/// Enumerates the joint type class, refusing when the class is above the cap.
pub fn enumerate_type_class(t: &JointType, cap: u64) -> Result<TypeClassIter> {
    let size = multinomial(t.counts());
    if size > BigUint::from(cap) {
        return Err(Error::EnumerationCap {
            needed: size.try_into().unwrap_or(u128::MAX),
            cap,
        });
    }
    Ok(TypeClassIter {
        inner: MultisetPermutations::new(t.counts()),
        dy: t.dy,
        next_rank: 0,
    })
}

/// Lexicographic rank of a fused pair-symbol sequence within its multiset class.
fn multiset_rank(seq: &[u8], num_symbols: usize) -> u128 {
    let mut remaining = vec![0u64; num_symbols];
    for &s in seq {
        remaining[s as usize] += 1;
    }
    let mut rank = BigUint::from(0u32);
    for &s in seq {
        for lower in 0..s as usize {
            if remaining[lower] > 0 {
                remaining[lower] -= 1;
                rank += multinomial(&remaining);
                remaining[lower] += 1;
            }
        }
        remaining[s as usize] -= 1;
    }
    rank.try_into().unwrap_or(u128::MAX)
}

/// Uniform draw from the joint type class: shuffle the canonical arrangement.
/// Deterministic given the caller's RNG state.
pub fn sample_type_class<R: Rng>(t: &JointType, rng: &mut R) -> SequencePair {
    let mut fused = Vec::with_capacity(t.n as usize);
    for (sym, &c) in t.counts().iter().enumerate() {
        fused.extend(std::iter::repeat(sym as u8).take(c as usize));
    }
    // Fisher–Yates; every multiset permutation ends up equally likely
    for i in (1..fused.len()).rev() {
        let j = rng.random_range(0..=i);
        fused.swap(i, j);
    }
    let rank = multiset_rank(&fused, t.dx * t.dy);
    let (x_seq, y_seq) = split_pair_symbols(&fused, t.dy);
    SequencePair { x_seq, y_seq, rank }
}

/// True when the empirical marginal entropy clears the helper rate plus the
/// type-counting allowance: H(X̄) ≥ log|M0|/n + |X| log2(n+1)/n.
pub fn high_entropy_marginal(x_counts: &[u64], log_m0: f64) -> bool {
    let n: u64 = x_counts.iter().sum();
    let nf = n as f64;
    let rhs = log_m0 / nf + x_counts.len() as f64 * ((nf + 1.0).log2()) / nf;
    entropy_of_counts(x_counts) >= rhs
}

/// True when every cell of the empirical pmf deviates from the source by at
/// most the typicality radius: |counts/n − P| ≤ √(log2 n / n).
pub fn type_is_typical(t: &JointType, pmf: &JointPmf) -> Result<bool> {
    if pmf.dims() != [t.dx, t.dy] {
        return Err(Error::ShapeMismatch {
            expected: format!("[{}, {}]", t.dx, t.dy),
            got: format!("{:?}", pmf.dims()),
        });
    }
    let nf = t.n as f64;
    let bound = (nf.log2() / nf).sqrt();
    let empirical = t.empirical();
    Ok(empirical
        .probs()
        .iter()
        .zip(pmf.probs())
        .all(|(&e, &p)| (e - p).abs() <= bound))
}
