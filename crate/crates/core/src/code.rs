//! Explicit finite-blocklength WAK and GW codes as total lookup tables, with
//! exact and Monte Carlo error-probability evaluation and random-binning code
//! generation.
//!
//! Codes are immutable after construction. Encoder tables are indexed by the
//! big-endian lexicographic rank of the input sequence (pair rank
//! `x_rank · |Y|^n + y_rank` for the GW encoders); decoder tables are sparse
//! maps over message pairs with a designated default output for unreachable
//! pairs. MAP tie-breaking is always by lowest lexicographic rank so that a
//! given seed reproduces a given code and error value exactly.

use crate::error::{Error, Result};
use crate::prob::JointPmf;
use crate::types::{self, JointType, SequencePair};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CODE_FORMAT_VERSION: u32 = 1;

/// Fixed chunk width for parallel accumulation; constant so that the merge
/// order, and hence every floating-point sum, is independent of thread count.
const PAR_CHUNK: u64 = 1 << 12;

fn pow_checked(d: usize, n: u32) -> Result<u64> {
    (d as u64)
        .checked_pow(n)
        .ok_or(Error::EnumerationCap {
            needed: u128::MAX,
            cap: u64::MAX,
        })
}

/// Sparse decoder table over message pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseTable {
    entries: BTreeMap<(u32, u32), u64>,
    default: u64,
}

impl SparseTable {
    pub fn new(entries: BTreeMap<(u32, u32), u64>, default: u64) -> Self {
        Self { entries, default }
    }

    pub fn get(&self, a: u32, b: u32) -> u64 {
        *self.entries.get(&(a, b)).unwrap_or(&self.default)
    }

    pub fn entries(&self) -> &BTreeMap<(u32, u32), u64> {
        &self.entries
    }

    pub fn default_output(&self) -> u64 {
        self.default
    }
}

/// One-helper code: helper encoder over X^n, main encoder over Y^n, and a
/// decoder reconstructing Y^n from the message pair.
#[derive(Clone, Debug, PartialEq)]
pub struct WakCode {
    pub(crate) n: u32,
    pub(crate) dx: usize,
    pub(crate) dy: usize,
    pub(crate) size0: u32,
    pub(crate) size2: u32,
    pub(crate) enc0: Vec<u32>,
    pub(crate) enc2: Vec<u32>,
    pub(crate) dec: SparseTable,
}

impl WakCode {
    pub fn new(
        n: u32,
        dx: usize,
        dy: usize,
        size0: u32,
        size2: u32,
        enc0: Vec<u32>,
        enc2: Vec<u32>,
        dec: SparseTable,
    ) -> Result<Self> {
        if n == 0 || dx == 0 || dy == 0 || size0 == 0 || size2 == 0 {
            return Err(Error::EmptyShape);
        }
        let dxn = pow_checked(dx, n)?;
        let dyn_ = pow_checked(dy, n)?;
        if enc0.len() as u64 != dxn {
            return Err(Error::Schema(format!(
                "enc0 has {} entries, expected |X|^n = {dxn}",
                enc0.len()
            )));
        }
        if enc2.len() as u64 != dyn_ {
            return Err(Error::Schema(format!(
                "enc2 has {} entries, expected |Y|^n = {dyn_}",
                enc2.len()
            )));
        }
        if let Some(&m) = enc0.iter().find(|&&m| m >= size0) {
            return Err(Error::Schema(format!(
                "enc0 assigns message {m}, outside 0..{size0}"
            )));
        }
        if let Some(&m) = enc2.iter().find(|&&m| m >= size2) {
            return Err(Error::Schema(format!(
                "enc2 assigns message {m}, outside 0..{size2}"
            )));
        }
        for (&(m0, m2), &y) in dec.entries() {
            if m0 >= size0 || m2 >= size2 || y >= dyn_ {
                return Err(Error::Schema(format!(
                    "dec entry ({m0},{m2})->{y} outside table bounds"
                )));
            }
        }
        if dec.default_output() >= dyn_ {
            return Err(Error::Schema(format!(
                "dec default {} outside 0..{dyn_}",
                dec.default_output()
            )));
        }
        Ok(Self {
            n,
            dx,
            dy,
            size0,
            size2,
            enc0,
            enc2,
            dec,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn size0(&self) -> u32 {
        self.size0
    }

    pub fn size2(&self) -> u32 {
        self.size2
    }

    pub fn enc0(&self) -> &[u32] {
        &self.enc0
    }

    pub fn enc2(&self) -> &[u32] {
        &self.enc2
    }

    pub fn dec(&self) -> &SparseTable {
        &self.dec
    }

    /// Decoded Y^n rank for a source pair given by ranks.
    pub fn decode(&self, x_rank: u64, y_rank: u64) -> u64 {
        self.dec
            .get(self.enc0[x_rank as usize], self.enc2[y_rank as usize])
    }

    pub fn is_error(&self, x_rank: u64, y_rank: u64) -> bool {
        self.decode(x_rank, y_rank) != y_rank
    }
}

/// Gray-Wyner code: three encoders over source pairs, two decoders
/// reconstructing X^n and Y^n from (common, private) message pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct GwCode {
    pub(crate) n: u32,
    pub(crate) dx: usize,
    pub(crate) dy: usize,
    pub(crate) size0: u32,
    pub(crate) size1: u32,
    pub(crate) size2: u32,
    pub(crate) enc0: Vec<u32>,
    pub(crate) enc1: Vec<u32>,
    pub(crate) enc2: Vec<u32>,
    pub(crate) dec1: SparseTable,
    pub(crate) dec2: SparseTable,
}

impl GwCode {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: u32,
        dx: usize,
        dy: usize,
        sizes: (u32, u32, u32),
        enc0: Vec<u32>,
        enc1: Vec<u32>,
        enc2: Vec<u32>,
        dec1: SparseTable,
        dec2: SparseTable,
    ) -> Result<Self> {
        let (size0, size1, size2) = sizes;
        if n == 0 || dx == 0 || dy == 0 || size0 == 0 || size1 == 0 || size2 == 0 {
            return Err(Error::EmptyShape);
        }
        let dxn = pow_checked(dx, n)?;
        let dyn_ = pow_checked(dy, n)?;
        let pairs = dxn.checked_mul(dyn_).ok_or(Error::EnumerationCap {
            needed: u128::MAX,
            cap: u64::MAX,
        })?;
        for (name, table, size) in [
            ("enc0", &enc0, size0),
            ("enc1", &enc1, size1),
            ("enc2", &enc2, size2),
        ] {
            if table.len() as u64 != pairs {
                return Err(Error::Schema(format!(
                    "{name} has {} entries, expected (|X||Y|)^n = {pairs}",
                    table.len()
                )));
            }
            if let Some(&m) = table.iter().find(|&&m| m >= size) {
                return Err(Error::Schema(format!(
                    "{name} assigns message {m}, outside 0..{size}"
                )));
            }
        }
        for (name, table, ms, out_max) in
            [("dec1", &dec1, size1, dxn), ("dec2", &dec2, size2, dyn_)]
        {
            for (&(m0, mi), &out) in table.entries() {
                if m0 >= size0 || mi >= ms || out >= out_max {
                    return Err(Error::Schema(format!(
                        "{name} entry ({m0},{mi})->{out} outside table bounds"
                    )));
                }
            }
            if table.default_output() >= out_max {
                return Err(Error::Schema(format!(
                    "{name} default {} outside 0..{out_max}",
                    table.default_output()
                )));
            }
        }
        Ok(Self {
            n,
            dx,
            dy,
            size0,
            size1,
            size2,
            enc0,
            enc1,
            enc2,
            dec1,
            dec2,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn sizes(&self) -> (u32, u32, u32) {
        (self.size0, self.size1, self.size2)
    }

    pub fn enc0(&self) -> &[u32] {
        &self.enc0
    }

    pub fn enc1(&self) -> &[u32] {
        &self.enc1
    }

    pub fn enc2(&self) -> &[u32] {
        &self.enc2
    }

    pub fn dec1(&self) -> &SparseTable {
        &self.dec1
    }

    pub fn dec2(&self) -> &SparseTable {
        &self.dec2
    }

    fn pair_index(&self, x_rank: u64, y_rank: u64) -> usize {
        (x_rank * pow_checked(self.dy, self.n).expect("validated") + y_rank) as usize
    }

    /// Reconstructed (X^n, Y^n) ranks for a source pair.
    pub fn decode(&self, x_rank: u64, y_rank: u64) -> (u64, u64) {
        let pair = self.pair_index(x_rank, y_rank);
        let m0 = self.enc0[pair];
        let x_hat = self.dec1.get(m0, self.enc1[pair]);
        let y_hat = self.dec2.get(m0, self.enc2[pair]);
        (x_hat, y_hat)
    }

    /// Error event: the reconstructed pair differs from the source pair.
    pub fn is_error(&self, x_rank: u64, y_rank: u64) -> bool {
        self.decode(x_rank, y_rank) != (x_rank, y_rank)
    }
}

/// Source law a code is evaluated against: uniform on a joint type class, or
/// an i.i.d. product of a single-letter joint pmf.
#[derive(Clone, Debug)]
pub enum SourceDist {
    TypeClass(JointType),
    Iid { pmf: JointPmf, n: u32 },
}

impl SourceDist {
    pub fn n(&self) -> u32 {
        match self {
            SourceDist::TypeClass(t) => t.n() as u32,
            SourceDist::Iid { n, .. } => *n,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            SourceDist::TypeClass(t) => (t.dx(), t.dy()),
            SourceDist::Iid { pmf, .. } => (pmf.dims()[0], pmf.dims()[1]),
        }
    }

    fn check_matches(&self, n: u32, dx: usize, dy: usize) -> Result<()> {
        if self.n() != n || self.dims() != (dx, dy) {
            return Err(Error::ShapeMismatch {
                expected: format!("code over ({dx}x{dy})^{n}"),
                got: format!("source over {:?}^{}", self.dims(), self.n()),
            });
        }
        Ok(())
    }
}

/// Per-pair i.i.d. weight evaluator with a bit-parallel fast path for binary
/// alphabets (symbol-pair counts reduce to popcounts of rank masks).
pub(crate) enum PairWeighter {
    Binary {
        n: u32,
        mask: u64,
        t00: Vec<f64>,
        t01: Vec<f64>,
        t10: Vec<f64>,
        t11: Vec<f64>,
    },
    General {
        probs: Vec<f64>,
        dx: usize,
        dy: usize,
        n: u32,
    },
}

impl PairWeighter {
    pub(crate) fn new(pmf: &JointPmf, n: u32) -> Self {
        let dx = pmf.dims()[0];
        let dy = pmf.dims()[1];
        if dx == 2 && dy == 2 && n <= 63 {
            let pw = |p: f64| -> Vec<f64> {
                let mut t = Vec::with_capacity(n as usize + 1);
                let mut acc = 1.0;
                for _ in 0..=n {
                    t.push(acc);
                    acc *= p;
                }
                t
            };
            PairWeighter::Binary {
                n,
                mask: (1u64 << n) - 1,
                t00: pw(pmf.probs()[0]),
                t01: pw(pmf.probs()[1]),
                t10: pw(pmf.probs()[2]),
                t11: pw(pmf.probs()[3]),
            }
        } else {
            PairWeighter::General {
                probs: pmf.probs().to_vec(),
                dx,
                dy,
                n,
            }
        }
    }

    /// P^n(x^n, y^n) for the sequences with the given ranks.
    pub(crate) fn weight(&self, x_rank: u64, y_rank: u64) -> f64 {
        match self {
            PairWeighter::Binary {
                n,
                mask,
                t00,
                t01,
                t10,
                t11,
            } => {
                let c11 = (x_rank & y_rank).count_ones() as usize;
                let c10 = (x_rank & !y_rank & mask).count_ones() as usize;
                let c01 = (!x_rank & y_rank & mask).count_ones() as usize;
                let c00 = *n as usize - c11 - c10 - c01;
                t00[c00] * t01[c01] * t10[c10] * t11[c11]
            }
            PairWeighter::General { probs, dx, dy, n } => {
                let mut w = 1.0;
                let mut xr = x_rank;
                let mut yr = y_rank;
                for _ in 0..*n {
                    let xs = (xr % *dx as u64) as usize;
                    let ys = (yr % *dy as u64) as usize;
                    w *= probs[xs * dy + ys];
                    xr /= *dx as u64;
                    yr /= *dy as u64;
                }
                w
            }
        }
    }
}

/// Exact error count of a WAK code under the uniform type-class law:
/// (number of erroneous class members, class size).
pub fn wak_error_on_class(code: &WakCode, t: &JointType, cap: u64) -> Result<(u64, u128)> {
    SourceDist::TypeClass(t.clone()).check_matches(code.n, code.dx, code.dy)?;
    let total: u128 = types::multinomial(t.counts())
        .try_into()
        .unwrap_or(u128::MAX);
    let mut errors = 0u64;
    for m in types::enumerate_type_class(t, cap)? {
        let xr = types::seq_rank(&m.x_seq, code.dx);
        let yr = types::seq_rank(&m.y_seq, code.dy);
        if code.is_error(xr, yr) {
            errors += 1;
        }
    }
    Ok((errors, total))
}

/// Exact error count of a GW code under the uniform type-class law.
pub fn gw_error_on_class(code: &GwCode, t: &JointType, cap: u64) -> Result<(u64, u128)> {
    SourceDist::TypeClass(t.clone()).check_matches(code.n, code.dx, code.dy)?;
    let total: u128 = types::multinomial(t.counts())
        .try_into()
        .unwrap_or(u128::MAX);
    let mut errors = 0u64;
    for m in types::enumerate_type_class(t, cap)? {
        let xr = types::seq_rank(&m.x_seq, code.dx);
        let yr = types::seq_rank(&m.y_seq, code.dy);
        if code.is_error(xr, yr) {
            errors += 1;
        }
    }
    Ok((errors, total))
}

fn iid_error_mass<F: Fn(u64, u64) -> bool + Sync>(
    pmf: &JointPmf,
    n: u32,
    dx: usize,
    dy: usize,
    cap: u64,
    is_error: F,
) -> Result<f64> {
    let dxn = pow_checked(dx, n)?;
    let dyn_ = pow_checked(dy, n)?;
    let support = (dxn as u128) * (dyn_ as u128);
    if support > cap as u128 {
        return Err(Error::EnumerationCap {
            needed: support,
            cap,
        });
    }
    let weighter = PairWeighter::new(pmf, n);
    let chunks: Vec<u64> = (0..dxn.div_ceil(PAR_CHUNK)).collect();
    let partials: Vec<f64> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * PAR_CHUNK;
            let hi = (lo + PAR_CHUNK).min(dxn);
            let mut acc = 0.0;
            for xr in lo..hi {
                for yr in 0..dyn_ {
                    if is_error(xr, yr) {
                        acc += weighter.weight(xr, yr);
                    }
                }
            }
            acc
        })
        .collect();
    // fixed-order merge keeps the sum bit-identical across thread counts
    Ok(partials.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Exact error probability of a WAK code under the given source.
pub fn eval_wak_error(code: &WakCode, src: &SourceDist, cap: u64) -> Result<f64> {
    src.check_matches(code.n, code.dx, code.dy)?;
    match src {
        SourceDist::TypeClass(t) => {
            let (errors, total) = wak_error_on_class(code, t, cap)?;
            Ok(errors as f64 / total as f64)
        }
        SourceDist::Iid { pmf, n } => {
            iid_error_mass(pmf, *n, code.dx, code.dy, cap, |xr, yr| {
                code.is_error(xr, yr)
            })
        }
    }
}

/// Exact error probability of a GW code under the given source.
pub fn eval_gw_error(code: &GwCode, src: &SourceDist, cap: u64) -> Result<f64> {
    src.check_matches(code.n, code.dx, code.dy)?;
    match src {
        SourceDist::TypeClass(t) => {
            let (errors, total) = gw_error_on_class(code, t, cap)?;
            Ok(errors as f64 / total as f64)
        }
        SourceDist::Iid { pmf, n } => {
            iid_error_mass(pmf, *n, code.dx, code.dy, cap, |xr, yr| {
                code.is_error(xr, yr)
            })
        }
    }
}

/// Monte Carlo estimate with a Wilson 95% interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub trials: u64,
    pub errors: u64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One i.i.d. draw of a length-n pair from a two-axis source, as ranks.
pub fn sample_iid_pair<R: Rng>(pmf: &JointPmf, n: u32, rng: &mut R) -> (u64, u64) {
    let dx = pmf.dims()[0];
    let dy = pmf.dims()[1];
    let probs = pmf.probs();
    let mut xr = 0u64;
    let mut yr = 0u64;
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cell = probs.len() - 1;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                cell = i;
                break;
            }
        }
        xr = xr * dx as u64 + (cell / dy) as u64;
        yr = yr * dy as u64 + (cell % dy) as u64;
    }
    (xr, yr)
}

fn sample_pair<R: Rng>(src: &SourceDist, rng: &mut R) -> (u64, u64) {
    match src {
        SourceDist::TypeClass(t) => {
            let SequencePair { x_seq, y_seq, .. } = types::sample_type_class(t, rng);
            (
                types::seq_rank(&x_seq, t.dx()),
                types::seq_rank(&y_seq, t.dy()),
            )
        }
        SourceDist::Iid { pmf, n } => sample_iid_pair(pmf, *n, rng),
    }
}

fn eval_error_mc<F: Fn(u64, u64) -> bool>(
    src: &SourceDist,
    trials: u64,
    seed: u64,
    is_error: F,
) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0u64;
    for _ in 0..trials {
        let (xr, yr) = sample_pair(src, &mut rng);
        if is_error(xr, yr) {
            errors += 1;
        }
    }
    let (wilson_low, wilson_high) = wilson_interval(errors, trials);
    McEstimate {
        estimate: errors as f64 / trials as f64,
        trials,
        errors,
        wilson_low,
        wilson_high,
    }
}

pub fn eval_wak_error_mc(
    code: &WakCode,
    src: &SourceDist,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    src.check_matches(code.n, code.dx, code.dy)?;
    if trials == 0 {
        return Err(Error::Domain {
            what: "trials",
            value: 0.0,
        });
    }
    Ok(eval_error_mc(src, trials, seed, |xr, yr| {
        code.is_error(xr, yr)
    }))
}

pub fn eval_gw_error_mc(
    code: &GwCode,
    src: &SourceDist,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    src.check_matches(code.n, code.dx, code.dy)?;
    if trials == 0 {
        return Err(Error::Domain {
            what: "trials",
            value: 0.0,
        });
    }
    Ok(eval_error_mc(src, trials, seed, |xr, yr| {
        code.is_error(xr, yr)
    }))
}

/// Random-binning WAK code: i.i.d. uniform bin assignments for both encoders
/// and the exact MAP decoder for the i.i.d. source,
/// dec(m0, m2) = argmax over y^n in bin m2 of Σ_{x^n in bin m0} P^n(x^n, y^n),
/// ties broken toward the lowest y rank.
///
/// Each side's sequence space must fit under the cap; the decoder scores are
/// accumulated by streaming the product space, which is compute, not memory.
pub fn random_binning_wak(
    n: u32,
    pmf: &JointPmf,
    size0: u32,
    size2: u32,
    seed: u64,
    cap: u64,
) -> Result<WakCode> {
    if size0 == 0 || size2 == 0 {
        return Err(Error::EmptyShape);
    }
    let dx = pmf.dims()[0];
    let dy = pmf.dims()[1];
    let dxn = pow_checked(dx, n)?;
    let dyn_ = pow_checked(dy, n)?;
    for side in [dxn, dyn_] {
        if side > cap {
            return Err(Error::EnumerationCap {
                needed: side as u128,
                cap,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc0: Vec<u32> = (0..dxn).map(|_| rng.random_range(0..size0)).collect();
    let enc2: Vec<u32> = (0..dyn_).map(|_| rng.random_range(0..size2)).collect();

    // score[m0][y] = Σ_{x in bin m0} P^n(x, y), accumulated in fixed chunk order
    let weighter = PairWeighter::new(pmf, n);
    let chunks: Vec<u64> = (0..dxn.div_ceil(PAR_CHUNK)).collect();
    let partials: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * PAR_CHUNK;
            let hi = (lo + PAR_CHUNK).min(dxn);
            let mut local = vec![0.0f64; size0 as usize * dyn_ as usize];
            for xr in lo..hi {
                let base = enc0[xr as usize] as usize * dyn_ as usize;
                for yr in 0..dyn_ {
                    local[base + yr as usize] += weighter.weight(xr, yr);
                }
            }
            local
        })
        .collect();
    let mut score = vec![0.0f64; size0 as usize * dyn_ as usize];
    for local in &partials {
        for (s, l) in score.iter_mut().zip(local) {
            *s += l;
        }
    }

    let mut bins: Vec<Vec<u64>> = vec![Vec::new(); size2 as usize];
    for (yr, &m2) in enc2.iter().enumerate() {
        bins[m2 as usize].push(yr as u64);
    }
    let mut entries = BTreeMap::new();
    for m0 in 0..size0 {
        let row = &score[m0 as usize * dyn_ as usize..(m0 as usize + 1) * dyn_ as usize];
        for (m2, bin) in bins.iter().enumerate() {
            if bin.is_empty() {
                continue;
            }
            let mut best = bin[0];
            let mut best_score = row[bin[0] as usize];
            for &yr in &bin[1..] {
                if row[yr as usize] > best_score {
                    best_score = row[yr as usize];
                    best = yr;
                }
            }
            entries.insert((m0, m2 as u32), best);
        }
    }
    WakCode::new(
        n,
        dx,
        dy,
        size0,
        size2,
        enc0,
        enc2,
        SparseTable::new(entries, 0),
    )
}

/// WAK code specified by an explicit helper-bin assignment on the x-marginal
/// type class, paired with modular binning for the main encoder and the MAP
/// decoder for the uniform law on the joint class.
///
/// `helper_bins[k]` is the bin of the k-th member (lexicographic) of the
/// x-marginal class of `t`; sequences outside the class go to bin 0. Ties in
/// the MAP argmax break toward the lowest y rank; message pairs never seen on
/// the class decode to the default output 0.
pub fn class_map_wak(
    t: &JointType,
    helper_bins: &[u32],
    size0: u32,
    size2: u32,
    cap: u64,
) -> Result<WakCode> {
    let (dx, dy) = (t.dx(), t.dy());
    let n = t.n() as u32;
    let dxn = pow_checked(dx, n)?;
    let dyn_ = pow_checked(dy, n)?;
    if dxn > cap || dyn_ > cap {
        return Err(Error::EnumerationCap {
            needed: dxn.max(dyn_) as u128,
            cap,
        });
    }
    let x_counts = t.x_counts();
    let members: Vec<u64> = types::enumerate_marginal_class(&x_counts, cap)?
        .map(|s| types::seq_rank(&s, dx))
        .collect();
    if members.len() != helper_bins.len() {
        return Err(Error::LengthMismatch {
            left: members.len(),
            right: helper_bins.len(),
        });
    }
    let mut enc0 = vec![0u32; dxn as usize];
    for (&xr, &bin) in members.iter().zip(helper_bins) {
        enc0[xr as usize] = bin;
    }
    let enc2: Vec<u32> = (0..dyn_).map(|y| (y % size2 as u64) as u32).collect();

    // MAP for the uniform class law: maximize the count of consistent members
    let mut counts: BTreeMap<(u32, u32), BTreeMap<u64, u64>> = BTreeMap::new();
    for m in types::enumerate_type_class(t, cap)? {
        let xr = types::seq_rank(&m.x_seq, dx);
        let yr = types::seq_rank(&m.y_seq, dy);
        *counts
            .entry((enc0[xr as usize], enc2[yr as usize]))
            .or_default()
            .entry(yr)
            .or_insert(0) += 1;
    }
    let mut entries = BTreeMap::new();
    for ((m0, m2), per_y) in counts {
        let (&best, _) = per_y
            .iter()
            .fold(None, |acc: Option<(&u64, &u64)>, (y, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((y, c)),
            })
            .expect("non-empty");
        entries.insert((m0, m2), best);
    }
    WakCode::new(n, dx, dy, size0, size2, enc0, enc2, SparseTable::new(entries, 0))
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DecFile {
    pairs: Vec<(u32, u32, u64)>,
    default: u64,
}

impl DecFile {
    fn from_table(t: &SparseTable) -> Self {
        Self {
            pairs: t.entries.iter().map(|(&(a, b), &v)| (a, b, v)).collect(),
            default: t.default,
        }
    }

    fn into_table(self) -> Result<SparseTable> {
        let mut entries = BTreeMap::new();
        for (a, b, v) in self.pairs {
            if entries.insert((a, b), v).is_some() {
                return Err(Error::Schema(format!(
                    "duplicate decoder entry for message pair ({a},{b})"
                )));
            }
        }
        Ok(SparseTable::new(entries, self.default))
    }
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    kind: String,
    version: u32,
    n: u32,
    alphabet: (usize, usize),
    sizes: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    enc0: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    enc1: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    enc2: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dec: Option<DecFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dec1: Option<DecFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dec2: Option<DecFile>,
}

fn check_version(version: u32) -> Result<()> {
    if version != CODE_FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported code format version {version} (supported: {CODE_FORMAT_VERSION})"
        )));
    }
    Ok(())
}

fn require<T>(field: Option<T>, name: &str, kind: &str) -> Result<T> {
    field.ok_or_else(|| Error::Schema(format!("missing field `{name}` for kind \"{kind}\"")))
}

impl WakCode {
    pub fn to_json(&self) -> String {
        let file = CodeFile {
            kind: "wak".into(),
            version: CODE_FORMAT_VERSION,
            n: self.n,
            alphabet: (self.dx, self.dy),
            sizes: vec![self.size0, self.size2],
            enc0: Some(self.enc0.clone()),
            enc1: None,
            enc2: Some(self.enc2.clone()),
            dec: Some(DecFile::from_table(&self.dec)),
            dec1: None,
            dec2: None,
        };
        serde_json::to_string_pretty(&file).expect("code serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodeFile = serde_json::from_str(text)?;
        check_version(file.version)?;
        if file.kind != "wak" {
            return Err(Error::Schema(format!(
                "expected kind \"wak\", found \"{}\"",
                file.kind
            )));
        }
        if file.sizes.len() != 2 {
            return Err(Error::Schema(format!(
                "wak codes carry sizes [|M0|, |M2|], found {} entries",
                file.sizes.len()
            )));
        }
        WakCode::new(
            file.n,
            file.alphabet.0,
            file.alphabet.1,
            file.sizes[0],
            file.sizes[1],
            require(file.enc0, "enc0", "wak")?,
            require(file.enc2, "enc2", "wak")?,
            require(file.dec, "dec", "wak")?.into_table()?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl GwCode {
    pub fn to_json(&self) -> String {
        let file = CodeFile {
            kind: "gw".into(),
            version: CODE_FORMAT_VERSION,
            n: self.n,
            alphabet: (self.dx, self.dy),
            sizes: vec![self.size0, self.size1, self.size2],
            enc0: Some(self.enc0.clone()),
            enc1: Some(self.enc1.clone()),
            enc2: Some(self.enc2.clone()),
            dec: None,
            dec1: Some(DecFile::from_table(&self.dec1)),
            dec2: Some(DecFile::from_table(&self.dec2)),
        };
        serde_json::to_string_pretty(&file).expect("code serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodeFile = serde_json::from_str(text)?;
        check_version(file.version)?;
        if file.kind != "gw" {
            return Err(Error::Schema(format!(
                "expected kind \"gw\", found \"{}\"",
                file.kind
            )));
        }
        if file.sizes.len() != 3 {
            return Err(Error::Schema(format!(
                "gw codes carry sizes [|M0|, |M1|, |M2|], found {} entries",
                file.sizes.len()
            )));
        }
        GwCode::new(
            file.n,
            file.alphabet.0,
            file.alphabet.1,
            (file.sizes[0], file.sizes[1], file.sizes[2]),
            require(file.enc0, "enc0", "gw")?,
            require(file.enc1, "enc1", "gw")?,
            require(file.enc2, "enc2", "gw")?,
            require(file.dec1, "dec1", "gw")?.into_table()?,
            require(file.dec2, "dec2", "gw")?.into_table()?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Either code kind, for loaders that dispatch on the `kind` field.
pub enum AnyCode {
    Wak(WakCode),
    Gw(GwCode),
}

pub fn load_code(path: &Path) -> Result<AnyCode> {
    let text = std::fs::read_to_string(path)?;
    let probe: serde_json::Value = serde_json::from_str(&text)?;
    match probe.get("kind").and_then(|k| k.as_str()) {
        Some("wak") => Ok(AnyCode::Wak(WakCode::from_json(&text)?)),
        Some("gw") => Ok(AnyCode::Gw(GwCode::from_json(&text)?)),
        other => Err(Error::Schema(format!(
            "unknown or missing code kind {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::dsbs;
    use crate::types::ENUM_CAP;

    /// WAK code with identity main encoder and exact inverse decoder.
    fn perfect_wak(n: u32) -> WakCode {
        let dyn_ = 2u64.pow(n);
        let enc0 = vec![0u32; 2usize.pow(n)];
        let enc2: Vec<u32> = (0..dyn_ as u32).collect();
        let entries: BTreeMap<(u32, u32), u64> = (0..dyn_).map(|y| ((0, y as u32), y)).collect();
        WakCode::new(
            n,
            2,
            2,
            1,
            dyn_ as u32,
            enc0,
            enc2,
            SparseTable::new(entries, 0),
        )
        .unwrap()
    }

    #[test]
    fn perfect_wak_code_has_zero_error() {
        let code = perfect_wak(3);
        let src = SourceDist::Iid {
            pmf: dsbs(0.1).unwrap(),
            n: 3,
        };
        assert_eq!(eval_wak_error(&code, &src, ENUM_CAP).unwrap(), 0.0);
    }

    #[test]
    fn constant_decoder_misses_class_that_avoids_it() {
        // |M2| = 1, decoder outputs the all-zero sequence; the class of
        // x-marginal (1,1) with y = x never contains it
        let n = 2;
        let enc0 = vec![0u32; 4];
        let enc2 = vec![0u32; 4];
        let code = WakCode::new(
            n,
            2,
            2,
            1,
            1,
            enc0,
            enc2,
            SparseTable::new(BTreeMap::new(), 0),
        )
        .unwrap();
        let t = JointType::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        let err = eval_wak_error(&code, &SourceDist::TypeClass(t), ENUM_CAP).unwrap();
        assert_eq!(err, 1.0);
    }

    #[test]
    fn identity_style_gw_code_has_zero_error() {
        let n = 2;
        let pairs = 16usize;
        let enc0 = vec![0u32; pairs];
        let enc1: Vec<u32> = (0..pairs).map(|p| (p / 4) as u32).collect();
        let enc2: Vec<u32> = (0..pairs).map(|p| (p % 4) as u32).collect();
        let dec1: BTreeMap<(u32, u32), u64> = (0..4).map(|x| ((0, x as u32), x as u64)).collect();
        let dec2: BTreeMap<(u32, u32), u64> = (0..4).map(|y| ((0, y as u32), y as u64)).collect();
        let code = GwCode::new(
            n,
            2,
            2,
            (1, 4, 4),
            enc0,
            enc1,
            enc2,
            SparseTable::new(dec1, 0),
            SparseTable::new(dec2, 0),
        )
        .unwrap();
        let src = SourceDist::Iid {
            pmf: dsbs(0.2).unwrap(),
            n,
        };
        assert_eq!(eval_gw_error(&code, &src, ENUM_CAP).unwrap(), 0.0);
    }

    #[test]
    fn constant_wrong_x_decoder_always_errs() {
        // two-point source on x ∈ {01, 10} with dec1 stuck on 00
        let n = 2;
        let pairs = 16usize;
        let enc0 = vec![0u32; pairs];
        let enc1 = vec![0u32; pairs];
        let enc2: Vec<u32> = (0..pairs).map(|p| (p % 4) as u32).collect();
        let dec1: BTreeMap<(u32, u32), u64> = BTreeMap::from([((0, 0), 0u64)]);
        let dec2: BTreeMap<(u32, u32), u64> = (0..4).map(|y| ((0, y as u32), y as u64)).collect();
        let code = GwCode::new(
            n,
            2,
            2,
            (1, 1, 4),
            enc0,
            enc1,
            enc2,
            SparseTable::new(dec1, 0),
            SparseTable::new(dec2, 0),
        )
        .unwrap();
        let t = JointType::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        let err = eval_gw_error(&code, &SourceDist::TypeClass(t), ENUM_CAP).unwrap();
        assert_eq!(err, 1.0);
    }

    #[test]
    fn class_eval_equals_indicator_average() {
        // definition-level oracle: uniform-class error = mean of the error
        // indicator over the enumerated class
        let pmf = dsbs(0.1).unwrap();
        let code = random_binning_wak(4, &pmf, 2, 4, 99, ENUM_CAP).unwrap();
        let t = JointType::new(&[vec![1, 1], vec![1, 1]]).unwrap();
        let exact = eval_wak_error(&code, &SourceDist::TypeClass(t.clone()), ENUM_CAP).unwrap();
        let members: Vec<_> = types::enumerate_type_class(&t, ENUM_CAP).unwrap().collect();
        let mean = members
            .iter()
            .filter(|m| {
                code.is_error(types::seq_rank(&m.x_seq, 2), types::seq_rank(&m.y_seq, 2))
            })
            .count() as f64
            / members.len() as f64;
        assert_eq!(exact, mean);
    }

    #[test]
    fn mc_matches_exact_within_three_sigma() {
        let pmf = dsbs(0.1).unwrap();
        let n = 8;
        let code = random_binning_wak(n, &pmf, 4, 16, 7, ENUM_CAP).unwrap();
        let src = SourceDist::Iid {
            pmf: pmf.clone(),
            n,
        };
        let exact = eval_wak_error(&code, &src, ENUM_CAP).unwrap();
        let trials = 100_000u64;
        let mc = eval_wak_error_mc(&code, &src, trials, 1235).unwrap();
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!(
            (mc.estimate - exact).abs() <= 3.0 * sigma,
            "mc {} vs exact {exact} (3σ = {})",
            mc.estimate,
            3.0 * sigma
        );
        assert!(mc.wilson_low <= exact && exact <= mc.wilson_high);
        assert!(mc.wilson_low <= mc.estimate && mc.estimate <= mc.wilson_high);
    }

    #[test]
    fn mc_degenerate_codes() {
        let code = perfect_wak(3);
        let src = SourceDist::Iid {
            pmf: dsbs(0.3).unwrap(),
            n: 3,
        };
        let mc = eval_wak_error_mc(&code, &src, 1000, 5).unwrap();
        assert_eq!(mc.estimate, 0.0);

        // always-error code: single message, decoder fixed on y=0, source
        // class that excludes it
        let t = JointType::new(&[vec![2, 0], vec![0, 1]]).unwrap();
        let enc0 = vec![0u32; 8];
        let enc2 = vec![0u32; 8];
        let code = WakCode::new(
            3,
            2,
            2,
            1,
            1,
            enc0,
            enc2,
            SparseTable::new(BTreeMap::new(), 0),
        )
        .unwrap();
        let mc = eval_wak_error_mc(&code, &SourceDist::TypeClass(t), 1000, 5).unwrap();
        assert_eq!(mc.estimate, 1.0);
    }

    #[test]
    fn binning_with_injective_main_encoder_is_error_free() {
        // refine the binning so enc2 is injective: error must vanish
        let pmf = dsbs(0.25).unwrap();
        let n = 3;
        let dyn_ = 8u64;
        let base = random_binning_wak(n, &pmf, 2, 8, 3, ENUM_CAP).unwrap();
        let enc2: Vec<u32> = (0..dyn_ as u32).collect();
        let entries: BTreeMap<(u32, u32), u64> = (0..2u32)
            .flat_map(|m0| (0..dyn_).map(move |y| ((m0, y as u32), y)))
            .collect();
        let code = WakCode::new(
            n,
            2,
            2,
            2,
            8,
            base.enc0().to_vec(),
            enc2,
            SparseTable::new(entries, 0),
        )
        .unwrap();
        let src = SourceDist::Iid { pmf, n };
        assert_eq!(eval_wak_error(&code, &src, ENUM_CAP).unwrap(), 0.0);
    }

    #[test]
    fn no_helper_binning_decodes_to_marginal_map() {
        let pmf = dsbs(0.1).unwrap();
        let n = 4;
        let code = random_binning_wak(n, &pmf, 1, 4, 11, ENUM_CAP).unwrap();
        // recompute the y-marginal of P^n directly
        let weighter = PairWeighter::new(&pmf, n);
        let marginal: Vec<f64> = (0..16u64)
            .map(|y| (0..16u64).map(|x| weighter.weight(x, y)).sum())
            .collect();
        for m2 in 0..4u32 {
            let bin: Vec<u64> = (0..16u64)
                .filter(|&y| code.enc2()[y as usize] == m2)
                .collect();
            if bin.is_empty() {
                continue;
            }
            let best = bin.iter().copied().fold(bin[0], |b, y| {
                if marginal[y as usize] > marginal[b as usize] {
                    y
                } else {
                    b
                }
            });
            assert_eq!(code.dec().get(0, m2), best);
        }
    }

    #[test]
    fn map_decoder_beats_every_decoder_small_exhaustive() {
        // n = 2 binary, |M0| = |M2| = 2: the MAP decoder minimizes the exact
        // error among all 4^4 = 256 decoder tables
        let pmf = dsbs(0.15).unwrap();
        let n = 2;
        let code = random_binning_wak(n, &pmf, 2, 2, 21, ENUM_CAP).unwrap();
        let src = SourceDist::Iid {
            pmf: pmf.clone(),
            n,
        };
        let map_err = eval_wak_error(&code, &src, ENUM_CAP).unwrap();
        for assignment in 0..4u64.pow(4) {
            let mut a = assignment;
            let mut entries = BTreeMap::new();
            for m0 in 0..2u32 {
                for m2 in 0..2u32 {
                    entries.insert((m0, m2), a % 4);
                    a /= 4;
                }
            }
            let alt = WakCode::new(
                n,
                2,
                2,
                2,
                2,
                code.enc0().to_vec(),
                code.enc2().to_vec(),
                SparseTable::new(entries, 0),
            )
            .unwrap();
            let alt_err = eval_wak_error(&alt, &src, ENUM_CAP).unwrap();
            assert!(
                map_err <= alt_err + 1e-12,
                "decoder {assignment} beat MAP: {alt_err} < {map_err}"
            );
        }
    }

    #[test]
    fn error_invariant_under_message_relabeling() {
        let pmf = dsbs(0.1).unwrap();
        let n = 5;
        let code = random_binning_wak(n, &pmf, 3, 4, 17, ENUM_CAP).unwrap();
        let src = SourceDist::Iid {
            pmf: pmf.clone(),
            n,
        };
        let base = eval_wak_error(&code, &src, ENUM_CAP).unwrap();
        // permute helper bins: 0→2, 1→0, 2→1; and main bins: reverse
        let perm0 = [2u32, 0, 1];
        let perm2 = [3u32, 2, 1, 0];
        let enc0: Vec<u32> = code.enc0().iter().map(|&m| perm0[m as usize]).collect();
        let enc2: Vec<u32> = code.enc2().iter().map(|&m| perm2[m as usize]).collect();
        let entries: BTreeMap<(u32, u32), u64> = code
            .dec()
            .entries()
            .iter()
            .map(|(&(m0, m2), &y)| ((perm0[m0 as usize], perm2[m2 as usize]), y))
            .collect();
        let relabeled = WakCode::new(
            n,
            2,
            2,
            3,
            4,
            enc0,
            enc2,
            SparseTable::new(entries, code.dec().default_output()),
        )
        .unwrap();
        let after = eval_wak_error(&relabeled, &src, ENUM_CAP).unwrap();
        assert_eq!(base, after);
    }

    #[test]
    fn qualitative_separation_inside_vs_outside() {
        // rates (0.6, 0.8) vs (0.1, 0.3) at n = 10 for a DSBS(0.1) source
        let pmf = dsbs(0.1).unwrap();
        let n = 10;
        let src = SourceDist::Iid {
            pmf: pmf.clone(),
            n,
        };
        let inside = random_binning_wak(
            n,
            &pmf,
            (2f64.powf(0.6 * 10.0)).round() as u32,
            (2f64.powf(0.8 * 10.0)).round() as u32,
            2024,
            ENUM_CAP,
        )
        .unwrap();
        let outside = random_binning_wak(n, &pmf, 2, 8, 2024, ENUM_CAP).unwrap();
        let err_in = eval_wak_error(&inside, &src, ENUM_CAP).unwrap();
        let err_out = eval_wak_error(&outside, &src, ENUM_CAP).unwrap();
        assert!(err_in < 0.5, "inside-region code error {err_in}");
        assert!(err_out > 0.5, "outside-region code error {err_out}");
    }

    #[test]
    fn binary_and_general_weighters_agree() {
        let pmf = JointPmf::from_matrix(&[vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        let n = 6;
        let bin = PairWeighter::new(&pmf, n);
        let gen = PairWeighter::General {
            probs: pmf.probs().to_vec(),
            dx: 2,
            dy: 2,
            n,
        };
        for xr in (0..64).step_by(7) {
            for yr in (0..64).step_by(5) {
                assert!((bin.weight(xr, yr) - gen.weight(xr, yr)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn wak_json_round_trip_is_byte_identical() {
        let pmf = dsbs(0.1).unwrap();
        let code = random_binning_wak(4, &pmf, 2, 4, 8, ENUM_CAP).unwrap();
        let text = code.to_json();
        let parsed = WakCode::from_json(&text).unwrap();
        assert_eq!(code, parsed);
        assert_eq!(text, parsed.to_json());
    }

    #[test]
    fn gw_json_round_trip_is_byte_identical() {
        let n = 2;
        let pairs = 16usize;
        let enc0 = vec![0u32; pairs];
        let enc1: Vec<u32> = (0..pairs).map(|p| (p / 4) as u32).collect();
        let enc2: Vec<u32> = (0..pairs).map(|p| (p % 4) as u32).collect();
        let dec1: BTreeMap<(u32, u32), u64> = (0..4).map(|x| ((0, x as u32), x as u64)).collect();
        let dec2: BTreeMap<(u32, u32), u64> = (0..4).map(|y| ((0, y as u32), y as u64)).collect();
        let code = GwCode::new(
            n,
            2,
            2,
            (1, 4, 4),
            enc0,
            enc1,
            enc2,
            SparseTable::new(dec1, 0),
            SparseTable::new(dec2, 0),
        )
        .unwrap();
        let text = code.to_json();
        let parsed = GwCode::from_json(&text).unwrap();
        assert_eq!(code, parsed);
        assert_eq!(text, parsed.to_json());
    }

    #[test]
    fn truncated_table_is_rejected() {
        let pmf = dsbs(0.1).unwrap();
        let code = random_binning_wak(3, &pmf, 2, 4, 8, ENUM_CAP).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&code.to_json()).unwrap();
        value["enc0"].as_array_mut().unwrap().pop();
        let text = serde_json::to_string(&value).unwrap();
        match WakCode::from_json(&text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("enc0"), "message: {msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let pmf = dsbs(0.1).unwrap();
        let code = random_binning_wak(3, &pmf, 2, 4, 8, ENUM_CAP).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&code.to_json()).unwrap();
        value["version"] = serde_json::json!(2);
        let text = serde_json::to_string(&value).unwrap();
        match WakCode::from_json(&text) {
            Err(Error::Schema(msg)) => {
                assert!(msg.contains("version 2"), "message: {msg}")
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn cap_exceeded_requests_monte_carlo() {
        let pmf = dsbs(0.1).unwrap();
        let code = random_binning_wak(8, &pmf, 2, 8, 1, ENUM_CAP).unwrap();
        let src = SourceDist::Iid { pmf, n: 8 };
        assert!(matches!(
            eval_wak_error(&code, &src, 1000),
            Err(Error::EnumerationCap { .. })
        ));
    }
}
