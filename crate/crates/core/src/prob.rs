//! Exact finite-alphabet probability and information measures, in bits.
//!
//! Everything downstream (types, codes, reductions, regions) is built on the
//! three value types here: [`Pmf`] over a single alphabet, [`JointPmf`] as an
//! n-axis tensor, and [`Channel`] as a stochastic matrix. All values are
//! immutable after construction and all operations are pure, so they are safe
//! to share across threads freely.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Validation tolerance on probability sums.
pub const SUM_TOL: f64 = 1e-12;

fn check_entries(probs: &[f64]) -> Result<()> {
    for (index, &value) in probs.iter().enumerate() {
        if value < 0.0 || !value.is_finite() {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    Ok(())
}

fn check_sum(probs: &[f64]) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::BadNormalization { sum, tol: SUM_TOL });
    }
    Ok(())
}

/// Entropy of a weight vector in bits, with 0·log 0 = 0.
fn entropy_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Probability distribution over an ordered finite alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyShape);
        }
        check_entries(&probs)?;
        check_sum(&probs)?;
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Shannon entropy H(p) in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }
}

/// Joint distribution over a product of finite alphabets, stored row-major.
///
/// Two axes model P_XY; three axes model P_WXY with the auxiliary variable on
/// axis 0. All information measures are derived from subset-marginal
/// entropies, so the same code path serves pairs and triples.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::EmptyShape);
        }
        let cells: usize = dims.iter().product();
        if probs.len() != cells {
            return Err(Error::ShapeMismatch {
                expected: format!("{cells} cells for dims {dims:?}"),
                got: format!("{} cells", probs.len()),
            });
        }
        check_entries(&probs)?;
        check_sum(&probs)?;
        Ok(Self { dims, probs })
    }

    /// Builds a two-axis joint from matrix rows (X indexes rows, Y columns).
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyShape);
        }
        let dy = rows[0].len();
        let mut probs = Vec::with_capacity(rows.len() * dy);
        for row in rows {
            if row.len() != dy {
                return Err(Error::ShapeMismatch {
                    expected: format!("{dy} columns"),
                    got: format!("{} columns", row.len()),
                });
            }
            probs.extend_from_slice(row);
        }
        Self::new(vec![rows.len(), dy], probs)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_axes(&self) -> usize {
        self.dims.len()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for axis in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.dims[axis + 1];
        }
        strides
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        let strides = self.strides();
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.probs[flat]
    }

    /// Marginal over the given axes, kept in ascending original-axis order.
    pub fn marginal(&self, axes: &[usize]) -> JointPmf {
        let mut keep: Vec<usize> = axes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        assert!(
            keep.iter().all(|&a| a < self.dims.len()),
            "axis out of range"
        );
        let out_dims: Vec<usize> = keep.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; out_dims.iter().product()];
        let strides = self.strides();
        let mut out_strides = vec![1usize; keep.len()];
        for k in (0..keep.len().saturating_sub(1)).rev() {
            out_strides[k] = out_strides[k + 1] * out_dims[k + 1];
        }
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut out_flat = 0;
            for (k, &a) in keep.iter().enumerate() {
                let coord = (flat / strides[a]) % self.dims[a];
                out_flat += coord * out_strides[k];
            }
            out[out_flat] += p;
        }
        JointPmf {
            dims: out_dims,
            probs: out,
        }
    }

    /// Single-axis marginal as a plain [`Pmf`].
    pub fn marginal_pmf(&self, axis: usize) -> Pmf {
        let m = self.marginal(&[axis]);
        Pmf { probs: m.probs }
    }

    /// Joint entropy H of all axes, in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// Entropy of the marginal over a subset of axes.
    pub fn entropy_of(&self, axes: &[usize]) -> f64 {
        if axes.len() == self.dims.len() {
            return self.entropy();
        }
        self.marginal(axes).entropy()
    }

    /// H(target | given) = H(target ∪ given) − H(given).
    pub fn conditional_entropy(&self, target: &[usize], given: &[usize]) -> f64 {
        let mut both = target.to_vec();
        both.extend_from_slice(given);
        self.entropy_of(&both) - self.entropy_of(given)
    }

    /// Mutual information between two groups of axes that partition the tensor.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let mut all: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
        all.sort_unstable();
        let expected: Vec<usize> = (0..self.dims.len()).collect();
        if all != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("a partition of axes 0..{}", self.dims.len()),
                got: format!("{a:?} vs {b:?}"),
            });
        }
        Ok(self.entropy_of(a) + self.entropy_of(b) - self.entropy())
    }

    /// I(A ∧ B | C) = H(A,C) + H(B,C) − H(C) − H(A,B,C).
    pub fn conditional_mutual_information(
        &self,
        a: &[usize],
        b: &[usize],
        given: &[usize],
    ) -> f64 {
        let mut ac = a.to_vec();
        ac.extend_from_slice(given);
        let mut bc = b.to_vec();
        bc.extend_from_slice(given);
        let mut abc = a.to_vec();
        abc.extend_from_slice(b);
        abc.extend_from_slice(given);
        self.entropy_of(&ac) + self.entropy_of(&bc) - self.entropy_of(given) - self.entropy_of(&abc)
    }

    /// I(W ∧ Y | X) for a three-axis joint laid out as (W, X, Y).
    pub fn markov_defect(&self) -> f64 {
        debug_assert_eq!(self.dims.len(), 3);
        self.conditional_mutual_information(&[0], &[2], &[1])
    }

    /// KL divergence D(self ‖ q) in bits; +∞ when q vanishes where self does not.
    pub fn kl_divergence(&self, q: &JointPmf) -> Result<f64> {
        if self.dims != q.dims {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.dims),
                got: format!("{:?}", q.dims),
            });
        }
        let mut total = 0.0;
        for (&p, &qv) in self.probs.iter().zip(&q.probs) {
            if p > 0.0 {
                if qv <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                total += p * (p / qv).log2();
            }
        }
        Ok(total.max(0.0))
    }

    /// L1 distance Σ|p − q| ∈ [0, 2].
    pub fn total_variation(&self, q: &JointPmf) -> Result<f64> {
        if self.dims != q.dims {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.dims),
                got: format!("{:?}", q.dims),
            });
        }
        Ok(self
            .probs
            .iter()
            .zip(&q.probs)
            .map(|(p, q)| (p - q).abs())
            .sum())
    }
}

/// Conditional distribution: one output row per input symbol.
///
/// The input may be a product alphabet (for test channels P_W|XY the row index
/// is row-major over the selected axes). `bound` records the cardinality bound
/// declared for the auxiliary alphabet; construction rejects wider outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    n_in: usize,
    n_out: usize,
    probs: Vec<f64>,
    bound: Option<usize>,
}

impl Channel {
    pub fn new(n_in: usize, n_out: usize, probs: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::EmptyShape);
        }
        if probs.len() != n_in * n_out {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", n_in * n_out),
                got: format!("{} entries", probs.len()),
            });
        }
        check_entries(&probs)?;
        for row in 0..n_in {
            let sum: f64 = probs[row * n_out..(row + 1) * n_out].iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::RowNotNormalized {
                    row,
                    sum,
                    tol: SUM_TOL,
                });
            }
        }
        Ok(Self {
            n_in,
            n_out,
            probs,
            bound: None,
        })
    }

    pub fn with_bound(n_in: usize, n_out: usize, probs: Vec<f64>, bound: usize) -> Result<Self> {
        if n_out > bound {
            return Err(Error::CardinalityExceeded {
                size: n_out,
                bound,
            });
        }
        let mut ch = Self::new(n_in, n_out, probs)?;
        ch.bound = Some(bound);
        Ok(ch)
    }

    pub fn identity(k: usize) -> Self {
        let mut probs = vec![0.0; k * k];
        for i in 0..k {
            probs[i * k + i] = 1.0;
        }
        Self {
            n_in: k,
            n_out: k,
            probs,
            bound: None,
        }
    }

    /// Channel that ignores its input and always emits symbol `w`.
    pub fn constant(n_in: usize, n_out: usize, w: usize) -> Self {
        let mut probs = vec![0.0; n_in * n_out];
        for row in 0..n_in {
            probs[row * n_out + w] = 1.0;
        }
        Self {
            n_in,
            n_out,
            probs,
            bound: None,
        }
    }

    /// Binary symmetric channel with crossover probability `a`.
    pub fn bsc(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Domain {
                what: "bsc crossover",
                value: a,
            });
        }
        Channel::new(2, 2, vec![1.0 - a, a, a, 1.0 - a])
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn bound(&self) -> Option<usize> {
        self.bound
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_out..(i + 1) * self.n_out]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Composes the channel with a base joint; the output symbol becomes the
    /// leading axis: P(w, x…) = P(w | x…) · base(x…). The channel input must
    /// range over all base axes, row-major.
    pub fn compose(&self, base: &JointPmf) -> Result<JointPmf> {
        let all: Vec<usize> = (0..base.num_axes()).collect();
        self.compose_on(base, &all)
    }

    /// Composes on a subset of base axes: P(w, x…) = P(w | axes) · base(x…).
    pub fn compose_on(&self, base: &JointPmf, input_axes: &[usize]) -> Result<JointPmf> {
        let in_size: usize = input_axes.iter().map(|&a| base.dims[a]).product();
        if in_size != self.n_in {
            return Err(Error::ShapeMismatch {
                expected: format!("channel input {}", self.n_in),
                got: format!("axes {:?} of size {}", input_axes, in_size),
            });
        }
        let strides = base.strides();
        let mut out_dims = Vec::with_capacity(base.dims.len() + 1);
        out_dims.push(self.n_out);
        out_dims.extend_from_slice(&base.dims);
        let cells = base.probs.len();
        let mut out = vec![0.0; self.n_out * cells];
        for (flat, &p) in base.probs.iter().enumerate() {
            let mut row = 0usize;
            for &a in input_axes {
                row = row * base.dims[a] + (flat / strides[a]) % base.dims[a];
            }
            let cond = self.row(row);
            for (w, &c) in cond.iter().enumerate() {
                out[w * cells + flat] = c * p;
            }
        }
        JointPmf::new(out_dims, out)
    }

    /// Composes with a single-alphabet base distribution.
    pub fn compose_pmf(&self, base: &Pmf) -> Result<JointPmf> {
        let joint = JointPmf::new(vec![base.len()], base.probs.clone())?;
        self.compose(&joint)
    }
}

/// Binary entropy h(p) in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "binary_entropy argument",
            value: p,
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-(p * p.log2() + (1.0 - p) * (1.0 - p).log2()))
}

/// Binary convolution a∗p = a(1−p) + (1−a)p.
pub fn binary_convolution(a: f64, p: f64) -> Result<f64> {
    for (what, v) in [("binary_convolution a", a), ("binary_convolution p", p)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain { what, value: v });
        }
    }
    Ok(a * (1.0 - p) + (1.0 - a) * p)
}

/// Doubly symmetric binary source: X uniform, Y = X flipped with probability p.
pub fn dsbs(p: f64) -> Result<JointPmf> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "dsbs flip probability",
            value: p,
        });
    }
    JointPmf::from_matrix(&[
        vec![0.5 * (1.0 - p), 0.5 * p],
        vec![0.5 * p, 0.5 * (1.0 - p)],
    ])
}

/// Uniform joint over a dx × dy product alphabet.
pub fn uniform_joint(dx: usize, dy: usize) -> Result<JointPmf> {
    let cells = dx * dy;
    JointPmf::new(vec![dx, dy], vec![1.0 / cells as f64; cells])
}

/// Independent product P_X × P_Y.
pub fn product_joint(px: &Pmf, py: &Pmf) -> Result<JointPmf> {
    let mut probs = Vec::with_capacity(px.len() * py.len());
    for &a in px.probs() {
        for &b in py.probs() {
            probs.push(a * b);
        }
    }
    JointPmf::new(vec![px.len(), py.len()], probs)
}

/// On-disk schema for a two-axis source:
/// `{"alphabet_x":[…], "alphabet_y":[…], "pmf":[[row-major floats]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointPmfFile {
    pub alphabet_x: Vec<String>,
    pub alphabet_y: Vec<String>,
    pub pmf: Vec<Vec<f64>>,
}

impl JointPmfFile {
    pub fn from_joint(joint: &JointPmf) -> Result<Self> {
        if joint.num_axes() != 2 {
            return Err(Error::ShapeMismatch {
                expected: "2 axes".into(),
                got: format!("{} axes", joint.num_axes()),
            });
        }
        let (dx, dy) = (joint.dims[0], joint.dims[1]);
        let pmf = (0..dx)
            .map(|x| joint.probs[x * dy..(x + 1) * dy].to_vec())
            .collect();
        Ok(Self {
            alphabet_x: (0..dx).map(|i| i.to_string()).collect(),
            alphabet_y: (0..dy).map(|i| i.to_string()).collect(),
            pmf,
        })
    }

    pub fn to_joint(&self) -> Result<JointPmf> {
        if self.pmf.len() != self.alphabet_x.len() {
            return Err(Error::Schema(format!(
                "pmf has {} rows but alphabet_x lists {} symbols",
                self.pmf.len(),
                self.alphabet_x.len()
            )));
        }
        for (i, row) in self.pmf.iter().enumerate() {
            if row.len() != self.alphabet_y.len() {
                return Err(Error::Schema(format!(
                    "pmf row {i} has {} entries but alphabet_y lists {} symbols",
                    row.len(),
                    self.alphabet_y.len()
                )));
            }
        }
        JointPmf::from_matrix(&self.pmf)
    }

    pub fn load(path: &std::path::Path) -> Result<JointPmf> {
        let text = std::fs::read_to_string(path)?;
        let file: JointPmfFile = serde_json::from_str(&text)?;
        file.to_joint()
    }

    pub fn save(joint: &JointPmf, path: &std::path::Path) -> Result<()> {
        let file = Self::from_joint(joint)?;
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn random_joint(rng: &mut ChaCha8Rng, dims: &[usize]) -> JointPmf {
        let cells: usize = dims.iter().product();
        let mut probs: Vec<f64> = (0..cells).map(|_| -rng.random::<f64>().ln()).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        JointPmf::new(dims.to_vec(), probs).unwrap()
    }

    fn random_channel(rng: &mut ChaCha8Rng, n_in: usize, n_out: usize) -> Channel {
        let mut probs = vec![0.0; n_in * n_out];
        for row in 0..n_in {
            let mut weights: Vec<f64> = (0..n_out).map(|_| -rng.random::<f64>().ln()).collect();
            let sum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= sum);
            probs[row * n_out..(row + 1) * n_out].copy_from_slice(&weights);
        }
        Channel::new(n_in, n_out, probs).unwrap()
    }

    #[test]
    fn entropy_uniform_binary_is_one_bit() {
        let p = Pmf::new(vec![0.5, 0.5]).unwrap();
        assert!((p.entropy() - 1.0).abs() < TOL);
    }

    #[test]
    fn entropy_point_mass_is_zero() {
        let p = Pmf::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(p.entropy(), 0.0);
    }

    #[test]
    fn entropy_quarter_three_quarters() {
        // frozen from an independent high-precision evaluation of −Σ p log2 p
        let p = Pmf::new(vec![0.25, 0.75]).unwrap();
        assert!((p.entropy() - 0.811278124459132863).abs() < 1e-12);
    }

    #[test]
    fn pmf_rejects_negative_and_bad_sum() {
        assert!(matches!(
            Pmf::new(vec![-0.1, 1.1]),
            Err(Error::NegativeProbability { .. })
        ));
        assert!(matches!(
            Pmf::new(vec![0.5, 0.6]),
            Err(Error::BadNormalization { .. })
        ));
    }

    #[test]
    fn conditional_entropy_independent_and_deterministic() {
        let indep = uniform_joint(2, 2).unwrap();
        assert!((indep.conditional_entropy(&[0], &[1]) - 1.0).abs() < TOL);
        let equal = JointPmf::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!(equal.conditional_entropy(&[0], &[1]).abs() < TOL);
    }

    #[test]
    fn conditional_entropy_dsbs_is_binary_entropy() {
        let joint = dsbs(0.1).unwrap();
        let expected = binary_entropy(0.1).unwrap();
        assert!((joint.conditional_entropy(&[1], &[0]) - expected).abs() < 1e-12);
        assert!((expected - 0.468995593589281221).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let indep = uniform_joint(2, 2).unwrap();
        assert!(indep.mutual_information(&[0], &[1]).unwrap().abs() < TOL);

        let equal = JointPmf::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((equal.mutual_information(&[0], &[1]).unwrap() - 1.0).abs() < TOL);

        let joint = dsbs(0.1).unwrap();
        let expected = 1.0 - binary_entropy(0.1).unwrap();
        assert!((joint.mutual_information(&[0], &[1]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_requires_partition() {
        let j = uniform_joint(2, 2).unwrap();
        assert!(j.mutual_information(&[0], &[0]).is_err());
    }

    #[test]
    fn cmi_markov_composition_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let base = random_joint(&mut rng, &[2, 3]);
            let ch = random_channel(&mut rng, 2, 3);
            let wxy = ch.compose_on(&base, &[0]).unwrap();
            assert!(wxy.markov_defect().abs() < 1e-9);
        }
    }

    #[test]
    fn cmi_w_equals_y_independent_x() {
        // W = Y, X independent of Y, all uniform binary: I(Y ∧ Y | X) = H(Y) = 1.
        let mut probs = vec![0.0; 8];
        for x in 0..2usize {
            for y in 0..2usize {
                probs[y * 4 + x * 2 + y] = 0.25;
            }
        }
        let wxy = JointPmf::new(vec![2, 2, 2], probs).unwrap();
        assert!((wxy.markov_defect() - 1.0).abs() < TOL);
    }

    #[test]
    fn cmi_matches_entropy_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let wxy = random_joint(&mut rng, &[2, 2, 2]);
            let direct = wxy.markov_defect();
            let decomposed = wxy.conditional_entropy(&[0], &[1])
                + wxy.conditional_entropy(&[2], &[1])
                - wxy.conditional_entropy(&[0, 2], &[1]);
            assert!((direct - decomposed).abs() < 1e-10);
        }
    }

    #[test]
    fn kl_examples() {
        let p = JointPmf::new(vec![2], vec![1.0, 0.0]).unwrap();
        let q = JointPmf::new(vec![2], vec![0.5, 0.5]).unwrap();
        assert_eq!(p.kl_divergence(&p).unwrap(), 0.0);
        assert!((p.kl_divergence(&q).unwrap() - 1.0).abs() < TOL);
        assert!(q.kl_divergence(&p).unwrap().is_infinite());
    }

    #[test]
    fn kl_of_markov_projection_equals_cmi() {
        // D(P_WXY ‖ P_W|X · P_XY) = I(W ∧ Y | X) when the W|X conditional matches.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let wxy = random_joint(&mut rng, &[2, 2, 2]);
            let wx = wxy.marginal(&[0, 1]);
            let x = wxy.marginal(&[1]);
            // rows of P_W|X indexed by x
            let mut ch = vec![0.0; 4];
            for xv in 0..2 {
                for wv in 0..2 {
                    ch[xv * 2 + wv] = wx.prob(&[wv, xv]) / x.prob(&[xv]);
                }
            }
            let channel = Channel::new(2, 2, ch).unwrap();
            let xy = wxy.marginal(&[1, 2]);
            let markov = channel.compose_on(&xy, &[0]).unwrap();
            let kl = wxy.kl_divergence(&markov).unwrap();
            assert!((kl - wxy.markov_defect()).abs() < 1e-9);
        }
    }

    #[test]
    fn total_variation_examples() {
        let p = JointPmf::new(vec![2], vec![1.0, 0.0]).unwrap();
        let q = JointPmf::new(vec![2], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.total_variation(&p).unwrap(), 0.0);
        assert!((p.total_variation(&q).unwrap() - 2.0).abs() < TOL);
        let a = JointPmf::new(vec![2], vec![0.6, 0.4]).unwrap();
        let b = JointPmf::new(vec![2], vec![0.5, 0.5]).unwrap();
        assert!((a.total_variation(&b).unwrap() - 0.2).abs() < TOL);
    }

    #[test]
    fn compose_identity_gives_diagonal() {
        let base = Pmf::uniform(2);
        let joint = Channel::identity(2).compose_pmf(&base).unwrap();
        assert!((joint.prob(&[0, 0]) - 0.5).abs() < TOL);
        assert!(joint.prob(&[0, 1]).abs() < TOL);
        assert!(joint.prob(&[1, 0]).abs() < TOL);
        assert!((joint.prob(&[1, 1]) - 0.5).abs() < TOL);
    }

    #[test]
    fn compose_constant_gives_product_with_point_mass() {
        let base = Pmf::new(vec![0.3, 0.7]).unwrap();
        let joint = Channel::constant(2, 3, 2).compose_pmf(&base).unwrap();
        assert!((joint.prob(&[2, 0]) - 0.3).abs() < TOL);
        assert!((joint.prob(&[2, 1]) - 0.7).abs() < TOL);
        assert!(joint.prob(&[0, 0]).abs() < TOL);
    }

    #[test]
    fn compose_bsc_hand_values_and_marginal_recovery() {
        let base = Pmf::new(vec![0.3, 0.7]).unwrap();
        let joint = Channel::bsc(0.2).unwrap().compose_pmf(&base).unwrap();
        assert!((joint.prob(&[0, 0]) - 0.24).abs() < TOL);
        assert!((joint.prob(&[1, 0]) - 0.06).abs() < TOL);
        assert!((joint.prob(&[0, 1]) - 0.14).abs() < TOL);
        assert!((joint.prob(&[1, 1]) - 0.56).abs() < TOL);
        let back = joint.marginal_pmf(1);
        assert!((back.probs()[0] - 0.3).abs() < TOL);
        assert!((back.probs()[1] - 0.7).abs() < TOL);
    }

    #[test]
    fn compose_rejects_alphabet_mismatch() {
        let base = Pmf::uniform(3);
        assert!(Channel::bsc(0.2).unwrap().compose_pmf(&base).is_err());
    }

    #[test]
    fn binary_helper_examples() {
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < TOL);
        assert!((binary_convolution(0.0, 0.3).unwrap() - 0.3).abs() < TOL);
        assert!((binary_convolution(0.2, 0.1).unwrap() - 0.26).abs() < TOL);
        // symmetry
        assert!(
            (binary_entropy(0.3).unwrap() - binary_entropy(0.7).unwrap()).abs() < TOL
        );
        assert!(
            (binary_convolution(0.2, 0.1).unwrap() - binary_convolution(0.1, 0.2).unwrap()).abs()
                < TOL
        );
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_convolution(-0.1, 0.5).is_err());
    }

    #[test]
    fn chain_identity_on_random_joints() {
        // H(X) + I(W∧Y|X) = I(W∧X,Y) + H(X|W), over 1000 composed joints
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..1000 {
            let dims = if i % 2 == 0 { [2, 2, 2] } else { [3, 2, 2] };
            let wxy = random_joint(&mut rng, &dims);
            let lhs = wxy.entropy_of(&[1]) + wxy.markov_defect();
            let rhs = wxy.mutual_information(&[0], &[1, 2]).unwrap()
                + wxy.conditional_entropy(&[1], &[0]);
            assert!(
                (lhs - rhs).abs() < 1e-9,
                "chain identity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn pinsker_inequality_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let p = random_joint(&mut rng, &[2, 3]);
            let q = random_joint(&mut rng, &[2, 3]);
            let d = p.kl_divergence(&q).unwrap();
            let tv = p.total_variation(&q).unwrap();
            // standard constant with D in bits: ‖p−q‖₁ ≤ √(2 D ln 2)
            assert!(tv <= (2.0 * d * std::f64::consts::LN_2).sqrt() + 1e-12);
        }
    }

    #[test]
    fn data_processing_on_composed_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let base = random_joint(&mut rng, &[2, 2]);
            let ch = random_channel(&mut rng, 4, 3);
            let wxy = ch.compose(&base).unwrap();
            let i_wx = wxy.marginal(&[0, 1]).mutual_information(&[0], &[1]).unwrap();
            let i_wxy = wxy.mutual_information(&[0], &[1, 2]).unwrap();
            assert!(i_wx <= i_wxy + 1e-10);
        }
    }

    #[test]
    fn joint_pmf_file_round_trip_and_validation() {
        let joint = dsbs(0.1).unwrap();
        let file = JointPmfFile::from_joint(&joint).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let parsed: JointPmfFile = serde_json::from_str(&text).unwrap();
        let back = parsed.to_joint().unwrap();
        assert_eq!(joint, back);

        let bad: JointPmfFile = serde_json::from_str(
            r#"{"alphabet_x":["0","1"],"alphabet_y":["0"],"pmf":[[0.5,0.5],[0.0,0.0]]}"#,
        )
        .unwrap();
        assert!(matches!(bad.to_joint(), Err(Error::Schema(_))));
    }
}
