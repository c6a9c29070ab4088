//! Single-letter rate regions and converse-bound arithmetic.
//!
//! The WAK region at relaxation level δ is the set of rate pairs (r0, r2)
//! admitting a test channel P_W|XY with |W| ≤ |X||Y|+2 such that
//! r0 ≥ I(W∧X,Y), r2 ≥ H(Y|W), and I(W∧Y|X) ≤ δ; at δ = 0 the Markov
//! constraint is exact and channels of the form P_W|X with |W| ≤ |X|+1
//! suffice. Supporting lines R_μ = min r0 + μ r2 over the region are computed
//! by multi-restart pattern search; every reported value is achieved by a
//! concrete witness channel, hence is an upper bound on the true minimum.
//!
//! Region membership is decided by penalty minimization and is deliberately
//! three-valued: when the optimizer cannot push the penalty below tolerance
//! but also cannot certify a margin, the answer is `Boundary`, and the
//! converse bound treats it as inside so the reported lower bound stays valid.

use crate::code::WakCode;
use crate::error::{Error, Result};
use crate::optim::{minimize_channel, Budget, Solution};
use crate::prob::{Channel, JointPmf};
use crate::types::{self, JointType};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Rate tuple; `r1` is carried only by GW-side points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatePoint {
    pub r0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    pub r2: f64,
}

impl RatePoint {
    pub fn pair(r0: f64, r2: f64) -> Self {
        Self { r0, r1: None, r2 }
    }
}

/// A region computation request: source, relaxation level, cardinality and
/// optimizer budget.
#[derive(Clone, Debug)]
pub struct RegionQuery {
    pub pmf: JointPmf,
    pub delta: f64,
    /// Auxiliary-alphabet size; defaults to |X|+1 at δ = 0 and |X||Y|+2 otherwise.
    pub card: Option<usize>,
    pub budget: Budget,
    /// Width of the inconclusive band around the region boundary.
    pub boundary_tol: f64,
    /// Whether `membership` should search for a separating supporting line
    /// when it answers `Outside`.
    pub want_certificate: bool,
}

impl RegionQuery {
    pub fn new(pmf: JointPmf, delta: f64) -> Self {
        Self {
            pmf,
            delta,
            card: None,
            budget: Budget::default(),
            boundary_tol: 1e-3,
            want_certificate: true,
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.pmf.dims()[0], self.pmf.dims()[1])
    }

    fn markov_card(&self) -> usize {
        let (dx, _) = self.dims();
        self.card.unwrap_or(dx + 1)
    }

    fn relaxed_card(&self) -> usize {
        let (dx, dy) = self.dims();
        self.card.unwrap_or(dx * dy + 2)
    }
}

fn entropy_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Fast information-coordinate evaluator for candidate channels over a fixed
/// two-axis source. Avoids tensor allocation in the optimizer's inner loop.
struct CoordEval {
    pxy: Vec<f64>,
    dx: usize,
    dy: usize,
    h_x: f64,
    h_xy: f64,
}

impl CoordEval {
    fn new(pmf: &JointPmf) -> Self {
        let dx = pmf.dims()[0];
        let dy = pmf.dims()[1];
        let pxy = pmf.probs().to_vec();
        let mut px = vec![0.0; dx];
        for x in 0..dx {
            for y in 0..dy {
                px[x] += pxy[x * dy + y];
            }
        }
        Self {
            pxy,
            dx,
            dy,
            h_x: entropy_bits(&px),
            h_xy: entropy_bits(pmf.probs()),
        }
    }

    /// Coordinates of a test channel P_W|XY laid out as rows[(x·dy+y)·card + w]:
    /// (I(W∧X,Y), H(Y|W), I(W∧Y|X)).
    fn relaxed(&self, rows: &[f64], card: usize) -> (f64, f64, f64) {
        let mut pw = vec![0.0; card];
        let mut pwx = vec![0.0; card * self.dx];
        let mut pwy = vec![0.0; card * self.dy];
        let mut h_full = 0.0;
        for x in 0..self.dx {
            for y in 0..self.dy {
                let pxy = self.pxy[x * self.dy + y];
                if pxy <= 0.0 {
                    continue;
                }
                let base = (x * self.dy + y) * card;
                for w in 0..card {
                    let p = rows[base + w] * pxy;
                    if p > 0.0 {
                        h_full -= p * p.log2();
                        pw[w] += p;
                        pwx[w * self.dx + x] += p;
                        pwy[w * self.dy + y] += p;
                    }
                }
            }
        }
        let h_w = entropy_bits(&pw);
        let h_wx = entropy_bits(&pwx);
        let h_wy = entropy_bits(&pwy);
        let i_wxy = (h_w + self.h_xy - h_full).max(0.0);
        let h_y_w = (h_wy - h_w).max(0.0);
        let defect = (h_wx + self.h_xy - self.h_x - h_full).max(0.0);
        (i_wxy, h_y_w, defect)
    }

    /// Coordinates of a Markov test channel P_W|X laid out as rows[x·card + w]:
    /// (I(W∧X), H(Y|W)). The Markov defect is zero by construction and
    /// I(W∧X) = I(W∧X,Y).
    fn markov(&self, rows: &[f64], card: usize) -> (f64, f64) {
        let mut pw = vec![0.0; card];
        let mut pwx = vec![0.0; card * self.dx];
        let mut pwy = vec![0.0; card * self.dy];
        for x in 0..self.dx {
            for y in 0..self.dy {
                let pxy = self.pxy[x * self.dy + y];
                if pxy <= 0.0 {
                    continue;
                }
                for w in 0..card {
                    let p = rows[x * card + w] * pxy;
                    pw[w] += p;
                    pwx[w * self.dx + x] += p;
                    pwy[w * self.dy + y] += p;
                }
            }
        }
        let h_w = entropy_bits(&pw);
        let i_wx = (h_w + self.h_x - entropy_bits(&pwx)).max(0.0);
        let h_y_w = (entropy_bits(&pwy) - h_w).max(0.0);
        (i_wx, h_y_w)
    }
}

fn vertex_row(card: usize, w: usize) -> Vec<f64> {
    let mut row = vec![0.0; card];
    row[w] = 1.0;
    row
}

/// Canonical starts for Markov channels P_W|X: constant W, W = X, and a BSC
/// sweep for binary X.
fn markov_starts(dx: usize, card: usize) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    let mut constant = Vec::new();
    for _ in 0..dx {
        constant.extend(vertex_row(card, 0));
    }
    starts.push(constant);
    if card >= dx {
        let mut identity = Vec::new();
        for x in 0..dx {
            identity.extend(vertex_row(card, x));
        }
        starts.push(identity);
    }
    if dx == 2 && card >= 2 {
        for k in 0..=10 {
            let a = k as f64 * 0.05;
            let mut rows = vec![0.0; 2 * card];
            rows[0] = 1.0 - a;
            rows[1] = a;
            rows[card] = a;
            rows[card + 1] = 1.0 - a;
            starts.push(rows);
        }
    }
    starts
}

/// Canonical starts for relaxed channels P_W|XY: constant, W = X, W = Y,
/// W = (X,Y), and lifted BSC rows for binary X.
fn relaxed_starts(dx: usize, dy: usize, card: usize) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    let push_map = |starts: &mut Vec<Vec<f64>>, f: &dyn Fn(usize, usize) -> usize| {
        let mut rows = Vec::new();
        for x in 0..dx {
            for y in 0..dy {
                rows.extend(vertex_row(card, f(x, y)));
            }
        }
        starts.push(rows);
    };
    push_map(&mut starts, &|_, _| 0);
    if card >= dx {
        push_map(&mut starts, &|x, _| x);
    }
    if card >= dy {
        push_map(&mut starts, &|_, y| y);
    }
    if card >= dx * dy {
        push_map(&mut starts, &|x, y| x * dy + y);
    }
    if dx == 2 && card >= 2 {
        for k in 0..=10 {
            let a = k as f64 * 0.05;
            let mut rows = Vec::new();
            for x in 0..dx {
                for _y in 0..dy {
                    let mut row = vec![0.0; card];
                    row[0] = if x == 0 { 1.0 - a } else { a };
                    row[1] = if x == 0 { a } else { 1.0 - a };
                    rows.extend(row);
                }
            }
            starts.push(rows);
        }
    }
    starts
}

/// Embeds Markov channel rows (over X, card `from`) into the relaxed layout
/// (over X×Y, card `to`), padding new symbols with zero mass.
pub fn lift_markov_rows(rows: &[f64], dx: usize, dy: usize, from: usize, to: usize) -> Vec<f64> {
    assert!(to >= from);
    let mut out = Vec::with_capacity(dx * dy * to);
    for x in 0..dx {
        for _y in 0..dy {
            out.extend_from_slice(&rows[x * from..(x + 1) * from]);
            out.extend(std::iter::repeat(0.0).take(to - from));
        }
    }
    out
}

/// Achievable corner of the δ=0 region for a Markov test channel P_W|X:
/// (I(W∧X), H(Y|W)).
pub fn wak_point(pmf: &JointPmf, ch: &Channel) -> Result<(f64, f64)> {
    let dx = pmf.dims()[0];
    if ch.n_in() != dx {
        return Err(Error::ShapeMismatch {
            expected: format!("channel with {dx} inputs"),
            got: format!("{} inputs", ch.n_in()),
        });
    }
    let ce = CoordEval::new(pmf);
    Ok(ce.markov(ch.probs(), ch.n_out()))
}

/// GW coordinates of a test channel P_W|XY: (I(W∧X,Y), H(X|W), H(Y|W)).
pub fn gw_point(pmf: &JointPmf, ch: &Channel) -> Result<(f64, f64, f64)> {
    let wxy = ch.compose(pmf)?;
    let i_wxy = wxy.mutual_information(&[0], &[1, 2])?;
    let h_x_w = wxy.conditional_entropy(&[1], &[0]);
    let h_y_w = wxy.conditional_entropy(&[2], &[0]);
    Ok((i_wxy, h_x_w, h_y_w))
}

/// Relaxed-region coordinates of a test channel P_W|XY:
/// (I(W∧X,Y), H(Y|W), I(W∧Y|X)); the third entry is the Markov defect.
pub fn relaxed_wak_point(pmf: &JointPmf, ch: &Channel) -> Result<(f64, f64, f64)> {
    let dx = pmf.dims()[0];
    let dy = pmf.dims()[1];
    if ch.n_in() != dx * dy {
        return Err(Error::ShapeMismatch {
            expected: format!("channel with {} inputs", dx * dy),
            got: format!("{} inputs", ch.n_in()),
        });
    }
    let ce = CoordEval::new(pmf);
    Ok(ce.relaxed(ch.probs(), ch.n_out()))
}

/// One supporting-line solve: value, witness, and diagnostics. The value is
/// achieved by the witness, hence always an upper bound on the true minimum;
/// `feasible` records whether the witness meets the δ constraint and
/// `converged` whether the pattern search hit its step floor.
#[derive(Clone, Debug)]
pub struct SupportLine {
    pub mu: f64,
    pub value: f64,
    pub witness: Channel,
    pub markov_defect: f64,
    pub feasible: bool,
    pub converged: bool,
    pub evals: u64,
}

/// Penalty weights for the δ constraint, escalated with warm restarts.
const PENALTY_WEIGHTS: [f64; 3] = [16.0, 256.0, 4096.0];

pub fn support_line(q: &RegionQuery, mu: f64) -> Result<SupportLine> {
    support_line_warm(q, mu, &[])
}

/// Supporting line with extra warm starts (rows in the parameterization the
/// query selects: P_W|X at δ = 0, P_W|XY otherwise).
pub fn support_line_warm(q: &RegionQuery, mu: f64, warm: &[Vec<f64>]) -> Result<SupportLine> {
    if mu < 0.0 {
        return Err(Error::Domain {
            what: "supporting-line slope",
            value: mu,
        });
    }
    let (dx, dy) = q.dims();
    let ce = CoordEval::new(&q.pmf);
    if q.delta <= 0.0 {
        let card = q.markov_card();
        let mut starts = markov_starts(dx, card);
        starts.extend_from_slice(warm);
        let sol = minimize_channel(
            dx,
            card,
            |rows| {
                let (i, h) = ce.markov(rows, card);
                i + mu * h
            },
            &starts,
            &q.budget,
        );
        let witness = Channel::with_bound(dx, card, sol.rows.clone(), card)?;
        Ok(SupportLine {
            mu,
            value: sol.value,
            witness,
            markov_defect: 0.0,
            feasible: true,
            converged: sol.converged,
            evals: sol.evals,
        })
    } else {
        let card = q.relaxed_card();
        let mut starts = relaxed_starts(dx, dy, card);
        starts.extend_from_slice(warm);
        let mut sol: Option<Solution> = None;
        let mut evals = 0;
        for lambda in PENALTY_WEIGHTS {
            let f = |rows: &[f64]| {
                let (i, h, d) = ce.relaxed(rows, card);
                i + mu * h + lambda * (d - q.delta).max(0.0)
            };
            let round = match &sol {
                None => minimize_channel(dx * dy, card, f, &starts, &q.budget),
                Some(prev) => {
                    minimize_channel(dx * dy, card, f, &[prev.rows.clone()], &q.budget)
                }
            };
            evals += round.evals;
            sol = Some(round);
        }
        let sol = sol.expect("at least one penalty round");
        let (i, h, d) = ce.relaxed(&sol.rows, card);
        let witness = Channel::with_bound(dx * dy, card, sol.rows.clone(), card)?;
        Ok(SupportLine {
            mu,
            value: i + mu * h,
            witness,
            markov_defect: d,
            feasible: d <= q.delta + 1e-9,
            converged: sol.converged,
            evals,
        })
    }
}

/// Three-valued region membership. `Inside` always carries a witness channel
/// whose coordinates dominate the queried point; `Boundary` is the explicit
/// inconclusive answer when the best penalty found lands inside the tolerance
/// band.
#[derive(Clone, Debug)]
pub enum Membership {
    Inside {
        witness: Channel,
    },
    Outside {
        penalty: f64,
        /// A slope μ* and margin with r0 + μ* r2 < R_μ*(δ) − margin, when found;
        /// certifies exclusion from the convex closure of the region.
        mu_witness: Option<(f64, f64)>,
    },
    Boundary {
        penalty: f64,
    },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Membership::Outside { .. })
    }
}

fn penalty_of(coords: (f64, f64, f64), r0: f64, r2: f64, delta: f64) -> f64 {
    (coords.0 - r0).max(0.0) + (coords.1 - r2).max(0.0) + (coords.2 - delta).max(0.0)
}

pub fn membership(q: &RegionQuery, point: &RatePoint) -> Result<Membership> {
    let (dx, dy) = q.dims();
    let ce = CoordEval::new(&q.pmf);
    let (r0, r2) = (point.r0, point.r2);
    let in_tol = q.budget.tol;

    // exact canonical witnesses first; most queries resolve here
    let card = q.relaxed_card();
    for rows in relaxed_starts(dx, dy, card) {
        let coords = ce.relaxed(&rows, card);
        if penalty_of(coords, r0, r2, q.delta) <= 0.0 {
            return Ok(Membership::Inside {
                witness: Channel::with_bound(dx * dy, card, rows, card)?,
            });
        }
    }

    let (best_penalty, witness) = if q.delta <= 0.0 {
        let card = q.markov_card();
        let sol = minimize_channel(
            dx,
            card,
            |rows| {
                let (i, h) = ce.markov(rows, card);
                (i - r0).max(0.0) + (h - r2).max(0.0)
            },
            &markov_starts(dx, card),
            &q.budget,
        );
        (sol.value, Channel::with_bound(dx, card, sol.rows, card)?)
    } else {
        let sol = minimize_channel(
            dx * dy,
            card,
            |rows| penalty_of(ce.relaxed(rows, card), r0, r2, q.delta),
            &relaxed_starts(dx, dy, card),
            &q.budget,
        );
        (
            sol.value,
            Channel::with_bound(dx * dy, card, sol.rows, card)?,
        )
    };

    if best_penalty < in_tol {
        return Ok(Membership::Inside { witness });
    }
    if best_penalty <= q.boundary_tol {
        return Ok(Membership::Boundary {
            penalty: best_penalty,
        });
    }
    let mu_witness = if q.want_certificate {
        let mut found = None;
        for mu in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let line = support_line(q, mu)?;
            let margin = line.value - (r0 + mu * r2);
            if margin > q.boundary_tol {
                found = Some((mu, margin));
                break;
            }
        }
        found
    } else {
        None
    };
    Ok(Membership::Outside {
        penalty: best_penalty,
        mu_witness,
    })
}

/// The blocklength-dependent terms of the reduction-based converse bound, all
/// in bits per symbol:
/// rate_penalty = (|X|(|Y|+1)+3) log2(n+1)/n,
/// markov_slack = rate_penalty + (log2 log2 |X| + 3 + log2 |X|)/n,
/// helper_rate  = log2|M0|/n + rate_penalty + (log2 log2 |X| + 2)/n,
/// main_rate    = log2|M2|/n + (1 + log2 |Y|)/n.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConverseTerms {
    pub n: u32,
    pub log_m0: f64,
    pub log_m2: f64,
    pub rate_penalty: f64,
    pub markov_slack: f64,
    pub helper_rate: f64,
    pub main_rate: f64,
}

pub fn converse_terms(n: u32, dx: usize, dy: usize, log_m0: f64, log_m2: f64) -> ConverseTerms {
    let nf = n as f64;
    let loglog_x = (dx as f64).log2().log2();
    let rate_penalty = (dx as f64 * (dy as f64 + 1.0) + 3.0) * (nf + 1.0).log2() / nf;
    ConverseTerms {
        n,
        log_m0,
        log_m2,
        rate_penalty,
        markov_slack: rate_penalty + (loglog_x + 3.0 + (dx as f64).log2()) / nf,
        helper_rate: log_m0 / nf + rate_penalty + (loglog_x + 2.0) / nf,
        main_rate: log_m2 / nf + (1.0 + (dy as f64).log2()) / nf,
    }
}

/// Smoothing parameters of the GW-side converse; both default to log2(n)/n.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConverseSmoothing {
    pub alpha_n: f64,
    pub beta_n: f64,
}

impl ConverseSmoothing {
    pub fn default_for(n: u32) -> Self {
        let v = (n as f64).log2() / n as f64;
        Self {
            alpha_n: v,
            beta_n: v,
        }
    }
}

/// Per-symbol rates adjusted by the GW converse penalties:
/// r0 = log2|M0|/n + |X||Y| log2(n+1)/n + (α + β),
/// r1 = log2|M1|/n + 1/n + 2^(−nβ) log2|X|,
/// r2 = log2|M2|/n + 1/n + 2^(−nβ) log2|Y|.
#[allow(clippy::too_many_arguments)]
pub fn gw_converse_rates(
    log_m0: f64,
    log_m1: f64,
    log_m2: f64,
    n: u32,
    dx: usize,
    dy: usize,
    params: ConverseSmoothing,
) -> (f64, f64, f64) {
    let nf = n as f64;
    let fade = (2.0f64).powf(-nf * params.beta_n);
    (
        log_m0 / nf + (dx * dy) as f64 * (nf + 1.0).log2() / nf + params.alpha_n + params.beta_n,
        log_m1 / nf + 1.0 / nf + fade * (dx as f64).log2(),
        log_m2 / nf + 1.0 / nf + fade * (dy as f64).log2(),
    )
}

/// How the converse bound should traverse joint types.
#[derive(Clone, Copy, Debug)]
pub enum BoundMode {
    Exact,
    Mc { trials: u64, seed: u64 },
}

/// Lower bound on the i.i.d. error probability of a WAK code, obtained by
/// summing the source mass of joint types whose adjusted rate point falls
/// outside the relaxed region while the marginal clears the helper rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConverseBound {
    pub terms: ConverseTerms,
    pub bound: f64,
    /// Source mass of types where the exclusion event holds.
    pub event_mass: f64,
    /// Mass of types with inconclusive membership, conservatively treated as
    /// inside (they weaken the bound, never overstate it).
    pub boundary_mass: f64,
    pub types_total: u64,
    pub types_outside: u64,
}

/// Evaluates the reduction-based converse bound for the code's sizes under the
/// i.i.d. law of `pmf`. The bound depends on the code only through
/// (n, |M0|, |M2|).
pub fn wak_converse_bound(
    code: &WakCode,
    pmf: &JointPmf,
    mode: BoundMode,
    budget: &Budget,
    cap: u64,
) -> Result<ConverseBound> {
    let (dx, dy) = (code.dx(), code.dy());
    if pmf.dims() != [dx, dy] {
        return Err(Error::ShapeMismatch {
            expected: format!("[{dx}, {dy}]"),
            got: format!("{:?}", pmf.dims()),
        });
    }
    let n = code.n();
    let log_m0 = (code.size0() as f64).log2();
    let log_m2 = (code.size2() as f64).log2();
    let terms = converse_terms(n, dx, dy, log_m0, log_m2);
    let point = RatePoint::pair(terms.helper_rate, terms.main_rate);

    let mut event_mass = 0.0;
    let mut boundary_mass = 0.0;
    let mut types_total = 0u64;
    let mut types_outside = 0u64;

    let mut classify = |t: &JointType| -> Result<(bool, bool)> {
        // (event holds, membership inconclusive while the marginal clears the rate)
        if !types::high_entropy_marginal(&t.x_counts(), log_m0) {
            return Ok((false, false));
        }
        let mut query = RegionQuery::new(t.empirical(), terms.markov_slack);
        query.budget = *budget;
        query.want_certificate = false;
        match membership(&query, &point)? {
            Membership::Outside { .. } => Ok((true, false)),
            Membership::Boundary { .. } => Ok((false, true)),
            Membership::Inside { .. } => Ok((false, false)),
        }
    };

    match mode {
        BoundMode::Exact => {
            let log_p: Vec<f64> = pmf.probs().iter().map(|&p| p.log2()).collect();
            for t in types::enumerate_joint_types(n as u64, dx, dy, cap)? {
                types_total += 1;
                // log2 of the class mass under P^n; impossible types carry none
                let mut log_mass = types::log2_multinomial(t.counts());
                let mut possible = true;
                for (c, &lp) in t.counts().iter().zip(&log_p) {
                    if *c > 0 {
                        if lp.is_infinite() {
                            possible = false;
                            break;
                        }
                        log_mass += *c as f64 * lp;
                    }
                }
                if !possible {
                    continue;
                }
                let mass = log_mass.exp2();
                let (event, inconclusive) = classify(&t)?;
                if event {
                    types_outside += 1;
                    event_mass += mass;
                } else if inconclusive {
                    boundary_mass += mass;
                }
            }
        }
        BoundMode::Mc { trials, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut cache: BTreeMap<Vec<u64>, (bool, bool)> = BTreeMap::new();
            let mut event_hits = 0u64;
            let mut boundary_hits = 0u64;
            for _ in 0..trials {
                let (xr, yr) = crate::code::sample_iid_pair(pmf, n, &mut rng);
                let x_seq = types::rank_seq(xr, dx, n as usize);
                let y_seq = types::rank_seq(yr, dy, n as usize);
                let t = types::joint_type_of(&x_seq, &y_seq, dx, dy)?;
                let key = t.counts().to_vec();
                let (event, inconclusive) = match cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = classify(&t)?;
                        cache.insert(key, v);
                        v
                    }
                };
                if event {
                    event_hits += 1;
                } else if inconclusive {
                    boundary_hits += 1;
                }
            }
            types_total = cache.len() as u64;
            types_outside = cache.values().filter(|v| v.0).count() as u64;
            event_mass = event_hits as f64 / trials as f64;
            boundary_mass = boundary_hits as f64 / trials as f64;
        }
    }

    Ok(ConverseBound {
        terms,
        bound: event_mass * (1.0 - 1.0 / n as f64),
        event_mass,
        boundary_mass,
        types_total,
        types_outside,
    })
}

/// One supporting-line comparison between the two region descriptions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionRow {
    pub mu: f64,
    /// Supporting line of the δ=0 region over Markov channels P_W|X.
    pub wak_value: f64,
    /// Supporting line of the GW slice at common-plus-private rate H(X),
    /// computed over P_W|XY with the Markov defect penalized to zero.
    pub slice_value: f64,
    /// Residual I(W∧Y|X) of the slice-side witness.
    pub slice_defect: f64,
}

/// Agreement report between the helper region and the matching GW slice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionReport {
    pub rows: Vec<ConnectionRow>,
    /// max over the grid of |wak_value − slice_value|, a grid estimate of the
    /// one-sided Hausdorff discrepancy between the two support functions.
    pub max_discrepancy: f64,
    pub max_defect: f64,
    /// Set when any solve failed to converge; the discrepancy is then only an
    /// upper estimate.
    pub flagged: bool,
}

/// Compares the two descriptions of the same boundary across a μ grid and
/// checks that near-slice channels are driven to the Markov chain.
pub fn check_connection(
    pmf: &JointPmf,
    mu_grid: &[f64],
    budget: &Budget,
) -> Result<ConnectionReport> {
    let (dx, dy) = (pmf.dims()[0], pmf.dims()[1]);
    let mut rows = Vec::new();
    let mut flagged = false;
    for &mu in mu_grid {
        let mut markov_query = RegionQuery::new(pmf.clone(), 0.0);
        markov_query.budget = *budget;
        let wak = support_line(&markov_query, mu)?;

        // slice side: δ = 0 enforced by penalty over the wider channel family,
        // warm-started from the Markov winner
        let mut slice_query = RegionQuery::new(pmf.clone(), 1e-12);
        slice_query.budget = *budget;
        let relaxed_card = slice_query.relaxed_card();
        let warm = lift_markov_rows(
            wak.witness.probs(),
            dx,
            dy,
            wak.witness.n_out(),
            relaxed_card,
        );
        let slice = support_line_warm(&slice_query, mu, &[warm])?;
        flagged |= !wak.converged || !slice.converged || !slice.feasible;
        rows.push(ConnectionRow {
            mu,
            wak_value: wak.value,
            slice_value: slice.value,
            slice_defect: slice.markov_defect,
        });
    }
    let max_discrepancy = rows
        .iter()
        .map(|r| (r.wak_value - r.slice_value).abs())
        .fold(0.0, f64::max);
    let max_defect = rows.iter().map(|r| r.slice_defect).fold(0.0, f64::max);
    Ok(ConnectionReport {
        rows,
        max_discrepancy,
        max_defect,
        flagged,
    })
}
