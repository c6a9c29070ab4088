//! Turning a WAK code into a GW code on a joint type class.
//!
//! The construction runs in two steps. First the helper encoder is rebalanced
//! by slicing its messages into dyadic ranges of class-preimage size and
//! splitting each oversized preimage round-robin, which caps every preimage
//! intersection at (essentially) |T|/|M0| while growing the message set by at
//! most a log factor. Second, the balanced helper becomes the common GW
//! encoder, a private X message enumerates each preimage intersection so the
//! first decoder recovers X^n without error on the class, and the original
//! main encoder/decoder carry over unchanged for the Y side. A certificate
//! records both sides of every rate inequality and both exact class error
//! probabilities; it can only be constructed when all of them hold.
//!
//! Construction is deterministic: class members are processed in
//! lexicographic order throughout.

use crate::code::{gw_error_on_class, wak_error_on_class, GwCode, SparseTable, WakCode};
use crate::error::{Error, Result};
use crate::types::{self, JointType};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn ceil_log2(v: u32) -> u32 {
    if v <= 1 {
        0
    } else {
        32 - (v - 1).leading_zeros()
    }
}

/// How the helper messages were sliced and split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalanceReport {
    /// Slice budget ⌈log2 |M0|⌉.
    pub l_n: u32,
    /// Messages per slice, indices 0..=l_n.
    pub slice_sizes: Vec<u64>,
    /// Slice index of each original message.
    pub slice_of: Vec<u32>,
    /// Original message behind each balanced message.
    pub parent: Vec<u32>,
    /// Part number of each balanced message within its parent's split.
    pub sub_index: Vec<u32>,
    /// Class-preimage sizes per original message.
    pub pre_class_sizes: Vec<u64>,
    /// Class-preimage sizes per balanced message.
    pub post_class_sizes: Vec<u64>,
    /// |T^n_x|, the x-marginal class size.
    pub class_size: u64,
    /// Enforced per-message intersection cap ⌈|T^n_x| / |M0|⌉.
    pub per_message_cap: u64,
}

fn x_class_members(t: &JointType, cap: u64) -> Result<Vec<u64>> {
    let x_counts = t.x_counts();
    Ok(types::enumerate_marginal_class(&x_counts, cap)?
        .map(|s| types::seq_rank(&s, t.dx()))
        .collect())
}

fn check_code_matches(code: &WakCode, t: &JointType) -> Result<()> {
    if code.n() != t.n() as u32 || code.dx() != t.dx() || code.dy() != t.dy() {
        return Err(Error::ShapeMismatch {
            expected: format!("code over ({}x{})^{}", t.dx(), t.dy(), t.n()),
            got: format!("code over ({}x{})^{}", code.dx(), code.dy(), code.n()),
        });
    }
    Ok(())
}

/// Slice index of a message whose class preimage has `s` members: 0 when
/// s ≤ |T|/|M0|, otherwise the smallest i with s ≤ |T| 2^i / |M0|.
/// Integer arithmetic throughout, so the dyadic boundaries are exact.
fn slice_index(s: u64, size0: u32, class_size: u128) -> u32 {
    let lhs = s as u128 * size0 as u128;
    let mut i = 0u32;
    while lhs > (class_size << i) {
        i += 1;
    }
    i
}

/// Rebalances the helper encoder on the x-marginal class of `t`.
///
/// Requires |T^n_x| ≥ |M0|. The returned code keeps the main encoder, routes
/// every balanced message through its parent's decoder row (so the class error
/// probability is preserved exactly), and satisfies
/// |M0'| ≤ (2 L + 1)|M0| together with the per-message intersection cap.
pub fn balance_wak_code(
    code: &WakCode,
    t: &JointType,
    cap: u64,
) -> Result<(WakCode, BalanceReport)> {
    check_code_matches(code, t)?;
    let x_counts = t.x_counts();
    let class_big = types::multinomial(&x_counts);
    if class_big < BigUint::from(code.size0()) {
        let log_class = types::log2_multinomial(&x_counts);
        let log_m0 = (code.size0() as f64).log2();
        return Err(Error::Infeasible {
            log_class,
            log_m0,
            deficit: log_m0 - log_class,
        });
    }
    let members = x_class_members(t, cap)?;
    let class_size = members.len() as u64;
    let size0 = code.size0();

    let mut pre_class_sizes = vec![0u64; size0 as usize];
    for &xr in &members {
        pre_class_sizes[code.enc0()[xr as usize] as usize] += 1;
    }

    let l_n = ceil_log2(size0);
    let mut slice_sizes = vec![0u64; l_n as usize + 1];
    let slice_of: Vec<u32> = pre_class_sizes
        .iter()
        .map(|&s| {
            let i = slice_index(s, size0, class_size as u128);
            slice_sizes[i as usize] += 1;
            i
        })
        .collect();

    // children: one message for slice 0, 2^i messages for slice i
    let mut base = vec![0u32; size0 as usize];
    let mut parent = Vec::new();
    let mut sub_index = Vec::new();
    for m in 0..size0 as usize {
        base[m] = parent.len() as u32;
        let parts = 1u32 << slice_of[m];
        for sub in 0..parts {
            parent.push(m as u32);
            sub_index.push(sub);
        }
    }
    let new_size0 = parent.len() as u32;

    // off-class sequences follow their message's part 0; class members are
    // dealt round-robin in lexicographic order within each preimage
    let mut enc0: Vec<u32> = code.enc0().iter().map(|&m| base[m as usize]).collect();
    let mut dealt = vec![0u32; size0 as usize];
    for &xr in &members {
        let m = code.enc0()[xr as usize] as usize;
        let parts = 1u32 << slice_of[m];
        enc0[xr as usize] = base[m] + (dealt[m] % parts);
        dealt[m] += 1;
    }

    let mut post_class_sizes = vec![0u64; new_size0 as usize];
    for &xr in &members {
        post_class_sizes[enc0[xr as usize] as usize] += 1;
    }
    let per_message_cap = (class_size + size0 as u64 - 1) / size0 as u64;
    assert!(
        post_class_sizes.iter().all(|&s| s <= per_message_cap),
        "round-robin split exceeded the per-message cap"
    );

    // every child decodes through its parent's row
    let mut entries = BTreeMap::new();
    for (&(m, m2), &y) in code.dec().entries() {
        let parts = 1u32 << slice_of[m as usize];
        for sub in 0..parts {
            entries.insert((base[m as usize] + sub, m2), y);
        }
    }
    let balanced = WakCode::new(
        code.n(),
        code.dx(),
        code.dy(),
        new_size0,
        code.size2(),
        enc0,
        code.enc2().to_vec(),
        SparseTable::new(entries, code.dec().default_output()),
    )?;
    let report = BalanceReport {
        l_n,
        slice_sizes,
        slice_of,
        parent,
        sub_index,
        pre_class_sizes,
        post_class_sizes,
        class_size,
        per_message_cap,
    };
    Ok((balanced, report))
}

/// Re-checks everything a [`BalanceReport`] promises, against the actual
/// tables of the original and balanced codes. Used by the self-test harness.
pub fn validate_balance(
    original: &WakCode,
    balanced: &WakCode,
    report: &BalanceReport,
    t: &JointType,
    cap: u64,
) -> Result<()> {
    let members = x_class_members(t, cap)?;
    let size0 = original.size0() as u64;

    let covered: u64 = report.slice_sizes.iter().sum();
    if covered != size0 {
        return Err(Error::Certificate {
            inequality: "slice partition coverage",
            lhs: covered as f64,
            rhs: size0 as f64,
            slack: size0 as f64 - covered as f64,
        });
    }
    for (i, &count) in report.slice_sizes.iter().enumerate().skip(1) {
        // population bound: |M0(i)| 2^(i−1) ≤ |M0|
        let lhs = count.saturating_mul(1 << (i - 1));
        if lhs > size0 {
            return Err(Error::Certificate {
                inequality: "slice population bound",
                lhs: lhs as f64,
                rhs: size0 as f64,
                slack: size0 as f64 - lhs as f64,
            });
        }
    }
    // child counts per slice: |M0'(i)| = 2^i |M0(i)|
    let mut children_per_slice = vec![0u64; report.slice_sizes.len()];
    for &m in &report.parent {
        children_per_slice[report.slice_of[m as usize] as usize] += 1;
    }
    for (i, (&c, &s)) in children_per_slice
        .iter()
        .zip(&report.slice_sizes)
        .enumerate()
    {
        if c != s << i {
            return Err(Error::Certificate {
                inequality: "slice child count",
                lhs: c as f64,
                rhs: (s << i) as f64,
                slack: (s << i) as f64 - c as f64,
            });
        }
    }
    // refinement: the parent map recovers the original encoder everywhere
    for (x, (&new_m, &old_m)) in balanced.enc0().iter().zip(original.enc0()).enumerate() {
        if report.parent[new_m as usize] != old_m {
            return Err(Error::Certificate {
                inequality: "partition refinement",
                lhs: x as f64,
                rhs: old_m as f64,
                slack: f64::NAN,
            });
        }
    }
    if balanced.enc2() != original.enc2() {
        return Err(Error::Certificate {
            inequality: "main encoder preservation",
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
        });
    }
    // per-message intersection cap on the balanced code
    let mut post = vec![0u64; balanced.size0() as usize];
    for &xr in &members {
        post[balanced.enc0()[xr as usize] as usize] += 1;
    }
    for &s in &post {
        if s > report.per_message_cap {
            return Err(Error::Certificate {
                inequality: "balanced preimage bound",
                lhs: s as f64,
                rhs: report.per_message_cap as f64,
                slack: report.per_message_cap as f64 - s as f64,
            });
        }
    }
    // message growth: log2|M0'| ≤ log2|M0| + log2 n + log2 log2 |X| + 2
    let rhs = (original.size0() as f64).log2()
        + (original.n() as f64).log2()
        + (original.dx() as f64).log2().log2()
        + 2.0;
    let lhs = (balanced.size0() as f64).log2();
    if lhs > rhs {
        return Err(Error::Certificate {
            inequality: "balanced common-rate bound",
            lhs,
            rhs,
            slack: rhs - lhs,
        });
    }
    // class error is preserved (never increased)
    let (err_new, total_new) = wak_error_on_class(balanced, t, cap)?;
    let (err_old, total_old) = wak_error_on_class(original, t, cap)?;
    debug_assert_eq!(total_new, total_old);
    if err_new > err_old {
        return Err(Error::Certificate {
            inequality: "balanced error domination",
            lhs: err_new as f64 / total_new as f64,
            rhs: err_old as f64 / total_old as f64,
            slack: (err_old as f64 - err_new as f64) / total_old as f64,
        });
    }
    Ok(())
}

/// Assembles a GW code from a balanced WAK code.
///
/// The common encoder and the Y-side carry over; the private X message is the
/// lexicographic rank of x^n within its preimage's class intersection, so the
/// first decoder inverts (m0, m1) exactly on the class. Sequences outside the
/// class get private message 0 and decode arbitrarily, which the uniform class
/// law never sees. Unassigned (m0, m1) pairs decode to the lexicographically
/// first class member of the preimage, or the first class member overall when
/// the preimage misses the class.
pub fn build_gw_code(balanced: &WakCode, t: &JointType, cap: u64) -> Result<GwCode> {
    check_code_matches(balanced, t)?;
    let members = x_class_members(t, cap)?;
    let dxn = (t.dx() as u64).pow(balanced.n());
    let dyn_ = (t.dy() as u64).pow(balanced.n());
    let pairs = dxn.checked_mul(dyn_).filter(|&p| p <= cap).ok_or({
        Error::EnumerationCap {
            needed: dxn as u128 * dyn_ as u128,
            cap,
        }
    })?;

    let size0 = balanced.size0();
    let mut per_message: Vec<Vec<u64>> = vec![Vec::new(); size0 as usize];
    let mut rank_in_class = vec![0u32; dxn as usize];
    for &xr in &members {
        let m = balanced.enc0()[xr as usize] as usize;
        rank_in_class[xr as usize] = per_message[m].len() as u32;
        per_message[m].push(xr);
    }
    let size1 = per_message
        .iter()
        .map(|v| v.len())
        .max()
        .unwrap_or(0)
        .max(1) as u32;

    let mut enc0 = vec![0u32; pairs as usize];
    let mut enc1 = vec![0u32; pairs as usize];
    let mut enc2 = vec![0u32; pairs as usize];
    for xr in 0..dxn {
        let m0 = balanced.enc0()[xr as usize];
        let m1 = rank_in_class[xr as usize];
        let row = (xr * dyn_) as usize;
        for yr in 0..dyn_ as usize {
            enc0[row + yr] = m0;
            enc1[row + yr] = m1;
            enc2[row + yr] = balanced.enc2()[yr];
        }
    }

    let global_first = members[0];
    let mut dec1 = BTreeMap::new();
    for m0 in 0..size0 {
        let mine = &per_message[m0 as usize];
        let fallback = mine.first().copied().unwrap_or(global_first);
        for r in 0..size1 {
            dec1.insert((m0, r), mine.get(r as usize).copied().unwrap_or(fallback));
        }
    }

    GwCode::new(
        balanced.n(),
        balanced.dx(),
        balanced.dy(),
        (size0, size1, balanced.size2()),
        enc0,
        enc1,
        enc2,
        SparseTable::new(dec1, global_first),
        balanced.dec().clone(),
    )
}

/// Certificate that a constructed GW code satisfies every rate inequality and
/// dominates the source WAK code's class error. Construction fails loudly,
/// naming the violated inequality, when any check fails.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionCertificate {
    pub n: u32,
    pub dx: usize,
    pub dy: usize,
    /// log2 sizes of the input WAK code.
    pub log_m0_in: f64,
    pub log_m2_in: f64,
    /// log2 sizes of the constructed GW code.
    pub log_m0: f64,
    pub log_m1: f64,
    pub log_m2: f64,
    /// log2 of the x-marginal class size.
    pub log_class_x: f64,
    pub common_rate_rhs: f64,
    pub common_rate_slack: f64,
    pub x_rate_sum_rhs: f64,
    pub x_rate_sum_slack: f64,
    pub y_rate_slack: f64,
    /// Exact error probabilities under the uniform joint-class law.
    pub wak_error: f64,
    pub gw_error: f64,
    pub error_slack: f64,
    pub wak_error_count: u64,
    pub gw_error_count: u64,
    pub class_size: u64,
}

/// Measures both sides of the reduction guarantees for a (WAK, GW) pair that
/// share a defining joint type.
pub fn verify_reduction(
    original: &WakCode,
    gw: &GwCode,
    t: &JointType,
    cap: u64,
) -> Result<ReductionCertificate> {
    check_code_matches(original, t)?;
    if gw.n() != original.n() || gw.dx() != original.dx() || gw.dy() != original.dy() {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "gw code over ({}x{})^{}",
                original.dx(),
                original.dy(),
                original.n()
            ),
            got: format!("gw code over ({}x{})^{}", gw.dx(), gw.dy(), gw.n()),
        });
    }
    if original.dx() < 2 {
        return Err(Error::Domain {
            what: "|X| (the rate bounds need log2 log2 |X| finite)",
            value: original.dx() as f64,
        });
    }
    let (size0, size1, size2) = gw.sizes();
    let n = original.n();
    let additive = (n as f64).log2() + (original.dx() as f64).log2().log2() + 2.0;
    let log_m0_in = (original.size0() as f64).log2();
    let log_m2_in = (original.size2() as f64).log2();
    let log_m0 = (size0 as f64).log2();
    let log_m1 = (size1 as f64).log2();
    let log_m2 = (size2 as f64).log2();
    let log_class_x = types::log2_multinomial(&t.x_counts());

    let common_rate_rhs = log_m0_in + additive;
    let common_rate_slack = common_rate_rhs - log_m0;
    if common_rate_slack < 0.0 {
        return Err(Error::Certificate {
            inequality: "common-rate bound",
            lhs: log_m0,
            rhs: common_rate_rhs,
            slack: common_rate_slack,
        });
    }
    let x_rate_sum_rhs = log_class_x + additive;
    let x_rate_sum_slack = x_rate_sum_rhs - (log_m0 + log_m1);
    if x_rate_sum_slack < 0.0 {
        return Err(Error::Certificate {
            inequality: "x-rate-sum bound",
            lhs: log_m0 + log_m1,
            rhs: x_rate_sum_rhs,
            slack: x_rate_sum_slack,
        });
    }
    if size2 != original.size2() {
        return Err(Error::Certificate {
            inequality: "y-rate equality",
            lhs: log_m2,
            rhs: log_m2_in,
            slack: log_m2_in - log_m2,
        });
    }
    let (wak_errors, wak_total) = wak_error_on_class(original, t, cap)?;
    let (gw_errors, gw_total) = gw_error_on_class(gw, t, cap)?;
    debug_assert_eq!(wak_total, gw_total);
    if gw_errors > wak_errors {
        return Err(Error::Certificate {
            inequality: "error domination",
            lhs: gw_errors as f64 / gw_total as f64,
            rhs: wak_errors as f64 / wak_total as f64,
            slack: (wak_errors as f64 - gw_errors as f64) / wak_total as f64,
        });
    }
    let class = wak_total as f64;
    Ok(ReductionCertificate {
        n,
        dx: original.dx(),
        dy: original.dy(),
        log_m0_in,
        log_m2_in,
        log_m0,
        log_m1,
        log_m2,
        log_class_x,
        common_rate_rhs,
        common_rate_slack,
        x_rate_sum_rhs,
        x_rate_sum_slack,
        y_rate_slack: 0.0,
        wak_error: wak_errors as f64 / class,
        gw_error: gw_errors as f64 / class,
        error_slack: (wak_errors - gw_errors) as f64 / class,
        wak_error_count: wak_errors,
        gw_error_count: gw_errors,
        class_size: wak_total.min(u64::MAX as u128) as u64,
    })
}

/// Everything the pipeline produces for one (code, type) input.
pub struct Reduction {
    pub balanced: WakCode,
    pub report: BalanceReport,
    pub gw: GwCode,
    pub certificate: ReductionCertificate,
}

/// Full pipeline: balance, assemble, verify against the original code.
pub fn reduce_wak_to_gw(code: &WakCode, t: &JointType, cap: u64) -> Result<Reduction> {
    let (balanced, report) = balance_wak_code(code, t, cap)?;
    let gw = build_gw_code(&balanced, t, cap)?;
    let certificate = verify_reduction(code, &gw, t, cap)?;
    Ok(Reduction {
        balanced,
        report,
        gw,
        certificate,
    })
}
