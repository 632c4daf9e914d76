//! Weighted `gamma`-medians.
//!
//! For a function `u` on a subset `A` of positive measure and a level
//! `0 < gamma <= 1/2`, the median is
//!
//! ```text
//! m oneof u^gamma(A) = inf { a : mu({x in A : u(x) > a}) < gamma * mu(A) }
//! ```
//!
//! the smallest threshold exceeded only on less than a `gamma` fraction of
//! `A`.  On a finite space the infimum is attained at a data value, and the
//! whole calculus below is exact:
//!
//! * antitone in `gamma`: `gamma <= gamma'` implies `m^gamma' <= m^gamma`,
//! * enlargement: `A subset B` with `mu(B) <= C mu(A)` implies
//!   `m^gamma(A) <= m^(gamma/C)(B)`,
//! * shift: `m_(u+c) = m_u + c`,
//! * absolute value: `|m_u| <= m_(|u|)`,
//! * Chebyshev: `m_(|u|) <= (gamma^-1 avg_A |u|^p)^(1/p)`,
//! * localization: over a ball so small it contains only its center `x`,
//!   the median equals `u(x)`.

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;

/// Check that `subset` is a valid, duplicate-free index set for `space` and
/// that `u` has one value per point.
fn check_inputs(
    space: &MetricMeasureSpace,
    u: &[f64],
    subset: &[usize],
    gamma: f64,
) -> Result<()> {
    if u.len() != space.len() {
        return Err(Error::config(format!(
            "function has {} values but the space has {} points",
            u.len(),
            space.len()
        )));
    }
    if subset.is_empty() {
        return Err(Error::config("median over an empty set is undefined"));
    }
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::config("gamma must lie in (0,1/2]"));
    }
    let mut seen = vec![false; space.len()];
    for &i in subset {
        if i >= space.len() {
            return Err(Error::config(format!(
                "subset index {i} out of range for {} points",
                space.len()
            )));
        }
        if seen[i] {
            return Err(Error::config(format!("subset index {i} repeated")));
        }
        seen[i] = true;
    }
    for &i in subset {
        if !u[i].is_finite() {
            return Err(Error::config(format!("u[{i}] is not finite")));
        }
    }
    Ok(())
}

/// The `gamma`-median of `u` over `subset`.
///
/// Returns the smallest data value `v` of `u` on the subset whose strictly
/// exceeding weight `mu({u > v})` is `< gamma * mu(subset)`.  Sorting and the
/// weight partial sums use a fixed order (ascending value, then point index),
/// so ties resolve deterministically.
pub fn gamma_median(
    space: &MetricMeasureSpace,
    u: &[f64],
    subset: &[usize],
    gamma: f64,
) -> Result<f64> {
    check_inputs(space, u, subset, gamma)?;
    let mut pairs: Vec<(f64, usize)> = subset.iter().map(|&i| (u[i], i)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let total: f64 = pairs.iter().map(|&(_, i)| space.weight(i)).sum();
    let threshold = gamma * total;

    // Walk groups of equal values in ascending order, tracking the weight
    // strictly above the group, and return the first admissible value.
    let mut start = 0;
    while start < pairs.len() {
        let v = pairs[start].0;
        let mut end = start;
        while end < pairs.len() && pairs[end].0 == v {
            end += 1;
        }
        let below_or_equal: f64 = pairs[..end].iter().map(|&(_, i)| space.weight(i)).sum();
        let above = total - below_or_equal;
        if above < threshold {
            return Ok(v);
        }
        start = end;
    }
    // The largest value always qualifies (its exceeding weight is 0).
    unreachable!("median selection must terminate at the maximum");
}

/// Outcome of one median identity or inequality check.
#[derive(Debug, Clone, Copy)]
pub struct MedianCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
}

fn check_of(lhs: f64, rhs: f64, slack_floor: f64) -> MedianCheck {
    let slack = rhs - lhs;
    MedianCheck {
        holds: slack >= slack_floor,
        lhs,
        rhs,
        slack,
    }
}

/// Shift identity `m_(u+c) = m_u + c`; exact, including ties.
pub fn median_shift_check(
    space: &MetricMeasureSpace,
    u: &[f64],
    subset: &[usize],
    gamma: f64,
    c: f64,
) -> Result<MedianCheck> {
    let base = gamma_median(space, u, subset, gamma)?;
    let shifted_field: Vec<f64> = u.iter().map(|&v| v + c).collect();
    let shifted = gamma_median(space, &shifted_field, subset, gamma)?;
    let expected = base + c;
    Ok(MedianCheck {
        holds: shifted == expected,
        lhs: shifted,
        rhs: expected,
        slack: expected - shifted,
    })
}

/// `|m_u| <= m_(|u|)`; exact.
pub fn median_abs_check(
    space: &MetricMeasureSpace,
    u: &[f64],
    subset: &[usize],
    gamma: f64,
) -> Result<MedianCheck> {
    let m = gamma_median(space, u, subset, gamma)?;
    let abs_field: Vec<f64> = u.iter().map(|&v| v.abs()).collect();
    let m_abs = gamma_median(space, &abs_field, subset, gamma)?;
    Ok(check_of(m.abs(), m_abs, 0.0))
}

/// Chebyshev bound `m_(|u|) <= (gamma^-1 avg_subset |u|^p)^(1/p)`.
pub fn median_pnorm_check(
    space: &MetricMeasureSpace,
    u: &[f64],
    subset: &[usize],
    gamma: f64,
    p: f64,
) -> Result<MedianCheck> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::config("p must lie in (0,inf)"));
    }
    let abs_field: Vec<f64> = u.iter().map(|&v| v.abs()).collect();
    let m_abs = gamma_median(space, &abs_field, subset, gamma)?;
    let total = space.measure(subset);
    let avg: f64 = subset
        .iter()
        .map(|&i| space.weight(i) * abs_field[i].powf(p))
        .sum::<f64>()
        / total;
    let rhs = (avg / gamma).powf(1.0 / p);
    Ok(check_of(m_abs, rhs, -1e-12))
}
