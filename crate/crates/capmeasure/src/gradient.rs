//! Fractional gradient sequences on dyadic distance shells.
//!
//! A sequence `(g_k)` of nonnegative functions is an `s`-gradient of `u` if
//! for every pair of points in shell `k` (that is `2^(k-1) <= d(x,y) < 2^k`)
//!
//! ```text
//! |u(x) - u(y)| <= d(x,y)^s * (g_k(x) + g_k(y)).
//! ```
//!
//! On a finite space no exceptional set is needed: the inequality is required
//! for every pair.  The module constructs canonical, product-rule and
//! Lipschitz-profile gradients, validates arbitrary candidates, applies the
//! Poincaré-type scale transform, and evaluates the mixed norms the capacity
//! is built from.

use crate::error::{Error, Result};
use crate::median::gamma_median;
use crate::space::{dyadic_scale, MetricMeasureSpace, ScaleWindow};
use serde_json::{json, Value};

/// Additive tolerance for the pairwise gradient inequality.
pub const VALIDITY_TOL: f64 = 1e-12;

/// Nonnegative per-scale functions over a window of dyadic shell indices.
///
/// Row `k` (for `k_min <= k <= k_max`) stores one value per point; the
/// sequence is zero outside the stored window.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSequence {
    k_min: i32,
    /// `values[r][x]` is the value at shell `k_min + r` and point `x`.
    values: Vec<Vec<f64>>,
}

impl GradientSequence {
    pub fn zeros(window: ScaleWindow, n: usize) -> Self {
        let rows = window.len();
        GradientSequence {
            k_min: window.k_min,
            values: vec![vec![0.0; n]; rows],
        }
    }

    /// Empty sequence (identically zero, no stored rows).
    pub fn empty() -> Self {
        GradientSequence {
            k_min: 0,
            values: Vec::new(),
        }
    }

    pub fn from_rows(k_min: i32, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        for (r, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!(
                    "gradient row {r} has {} values, row 0 has {n}",
                    row.len()
                )));
            }
            for (x, &v) in row.iter().enumerate() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::config(format!(
                        "gradient value at shell {}, point {x} must be finite and >= 0, got {v}",
                        k_min + r as i32
                    )));
                }
            }
        }
        Ok(GradientSequence { k_min, values })
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_min + self.values.len() as i32 - 1
    }

    pub fn window(&self) -> Option<ScaleWindow> {
        if self.values.is_empty() {
            None
        } else {
            Some(ScaleWindow {
                k_min: self.k_min,
                k_max: self.k_max(),
            })
        }
    }

    pub fn points(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Value at shell `k` and point `x`; zero outside the stored window.
    pub fn value(&self, k: i32, x: usize) -> f64 {
        let r = k - self.k_min;
        if r < 0 || r as usize >= self.values.len() {
            0.0
        } else {
            self.values[r as usize][x]
        }
    }

    pub fn row(&self, k: i32) -> Option<&[f64]> {
        let r = k - self.k_min;
        if r < 0 || r as usize >= self.values.len() {
            None
        } else {
            Some(&self.values[r as usize])
        }
    }

    pub fn row_mut(&mut self, k: i32) -> Option<&mut [f64]> {
        let r = k - self.k_min;
        if r < 0 || r as usize >= self.values.len() {
            None
        } else {
            Some(&mut self.values[r as usize])
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.values
            .iter()
            .enumerate()
            .map(move |(r, row)| (self.k_min + r as i32, row.as_slice()))
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = (i32, &mut [f64])> {
        let k_min = self.k_min;
        self.values
            .iter_mut()
            .enumerate()
            .map(move |(r, row)| (k_min + r as i32, row.as_mut_slice()))
    }

    /// `l^q` norm of the column at point `x` (`sup` for `q = inf`).
    pub fn column_norm(&self, x: usize, q: f64) -> f64 {
        if q.is_infinite() {
            self.values.iter().fold(0.0f64, |m, row| m.max(row[x]))
        } else {
            self.values
                .iter()
                .map(|row| row[x].powf(q))
                .sum::<f64>()
                .powf(1.0 / q)
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        GradientSequence {
            k_min: self.k_min,
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// Pointwise sum over the union of windows.
    pub fn pointwise_sum(&self, other: &GradientSequence) -> Self {
        if self.values.is_empty() {
            return other.clone();
        }
        if other.values.is_empty() {
            return self.clone();
        }
        let n = self.points().max(other.points());
        let k_min = self.k_min.min(other.k_min);
        let k_max = self.k_max().max(other.k_max());
        let mut values = Vec::with_capacity((k_max - k_min + 1) as usize);
        for k in k_min..=k_max {
            let row: Vec<f64> = (0..n).map(|x| self.value(k, x) + other.value(k, x)).collect();
            values.push(row);
        }
        GradientSequence { k_min, values }
    }

    /// JSON document `{"k_min", "k_max", "values"}`, rows indexed by scale.
    pub fn to_value(&self) -> Value {
        json!({
            "k_min": self.k_min,
            "k_max": self.k_max(),
            "values": self.values,
        })
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::config("gradient document must be a JSON object"))?;
        let k_min = obj
            .get("k_min")
            .and_then(Value::as_i64)
            .ok_or_else(|| Error::config("gradient field \"k_min\" missing"))? as i32;
        let k_max = obj
            .get("k_max")
            .and_then(Value::as_i64)
            .ok_or_else(|| Error::config("gradient field \"k_max\" missing"))? as i32;
        let values = obj
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::config("gradient field \"values\" missing"))?;
        let rows: Result<Vec<Vec<f64>>> = values
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::config("gradient rows must be arrays"))?
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| Error::config("gradient values must be numbers"))
                    })
                    .collect()
            })
            .collect();
        let rows = rows?;
        if rows.len() as i32 != k_max - k_min + 1 {
            return Err(Error::config(format!(
                "gradient window [{k_min},{k_max}] does not match {} rows",
                rows.len()
            )));
        }
        Self::from_rows(k_min, rows)
    }
}

/// Worst pairwise violation of the gradient inequality.
#[derive(Debug, Clone, Copy)]
pub struct Violation {
    pub x: usize,
    pub y: usize,
    pub k: i32,
    /// `|u(x)-u(y)| - d^s (g_k(x)+g_k(y))`; positive means violated.
    pub amount: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidityReport {
    pub valid: bool,
    /// Pair with the largest left-minus-right gap, if the space has pairs.
    pub worst: Option<Violation>,
}

/// Exhaustive pairwise validity check with tolerance [`VALIDITY_TOL`].
pub fn is_valid_gradient(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &GradientSequence,
    s: f64,
) -> Result<ValidityReport> {
    check_field(space, u)?;
    check_s(s)?;
    let n = space.len();
    let mut worst: Option<Violation> = None;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = space.dist(x, y);
            let k = dyadic_scale(d);
            let lhs = (u[x] - u[y]).abs();
            let rhs = d.powf(s) * (g.value(k, x) + g.value(k, y));
            let amount = lhs - rhs;
            if worst.map_or(true, |w| amount > w.amount) {
                worst = Some(Violation { x, y, k, amount });
            }
        }
    }
    let valid = worst.map_or(true, |w| w.amount <= VALIDITY_TOL);
    Ok(ValidityReport { valid, worst })
}

/// The smallest symmetric per-shell choice: half the worst difference
/// quotient over each annulus,
/// `g_k(x) = 1/2 max { |u(x)-u(y)| / d(x,y)^s : y in annulus(x,k) }`.
pub fn canonical_gradient(
    space: &MetricMeasureSpace,
    u: &[f64],
    s: f64,
) -> Result<GradientSequence> {
    check_field(space, u)?;
    check_s(s)?;
    let n = space.len();
    let window = match space.window() {
        None => return Ok(GradientSequence::empty()),
        Some(w) => w,
    };
    let mut g = GradientSequence::zeros(window, n);
    for x in 0..n {
        for y in (x + 1)..n {
            let d = space.dist(x, y);
            let k = dyadic_scale(d);
            let quotient = 0.5 * (u[x] - u[y]).abs() / d.powf(s);
            let row = g.row_mut(k).expect("shell inside window");
            if quotient > row[x] {
                row[x] = quotient;
            }
            if quotient > row[y] {
                row[y] = quotient;
            }
        }
    }
    Ok(g)
}

/// Product rule: given an `s`-gradient `g` of `u` and a bounded `lipschitz`-
/// Lipschitz `phi`, returns two `s`-gradients `(rho, h)` of `u * phi`:
///
/// ```text
/// rho_k = (g_k ||phi||_inf + 2^(k(1-s)) L |u|) * chi_supp(phi)
/// h_k   = (g_k + 2^(2-ks) |u|) ||phi||_inf     * chi_supp(phi)
/// ```
///
/// `rho` uses the Lipschitz bound on `phi` differences, `h` the sup bound;
/// the shell factors turn each into a valid difference quotient at scale `k`.
pub fn product_gradient(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &GradientSequence,
    phi: &[f64],
    lipschitz: f64,
    s: f64,
) -> Result<(GradientSequence, GradientSequence)> {
    check_field(space, u)?;
    check_field(space, phi)?;
    check_s(s)?;
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::config("lipschitz constant must be finite and >= 0"));
    }
    let emp = empirical_lipschitz(space, phi);
    if emp > lipschitz + 1e-12 * lipschitz.max(1.0) {
        return Err(Error::config(format!(
            "declared Lipschitz constant {lipschitz} is below the empirical constant {emp}"
        )));
    }
    let report = is_valid_gradient(space, u, g, s)?;
    if !report.valid {
        return Err(Error::config(
            "supplied sequence is not a valid gradient of u",
        ));
    }
    let n = space.len();
    let window = match space.window() {
        None => return Ok((GradientSequence::empty(), GradientSequence::empty())),
        Some(w) => w,
    };
    let sup: f64 = phi.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut rho = GradientSequence::zeros(window, n);
    let mut h = GradientSequence::zeros(window, n);
    for k in window.iter() {
        let lip_factor = (k as f64 * (1.0 - s)).exp2() * lipschitz;
        let sup_factor = (2.0 - k as f64 * s).exp2();
        let rho_row = rho.row_mut(k).unwrap();
        let h_row = h.row_mut(k).unwrap();
        for x in 0..n {
            if phi[x] != 0.0 {
                rho_row[x] = g.value(k, x) * sup + lip_factor * u[x].abs();
                h_row[x] = (g.value(k, x) + sup_factor * u[x].abs()) * sup;
            }
        }
    }
    Ok((rho, h))
}

/// Gradient profile for a bounded Lipschitz bump `phi` itself: on each shell
/// the smaller of the Lipschitz and the oscillation bound, spread over the
/// `2^k` neighborhood of the support,
///
/// ```text
/// g_k(x) = 1/2 min { L 2^(k(1-s)),  2 ||phi||_inf 2^(s(1-k)) }   if dist(x, supp phi) <= 2^k,
/// ```
///
/// and zero otherwise.
pub fn lipschitz_gradient(
    space: &MetricMeasureSpace,
    phi: &[f64],
    lipschitz: f64,
    s: f64,
) -> Result<GradientSequence> {
    check_field(space, phi)?;
    check_s(s)?;
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::config("lipschitz constant must be finite and >= 0"));
    }
    let emp = empirical_lipschitz(space, phi);
    if emp > lipschitz + 1e-12 * lipschitz.max(1.0) {
        return Err(Error::config(format!(
            "declared Lipschitz constant {lipschitz} is below the empirical constant {emp}"
        )));
    }
    let n = space.len();
    let window = match space.window() {
        None => return Ok(GradientSequence::empty()),
        Some(w) => w,
    };
    let support: Vec<usize> = (0..n).filter(|&x| phi[x] != 0.0).collect();
    let sup: f64 = phi.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let dist_to_support: Vec<f64> = (0..n)
        .map(|x| {
            support
                .iter()
                .map(|&y| space.dist(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut g = GradientSequence::zeros(window, n);
    for k in window.iter() {
        let reach = (k as f64).exp2();
        let level = 0.5
            * (lipschitz * (k as f64 * (1.0 - s)).exp2())
                .min(2.0 * sup * (s * (1.0 - k as f64)).exp2());
        let row = g.row_mut(k).unwrap();
        for x in 0..n {
            if dist_to_support[x] <= reach {
                row[x] = level;
            }
        }
    }
    Ok(g)
}

/// Scale transform that turns a valid gradient into one obeying the ball
/// Poincaré inequality checked by [`poincare_check`]: with `p' = min(1,p)`,
///
/// ```text
/// out_k = ( sum_(j <= k+2) 2^((j-k) s' p') in_j^p )^(1/p),
/// ```
///
/// the sum truncated to the stored input window.  Each output row gathers its
/// own shell (weight 1, so the output dominates the input and stays a valid
/// gradient), every finer shell with geometrically decaying weight, and two
/// coarser shells.  The output window is widened by two rows on each side.
pub fn poincare_transform(
    space: &MetricMeasureSpace,
    g: &GradientSequence,
    s_prime: f64,
    p: f64,
) -> Result<GradientSequence> {
    if !(s_prime > 0.0 && s_prime < 1.0) {
        return Err(Error::config("s_prime must lie in (0,1)"));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::config("p must lie in (0,inf)"));
    }
    let n = space.len();
    let in_window = match g.window() {
        None => return Ok(GradientSequence::empty()),
        Some(w) => w,
    };
    let p_prime = p.min(1.0);
    let out_window = ScaleWindow {
        k_min: in_window.k_min - 2,
        k_max: in_window.k_max + 2,
    };
    let mut out = GradientSequence::zeros(out_window, n);
    for k in out_window.iter() {
        let row = out.row_mut(k).unwrap();
        for j in in_window.k_min..=(k + 2).min(in_window.k_max) {
            let weight = (((j - k) as f64) * s_prime * p_prime).exp2();
            let in_row = g.row(j).unwrap();
            for x in 0..n {
                row[x] += weight * in_row[x].powf(p);
            }
        }
        for x in 0..n {
            row[x] = row[x].powf(1.0 / p);
        }
    }
    Ok(out)
}

/// `L^p` norm of `u` against the point weights.
pub fn lp_norm(space: &MetricMeasureSpace, u: &[f64], p: f64) -> Result<f64> {
    check_field(space, u)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::config("p must lie in (0,inf)"));
    }
    Ok((0..space.len())
        .map(|x| space.weight(x) * u[x].abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p))
}

/// Mixed norm `|| (sum_k g_k^q)^(1/q) ||_(L^p)`; `sup_k` for `q = inf`.
pub fn mixed_norm(space: &MetricMeasureSpace, g: &GradientSequence, p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::config("p must lie in (0,inf)"));
    }
    if !(q > 0.0) || q.is_nan() {
        return Err(Error::config("q must lie in (0,inf]"));
    }
    if g.window().is_some() && g.points() != space.len() {
        return Err(Error::config(format!(
            "gradient has {} points but the space has {}",
            g.points(),
            space.len()
        )));
    }
    Ok((0..space.len())
        .map(|x| space.weight(x) * g.column_norm(x, q).powf(p))
        .sum::<f64>()
        .powf(1.0 / p))
}

/// Smoothness-space norm `||u||_(L^p) + ||g||_(L^p(l^q))`.
pub fn tl_norm(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &GradientSequence,
    p: f64,
    q: f64,
) -> Result<f64> {
    Ok(lp_norm(space, u, p)? + mixed_norm(space, g, p, q)?)
}

/// One ball of the Poincaré ratio table.
#[derive(Debug, Clone, Copy)]
pub struct PoincareRow {
    pub x: usize,
    /// Ball radius is `2^-k`.
    pub k: i32,
    /// `inf_c` of the `gamma`-median of `|u - c|` over `B(x, 2^-k)`.
    pub lhs: f64,
    /// `2^(-ks) (avg over B(x, 2^(-k+1)) of g_(-k)^p)^(1/p)`.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct PoincareReport {
    pub rows: Vec<PoincareRow>,
    /// Empirical constant: the largest ratio over all balls with nonzero
    /// right side.
    pub max_ratio: f64,
}

/// Evaluate the ball Poincaré inequality for a transformed gradient: over
/// every center `x` and every dyadic radius `2^-k` in the resolution range of
/// the space, compare the best median deviation from a constant against the
/// averaged gradient row at the matching scale (row `-k`, radius `2^-k`).
///
/// The infimum over `c` is scanned over the data values of `u` on the ball
/// plus two interior points per gap, which brackets the piecewise-constant
/// optimum.  Balls with zero right side are skipped.
pub fn poincare_check(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &GradientSequence,
    gamma: f64,
    s: f64,
    p: f64,
) -> Result<PoincareReport> {
    check_field(space, u)?;
    check_s(s)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::config("p must lie in (0,inf)"));
    }
    let window = match space.window() {
        None => {
            return Ok(PoincareReport {
                rows: Vec::new(),
                max_ratio: 0.0,
            })
        }
        Some(w) => w,
    };
    // Radii 2^-k from one shell above the diameter down to one below the
    // resolution; rows outside this range see only empty or singleton balls.
    let k_lo = -(window.k_max + 1);
    let k_hi = -(window.k_min - 1);
    let mut rows = Vec::new();
    let mut max_ratio = 0.0f64;
    for x in 0..space.len() {
        for k in k_lo..=k_hi {
            let radius = (-k as f64).exp2();
            let ball = space.ball(x, radius);
            if ball.is_empty() {
                continue;
            }
            let big = space.ball(x, 2.0 * radius);
            let mu_big = space.measure(&big);
            let avg = big
                .iter()
                .map(|&y| space.weight(y) * g.value(-k, y).powf(p))
                .sum::<f64>()
                / mu_big;
            let rhs = (-(k as f64) * s).exp2() * avg.powf(1.0 / p);
            if rhs <= 0.0 {
                continue;
            }
            let lhs = best_median_deviation(space, u, &ball, gamma)?;
            let ratio = lhs / rhs;
            max_ratio = max_ratio.max(ratio);
            rows.push(PoincareRow {
                x,
                k,
                lhs,
                rhs,
                ratio,
            });
        }
    }
    Ok(PoincareReport { rows, max_ratio })
}

/// `inf_c` of the `gamma`-median of `|u - c|` over `subset`, scanned over
/// data values and two interior points per gap.
pub fn best_median_deviation(
    space: &MetricMeasureSpace,
    u: &[f64],
    subset: &[usize],
    gamma: f64,
) -> Result<f64> {
    let mut values: Vec<f64> = subset.iter().map(|&i| u[i]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut candidates = values.clone();
    for w in values.windows(2) {
        let gap = w[1] - w[0];
        candidates.push(w[0] + gap / 3.0);
        candidates.push(w[0] + 2.0 * gap / 3.0);
    }
    let mut best = f64::INFINITY;
    let mut field = vec![0.0; u.len()];
    for c in candidates {
        for &i in subset {
            field[i] = (u[i] - c).abs();
        }
        let m = gamma_median(space, &field, subset, gamma)?;
        best = best.min(m);
    }
    Ok(best)
}

/// Largest pairwise difference quotient `|phi(x)-phi(y)| / d(x,y)`.
pub fn empirical_lipschitz(space: &MetricMeasureSpace, phi: &[f64]) -> f64 {
    let n = space.len();
    let mut lip = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            lip = lip.max((phi[x] - phi[y]).abs() / space.dist(x, y));
        }
    }
    lip
}

fn check_field(space: &MetricMeasureSpace, u: &[f64]) -> Result<()> {
    if u.len() != space.len() {
        return Err(Error::config(format!(
            "field has {} values but the space has {} points",
            u.len(),
            space.len()
        )));
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::config(format!("field value {i} is not finite")));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::config("s must lie in (0,1)"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::generate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_points() -> MetricMeasureSpace {
        MetricMeasureSpace::from_matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]], None).unwrap()
    }

    #[test]
    fn canonical_two_point_split() {
        let s = two_points();
        let u = [0.0, 1.0];
        let g = canonical_gradient(&s, &u, 0.5).unwrap();
        assert_eq!(g.window(), Some(ScaleWindow { k_min: 1, k_max: 1 }));
        assert_eq!(g.value(1, 0), 0.5);
        assert_eq!(g.value(1, 1), 0.5);
        assert!(is_valid_gradient(&s, &u, &g, 0.5).unwrap().valid);
    }

    #[test]
    fn canonical_gradient_on_three_grid() {
        // Points {0, 1/2, 1}: the neighbor pairs sit in shell 0, the
        // endpoints in shell 1.
        let space = generate::grid1d(3).unwrap();
        let u = [0.0, 1.0, 0.0];
        let s = 0.5;
        let g = canonical_gradient(&space, &u, s).unwrap();
        let q = 0.5 / 0.5f64.powf(s); // half of |1-0| / (1/2)^s
        assert_eq!(g.window(), Some(ScaleWindow { k_min: 0, k_max: 1 }));
        assert!((g.value(0, 0) - q).abs() < 1e-15);
        assert!((g.value(0, 1) - q).abs() < 1e-15);
        assert!((g.value(0, 2) - q).abs() < 1e-15);
        assert_eq!(g.value(1, 0), 0.0);
        assert_eq!(g.value(1, 2), 0.0);
        assert!(is_valid_gradient(&space, &u, &g, s).unwrap().valid);
    }

    #[test]
    fn validity_reports_worst_pair() {
        let s = two_points();
        let u = [0.0, 1.0];
        let g = GradientSequence::from_rows(1, vec![vec![0.2, 0.2]]).unwrap();
        let report = is_valid_gradient(&s, &u, &g, 0.5).unwrap();
        assert!(!report.valid);
        let worst = report.worst.unwrap();
        assert_eq!((worst.x, worst.y, worst.k), (0, 1, 1));
        assert!((worst.amount - 0.6).abs() < 1e-12);
    }

    #[test]
    fn product_with_constant_one_keeps_rho() {
        let space = generate::grid1d(8).unwrap();
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        let s = 0.4;
        let g = canonical_gradient(&space, &u, s).unwrap();
        let phi = vec![1.0; 8];
        let (rho, h) = product_gradient(&space, &u, &g, &phi, 0.0, s).unwrap();
        for (k, row) in rho.rows() {
            for x in 0..8 {
                assert!((row[x] - g.value(k, x)).abs() < 1e-15);
            }
        }
        // With ||phi|| = 1 and L = 0 the sup-bound variant adds 2^(2-ks)|u|.
        for (k, row) in h.rows() {
            for x in 0..8 {
                let expected = g.value(k, x) + (2.0 - k as f64 * s).exp2() * u[x].abs();
                assert!((row[x] - expected).abs() < 1e-12);
            }
        }
        assert!(is_valid_gradient(&space, &u, &rho, s).unwrap().valid);
        assert!(is_valid_gradient(&space, &u, &h, s).unwrap().valid);
    }

    #[test]
    fn product_with_zero_field_scales_h() {
        let space = generate::grid1d(6).unwrap();
        let u = vec![0.0; 6];
        let g = canonical_gradient(&space, &u, 0.5).unwrap();
        let phi: Vec<f64> = (0..6).map(|i| 1.0 - i as f64 / 5.0).collect();
        let (rho, h) = product_gradient(&space, &u, &g, &phi, 1.0, 0.5).unwrap();
        let product: Vec<f64> = (0..6).map(|i| u[i] * phi[i]).collect();
        assert!(is_valid_gradient(&space, &product, &rho, 0.5).unwrap().valid);
        assert!(is_valid_gradient(&space, &product, &h, 0.5).unwrap().valid);
        for (_, row) in h.rows() {
            assert!(row.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn product_rejects_understated_lipschitz() {
        let space = generate::grid1d(4).unwrap();
        let u = vec![0.5; 4];
        let g = canonical_gradient(&space, &u, 0.5).unwrap();
        let phi = vec![0.0, 1.0, 0.0, 0.0];
        let err = product_gradient(&space, &u, &g, &phi, 0.5, 0.5).unwrap_err();
        assert!(err.to_string().contains("Lipschitz"), "{err}");
    }

    #[test]
    fn product_gradients_are_valid_for_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..200 {
            let n = rng.random_range(2..=10);
            let coords: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)])
                .collect();
            let space = match MetricMeasureSpace::from_coords(coords, None) {
                Ok(s) => s,
                Err(_) => continue, // coincident points
            };
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let phi: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            let s = rng.random_range(0.1..0.9);
            let g = canonical_gradient(&space, &u, s).unwrap();
            let lip = empirical_lipschitz(&space, &phi);
            let (rho, h) = product_gradient(&space, &u, &g, &phi, lip, s).unwrap();
            let product: Vec<f64> = (0..n).map(|i| u[i] * phi[i]).collect();
            let r1 = is_valid_gradient(&space, &product, &rho, s).unwrap();
            let r2 = is_valid_gradient(&space, &product, &h, s).unwrap();
            assert!(r1.valid, "rho invalid in trial {trial}: {:?}", r1.worst);
            assert!(r2.valid, "h invalid in trial {trial}: {:?}", r2.worst);
        }
    }

    #[test]
    fn lipschitz_profile_two_point_value() {
        let space = two_points();
        let phi = [1.0, 0.0];
        let g = lipschitz_gradient(&space, &phi, 1.0, 0.5).unwrap();
        // Shell 1: min(2^0.5, 2 * 2^0) / 2 = 2^-0.5.
        let expected = 0.5f64.sqrt();
        assert!((g.value(1, 0) - expected).abs() < 1e-15);
        assert!((g.value(1, 1) - expected).abs() < 1e-15);
        assert!(is_valid_gradient(&space, &phi, &g, 0.5).unwrap().valid);
    }

    #[test]
    fn lipschitz_profile_is_valid_even_for_steep_bumps() {
        // A spike much steeper than 1/diameter exercises the oscillation
        // branch on fine shells.
        let coords: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.1]).collect();
        let space = MetricMeasureSpace::from_coords(coords, None).unwrap();
        let mut phi = vec![0.0; 9];
        phi[4] = 1.0;
        let lip = empirical_lipschitz(&space, &phi);
        for s in [0.2, 0.5, 0.8] {
            let g = lipschitz_gradient(&space, &phi, lip, s).unwrap();
            let report = is_valid_gradient(&space, &phi, &g, s).unwrap();
            assert!(report.valid, "s = {s}: {:?}", report.worst);
        }
    }

    #[test]
    fn lipschitz_profile_vanishes_far_from_support() {
        let space = generate::grid1d(64).unwrap();
        let mut phi = vec![0.0; 64];
        phi[0] = 1.0;
        phi[1] = 0.5;
        let lip = empirical_lipschitz(&space, &phi);
        let g = lipschitz_gradient(&space, &phi, lip, 0.5).unwrap();
        // On the finest shell only points near the support are charged.
        let k = space.window().unwrap().k_min;
        let reach = (k as f64).exp2();
        for x in 0..64 {
            let d = space.dist(x, 0).min(space.dist(x, 1));
            if d > reach {
                assert_eq!(g.value(k, x), 0.0, "x = {x}");
            }
        }
    }

    #[test]
    fn transform_of_zero_is_zero() {
        let space = generate::grid1d(8).unwrap();
        let zero = GradientSequence::zeros(space.window().unwrap(), 8);
        let out = poincare_transform(&space, &zero, 0.25, 2.0).unwrap();
        for (_, row) in out.rows() {
            assert!(row.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn transform_single_scale_closed_form() {
        let space = generate::grid1d(8).unwrap();
        let window = space.window().unwrap();
        let j0 = window.k_min + 1;
        let mut h = GradientSequence::zeros(window, 8);
        for x in 0..8 {
            h.row_mut(j0).unwrap()[x] = 1.0;
        }
        let (s_prime, p) = (0.25, 2.0);
        let out = poincare_transform(&space, &h, s_prime, p).unwrap();
        let p_prime = p.min(1.0);
        for (k, row) in out.rows() {
            let expected = if k >= j0 - 2 {
                (((j0 - k) as f64) * s_prime * p_prime / p).exp2()
            } else {
                0.0
            };
            for x in 0..8 {
                assert!(
                    (row[x] - expected).abs() < 1e-14,
                    "k = {k}, got {}, want {expected}",
                    row[x]
                );
            }
        }
    }

    #[test]
    fn transform_dominates_input_and_keeps_validity() {
        let space = generate::grid1d(16).unwrap();
        let u: Vec<f64> = (0..16).map(|i| ((i * i) as f64 * 0.13).sin()).collect();
        let s = 0.6;
        let h = canonical_gradient(&space, &u, s).unwrap();
        let g = poincare_transform(&space, &h, 0.3, 1.5).unwrap();
        for (k, row) in h.rows() {
            for x in 0..16 {
                assert!(g.value(k, x) >= row[x] - 1e-15);
            }
        }
        assert!(is_valid_gradient(&space, &u, &g, s).unwrap().valid);
    }

    #[test]
    fn transform_preserves_support_union() {
        let space = generate::grid1d(12).unwrap();
        let window = space.window().unwrap();
        let mut h = GradientSequence::zeros(window, 12);
        // Activity only at points 3 and 4, on two shells.
        h.row_mut(window.k_min).unwrap()[3] = 1.0;
        h.row_mut(window.k_min + 1).unwrap()[4] = 2.0;
        let g = poincare_transform(&space, &h, 0.2, 0.7).unwrap();
        for (_, row) in g.rows() {
            for x in 0..12 {
                if x != 3 && x != 4 {
                    assert_eq!(row[x], 0.0);
                }
            }
        }
    }

    #[test]
    fn norms_compose() {
        // Two points, unit weights: ||u||_2 = 5, one active shell with
        // column norms 3 and 4.
        let space = two_points();
        let u = [3.0, 4.0];
        let g = GradientSequence::from_rows(1, vec![vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let lp = lp_norm(&space, &u, 2.0).unwrap();
        assert!((lp - 5.0).abs() < 1e-12);
        let m = mixed_norm(&space, &g, 2.0, 2.0).unwrap();
        assert!((m - 5.0).abs() < 1e-12);
        let m_inf = mixed_norm(&space, &g, 2.0, f64::INFINITY).unwrap();
        assert!((m_inf - 5.0).abs() < 1e-12);
        let t = tl_norm(&space, &u, &g, 2.0, 2.0).unwrap();
        assert!((t - 10.0).abs() < 1e-12);
    }

    #[test]
    fn poincare_check_finite_on_indicator() {
        let space = generate::grid1d(16).unwrap();
        let u: Vec<f64> = (0..16).map(|i| f64::from(u8::from(i < 8))).collect();
        let s = 0.5;
        let h = canonical_gradient(&space, &u, s).unwrap();
        let g = poincare_transform(&space, &h, 0.25, 2.0).unwrap();
        let report = poincare_check(&space, &u, &g, 0.25, s, 2.0).unwrap();
        assert!(!report.rows.is_empty());
        assert!(report.max_ratio.is_finite());
        assert!(report.max_ratio > 0.0);
    }

    #[test]
    fn gradient_json_round_trip() {
        let g = GradientSequence::from_rows(-2, vec![vec![0.5, 1.5], vec![0.0, 2.25]]).unwrap();
        let v = g.to_value();
        let back = GradientSequence::from_value(&v).unwrap();
        assert_eq!(g, back);
        assert!(GradientSequence::from_rows(0, vec![vec![-1.0]]).is_err());
    }

    #[test]
    fn canonical_gradient_is_valid_on_many_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n = rng.random_range(2..=12);
            let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..8.0)]).collect();
            let space = match MetricMeasureSpace::from_coords(coords, None) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = rng.random_range(0.05..0.95);
            let g = canonical_gradient(&space, &u, s).unwrap();
            let report = is_valid_gradient(&space, &u, &g, s).unwrap();
            assert!(report.valid, "trial {trial}: {:?}", report.worst);
        }
    }

    #[test]
    fn transform_norm_comparison_has_a_finite_constant() {
        // The transformed sequence stays norm-comparable to the input: one
        // constant works across random instances, and it is attained.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut ratios = Vec::new();
        for _ in 0..100 {
            let n = rng.random_range(3..=16);
            let space = generate::grid1d(n).unwrap();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = rng.random_range(0.2..0.9);
            let p = rng.random_range(0.5..3.0);
            let q = rng.random_range(1.0..3.0);
            let h = canonical_gradient(&space, &u, s).unwrap();
            let g = poincare_transform(&space, &h, s / 2.0, p).unwrap();
            let denom = mixed_norm(&space, &h, p, q).unwrap();
            if denom == 0.0 {
                continue;
            }
            ratios.push(mixed_norm(&space, &g, p, q).unwrap() / denom);
        }
        assert!(ratios.len() > 90);
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(max.is_finite() && max >= 1.0);
        assert!(ratios.iter().any(|&r| r == max));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Enlarging a valid gradient cannot break the pairwise inequality:
        // pointwise max of two valid candidates and scaling by lambda >= 1
        // both stay valid with no extra slack.
        #[test]
        fn validity_survives_pointwise_max_and_inflation(
            seed in 0u64..10_000,
            lambda in 1.0f64..4.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..=9);
            let space = generate::grid1d(n).unwrap();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = rng.random_range(0.1..0.9);
            let base = canonical_gradient(&space, &u, s).unwrap();
            let mut g = base.clone();
            let mut h = base.clone();
            for (_, row) in g.rows_mut() {
                for v in row.iter_mut() {
                    *v += rng.random_range(0.0..0.5);
                }
            }
            for (_, row) in h.rows_mut() {
                for v in row.iter_mut() {
                    *v += rng.random_range(0.0..0.5);
                }
            }
            let mut max = g.clone();
            for ((_, out), (_, hr)) in max.rows_mut().zip(h.rows()) {
                for (o, &hv) in out.iter_mut().zip(hr) {
                    *o = o.max(hv);
                }
            }
            prop_assert!(is_valid_gradient(&space, &u, &g, s).unwrap().valid);
            prop_assert!(is_valid_gradient(&space, &u, &h, s).unwrap().valid);
            prop_assert!(is_valid_gradient(&space, &u, &max, s).unwrap().valid);
            prop_assert!(is_valid_gradient(&space, &u, &g.scaled(lambda), s).unwrap().valid);
        }

        #[test]
        fn mixed_norm_is_one_homogeneous(
            seed in 0u64..10_000,
            lambda in 0.01f64..50.0,
            p in 0.4f64..3.0,
            q in 0.4f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..=10);
            let space = generate::grid1d(n).unwrap();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = canonical_gradient(&space, &u, 0.5).unwrap();
            let a = mixed_norm(&space, &g, p, q).unwrap();
            let b = mixed_norm(&space, &g.scaled(lambda), p, q).unwrap();
            prop_assert!((b - lambda * a).abs() <= 1e-12 * (1.0 + lambda * a));
            let ai = mixed_norm(&space, &g, p, f64::INFINITY).unwrap();
            let bi = mixed_norm(&space, &g.scaled(lambda), p, f64::INFINITY).unwrap();
            prop_assert!((bi - lambda * ai).abs() <= 1e-12 * (1.0 + lambda * ai));
        }

        #[test]
        fn tl_norm_triangle_for_convex_exponents(
            seed in 0u64..10_000,
            p in 1.0f64..3.0,
            q in 1.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..=10);
            let space = generate::grid1d(n).unwrap();
            let s = rng.random_range(0.1..0.9);
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let gu = canonical_gradient(&space, &u, s).unwrap();
            let gv = canonical_gradient(&space, &v, s).unwrap();
            let gs = canonical_gradient(&space, &sum, s).unwrap();
            let lhs = tl_norm(&space, &sum, &gs, p, q).unwrap();
            let rhs = tl_norm(&space, &u, &gu, p, q).unwrap()
                + tl_norm(&space, &v, &gv, p, q).unwrap();
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs), "{lhs} > {rhs}");
        }

        // Below p = 1 the norm is only a quasi-norm; its p-th power is
        // subadditive instead.
        #[test]
        fn tl_norm_quasi_triangle_below_one(
            seed in 0u64..10_000,
            p in 0.3f64..0.95,
            q in 1.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..=10);
            let space = generate::grid1d(n).unwrap();
            let s = rng.random_range(0.1..0.9);
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let gu = canonical_gradient(&space, &u, s).unwrap();
            let gv = canonical_gradient(&space, &v, s).unwrap();
            let gs = canonical_gradient(&space, &sum, s).unwrap();
            let lhs = tl_norm(&space, &sum, &gs, p, q).unwrap().powf(p);
            let rhs = tl_norm(&space, &u, &gu, p, q).unwrap().powf(p)
                + tl_norm(&space, &v, &gv, p, q).unwrap().powf(p);
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs), "{lhs} > {rhs}");
        }
    }
}
