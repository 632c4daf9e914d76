//! End-to-end numerical experiments tying capacity, content and medians
//! together on generated instances.
//!
//! * [`verify_thm1`] compares capacity against exact gauged content on a
//!   nested family of Cantor-like subsets of a 1d grid.
//! * [`proof_covering`] runs the covering construction behind the capacity
//!   lower bound: it builds a cutoff profile around a base point, transforms
//!   its product gradient, selects one scale per target point, thins the
//!   selected balls to a disjoint family, and checks the resulting gauge sum
//!   against the gradient energy.
//! * [`wsp_norm`] is the classical fractional Sobolev norm on embedded
//!   grids, used as the reference scale for the Lebesgue-point experiment.
//! * [`lebesgue_experiment`] measures the maximal-function embedding
//!   constant, hunts for points where the local energy beats a radial log
//!   gauge, and tabulates median Cauchy differences across scales.

use crate::capacity::ball_test_profile;
use crate::error::{Error, Result};
use crate::gradient::{
    is_valid_gradient, lipschitz_gradient, lp_norm, mixed_norm, poincare_check,
    poincare_transform, product_gradient, GradientSequence,
};
use crate::hausdorff::{content, five_b_cover, BallSpec, ContentMethod, Gauge};
use crate::jsonio;
use crate::median::gamma_median;
use crate::space::{generate, MetricKind, MetricMeasureSpace, Params};
use crate::capacity::{capacity_upper, SolverOptions, Strategy};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::time::Instant;

/// One instance of the capacity-versus-content comparison.
#[derive(Debug, Clone)]
pub struct StageRow {
    pub instance: String,
    pub set_size: usize,
    pub capacity: f64,
    pub capacity_theta: f64,
    pub content: f64,
    pub ratio: f64,
}

/// Instance family for the capacity-to-content comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Cantor middle-interval stages on an 81-point grid; levels 1..=4.
    Cantor,
    /// Halving centered intervals on an 81-point grid; levels 1..=6.
    Intervals,
    /// Halving centered squares on a 16x16 grid; levels 1..=3.
    Squares,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cantor => "cantor",
            Family::Intervals => "intervals",
            Family::Squares => "squares",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cantor" => Ok(Family::Cantor),
            "intervals" => Ok(Family::Intervals),
            "squares" => Ok(Family::Squares),
            other => Err(Error::config(format!(
                "unknown family \"{other}\" (expected cantor, intervals or squares)"
            ))),
        }
    }

    pub fn max_level(&self) -> usize {
        match self {
            Family::Cantor => 4,
            Family::Intervals => 6,
            Family::Squares => 3,
        }
    }

    fn space(&self) -> Result<MetricMeasureSpace> {
        match self {
            Family::Cantor | Family::Intervals => generate::grid1d(81),
            Family::Squares => generate::grid2d(16),
        }
    }

    fn instance(&self, level: usize) -> (String, Vec<usize>) {
        let name = format!("{}_{level}", self.name());
        let set = match self {
            Family::Cantor => generate::cantor_stage(81, 4, level as u32),
            Family::Intervals => {
                // Centered interval whose half-width halves per level.
                let half = 40usize >> (level - 1);
                (40 - half..=40 + half).collect()
            }
            Family::Squares => {
                // Start at an 8x8 block: the full 16x16 grid would exceed
                // what the exact covering search accepts.
                let half = 8usize >> level;
                let lo = 8 - half;
                let hi = 7 + half;
                let mut set = Vec::new();
                for i in lo..=hi {
                    for j in lo..=hi {
                        set.push(i * 16 + j);
                    }
                }
                set
            }
        };
        (name, set)
    }
}

#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub family: String,
    pub strategy: String,
    pub theta: f64,
    pub rows: Vec<StageRow>,
    /// Instances skipped because both sides of the ratio vanished.
    pub degenerate: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`; the two-sided comparison constant.
    pub spread: f64,
    /// True when every ratio is finite and the spread stays within a fixed
    /// 10x band, meaning one constant explains the whole family.
    pub verdict: bool,
    /// Wall-clock seconds; informational only and never serialized, so that
    /// emitted reports are byte-identical across runs.
    pub runtime_seconds: f64,
}

impl TheoremReport {
    pub fn to_value(&self) -> Value {
        json!({
            "degenerate": self.degenerate,
            "family": self.family,
            "max_ratio": self.max_ratio,
            "min_ratio": self.min_ratio,
            "rows": self.rows.iter().map(|r| json!({
                "capacity": r.capacity,
                "capacity_theta": r.capacity_theta,
                "content": r.content,
                "instance": r.instance,
                "ratio": r.ratio,
                "set_size": r.set_size,
            })).collect::<Vec<_>>(),
            "spread": self.spread,
            "strategy": self.strategy,
            "theta": self.theta,
            "verdict": self.verdict,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,set_size,capacity,capacity_theta,content,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.instance,
                r.set_size,
                jsonio::fmt_f64_12(r.capacity),
                jsonio::fmt_f64_12(r.capacity_theta),
                jsonio::fmt_f64_12(r.content),
                jsonio::fmt_f64_12(r.ratio),
            ));
        }
        out
    }
}

/// Capacity-to-content comparison over a nested instance family, with the
/// theta gauge matched to the capacity exponents and covers at fineness
/// `delta`.  The ratio `cap(E)^theta / content(E)` should stay in a fixed
/// two-sided band across the levels; the verdict records whether it stays
/// within 10x.  Quasi-norm parameters fall back to the multistart solver,
/// recorded in the `strategy` field.
pub fn verify_thm1(
    family: Family,
    levels: (usize, usize),
    params: &Params,
    delta: f64,
    options: &SolverOptions,
) -> Result<TheoremReport> {
    params.validate()?;
    let (lo, hi) = levels;
    if lo == 0 || lo > hi || hi > family.max_level() {
        return Err(Error::config(format!(
            "levels {lo}..{hi} out of range for family {} (allowed 1..{})",
            family.name(),
            family.max_level()
        )));
    }
    let start = Instant::now();
    let space = family.space()?;
    let theta = params.theta();
    let gauge = Gauge::Theta {
        s: params.s,
        p: params.p,
        theta,
    };
    let strategy = Strategy::for_params(params);
    let stages: Vec<(String, Vec<usize>)> =
        (lo..=hi).map(|level| family.instance(level)).collect();
    let degenerate = stages.iter().filter(|(_, set)| set.is_empty()).count();
    let rows: Vec<StageRow> = stages
        .par_iter()
        .filter(|(_, set)| !set.is_empty())
        .map(|(name, set)| -> Result<StageRow> {
            let cap = capacity_upper(&space, set, params, strategy, options)?.value;
            let cover = content(&space, set, gauge, delta, ContentMethod::Exact)?;
            let cap_theta = cap.powf(theta);
            Ok(StageRow {
                instance: name.clone(),
                set_size: set.len(),
                capacity: cap,
                capacity_theta: cap_theta,
                content: cover.gauge_sum,
                ratio: cap_theta / cover.gauge_sum,
            })
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::config("every requested instance was empty"));
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    let spread = max_ratio / min_ratio;
    Ok(TheoremReport {
        family: family.name().to_owned(),
        strategy: strategy.name().to_owned(),
        theta,
        rows,
        degenerate,
        min_ratio,
        max_ratio,
        spread,
        verdict: max_ratio.is_finite() && spread <= 10.0,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Scale selected for one target point by the covering construction.
#[derive(Debug, Clone, Copy)]
pub struct SelectionRow {
    pub x: usize,
    pub k: i32,
    /// Ball radius `2^(1-k)`.
    pub radius: f64,
    /// `M` times the gradient energy over the ball.
    pub lhs: f64,
    /// Log gauge of the ball.
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ProofCoveringReport {
    pub x0: usize,
    pub m: i32,
    /// Deepest scale index probed; balls of radius `2^(1-k_top)` are already
    /// singletons, so nothing changes beyond it.
    pub k_top: i32,
    /// Constant of the scale-selection inequality, the empirical one from
    /// [`poincare_check`] unless the caller pinned a value.
    pub c_poincare: f64,
    /// The structural constant `M` in front of the gradient energy.
    pub m_constant: f64,
    /// Whether the supplied gradient is valid for the supplied profile;
    /// recorded, not required (scaled-down gradients are deliberately run).
    pub gradient_valid: bool,
    pub selections: Vec<SelectionRow>,
    /// Disjoint subfamily of the selected balls.
    pub family: Vec<BallSpec>,
    pub gauge_sum: f64,
    /// `M ||g||^p`, the certified upper bound for `gauge_sum`.
    pub bound: f64,
    pub bound_holds: bool,
}

impl ProofCoveringReport {
    pub fn to_value(&self) -> Value {
        json!({
            "bound": self.bound,
            "bound_holds": self.bound_holds,
            "c_poincare": self.c_poincare,
            "family": self.family.iter().map(BallSpec::to_value).collect::<Vec<_>>(),
            "gauge_sum": self.gauge_sum,
            "gradient_valid": self.gradient_valid,
            "k_top": self.k_top,
            "m": self.m,
            "m_constant": self.m_constant,
            "selections": self.selections.iter().map(|r| json!({
                "k": r.k,
                "lhs": r.lhs,
                "radius": r.radius,
                "rhs": r.rhs,
                "x": r.x,
            })).collect::<Vec<_>>(),
            "x0": self.x0,
        })
    }
}

/// Base point carrying the whole target set inside radius `r` with a
/// nonempty shell between radii `4r` and `8r` around it.
fn base_point(space: &MetricMeasureSpace, set: &[usize], r: f64, m: i32) -> Result<usize> {
    (0..space.len())
        .find(|&x| {
            let ball = space.ball(x, r);
            let inside = set.iter().all(|e| ball.contains(e));
            let annulus_nonempty = (0..space.len()).any(|y| {
                let d = space.dist(x, y);
                d >= 4.0 * r && d < 8.0 * r
            });
            inside && annulus_nonempty
        })
        .ok_or_else(|| {
            Error::infeasible(format!(
                "no base point carries the target set inside radius 2^-{m} with a nonempty outer shell"
            ))
        })
}

/// Admissible input pair for [`proof_covering`]: the Lipschitz ball profile
/// at radius `2^-m` around a base point, multiplied by a cutoff that is 1 on
/// `B(x0, 2^(-m+2))` and vanishes outside `B(x0, 2^(-m+3))`, with the
/// product gradient of the two factors pushed through the scale transform.
pub fn covering_profile(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    m: i32,
) -> Result<(Vec<f64>, GradientSequence)> {
    params.validate()?;
    if set.is_empty() {
        return Err(Error::config("target set must be nonempty"));
    }
    if set.iter().any(|&x| x >= space.len()) {
        return Err(Error::config("target set index out of range"));
    }
    let r_base = (-m as f64).exp2();
    let x0 = base_point(space, set, r_base, m)?;
    let v = ball_test_profile(space, x0, r_base);
    let g_v = lipschitz_gradient(space, &v, (m as f64).exp2(), params.s)?;
    let psi: Vec<f64> = (0..space.len())
        .map(|y| ((8.0 * r_base - space.dist(x0, y)) / (4.0 * r_base)).clamp(0.0, 1.0))
        .collect();
    let lip_psi = ((m - 2) as f64).exp2();
    let (_, h) = product_gradient(space, &v, &g_v, &psi, lip_psi, params.s)?;
    let u: Vec<f64> = (0..space.len()).map(|y| v[y] * psi[y]).collect();
    let g = poincare_transform(space, &h, params.s_prime, params.p)?;
    Ok((u, g))
}

/// Covering construction for the capacity lower bound, run on a supplied
/// admissible pair: `u` at least 1 on the target set and `g` a transformed
/// gradient sequence for it ([`covering_profile`] builds the canonical
/// pair).
///
/// A base point `x0` with the target set inside `B(x0, 2^-m)` and a
/// nonempty shell between radii `2^(-m+2)` and `2^(-m+3)` certifies the
/// scale geometry.  For each target point the smallest scale `k` in
/// `[m-4, k_top]` with
///
/// ```text
/// M * integral over B(x, 2^(1-k)) of ||column||_q^p  >=  log gauge of B(x, 2^(1-k))
/// ```
///
/// is selected, `k_top` being the deepest scale the space resolves (no
/// admissible scale for some point means the finite window truncates the
/// construction too early, an infeasibility).  The selected balls are
/// thinned to a disjoint family, whose total log gauge is then certified
/// against `M` times the gradient energy.  The constant in the selection
/// inequality defaults to the empirical ratio from [`poincare_check`] on
/// the same inputs.
pub fn proof_covering(
    space: &MetricMeasureSpace,
    set: &[usize],
    u: &[f64],
    g: &GradientSequence,
    params: &Params,
    m: i32,
    c_poincare: Option<f64>,
) -> Result<ProofCoveringReport> {
    params.validate()?;
    if set.is_empty() {
        return Err(Error::config("target set must be nonempty"));
    }
    if set.iter().any(|&x| x >= space.len()) {
        return Err(Error::config("target set index out of range"));
    }
    if u.len() != space.len() {
        return Err(Error::config(format!(
            "profile has {} values but the space has {} points",
            u.len(),
            space.len()
        )));
    }
    if m < 6 {
        // The selection weights (k-1)^(-1-eps/p) must start at k >= 2.
        return Err(Error::config(format!(
            "base scale m must be at least 6, got {m}"
        )));
    }
    if let Some(&bad) = set.iter().find(|&&e| u[e] < 1.0) {
        return Err(Error::config(format!(
            "profile must be at least 1 on the target set, got {} at point {bad}",
            u[bad]
        )));
    }
    let r_base = (-m as f64).exp2();
    let x0 = base_point(space, set, r_base, m)?;
    let gradient_valid = is_valid_gradient(space, u, g, params.s)?.valid;
    let c_poincare = match c_poincare {
        Some(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config(
                    "the poincare constant must be positive and finite",
                ));
            }
            c
        }
        None => poincare_check(space, u, g, params.gamma, params.s, params.p)?.max_ratio,
    };

    let (p, q, eps) = (params.p, params.q, params.eps);
    let k_start = m - 4;
    // Radius 2^(1-k_top) is at or below the smallest positive distance, so
    // every deeper ball is the same singleton.
    let k_top = match space.window() {
        Some(w) => 2 - w.k_min,
        None => return Err(Error::config("the space needs at least two points")),
    };
    if k_top < k_start {
        return Err(Error::infeasible(format!(
            "scale window [{k_start},{k_top}] is empty: the window is truncated before any admissible scale"
        )));
    }
    let tail: f64 = (k_start..=k_top)
        .map(|k| f64::from(k - 1).powf(-1.0 - eps / p))
        .sum();
    let m_constant = c_poincare.powf(p)
        * std::f64::consts::LN_2.powf(-(p + eps))
        * tail.powf(p);
    let gauge = Gauge::Log {
        s: params.s,
        p,
        eps,
    };

    let mut selections = Vec::with_capacity(set.len());
    for &x in set {
        let mut found = None;
        for k in k_start..=k_top {
            let radius = ((1 - k) as f64).exp2();
            let ball = space.ball(x, radius);
            let energy: f64 = ball
                .iter()
                .map(|&y| space.weight(y) * g.column_norm(y, q).powf(p))
                .sum();
            let lhs = m_constant * energy;
            let rhs = gauge.eval(space, x, radius)?;
            if lhs >= rhs {
                found = Some(SelectionRow {
                    x,
                    k,
                    radius,
                    lhs,
                    rhs,
                });
                break;
            }
        }
        match found {
            Some(row) => selections.push(row),
            None => {
                return Err(Error::infeasible(format!(
                    "no scale in [{k_start},{k_top}] absorbs the gauge at point {x}: the window is truncated too early"
                )))
            }
        }
    }

    let balls: Vec<BallSpec> = selections
        .iter()
        .map(|r| BallSpec {
            center: r.x,
            radius: r.radius,
        })
        .collect();
    let family = five_b_cover(space, &balls)?.chosen;
    let mut gauge_sum = 0.0;
    for b in &family {
        gauge_sum += gauge.eval(space, b.center, b.radius)?;
    }
    let energy_total = mixed_norm(space, g, p, q)?.powf(p);
    let bound = m_constant * energy_total;
    let bound_holds = gauge_sum <= bound * (1.0 + 1e-9) + 1e-12;
    if !bound_holds {
        // The disjoint-family bound is forced by the per-point selection, so
        // a failure indicates a defect rather than an unlucky instance.
        return Err(Error::internal(
            "disjoint family gauge sum exceeded the certified energy bound",
        ));
    }
    Ok(ProofCoveringReport {
        x0,
        m,
        k_top,
        c_poincare,
        m_constant,
        gradient_valid,
        selections,
        family,
        gauge_sum,
        bound,
        bound_holds,
    })
}

/// Fractional Sobolev norm on a Euclidean embedded space:
///
/// ```text
/// ( sum_x |u|^p w_x + sum_(x != y) |u(x)-u(y)|^p |x-y|^(-(dim+sp)) w_x w_y )^(1/p)
/// ```
///
/// with `dim` the coordinate dimension.  Requires coordinate data; metric-
/// matrix spaces are rejected.
pub fn wsp_norm(space: &MetricMeasureSpace, u: &[f64], s: f64, p: f64) -> Result<f64> {
    if space.kind() != MetricKind::Euclidean {
        return Err(Error::config(
            "the fractional Sobolev norm needs coordinates, not a bare metric matrix",
        ));
    }
    if u.len() != space.len() {
        return Err(Error::config(format!(
            "field has {} values but the space has {} points",
            u.len(),
            space.len()
        )));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::config("s must lie in (0,1)"));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::config("p must lie in (0,inf)"));
    }
    let dim = space.coords().expect("euclidean spaces carry coordinates")[0].len() as f64;
    let n = space.len();
    let mut total = 0.0f64;
    for x in 0..n {
        total += space.weight(x) * u[x].abs().powf(p);
    }
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let d = space.dist(x, y);
            total += (u[x] - u[y]).abs().powf(p) * d.powf(-(dim + s * p))
                * space.weight(x)
                * space.weight(y);
        }
    }
    Ok(total.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy)]
pub struct CauchyRow {
    pub x: usize,
    /// Finer scale exponent; radius `2^-l`.
    pub l: i32,
    /// Coarser scale exponent; radius `2^-m`.
    pub m: i32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct LebesgueReport {
    /// `||g||_p / wsp_norm(u)` where `g` is the fractional sharp maximal
    /// function of `u`.
    pub embedding_constant: f64,
    pub g_norm: f64,
    pub wsp: f64,
    pub bad_points: Vec<usize>,
    /// Witness ball per bad point: the smallest admissible radius at which
    /// the local energy beats the halved-slack threshold gauge.
    pub bad_witness: Vec<BallSpec>,
    /// Total log gauge of the 5-fold dilations of a disjoint subfamily of
    /// the witnesses.
    pub bad_content: f64,
    pub cauchy_rows: Vec<CauchyRow>,
    /// Largest median Cauchy difference relative to the tail sum.
    pub cauchy_constant: f64,
}

impl LebesgueReport {
    pub fn to_value(&self) -> Value {
        json!({
            "bad_content": self.bad_content,
            "bad_points": self.bad_points,
            "bad_witness": self.bad_witness.iter().map(BallSpec::to_value).collect::<Vec<_>>(),
            "cauchy_constant": self.cauchy_constant,
            "cauchy_rows": self.cauchy_rows.iter().map(|r| json!({
                "l": r.l,
                "lhs": r.lhs,
                "m": r.m,
                "ratio": r.ratio,
                "rhs": r.rhs,
                "x": r.x,
            })).collect::<Vec<_>>(),
            "embedding_constant": self.embedding_constant,
            "g_norm": self.g_norm,
            "wsp": self.wsp,
        })
    }

    pub fn cauchy_csv(&self) -> String {
        let mut out = String::from("x,l,m,lhs,rhs,ratio\n");
        for r in &self.cauchy_rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.x,
                r.l,
                r.m,
                jsonio::fmt_f64_12(r.lhs),
                jsonio::fmt_f64_12(r.rhs),
                jsonio::fmt_f64_12(r.ratio),
            ));
        }
        out
    }
}

/// Smooth bump for the Lebesgue-point experiment on embedded 1d grids: the
/// tent `u(t) = max(0, 1 - 4|t - 1/2|)`.
pub fn tent_profile(space: &MetricMeasureSpace) -> Result<Vec<f64>> {
    let coords = space
        .coords()
        .ok_or_else(|| Error::config("tent profile needs coordinates"))?;
    Ok(coords
        .iter()
        .map(|c| (1.0 - 4.0 * (c[0] - 0.5).abs()).max(0.0))
        .collect())
}

/// Unbounded profile `u(x) = |x - c|^(-1/2)` around the cube center `c`,
/// the stress case for the Lebesgue-point experiment.  Grids placing a
/// point exactly at the center are rejected.
pub fn singular_profile(space: &MetricMeasureSpace) -> Result<Vec<f64>> {
    let coords = space
        .coords()
        .ok_or_else(|| Error::config("singular profile needs coordinates"))?;
    let mut out = Vec::with_capacity(coords.len());
    for c in coords {
        let dist2: f64 = c.iter().map(|t| (t - 0.5) * (t - 0.5)).sum();
        if dist2 == 0.0 {
            return Err(Error::config(
                "singular profile needs a grid that avoids the cube center",
            ));
        }
        out.push(dist2.powf(-0.25));
    }
    Ok(out)
}

/// Median-based Lebesgue-point experiment.
///
/// The fractional sharp maximal function
///
/// ```text
/// g(x) = sup_j 2^(js) ( avg over B(x, 2^-j) of |u - med(u, B)|^p )^(1/p)
/// ```
///
/// is evaluated over all dyadic radii resolved by the space.  `K` compares
/// `||g||_p` to the fractional Sobolev norm of `u`.  A point is bad when
/// some radius `r < 1/5` has local energy `integral of g^p over B(x,r)` at
/// least `c_thresh` times the halved-slack radial log gauge at `r`; the bad
/// set is summarized by the full log gauge of the 5-fold dilations of a
/// disjoint witness subfamily.  Good points get a table of median Cauchy
/// differences between scales `l > m >= j0` against the telescoping tail
/// sum they should be controlled by.
pub fn lebesgue_experiment(
    space: &MetricMeasureSpace,
    u: &[f64],
    params: &Params,
    c_thresh: f64,
    j0: i32,
) -> Result<LebesgueReport> {
    params.validate()?;
    if !(c_thresh > 0.0 && c_thresh.is_finite()) {
        return Err(Error::config("threshold constant must be positive"));
    }
    let (s, p, gamma, eps) = (params.s, params.p, params.gamma, params.eps);
    let n = space.len();
    let dim = match space.coords() {
        Some(c) => c[0].len() as f64,
        None => {
            return Err(Error::config(
                "the Lebesgue experiment needs an embedded grid",
            ))
        }
    };
    let window = space
        .window()
        .ok_or_else(|| Error::config("the experiment needs at least two points"))?;
    // Radii 2^-j from 2 down to below the resolution (singleton balls).
    let j_min = -1;
    let j_max = 1 - window.k_min;
    let scales: Vec<i32> = (j_min..=j_max).collect();

    // Per point and scale: the ball, its gamma-median, and the averaged
    // deviation; from these, g and all later tables.
    let mut medians = vec![vec![0.0f64; scales.len()]; n];
    let mut g = vec![0.0f64; n];
    let mut field = vec![0.0f64; n];
    for x in 0..n {
        for (ji, &j) in scales.iter().enumerate() {
            let ball = space.ball(x, (-j as f64).exp2());
            let med = gamma_median(space, u, &ball, gamma)?;
            medians[x][ji] = med;
            for &y in &ball {
                field[y] = (u[y] - med).abs();
            }
            let mu = space.measure(&ball);
            let avg = ball
                .iter()
                .map(|&y| space.weight(y) * field[y].powf(p))
                .sum::<f64>()
                / mu;
            let val = (j as f64 * s).exp2() * avg.powf(1.0 / p);
            g[x] = g[x].max(val);
        }
    }
    let g_norm = lp_norm(space, &g, p)?;
    let wsp = wsp_norm(space, u, s, p)?;
    let embedding_constant = if wsp > 0.0 { g_norm / wsp } else { 0.0 };

    // Bad points: smallest admissible witness radius per point.  The
    // threshold uses the gauge with half the extra log slack, so that the
    // content of the bad set, taken in the full-slack gauge, shrinks as the
    // witness radii do.
    let threshold_gauge = Gauge::EuclidLogHalf {
        dim,
        s,
        p,
        eps,
    };
    let content_gauge = Gauge::EuclidLog {
        dim,
        s,
        p,
        eps,
    };
    let radii: Vec<f64> = space
        .candidate_radii()
        .iter()
        .copied()
        .filter(|&r| r < 0.2)
        .collect();
    let mut bad_points = Vec::new();
    let mut bad_witness = Vec::new();
    for x in 0..n {
        for &r in &radii {
            let energy: f64 = space
                .ball(x, r)
                .iter()
                .map(|&y| space.weight(y) * g[y].powf(p))
                .sum();
            if energy >= c_thresh * threshold_gauge.eval(space, x, r)? {
                bad_points.push(x);
                bad_witness.push(BallSpec { center: x, radius: r });
                break;
            }
        }
    }
    let bad_content = if bad_witness.is_empty() {
        0.0
    } else {
        let family = five_b_cover(space, &bad_witness)?.chosen;
        let mut total = 0.0;
        for b in &family {
            // 5r < 1 because witnesses are restricted to r < 1/5.
            total += content_gauge.eval(space, b.center, 5.0 * b.radius)?;
        }
        total
    };

    // Median Cauchy table on good points.
    let mut cauchy_rows = Vec::new();
    let mut cauchy_constant = 0.0f64;
    let energies: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            scales
                .iter()
                .map(|&j| {
                    space
                        .ball(x, (-j as f64).exp2())
                        .iter()
                        .map(|&y| space.weight(y) * g[y].powf(p))
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    for x in 0..n {
        if bad_points.contains(&x) {
            continue;
        }
        for mi in 0..scales.len() {
            let m = scales[mi];
            if m < j0 {
                continue;
            }
            for li in (mi + 1)..scales.len() {
                let l = scales[li];
                let lhs = (medians[x][li] - medians[x][mi]).abs();
                let rhs: f64 = (mi..li)
                    .map(|ji| {
                        let j = scales[ji] as f64;
                        (-j * (s - dim / p)).exp2() * energies[x][ji].powf(1.0 / p)
                    })
                    .sum();
                if rhs <= 0.0 {
                    continue;
                }
                let ratio = lhs / rhs;
                cauchy_constant = cauchy_constant.max(ratio);
                cauchy_rows.push(CauchyRow {
                    x,
                    l,
                    m,
                    lhs,
                    rhs,
                    ratio,
                });
            }
        }
    }
    Ok(LebesgueReport {
        embedding_constant,
        g_norm,
        wsp,
        bad_points,
        bad_witness,
        bad_content,
        cauchy_rows,
        cauchy_constant,
    })
}
