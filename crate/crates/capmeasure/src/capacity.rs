//! Upper bounds for the condenser capacity
//!
//! ```text
//! cap(E) = inf { (||u||_p + ||g||_(L^p l^q))^p : u >= 1 on E, g a valid s-gradient of u }.
//! ```
//!
//! The infimum is approached from above by projected subgradient descent.
//! Every returned witness pair is feasible, so the reported value is always
//! a true upper bound; for convex exponent ranges (`p, q >= 1`) the descent
//! also converges to the infimum.
//!
//! Two search strategies are provided.  `Convex` optimizes the pair `(u, g)`
//! jointly and repairs the pairwise gradient constraints after every step.
//! `Multistart` optimizes `u` alone from several deterministic and seeded
//! random starts, tying `g` to the canonical gradient of `u`; this is the
//! only sound option when `p < 1` or `q < 1` makes the objective nonconvex.
//!
//! Truncation keeps minimizers in `[0,1]`: replacing `u` by its clamp to
//! `[0,1]` preserves the constraint on `E`, shrinks every pairwise
//! difference, and shrinks the `L^p` term, so the search space is restricted
//! to that box throughout.

use crate::error::{Error, Result};
use crate::gradient::{
    canonical_gradient, is_valid_gradient, lipschitz_gradient, lp_norm, mixed_norm, tl_norm,
    GradientSequence,
};
use crate::space::{dyadic_scale, MetricMeasureSpace, Params, ScaleWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Convex,
    Multistart,
    /// No optimization at all: evaluate the explicit Lipschitz profile of
    /// the smallest ball enclosing the target set.
    LipschitzTest,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Convex => "convex",
            Strategy::Multistart => "multistart",
            Strategy::LipschitzTest => "lipschitz_test",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "convex" => Ok(Strategy::Convex),
            "multistart" => Ok(Strategy::Multistart),
            "lipschitz_test" => Ok(Strategy::LipschitzTest),
            other => Err(Error::config(format!(
                "unknown strategy \"{other}\" (expected convex, multistart or lipschitz_test)"
            ))),
        }
    }

    /// Convex descent when the objective is convex, multistart otherwise.
    pub fn for_params(params: &Params) -> Self {
        if params.p >= 1.0 && params.q >= 1.0 {
            Strategy::Convex
        } else {
            Strategy::Multistart
        }
    }
}

/// Solver schedule.  The descent runs in three phases with geometrically
/// shrinking step scales; each phase takes `max_iters / 3` normalized
/// subgradient steps of length `scale / sqrt(t)` and stops early once the
/// best feasible value has improved by less than `tol` over `patience`
/// consecutive steps.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub patience: usize,
    pub tol: f64,
    /// Initial step scale as a fraction of the starting objective value.
    pub step_scale: f64,
    /// Number of random starts for the multistart strategy, on top of the
    /// deterministic ball-test-profile start.
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 6000,
            patience: 300,
            tol: 1e-9,
            step_scale: 0.1,
            starts: 16,
            seed: 0,
        }
    }
}

const ANNEAL: [f64; 3] = [1.0, 0.1, 0.01];
/// Slack allowed when revalidating the constraint `u >= 1` on the target set.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    pub witness_u: Vec<f64>,
    pub witness_g: GradientSequence,
    pub iterations: usize,
    pub final_step: f64,
    pub strategy: Strategy,
}

impl CapacityResult {
    pub fn to_value(&self) -> Value {
        json!({
            "final_step": self.final_step,
            "iterations": self.iterations,
            "strategy": self.strategy.name(),
            "value": self.value,
            "witness_g": self.witness_g.to_value(),
            "witness_u": self.witness_u,
        })
    }
}

struct PairData {
    x: usize,
    y: usize,
    k: i32,
    /// `d(x,y)^s`.
    ds: f64,
}

fn pair_table(space: &MetricMeasureSpace, s: f64) -> Vec<PairData> {
    let n = space.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for x in 0..n {
        for y in (x + 1)..n {
            let d = space.dist(x, y);
            pairs.push(PairData {
                x,
                y,
                k: dyadic_scale(d),
                ds: d.powf(s),
            });
        }
    }
    pairs
}

fn check_set(space: &MetricMeasureSpace, set: &[usize]) -> Result<Vec<usize>> {
    let mut out = set.to_vec();
    out.sort_unstable();
    out.dedup();
    if out.len() != set.len() {
        return Err(Error::config("set contains repeated indices"));
    }
    if let Some(&bad) = out.iter().find(|&&i| i >= space.len()) {
        return Err(Error::config(format!(
            "set index {bad} out of range for a space of {} points",
            space.len()
        )));
    }
    Ok(out)
}

/// Upper bound for the capacity of `set`, with the witness profile and
/// gradient that attain it.  The bound is exact for the empty set and the
/// whole space; otherwise it is the best feasible value the chosen descent
/// strategy reaches under `options`.
pub fn capacity_upper(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    strategy: Strategy,
    options: &SolverOptions,
) -> Result<CapacityResult> {
    params.validate()?;
    let set = check_set(space, set)?;
    let n = space.len();
    if set.is_empty() {
        return Ok(CapacityResult {
            value: 0.0,
            witness_u: vec![0.0; n],
            witness_g: GradientSequence::empty(),
            iterations: 0,
            final_step: 0.0,
            strategy,
        });
    }
    if set.len() == n {
        // u identically 1 needs no gradient and no smaller profile is
        // admissible, so the value is exactly the total measure.
        return finish(
            space,
            &set,
            params,
            strategy,
            vec![1.0; n],
            zero_gradient(space, n),
            0,
            0.0,
        );
    }
    if strategy == Strategy::LipschitzTest {
        return solve_lipschitz_test(space, &set, params);
    }
    let pairs = pair_table(space, params.s);
    match strategy {
        Strategy::Convex => solve_convex(space, &set, params, &pairs, options),
        Strategy::Multistart => solve_multistart(space, &set, params, &pairs, options),
        Strategy::LipschitzTest => unreachable!("handled above"),
    }
}

/// Evaluate the explicit ball test profile without any descent: the profile
/// climbs from 0 outside `B(x*, 2r)` to 1 on `B(x*, r)` at slope `1/r`,
/// where `B(x*, r)` is a smallest enclosing ball of the set, and the
/// matching gradient is the Lipschitz one.
fn solve_lipschitz_test(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
) -> Result<CapacityResult> {
    let (center, r) = enclosing_ball(space, set);
    match r {
        Some(r) => {
            let u = ball_test_profile(space, center, r);
            let g = lipschitz_gradient(space, &u, 1.0 / r, params.s)?;
            finish(space, set, params, Strategy::LipschitzTest, u, g, 0, 0.0)
        }
        // A single-point space has no positive radius to climb over.
        None => finish(
            space,
            set,
            params,
            Strategy::LipschitzTest,
            vec![1.0; space.len()],
            zero_gradient(space, space.len()),
            0,
            0.0,
        ),
    }
}

fn zero_gradient(space: &MetricMeasureSpace, n: usize) -> GradientSequence {
    match space.window() {
        Some(w) => GradientSequence::zeros(w, n),
        None => GradientSequence::empty(),
    }
}

fn objective(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &GradientSequence,
    params: &Params,
) -> f64 {
    tl_norm(space, u, g, params.p, params.q)
        .expect("iterates stay finite")
        .powf(params.p)
}

/// Shortest-path recovery of the pointwise-minimal admissible profile for
/// a fixed gradient: `u(x) = max(0, 1 - dist(x, set))` where the pair
/// `(x, y)` in shell `k` is an edge of length `d^s (g_k(x) + g_k(y))`.
/// Every admissible profile dominates this one pointwise (chain the shell
/// inequality along a shortest path), so it is optimal for any objective
/// that is monotone in |u|.
struct ShortestProfile {
    u: Vec<f64>,
    dist: Vec<f64>,
    /// Index into the pair table of the tree edge toward the set.
    parent: Vec<Option<usize>>,
    /// Vertices in visit order (nondecreasing distance).
    order: Vec<usize>,
}

/// Pair indices incident to each vertex.
fn adjacency(n: usize, pairs: &[PairData]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (i, pair) in pairs.iter().enumerate() {
        adj[pair.x].push(i);
        adj[pair.y].push(i);
    }
    adj
}

fn shortest_profile(
    n: usize,
    set: &[usize],
    pairs: &[PairData],
    adj: &[Vec<usize>],
    g: &GradientSequence,
) -> ShortestProfile {
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![None; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &e in set {
        dist[e] = 0.0;
    }
    // Dense Dijkstra; the pair graph is complete so a heap would not help.
    for _ in 0..n {
        let mut cur = usize::MAX;
        let mut best = f64::INFINITY;
        for x in 0..n {
            if !done[x] && dist[x] < best {
                best = dist[x];
                cur = x;
            }
        }
        if cur == usize::MAX {
            break;
        }
        done[cur] = true;
        order.push(cur);
        for &i in &adj[cur] {
            let pair = &pairs[i];
            let other = if pair.x == cur { pair.y } else { pair.x };
            if done[other] {
                continue;
            }
            let w = pair.ds * (g.value(pair.k, pair.x) + g.value(pair.k, pair.y));
            let cand = dist[cur] + w;
            if cand < dist[other] {
                dist[other] = cand;
                parent[other] = Some(i);
            }
        }
    }
    let u = dist.iter().map(|&d| (1.0 - d).max(0.0)).collect();
    ShortestProfile {
        u,
        dist,
        parent,
        order,
    }
}

/// Rescale the stacked direction to unit Euclidean length.  Fractional
/// exponents produce unbounded components near zero, so non-finite entries
/// are first replaced by unit magnitudes and the norm is taken on values
/// scaled by the largest magnitude.  Returns false for a zero direction.
fn normalize_direction(parts: &mut [&mut [f64]]) -> bool {
    let mut max_abs = 0.0f64;
    for part in parts.iter_mut() {
        for v in part.iter_mut() {
            if v.is_nan() {
                *v = 0.0;
            } else if v.is_infinite() {
                *v = v.signum();
            }
            max_abs = max_abs.max(v.abs());
        }
    }
    if max_abs == 0.0 {
        return false;
    }
    let mut norm_sq = 0.0f64;
    for part in parts.iter_mut() {
        for v in part.iter_mut() {
            *v /= max_abs;
            norm_sq += *v * *v;
        }
    }
    let norm = norm_sq.sqrt();
    for part in parts.iter_mut() {
        for v in part.iter_mut() {
            *v /= norm;
        }
    }
    true
}

struct Descent {
    iterations: usize,
    final_step: f64,
}

/// Objective as a function of the gradient alone, with the profile
/// recovered by `shortest_profile`.
fn gradient_objective(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    pairs: &[PairData],
    adj: &[Vec<usize>],
    g: &GradientSequence,
) -> (f64, ShortestProfile) {
    let sp = shortest_profile(space.len(), set, pairs, adj, g);
    let val = objective(space, &sp.u, g, params);
    (val, sp)
}

/// One annealed projected subgradient run over the gradient variables,
/// updating the best iterate in place.  The projection is the exact
/// Euclidean one (clamp to the nonnegative orthant), and the profile part
/// of the subgradient flows through the shortest-path tree.
#[allow(clippy::too_many_arguments)]
fn descend_g(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    pairs: &[PairData],
    adj: &[Vec<usize>],
    options: &SolverOptions,
    best_g: &mut GradientSequence,
    best_u: &mut Vec<f64>,
    best_val: &mut f64,
) -> Descent {
    let n = space.len();
    let (p, q) = (params.p, params.q);
    let mut iterations = 0;
    let mut final_step = 0.0;
    let phase_iters = options.max_iters.div_ceil(ANNEAL.len());
    for factor in ANNEAL {
        let mut g = best_g.clone();
        let scale = options.step_scale * factor * best_val.max(1e-12);
        let mut since_improved = 0usize;
        for t in 0..phase_iters {
            let sp = shortest_profile(n, set, pairs, adj, &g);
            let lp = lp_norm(space, &sp.u, p).unwrap();
            let mix = mixed_norm(space, &g, p, q).unwrap();
            let coeff = p * (lp + mix).powf(p - 1.0);
            let window = ScaleWindow {
                k_min: g.k_min(),
                k_max: g.k_max(),
            };
            let mut dg = GradientSequence::zeros(window, n);
            if mix > 0.0 {
                let c = coeff * mix.powf(1.0 - p);
                for x in 0..n {
                    let col = g.column_norm(x, q);
                    if col == 0.0 {
                        continue;
                    }
                    if q.is_infinite() {
                        // Charge the column subgradient to the first row
                        // attaining the maximum.
                        let k_star = (window.k_min..=window.k_max)
                            .find(|&k| g.value(k, x) == col)
                            .unwrap();
                        dg.row_mut(k_star).unwrap()[x] =
                            c * space.weight(x) * col.powf(p - 1.0);
                    } else {
                        let base = c * space.weight(x) * col.powf(p - q);
                        for k in window.k_min..=window.k_max {
                            let v = g.value(k, x);
                            if v > 0.0 {
                                dg.row_mut(k).unwrap()[x] = base * v.powf(q - 1.0);
                            }
                        }
                    }
                }
            }
            if lp > 0.0 {
                // Raising a tree edge weight lowers every profile value
                // whose shortest path crosses it, so push the summed
                // sensitivities from the leaves toward the set.
                let c = coeff * lp.powf(1.0 - p);
                let mut coef = vec![0.0f64; n];
                for &x in &sp.order {
                    if sp.u[x] > 0.0 && sp.dist[x] > 0.0 {
                        coef[x] = c * space.weight(x) * sp.u[x].powf(p - 1.0);
                    }
                }
                for &x in sp.order.iter().rev() {
                    if coef[x] == 0.0 {
                        continue;
                    }
                    if let Some(i) = sp.parent[x] {
                        let pair = &pairs[i];
                        let other = if pair.x == x { pair.y } else { pair.x };
                        let row = dg.row_mut(pair.k).unwrap();
                        row[pair.x] -= coef[x] * pair.ds;
                        row[pair.y] -= coef[x] * pair.ds;
                        coef[other] += coef[x];
                    }
                }
            }
            let mut parts: Vec<&mut [f64]> = dg.rows_mut().map(|(_, row)| row).collect();
            if !normalize_direction(&mut parts) {
                break;
            }
            let step = scale / ((t + 1) as f64).sqrt();
            final_step = step;
            for (k, row) in g.rows_mut() {
                let drow = dg.row(k).unwrap();
                for x in 0..n {
                    row[x] = (row[x] - step * drow[x]).max(0.0);
                }
            }
            iterations += 1;
            let (val, spv) = gradient_objective(space, set, params, pairs, adj, &g);
            if val < *best_val - options.tol {
                *best_val = val;
                *best_g = g.clone();
                *best_u = spv.u;
                since_improved = 0;
            } else {
                since_improved += 1;
                if since_improved >= options.patience {
                    break;
                }
            }
        }
    }
    Descent {
        iterations,
        final_step,
    }
}

/// Exact line search over uniform gradient rescalings.  Shortest-path
/// distances are linear under `g -> a g`, so `F(a)` needs one tree:
/// `F(a) = (||max(0, 1 - a dist)||_p + a mix)^p`, convex in `a >= 0`.
fn scale_polish(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    pairs: &[PairData],
    adj: &[Vec<usize>],
    best_g: &mut GradientSequence,
    best_u: &mut Vec<f64>,
    best_val: &mut f64,
) {
    let n = space.len();
    let sp = shortest_profile(n, set, pairs, adj, best_g);
    let mix = mixed_norm(space, best_g, params.p, params.q).unwrap();
    let value_at = |a: f64| -> f64 {
        let u: Vec<f64> = sp.dist.iter().map(|&d| (1.0 - a * d).max(0.0)).collect();
        let lp = lp_norm(space, &u, params.p).unwrap();
        (lp + a * mix).powf(params.p)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while value_at(hi * 2.0) < value_at(hi) && hi < 1e6 {
        hi *= 2.0;
    }
    hi *= 2.0;
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if value_at(m1) <= value_at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let a = 0.5 * (lo + hi);
    if a.is_finite() && a > 0.0 {
        let scaled = best_g.scaled(a);
        let (val, spv) = gradient_objective(space, set, params, pairs, adj, &scaled);
        if val < *best_val {
            *best_val = val;
            *best_g = scaled;
            *best_u = spv.u;
        }
    }
}

/// Convex strategy: the profile is eliminated through `shortest_profile`,
/// leaving a convex objective of the gradient alone over the nonnegative
/// orthant (distances are concave in the edge weights, so each profile
/// value is convex in `g`, and the norms are monotone).  Projected
/// subgradient descent from three deterministic starts, then an exact
/// rescaling line search.
fn solve_convex(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    pairs: &[PairData],
    options: &SolverOptions,
) -> Result<CapacityResult> {
    let n = space.len();
    let adj = adjacency(n, pairs);
    let indicator: Vec<f64> = (0..n)
        .map(|x| f64::from(u8::from(set.binary_search(&x).is_ok())))
        .collect();
    let mut starts: Vec<GradientSequence> = vec![
        zero_gradient(space, n),
        canonical_gradient(space, &indicator, params.s)?,
        canonical_gradient(space, &enclosing_profile(space, set), params.s)?,
    ];
    for g in &mut starts {
        if g.window().is_none() {
            *g = zero_gradient(space, n);
        }
    }
    let mut best: Option<(f64, Vec<f64>, GradientSequence)> = None;
    let mut iterations = 0;
    let mut final_step = 0.0;
    for start in starts {
        let (mut val, sp) = gradient_objective(space, set, params, pairs, &adj, &start);
        let mut u = sp.u;
        let mut g = start;
        let run = descend_g(
            space, set, params, pairs, &adj, options, &mut g, &mut u, &mut val,
        );
        iterations += run.iterations;
        final_step = run.final_step;
        scale_polish(space, set, params, pairs, &adj, &mut g, &mut u, &mut val);
        if best.as_ref().map_or(true, |(b, _, _)| val < *b) {
            best = Some((val, u, g));
        }
    }
    let (_, u, g) = best.unwrap();
    finish(space, set, params, Strategy::Convex, u, g, iterations, final_step)
}

/// Multistart descent over profiles only; the gradient is always the
/// canonical one and subgradients flow through the pairs attaining each
/// per-shell maximum.
fn solve_multistart(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    pairs: &[PairData],
    options: &SolverOptions,
) -> Result<CapacityResult> {
    let n = space.len();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    // The explicit ball test profile seeds the search; the remaining starts
    // are seeded uniform noise.
    let mut starts: Vec<Vec<f64>> = vec![enclosing_profile(space, set)];
    while starts.len() < options.starts + 1 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        starts.push(u);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut final_step = 0.0;
    for mut u in starts {
        project_profile(set, &mut u);
        let mut val = profile_objective(space, &u, params);
        let mut best_u = u.clone();
        let phase_iters = options.max_iters.div_ceil(ANNEAL.len());
        for factor in ANNEAL {
            u = best_u.clone();
            let scale = options.step_scale * factor * val.max(1e-12);
            let mut since_improved = 0usize;
            for t in 0..phase_iters {
                let mut du = profile_subgradient(space, &u, params, pairs);
                if !normalize_direction(&mut [du.as_mut_slice()]) {
                    break;
                }
                let step = scale / ((t + 1) as f64).sqrt();
                final_step = step;
                for x in 0..n {
                    u[x] -= step * du[x];
                }
                project_profile(set, &mut u);
                iterations += 1;
                let v = profile_objective(space, &u, params);
                if v < val - options.tol {
                    val = v;
                    best_u = u.clone();
                    since_improved = 0;
                } else {
                    since_improved += 1;
                    if since_improved >= options.patience {
                        break;
                    }
                }
            }
        }
        if best.as_ref().map_or(true, |(b, _)| val < *b) {
            best = Some((val, best_u));
        }
    }
    let (_, u) = best.unwrap();
    let g = canonical_gradient(space, &u, params.s)?;
    finish(
        space,
        set,
        params,
        Strategy::Multistart,
        u,
        g,
        iterations,
        final_step,
    )
}

fn project_profile(set: &[usize], u: &mut [f64]) {
    for v in u.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    for &e in set {
        u[e] = 1.0;
    }
}

fn profile_objective(space: &MetricMeasureSpace, u: &[f64], params: &Params) -> f64 {
    let g = canonical_gradient(space, u, params.s).expect("iterates stay finite");
    objective(space, u, &g, params)
}

fn profile_subgradient(
    space: &MetricMeasureSpace,
    u: &[f64],
    params: &Params,
    pairs: &[PairData],
) -> Vec<f64> {
    let n = space.len();
    let (p, q, s) = (params.p, params.q, params.s);
    let g = canonical_gradient(space, u, s).unwrap();
    // Pair attaining each per-shell maximum; ties keep the first pair.
    let window = match g.window() {
        Some(w) => w,
        None => return vec![0.0; n],
    };
    let mut argmax: Vec<Vec<Option<(usize, f64)>>> =
        vec![vec![None; n]; window.len()];
    for pair in pairs {
        let quotient = 0.5 * (u[pair.x] - u[pair.y]).abs() / pair.ds;
        let r = (pair.k - window.k_min) as usize;
        for (a, b) in [(pair.x, pair.y), (pair.y, pair.x)] {
            if quotient > 0.0 && quotient >= g.value(pair.k, a) - 1e-15 {
                if argmax[r][a].is_none() {
                    argmax[r][a] = Some((b, pair.ds));
                }
            }
        }
    }
    let lp = lp_norm(space, u, p).unwrap();
    let mix = mixed_norm(space, &g, p, q).unwrap();
    let coeff = p * (lp + mix).powf(p - 1.0);
    let mut du = vec![0.0f64; n];
    if lp > 0.0 {
        let c = coeff * lp.powf(1.0 - p);
        for x in 0..n {
            // Fractional p makes the derivative blow up at zero; the
            // subgradient there is taken to be zero.
            if u[x] != 0.0 {
                du[x] += c * space.weight(x) * u[x].abs().powf(p - 1.0) * u[x].signum();
            }
        }
    }
    if mix > 0.0 {
        let c = coeff * mix.powf(1.0 - p);
        for x in 0..n {
            let col = g.column_norm(x, q);
            if col == 0.0 {
                continue;
            }
            for k in window.k_min..=window.k_max {
                let v = g.value(k, x);
                if v == 0.0 {
                    continue;
                }
                let dmix_dg = if q.is_infinite() {
                    if v == col {
                        c * space.weight(x) * col.powf(p - 1.0)
                    } else {
                        0.0
                    }
                } else {
                    c * space.weight(x) * col.powf(p - q) * v.powf(q - 1.0)
                };
                if dmix_dg == 0.0 {
                    continue;
                }
                if let Some((y, ds)) = argmax[(k - window.k_min) as usize][x] {
                    let slope = 0.5 * (u[x] - u[y]).signum() / ds;
                    du[x] += dmix_dg * slope;
                    du[y] -= dmix_dg * slope;
                }
            }
        }
    }
    du
}

/// Center roughly minimizing the maximal distance to `set`, paired with
/// that distance as the radius.  A radius of zero (singleton set) is bumped
/// to half the space resolution; `None` radius means the space has no
/// positive distances at all.
fn enclosing_ball(space: &MetricMeasureSpace, set: &[usize]) -> (usize, Option<f64>) {
    let n = space.len();
    let far = |x: usize| -> f64 {
        set.iter()
            .map(|&e| space.dist(x, e))
            .fold(0.0f64, f64::max)
    };
    let center = (0..n)
        .min_by(|&a, &b| far(a).total_cmp(&far(b)))
        .unwrap_or(0);
    let r = far(center);
    if r > 0.0 {
        return (center, Some(r));
    }
    match space.min_positive_distance() {
        Some(d) => (center, Some(d / 2.0)),
        None => (center, None),
    }
}

/// Lipschitz test profile for the smallest ball around `set`:
/// `u(y) = min(1, dist(y, complement of B(x*, 2r)) / r)` where `x*` roughly
/// minimizes the maximal distance to `set` and `r` is that distance.
fn enclosing_profile(space: &MetricMeasureSpace, set: &[usize]) -> Vec<f64> {
    match enclosing_ball(space, set) {
        (center, Some(r)) => ball_test_profile(space, center, r),
        (_, None) => vec![1.0; space.len()],
    }
}

/// `u(y) = min(1, dist(y, X minus B(center, 2r)) / r)`; equal to 1 on
/// `B(center, r)` and supported in `B(center, 2r)`.
pub fn ball_test_profile(space: &MetricMeasureSpace, center: usize, r: f64) -> Vec<f64> {
    let n = space.len();
    let outside: Vec<usize> = (0..n)
        .filter(|&z| space.dist(center, z) >= 2.0 * r)
        .collect();
    (0..n)
        .map(|y| {
            if outside.is_empty() {
                1.0
            } else {
                let d = outside
                    .iter()
                    .map(|&z| space.dist(y, z))
                    .fold(f64::INFINITY, f64::min);
                (d / r).min(1.0)
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    space: &MetricMeasureSpace,
    set: &[usize],
    params: &Params,
    strategy: Strategy,
    u: Vec<f64>,
    g: GradientSequence,
    iterations: usize,
    final_step: f64,
) -> Result<CapacityResult> {
    // Revalidate the three feasibility invariants before reporting.
    for &e in set {
        if u[e] < 1.0 - FEASIBILITY_TOL {
            return Err(Error::internal(format!(
                "witness profile drops to {} on the target set",
                u[e]
            )));
        }
    }
    let report = is_valid_gradient(space, &u, &g, params.s)?;
    if !report.valid {
        return Err(Error::internal(
            "witness gradient fails the pairwise inequality",
        ));
    }
    let value = objective(space, &u, &g, params);
    let recomputed = tl_norm(space, &u, &g, params.p, params.q)?.powf(params.p);
    if (value - recomputed).abs() > 1e-9 * value.abs().max(1.0) {
        return Err(Error::internal("objective recomputation mismatch"));
    }
    Ok(CapacityResult {
        value,
        witness_u: u,
        witness_g: g,
        iterations,
        final_step,
        strategy,
    })
}

/// Test-function upper bound for the capacity of the open ball `B(x, r)`
/// against the reference density `mu(B(x, r)) / r^(sp)`.
#[derive(Debug, Clone)]
pub struct BallBound {
    pub center: usize,
    pub radius: f64,
    /// `(||u||_p + ||g||_(L^p l^q))^p` for the Lipschitz test pair.
    pub upper: f64,
    pub reference: f64,
    pub ratio: f64,
}

impl BallBound {
    pub fn to_value(&self) -> Value {
        json!({
            "center": self.center,
            "radius": self.radius,
            "ratio": self.ratio,
            "reference": self.reference,
            "upper": self.upper,
        })
    }
}

/// Evaluate the Lipschitz test pair on `B(x, r)`: the profile climbs from
/// the boundary of `B(x, 2r)` with slope `1/r` and the matching gradient
/// profile certifies it, giving `cap(B(x, r)) <= upper`.
pub fn ball_capacity_bound(
    space: &MetricMeasureSpace,
    center: usize,
    radius: f64,
    params: &Params,
) -> Result<BallBound> {
    params.validate()?;
    if center >= space.len() {
        return Err(Error::config(format!(
            "center {center} out of range for a space of {} points",
            space.len()
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("radius must be positive and finite"));
    }
    let u = ball_test_profile(space, center, radius);
    let g = lipschitz_gradient(space, &u, 1.0 / radius, params.s)?;
    let report = is_valid_gradient(space, &u, &g, params.s)?;
    if !report.valid {
        return Err(Error::internal("ball test gradient fails validity"));
    }
    let upper = tl_norm(space, &u, &g, params.p, params.q)?.powf(params.p);
    let reference = space.ball_measure(center, radius) / radius.powf(params.s * params.p);
    Ok(BallBound {
        center,
        radius,
        upper,
        reference,
        ratio: upper / reference,
    })
}

/// One family of sets compared against its union.
#[derive(Debug, Clone)]
pub struct SubadditivityTrial {
    pub union_value: f64,
    pub part_values: Vec<f64>,
    /// `cap(union)^r`.
    pub lhs: f64,
    /// `sum_i cap(E_i)^r`.
    pub rhs: f64,
    pub ratio: f64,
    /// Largest `cap(part) - cap(union)` over the parts; positive values mean
    /// the reported upper bounds are not monotone for this family.
    pub monotone_slack: f64,
}

impl SubadditivityTrial {
    pub fn to_value(&self) -> Value {
        json!({
            "lhs": self.lhs,
            "monotone_slack": self.monotone_slack,
            "part_values": self.part_values,
            "ratio": self.ratio,
            "rhs": self.rhs,
            "union_value": self.union_value,
        })
    }
}

/// Countable subadditivity data for the exponent `r = min(1, q/p)`:
/// compares `cap(union)^r` against `sum_i cap(E_i)^r` over the supplied
/// trial families and keeps the worst ratio.
#[derive(Debug, Clone)]
pub struct SubadditivityReport {
    pub exponent: f64,
    pub trials: Vec<SubadditivityTrial>,
    /// Largest `lhs / rhs` over the trials; at most the structural constant
    /// of the space.
    pub constant: f64,
    /// Whether every part capacity stayed at or below its union capacity,
    /// within `MONOTONE_REL_TOL` relative slack.
    pub monotone: bool,
    pub max_monotone_slack: f64,
}

/// Exact capacities are monotone under set inclusion, but the reported
/// values come from independent approximate solves; the monotonicity
/// verdict allows this much slack relative to the union value.
pub const MONOTONE_REL_TOL: f64 = 0.02;

impl SubadditivityReport {
    pub fn to_value(&self) -> Value {
        json!({
            "constant": self.constant,
            "exponent": self.exponent,
            "max_monotone_slack": self.max_monotone_slack,
            "monotone": self.monotone,
            "trials": self.trials.iter().map(SubadditivityTrial::to_value).collect::<Vec<_>>(),
        })
    }
}

pub fn subadditivity_check(
    space: &MetricMeasureSpace,
    trials: &[Vec<Vec<usize>>],
    params: &Params,
    strategy: Strategy,
    options: &SolverOptions,
) -> Result<SubadditivityReport> {
    if trials.is_empty() {
        return Err(Error::config("subadditivity needs at least one trial"));
    }
    let r = params.r_sub();
    let rows: Vec<SubadditivityTrial> = trials
        .par_iter()
        .map(|sets| -> Result<SubadditivityTrial> {
            if sets.len() < 2 {
                return Err(Error::config(
                    "each subadditivity trial needs at least two sets",
                ));
            }
            let mut union: Vec<usize> = sets.iter().flatten().copied().collect();
            union.sort_unstable();
            union.dedup();
            let union_value = capacity_upper(space, &union, params, strategy, options)?.value;
            let mut part_values = Vec::with_capacity(sets.len());
            for set in sets {
                part_values.push(capacity_upper(space, set, params, strategy, options)?.value);
            }
            let lhs = union_value.powf(r);
            let rhs: f64 = part_values.iter().map(|v| v.powf(r)).sum();
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let monotone_slack = part_values
                .iter()
                .map(|v| v - union_value)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(SubadditivityTrial {
                union_value,
                part_values,
                lhs,
                rhs,
                ratio,
                monotone_slack,
            })
        })
        .collect::<Result<_>>()?;
    let constant = rows.iter().map(|t| t.ratio).fold(0.0f64, f64::max);
    let max_monotone_slack = rows
        .iter()
        .map(|t| t.monotone_slack)
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = rows
        .iter()
        .all(|t| t.monotone_slack <= MONOTONE_REL_TOL * t.union_value + 1e-12);
    Ok(SubadditivityReport {
        exponent: r,
        trials: rows,
        constant,
        monotone,
        max_monotone_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::space::generate;

    fn params22() -> Params {
        Params::new(0.5, 2.0, 2.0).unwrap()
    }

    #[test]
    fn empty_and_full_sets_are_exact() {
        let space = generate::grid1d(8).unwrap();
        let p = params22();
        let opts = SolverOptions::default();
        let empty = capacity_upper(&space, &[], &p, Strategy::Convex, &opts).unwrap();
        assert_eq!(empty.value, 0.0);
        let all: Vec<usize> = (0..8).collect();
        let full = capacity_upper(&space, &all, &p, Strategy::Convex, &opts).unwrap();
        assert!((full.value - space.total_measure()).abs() < 1e-12);
        assert!(full.witness_u.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unit_distance_pair_fills_up() {
        // Two unit-weight points at distance 1, target {0}: lowering u(1)
        // from 1 costs more in gradient than it saves in measure, so the
        // optimum is u identically 1 with value mu(X) = 2.
        let space =
            MetricMeasureSpace::from_matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]], None).unwrap();
        let p = params22();
        let res = capacity_upper(&space, &[0], &p, Strategy::Convex, &SolverOptions::default())
            .unwrap();
        assert!(
            (res.value - 2.0).abs() < 2e-3,
            "expected 2, got {}",
            res.value
        );
    }

    #[test]
    fn convex_solver_matches_grid_oracle() {
        let mut opts = SolverOptions::default();
        opts.max_iters = 12000;
        let p = params22();
        // Three-point lines with different spacings and weights.
        let instances: Vec<(Vec<f64>, Option<Vec<f64>>, Vec<usize>)> = vec![
            (vec![0.0, 1.0, 2.0], None, vec![0]),
            (vec![0.0, 0.5, 1.0], None, vec![1]),
            (vec![0.0, 0.25, 2.0], Some(vec![0.5, 1.0, 2.0]), vec![0]),
            (vec![0.0, 3.0, 6.5], None, vec![2]),
            (vec![0.0, 0.125, 0.25], Some(vec![2.0, 0.25, 1.0]), vec![1]),
        ];
        for (xs, ws, set) in instances {
            let coords: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
            let space = MetricMeasureSpace::from_coords(coords, ws).unwrap();
            let want = reference::grid_capacity(&space, &set, p.s).unwrap();
            let got = capacity_upper(&space, &set, &p, Strategy::Convex, &opts)
                .unwrap()
                .value;
            assert!(
                (got - want).abs() <= 1e-3,
                "xs {xs:?}, set {set:?}: solver {got} vs oracle {want}"
            );
            // The solver never reports below a true lower bound on the
            // family it searches; allow the oracle grid a hair of slack.
            assert!(got >= want - 1e-6);
        }
    }

    #[test]
    fn multistart_stays_close_to_convex_on_convex_instances() {
        let space = generate::grid1d(9).unwrap();
        let p = params22();
        let opts = SolverOptions::default();
        let set = vec![4usize];
        let a = capacity_upper(&space, &set, &p, Strategy::Convex, &opts)
            .unwrap()
            .value;
        let b = capacity_upper(&space, &set, &p, Strategy::Multistart, &opts)
            .unwrap()
            .value;
        // Multistart ties g to the canonical gradient, so it may sit a bit
        // above the joint optimum but must stay in the same range.
        assert!(b >= a - 1e-6);
        assert!(b <= 2.0 * a + 1e-6, "convex {a}, multistart {b}");
    }

    #[test]
    fn witnesses_are_feasible_and_deterministic() {
        let space = generate::grid1d(12).unwrap();
        let p = Params::new(0.4, 1.5, 3.0).unwrap();
        let opts = SolverOptions::default();
        let set = vec![2usize, 3, 9];
        let a = capacity_upper(&space, &set, &p, Strategy::Convex, &opts).unwrap();
        let b = capacity_upper(&space, &set, &p, Strategy::Convex, &opts).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.witness_u, b.witness_u);
        for &e in &set {
            assert!(a.witness_u[e] >= 1.0 - FEASIBILITY_TOL);
        }
        let report = is_valid_gradient(&space, &a.witness_u, &a.witness_g, p.s).unwrap();
        assert!(report.valid);
    }

    #[test]
    fn nonconvex_exponents_use_multistart() {
        let space = generate::grid1d(8).unwrap();
        let p = Params::new(0.3, 0.5, 2.0).unwrap();
        assert_eq!(Strategy::for_params(&p), Strategy::Multistart);
        let res = capacity_upper(
            &space,
            &[3, 4],
            &p,
            Strategy::Multistart,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(res.value > 0.0);
        let report = is_valid_gradient(&space, &res.witness_u, &res.witness_g, p.s).unwrap();
        assert!(report.valid);
    }

    #[test]
    fn ball_bound_dominates_solver() {
        let space = generate::grid1d(16).unwrap();
        let p = params22();
        let center = 8;
        let radius = 0.2;
        let bound = ball_capacity_bound(&space, center, radius, &p).unwrap();
        let ball = space.ball(center, radius);
        let cap = capacity_upper(&space, &ball, &p, Strategy::Convex, &SolverOptions::default())
            .unwrap();
        assert!(
            cap.value <= bound.upper + 1e-6,
            "solver {} vs test bound {}",
            cap.value,
            bound.upper
        );
        assert!(bound.reference > 0.0);
        assert!(bound.ratio.is_finite());
    }

    #[test]
    fn subadditivity_on_split_targets() {
        let space = generate::grid1d(10).unwrap();
        let p = params22();
        let trials = vec![vec![vec![1usize], vec![8usize]]];
        let report =
            subadditivity_check(&space, &trials, &p, Strategy::Convex, &SolverOptions::default())
                .unwrap();
        assert_eq!(report.exponent, 1.0);
        assert!(report.constant.is_finite());
        // Solving the union cannot beat solving the parts by much more than
        // the structural constant; for two separated singletons on a grid
        // the ratio is close to 1.
        assert!(report.constant <= 1.05, "constant {}", report.constant);
        assert!(report.monotone, "slack {}", report.max_monotone_slack);
    }

    #[test]
    fn subadditivity_of_identical_parts_halves() {
        // Union of two copies equals each copy, so the ratio collapses to
        // cap^r / (2 cap^r) = 1/2 up to solver noise between the runs.
        let space = generate::grid1d(9).unwrap();
        let p = params22();
        let trials = vec![vec![vec![4usize], vec![4usize]]];
        let report =
            subadditivity_check(&space, &trials, &p, Strategy::Convex, &SolverOptions::default())
                .unwrap();
        assert!(
            (report.constant - 0.5).abs() < 1e-6,
            "constant {}",
            report.constant
        );
    }

    #[test]
    fn lipschitz_test_strategy_is_feasible_and_instant() {
        let space = generate::grid1d(20).unwrap();
        let p = params22();
        let set = vec![9usize, 10];
        let res = capacity_upper(
            &space,
            &set,
            &p,
            Strategy::LipschitzTest,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.strategy, Strategy::LipschitzTest);
        for &e in &set {
            assert!(res.witness_u[e] >= 1.0 - FEASIBILITY_TOL);
        }
        // The explicit profile is feasible but blind, so any optimizing
        // strategy must do at least as well.
        let convex =
            capacity_upper(&space, &set, &p, Strategy::Convex, &SolverOptions::default()).unwrap();
        assert!(convex.value <= res.value + 1e-9);
    }

    #[test]
    fn truncation_never_hurts() {
        // Clamping any feasible profile into [0,1] and recomputing the
        // canonical gradient can only lower the objective.
        let space = generate::grid1d(12).unwrap();
        let p = params22();
        let set = vec![5usize, 6];
        let mut u: Vec<f64> = (0..12).map(|i| 1.5 - (i as f64 - 5.5).abs() * 0.4).collect();
        for &e in &set {
            u[e] = u[e].max(1.0);
        }
        let g = canonical_gradient(&space, &u, p.s).unwrap();
        let raw = objective(&space, &u, &g, &p);
        let clamped: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let g2 = canonical_gradient(&space, &clamped, p.s).unwrap();
        let cut = objective(&space, &clamped, &g2, &p);
        assert!(cut <= raw + 1e-12, "clamped {cut} vs raw {raw}");
    }

    #[test]
    fn rejects_bad_sets() {
        let space = generate::grid1d(4).unwrap();
        let p = params22();
        let opts = SolverOptions::default();
        assert!(capacity_upper(&space, &[9], &p, Strategy::Convex, &opts).is_err());
        assert!(capacity_upper(&space, &[1, 1], &p, Strategy::Convex, &opts).is_err());
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, max_size: usize) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let k = rng.random_range(1..=max_size.min(n / 2).max(1));
        let mut pts: Vec<usize> = (0..n).collect();
        pts.shuffle(rng);
        pts.truncate(k);
        pts
    }

    #[test]
    fn truncation_never_hurts_on_solved_instances() {
        // Clamping a profile into [0,1] shrinks every increment and every
        // value, so the canonical-gradient objective can only drop.  For
        // multistart witnesses the reported value uses the canonical
        // gradient itself, so clamping beats the reported value too.
        let small = SolverOptions {
            max_iters: 1200,
            patience: 150,
            starts: 4,
            ..SolverOptions::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let n = rng.random_range(4..=20);
            let space = generate::grid1d(n).unwrap();
            let set = random_set(&mut rng, n, 3);
            let p = params22();
            let strat = if trial % 2 == 0 {
                Strategy::Convex
            } else {
                Strategy::Multistart
            };
            let res = capacity_upper(&space, &set, &p, strat, &small).unwrap();
            let raw_g = canonical_gradient(&space, &res.witness_u, p.s).unwrap();
            let raw = objective(&space, &res.witness_u, &raw_g, &p);
            let clamped: Vec<f64> = res.witness_u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let cut_g = canonical_gradient(&space, &clamped, p.s).unwrap();
            let cut = objective(&space, &clamped, &cut_g, &p);
            assert!(cut <= raw + 1e-9 * (1.0 + raw), "trial {trial}: {cut} > {raw}");
            if strat == Strategy::Multistart {
                assert!(
                    cut <= res.value + 1e-9 * (1.0 + res.value),
                    "trial {trial}: {cut} > reported {}",
                    res.value
                );
            }
        }
    }

    #[test]
    fn capacity_is_monotone_on_nested_sets() {
        // Any admissible pair for the superset is admissible for the
        // subset, so the subset value can exceed it only by solver
        // suboptimality.
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let opts = SolverOptions::default();
        for trial in 0..100 {
            let n = rng.random_range(6..=24);
            let space = generate::grid1d(n).unwrap();
            let e2 = random_set(&mut rng, n, 4);
            let k1 = rng.random_range(1..=e2.len());
            let e1: Vec<usize> = e2[..k1].to_vec();
            let p = params22();
            let v1 = capacity_upper(&space, &e1, &p, Strategy::Convex, &opts)
                .unwrap()
                .value;
            let v2 = capacity_upper(&space, &e2, &p, Strategy::Convex, &opts)
                .unwrap()
                .value;
            assert!(
                v1 <= v2 * (1.0 + MONOTONE_REL_TOL) + 1e-9,
                "trial {trial}: subset {v1} > superset {v2}"
            );
        }
    }

    #[test]
    fn strategies_agree_within_a_structural_margin() {
        // The multistart search fixes G to the canonical gradient of u,
        // which is a few percent heavier than the jointly minimized G, so
        // the two strategies agree only up to that structural margin
        // (worst observed 6.6% on seeded families).
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let opts = SolverOptions::default();
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let n = rng.random_range(4..=32);
            let space = generate::grid1d(n).unwrap();
            let set = random_set(&mut rng, n, 4);
            let p = params22();
            let a = capacity_upper(&space, &set, &p, Strategy::Convex, &opts)
                .unwrap()
                .value;
            let b = capacity_upper(&space, &set, &p, Strategy::Multistart, &opts)
                .unwrap()
                .value;
            let rel = (a - b).abs() / a.max(b).max(1e-30);
            worst = worst.max(rel);
        }
        assert!(worst <= 0.08, "worst relative gap {worst}");
    }
}
