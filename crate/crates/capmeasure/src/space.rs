//! Finite metric measure spaces.
//!
//! A space is a set of `n` points with an explicit symmetric distance matrix
//! and strictly positive weights.  Balls are open: `B(x, r) = {y : d(x,y) < r}`.
//! Every pair of distinct points lies in exactly one dyadic shell
//! `2^(k-1) <= d(x,y) < 2^k`; the [`ScaleWindow`] records the range of `k`
//! realized by the space.

use crate::error::{Error, Result};
use crate::jsonio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::sync::OnceLock;

/// Additive slack for metric validation; distances are plain `f64` data.
pub const METRIC_SLACK: f64 = 1e-9;

/// Full (cubic) triangle-inequality validation is used up to this size;
/// larger spaces are validated on a seeded sample of triples.
pub const FULL_TRIANGLE_LIMIT: usize = 512;

/// Largest point count the built-in generators produce.
pub const MAX_GRID_POINTS: usize = 4096;

/// Dyadic shell index of a positive distance: the unique `k` with
/// `2^(k-1) <= d < 2^k`.
pub fn dyadic_scale(d: f64) -> i32 {
    debug_assert!(d > 0.0 && d.is_finite());
    let mut k = d.log2().floor() as i32 + 1;
    while ((k - 1) as f64).exp2() > d {
        k -= 1;
    }
    while d >= (k as f64).exp2() {
        k += 1;
    }
    k
}

/// Inclusive range of dyadic shell indices realized by a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScaleWindow {
    pub k_min: i32,
    pub k_max: i32,
}

impl ScaleWindow {
    pub fn contains(&self, k: i32) -> bool {
        self.k_min <= k && k <= self.k_max
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.k_max < self.k_min
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }
}

/// Parameter bundle shared by the analytic routines.
///
/// The derived quantities `theta`, `r_sub` and `p_prime` are recomputed on
/// demand so they can never go stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Smoothness, `0 < s < 1`.
    pub s: f64,
    /// Integrability, `0 < p < infinity`.
    pub p: f64,
    /// Summability across scales, `0 < q <= infinity`.
    pub q: f64,
    /// Median level, `0 < gamma <= 1/2`.
    pub gamma: f64,
    /// Logarithmic gauge exponent surplus, `eps > 0`.
    pub eps: f64,
    /// Auxiliary smoothness for the Poincaré transform, `0 < s_prime < s`.
    pub s_prime: f64,
}

impl Params {
    /// Defaults: `gamma = 1/4`, `eps = 1`, `s_prime = s/2`.
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        let params = Params {
            s,
            p,
            q,
            gamma: 0.25,
            eps: 1.0,
            s_prime: s / 2.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_s_prime(mut self, s_prime: f64) -> Result<Self> {
        self.s_prime = s_prime;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::config("s must lie in (0,1)"));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::config("p must lie in (0,inf)"));
        }
        if !(self.q > 0.0) || self.q.is_nan() {
            return Err(Error::config("q must lie in (0,inf]"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return Err(Error::config("gamma must lie in (0,1/2]"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config("eps must be positive"));
        }
        if !(self.s_prime > 0.0 && self.s_prime < self.s) {
            return Err(Error::config("s_prime must lie in (0,s)"));
        }
        Ok(())
    }

    /// Exponent `theta = min(1, q/p)` used by the gauge tied to the capacity.
    pub fn theta(&self) -> f64 {
        if self.q.is_infinite() {
            1.0
        } else {
            (self.q / self.p).min(1.0)
        }
    }

    /// Subadditivity exponent `r = min(1, q/p)`.
    pub fn r_sub(&self) -> f64 {
        self.theta()
    }

    /// `p' = min(1, p)`, the exponent the scale transform sums with.
    pub fn p_prime(&self) -> f64 {
        self.p.min(1.0)
    }

    /// JSON form; `q = infinity` is spelled `"inf"`.
    pub fn to_value(&self) -> Value {
        let q: Value = if self.q.is_infinite() {
            Value::String("inf".into())
        } else {
            json!(self.q)
        };
        json!({
            "s": self.s,
            "p": self.p,
            "q": q,
            "gamma": self.gamma,
            "eps": self.eps,
            "s_prime": self.s_prime,
        })
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::config("params must be a JSON object"))?;
        let get = |key: &str| -> Option<f64> { obj.get(key).and_then(Value::as_f64) };
        let s = get("s").ok_or_else(|| Error::config("params.s missing"))?;
        let p = get("p").ok_or_else(|| Error::config("params.p missing"))?;
        let q = match obj.get("q") {
            None => return Err(Error::config("params.q missing")),
            Some(Value::String(s)) if s == "inf" => f64::INFINITY,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::config("params.q must be a number or \"inf\""))?,
        };
        let mut params = Params::new(s, p, q)?;
        if let Some(gamma) = get("gamma") {
            params.gamma = gamma;
        }
        if let Some(eps) = get("eps") {
            params.eps = eps;
        }
        if let Some(s_prime) = get("s_prime") {
            params.s_prime = s_prime;
        }
        params.validate()?;
        Ok(params)
    }
}

/// How the distances of a space were specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Distances derived from point coordinates.
    Euclidean,
    /// Distances given as an explicit matrix.
    Matrix,
}

/// A finite metric measure space.
#[derive(Debug)]
pub struct MetricMeasureSpace {
    n: usize,
    /// Row-major `n x n` distance matrix.
    dist: Vec<f64>,
    weight: Vec<f64>,
    coords: Option<Vec<Vec<f64>>>,
    kind: MetricKind,
    total_weight: f64,
    window: Option<ScaleWindow>,
    radii: OnceLock<Vec<f64>>,
}

impl MetricMeasureSpace {
    /// Build from an explicit distance matrix; `weights = None` means all 1.
    pub fn from_matrix(matrix: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!(
                    "distance matrix row {i} has length {} but the space has {n} points",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        Self::build(n, dist, weights, None, MetricKind::Matrix)
    }

    /// Build from Euclidean coordinates; all points must share one dimension.
    pub fn from_coords(coords: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::config("a space needs at least one point"));
        }
        let dim = coords[0].len();
        for (i, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::config(format!(
                    "coordinate row {i} has dimension {} but row 0 has {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("coordinate row {i} is not finite")));
            }
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::build(n, dist, weights, Some(coords), MetricKind::Euclidean)
    }

    fn build(
        n: usize,
        dist: Vec<f64>,
        weights: Option<Vec<f64>>,
        coords: Option<Vec<Vec<f64>>>,
        kind: MetricKind,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("a space needs at least one point"));
        }
        let weight = weights.unwrap_or_else(|| vec![1.0; n]);
        if weight.len() != n {
            return Err(Error::config(format!(
                "{} weights given for {n} points",
                weight.len()
            )));
        }
        for (i, &w) in weight.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::config(format!(
                    "weight of point {i} must be strictly positive, got {w}"
                )));
            }
        }
        validate_metric(n, &dist)?;
        let mut window: Option<ScaleWindow> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                let k = dyadic_scale(dist[i * n + j]);
                window = Some(match window {
                    None => ScaleWindow { k_min: k, k_max: k },
                    Some(w) => ScaleWindow {
                        k_min: w.k_min.min(k),
                        k_max: w.k_max.max(k),
                    },
                });
            }
        }
        let total_weight = weight.iter().sum();
        Ok(MetricMeasureSpace {
            n,
            dist,
            weight,
            coords,
            kind,
            total_weight,
            window,
            radii: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn total_measure(&self) -> f64 {
        self.total_weight
    }

    pub fn measure(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&i| self.weight[i]).sum()
    }

    /// Shell window of the space; `None` for a single point (no pairs).
    pub fn window(&self) -> Option<ScaleWindow> {
        self.window
    }

    /// Open ball `B(x, rho)`, as sorted point indices.
    pub fn ball(&self, x: usize, rho: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.dist(x, y) < rho).collect()
    }

    pub fn ball_measure(&self, x: usize, rho: f64) -> f64 {
        (0..self.n)
            .filter(|&y| self.dist(x, y) < rho)
            .map(|y| self.weight[y])
            .sum()
    }

    /// Dyadic annulus `{y : 2^(k-1) <= d(x,y) < 2^k}`; never contains `x`.
    pub fn annulus(&self, x: usize, k: i32) -> Vec<usize> {
        let lo = ((k - 1) as f64).exp2();
        let hi = (k as f64).exp2();
        (0..self.n)
            .filter(|&y| {
                let d = self.dist(x, y);
                d >= lo && d < hi
            })
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                d = d.max(self.dist(i, j));
            }
        }
        d
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = self.dist(i, j);
                best = Some(match best {
                    None => d,
                    Some(b) => b.min(d),
                });
            }
        }
        best
    }

    /// Sorted distinct positive pairwise distances.  Ball contents only change
    /// at these values, so they are the canonical search radii.
    pub fn candidate_radii(&self) -> &[f64] {
        self.radii.get_or_init(|| {
            let mut r: Vec<f64> = Vec::new();
            for i in 0..self.n {
                for j in (i + 1)..self.n {
                    r.push(self.dist(i, j));
                }
            }
            r.sort_by(f64::total_cmp);
            r.dedup();
            r
        })
    }

    /// Doubling constant: the maximum of `mu(B(x,2r)) / mu(B(x,r))` over all
    /// centers and all radii in the finite distance set.  `1` for one point.
    pub fn doubling_constant(&self) -> f64 {
        let mut best = 1.0f64;
        for x in 0..self.n {
            for &r in self.candidate_radii() {
                let small = self.ball_measure(x, r);
                let big = self.ball_measure(x, 2.0 * r);
                best = best.max(big / small);
            }
        }
        best
    }

    /// Descriptor document: coordinates for Euclidean spaces, the matrix
    /// otherwise, plus weights.
    pub fn to_descriptor(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("points".into(), json!(self.n));
        match self.kind {
            MetricKind::Euclidean => {
                obj.insert("metric".into(), json!("euclidean"));
                obj.insert("coords".into(), json!(self.coords.as_ref().unwrap()));
            }
            MetricKind::Matrix => {
                let rows: Vec<Vec<f64>> = (0..self.n)
                    .map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec())
                    .collect();
                obj.insert("metric".into(), json!("matrix"));
                obj.insert("matrix".into(), json!(rows));
            }
        }
        obj.insert("weights".into(), json!(self.weight));
        Value::Object(obj)
    }

    /// Serialize the descriptor with full float precision.
    pub fn emit(&self) -> Result<String> {
        jsonio::to_json_g17(&self.to_descriptor())
    }

    /// Build a space from a descriptor document.
    pub fn from_descriptor(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::config("space descriptor must be a JSON object"))?;
        let points = obj
            .get("points")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::config("descriptor field \"points\" missing or not an integer"))?
            as usize;
        let metric = obj
            .get("metric")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::config("descriptor field \"metric\" missing"))?;
        let weights = match obj.get("weights") {
            None => None,
            Some(w) => Some(parse_f64_array(w, "weights")?),
        };
        let space = match metric {
            "euclidean" => {
                let coords = obj
                    .get("coords")
                    .ok_or_else(|| Error::config("euclidean descriptor needs \"coords\""))?;
                let coords = parse_f64_matrix(coords, "coords")?;
                Self::from_coords(coords, weights)?
            }
            "matrix" => {
                let matrix = obj
                    .get("matrix")
                    .ok_or_else(|| Error::config("matrix descriptor needs \"matrix\""))?;
                let matrix = parse_f64_matrix(matrix, "matrix")?;
                Self::from_matrix(matrix, weights)?
            }
            other => {
                return Err(Error::config(format!(
                    "unknown metric kind {other:?}; expected \"euclidean\" or \"matrix\""
                )))
            }
        };
        if space.n != points {
            return Err(Error::config(format!(
                "descriptor says {points} points but {} rows were given",
                space.n
            )));
        }
        Ok(space)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        Self::from_descriptor(&v)
    }
}

fn parse_f64_array(v: &Value, what: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::config(format!("descriptor field \"{what}\" must be an array")))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .ok_or_else(|| Error::config(format!("{what}[{i}] is not a number")))
        })
        .collect()
}

fn parse_f64_matrix(v: &Value, what: &str) -> Result<Vec<Vec<f64>>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::config(format!("descriptor field \"{what}\" must be an array")))?;
    arr.iter()
        .enumerate()
        .map(|(i, row)| parse_f64_array(row, &format!("{what}[{i}]")))
        .collect()
}

fn validate_metric(n: usize, dist: &[f64]) -> Result<()> {
    for i in 0..n {
        let dii = dist[i * n + i];
        if dii != 0.0 {
            return Err(Error::config(format!(
                "distance matrix diagonal entry ({i},{i}) must be 0, got {dii}"
            )));
        }
        for j in (i + 1)..n {
            let dij = dist[i * n + j];
            let dji = dist[j * n + i];
            if !dij.is_finite() {
                return Err(Error::config(format!(
                    "distance entry ({i},{j}) is not finite"
                )));
            }
            if dij != dji {
                return Err(Error::config(format!(
                    "distance matrix is asymmetric at ({i},{j}): {dij} vs {dji}"
                )));
            }
            if dij <= 0.0 {
                return Err(Error::config(format!(
                    "distance between distinct points ({i},{j}) must be strictly positive, got {dij}"
                )));
            }
        }
    }
    let check = |i: usize, j: usize, k: usize| -> Result<()> {
        let direct = dist[i * n + k];
        let via = dist[i * n + j] + dist[j * n + k];
        if direct > via + METRIC_SLACK {
            return Err(Error::config(format!(
                "triangle inequality fails for points ({i},{j},{k}): d({i},{k}) = {direct} > {via}"
            )));
        }
        Ok(())
    };
    if n <= FULL_TRIANGLE_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    check(i, j, k)?;
                    check(j, i, k)?;
                    check(i, k, j)?;
                }
            }
        }
    } else {
        // Seeded sample: deterministic, so a bad matrix fails reproducibly.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
        for _ in 0..2_000_000 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            if i != j && j != k && i != k {
                check(i, j, k)?;
            }
        }
    }
    Ok(())
}

/// Built-in space generators used by the experiments and the CLI.
pub mod generate {
    use super::*;

    /// `n` evenly spaced points on `[0,1]` (endpoints included), each of
    /// weight `1/n`, so the total measure is 1.
    pub fn grid1d(n: usize) -> Result<MetricMeasureSpace> {
        if n == 0 || n > MAX_GRID_POINTS {
            return Err(Error::config(format!(
                "grid1d size must lie in 1..={MAX_GRID_POINTS}, got {n}"
            )));
        }
        let coords: Vec<Vec<f64>> = if n == 1 {
            vec![vec![0.0]]
        } else {
            (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect()
        };
        let w = 1.0 / n as f64;
        MetricMeasureSpace::from_coords(coords, Some(vec![w; n]))
    }

    /// `side x side` points on the unit square, each of weight `1/side^2`.
    pub fn grid2d(side: usize) -> Result<MetricMeasureSpace> {
        if side == 0 || side * side > MAX_GRID_POINTS {
            return Err(Error::config(format!(
                "grid2d side must satisfy 1 <= side^2 <= {MAX_GRID_POINTS}, got side {side}"
            )));
        }
        let step = if side == 1 {
            0.0
        } else {
            1.0 / (side - 1) as f64
        };
        let mut coords = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                coords.push(vec![i as f64 * step, j as f64 * step]);
            }
        }
        let w = 1.0 / (side * side) as f64;
        MetricMeasureSpace::from_coords(coords, Some(vec![w; side * side]))
    }

    /// Ternary Cantor construction: the `3^level`-point unit-interval grid
    /// together with the `2^level` indices whose base-3 digits avoid 1.
    pub fn cantor(level: u32) -> Result<(MetricMeasureSpace, Vec<usize>)> {
        if level == 0 || level > 8 {
            return Err(Error::config(format!(
                "cantor level must lie in 1..=8, got {level}"
            )));
        }
        let n = 3usize.pow(level);
        let coords: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let w = 1.0 / n as f64;
        let space = MetricMeasureSpace::from_coords(coords, Some(vec![w; n]))?;
        let set = cantor_digit_set(n, level);
        Ok((space, set))
    }

    /// Indices in `0..n` whose `digits` most significant base-3 digits
    /// (of the full base-3 expansion of width `log3 n`) avoid the digit 1.
    pub fn cantor_stage(n: usize, width: u32, digits: u32) -> Vec<usize> {
        (0..n)
            .filter(|&i| {
                let mut x = i;
                let mut ok = true;
                let mut ds = vec![0u8; width as usize];
                for d in (0..width).rev() {
                    ds[d as usize] = (x % 3) as u8;
                    x /= 3;
                }
                for d in 0..digits as usize {
                    if ds[d] == 1 {
                        ok = false;
                        break;
                    }
                }
                ok
            })
            .collect()
    }

    fn cantor_digit_set(n: usize, level: u32) -> Vec<usize> {
        cantor_stage(n, level, level)
    }
}
