//! Python bindings for the capmeasure toolkit.
//!
//! The module mirrors the Rust API at the granularity a notebook wants:
//! spaces, parameter bundles, gradient sequences and gauges are classes,
//! everything else is a plain function returning floats, lists or dicts.
//! Reports that the CLI serializes to JSON come back as dicts with the
//! same keys.

#![forbid(unsafe_code)]

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use capmeasure::capacity::{self, SolverOptions, Strategy};
use capmeasure::gradient;
use capmeasure::hausdorff::{self, BallSpec, ContentMethod};
use capmeasure::median;
use capmeasure::space::{generate, MetricMeasureSpace};
use capmeasure::verify::{self, Family};
use capmeasure::Error;

pyo3::create_exception!(
    capmeasure_py,
    InfeasibleError,
    PyRuntimeError,
    "A covering or scale-selection subproblem has no solution under the given constraints."
);

/// Map library errors onto Python exceptions: bad inputs raise `ValueError`,
/// infeasible subproblems raise `InfeasibleError`, anything else is a
/// `RuntimeError`.
fn pyerr(e: Error) -> PyErr {
    match e.category() {
        "config" => PyValueError::new_err(e.to_string()),
        "infeasible" => InfeasibleError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    match v {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.as_str().into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, val) in map {
                dict.set_item(key, json_to_py(py, val)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

/// A finite metric measure space: pairwise distances plus point weights.
#[pyclass(name = "Space", module = "capmeasure_py", skip_from_py_object)]
struct Space {
    inner: MetricMeasureSpace,
}

#[pymethods]
impl Space {
    /// `n` equally spaced points on `[0,1]` with uniform weights `1/n`.
    #[staticmethod]
    fn grid1d(n: usize) -> PyResult<Self> {
        Ok(Space {
            inner: generate::grid1d(n).map_err(pyerr)?,
        })
    }

    /// `side x side` grid on `[0,1]^2` with uniform weights.
    #[staticmethod]
    fn grid2d(side: usize) -> PyResult<Self> {
        Ok(Space {
            inner: generate::grid2d(side).map_err(pyerr)?,
        })
    }

    /// Grid hosting a middle-thirds construction; returns the space and the
    /// surviving index set at the given level.
    #[staticmethod]
    fn cantor(level: u32) -> PyResult<(Self, Vec<usize>)> {
        let (space, set) = generate::cantor(level).map_err(pyerr)?;
        Ok((Space { inner: space }, set))
    }

    /// Build from explicit Euclidean coordinates (one row per point).
    #[staticmethod]
    #[pyo3(signature = (coords, weights=None))]
    fn from_coords(coords: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(Space {
            inner: MetricMeasureSpace::from_coords(coords, weights).map_err(pyerr)?,
        })
    }

    /// Build from a full distance matrix.
    #[staticmethod]
    #[pyo3(signature = (matrix, weights=None))]
    fn from_matrix(matrix: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(Space {
            inner: MetricMeasureSpace::from_matrix(matrix, weights).map_err(pyerr)?,
        })
    }

    /// Parse the JSON descriptor format used by the CLI config files.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Space {
            inner: MetricMeasureSpace::from_json(text).map_err(pyerr)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.inner.dist(i, j)
    }

    fn weight(&self, i: usize) -> f64 {
        self.inner.weight(i)
    }

    fn total_measure(&self) -> f64 {
        self.inner.total_measure()
    }

    fn measure(&self, subset: Vec<usize>) -> f64 {
        self.inner.measure(&subset)
    }

    /// Open ball `B(x, rho)` as a sorted index list.
    fn ball(&self, x: usize, rho: f64) -> Vec<usize> {
        self.inner.ball(x, rho)
    }

    fn ball_measure(&self, x: usize, rho: f64) -> f64 {
        self.inner.ball_measure(x, rho)
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn min_positive_distance(&self) -> Option<f64> {
        self.inner.min_positive_distance()
    }

    fn doubling_constant(&self) -> f64 {
        self.inner.doubling_constant()
    }

    /// JSON descriptor, the same format `from_json` accepts.
    fn to_json(&self) -> PyResult<String> {
        self.inner.emit().map_err(pyerr)
    }

    fn __repr__(&self) -> String {
        format!(
            "Space(points={}, diameter={:.6})",
            self.inner.len(),
            self.inner.diameter()
        )
    }
}

/// Parameter bundle `(s, p, q, gamma, eps, s_prime)` shared by the
/// analytic routines.  Defaults: `gamma = 1/4`, `eps = 1`, `s_prime = s/2`.
#[pyclass(name = "Params", module = "capmeasure_py", skip_from_py_object)]
#[derive(Clone, Copy)]
struct Params {
    inner: capmeasure::Params,
}

#[pymethods]
impl Params {
    #[new]
    #[pyo3(signature = (s, p, q, gamma=None, eps=None, s_prime=None))]
    fn new(
        s: f64,
        p: f64,
        q: f64,
        gamma: Option<f64>,
        eps: Option<f64>,
        s_prime: Option<f64>,
    ) -> PyResult<Self> {
        let mut inner = capmeasure::Params::new(s, p, q).map_err(pyerr)?;
        if let Some(g) = gamma {
            inner = inner.with_gamma(g).map_err(pyerr)?;
        }
        if let Some(e) = eps {
            inner = inner.with_eps(e).map_err(pyerr)?;
        }
        if let Some(sp) = s_prime {
            inner = inner.with_s_prime(sp).map_err(pyerr)?;
        }
        Ok(Params { inner })
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn s_prime(&self) -> f64 {
        self.inner.s_prime
    }

    /// Gauge exponent `theta = max(1, p/q)`.
    fn theta(&self) -> f64 {
        self.inner.theta()
    }

    /// Subadditivity exponent `min(1, q/p)`.
    fn r_sub(&self) -> f64 {
        self.inner.r_sub()
    }

    /// `min(1, p)`, the exponent the Poincaré transform sums with.
    fn p_prime(&self) -> f64 {
        self.inner.p_prime()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(s={}, p={}, q={}, gamma={}, eps={}, s_prime={})",
            self.inner.s,
            self.inner.p,
            self.inner.q,
            self.inner.gamma,
            self.inner.eps,
            self.inner.s_prime
        )
    }
}

/// A sequence of nonnegative fields indexed by dyadic scale `k`, one row
/// per scale `2^k`, one entry per point.
#[pyclass(name = "GradientSequence", module = "capmeasure_py", skip_from_py_object)]
#[derive(Clone)]
struct GradientSequence {
    inner: gradient::GradientSequence,
}

#[pymethods]
impl GradientSequence {
    #[new]
    fn new(k_min: i32, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(GradientSequence {
            inner: gradient::GradientSequence::from_rows(k_min, rows).map_err(pyerr)?,
        })
    }

    #[getter]
    fn k_min(&self) -> i32 {
        self.inner.k_min()
    }

    #[getter]
    fn k_max(&self) -> i32 {
        self.inner.k_max()
    }

    /// Number of points per row (0 for the empty sequence).
    fn points(&self) -> usize {
        self.inner.points()
    }

    /// Entry at scale `k`, point `x`; zero outside the stored window.
    fn value(&self, k: i32, x: usize) -> f64 {
        self.inner.value(k, x)
    }

    /// All rows as `(k, values)` pairs.
    fn rows(&self) -> Vec<(i32, Vec<f64>)> {
        self.inner.rows().map(|(k, row)| (k, row.to_vec())).collect()
    }

    /// `l^q` norm across scales at a fixed point (`sup` for `q = inf`).
    fn column_norm(&self, x: usize, q: f64) -> f64 {
        self.inner.column_norm(x, q)
    }

    fn scaled(&self, factor: f64) -> Self {
        GradientSequence {
            inner: self.inner.scaled(factor),
        }
    }

    fn __repr__(&self) -> String {
        match self.inner.window() {
            Some(w) => format!(
                "GradientSequence(k_min={}, k_max={}, points={})",
                w.k_min,
                w.k_max,
                self.inner.points()
            ),
            None => String::from("GradientSequence(empty)"),
        }
    }
}

/// Ball cost function for the generalized Hausdorff content.
#[pyclass(name = "Gauge", module = "capmeasure_py", skip_from_py_object)]
#[derive(Clone, Copy)]
struct Gauge {
    inner: hausdorff::Gauge,
}

#[pymethods]
impl Gauge {
    /// `(mu(B(x,rho)) / rho^(sp))^theta`.
    #[staticmethod]
    fn theta(s: f64, p: f64, theta: f64) -> PyResult<Self> {
        let inner = hausdorff::Gauge::Theta { s, p, theta };
        inner.validate().map_err(pyerr)?;
        Ok(Gauge { inner })
    }

    /// `mu(B(x,rho)) rho^(-sp) ln(1/rho)^(-(p+eps))`, only for `rho < 1`.
    #[staticmethod]
    fn log(s: f64, p: f64, eps: f64) -> PyResult<Self> {
        let inner = hausdorff::Gauge::Log { s, p, eps };
        inner.validate().map_err(pyerr)?;
        Ok(Gauge { inner })
    }

    /// `t^(dim - sp) ln(1/t)^(-(p+eps))`, only for `t < 1`.
    #[staticmethod]
    fn euclid_log(dim: f64, s: f64, p: f64, eps: f64) -> PyResult<Self> {
        let inner = hausdorff::Gauge::EuclidLog { dim, s, p, eps };
        inner.validate().map_err(pyerr)?;
        Ok(Gauge { inner })
    }

    /// Same shape with the slack halved: exponent `-(p + eps/2)`.
    #[staticmethod]
    fn euclid_log_half(dim: f64, s: f64, p: f64, eps: f64) -> PyResult<Self> {
        let inner = hausdorff::Gauge::EuclidLogHalf { dim, s, p, eps };
        inner.validate().map_err(pyerr)?;
        Ok(Gauge { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            hausdorff::Gauge::Theta { .. } => "theta",
            hausdorff::Gauge::Log { .. } => "log",
            hausdorff::Gauge::EuclidLog { .. } => "euclid_log",
            hausdorff::Gauge::EuclidLogHalf { .. } => "euclid_log_half",
        }
    }

    /// Cost of the ball `B(center, rho)`.
    fn eval(&self, space: &Space, center: usize, rho: f64) -> PyResult<f64> {
        self.inner.eval(&space.inner, center, rho).map_err(pyerr)
    }

    fn __repr__(&self) -> String {
        self.inner.to_value().to_string()
    }
}

/// Outcome of a capacity solve: the value and the admissible witness pair.
#[pyclass(name = "CapacityResult", module = "capmeasure_py")]
struct CapacityResult {
    inner: capacity::CapacityResult,
}

#[pymethods]
impl CapacityResult {
    #[getter]
    fn value(&self) -> f64 {
        self.inner.value
    }

    #[getter]
    fn witness_u(&self) -> Vec<f64> {
        self.inner.witness_u.clone()
    }

    #[getter]
    fn witness_g(&self) -> GradientSequence {
        GradientSequence {
            inner: self.inner.witness_g.clone(),
        }
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }

    fn __repr__(&self) -> String {
        format!(
            "CapacityResult(value={:.6e}, strategy={}, iterations={})",
            self.inner.value,
            self.inner.strategy.name(),
            self.inner.iterations
        )
    }
}

fn parse_strategy(name: &str, params: &capmeasure::Params) -> PyResult<Strategy> {
    if name == "auto" {
        Ok(Strategy::for_params(params))
    } else {
        Strategy::parse(name).map_err(pyerr)
    }
}

fn parse_method(name: &str) -> PyResult<ContentMethod> {
    match name {
        "exact" => Ok(ContentMethod::Exact),
        "greedy" => Ok(ContentMethod::Greedy),
        other => Err(PyValueError::new_err(format!(
            "unknown method \"{other}\" (expected exact or greedy)"
        ))),
    }
}

fn ball_specs(balls: Vec<(usize, f64)>) -> Vec<BallSpec> {
    balls
        .into_iter()
        .map(|(center, radius)| BallSpec { center, radius })
        .collect()
}

/// The `gamma`-quantile value of `u` over `subset`: the smallest data value
/// whose strict superlevel set has measure below `gamma * mu(subset)`.
#[pyfunction]
fn gamma_median(space: &Space, u: Vec<f64>, subset: Vec<usize>, gamma: f64) -> PyResult<f64> {
    median::gamma_median(&space.inner, &u, &subset, gamma).map_err(pyerr)
}

/// Smallest valid fractional `s`-gradient of the half-sup construction.
#[pyfunction]
fn canonical_gradient(space: &Space, u: Vec<f64>, s: f64) -> PyResult<GradientSequence> {
    Ok(GradientSequence {
        inner: gradient::canonical_gradient(&space.inner, &u, s).map_err(pyerr)?,
    })
}

/// Exhaustive pairwise check of `|u(x)-u(y)| <= d(x,y)^s (g_k(x)+g_k(y))`.
#[pyfunction]
fn is_valid_gradient(space: &Space, u: Vec<f64>, g: &GradientSequence, s: f64) -> PyResult<bool> {
    Ok(gradient::is_valid_gradient(&space.inner, &u, &g.inner, s)
        .map_err(pyerr)?
        .valid)
}

/// Windowed sum `(sum_{j <= k+2} 2^((j-k) s' p') g_j^p)^(1/p)` per point.
#[pyfunction]
fn poincare_transform(
    space: &Space,
    g: &GradientSequence,
    s_prime: f64,
    p: f64,
) -> PyResult<GradientSequence> {
    Ok(GradientSequence {
        inner: gradient::poincare_transform(&space.inner, &g.inner, s_prime, p).map_err(pyerr)?,
    })
}

/// Weighted `L^p` norm of a field.
#[pyfunction]
fn lp_norm(space: &Space, u: Vec<f64>, p: f64) -> PyResult<f64> {
    gradient::lp_norm(&space.inner, &u, p).map_err(pyerr)
}

/// `L^p(l^q)` norm of a gradient sequence.
#[pyfunction]
fn mixed_norm(space: &Space, g: &GradientSequence, p: f64, q: f64) -> PyResult<f64> {
    gradient::mixed_norm(&space.inner, &g.inner, p, q).map_err(pyerr)
}

/// `lp_norm(u) + mixed_norm(g)`.
#[pyfunction]
fn tl_norm(space: &Space, u: Vec<f64>, g: &GradientSequence, p: f64, q: f64) -> PyResult<f64> {
    gradient::tl_norm(&space.inner, &u, &g.inner, p, q).map_err(pyerr)
}

/// Ball Poincaré inequality report for a transformed gradient; returns
/// the empirical constant (the largest left/right ratio over all balls).
#[pyfunction]
fn poincare_check(
    space: &Space,
    u: Vec<f64>,
    g: &GradientSequence,
    gamma: f64,
    s: f64,
    p: f64,
) -> PyResult<f64> {
    Ok(gradient::poincare_check(&space.inner, &u, &g.inner, gamma, s, p)
        .map_err(pyerr)?
        .max_ratio)
}

#[allow(clippy::too_many_arguments)]
fn solver_options(
    max_iters: usize,
    patience: usize,
    tol: f64,
    step_scale: f64,
    starts: usize,
    seed: u64,
) -> SolverOptions {
    SolverOptions {
        max_iters,
        patience,
        tol,
        step_scale,
        starts,
        seed,
    }
}

/// Upper bound on the `(s,p,q)` capacity of `set`, with the witness profile.
///
/// `strategy` is `"convex"`, `"multistart"`, `"lipschitz_test"` or `"auto"`
/// (convex descent when `p, q >= 1`, multistart otherwise).
#[pyfunction]
#[pyo3(signature = (space, set, params, strategy="auto", max_iters=6000, patience=300,
                    tol=1e-9, step_scale=0.1, starts=16, seed=0))]
#[allow(clippy::too_many_arguments)]
fn capacity_upper(
    space: &Space,
    set: Vec<usize>,
    params: &Params,
    strategy: &str,
    max_iters: usize,
    patience: usize,
    tol: f64,
    step_scale: f64,
    starts: usize,
    seed: u64,
) -> PyResult<CapacityResult> {
    let strategy = parse_strategy(strategy, &params.inner)?;
    let opts = solver_options(max_iters, patience, tol, step_scale, starts, seed);
    Ok(CapacityResult {
        inner: capacity::capacity_upper(&space.inner, &set, &params.inner, strategy, &opts)
            .map_err(pyerr)?,
    })
}

/// Solved capacity of a ball against its closed-form reference bound.
/// Returns a dict with `center`, `radius`, `upper`, `reference`, `ratio`.
#[pyfunction]
fn ball_capacity_bound(
    py: Python<'_>,
    space: &Space,
    center: usize,
    radius: f64,
    params: &Params,
) -> PyResult<Py<PyAny>> {
    let bound = capacity::ball_capacity_bound(&space.inner, center, radius, &params.inner)
        .map_err(pyerr)?;
    json_to_py(py, &bound.to_value())
}

/// Countable subadditivity experiment over explicit trial partitions.
/// Each trial is a list of parts (lists of indices); the report compares
/// `cap(union)^r` against `sum cap(part)^r` with `r = min(1, q/p)`.
#[pyfunction]
#[pyo3(signature = (space, trials, params, strategy="auto", max_iters=6000, patience=300,
                    tol=1e-9, step_scale=0.1, starts=16, seed=0))]
#[allow(clippy::too_many_arguments)]
fn subadditivity_check(
    py: Python<'_>,
    space: &Space,
    trials: Vec<Vec<Vec<usize>>>,
    params: &Params,
    strategy: &str,
    max_iters: usize,
    patience: usize,
    tol: f64,
    step_scale: f64,
    starts: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let strategy = parse_strategy(strategy, &params.inner)?;
    let opts = solver_options(max_iters, patience, tol, step_scale, starts, seed);
    let report =
        capacity::subadditivity_check(&space.inner, &trials, &params.inner, strategy, &opts)
            .map_err(pyerr)?;
    json_to_py(py, &report.to_value())
}

/// Generalized Hausdorff content of `set` at fineness `delta`.
/// Returns a dict with `gauge_sum`, `balls`, `covers`, `method`.
#[pyfunction]
#[pyo3(signature = (space, set, gauge, delta, method="exact"))]
fn content(
    py: Python<'_>,
    space: &Space,
    set: Vec<usize>,
    gauge: &Gauge,
    delta: f64,
    method: &str,
) -> PyResult<Py<PyAny>> {
    let method = parse_method(method)?;
    let solution =
        hausdorff::content(&space.inner, &set, gauge.inner, delta, method).map_err(pyerr)?;
    json_to_py(py, &solution.to_value())
}

/// Vitali-style 5B selection: a disjoint subfamily whose 5-dilates cover
/// the union.  Balls are `(center, radius)` pairs; returns the chosen
/// subfamily plus the dilation factor.
#[pyfunction]
fn five_b_cover(space: &Space, balls: Vec<(usize, f64)>) -> PyResult<(Vec<(usize, f64)>, f64)> {
    let cover = hausdorff::five_b_cover(&space.inner, &ball_specs(balls)).map_err(pyerr)?;
    let chosen = cover.chosen.iter().map(|b| (b.center, b.radius)).collect();
    Ok((chosen, cover.dilation))
}

/// Two-sided capacity/content comparison over a nested family
/// (`"cantor"`, `"intervals"` or `"squares"`).  Returns the report dict
/// with per-level rows, the ratio spread and the verdict string.
#[pyfunction]
#[pyo3(signature = (family, lo, hi, params, delta=1.0, max_iters=6000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn verify_thm1(
    py: Python<'_>,
    family: &str,
    lo: usize,
    hi: usize,
    params: &Params,
    delta: f64,
    max_iters: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let family = Family::parse(family).map_err(pyerr)?;
    let opts = SolverOptions {
        max_iters,
        seed,
        ..SolverOptions::default()
    };
    let report =
        verify::verify_thm1(family, (lo, hi), &params.inner, delta, &opts).map_err(pyerr)?;
    json_to_py(py, &report.to_value())
}

/// Canonical admissible pair for the covering argument on a ball of radius
/// `2^-m` around the set: a cut-off test profile and its product gradient
/// run through the Poincaré transform.
#[pyfunction]
fn covering_profile(
    space: &Space,
    set: Vec<usize>,
    params: &Params,
    m: i32,
) -> PyResult<(Vec<f64>, GradientSequence)> {
    let (u, g) = verify::covering_profile(&space.inner, &set, &params.inner, m).map_err(pyerr)?;
    Ok((u, GradientSequence { inner: g }))
}

/// Scale-selection certificate: for each point of `set` pick the smallest
/// scale where the gauged ball cost is dominated, then run the 5B covering.
/// Returns the report dict (`selections`, `family`, `gauge_sum`, `bound`, ...).
#[pyfunction]
#[pyo3(signature = (space, set, u, g, params, m, c_poincare=None))]
#[allow(clippy::too_many_arguments)]
fn proof_covering(
    py: Python<'_>,
    space: &Space,
    set: Vec<usize>,
    u: Vec<f64>,
    g: &GradientSequence,
    params: &Params,
    m: i32,
    c_poincare: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let report =
        verify::proof_covering(&space.inner, &set, &u, &g.inner, &params.inner, m, c_poincare)
            .map_err(pyerr)?;
    json_to_py(py, &report.to_value())
}

/// Discrete `W^{s,p}` energy of a field.
#[pyfunction]
fn wsp_norm(space: &Space, u: Vec<f64>, s: f64, p: f64) -> PyResult<f64> {
    verify::wsp_norm(&space.inner, &u, s, p).map_err(pyerr)
}

/// Piecewise-linear tent centered in the space, for experiments.
#[pyfunction]
fn tent_profile(space: &Space) -> PyResult<Vec<f64>> {
    verify::tent_profile(&space.inner).map_err(pyerr)
}

/// Unbounded-near-the-center profile `dist^(-1/4)` on a coordinate space.
#[pyfunction]
fn singular_profile(space: &Space) -> PyResult<Vec<f64>> {
    verify::singular_profile(&space.inner).map_err(pyerr)
}

/// Median-convergence experiment: embedding constant, the set of points
/// whose medians fail the Cauchy test at threshold `c_thresh`, and the
/// log-gauge content of that bad set.  Returns the report dict.
#[pyfunction]
fn lebesgue_experiment(
    py: Python<'_>,
    space: &Space,
    u: Vec<f64>,
    params: &Params,
    c_thresh: f64,
    j0: i32,
) -> PyResult<Py<PyAny>> {
    let report = verify::lebesgue_experiment(&space.inner, &u, &params.inner, c_thresh, j0)
        .map_err(pyerr)?;
    json_to_py(py, &report.to_value())
}

#[pymodule]
pub fn capmeasure_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Space>()?;
    m.add_class::<Params>()?;
    m.add_class::<GradientSequence>()?;
    m.add_class::<Gauge>()?;
    m.add_class::<CapacityResult>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(gamma_median, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(is_valid_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(poincare_transform, m)?)?;
    m.add_function(wrap_pyfunction!(lp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_norm, m)?)?;
    m.add_function(wrap_pyfunction!(tl_norm, m)?)?;
    m.add_function(wrap_pyfunction!(poincare_check, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_upper, m)?)?;
    m.add_function(wrap_pyfunction!(ball_capacity_bound, m)?)?;
    m.add_function(wrap_pyfunction!(subadditivity_check, m)?)?;
    m.add_function(wrap_pyfunction!(content, m)?)?;
    m.add_function(wrap_pyfunction!(five_b_cover, m)?)?;
    m.add_function(wrap_pyfunction!(verify_thm1, m)?)?;
    m.add_function(wrap_pyfunction!(covering_profile, m)?)?;
    m.add_function(wrap_pyfunction!(proof_covering, m)?)?;
    m.add_function(wrap_pyfunction!(wsp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(tent_profile, m)?)?;
    m.add_function(wrap_pyfunction!(singular_profile, m)?)?;
    m.add_function(wrap_pyfunction!(lebesgue_experiment, m)?)?;
    Ok(())
}
