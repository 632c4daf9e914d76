//! Slow reference solvers kept for validating the optimizing code paths.
//!
//! The entry point is a brute-force grid search over profiles with an exact
//! inner gradient program, tractable only for spaces with at most two
//! points outside the target set and written independently of the descent
//! machinery in `capacity`.

use crate::error::{Error, Result};
use crate::gradient::lp_norm;
use crate::space::{dyadic_scale, MetricMeasureSpace};
use std::collections::BTreeMap;

/// Exact per-shell quadratic program for the optimal gradient at fixed u
/// when p = q = 2, solved by enumerating KKT active sets.  Each shell
/// decouples: minimize `sum_x w_x g_x^2` subject to `g_x + g_y >= b_e` over
/// the shell's pairs and `g >= 0`.
fn shell_qp(weights: &[f64], edges: &[(usize, usize, f64)]) -> Result<f64> {
    let vars: Vec<usize> = {
        let mut v: Vec<usize> = edges.iter().flat_map(|&(x, y, _)| [x, y]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let m = vars.len();
    let idx = |p: usize| vars.iter().position(|&v| v == p).unwrap();
    let ne = edges.len();
    if m > 6 || ne > 8 {
        return Err(Error::config(
            "reference gradient program limited to 6 points and 8 pairs per shell",
        ));
    }
    let quad = |g: &[f64]| -> f64 {
        vars.iter().zip(g).map(|(&x, &v)| weights[x] * v * v).sum()
    };
    let mut best = f64::INFINITY;
    // Active set = subset of edge constraints; zero set = subset of vars.
    for active in 0u32..(1 << ne) {
        for zero in 0u32..(1 << m) {
            let free: Vec<usize> = (0..m).filter(|i| zero & (1 << i) == 0).collect();
            let act: Vec<usize> = (0..ne).filter(|e| active & (1 << e) != 0).collect();
            let dim = free.len() + act.len();
            if dim == 0 {
                // All variables zero, no active constraints.
                if edges.iter().all(|&(_, _, b)| b <= 1e-12) {
                    best = best.min(0.0);
                }
                continue;
            }
            // Unknowns: g over free vars, then lambda over active edges.
            let mut a = vec![vec![0.0f64; dim + 1]; dim];
            for (row, &fi) in free.iter().enumerate() {
                a[row][row] = 2.0 * weights[vars[fi]];
                for (col, &e) in act.iter().enumerate() {
                    let (x, y, _) = edges[e];
                    if idx(x) == fi || idx(y) == fi {
                        a[row][free.len() + col] = -1.0;
                    }
                }
            }
            for (row, &e) in act.iter().enumerate() {
                let (x, y, b) = edges[e];
                for (col, &fi) in free.iter().enumerate() {
                    if idx(x) == fi || idx(y) == fi {
                        a[free.len() + row][col] = 1.0;
                    }
                }
                a[free.len() + row][dim] = b;
            }
            let sol = match gauss(&mut a) {
                Some(s) => s,
                None => continue,
            };
            let mut g = vec![0.0f64; m];
            for (col, &fi) in free.iter().enumerate() {
                g[fi] = sol[col];
            }
            let lambda = &sol[free.len()..];
            if g.iter().any(|&v| v < -1e-10) {
                continue;
            }
            if lambda.iter().any(|&l| l < -1e-10) {
                continue;
            }
            let ok_inactive = edges.iter().enumerate().all(|(e, &(x, y, b))| {
                active & (1 << e) != 0 || g[idx(x)] + g[idx(y)] >= b - 1e-10
            });
            if !ok_inactive {
                continue;
            }
            // Zero variables need nonnegative reduced gradient.
            let ok_zero = (0..m).filter(|i| zero & (1 << i) != 0).all(|i| {
                let pull: f64 = act
                    .iter()
                    .enumerate()
                    .filter(|&(_, &e)| {
                        let (x, y, _) = edges[e];
                        idx(x) == i || idx(y) == i
                    })
                    .map(|(col, _)| lambda[col])
                    .sum();
                pull <= 1e-10
            });
            if !ok_zero {
                continue;
            }
            best = best.min(quad(&g));
        }
    }
    Ok(best)
}

fn gauss(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Grid-plus-refinement search over profiles in [0,1] with the exact inner
/// gradient program at p = q = 2.  At most two points may lie outside the
/// target set.
pub fn grid_capacity(space: &MetricMeasureSpace, set: &[usize], s: f64) -> Result<f64> {
    let n = space.len();
    let free: Vec<usize> = (0..n).filter(|x| !set.contains(x)).collect();
    if free.len() > 2 {
        return Err(Error::config(
            "reference capacity search limited to two free points",
        ));
    }
    let weights: Vec<f64> = (0..n).map(|x| space.weight(x)).collect();
    let eval = |vals: &[f64]| -> Result<f64> {
        let mut u = vec![1.0f64; n];
        for (i, &x) in free.iter().enumerate() {
            u[x] = vals[i];
        }
        let lp = lp_norm(space, &u, 2.0)?;
        // Group pair constraints by shell.
        let mut shells: BTreeMap<i32, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for x in 0..n {
            for y in (x + 1)..n {
                let d = space.dist(x, y);
                let b = (u[x] - u[y]).abs() / d.powf(s);
                if b > 1e-12 {
                    shells.entry(dyadic_scale(d)).or_default().push((x, y, b));
                }
            }
        }
        let mut mixed_sq = 0.0f64;
        for edges in shells.values() {
            mixed_sq += shell_qp(&weights, edges)?;
        }
        Ok((lp + mixed_sq.sqrt()).powi(2))
    };
    let dims = free.len();
    if dims == 0 {
        return eval(&[]);
    }
    let scan = |center: &[f64], radius: f64, steps: usize| -> Result<(Vec<f64>, f64)> {
        let mut local_best = f64::INFINITY;
        let mut local_vals = center.to_vec();
        let lattice: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        if dims == 1 {
            for &a in &lattice {
                let v0 = (center[0] + radius * (2.0 * a - 1.0)).clamp(0.0, 1.0);
                let f = eval(&[v0])?;
                if f < local_best {
                    local_best = f;
                    local_vals = vec![v0];
                }
            }
        } else {
            for &a in &lattice {
                for &b in &lattice {
                    let v0 = (center[0] + radius * (2.0 * a - 1.0)).clamp(0.0, 1.0);
                    let v1 = (center[1] + radius * (2.0 * b - 1.0)).clamp(0.0, 1.0);
                    let f = eval(&[v0, v1])?;
                    if f < local_best {
                        local_best = f;
                        local_vals = vec![v0, v1];
                    }
                }
            }
        }
        Ok((local_vals, local_best))
    };
    let coarse = 25usize;
    let (mut best_vals, mut best) = scan(&vec![0.5; dims], 0.5, 2 * coarse)?;
    let mut radius = 0.5 / coarse as f64;
    for _ in 0..4 {
        let (vals, val) = scan(&best_vals.clone(), radius, 40)?;
        if val < best {
            best = val;
            best_vals = vals;
        }
        radius /= 10.0;
    }
    Ok(best)
}
