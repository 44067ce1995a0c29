//! Weighted nonlinear least squares for the two decay shapes produced by
//! the sequence correlators: `a p^{m-1}` and `a + b u^{m-1}`.
//!
//! Decay parameters may be negative (the OTOC rate `d O(t)` often is), so
//! no log-linearization is used anywhere.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const GRAD_TOL: f64 = 1e-12;

/// Result of a decay fit.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// `[a, p]` for pure decay, `[a, b, u]` for offset decay.
    pub params: Vec<f64>,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Parameter covariance estimate `(J^T W J)^{-1}`.
    pub covariance: Array2<f64>,
    /// Set when the data cannot distinguish `a` from `b` (constant series).
    pub unidentifiable: bool,
}

impl FitResult {
    pub fn a(&self) -> f64 {
        self.params[0]
    }

    /// Decay parameter: `p` or `u` depending on the model.
    pub fn decay(&self) -> f64 {
        *self.params.last().unwrap()
    }

    pub fn b(&self) -> Option<f64> {
        (self.params.len() == 3).then(|| self.params[1])
    }
}

/// One observed point `(m, value, stderr)`; `stderr <= 0` means unweighted.
pub type SeriesPoint = (usize, f64, f64);

fn weights_of(points: &[SeriesPoint]) -> Vec<f64> {
    // 1/stderr^2 when every point carries one, else uniform
    if points.iter().all(|&(_, _, s)| s > 0.0) {
        points.iter().map(|&(_, _, s)| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; points.len()]
    }
}

fn validate_points(points: &[SeriesPoint], min_distinct: usize) -> Result<()> {
    let mut ms: Vec<usize> = points.iter().map(|&(m, _, _)| m).collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < min_distinct {
        return Err(Error::NotEnoughData(format!(
            "need at least {min_distinct} distinct sequence lengths, got {}",
            ms.len()
        )));
    }
    if points.iter().any(|&(m, _, _)| m == 0) {
        return Err(Error::InvalidArgument("sequence length m = 0".into()));
    }
    Ok(())
}

fn rms(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Solve the small symmetric system `A x = b` by Gaussian elimination with
/// partial pivoting and a Levenberg ridge on near-singular pivots.
fn solve_damped(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    for damping in [0.0, 1e-12, 1e-9, 1e-6, 1e-3] {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += damping * scale.max(1e-300);
        }
        let mut rhs = b.clone();
        if let Some(x) = gauss_solve(&mut m, &mut rhs) {
            return Some(x);
        }
    }
    None
}

fn gauss_solve(a: &mut Array2<f64>, b: &mut Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))?;
        if a[(pivot, col)].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = a[(col, k)];
                a[(col, k)] = a[(pivot, k)];
                a[(pivot, k)] = tmp;
            }
            b.swap(col, pivot);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[(row, col)] / a[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[(col, k)];
                a[(row, k)] -= factor * v;
            }
            b[row] -= factor * b[col];
        }
    }
    Some(Array1::from_iter((0..n).map(|i| b[i] / a[(i, i)])))
}

/// Gauss-Newton core: `model(m, params) -> (value, gradient)`.
fn gauss_newton<F>(
    points: &[SeriesPoint],
    weights: &[f64],
    mut params: Vec<f64>,
    model: F,
) -> Result<(Vec<f64>, f64, Array2<f64>)>
where
    F: Fn(usize, &[f64]) -> (f64, Vec<f64>),
{
    let np = params.len();
    let mut last_grad = f64::INFINITY;
    let mut last_res = f64::INFINITY;
    // gradient scale: tolerances are relative to the weighted data magnitude
    let cost_scale: f64 = points
        .iter()
        .zip(weights)
        .map(|(&(_, v, _), &w)| w * v * v)
        .sum::<f64>()
        .max(1.0);
    for _iter in 0..MAX_ITERATIONS {
        let mut jtj = Array2::zeros((np, np));
        let mut jtr = Array1::zeros(np);
        let mut residuals = Vec::with_capacity(points.len());
        for (&(m, value, _), &w) in points.iter().zip(weights) {
            let (fit, grad) = model(m, &params);
            let r = value - fit;
            residuals.push(r);
            for i in 0..np {
                jtr[i] += w * grad[i] * r;
                for j in 0..np {
                    jtj[(i, j)] += w * grad[i] * grad[j];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        last_grad = grad_norm;
        last_res = rms(&residuals);
        if grad_norm <= GRAD_TOL * cost_scale {
            let cov = covariance_of(&jtj);
            return Ok((params, last_res, cov));
        }
        let Some(step) = solve_damped(&jtj, &jtr) else {
            return Err(Error::FitDidNotConverge {
                iterations: _iter,
                gradient: grad_norm,
                residual: last_res,
            });
        };
        // backtracking line search on the weighted residual
        let cost = |p: &[f64]| -> f64 {
            points
                .iter()
                .zip(weights)
                .map(|(&(m, value, _), &w)| {
                    let (fit, _) = model(m, p);
                    w * (value - fit) * (value - fit)
                })
                .sum()
        };
        let base = cost(&params);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(p, s)| p + alpha * s)
                .collect();
            if cost(&trial) <= base * (1.0 + 1e-14) {
                params = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // the line search found no descent: the cost sits on a float
            // plateau at the optimum
            let cov = covariance_of(&jtj);
            return Ok((params, last_res, cov));
        }
    }
    if last_grad <= 1e-6 * cost_scale {
        // iteration cap with a numerically flat gradient: converged
        let (final_params, final_res) = (params.clone(), last_res);
        let mut jtj = Array2::zeros((np, np));
        for (&(m, _, _), &w) in points.iter().zip(weights) {
            let (_, grad) = model(m, &params);
            for i in 0..np {
                for j in 0..np {
                    jtj[(i, j)] += w * grad[i] * grad[j];
                }
            }
        }
        return Ok((final_params, final_res, covariance_of(&jtj)));
    }
    Err(Error::FitDidNotConverge {
        iterations: MAX_ITERATIONS,
        gradient: last_grad,
        residual: last_res,
    })
}

fn covariance_of(jtj: &Array2<f64>) -> Array2<f64> {
    let n = jtj.nrows();
    let mut cov = Array2::zeros((n, n));
    for col in 0..n {
        let mut e = Array1::zeros(n);
        e[col] = 1.0;
        if let Some(x) = solve_damped(jtj, &e) {
            for row in 0..n {
                cov[(row, col)] = x[row];
            }
        }
    }
    cov
}

/// Fit `value(m) = a p^{m-1}` by weighted Gauss-Newton.
///
/// Initialization: `p0` is the mean of consecutive ratios (sign-preserving,
/// so negative decays are handled), `a0` rescales the smallest-`m` point.
pub fn fit_decay(points: &[SeriesPoint]) -> Result<FitResult> {
    validate_points(points, 2)?;
    let mut sorted: Vec<SeriesPoint> = points.to_vec();
    sorted.sort_by_key(|&(m, _, _)| m);
    let weights = weights_of(&sorted);

    let mut ratios = Vec::new();
    for w in sorted.windows(2) {
        let (m0, v0, _) = w[0];
        let (m1, v1, _) = w[1];
        if m1 == m0 + 1 && v0.abs() > 1e-300 {
            ratios.push(v1 / v0);
        }
    }
    let p0 = if ratios.is_empty() {
        0.5
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    let (m_first, v_first, _) = sorted[0];
    let denom = p0.powi(m_first as i32 - 1);
    let a0 = if denom.abs() > 1e-300 {
        v_first / denom
    } else {
        v_first
    };

    let model = |m: usize, p: &[f64]| -> (f64, Vec<f64>) {
        let (a, rate) = (p[0], p[1]);
        let k = m as i32 - 1;
        let pow = rate.powi(k);
        let dpow = if k == 0 { 0.0 } else { k as f64 * rate.powi(k - 1) };
        (a * pow, vec![pow, a * dpow])
    };
    let (params, residual, covariance) = gauss_newton(&sorted, &weights, vec![a0, p0], model)?;
    Ok(FitResult {
        params,
        residual,
        covariance,
        unidentifiable: false,
    })
}

/// Fit `value(m) = a + b u^{m-1}` with `u` constrained to `(-1, 1]` through
/// `u = tanh(theta)`.
///
/// A constant series makes the `a`/`b` split unidentifiable; the fit then
/// returns `a = mean`, `b = 0`, `u = 1` with the flag set (predictions stay
/// exact).
pub fn fit_offset_decay(points: &[SeriesPoint]) -> Result<FitResult> {
    validate_points(points, 3)?;
    let mut sorted: Vec<SeriesPoint> = points.to_vec();
    sorted.sort_by_key(|&(m, _, _)| m);
    let weights = weights_of(&sorted);

    let values: Vec<f64> = sorted.iter().map(|&(_, v, _)| v).collect();
    let spread = values.iter().cloned().fold(f64::MIN, f64::max)
        - values.iter().cloned().fold(f64::MAX, f64::min);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    if spread <= 1e-12 * scale {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        return Ok(FitResult {
            params: vec![mean, 0.0, 1.0],
            residual: rms(&values.iter().map(|v| v - mean).collect::<Vec<_>>()),
            covariance: Array2::zeros((3, 3)),
            unidentifiable: true,
        });
    }

    // u0 from successive difference ratios, a0 from the largest-m value,
    // b0 from the first point's residual
    let mut diff_ratios = Vec::new();
    for w in sorted.windows(3) {
        let (m0, v0, _) = w[0];
        let (m1, v1, _) = w[1];
        let (m2, v2, _) = w[2];
        if m1 == m0 + 1 && m2 == m1 + 1 && (v1 - v0).abs() > 1e-300 {
            diff_ratios.push((v2 - v1) / (v1 - v0));
        }
    }
    let u0 = if diff_ratios.is_empty() {
        0.5
    } else {
        (diff_ratios.iter().sum::<f64>() / diff_ratios.len() as f64).clamp(-0.999, 0.999)
    };

    let model = |m: usize, p: &[f64]| -> (f64, Vec<f64>) {
        let (a, b, theta) = (p[0], p[1], p[2]);
        let u = theta.tanh();
        let du = 1.0 - u * u;
        let k = m as i32 - 1;
        let pow = u.powi(k);
        let dpow_du = if k == 0 { 0.0 } else { k as f64 * u.powi(k - 1) };
        (a + b * pow, vec![1.0, pow, b * dpow_du * du])
    };
    let cost = |fit: &FitResult| -> f64 {
        sorted
            .iter()
            .zip(&weights)
            .map(|(&(m, v, _), &w)| {
                let predicted = fit.params[0] + fit.params[1] * fit.params[2].powi(m as i32 - 1);
                w * (v - predicted) * (v - predicted)
            })
            .sum()
    };
    // multi-start around the difference-ratio guess: the offset-exponential
    // cost surface traps single starts at the u boundary
    let mut starts = vec![u0];
    starts.extend([0.5 * u0, 0.3, 0.6, 0.9, -0.5].iter().copied());
    let mut best: Option<(f64, FitResult)> = None;
    for start in starts {
        let u_init = start.clamp(-0.999_999, 0.999_999);
        let a0 = sorted.last().unwrap().1;
        let (m_first, v_first, _) = sorted[0];
        let denom = u_init.powi(m_first as i32 - 1);
        let b0 = if denom.abs() > 1e-300 {
            (v_first - a0) / denom
        } else {
            v_first - a0
        };
        let Ok((params, residual, covariance)) =
            gauss_newton(&sorted, &weights, vec![a0, b0, u_init.atanh()], model)
        else {
            continue;
        };
        let candidate = FitResult {
            params: vec![params[0], params[1], params[2].tanh()],
            residual,
            covariance,
            unidentifiable: false,
        };
        let c = cost(&candidate);
        if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
            best = Some((c, candidate));
        }
    }
    best.map(|(_, fit)| fit).ok_or(Error::FitDidNotConverge {
        iterations: MAX_ITERATIONS,
        gradient: f64::INFINITY,
        residual: f64::INFINITY,
    })
}
