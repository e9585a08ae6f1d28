use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::km::SurvivalData;
use crate::error::{Error, Result};

const MAX_ITER: usize = 50;
const SCORE_TOL: f64 = 1e-8;
const MONOTONE_BETA: f64 = 20.0;
const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxCoefficient {
    pub name: String,
    pub beta: f64,
    pub exp_beta: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFitResult {
    pub coefficients: Vec<CoxCoefficient>,
    pub log_partial_likelihood: f64,
    pub iterations: usize,
    /// Some |beta| exceeded 20: the likelihood is likely monotone.
    pub monotone_likelihood: bool,
    /// Log partial likelihood after every Newton step.
    pub trace: Vec<f64>,
}

/// Log partial likelihood (Breslow ties), its gradient and the observed
/// information matrix at `beta`. `x` is row-major `n x p`.
pub fn cox_partial_loglik(
    times: &[f64],
    events: &[bool],
    x: &[f64],
    p: usize,
    beta: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let eta: Vec<f64> = (0..n)
        .map(|i| x[i * p..(i + 1) * p].iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect();

    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let start = i;
        while i < n && times[order[i]] == t {
            let k = order[i];
            let w = eta[k].exp();
            let xk = &x[k * p..(k + 1) * p];
            s0 += w;
            for a in 0..p {
                s1[a] += w * xk[a];
                for b in 0..p {
                    s2[a * p + b] += w * xk[a] * xk[b];
                }
            }
            i += 1;
        }
        for &k in &order[start..i] {
            if !events[k] {
                continue;
            }
            let xk = &x[k * p..(k + 1) * p];
            ll += eta[k] - s0.ln();
            for a in 0..p {
                let ma = s1[a] / s0;
                grad[a] += xk[a] - ma;
                for b in 0..p {
                    info[a * p + b] += s2[a * p + b] / s0 - ma * s1[b] / s0;
                }
            }
        }
    }
    (ll, grad, info)
}

/// Cox proportional-hazards fit by Newton-Raphson with step halving.
/// Covariates are centred internally; coefficients refer to the original
/// scale.
pub fn fit_cox(data: &SurvivalData) -> Result<CoxFitResult> {
    let cov = data
        .covariates
        .as_ref()
        .ok_or_else(|| Error::Data("cox fit needs covariates".into()))?;
    if data.n_events() == 0 {
        return Err(Error::Data("cox fit needs at least one event".into()));
    }
    let (n, p) = (cov.n(), cov.m());
    if p == 0 {
        return Err(Error::Data("cox fit needs at least one covariate".into()));
    }
    let mut x = cov.values().to_vec();
    for j in 0..p {
        let col = cov.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::Data(format!(
                "cox covariate `{}` is constant",
                cov.feature_names()[j]
            )));
        }
        for i in 0..n {
            x[i * p + j] -= mean;
        }
    }

    let mut beta = vec![0.0; p];
    let (mut ll, mut grad, mut info) = cox_partial_loglik(&data.times, &data.events, &x, p, &beta);
    let mut trace = vec![ll];
    let mut iterations = 0;
    while grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) >= SCORE_TOL {
        if iterations == MAX_ITER {
            return Err(Error::Numerical(format!(
                "cox fit did not converge in {MAX_ITER} iterations; log-likelihood trace {trace:?}"
            )));
        }
        iterations += 1;
        let i_mat = DMatrix::from_row_slice(p, p, &info);
        let step = i_mat
            .clone()
            .cholesky()
            .map(|c| c.solve(&DVector::from_column_slice(&grad)))
            .or_else(|| i_mat.lu().solve(&DVector::from_column_slice(&grad)))
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "singular information matrix at iteration {iterations}; trace {trace:?}"
                ))
            })?;
        let mut scale = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let (ll_c, g_c, i_c) = cox_partial_loglik(&data.times, &data.events, &x, p, &cand);
            if ll_c.is_finite() && ll_c >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                (ll, grad, info) = (ll_c, g_c, i_c);
                break;
            }
            scale /= 2.0;
            if scale < 1e-10 {
                return Err(Error::Numerical(format!(
                    "cox step halving failed at iteration {iterations}; trace {trace:?}"
                )));
            }
        }
        trace.push(ll);
    }

    let inv = DMatrix::from_row_slice(p, p, &info).try_inverse().ok_or_else(|| {
        Error::Numerical(format!("singular information matrix at the optimum; trace {trace:?}"))
    })?;
    let normal = Normal::standard();
    let coefficients = (0..p)
        .map(|j| {
            let b = beta[j];
            let se = inv[(j, j)].max(0.0).sqrt();
            let z = b / se;
            CoxCoefficient {
                name: cov.feature_names()[j].clone(),
                beta: b,
                exp_beta: b.exp(),
                se,
                z,
                p_value: 2.0 * normal.sf(z.abs()),
                ci_lower: (b - Z95 * se).exp(),
                ci_upper: (b + Z95 * se).exp(),
            }
        })
        .collect();
    Ok(CoxFitResult {
        coefficients,
        log_partial_likelihood: ll,
        iterations,
        monotone_likelihood: beta.iter().any(|b| b.abs() > MONOTONE_BETA),
        trace,
    })
}
