//! Diagonal Gaussian mixture fitted by expectation–maximisation.
//!
//! Each restart is seeded by k-means++ followed by a few Lloyd iterations.
//! The E-step runs in parallel over rows; every reduction is sequential in
//! row order, so a fit does not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GrstError, Result};
use crate::lattice::GaussianSpec;
use crate::marginal::features::FeatureMatrix;
use crate::split::MarginalSchedule;

const LLOYD_ITERS: usize = 10;
/// Components lighter than this are reported as degenerate.
pub const DEGENERATE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub var_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            restarts: 3,
            seed: 0,
            var_floor: 1e-10,
        }
    }
}

impl EmOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(GrstError::invalid("max_iter and restarts must be positive"));
        }
        if !(self.tol > 0.0) || !(self.var_floor > 0.0) {
            return Err(GrstError::invalid("tol and var_floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    #[serde(rename = "K")]
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub loglik: f64,
    pub iters: usize,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub var_floor: f64,
    /// Indices of components with negligible weight or fully floored variances.
    pub degenerate: Vec<usize>,
}

impl MixtureFit {
    /// `floored[k][n]` is true where the variance sits at the floor.
    pub fn floored(&self) -> Vec<Vec<bool>> {
        self.variances
            .iter()
            .map(|v| v.iter().map(|&x| x <= self.var_floor).collect())
            .collect()
    }

    /// Mean log-likelihood of `y` under this mixture.
    pub fn mean_loglik(&self, y: &FeatureMatrix) -> Result<f64> {
        if y.cols() != self.means.first().map_or(0, Vec::len) {
            return Err(GrstError::invalid("feature width does not match the fit"));
        }
        let params = Params {
            weights: self.weights.clone(),
            means: self.means.clone(),
            variances: self.variances.clone(),
        };
        let (ll, _) = e_step(y, &params);
        Ok(ll / y.rows() as f64)
    }
}

#[derive(Debug, Clone)]
struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

fn log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    -0.5 * x
        .iter()
        .zip(mean)
        .zip(var)
        .map(|((x, m), v)| ln_2pi + v.ln() + (x - m) * (x - m) / v)
        .sum::<f64>()
}

/// Returns the total log-likelihood and the responsibilities (row-major, `rows x K`).
fn e_step(y: &FeatureMatrix, p: &Params) -> (f64, Vec<f64>) {
    let k = p.weights.len();
    let log_w: Vec<f64> = p.weights.iter().map(|w| w.ln()).collect();
    let mut resp = vec![0.0; y.rows() * k];
    let row_ll: Vec<f64> = resp
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, r)| {
            let x = y.row(i);
            for (c, slot) in r.iter_mut().enumerate() {
                *slot = log_w[c] + log_density(x, &p.means[c], &p.variances[c]);
            }
            let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + r.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for slot in r.iter_mut() {
                *slot = (*slot - lse).exp();
            }
            lse
        })
        .collect();
    (row_ll.iter().sum(), resp)
}

fn m_step(y: &FeatureMatrix, resp: &[f64], prev: &Params, floor: f64) -> Params {
    let k = prev.weights.len();
    let d = y.cols();
    let mut nk = vec![0.0; k];
    let mut sums = vec![vec![0.0; d]; k];
    for i in 0..y.rows() {
        let x = y.row(i);
        for c in 0..k {
            let r = resp[i * k + c];
            nk[c] += r;
            for (s, v) in sums[c].iter_mut().zip(x) {
                *s += r * v;
            }
        }
    }
    let mut means = prev.means.clone();
    for c in 0..k {
        if nk[c] > 0.0 {
            means[c] = sums[c].iter().map(|s| s / nk[c]).collect();
        }
    }
    let mut sq = vec![vec![0.0; d]; k];
    for i in 0..y.rows() {
        let x = y.row(i);
        for c in 0..k {
            let r = resp[i * k + c];
            for ((s, v), m) in sq[c].iter_mut().zip(x).zip(&means[c]) {
                *s += r * (v - m) * (v - m);
            }
        }
    }
    let mut variances = prev.variances.clone();
    for c in 0..k {
        if nk[c] > 0.0 {
            variances[c] = sq[c].iter().map(|s| (s / nk[c]).max(floor)).collect();
        }
    }
    let total: f64 = nk.iter().sum();
    Params {
        weights: nk.iter().map(|n| n / total).collect(),
        means,
        variances,
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    centres
        .iter()
        .enumerate()
        .map(|(c, m)| (c, sq_dist(x, m)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn kmeans_init(y: &FeatureMatrix, k: usize, floor: f64, rng: &mut ChaCha8Rng) -> Params {
    let n = y.rows();
    let mut centres = vec![y.row(rng.random_range(0..n)).to_vec()];
    while centres.len() < k {
        let d2: Vec<f64> = (0..n).map(|i| nearest(y.row(i), &centres).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centres.push(y.row(pick).to_vec());
    }

    let mut labels = vec![0; n];
    for _ in 0..LLOYD_ITERS {
        for (i, l) in labels.iter_mut().enumerate() {
            *l = nearest(y.row(i), &centres).0;
        }
        let mut sums = vec![vec![0.0; y.cols()]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(y.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }

    let global_var: Vec<f64> = y.column_variances().iter().map(|v| v.max(floor)).collect();
    let mut counts = vec![0usize; k];
    let mut sq = vec![vec![0.0; y.cols()]; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for ((s, v), m) in sq[l].iter_mut().zip(y.row(i)).zip(&centres[l]) {
            *s += (v - m) * (v - m);
        }
    }
    let variances = (0..k)
        .map(|c| {
            if counts[c] < 2 {
                global_var.clone()
            } else {
                sq[c]
                    .iter()
                    .map(|s| (s / counts[c] as f64).max(floor))
                    .collect()
            }
        })
        .collect();
    let raw: Vec<f64> = counts.iter().map(|&c| c.max(1) as f64).collect();
    let total: f64 = raw.iter().sum();
    Params {
        weights: raw.iter().map(|c| c / total).collect(),
        means: centres,
        variances,
    }
}

fn run_em(y: &FeatureMatrix, init: Params, opts: &EmOptions) -> (Params, f64, Vec<f64>, bool) {
    let mut params = init;
    let mut trace = Vec::new();
    let mut converged = false;
    let (mut ll, mut resp) = e_step(y, &params);
    trace.push(ll);
    for _ in 0..opts.max_iter {
        let next = m_step(y, &resp, &params, opts.var_floor);
        let (next_ll, next_resp) = e_step(y, &next);
        params = next;
        resp = next_resp;
        let change = (next_ll - ll).abs() / ll.abs().max(1.0);
        ll = next_ll;
        trace.push(ll);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    (params, ll, trace, converged)
}

/// Fits a `K`-component diagonal mixture, keeping the best of `restarts` runs.
pub fn fit_mixture_em(y: &FeatureMatrix, k: usize, opts: &EmOptions) -> Result<MixtureFit> {
    opts.validate()?;
    if k == 0 {
        return Err(GrstError::invalid("K must be at least 1"));
    }
    if y.rows() < k {
        return Err(GrstError::InsufficientData(format!(
            "{} rows cannot support {k} components",
            y.rows()
        )));
    }
    let mut best: Option<(Params, f64, Vec<f64>, bool)> = None;
    for restart in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let init = kmeans_init(y, k, opts.var_floor, &mut rng);
        let run = run_em(y, init, opts);
        if best.as_ref().is_none_or(|b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (params, loglik, trace, converged) = best.expect("at least one restart");
    if !loglik.is_finite() {
        return Err(GrstError::construction(
            "EM produced a non-finite log-likelihood",
        ));
    }
    let degenerate = (0..k)
        .filter(|&c| {
            params.weights[c] < DEGENERATE_WEIGHT
                || params.variances[c].iter().all(|&v| v <= opts.var_floor)
        })
        .collect();
    Ok(MixtureFit {
        k,
        weights: params.weights,
        means: params.means,
        variances: params.variances,
        loglik,
        iters: trace.len() - 1,
        loglik_trace: trace,
        converged,
        var_floor: opts.var_floor,
        degenerate,
    })
}

/// One schedule per component: entry `n` is `(t0 + (n+1) dt, μ_{k,n}, √var_{k,n})`.
///
/// Means are displacements from the root; add the root value when building.
pub fn component_marginals(fit: &MixtureFit, t0: f64, dt: f64) -> Result<Vec<MarginalSchedule>> {
    if !(dt > 0.0) || !t0.is_finite() {
        return Err(GrstError::invalid("dt must be positive and t0 finite"));
    }
    fit.means
        .iter()
        .zip(&fit.variances)
        .enumerate()
        .map(|(c, (mu, var))| {
            let entries = mu
                .iter()
                .zip(var)
                .enumerate()
                .map(|(n, (&m, &v))| GaussianSpec::new(t0 + (n + 1) as f64 * dt, m, v.sqrt()))
                .collect::<Result<Vec<_>>>()?;
            MarginalSchedule::new(entries).map_err(|e| GrstError::Component {
                index: c,
                source: Box::new(e),
            })
        })
        .collect()
}
