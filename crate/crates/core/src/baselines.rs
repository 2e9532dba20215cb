//! Classical multiplicative binomial trees and closed-form oracles.
//!
//! | Tree | Up / down | Probability |
//! |---|---|---|
//! | CRR | `e^{±σ√Δt}` | risk-neutral |
//! | Tian | three-moment match | risk-neutral |
//! | Jarrow–Rudd | `e^{(r-σ²/2)Δt ± σ√Δt}` | 1/2 |
//! | Trigeorgis | `e^{±H}` | `½(1 + mK/H)` |

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{GrstError, Result};
use crate::pricer::{payoff, ExerciseStyle, OptionContract, OptionKind, PricingResult};

/// One step of a self-similar multiplicative tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativeTreeParams {
    pub up: f64,
    pub down: f64,
    pub p_rn: f64,
    pub dt: f64,
}

impl MultiplicativeTreeParams {
    fn checked(up: f64, down: f64, p_rn: f64, dt: f64) -> Result<Self> {
        if !(down > 0.0 && up > down) || !up.is_finite() {
            return Err(GrstError::invalid(format!(
                "degenerate tree moves: U = {up}, D = {down}"
            )));
        }
        if !(0.0..=1.0).contains(&p_rn) {
            return Err(GrstError::invalid(format!(
                "up probability {p_rn} outside [0, 1]; reduce dt"
            )));
        }
        Ok(Self { up, down, p_rn, dt })
    }
}

fn check_inputs(sigma: f64, r: f64, dt: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GrstError::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GrstError::invalid(format!("dt must be positive, got {dt}")));
    }
    if !r.is_finite() {
        return Err(GrstError::invalid("rate must be finite"));
    }
    Ok(())
}

pub fn crr_params(sigma: f64, r: f64, dt: f64) -> Result<MultiplicativeTreeParams> {
    check_inputs(sigma, r, dt)?;
    let up = (sigma * dt.sqrt()).exp();
    let down = (-sigma * dt.sqrt()).exp();
    let p = ((r * dt).exp() - down) / (up - down);
    MultiplicativeTreeParams::checked(up, down, p, dt)
}

pub fn tian_params(sigma: f64, r: f64, dt: f64) -> Result<MultiplicativeTreeParams> {
    check_inputs(sigma, r, dt)?;
    let rn = (r * dt).exp();
    let vn = (sigma * sigma * dt).exp();
    let root = (vn * vn + 2.0 * vn - 3.0).max(0.0).sqrt();
    let up = 0.5 * rn * vn * (vn + 1.0 + root);
    let down = 0.5 * rn * vn * (vn + 1.0 - root);
    if !(up > down) {
        return Err(GrstError::invalid(format!(
            "Tian tree degenerates (U = D) for sigma^2 dt = {}",
            sigma * sigma * dt
        )));
    }
    let p = (rn - down) / (up - down);
    MultiplicativeTreeParams::checked(up, down, p, dt)
}

/// Equal-probability tree; `p_rn = 1/2` is not the risk-neutral probability.
pub fn jr_params(sigma: f64, r: f64, dt: f64) -> Result<MultiplicativeTreeParams> {
    check_inputs(sigma, r, dt)?;
    let mu = r - 0.5 * sigma * sigma;
    let up = (mu * dt + sigma * dt.sqrt()).exp();
    let down = (mu * dt - sigma * dt.sqrt()).exp();
    MultiplicativeTreeParams::checked(up, down, 0.5, dt)
}

/// Drift term used by [`trigeorgis_params_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigeorgisDrift {
    /// `m = (r^2 - σ^2/2) Δt`, `H = √(K + (mK)^2)`, `p = ½(1 + mK/H)`.
    #[default]
    AsPrinted,
    /// `m = (r - σ^2/2) Δt`, `H = √(K + m^2)`, `p = ½(1 + m/H)`.
    Standard,
}

pub fn trigeorgis_params(sigma: f64, r: f64, dt: f64) -> Result<MultiplicativeTreeParams> {
    trigeorgis_params_with(sigma, r, dt, TrigeorgisDrift::AsPrinted)
}

pub fn trigeorgis_params_with(
    sigma: f64,
    r: f64,
    dt: f64,
    drift: TrigeorgisDrift,
) -> Result<MultiplicativeTreeParams> {
    check_inputs(sigma, r, dt)?;
    let k = sigma * sigma * dt;
    let (h, p) = match drift {
        TrigeorgisDrift::AsPrinted => {
            let m = (r * r - 0.5 * sigma * sigma) * dt;
            let h = (k + (m * k).powi(2)).sqrt();
            (h, 0.5 * (1.0 + m * k / h))
        }
        TrigeorgisDrift::Standard => {
            let m = (r - 0.5 * sigma * sigma) * dt;
            let h = (k + m * m).sqrt();
            (h, 0.5 * (1.0 + m / h))
        }
    };
    MultiplicativeTreeParams::checked(h.exp(), (-h).exp(), p, dt)
}

/// Backward induction on `s0 U^j D^(n-j)` with probability `p_rn` and
/// discount `e^{-r Δt}` per step.
pub fn price_multiplicative(
    params: &MultiplicativeTreeParams,
    n_steps: usize,
    s0: f64,
    contract: &OptionContract,
    r: f64,
) -> Result<PricingResult> {
    if n_steps == 0 {
        return Err(GrstError::invalid("n_steps must be at least 1"));
    }
    if !(s0 > 0.0) {
        return Err(GrstError::invalid(
            "spot must be positive for a multiplicative tree",
        ));
    }
    let horizon = n_steps as f64 * params.dt;
    if (horizon - contract.expiry).abs() > 1e-9 * contract.expiry.max(1.0) {
        return Err(GrstError::invalid(format!(
            "expiry {} does not equal n_steps * dt = {horizon}",
            contract.expiry
        )));
    }
    let (lu, ld) = (params.up.ln(), params.down.ln());
    let node = |n: usize, j: usize| s0 * (j as f64 * lu + (n - j) as f64 * ld).exp();
    let p = params.p_rn;
    let discount = (-r * params.dt).exp();
    let american = contract.exercise == ExerciseStyle::American;

    let mut values: Vec<f64> = (0..=n_steps)
        .map(|j| payoff(contract, node(n_steps, j)))
        .collect();
    let mut delta = 0.0;
    for n in (0..n_steps).rev() {
        if n == 0 {
            delta = (values[1] - values[0]) / (node(1, 1) - node(1, 0));
        }
        for j in 0..=n {
            let hold = discount * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = if american {
                hold.max(payoff(contract, node(n, j)))
            } else {
                hold
            };
        }
        values.truncate(n + 1);
    }
    Ok(PricingResult {
        price: values[0],
        root_delta: delta,
        component_prices: vec![values[0]],
        component_weights: vec![1.0],
    })
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn check_closed_form(strike: f64, sigma: f64, t: f64, r: f64) -> Result<()> {
    if !(sigma > 0.0) || !(t > 0.0) {
        return Err(GrstError::invalid("sigma and T must be positive"));
    }
    if !strike.is_finite() || !r.is_finite() {
        return Err(GrstError::invalid("strike and rate must be finite"));
    }
    Ok(())
}

/// Lognormal closed form.
pub fn black_scholes(
    s0: f64,
    strike: f64,
    r: f64,
    sigma: f64,
    t: f64,
    kind: OptionKind,
) -> Result<f64> {
    check_closed_form(strike, sigma, t, r)?;
    if !(s0 > 0.0) || !(strike > 0.0) {
        return Err(GrstError::invalid("spot and strike must be positive"));
    }
    let n = std_normal();
    let vol = sigma * t.sqrt();
    let d1 = ((s0 / strike).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    let df = (-r * t).exp();
    Ok(match kind {
        OptionKind::Call => s0 * n.cdf(d1) - strike * df * n.cdf(d2),
        OptionKind::Put => strike * df * n.cdf(-d2) - s0 * n.cdf(-d1),
    })
}

/// Normal-model closed form on the forward `s0 e^{rT}` with absolute volatility.
pub fn bachelier(
    s0: f64,
    strike: f64,
    r: f64,
    sigma_abs: f64,
    t: f64,
    kind: OptionKind,
) -> Result<f64> {
    check_closed_form(strike, sigma_abs, t, r)?;
    if !s0.is_finite() {
        return Err(GrstError::invalid("spot must be finite"));
    }
    let n = std_normal();
    let forward = s0 * (r * t).exp();
    let vol = sigma_abs * t.sqrt();
    let d = (forward - strike) / vol;
    let df = (-r * t).exp();
    Ok(match kind {
        OptionKind::Call => df * ((forward - strike) * n.cdf(d) + vol * n.pdf(d)),
        OptionKind::Put => df * ((strike - forward) * n.cdf(-d) + vol * n.pdf(d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ by composite Simpson quadrature of the density, independent of statrs.
    fn phi_quadrature(x: f64) -> f64 {
        let n = 2_000;
        let h = x / n as f64;
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    fn call(strike: f64, t: f64) -> OptionContract {
        OptionContract::european(OptionKind::Call, strike, t).unwrap()
    }

    fn put(strike: f64, t: f64) -> OptionContract {
        OptionContract::european(OptionKind::Put, strike, t).unwrap()
    }

    #[test]
    fn crr_examples() {
        let p = crr_params(0.2, 0.0, 0.01).unwrap();
        assert!((p.up - 1.020201).abs() < 1e-6);
        assert!((p.down - 0.980199).abs() < 1e-6);
        assert!((p.up * p.down - 1.0).abs() < 1e-15);
        let fine = crr_params(0.2, 0.0, 1e-6).unwrap();
        assert!((fine.p_rn - 0.5).abs() < 1e-4);
        assert!(crr_params(0.01, 5.0, 1.0).is_err());
    }

    #[test]
    fn tian_matches_three_moments() {
        let (sigma, r, dt) = (0.3, 0.05, 0.1);
        let p = tian_params(sigma, r, dt).unwrap();
        let m1 = (r * dt).exp();
        let m2 = ((2.0 * r + sigma * sigma) * dt).exp();
        let m3 = ((3.0 * r + 3.0 * sigma * sigma) * dt).exp();
        let q = p.p_rn;
        assert!((q * p.up + (1.0 - q) * p.down - m1).abs() < 1e-10);
        assert!((q * p.up.powi(2) + (1.0 - q) * p.down.powi(2) - m2).abs() < 1e-10);
        assert!((q * p.up.powi(3) + (1.0 - q) * p.down.powi(3) - m3).abs() < 1e-10);
    }

    #[test]
    fn tian_degenerate_and_vn() {
        assert!(tian_params(1e-10, 0.0, 0.01).is_err());
        let vn = (0.2f64 * 0.2 * 1.0).exp();
        assert!((vn - 1.040811).abs() < 1e-6);
        assert!(tian_params(0.2, 0.0, 1.0).is_ok());
    }

    #[test]
    fn jr_examples() {
        let p = jr_params(0.2, 0.02, 1.0).unwrap();
        assert!((p.up - 0.2f64.exp()).abs() < 1e-14);
        assert!((p.down - (-0.2f64).exp()).abs() < 1e-14);
        for (s, r, dt) in [(0.1, 0.0, 0.01), (0.4, 0.05, 0.1)] {
            let p = jr_params(s, r, dt).unwrap();
            assert_eq!(p.p_rn, 0.5);
            assert!((p.up / p.down - (2.0 * s * dt.sqrt()).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn trigeorgis_examples() {
        let p = trigeorgis_params(0.2, 0.1, 0.01).unwrap();
        assert!((p.up.ln() - 0.02).abs() < 1e-9);
        assert!((p.up * p.down - 1.0).abs() < 1e-15);
        let r = (0.5f64 * 0.3 * 0.3).sqrt();
        let sym = trigeorgis_params(0.3, r, 0.05).unwrap();
        assert!((sym.p_rn - 0.5).abs() < 1e-15);
        let std = trigeorgis_params_with(0.2, 0.1, 0.01, TrigeorgisDrift::Standard).unwrap();
        let m = (0.1 - 0.02) * 0.01;
        assert!((std.up.ln() - (4e-4f64 + m * m).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn one_step_multiplicative() {
        let params = MultiplicativeTreeParams {
            up: 1.1,
            down: 0.9,
            p_rn: 0.5,
            dt: 1.0,
        };
        let r = price_multiplicative(&params, 1, 100.0, &call(100.0, 1.0), 0.0).unwrap();
        assert!((r.price - 5.0).abs() < 1e-12);
        assert!(price_multiplicative(&params, 2, 100.0, &call(100.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn crr_converges_to_black_scholes() {
        let bs = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0, OptionKind::Call).unwrap();
        let err = |n: usize| {
            let p = crr_params(0.2, 0.05, 1.0 / n as f64).unwrap();
            (price_multiplicative(&p, n, 100.0, &call(100.0, 1.0), 0.05)
                .unwrap()
                .price
                - bs)
                .abs()
        };
        let (e256, e512, e1024) = (err(256), err(512), err(1024));
        assert!(e1024 / bs < 1e-3);
        assert!(e1024 < e512 && e512 < e256, "{e256} {e512} {e1024}");
    }

    #[test]
    fn parity_for_every_parameterisation() {
        let (s0, k, r, sigma, t, n) = (100.0, 95.0, 0.04, 0.25, 1.0, 200);
        let dt = t / n as f64;
        let trees = [
            crr_params(sigma, r, dt).unwrap(),
            tian_params(sigma, r, dt).unwrap(),
            jr_params(sigma, r, dt).unwrap(),
            trigeorgis_params(sigma, r, dt).unwrap(),
            trigeorgis_params_with(sigma, r, dt, TrigeorgisDrift::Standard).unwrap(),
        ];
        for p in trees {
            let c = price_multiplicative(&p, n, s0, &call(k, t), r)
                .unwrap()
                .price;
            let pp = price_multiplicative(&p, n, s0, &put(k, t), r)
                .unwrap()
                .price;
            // forward implied by the tree's own probability
            let growth = p.p_rn * p.up + (1.0 - p.p_rn) * p.down;
            let forward = s0 * growth.powi(n as i32);
            let rhs = (-r * t).exp() * (forward - k);
            assert!((c - pp - rhs).abs() < 1e-10, "{p:?}: {}", c - pp - rhs);
        }
        for p in &trees[..2] {
            let c = price_multiplicative(p, n, s0, &call(k, t), r)
                .unwrap()
                .price;
            let pp = price_multiplicative(p, n, s0, &put(k, t), r).unwrap().price;
            assert!((c - pp - (s0 - k * (-r * t).exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn black_scholes_oracle() {
        let expected = 100.0 * (2.0 * phi_quadrature(0.1) - 1.0);
        let c = black_scholes(100.0, 100.0, 0.0, 0.2, 1.0, OptionKind::Call).unwrap();
        assert!((c - expected).abs() < 1e-10);
        assert!((c - 7.9656).abs() < 5e-4);

        let deep = black_scholes(100.0, 1e-6, 0.0, 0.2, 1.0, OptionKind::Call).unwrap();
        assert!((deep - 100.0).abs() < 1e-5);

        for (k, r, t) in [(90.0, 0.05, 0.5), (120.0, 0.01, 2.0)] {
            let c = black_scholes(100.0, k, r, 0.3, t, OptionKind::Call).unwrap();
            let p = black_scholes(100.0, k, r, 0.3, t, OptionKind::Put).unwrap();
            assert!((c - p - (100.0 - k * (-r * t).exp())).abs() < 1e-12);
        }
        assert!(black_scholes(100.0, 100.0, 0.0, 0.0, 1.0, OptionKind::Call).is_err());
    }

    #[test]
    fn normal_cdf_accuracy() {
        let n = std_normal();
        for x in [-3.0, -1.2, 0.1, 0.5, 2.2] {
            assert!(
                (n.cdf(x) - phi_quadrature(x)).abs() < 1e-10,
                "{x}: {}",
                n.cdf(x) - phi_quadrature(x)
            );
        }
    }

    #[test]
    fn bachelier_oracle() {
        let atm = bachelier(100.0, 100.0, 0.0, 20.0, 1.0, OptionKind::Call).unwrap();
        assert!((atm - 20.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((atm - 7.9788).abs() < 5e-4);
        let c = bachelier(100.0, 100.0, 0.0, 7.0, 0.25, OptionKind::Call).unwrap();
        assert!((c - 7.0 * (0.25 / (2.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-12);
        for k in [80.0, 100.0, 115.0] {
            let c = bachelier(100.0, k, 0.0, 12.0, 0.7, OptionKind::Call).unwrap();
            let p = bachelier(100.0, k, 0.0, 12.0, 0.7, OptionKind::Put).unwrap();
            assert!((c - p - (100.0 - k)).abs() < 1e-12);
        }
        let c = bachelier(100.0, 105.0, 0.03, 12.0, 0.7, OptionKind::Call).unwrap();
        let p = bachelier(100.0, 105.0, 0.03, 12.0, 0.7, OptionKind::Put).unwrap();
        assert!((c - p - (100.0 - 105.0 * (-0.03f64 * 0.7).exp())).abs() < 1e-12);
    }
}
