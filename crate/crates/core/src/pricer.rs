//! Backward-induction pricing by one-step replication.
//!
//! The branch probability `1/2` used to build a tree is the sampling measure.
//! Pricing uses the replication probability of each node instead,
//! `q = (S e^{r dt} - S_d) / (S_u - S_d)`, because split segments move every
//! node by a different amount.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GrstError, Result};
use crate::lattice::RecombiningTree;
use crate::split::GrstMixture;

/// Slack allowed on `q` for rounding before a node counts as an arbitrage.
const Q_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    European,
    American,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContractWire", into = "ContractWire")]
pub struct OptionContract {
    pub kind: OptionKind,
    pub strike: f64,
    pub expiry: f64,
    pub exercise: ExerciseStyle,
}

#[derive(Serialize, Deserialize)]
struct ContractWire {
    kind: OptionKind,
    strike: f64,
    expiry: f64,
    exercise: ExerciseStyle,
}

impl TryFrom<ContractWire> for OptionContract {
    type Error = GrstError;

    fn try_from(w: ContractWire) -> Result<Self> {
        OptionContract::new(w.kind, w.strike, w.expiry, w.exercise)
    }
}

impl From<OptionContract> for ContractWire {
    fn from(c: OptionContract) -> Self {
        ContractWire {
            kind: c.kind,
            strike: c.strike,
            expiry: c.expiry,
            exercise: c.exercise,
        }
    }
}

impl OptionContract {
    pub fn new(
        kind: OptionKind,
        strike: f64,
        expiry: f64,
        exercise: ExerciseStyle,
    ) -> Result<Self> {
        if !strike.is_finite() {
            return Err(GrstError::invalid("strike must be finite"));
        }
        if !(expiry > 0.0) || !expiry.is_finite() {
            return Err(GrstError::invalid(format!(
                "expiry must be positive, got {expiry}"
            )));
        }
        Ok(Self {
            kind,
            strike,
            expiry,
            exercise,
        })
    }

    pub fn european(kind: OptionKind, strike: f64, expiry: f64) -> Result<Self> {
        Self::new(kind, strike, expiry, ExerciseStyle::European)
    }

    pub fn american(kind: OptionKind, strike: f64, expiry: f64) -> Result<Self> {
        Self::new(kind, strike, expiry, ExerciseStyle::American)
    }
}

/// Intrinsic value of `contract` at underlying price `s`.
pub fn payoff(contract: &OptionContract, s: f64) -> f64 {
    match contract.kind {
        OptionKind::Call => (s - contract.strike).max(0.0),
        OptionKind::Put => (contract.strike - s).max(0.0),
    }
}

/// Price, root hedge ratio and (for mixtures) the per-component breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ResultWire", into = "ResultWire")]
pub struct PricingResult {
    pub price: f64,
    pub root_delta: f64,
    pub component_prices: Vec<f64>,
    pub component_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ResultWire {
    price: f64,
    root_delta: f64,
    components: Vec<ComponentWire>,
}

#[derive(Serialize, Deserialize)]
struct ComponentWire {
    weight: f64,
    price: f64,
}

impl From<ResultWire> for PricingResult {
    fn from(w: ResultWire) -> Self {
        PricingResult {
            price: w.price,
            root_delta: w.root_delta,
            component_weights: w.components.iter().map(|c| c.weight).collect(),
            component_prices: w.components.iter().map(|c| c.price).collect(),
        }
    }
}

impl From<PricingResult> for ResultWire {
    fn from(r: PricingResult) -> Self {
        ResultWire {
            price: r.price,
            root_delta: r.root_delta,
            components: r
                .component_weights
                .iter()
                .zip(&r.component_prices)
                .map(|(&weight, &price)| ComponentWire { weight, price })
                .collect(),
        }
    }
}

/// Value and root delta of an arbitrary payoff `f` paid at `expiry`.
///
/// `early_exercise` takes `max(continuation, f(S))` at every node before expiry.
pub fn price_claim<F>(
    tree: &RecombiningTree,
    expiry: f64,
    r: f64,
    early_exercise: bool,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !r.is_finite() {
        return Err(GrstError::invalid("rate must be finite"));
    }
    if expiry > tree.final_time() * (1.0 + 1e-9) {
        return Err(GrstError::invalid(format!(
            "expiry {expiry} is beyond the last tree time {}",
            tree.final_time()
        )));
    }
    let last = tree.layer_at_time(expiry).ok_or_else(|| {
        GrstError::invalid(format!("expiry {expiry} is not on the tree's time grid"))
    })?;
    if last == 0 {
        return Err(GrstError::invalid("expiry must be after the root"));
    }
    let layers = tree.layers();
    let times = tree.times();

    let mut values: Vec<f64> = layers[last].iter().map(|&s| f(s)).collect();
    let mut delta = 0.0;
    for n in (0..last).rev() {
        let dt = times[n + 1] - times[n];
        let growth = (r * dt).exp();
        let discount = (-r * dt).exp();
        let here = &layers[n];
        let next = &layers[n + 1];
        if n == 0 {
            delta = (values[1] - values[0]) / (next[1] - next[0]);
        }
        let mut rolled = Vec::with_capacity(here.len());
        for (i, &s) in here.iter().enumerate() {
            let (s_down, s_up) = (next[i], next[i + 1]);
            let q = (s * growth - s_down) / (s_up - s_down);
            if !(-Q_SLACK..=1.0 + Q_SLACK).contains(&q) {
                return Err(GrstError::Arbitrage {
                    layer: n,
                    index: i,
                    q,
                });
            }
            let hold = discount * (q * values[i + 1] + (1.0 - q) * values[i]);
            rolled.push(if early_exercise { hold.max(f(s)) } else { hold });
        }
        values = rolled;
    }
    Ok((values[0], delta))
}

pub fn price_tree(
    tree: &RecombiningTree,
    contract: &OptionContract,
    r: f64,
) -> Result<PricingResult> {
    let american = contract.exercise == ExerciseStyle::American;
    let (price, root_delta) =
        price_claim(tree, contract.expiry, r, american, |s| payoff(contract, s))?;
    Ok(PricingResult {
        price,
        root_delta,
        component_prices: vec![price],
        component_weights: vec![1.0],
    })
}

/// Prices every component and combines them as `sum_i pi_i f(S_i)`.
pub fn price_mixture(
    mix: &GrstMixture,
    contract: &OptionContract,
    r: f64,
) -> Result<PricingResult> {
    let parts = mix
        .components()
        .par_iter()
        .enumerate()
        .map(|(index, tree)| {
            price_tree(tree, contract, r).map_err(|e| GrstError::Component {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = mix.weights().to_vec();
    let component_prices: Vec<f64> = parts.iter().map(|p| p.price).collect();
    let price = weights
        .iter()
        .zip(&component_prices)
        .map(|(w, p)| w * p)
        .sum();
    let root_delta = weights
        .iter()
        .zip(&parts)
        .map(|(w, p)| w * p.root_delta)
        .sum();
    Ok(PricingResult {
        price,
        root_delta,
        component_prices,
        component_weights: weights,
    })
}
