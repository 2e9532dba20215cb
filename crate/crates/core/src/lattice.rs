//! Recombining lattices and the additive equal-probability tree.
//!
//! Every tree in this crate uses the same indexing: layer `n` has `n + 1`
//! nodes stored in strictly increasing order, and node `(n, i)` branches to
//! `(n + 1, i)` (down) and `(n + 1, i + 1)` (up), each with probability 1/2.
//! Values are stored explicitly per layer because split segments move each
//! node by a different amount.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{scaled_tol, GrstError, Result};

/// Branch probability shared by every GRST lattice.
pub const STEP_PROB: f64 = 0.5;

/// Normal target `N(mu, sigma^2)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub t: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(t: f64, mu: f64, sigma: f64) -> Result<Self> {
        let spec = Self { t, mu, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(GrstError::invalid(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(GrstError::invalid(format!(
                "time must be non-negative and finite, got {}",
                self.t
            )));
        }
        if !self.mu.is_finite() {
            return Err(GrstError::invalid("mu must be finite"));
        }
        Ok(())
    }
}

/// Per-step additive moves of an equal-probability tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMoves {
    pub up: f64,
    pub down: f64,
}

impl StepMoves {
    /// Nearest-neighbour spacing `u - d` of any layer built with these moves.
    pub fn spacing(&self) -> f64 {
        self.up - self.down
    }

    pub fn drift(&self) -> f64 {
        0.5 * (self.up + self.down)
    }
}

/// Moves matching mean `mu * dt` and variance `sigma^2 * dt` with `p = 1/2`.
pub fn grst0_step_moves(mu: f64, sigma: f64, dt: f64) -> Result<StepMoves> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GrstError::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GrstError::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !mu.is_finite() {
        return Err(GrstError::invalid("mu must be finite"));
    }
    let drift = mu * dt;
    let spread = sigma * dt.sqrt();
    Ok(StepMoves {
        up: drift + spread,
        down: drift - spread,
    })
}

/// Distance between adjacent nodes of a layer, `u - d = 2 sigma sqrt(dt)`.
pub fn nn_lattice_distance(sigma: f64, dt: f64) -> Result<f64> {
    grst0_step_moves(0.0, sigma, dt).map(|m| m.spacing())
}

/// Probability mass function over the nodes of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    pub support: Vec<f64>,
    pub mass: Vec<f64>,
}

impl DiscretePmf {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(s, m)| s * m)
            .sum()
    }

    /// Central second moment (two-pass).
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(s, m)| m * (s - mean) * (s - mean))
            .sum()
    }

    /// Expectation of `f` under this mass function.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(&s, m)| m * f(s))
            .sum()
    }
}

/// Layered recombining lattice of node values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeWire", into = "TreeWire")]
pub struct RecombiningTree {
    times: Vec<f64>,
    layers: Vec<Vec<f64>>,
    root_value: f64,
    step_prob: f64,
}

#[derive(Serialize, Deserialize)]
struct TreeWire {
    times: Vec<f64>,
    layers: Vec<Vec<f64>>,
    root_value: f64,
    step_prob: f64,
}

impl TryFrom<TreeWire> for RecombiningTree {
    type Error = GrstError;

    fn try_from(w: TreeWire) -> Result<Self> {
        if (w.step_prob - STEP_PROB).abs() > 0.0 {
            return Err(GrstError::invalid(format!(
                "step_prob must be 1/2, got {}",
                w.step_prob
            )));
        }
        let tree = RecombiningTree::from_layers(w.times, w.layers)?;
        if tree.root_value != w.root_value {
            return Err(GrstError::invalid(
                "root_value does not match the single node of layer 0",
            ));
        }
        Ok(tree)
    }
}

impl From<RecombiningTree> for TreeWire {
    fn from(t: RecombiningTree) -> Self {
        TreeWire {
            times: t.times,
            layers: t.layers,
            root_value: t.root_value,
            step_prob: t.step_prob,
        }
    }
}

impl RecombiningTree {
    /// Validates and wraps explicit layers. Layer `n` must hold `n + 1`
    /// strictly increasing finite values and times must strictly increase.
    pub fn from_layers(times: Vec<f64>, layers: Vec<Vec<f64>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(GrstError::invalid("tree must have at least one layer"));
        }
        if times.len() != layers.len() {
            return Err(GrstError::invalid(format!(
                "{} times for {} layers",
                times.len(),
                layers.len()
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GrstError::invalid(format!(
                    "layer times must strictly increase ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(GrstError::invalid("layer times must be finite"));
        }
        for (n, layer) in layers.iter().enumerate() {
            if layer.len() != n + 1 {
                return Err(GrstError::construction(format!(
                    "layer {n} has {} nodes, expected {}",
                    layer.len(),
                    n + 1
                )));
            }
            if layer.iter().any(|v| !v.is_finite()) {
                return Err(GrstError::construction(format!(
                    "layer {n} contains a non-finite value"
                )));
            }
            check_strictly_increasing(layer).map_err(|i| {
                GrstError::construction(format!(
                    "layer {n} is not strictly increasing at index {i} ({} then {})",
                    layer[i],
                    layer[i + 1]
                ))
            })?;
        }
        let root_value = layers[0][0];
        Ok(Self {
            times,
            layers,
            root_value,
            step_prob: STEP_PROB,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn layer(&self, n: usize) -> Result<&[f64]> {
        self.layers
            .get(n)
            .map(Vec::as_slice)
            .ok_or(GrstError::LayerOutOfRange {
                index: n,
                layers: self.layers.len(),
            })
    }

    pub fn root_value(&self) -> f64 {
        self.root_value
    }

    pub fn step_prob(&self) -> f64 {
        self.step_prob
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Number of branching steps (`num_layers - 1`).
    pub fn steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("tree has at least one layer")
    }

    /// Index of the layer at time `t`, within a relative tolerance of `1e-9`.
    pub fn layer_at_time(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&x| (x - t).abs() <= tol)
    }

    /// Graphviz rendering; labels carry six significant digits.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        let _ = writeln!(out, "  rankdir=LR;");
        let _ = writeln!(out, "  node [shape=circle, fontsize=10];");
        for (n, layer) in self.layers.iter().enumerate() {
            for (i, v) in layer.iter().enumerate() {
                let _ = writeln!(out, "  n{n}_{i} [label=\"{}\"];", format_sig(*v, 6));
            }
        }
        for n in 0..self.steps() {
            for i in 0..self.layers[n].len() {
                let _ = writeln!(out, "  n{n}_{i} -> n{}_{};", n + 1, i + 1);
                let _ = writeln!(out, "  n{n}_{i} -> n{}_{};", n + 1, i);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Returns the first index `i` where `v[i + 1] <= v[i]` beyond tolerance.
pub(crate) fn check_strictly_increasing(v: &[f64]) -> std::result::Result<(), usize> {
    for (i, w) in v.windows(2).enumerate() {
        if !(w[1] - w[0] > scaled_tol(w[1].abs().max(w[0].abs()))) {
            return Err(i);
        }
    }
    Ok(())
}

/// `%g`-style formatting with `digits` significant digits.
pub(crate) fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Additive equal-probability tree from `root_value` at `t_start` to `t_end`.
///
/// Node `(n, j)` holds `root + j u + (n - j) d` with `(u, d)` from
/// [`grst0_step_moves`] at `dt = (t_end - t_start) / steps`.
pub fn build_grst0(
    root_value: f64,
    mu: f64,
    sigma: f64,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<RecombiningTree> {
    if steps == 0 {
        return Err(GrstError::invalid("steps must be at least 1"));
    }
    if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(GrstError::invalid(format!(
            "invalid time range [{t_start}, {t_end}]"
        )));
    }
    if !root_value.is_finite() {
        return Err(GrstError::invalid("root value must be finite"));
    }
    let dt = (t_end - t_start) / steps as f64;
    let moves = grst0_step_moves(mu, sigma, dt)?;
    let layers = (0..=steps)
        .map(|n| additive_layer(root_value, moves, n))
        .collect();
    let times = (0..=steps)
        .map(|n| {
            if n == steps {
                t_end
            } else {
                t_start + n as f64 * dt
            }
        })
        .collect();
    RecombiningTree::from_layers(times, layers)
}

fn additive_layer(root: f64, moves: StepMoves, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| root + j as f64 * moves.up + (n - j) as f64 * moves.down)
        .collect()
}

/// Forward induction of path probability onto layer `n`.
pub fn layer_pmf(tree: &RecombiningTree, n: usize) -> Result<DiscretePmf> {
    let support = tree.layer(n)?.to_vec();
    let p = tree.step_prob();
    let mut mass = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; mass.len() + 1];
        for (i, m) in mass.iter().enumerate() {
            next[i] += (1.0 - p) * m;
            next[i + 1] += p * m;
        }
        mass = next;
    }
    Ok(DiscretePmf { support, mass })
}

/// Mean and variance of layer `n`.
pub fn layer_moments(tree: &RecombiningTree, n: usize) -> Result<(f64, f64)> {
    let pmf = layer_pmf(tree, n)?;
    Ok((pmf.mean(), pmf.variance()))
}
