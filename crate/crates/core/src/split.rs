//! Split construction: connecting one Gaussian lattice to the next.
//!
//! A split segment starts at the last layer of the tree built so far (an
//! evenly spaced lattice of `n` nodes centred on `mu_1`) and ends, `k - 1`
//! steps later, on `n + k - 1` nodes that are the affine image of the
//! equal-probability continuation of that lattice. Because the segment is a
//! recombining tree with `p = 1/2`, the end layer keeps the binomial masses of
//! the continuation, so its mean and variance are exactly those of the target.
//!
//! Intermediate layers are read off the straight lines joining the two
//! half-spacing lattices (`lattice_flow`), keeping only entries reachable from
//! the start nodes (`reduce_to_split_segment`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{scaled_tol, GrstError, Result};
use crate::lattice::{
    build_grst0, check_strictly_increasing, layer_moments, GaussianSpec, RecombiningTree, StepMoves,
};

/// Affine map `z = a x + b` sending one normal onto another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub a: f64,
    pub b: f64,
}

/// Scale and shift taking `g1` to `g2`: `a = sigma_2 / sigma_1`, `b = mu_2 - a mu_1`.
pub fn affine_params(g1: &GaussianSpec, g2: &GaussianSpec) -> Result<AffineParams> {
    g1.validate()?;
    g2.validate()?;
    let a = g2.sigma / g1.sigma;
    Ok(AffineParams {
        a,
        b: g2.mu - a * g1.mu,
    })
}

/// Applies `ap` elementwise.
pub fn map_lattice(s1_star: &[f64], ap: AffineParams) -> Result<Vec<f64>> {
    if !(ap.a > 0.0) || !ap.a.is_finite() || !ap.b.is_finite() {
        return Err(GrstError::invalid(format!(
            "affine scale must be positive and finite, got a = {}",
            ap.a
        )));
    }
    if check_strictly_increasing(s1_star).is_err() {
        return Err(GrstError::invalid(
            "lattice to map must be strictly increasing",
        ));
    }
    Ok(s1_star.iter().map(|x| ap.a * x + ap.b).collect())
}

/// Ordered Gaussian targets a split tree must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GaussianSpec>", into = "Vec<GaussianSpec>")]
pub struct MarginalSchedule {
    entries: Vec<GaussianSpec>,
}

impl MarginalSchedule {
    pub fn new(entries: Vec<GaussianSpec>) -> Result<Self> {
        if entries.is_empty() {
            return Err(GrstError::invalid(
                "schedule must contain at least one entry",
            ));
        }
        for e in &entries {
            e.validate()?;
        }
        for w in entries.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(GrstError::invalid(format!(
                    "schedule times must strictly increase ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[GaussianSpec] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The same schedule with every mean shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| GaussianSpec {
                    mu: e.mu + offset,
                    ..*e
                })
                .collect(),
        }
    }
}

impl TryFrom<Vec<GaussianSpec>> for MarginalSchedule {
    type Error = GrstError;

    fn try_from(v: Vec<GaussianSpec>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MarginalSchedule> for Vec<GaussianSpec> {
    fn from(s: MarginalSchedule) -> Self {
        s.entries
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(GrstError::invalid(format!(
            "k must be odd and at least 3, got {k}"
        )));
    }
    Ok(())
}

/// Continues an evenly spaced leaf layer by `steps` equal-probability moves.
///
/// Returns the `n + steps` reachable values and the Gaussian they represent at
/// `t2`: `mu* = mu + steps (u + d) / 2`, `sigma*^2 = sigma^2 + steps (u - d)^2 / 4`.
pub fn extend_lattice(
    leaf: &[f64],
    g1: &GaussianSpec,
    t2: f64,
    steps: usize,
    moves: StepMoves,
) -> Result<(Vec<f64>, GaussianSpec)> {
    g1.validate()?;
    let n = leaf.len();
    if n == 0 || n.is_multiple_of(2) {
        return Err(GrstError::invalid(format!(
            "leaf layer must have an odd number of nodes, got {n}"
        )));
    }
    let spacing = moves.spacing();
    if !(spacing > 0.0) || !spacing.is_finite() || !moves.drift().is_finite() {
        return Err(GrstError::invalid("moves must satisfy u > d"));
    }
    if steps > 0 && !(t2 > g1.t) {
        return Err(GrstError::invalid(format!(
            "extension must end after t1 = {} (got t2 = {t2})",
            g1.t
        )));
    }
    let centre_idx = (n - 1) / 2;
    let centre = leaf[centre_idx];
    if (centre - g1.mu).abs() > 1e-9 * g1.mu.abs().max(1.0) {
        return Err(GrstError::invalid(format!(
            "leaf centre {centre} does not match mu = {}",
            g1.mu
        )));
    }
    for (j, &v) in leaf.iter().enumerate() {
        let expected = centre + (j as f64 - centre_idx as f64) * spacing;
        if (v - expected).abs() > 1e-9 * v.abs().max(spacing).max(1.0) {
            return Err(GrstError::invalid(format!(
                "leaf node {j} = {v} is off the lattice of spacing u - d = {spacing}"
            )));
        }
    }
    let len = n + steps;
    let centre_star = centre + steps as f64 * moves.drift();
    let half = (len - 1) / 2;
    let extended = (0..len)
        .map(|j| {
            if j == half {
                centre_star
            } else {
                centre_star + (j as f64 - half as f64) * spacing
            }
        })
        .collect();
    let g_star = GaussianSpec {
        t: if steps == 0 { g1.t } else { t2 },
        mu: g1.mu + steps as f64 * moves.drift(),
        sigma: (g1.variance() + steps as f64 * spacing * spacing / 4.0).sqrt(),
    };
    Ok((extended, g_star))
}

/// [`extend_lattice`] with the `k - 1` extension steps of a split.
pub fn extend_tree(
    leaf: &[f64],
    g1: &GaussianSpec,
    t2: f64,
    k: usize,
    moves: StepMoves,
) -> Result<(Vec<f64>, GaussianSpec)> {
    check_k(k)?;
    extend_lattice(leaf, g1, t2, k - 1, moves)
}

/// Embeds both lattices on half-spacing grids of common length `2 len(s2) - 1`
/// (`4k - 3` for the first split), aligned on their centre elements.
///
/// Entries that coincide with a supplied node keep that node's exact value.
pub fn augment_lattices(s1: &[f64], s2: &[f64], l1: f64, l2: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if s1.is_empty() || s1.len().is_multiple_of(2) || s2.len().is_multiple_of(2) {
        return Err(GrstError::construction(format!(
            "lattices need odd lengths to align centres (got {} and {})",
            s1.len(),
            s2.len()
        )));
    }
    if s2.len() < s1.len() {
        return Err(GrstError::construction(format!(
            "end lattice ({}) shorter than start lattice ({})",
            s2.len(),
            s1.len()
        )));
    }
    for l in [l1, l2] {
        if !(l > 0.0) || !l.is_finite() {
            return Err(GrstError::invalid(format!(
                "lattice spacing must be positive, got {l}"
            )));
        }
    }
    let p = 2 * s2.len() - 1;
    Ok((embed(s1, l1 / 2.0, p)?, embed(s2, l2 / 2.0, p)?))
}

fn embed(nodes: &[f64], half: f64, p: usize) -> Result<Vec<f64>> {
    let c = (p - 1) / 2;
    let centre = nodes[(nodes.len() - 1) / 2];
    let mut grid: Vec<f64> = (0..p)
        .map(|i| centre + (i as f64 - c as f64) * half)
        .collect();
    for &v in nodes {
        let offset = ((v - centre) / half).round();
        let tol = (1e-9 * v.abs().max(1.0)).min(0.25 * half);
        let idx = c as f64 + offset;
        if !(idx >= 0.0 && idx < p as f64) || (v - (centre + offset * half)).abs() > tol {
            return Err(GrstError::construction(format!(
                "node {v} does not align with the half-spacing lattice around {centre}"
            )));
        }
        grid[idx as usize] = v;
    }
    grid[c] = centre;
    Ok(grid)
}

/// Straight-line flow between two augmented lattices.
///
/// `lambda[m - 1]` is column `m` of the `p x (k - 1)` matrix
/// `theta t^T + S_t1 1^T`, i.e. every flow line evaluated at `t1 + m dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFlow {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub t1: f64,
    pub t2: f64,
    pub dt: f64,
}

impl LatticeFlow {
    /// `(p, k - 1)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.start.len(), self.lambda.len())
    }
}

pub fn lattice_flow(s_t1: &[f64], s_t2: &[f64], t1: f64, t2: f64, k: usize) -> Result<LatticeFlow> {
    check_k(k)?;
    if s_t1.len() != s_t2.len() {
        return Err(GrstError::invalid(format!(
            "augmented lattices differ in length ({} vs {})",
            s_t1.len(),
            s_t2.len()
        )));
    }
    let p = s_t1.len();
    if p.is_multiple_of(2) || p.div_ceil(2) < k {
        return Err(GrstError::construction(format!(
            "augmented length {p} is incompatible with k = {k}"
        )));
    }
    if !(t2 > t1) || !t1.is_finite() || !t2.is_finite() {
        return Err(GrstError::invalid(format!(
            "need t2 > t1, got [{t1}, {t2}]"
        )));
    }
    let steps = k - 1;
    let span = t2 - t1;
    let dt = span / steps as f64;
    let contraction = |step: usize, time: f64, i: usize| GrstError::Contraction {
        step,
        time,
        detail: format!("flow lines {i} and {} cross or touch", i + 1),
    };
    check_strictly_increasing(s_t1).map_err(|i| contraction(0, t1, i))?;
    check_strictly_increasing(s_t2).map_err(|i| contraction(steps, t2, i))?;

    let theta: Vec<f64> = s_t1.iter().zip(s_t2).map(|(a, b)| (b - a) / span).collect();
    let mut lambda = Vec::with_capacity(steps);
    for m in 1..=steps {
        let column: Vec<f64> = if m == steps {
            s_t2.to_vec()
        } else {
            let tau = m as f64 * dt;
            s_t1.iter()
                .zip(&theta)
                .map(|(s, th)| s + th * tau)
                .collect()
        };
        check_strictly_increasing(&column).map_err(|i| contraction(m, t1 + m as f64 * dt, i))?;
        lambda.push(column);
    }
    Ok(LatticeFlow {
        start: s_t1.to_vec(),
        end: s_t2.to_vec(),
        theta,
        lambda,
        t1,
        t2,
        dt,
    })
}

/// Layers of one split segment, including its start layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSegment {
    pub times: Vec<f64>,
    pub layers: Vec<Vec<f64>>,
}

/// Keeps, in each column, the alternating entries reachable from the start
/// nodes. Node `i` of one layer links down to node `i` and up to node `i + 1`
/// of the next.
pub fn reduce_to_split_segment(flow: &LatticeFlow) -> Result<SplitSegment> {
    let (p, steps) = flow.shape();
    if steps == 0 || p % 2 == 0 || flow.end.len() != p {
        return Err(GrstError::construction("malformed lattice flow"));
    }
    if p.div_ceil(2) <= steps {
        return Err(GrstError::construction(format!(
            "augmented length {p} leaves no start nodes for {steps} steps"
        )));
    }
    let n = p.div_ceil(2) - steps;
    if n % 2 == 0 {
        return Err(GrstError::construction(format!(
            "start layer of {n} nodes breaks the parity of the half-spacing lattice"
        )));
    }
    let c = (p - 1) / 2;
    let pick = |column: &[f64], reach: usize| -> Vec<f64> {
        (0..=reach).map(|j| column[c - reach + 2 * j]).collect()
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut layers = Vec::with_capacity(steps + 1);
    times.push(flow.t1);
    layers.push(pick(&flow.start, n - 1));
    for m in 1..=steps {
        let layer = pick(&flow.lambda[m - 1], n - 1 + m);
        debug_assert_eq!(layer.len(), n + m);
        let time = if m == steps {
            flow.t2
        } else {
            flow.t1 + m as f64 * flow.dt
        };
        check_strictly_increasing(&layer).map_err(|i| GrstError::Contraction {
            step: m,
            time,
            detail: format!("reduced layer not increasing at node {i}"),
        })?;
        times.push(time);
        layers.push(layer);
    }
    Ok(SplitSegment { times, layers })
}

/// Tree matching `g1` at `g1.t` and `g2` at `g2.t`, rooted at time 0.
pub fn build_grst1(
    g1: &GaussianSpec,
    g2: &GaussianSpec,
    root_value: f64,
    k: usize,
) -> Result<RecombiningTree> {
    build_grst_n(&MarginalSchedule::new(vec![*g1, *g2])?, root_value, k)
}

/// Tree matching every entry of `schedule`: an equal-probability segment from
/// the root (time 0) to the first entry, then one split per further entry,
/// each `k - 1` steps long.
pub fn build_grst_n(
    schedule: &MarginalSchedule,
    root_value: f64,
    k: usize,
) -> Result<RecombiningTree> {
    check_k(k)?;
    if !root_value.is_finite() {
        return Err(GrstError::invalid("root value must be finite"));
    }
    let entries = schedule.entries();
    let first = entries[0];
    if !(first.t > 0.0) {
        return Err(GrstError::invalid(format!(
            "first schedule time must be positive, got {}",
            first.t
        )));
    }
    let steps = k - 1;
    let head = build_grst0(
        root_value,
        (first.mu - root_value) / first.t,
        first.sigma / first.t.sqrt(),
        0.0,
        first.t,
        steps,
    )?;
    let mut times = head.times().to_vec();
    let mut layers = head.layers().to_vec();

    let mut prev_mu = root_value;
    for pair in entries.windows(2) {
        let (g1, g2) = (pair[0], pair[1]);
        let segment = split_segment(layers.last().expect("non-empty"), &g1, &g2, prev_mu, k)?;
        times.extend_from_slice(&segment.times[1..]);
        layers.extend(segment.layers.into_iter().skip(1));
        prev_mu = g1.mu;
    }
    RecombiningTree::from_layers(times, layers)
}

fn split_segment(
    start: &[f64],
    g1: &GaussianSpec,
    g2: &GaussianSpec,
    prev_mu: f64,
    k: usize,
) -> Result<SplitSegment> {
    let n = start.len();
    let steps = k - 1;
    // Per-step moves of the segment that produced `start`: its node spacing and
    // the average drift of its centre line.
    let spacing = (start[n - 1] - start[0]) / (n - 1) as f64;
    let drift = (g1.mu - prev_mu) / steps as f64;
    let moves = StepMoves {
        up: drift + 0.5 * spacing,
        down: drift - 0.5 * spacing,
    };

    let (s_star, g_star) = extend_tree(start, g1, g2.t, k, moves)?;
    let ap = affine_params(&g_star, g2)?;
    let s2 = map_lattice(&s_star, ap)?;
    check_strictly_increasing(&s2).map_err(|i| GrstError::Contraction {
        step: steps,
        time: g2.t,
        detail: format!(
            "target lattice collapses at node {i} (scale a = {:e} below resolution)",
            ap.a
        ),
    })?;
    let (s_t1, s_t2) = augment_lattices(start, &s2, spacing, ap.a * spacing)?;
    let flow = lattice_flow(&s_t1, &s_t2, g1.t, g2.t, k)?;
    let segment = reduce_to_split_segment(&flow)?;

    let first = &segment.layers[0];
    let last = segment.layers.last().expect("segment has layers");
    let same = |a: &[f64], b: &[f64]| {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= scaled_tol(*y))
    };
    if !same(first, start) {
        return Err(GrstError::construction(format!(
            "split at t = {} does not start on the previous layer",
            g1.t
        )));
    }
    if !same(last, &s2) {
        return Err(GrstError::construction(format!(
            "split at t = {} does not end on the affine target lattice",
            g2.t
        )));
    }
    Ok(segment)
}

/// Absolute mean and variance errors of `tree` at every schedule time.
pub fn schedule_residuals(
    tree: &RecombiningTree,
    schedule: &MarginalSchedule,
) -> Result<Vec<(f64, f64, f64)>> {
    schedule
        .entries()
        .iter()
        .map(|g| {
            let n = tree.layer_at_time(g.t).ok_or_else(|| {
                GrstError::invalid(format!("schedule time {} is not a tree layer", g.t))
            })?;
            let (mean, var) = layer_moments(tree, n)?;
            Ok((g.t, (mean - g.mu).abs(), (var - g.variance()).abs()))
        })
        .collect()
}

/// `K` split trees joined at a common root with mixture weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureWire", into = "MixtureWire")]
pub struct GrstMixture {
    components: Vec<RecombiningTree>,
    weights: Vec<f64>,
    root_value: f64,
}

#[derive(Serialize, Deserialize)]
struct MixtureWire {
    weights: Vec<f64>,
    components: Vec<RecombiningTree>,
}

impl TryFrom<MixtureWire> for GrstMixture {
    type Error = GrstError;

    fn try_from(w: MixtureWire) -> Result<Self> {
        GrstMixture::new(w.components, w.weights)
    }
}

impl From<GrstMixture> for MixtureWire {
    fn from(m: GrstMixture) -> Self {
        MixtureWire {
            weights: m.weights,
            components: m.components,
        }
    }
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(GrstError::invalid(
            "at least one mixture weight is required",
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(GrstError::invalid("mixture weights must be non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(GrstError::invalid(format!(
            "mixture weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl GrstMixture {
    pub fn new(components: Vec<RecombiningTree>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        if components.len() != weights.len() {
            return Err(GrstError::invalid(format!(
                "{} components for {} weights",
                components.len(),
                weights.len()
            )));
        }
        let root_value = components[0].root_value();
        let grid = components[0].times();
        for (i, c) in components.iter().enumerate().skip(1) {
            if c.root_value() != root_value {
                return Err(GrstError::invalid(format!(
                    "component {i} has root {} instead of {root_value}",
                    c.root_value()
                )));
            }
            let same_grid = c.times().len() == grid.len()
                && c.times()
                    .iter()
                    .zip(grid)
                    .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
            if !same_grid {
                return Err(GrstError::invalid(format!(
                    "component {i} does not share the time grid of component 0"
                )));
            }
        }
        Ok(Self {
            components,
            weights,
            root_value,
        })
    }

    pub fn components(&self) -> &[RecombiningTree] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn root_value(&self) -> f64 {
        self.root_value
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Builds one split tree per schedule (concurrently) and bundles them with `weights`.
pub fn build_mixture(
    schedules: &[MarginalSchedule],
    weights: &[f64],
    root_value: f64,
    k: usize,
) -> Result<GrstMixture> {
    check_weights(weights)?;
    if schedules.len() != weights.len() {
        return Err(GrstError::invalid(format!(
            "{} schedules for {} weights",
            schedules.len(),
            weights.len()
        )));
    }
    let components = schedules
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            build_grst_n(s, root_value, k).map_err(|e| GrstError::Component {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GrstMixture::new(components, weights.to_vec())
}
