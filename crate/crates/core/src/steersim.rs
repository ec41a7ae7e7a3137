//! Synthetic entangled-trait world.
//!
//! A stand-in for a real model that is small enough to reason about in
//! closed form:
//!
//! - **Trait axes** `A` (C×D, unit rows) with `A Aᵀ = R`, the planted trait
//!   correlation. Behaviour readout of trait `j` is `⟨a_j, h⟩`.
//! - **Layers**: an injection `v` at layer `l` reaches the final state as
//!   `g_l · gate_l · v`, where `g_l` is the layer gain and `gate_l = |cos(h_l, w)|`
//!   measures how well the prompt's layer-`l` state aligns with a fixed gate
//!   direction `w`. Neutral prompts are fully aligned (`gate = 1`).
//! - **Next-token head**: logits `U h` over a `V`-word vocabulary, used to
//!   measure how sensitive the output distribution is to an injection.
//! - **Judge scale**: raw readouts map to `3 + 2·tanh(raw / raw_scale)`,
//!   clipped to `[1, 5]`.
//!
//! Every random draw comes from a stream keyed by `(seed, purpose, ids)`, so
//! results never depend on evaluation order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::conditioning::ConditionedSet;
use crate::contrast::{ContrastMatrix, Polarity};
use crate::directions::{default_names, DirectionSet};
use crate::linalg::{dot, norm};
use crate::rng::stream;
use crate::{Error, Result};

const CORRELATION_TOLERANCE: f64 = 1e-12;

/// How per-layer diff-of-means directions are weighted when aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerWeighting {
    /// Normalized next-token sensitivity of each layer's direction.
    #[default]
    Sensitivity,
    /// Proportional to the layer gain.
    Gain,
    Uniform,
}

fn one() -> f64 {
    1.0
}
fn default_probe_intensity() -> f64 {
    0.05
}
fn default_n_probes() -> usize {
    16
}
fn default_radius() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub trait_count: usize,
    pub dim: usize,
    pub layer_count: usize,
    /// Planted correlation between trait axes; symmetric PD, unit diagonal.
    pub trait_correlation: Vec<Vec<f64>>,
    pub estimation_noise_sigma: f64,
    pub per_layer_gain: Vec<f64>,
    pub vocab_size: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub axis_strength: f64,
    #[serde(default = "one")]
    pub raw_scale: f64,
    /// Per-sample neutral state shared by high and low samples.
    #[serde(default)]
    pub base_noise_sigma: f64,
    #[serde(default = "default_probe_intensity")]
    pub probe_intensity: f64,
    #[serde(default = "default_n_probes")]
    pub n_probes: usize,
    #[serde(default)]
    pub layer_weighting: LayerWeighting,
    #[serde(default = "default_radius")]
    pub dynamic_radius: usize,
}

impl WorldConfig {
    /// `C` traits with uniform pairwise correlation `rho`, unit gains.
    pub fn uniform(trait_count: usize, dim: usize, layer_count: usize, rho: f64, seed: u64) -> Self {
        let r = (0..trait_count)
            .map(|i| (0..trait_count).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        Self {
            trait_count,
            dim,
            layer_count,
            trait_correlation: r,
            estimation_noise_sigma: 0.0,
            per_layer_gain: vec![1.0; layer_count],
            vocab_size: 32,
            seed,
            axis_strength: 1.0,
            raw_scale: 1.0,
            base_noise_sigma: 0.0,
            probe_intensity: default_probe_intensity(),
            n_probes: default_n_probes(),
            layer_weighting: LayerWeighting::default(),
            dynamic_radius: default_radius(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn correlation(&self) -> DMatrix<f64> {
        let c = self.trait_count;
        DMatrix::from_fn(c, c, |i, j| self.trait_correlation[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let (c, d, l) = (self.trait_count, self.dim, self.layer_count);
        if c == 0 || l == 0 {
            return bad(format!("trait_count={c} and layer_count={l} must be positive"));
        }
        if d < c {
            return bad(format!("dim {d} is smaller than trait_count {c}"));
        }
        if self.vocab_size < 2 {
            return bad(format!("vocab_size {} < 2", self.vocab_size));
        }
        if self.per_layer_gain.len() != l {
            return bad(format!("{} gains for {l} layers", self.per_layer_gain.len()));
        }
        if self.per_layer_gain.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return bad("layer gains must be finite and non-negative".into());
        }
        for (name, v) in [
            ("estimation_noise_sigma", self.estimation_noise_sigma),
            ("base_noise_sigma", self.base_noise_sigma),
            ("probe_intensity", self.probe_intensity),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name}={v} must be finite and non-negative"));
            }
        }
        if !(self.raw_scale > 0.0) || !(self.axis_strength > 0.0) {
            return bad("raw_scale and axis_strength must be positive".into());
        }
        if self.n_probes == 0 {
            return bad("n_probes must be at least 1".into());
        }
        if self.trait_correlation.len() != c || self.trait_correlation.iter().any(|r| r.len() != c) {
            return Err(Error::BadCorrelation(format!("expected a {c}x{c} matrix")));
        }
        let r = self.correlation();
        for i in 0..c {
            if (r[(i, i)] - 1.0).abs() > CORRELATION_TOLERANCE {
                return Err(Error::BadCorrelation(format!("diagonal entry {i} is {}", r[(i, i)])));
            }
            for j in 0..i {
                if (r[(i, j)] - r[(j, i)]).abs() > CORRELATION_TOLERANCE {
                    return Err(Error::BadCorrelation(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        if r.cholesky().is_none() {
            return Err(Error::BadCorrelation("not positive definite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    /// C×D, unit rows, `A Aᵀ = R`.
    pub true_axes: DMatrix<f64>,
    /// V×D next-token head.
    pub token_readout: DMatrix<f64>,
    /// Unit gate direction shared by all layers.
    pub gate: DVector<f64>,
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    // Row-major fill so the draw order is independent of storage layout.
    let flat: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &flat)
}

/// Builds the world: `A = L Q` with `L` the Cholesky factor of `R` and `Q`
/// a random C×D frame with orthonormal rows.
pub fn make_world(config: WorldConfig) -> Result<SyntheticWorld> {
    config.validate()?;
    let (c, d, v) = (config.trait_count, config.dim, config.vocab_size);
    let l = config
        .correlation()
        .cholesky()
        .ok_or_else(|| Error::BadCorrelation("not positive definite".into()))?
        .l();
    let mut rng = stream(config.seed, "frame", &[]);
    let frame = gaussian_matrix(d, c, &mut rng).qr().q(); // D×C, orthonormal columns
    let true_axes = l * frame.transpose();
    let mut rng = stream(config.seed, "token-readout", &[]);
    let token_readout = gaussian_matrix(v, d, &mut rng) / (d as f64).sqrt();
    let mut rng = stream(config.seed, "gate", &[]);
    let gate = gaussian_matrix(d, 1, &mut rng).column(0).normalize();
    Ok(SyntheticWorld {
        config,
        true_axes,
        token_readout,
        gate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    High,
    Low,
}

impl Level {
    fn sign(self) -> f64 {
        match self {
            Level::High => 1.0,
            Level::Low => -1.0,
        }
    }

    fn id(self) -> u64 {
        match self {
            Level::High => 0,
            Level::Low => 1,
        }
    }
}

/// Streams the samples of one `(trait, level, layer)` cell into `visit`.
fn for_each_sample(
    world: &SyntheticWorld,
    trait_idx: usize,
    level: Level,
    n: usize,
    layer: usize,
    mut visit: impl FnMut(&[f64]),
) {
    let cfg = &world.config;
    let d = cfg.dim;
    let signal: Vec<f64> = world
        .true_axes
        .row(trait_idx)
        .iter()
        .map(|a| level.sign() * cfg.axis_strength * a)
        .collect();
    let mut base_rng = stream(cfg.seed, "base", &[layer as u64]);
    let mut noise_rng = stream(
        cfg.seed,
        "noise",
        &[trait_idx as u64, level.id(), layer as u64],
    );
    let mut sample = vec![0.0; d];
    for _ in 0..n {
        for k in 0..d {
            let mut x = signal[k];
            if cfg.base_noise_sigma > 0.0 {
                x += cfg.base_noise_sigma * base_rng.sample::<f64, _>(StandardNormal);
            }
            if cfg.estimation_noise_sigma > 0.0 {
                x += cfg.estimation_noise_sigma * noise_rng.sample::<f64, _>(StandardNormal);
            }
            sample[k] = x;
        }
        visit(&sample);
    }
}

/// `n × D` labelled activations: `±axis_strength · a_trait` plus noise.
pub fn sample_labeled_activations(
    world: &SyntheticWorld,
    trait_idx: usize,
    level: Level,
    n: usize,
    layer: usize,
) -> DMatrix<f64> {
    let mut flat = Vec::with_capacity(n * world.config.dim);
    for_each_sample(world, trait_idx, level, n, layer, |s| flat.extend_from_slice(s));
    DMatrix::from_row_slice(n, world.config.dim, &flat)
}

fn mean_activation(world: &SyntheticWorld, trait_idx: usize, level: Level, n: usize, layer: usize) -> Vec<f64> {
    let mut sum = vec![0.0; world.config.dim];
    for_each_sample(world, trait_idx, level, n, layer, |s| {
        sum.iter_mut().zip(s).for_each(|(acc, x)| *acc += x)
    });
    sum.iter().map(|x| x / n as f64).collect()
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub directions: DirectionSet,
    /// `layer_weights[trait][k]` is the weight of `layers[k]`; rows sum to 1.
    pub layer_weights: Vec<Vec<f64>>,
    pub layers: Vec<usize>,
}

fn unit(v: Vec<f64>, what: impl FnOnce() -> String) -> Result<Vec<f64>> {
    let n = norm(&v);
    if n < 1e-12 {
        return Err(Error::ZeroVector(what()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// Difference-of-means direction per trait and layer, aggregated across
/// `layers` with the configured weighting and re-normalized.
pub fn estimate_directions_diff_means(
    world: &SyntheticWorld,
    n_per_level: usize,
    layers: &[usize],
) -> Result<Estimate> {
    let cfg = &world.config;
    if n_per_level < 2 {
        return Err(Error::InvalidParameter(format!("n_per_level={n_per_level} < 2")));
    }
    if layers.is_empty() || layers.iter().any(|&l| l >= cfg.layer_count) {
        return Err(Error::InvalidParameter(format!(
            "layers {layers:?} must be a non-empty subset of 0..{}",
            cfg.layer_count
        )));
    }
    let c = cfg.trait_count;
    let mut rows = Vec::with_capacity(c * cfg.dim);
    let mut all_weights = Vec::with_capacity(c);
    for t in 0..c {
        let mut per_layer = Vec::with_capacity(layers.len());
        let mut weights = Vec::with_capacity(layers.len());
        for &l in layers {
            let hi = mean_activation(world, t, Level::High, n_per_level, l);
            let lo = mean_activation(world, t, Level::Low, n_per_level, l);
            let diff = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
            let dir = unit(diff, || format!("trait {t} layer {l}: degenerate diff-of-means"))?;
            weights.push(match cfg.layer_weighting {
                LayerWeighting::Sensitivity => {
                    layer_sensitivity(world, &dir, l, cfg.probe_intensity, cfg.n_probes)
                }
                LayerWeighting::Gain => cfg.per_layer_gain[l],
                LayerWeighting::Uniform => 1.0,
            });
            per_layer.push(dir);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroVector(format!("trait {t}: all layer weights are zero")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let mut agg = vec![0.0; cfg.dim];
        for (w, dir) in weights.iter().zip(&per_layer) {
            agg.iter_mut().zip(dir).for_each(|(a, x)| *a += w * x);
        }
        rows.extend(unit(agg, || format!("trait {t}: aggregate direction vanished"))?);
        all_weights.push(weights);
    }
    let meta = json!({
        "origin": "synthetic diff-of-means",
        "seed": cfg.seed,
        "n_per_level": n_per_level,
        "layers": layers,
        "layer_weighting": cfg.layer_weighting,
        "layer_weights": all_weights,
    });
    let set = DirectionSet::new(default_names(c), DMatrix::from_row_slice(c, cfg.dim, &rows), meta)?;
    Ok(Estimate {
        directions: crate::directions::normalize_rows(&set)?,
        layer_weights: all_weights,
        layers: layers.to_vec(),
    })
}

/// Hidden state of one prompt: the context vector read by the token head
/// and one state per layer (read through the gate).
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    pub context: Vec<f64>,
    pub layer_states: Vec<Vec<f64>>,
}

impl PromptState {
    /// Empty context, every layer aligned with the gate.
    pub fn neutral(world: &SyntheticWorld) -> Self {
        let w: Vec<f64> = world.gate.iter().copied().collect();
        Self {
            context: vec![0.0; world.config.dim],
            layer_states: vec![w; world.config.layer_count],
        }
    }

    fn gate(&self, world: &SyntheticWorld, layer: usize) -> f64 {
        let h = &self.layer_states[layer];
        let n = norm(h);
        if n == 0.0 {
            return 0.0;
        }
        (dot(h, world.gate.as_slice()) / n).abs()
    }
}

fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let m = logits.max();
    let e = logits.map(|z| (z - m).exp());
    let s = e.sum();
    e / s
}

fn total_variation(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    0.5 * (p - q).abs().sum()
}

/// Multiplier applied to an injection at `layer` before it reaches the
/// final state.
fn transmission(world: &SyntheticWorld, prompt: &PromptState, layer: usize) -> f64 {
    world.config.per_layer_gain[layer] * prompt.gate(world, layer)
}

fn prompt_sensitivity(
    world: &SyntheticWorld,
    direction: &[f64],
    prompt: &PromptState,
    layer: usize,
    intensity: f64,
) -> f64 {
    let x = DVector::from_column_slice(&prompt.context);
    let d = DVector::from_column_slice(direction);
    let t = intensity * transmission(world, prompt, layer);
    let p = softmax(&(&world.token_readout * &x));
    let q = softmax(&(&world.token_readout * (x + d * t)));
    total_variation(&p, &q)
}

fn neutral_probe(world: &SyntheticWorld, k: usize) -> PromptState {
    let mut rng = stream(world.config.seed, "probe", &[k as u64]);
    let mut probe = PromptState::neutral(world);
    probe.context = (0..world.config.dim).map(|_| rng.sample(StandardNormal)).collect();
    probe
}

/// Mean total-variation distance between baseline and steered next-token
/// distributions over `n_probes` neutral probe prompts.
pub fn layer_sensitivity(
    world: &SyntheticWorld,
    direction: &[f64],
    layer: usize,
    intensity: f64,
    n_probes: usize,
) -> f64 {
    if n_probes == 0 {
        return 0.0;
    }
    let total: f64 = (0..n_probes)
        .map(|k| prompt_sensitivity(world, direction, &neutral_probe(world, k), layer, intensity))
        .sum();
    total / n_probes as f64
}

fn argmax_first(scores: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// Offline prior: the most sensitive layer under neutral probes, lowest
/// index on ties.
pub fn select_prior_layer(world: &SyntheticWorld, direction: &[f64]) -> usize {
    let cfg = &world.config;
    argmax_first((0..cfg.layer_count).map(|l| {
        (
            l,
            layer_sensitivity(world, direction, l, cfg.probe_intensity, cfg.n_probes),
        )
    }))
}

/// Re-evaluates layers within `radius` of `prior` on the given prompt and
/// returns the most sensitive one. `radius = 0` returns `prior`.
pub fn dynamic_layer_check(
    world: &SyntheticWorld,
    direction: &[f64],
    prompt: &PromptState,
    prior: usize,
    radius: usize,
) -> usize {
    if radius == 0 {
        return prior;
    }
    let last = world.config.layer_count - 1;
    let lo = prior.saturating_sub(radius);
    let hi = prior.saturating_add(radius).min(last);
    let intensity = world.config.probe_intensity;
    // The prior is scored first so it wins ties.
    let window = std::iter::once(prior).chain((lo..=hi).filter(|&l| l != prior));
    argmax_first(window.map(|l| (l, prompt_sensitivity(world, direction, prompt, l, intensity))))
}

/// Hybrid selection used for steering: offline prior, then the dynamic
/// check on the neutral evaluation prompt.
pub fn select_layer(world: &SyntheticWorld, direction: &[f64]) -> usize {
    let prior = select_prior_layer(world, direction);
    let prompt = PromptState::neutral(world);
    dynamic_layer_check(world, direction, &prompt, prior, world.config.dynamic_radius)
}

/// Per-trait raw readout shift caused by injecting `sign · intensity · d`
/// at `layer` on the neutral prompt.
pub fn raw_trait_shift(world: &SyntheticWorld, direction: &[f64], sign: f64, intensity: f64, layer: usize) -> Vec<f64> {
    let t = sign * intensity * transmission(world, &PromptState::neutral(world), layer);
    world
        .true_axes
        .row_iter()
        .map(|a| t * dot(a.clone_owned().as_slice(), direction))
        .collect()
}

/// Behaviour scores on the 1–5 judge scale after steering `target` with the
/// given polarity. Base polarity injects nothing.
pub fn steer_and_score(
    world: &SyntheticWorld,
    directions: &ConditionedSet,
    target: usize,
    polarity: Polarity,
    intensity: f64,
    layer: usize,
) -> Result<Vec<f64>> {
    let cfg = &world.config;
    if directions.directions.trait_count() != cfg.trait_count || directions.directions.dim() != cfg.dim {
        return Err(Error::ShapeMismatch(format!(
            "directions are {}x{}, world is {}x{}",
            directions.directions.trait_count(),
            directions.directions.dim(),
            cfg.trait_count,
            cfg.dim
        )));
    }
    if target >= cfg.trait_count || layer >= cfg.layer_count {
        return Err(Error::InvalidParameter(format!("target {target} / layer {layer} out of range")));
    }
    if !(intensity >= 0.0) {
        return Err(Error::InvalidParameter(format!("intensity {intensity} < 0")));
    }
    let d = directions.directions.row(target);
    Ok(raw_trait_shift(world, &d, polarity.sign(), intensity, layer)
        .into_iter()
        .map(|raw| (3.0 + 2.0 * (raw / cfg.raw_scale).tanh()).clamp(1.0, 5.0))
        .collect())
}

/// High−Low contrast matrix produced by steering each trait in turn at its
/// selected layer.
pub fn simulate_bleed(world: &SyntheticWorld, conditioned: &ConditionedSet, intensity: f64) -> Result<ContrastMatrix> {
    let c = world.config.trait_count;
    let mut values = DMatrix::zeros(c, c);
    for t in 0..c {
        let layer = select_layer(world, &conditioned.directions.row(t));
        let hi = steer_and_score(world, conditioned, t, Polarity::Positive, intensity, layer)?;
        let lo = steer_and_score(world, conditioned, t, Polarity::Negative, intensity, layer)?;
        for m in 0..c {
            values[(t, m)] = hi[m] - lo[m];
        }
    }
    let mut out = ContrastMatrix::from_values(values)?;
    out.counts.fill(2);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::{condition_c0, gram};
    use approx::assert_abs_diff_eq;

    fn exact_directions(world: &SyntheticWorld) -> ConditionedSet {
        let set = DirectionSet::new(
            default_names(world.config.trait_count),
            world.true_axes.clone(),
            serde_json::Value::Null,
        )
        .unwrap();
        condition_c0(&crate::directions::normalize_rows(&set).unwrap()).unwrap()
    }

    #[test]
    fn identity_correlation_gives_orthonormal_axes() {
        let w = make_world(WorldConfig::uniform(4, 16, 1, 0.0, 3)).unwrap();
        let g = &w.true_axes * w.true_axes.transpose();
        assert_abs_diff_eq!(g, DMatrix::identity(4, 4), epsilon = 1e-12);
    }

    #[test]
    fn planted_correlation_reproduced() {
        let mut cfg = WorldConfig::uniform(3, 8, 1, 0.0, 11);
        cfg.trait_correlation[0][1] = 0.6;
        cfg.trait_correlation[1][0] = 0.6;
        let w = make_world(cfg).unwrap();
        let g = &w.true_axes * w.true_axes.transpose();
        assert_abs_diff_eq!(g[(0, 1)], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(g[(2, 2)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn non_pd_correlation_rejected() {
        let mut cfg = WorldConfig::uniform(3, 8, 1, 0.0, 1);
        cfg.trait_correlation = vec![vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]];
        assert!(matches!(make_world(cfg), Err(Error::BadCorrelation(_))));
    }

    #[test]
    fn noiseless_pair_differs_by_twice_the_axis() {
        let w = make_world(WorldConfig::uniform(2, 6, 1, 0.3, 5)).unwrap();
        let hi = sample_labeled_activations(&w, 1, Level::High, 1, 0);
        let lo = sample_labeled_activations(&w, 1, Level::Low, 1, 0);
        let expected = w.true_axes.row(1) * 2.0 * w.config.axis_strength;
        assert_abs_diff_eq!((hi - lo).row(0).clone_owned(), expected, epsilon = 1e-15);
    }

    #[test]
    fn sample_mean_concentrates() {
        let mut cfg = WorldConfig::uniform(2, 8, 1, 0.0, 9);
        cfg.estimation_noise_sigma = 0.5;
        let w = make_world(cfg).unwrap();
        let n = 10_000;
        let hi = sample_labeled_activations(&w, 0, Level::High, n, 0);
        let bound = 3.0 * 0.5 / (n as f64).sqrt();
        for k in 0..8 {
            let mean = hi.column(k).mean();
            assert!((mean - w.true_axes[(0, k)]).abs() < bound, "coord {k}: {mean}");
        }
    }

    #[test]
    fn seeds_change_samples() {
        let mut a = WorldConfig::uniform(2, 4, 1, 0.0, 1);
        a.estimation_noise_sigma = 0.1;
        let b = WorldConfig { seed: 2, ..a.clone() };
        let sa = sample_labeled_activations(&make_world(a).unwrap(), 0, Level::High, 3, 0);
        let sb = sample_labeled_activations(&make_world(b).unwrap(), 0, Level::High, 3, 0);
        assert_ne!(sa, sb);
    }

    #[test]
    fn noiseless_estimate_is_exact() {
        let w = make_world(WorldConfig::uniform(3, 16, 2, 0.4, 21)).unwrap();
        let est = estimate_directions_diff_means(&w, 4, &[0, 1]).unwrap();
        for t in 0..3 {
            let cos = dot(&est.directions.row(t), w.true_axes.row(t).clone_owned().as_slice());
            assert!(cos >= 1.0 - 1e-10, "trait {t}: {cos}");
            assert_abs_diff_eq!(est.layer_weights[t].iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn estimate_rejects_bad_arguments() {
        let w = make_world(WorldConfig::uniform(2, 4, 1, 0.0, 1)).unwrap();
        assert!(estimate_directions_diff_means(&w, 1, &[0]).is_err());
        assert!(estimate_directions_diff_means(&w, 4, &[1]).is_err());
    }

    #[test]
    fn sensitivity_zero_cases() {
        let mut cfg = WorldConfig::uniform(2, 8, 3, 0.0, 4);
        cfg.per_layer_gain = vec![1.0, 0.0, 1.0];
        let w = make_world(cfg).unwrap();
        let d = w.true_axes.row(0).clone_owned();
        assert_eq!(layer_sensitivity(&w, d.as_slice(), 1, 0.05, 8), 0.0);
        assert_eq!(layer_sensitivity(&w, d.as_slice(), 0, 0.0, 8), 0.0);
        assert!(layer_sensitivity(&w, d.as_slice(), 0, 0.05, 8) > 0.0);
    }

    #[test]
    fn prior_layer_selection() {
        let mut cfg = WorldConfig::uniform(2, 8, 3, 0.0, 4);
        cfg.per_layer_gain = vec![0.1, 1.0, 0.1];
        let w = make_world(cfg.clone()).unwrap();
        let d = w.true_axes.row(0).clone_owned();
        let brute: Vec<f64> = (0..3)
            .map(|l| layer_sensitivity(&w, d.as_slice(), l, cfg.probe_intensity, cfg.n_probes))
            .collect();
        assert!(brute[1] > brute[0] && brute[1] > brute[2]);
        assert_eq!(select_prior_layer(&w, d.as_slice()), 1);
        let uniform = make_world(WorldConfig::uniform(2, 8, 3, 0.0, 4)).unwrap();
        assert_eq!(select_prior_layer(&uniform, d.as_slice()), 0);
        let single = make_world(WorldConfig::uniform(2, 8, 1, 0.0, 4)).unwrap();
        assert_eq!(select_prior_layer(&single, d.as_slice()), 0);
    }

    #[test]
    fn dynamic_check_follows_the_prompt() {
        let w = make_world(WorldConfig::uniform(2, 8, 4, 0.0, 8)).unwrap();
        let d = w.true_axes.row(0).clone_owned();
        let mut prompt = PromptState::neutral(&w);
        prompt.context = vec![0.3; 8];
        assert_eq!(dynamic_layer_check(&w, d.as_slice(), &prompt, 1, 0), 1);
        // Layer 1 state orthogonal to the gate, layer 2 aligned.
        let mut orth: Vec<f64> = vec![0.0; 8];
        orth[0] = 1.0;
        let g = w.gate.as_slice();
        let proj = dot(&orth, g);
        orth.iter_mut().zip(g).for_each(|(o, gi)| *o -= proj * gi);
        prompt.layer_states[1] = orth.clone();
        prompt.layer_states[0] = orth;
        assert_eq!(dynamic_layer_check(&w, d.as_slice(), &prompt, 1, 1), 2);
        // Window clipped at the boundaries.
        assert_eq!(dynamic_layer_check(&w, d.as_slice(), &PromptState::neutral(&w), 3, 5), 3);
        assert_eq!(dynamic_layer_check(&w, d.as_slice(), &prompt, 0, 2), 2);
    }

    #[test]
    fn base_and_zero_intensity_are_neutral() {
        let w = make_world(WorldConfig::uniform(3, 8, 1, 0.4, 2)).unwrap();
        let dirs = exact_directions(&w);
        let base = steer_and_score(&w, &dirs, 0, Polarity::Base, 1.0, 0).unwrap();
        let zero = steer_and_score(&w, &dirs, 0, Polarity::Positive, 0.0, 0).unwrap();
        assert_eq!(base, zero);
        assert_eq!(base, vec![3.0; 3]);
    }

    #[test]
    fn off_target_ratio_matches_overlap() {
        let mut cfg = WorldConfig::uniform(2, 8, 1, 0.0, 2);
        cfg.trait_correlation = vec![vec![1.0, 0.6], vec![0.6, 1.0]];
        let w = make_world(cfg).unwrap();
        let dirs = exact_directions(&w);
        let shift = raw_trait_shift(&w, &dirs.directions.row(0), 1.0, 1e-3, 0);
        assert_abs_diff_eq!(shift[1] / shift[0], 0.6, epsilon = 1e-9);
        let ortho = make_world(WorldConfig::uniform(2, 8, 1, 0.0, 2)).unwrap();
        let shift = raw_trait_shift(&ortho, &exact_directions(&ortho).directions.row(0), 1.0, 1e-3, 0);
        assert!(shift[1].abs() < 1e-12);
    }

    #[test]
    fn bleed_is_diagonal_for_independent_traits() {
        let w = make_world(WorldConfig::uniform(3, 8, 1, 0.0, 6)).unwrap();
        let m = simulate_bleed(&w, &exact_directions(&w), 1e-3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m.values[(i, j)].abs() < 1e-9);
                }
            }
        }
        let g = gram(&exact_directions(&w).directions).values;
        assert_abs_diff_eq!(g, DMatrix::identity(3, 3), epsilon = 1e-12);
    }
}
