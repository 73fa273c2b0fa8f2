//! Synthetic smooth-pursuit traces and the recognition benchmark.
//!
//! A simulated viewer follows a shape with a fixed time lag, Gaussian
//! per-axis jitter on every sample, and independent sample dropout. Every
//! trace is a deterministic function of its seed; benchmark trials derive
//! their seeds from (master seed, shape, trial) so adding trials or shapes
//! never changes existing ones.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::auth::Algorithm;
use crate::catalog::{Catalog, FramePlan, ShapeId, ShapeSpec};
use crate::dtree::{classify_tree, path_features, DatasetSource, LabeledDataset, TreeModel};
use crate::error::{Error, Result};
use crate::geometry::{normalize_trace, NormalizeConfig, RawTrace, TimedSample};
use crate::metrics::ConfusionMatrix;
use crate::template::{classify_template, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub jitter_sigma: f64,
    pub lag_ms: f64,
    pub dropout_prob: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            jitter_sigma: 15.0,
            lag_ms: 100.0,
            dropout_prob: 0.02,
            sample_rate_hz: 30.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            jitter_sigma: 0.0,
            lag_ms: 0.0,
            dropout_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_sigma(self, jitter_sigma: f64) -> Self {
        Self {
            jitter_sigma,
            ..self
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::Config("jitter_sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::Config("dropout_prob must be in [0, 1)".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        if !(self.lag_ms >= 0.0 && self.lag_ms.is_finite()) {
            return Err(Error::Config("lag must be >= 0".into()));
        }
        Ok(())
    }
}

/// Sample instants (ms) covering one frame, both ends included.
pub fn sample_times(plan: &FramePlan, sample_rate_hz: f64) -> Vec<f64> {
    let intervals = (plan.frame_duration_ms * sample_rate_hz / 1000.0 + 1e-9).floor() as usize;
    (0..=intervals)
        .map(|i| i as f64 * 1000.0 / sample_rate_hz)
        .collect()
}

/// Mixes a master seed with a stream and an index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ stream) ^ index)
}

pub fn trial_seed(master: u64, shape: ShapeId, trial: u64) -> u64 {
    derive_seed(master, shape.index() as u64, trial)
}

pub fn simulate_pursuit(shape: &ShapeSpec, plan: &FramePlan, noise: &NoiseModel) -> Result<RawTrace> {
    noise.check()?;
    let times = sample_times(plan, noise.sample_rate_hz);
    let expected = times.len() as f64 * (1.0 - noise.dropout_prob);
    if expected < crate::geometry::MIN_TRACE_SAMPLES as f64 {
        return Err(Error::Config(format!(
            "expected {expected:.1} samples per frame after dropout, need {}",
            crate::geometry::MIN_TRACE_SAMPLES
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut samples = Vec::with_capacity(times.len());
    for t in times {
        let dropped = rng.random::<f64>() < noise.dropout_prob;
        let jx: f64 = rng.sample(StandardNormal);
        let jy: f64 = rng.sample(StandardNormal);
        if dropped {
            continue;
        }
        let u = ((t - noise.lag_ms) / plan.frame_duration_ms).clamp(0.0, 1.0);
        let p = shape.position_at(u)?;
        samples.push(TimedSample::new(
            t,
            p.x + jx * noise.jitter_sigma,
            p.y + jy * noise.jitter_sigma,
        ));
    }
    RawTrace::new(samples)
}

/// Six simulated viewers with their own jitter, each following every shape
/// once.
pub fn synthetic_traces(catalog: &Catalog, users: usize, seed: u64) -> Result<Vec<(ShapeId, RawTrace)>> {
    const USER_STREAM: u64 = 0x7573_6572;
    let mut out = Vec::with_capacity(users * 12);
    for user in 0..users as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, USER_STREAM, user));
        let sigma = rng.random_range(10.0..=25.0);
        for shape in catalog.shapes() {
            let noise = NoiseModel::default()
                .with_sigma(sigma)
                .with_seed(trial_seed(seed, shape.id, user));
            out.push((shape.id, simulate_pursuit(shape, catalog.plan(), &noise)?));
        }
    }
    Ok(out)
}

pub fn synthetic_dataset(catalog: &Catalog, users: usize, seed: u64) -> Result<LabeledDataset> {
    let rows = synthetic_traces(catalog, users, seed)?
        .into_iter()
        .map(|(id, trace)| Ok((path_features(&trace.to_path())?, id)))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(rows, DatasetSource::Simulated)
}

/// Which recognizers a benchmark exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    Template,
    Dtree,
    Both,
}

impl AlgorithmChoice {
    pub fn includes(self, algo: Algorithm) -> bool {
        matches!(
            (self, algo),
            (AlgorithmChoice::Both, _)
                | (AlgorithmChoice::Template, Algorithm::Template)
                | (AlgorithmChoice::Dtree, Algorithm::Dtree)
        )
    }
}

impl std::str::FromStr for AlgorithmChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "template" => Ok(Self::Template),
            "dtree" => Ok(Self::Dtree),
            "both" => Ok(Self::Both),
            _ => Err(Error::Parse(format!("unknown algorithm {s:?}"))),
        }
    }
}

pub struct Recognizers<'a> {
    pub templates: &'a TemplateSet,
    pub tree: &'a TreeModel,
    pub normalize: NormalizeConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub noise_sigma: f64,
    pub lag_ms: f64,
    pub dropout_prob: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub trials_per_shape: usize,
    pub algorithm: AlgorithmChoice,
    pub catalog_version: String,
}

#[derive(Debug, Clone)]
pub struct AlgorithmResult {
    pub confusion: ConfusionMatrix,
    pub latencies_ms: Vec<f64>,
}

impl AlgorithmResult {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    pub fn median_latency_ms(&self) -> f64 {
        median(&self.latencies_ms)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub results: BTreeMap<Algorithm, AlgorithmResult>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config: &'a BenchConfig,
    accuracy: BTreeMap<Algorithm, f64>,
    confusion: BTreeMap<Algorithm, &'a ConfusionMatrix>,
    per_class_accuracy: BTreeMap<Algorithm, BTreeMap<ShapeId, Option<f64>>>,
    timing_ms: BTreeMap<Algorithm, f64>,
}

impl BenchmarkReport {
    pub fn result(&self, algo: Algorithm) -> Option<&AlgorithmResult> {
        self.results.get(&algo)
    }

    /// `{config, accuracy, confusion, per_class_accuracy, timing_ms}`, each
    /// result keyed by algorithm name.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = ReportDoc {
            config: &self.config,
            accuracy: self.results.iter().map(|(a, r)| (*a, r.accuracy())).collect(),
            confusion: self.results.iter().map(|(a, r)| (*a, &r.confusion)).collect(),
            per_class_accuracy: self
                .results
                .iter()
                .map(|(a, r)| (*a, r.confusion.per_class_accuracy().into_iter().collect()))
                .collect(),
            timing_ms: self
                .results
                .iter()
                .map(|(a, r)| (*a, r.median_latency_ms()))
                .collect(),
        };
        serde_json::to_value(doc).expect("report serializes")
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// The template recognizer as the benchmark runs it: nearest template,
/// no rejection.
fn template_guess(trace: &RawTrace, rec: &Recognizers) -> Result<ShapeId> {
    let candidate = normalize_trace(trace, &rec.normalize)?;
    Ok(classify_template(&candidate, rec.templates, f64::MAX)?.nearest())
}

fn dtree_guess(trace: &RawTrace, rec: &Recognizers) -> Result<ShapeId> {
    if trace.len() < rec.normalize.min_samples {
        return Err(Error::InsufficientSamples {
            got: trace.len(),
            min: rec.normalize.min_samples,
        });
    }
    Ok(classify_tree(rec.tree, &path_features(&trace.to_path())?))
}

pub fn run_benchmark(
    catalog: &Catalog,
    noise: &NoiseModel,
    trials_per_shape: usize,
    algorithm: AlgorithmChoice,
    recognizers: &Recognizers,
) -> Result<BenchmarkReport> {
    let algos: Vec<Algorithm> = [Algorithm::Template, Algorithm::Dtree]
        .into_iter()
        .filter(|a| algorithm.includes(*a))
        .collect();
    let mut results: BTreeMap<Algorithm, AlgorithmResult> = algos
        .iter()
        .map(|a| {
            (
                *a,
                AlgorithmResult {
                    confusion: ConfusionMatrix::new(),
                    latencies_ms: Vec::with_capacity(trials_per_shape * 12),
                },
            )
        })
        .collect();
    for shape in catalog.shapes() {
        for trial in 0..trials_per_shape as u64 {
            let trial_noise = noise.with_seed(trial_seed(noise.seed, shape.id, trial));
            let trace = simulate_pursuit(shape, catalog.plan(), &trial_noise)?;
            for algo in &algos {
                let started = Instant::now();
                let guess = match algo {
                    Algorithm::Template => template_guess(&trace, recognizers)?,
                    Algorithm::Dtree => dtree_guess(&trace, recognizers)?,
                };
                let elapsed = started.elapsed().as_secs_f64() * 1000.0;
                let r = results.get_mut(algo).expect("initialized above");
                r.confusion.record(shape.id, guess);
                r.latencies_ms.push(elapsed);
            }
        }
    }
    Ok(BenchmarkReport {
        config: BenchConfig {
            noise_sigma: noise.jitter_sigma,
            lag_ms: noise.lag_ms,
            dropout_prob: noise.dropout_prob,
            sample_rate_hz: noise.sample_rate_hz,
            seed: noise.seed,
            trials_per_shape,
            algorithm,
            catalog_version: catalog.version().to_owned(),
        },
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_gives_121_samples() {
        let times = sample_times(&FramePlan::default(), 30.0);
        assert_eq!(times.len(), 121);
        assert_eq!(*times.last().unwrap(), 4000.0);
    }

    #[test]
    fn noiseless_trace_is_the_target() {
        let cat = Catalog::shipped();
        let shape = cat.shape(ShapeId::F);
        let trace = simulate_pursuit(shape, cat.plan(), &NoiseModel::noiseless()).unwrap();
        assert_eq!(trace.len(), 121);
        for s in trace.samples() {
            let expected = shape.position_at(s.t / 4000.0).unwrap();
            assert_eq!(s.p, expected);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let cat = Catalog::shipped();
        let noise = NoiseModel::default().with_seed(7);
        let a = simulate_pursuit(cat.shape(ShapeId::C), cat.plan(), &noise).unwrap();
        let b = simulate_pursuit(cat.shape(ShapeId::C), cat.plan(), &noise).unwrap();
        assert_eq!(a, b);
        let c = simulate_pursuit(cat.shape(ShapeId::C), cat.plan(), &noise.with_seed(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dropout_stays_in_binomial_bounds() {
        let cat = Catalog::shipped();
        for seed in 0..100 {
            let noise = NoiseModel::default().with_seed(seed);
            let t = simulate_pursuit(cat.shape(ShapeId::A), cat.plan(), &noise).unwrap();
            let dropped = 1.0 - t.len() as f64 / 121.0;
            assert!((0.0..=0.08).contains(&dropped), "seed {seed}: {dropped}");
        }
    }

    #[test]
    fn config_errors() {
        let cat = Catalog::shipped();
        let shape = cat.shape(ShapeId::A);
        let slow = NoiseModel {
            sample_rate_hz: 5.0,
            ..NoiseModel::default()
        };
        assert!(matches!(simulate_pursuit(shape, cat.plan(), &slow), Err(Error::Config(_))));
        let lossy = NoiseModel {
            dropout_prob: 0.9,
            ..NoiseModel::default()
        };
        assert!(matches!(simulate_pursuit(shape, cat.plan(), &lossy), Err(Error::Config(_))));
        let bad = NoiseModel::default().with_sigma(-1.0);
        assert!(simulate_pursuit(shape, cat.plan(), &bad).is_err());
    }

    #[test]
    fn trial_seeds_are_independent_of_batch_size() {
        assert_eq!(trial_seed(42, ShapeId::B, 3), trial_seed(42, ShapeId::B, 3));
        assert_ne!(trial_seed(42, ShapeId::B, 3), trial_seed(42, ShapeId::C, 3));
        assert_ne!(trial_seed(42, ShapeId::B, 3), trial_seed(43, ShapeId::B, 3));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
