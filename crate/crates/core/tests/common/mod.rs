#![allow(dead_code)]

use infofair::experiment::{run_sweep, summarize, tune_lambda, SolverSettings, SweepRecord, SweepSummary};
use infofair::fairness::binary_axes;
use infofair::infotheory::ProbTable;
use infofair::model::{total_gradient, total_loss, TrainConfig, Weights};
use infofair::data::{synthesize, Dataset, SyntheticSpec};
use infofair::RegularizerKind;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random 2×2×2 joint. Roughly one table in five gets a zero cell.
pub fn random_table(rng: &mut ChaCha8Rng) -> ProbTable<f64> {
    let mut w: Vec<f64> = (0..8).map(|_| -rng.gen::<f64>().ln()).collect();
    if rng.gen_bool(0.2) {
        let i = rng.gen_range(0..8);
        w[i] = 0.0;
    }
    let total: f64 = w.iter().sum();
    ProbTable::new(binary_axes(), w.into_iter().map(|v| v / total).collect()).unwrap()
}

pub fn random_tables(count: usize, seed: u64) -> Vec<ProbTable<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_table(&mut rng)).collect()
}

/// Gradient-check instance: features, labels, groups and a weight vector.
pub struct Instance {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub a: Vec<u8>,
    pub w: Weights<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Instance {
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let mut a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    // Every (a, y) slice populated.
    for (i, s) in (0..4).enumerate() {
        a[i] = (s >> 1) as u8;
        y[i] = (s & 1) as u8;
    }
    let w = Weights(Array1::from_shape_fn(p + 1, |_| 0.5 * rng.sample::<f64, _>(StandardNormal)));
    Instance { x, y, a, w }
}

/// `‖analytic − central difference‖∞ / max(‖analytic‖∞, ‖fd‖∞, 1e-8)`.
pub fn gradient_rel_error(inst: &Instance, cfg: &TrainConfig<f64>, h: f64) -> f64 {
    let g = total_gradient(&inst.w, inst.x.view(), &inst.y, &inst.a, cfg).unwrap();
    let mut fd = Array1::zeros(g.len());
    for j in 0..g.len() {
        let mut plus = inst.w.clone();
        plus.0[j] += h;
        let mut minus = inst.w.clone();
        minus.0[j] -= h;
        let lp = total_loss(&plus, inst.x.view(), &inst.y, &inst.a, cfg).unwrap();
        let lm = total_loss(&minus, inst.x.view(), &inst.y, &inst.a, cfg).unwrap();
        fd[j] = (lp - lm) / (2.0 * h);
    }
    let diff = (&g - &fd).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = g
        .iter()
        .chain(fd.iter())
        .fold(1e-8f64, |m, v| m.max(v.abs()));
    diff / scale
}

pub const SYNTH: SyntheticSpec = SyntheticSpec {
    n: 5000,
    bias: 0.8,
    noise: 0.1,
};
pub const SEED: u64 = 42;
pub const K: usize = 5;
pub const LAMBDA_CANDIDATES: [f64; 4] = [1e-5, 1e-4, 1e-3, 1e-2];

pub fn synthetic() -> Dataset<f64> {
    synthesize(SYNTH, SEED).unwrap()
}

/// λ selection plus the full five-kind sweep on the default μ grid.
pub struct SyntheticRun {
    pub lambda: f64,
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

pub fn synthetic_run(kinds: &[RegularizerKind], mus: &[f64]) -> SyntheticRun {
    let ds = synthetic();
    let solver = SolverSettings::default();
    let lambda = tune_lambda(&ds, &LAMBDA_CANDIDATES, K, SEED, solver).unwrap().lambda;
    let records = run_sweep(&ds, lambda, kinds, mus, K, SEED, solver).unwrap();
    let summary = summarize(&records, K);
    SyntheticRun { lambda, records, summary }
}
