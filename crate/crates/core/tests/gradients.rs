mod common;

use common::{gradient_rel_error, random_instance};
use infofair::fairness::{accuracy_mi, balance, independence_gap, joint_from_labels, separation_gap, sufficiency_gap};
use infofair::model::{total_gradient, TrainConfig, Weights};
use infofair::regularizers::{reg_gradient, reg_value, soft_joint};
use infofair::RegularizerKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(kind: RegularizerKind, mu: f64) -> TrainConfig<f64> {
    TrainConfig {
        lambda: 0.01,
        mu,
        kind,
        ..TrainConfig::default()
    }
}

#[test]
fn total_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 50, 5);
        for kind in RegularizerKind::ACTIVE {
            for mu in [0.0, 1.0, 10.0] {
                let err = gradient_rel_error(&inst, &cfg(kind, mu), 1e-6);
                assert!(err <= 1e-4, "{kind} μ={mu}: relative error {err:e}");
                worst = worst.max(err);
            }
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn regularizer_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let n = 40;
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<u8> = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
        for kind in RegularizerKind::ACTIVE {
            let j = soft_joint(&pred, &a, &y).unwrap();
            let g = reg_gradient(kind, &j).unwrap();
            for i in 0..n {
                let h = 1e-6;
                let mut p = pred.clone();
                p[i] += h;
                let up = reg_value(kind, &soft_joint(&p, &a, &y).unwrap()).unwrap();
                p[i] -= 2.0 * h;
                let down = reg_value(kind, &soft_joint(&p, &a, &y).unwrap()).unwrap();
                let fd = (up - down) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{kind} sample {i}: {fd} vs {}", g[i]);
            }
        }
    }
}

#[test]
fn soft_regularizer_equals_hard_gap_on_binary_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = 60;
        let r: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let hard = joint_from_labels::<f64>(&r, &a, &y).unwrap();
        let pred: Vec<f64> = r.iter().map(|&v| f64::from(v)).collect();
        let soft = soft_joint(&pred, &a, &y).unwrap();
        let expected = [
            (RegularizerKind::Ind, independence_gap(&hard).unwrap()),
            (RegularizerKind::Sep, separation_gap(&hard).unwrap()),
            (RegularizerKind::Suf, sufficiency_gap(&hard).unwrap()),
            (RegularizerKind::Bal, balance(&hard).unwrap()),
            (RegularizerKind::NegAcc, -accuracy_mi(&hard).unwrap()),
        ];
        for (kind, want) in expected {
            let got = reg_value(kind, &soft).unwrap();
            assert!((got - want).abs() <= 1e-9, "{kind}: soft {got} vs hard {want}");
        }
    }
}

#[test]
fn single_precision_gradient_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = random_instance(&mut rng, 50, 5);
    let x32 = inst.x.mapv(|v| v as f32);
    let w32 = Weights(inst.w.0.mapv(|v| v as f32));
    for kind in RegularizerKind::ACTIVE {
        let c64 = cfg(kind, 1.0);
        let c32 = TrainConfig::<f32> {
            lambda: 0.01,
            mu: 1.0,
            kind,
            ..TrainConfig::default()
        };
        let g64 = total_gradient(&inst.w, inst.x.view(), &inst.y, &inst.a, &c64).unwrap();
        let g32 = total_gradient(&w32, x32.view(), &inst.y, &inst.a, &c32).unwrap();
        for (d, s) in g64.iter().zip(g32.iter()) {
            assert!((d - f64::from(*s)).abs() <= 1e-4 * (1.0 + d.abs()), "{kind}: {d} vs {s}");
        }
    }
}
