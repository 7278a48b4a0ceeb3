//! Quick invariant checks runnable from the CLI without a test toolchain.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tensor_bandit::bandit::ContextDistribution;
use tensor_bandit::tensor::{frob_norm, hosvd_truncate, inner, matricize, mode_product, tensorize};
use tensor_bandit::{DenseTensor, GlmFamily, ProxOptions, RegularizerSpec};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::run_experiment;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gaussian(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    let len = dims.iter().product();
    let data = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    DenseTensor::from_vec(dims, data).expect("finite Gaussian entries")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn tensor_identities(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(1..=5)).collect();
        let a = gaussian(&dims, rng);
        let b = gaussian(&dims, rng);
        let va = a.data();
        let direct: f64 = va.iter().zip(b.data()).map(|(x, y)| x * y).sum();
        worst = worst.max(rel(inner(&a, &b).map_err(|e| e.to_string())?, direct));
        for n in 0..3 {
            let m = matricize(&a, n).map_err(|e| e.to_string())?;
            worst = worst.max(rel(m.matrix.norm(), frob_norm(&a)));
            let back = tensorize(&m, &dims).map_err(|e| e.to_string())?;
            worst = worst.max(frob_norm(&back.sub(&a).map_err(|e| e.to_string())?));
            let ident = nalgebra::DMatrix::<f64>::identity(dims[n], dims[n]);
            let same = mode_product(&a, &ident, n).map_err(|e| e.to_string())?;
            worst = worst.max(frob_norm(&same.sub(&a).map_err(|e| e.to_string())?));
        }
        let ranks: Vec<usize> = dims.iter().map(|&d| d.min(2)).collect();
        let once = hosvd_truncate(&a, &ranks).map_err(|e| e.to_string())?;
        let twice = hosvd_truncate(&once, &ranks).map_err(|e| e.to_string())?;
        worst = worst.max(frob_norm(&twice.sub(&once).map_err(|e| e.to_string())?) / frob_norm(&once).max(1.0));
    }
    Ok(worst)
}

/// Largest amount by which a random probe beats the prox point's objective.
fn prox_probes(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let specs = [
        RegularizerSpec::entry_l1(2),
        RegularizerSpec::slice_nuclear(1, 2),
        RegularizerSpec::overlapped_nuclear(1),
        RegularizerSpec::fiber_group(0, 2.0, 2),
    ];
    let mut worst = f64::NEG_INFINITY;
    for spec in specs {
        let dims = [2, 2, 3];
        let a = gaussian(&dims, rng);
        let tau = 0.3;
        let z = spec.prox(&a, tau, &ProxOptions::default()).map_err(|e| e.to_string())?;
        let objective = |x: &DenseTensor| -> Result<f64, String> {
            let d = x.sub(&a).map_err(|e| e.to_string())?;
            Ok(tau * spec.value(x).map_err(|e| e.to_string())? + 0.5 * frob_norm(&d).powi(2))
        };
        let best = objective(&z)?;
        for _ in 0..500 {
            let step = rng.random_range(1e-3..0.5);
            let probe = z.add(&gaussian(&dims, rng).scale(step)).map_err(|e| e.to_string())?;
            worst = worst.max(best - objective(&probe)?);
        }
    }
    Ok(worst)
}

fn glm_derivatives() -> f64 {
    let mut worst: f64 = 0.0;
    for family in [GlmFamily::logistic(), GlmFamily::poisson(1.0), GlmFamily::gaussian(1.0)] {
        for i in 0..=40 {
            let x = -5.0 + 0.25 * i as f64;
            let h = 1e-5;
            let fd = (family.cumulant(x + h) - family.cumulant(x - h)) / (2.0 * h);
            worst = worst.max(rel(fd, family.mu(x)));
        }
    }
    worst
}

fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        id: "selftest".into(),
        structure: RegularizerSpec::overlapped_nuclear(1),
        dims: vec![3, 3, 3],
        arms: 5,
        horizon: 100,
        family: GlmFamily::logistic(),
        contexts: ContextDistribution::StandardGaussian,
        delta: 0.01,
        c_explore: 1.0,
        c_lambda: 0.2,
        replications: 2,
        width_samples: 50,
        base_seed: 11,
        output_dir: "out".into(),
        workers: Some(1),
        fit: Default::default(),
        variants: Vec::new(),
    }
}

fn determinism() -> Result<(), String> {
    let cfg = tiny_config();
    let base = std::env::temp_dir().join(format!("tbandit-selftest-{}", std::process::id()));
    let mut contents = Vec::new();
    for run in 0..2 {
        let root = base.join(run.to_string());
        let summaries = run_experiment(&cfg, &root).map_err(|e| e.to_string())?;
        let s = &summaries[0];
        let summary = std::fs::read(&s.summary_csv).map_err(|e| e.to_string())?;
        let reps = std::fs::read(&s.reps_csv).map_err(|e| e.to_string())?;
        let rows = summary.iter().filter(|&&b| b == b'\n').count();
        if rows != cfg.horizon + 1 {
            return Err(format!("summary has {rows} lines, expected {}", cfg.horizon + 1));
        }
        contents.push((summary, reps));
    }
    let _ = std::fs::remove_dir_all(&base);
    if contents[0] != contents[1] {
        return Err("reruns produced different CSV bytes".into());
    }
    Ok(())
}

pub fn run_selftest() -> Vec<Check> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = Vec::new();
    checks.push(match tensor_identities(&mut rng) {
        Ok(err) => Check {
            name: "tensor identities",
            passed: err < 1e-10,
            detail: format!("worst error {err:.2e}"),
        },
        Err(e) => Check {
            name: "tensor identities",
            passed: false,
            detail: e,
        },
    });
    checks.push(match prox_probes(&mut rng) {
        Ok(gain) => Check {
            name: "prox optimality",
            passed: gain <= 1e-6,
            detail: format!("best probe improvement {gain:.2e}"),
        },
        Err(e) => Check {
            name: "prox optimality",
            passed: false,
            detail: e,
        },
    });
    let glm = glm_derivatives();
    checks.push(Check {
        name: "mean equals cumulant derivative",
        passed: glm < 1e-6,
        detail: format!("worst relative error {glm:.2e}"),
    });
    checks.push(match determinism() {
        Ok(()) => Check {
            name: "byte-identical reruns",
            passed: true,
            detail: "2 runs, 100 rounds".into(),
        },
        Err(e) => Check {
            name: "byte-identical reruns",
            passed: false,
            detail: e,
        },
    });
    let secs = started.elapsed().as_secs_f64();
    checks.push(Check {
        name: "runtime",
        passed: secs < 60.0,
        detail: format!("{secs:.1} s"),
    });
    checks
}
