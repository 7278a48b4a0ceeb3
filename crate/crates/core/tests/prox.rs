//! Proximal maps against closed forms and random probing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tensor_bandit::tensor::frob_norm;
use tensor_bandit::{DenseTensor, ProxOptions, RegularizerSpec};

fn gaussian(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    let len = dims.iter().product();
    DenseTensor::from_vec(dims, (0..len).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn objective(spec: &RegularizerSpec, a: &DenseTensor, tau: f64, z: &DenseTensor) -> f64 {
    tau * spec.value(z).unwrap() + 0.5 * frob_norm(&z.sub(a).unwrap()).powi(2)
}

/// Largest objective improvement any of `probes` perturbations of the prox
/// point achieves. Radii span three decades; some probes land on zero entries.
fn best_probe_gain(spec: &RegularizerSpec, a: &DenseTensor, tau: f64, z: &DenseTensor, probes: usize, rng: &mut ChaCha8Rng) -> f64 {
    let base = objective(spec, a, tau, z);
    let mut gain = f64::NEG_INFINITY;
    for i in 0..probes {
        let radius = 10f64.powf(rng.random_range(-3.0..0.0));
        let mut probe = z.add(&gaussian(a.dims(), rng).scale(radius)).unwrap();
        if i % 4 == 0 {
            let mask: Vec<bool> = (0..probe.len()).map(|_| rng.random_bool(0.3)).collect();
            let data = probe.data().iter().zip(&mask).map(|(v, m)| if *m { 0.0 } else { *v }).collect();
            probe = DenseTensor::from_vec(a.dims(), data).unwrap();
        }
        gain = gain.max(base - objective(spec, a, tau, &probe));
    }
    gain
}

fn scalar_soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

#[test]
fn entry_l1_prox_is_scalar_soft_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = RegularizerSpec::entry_l1(1);
    for _ in 0..20 {
        let a = gaussian(&[4, 3, 5], &mut rng);
        let tau = rng.random_range(0.01..2.0);
        let z = spec.prox(&a, tau, &ProxOptions::default()).unwrap();
        for (zi, ai) in z.data().iter().zip(a.data()) {
            assert_eq!(*zi, scalar_soft_threshold(*ai, tau));
        }
    }
}

#[test]
fn slice_nuclear_prox_beats_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for modes in [[0, 1], [0, 2], [1, 2]] {
        let mut spec = RegularizerSpec::slice_nuclear(1, 1);
        spec.kind = tensor_bandit::RegularizerKind::SliceNuclear { modes };
        let a = gaussian(&[3, 3, 4], &mut rng);
        let tau = 0.7;
        let z = spec.prox(&a, tau, &ProxOptions::default()).unwrap();
        let gain = best_probe_gain(&spec, &a, tau, &z, 10_000, &mut rng);
        assert!(gain <= 1e-12, "modes {modes:?}: probe improved by {gain:e}");
    }
}

#[test]
fn overlapped_nuclear_prox_beats_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = RegularizerSpec::overlapped_nuclear(1);
    for tau in [0.1, 0.5, 1.5] {
        let a = gaussian(&[2, 2, 2], &mut rng);
        let z = spec.prox(&a, tau, &ProxOptions::default()).unwrap();
        let gain = best_probe_gain(&spec, &a, tau, &z, 10_000, &mut rng);
        assert!(gain <= 1e-4, "tau {tau}: probe improved by {gain:e}");
    }
}

#[test]
fn fiber_prox_is_blockwise_shrinkage() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dims = [3, 4, 2];
    for mode in 0..3 {
        let spec = RegularizerSpec::fiber_group(mode, 2.0, 1);
        let a = gaussian(&dims, &mut rng);
        let tau = 1.2;
        let z = spec.prox(&a, tau, &ProxOptions::default()).unwrap();
        // Walk every fiber along `mode` by fixing the other two indices.
        let others: Vec<usize> = (0..3).filter(|&k| k != mode).collect();
        for p in 0..dims[others[0]] {
            for q in 0..dims[others[1]] {
                let at = |i: usize| {
                    let mut idx = [0; 3];
                    idx[mode] = i;
                    idx[others[0]] = p;
                    idx[others[1]] = q;
                    idx
                };
                let norm = (0..dims[mode]).map(|i| a.get(&at(i)).powi(2)).sum::<f64>().sqrt();
                let factor = (1.0 - tau / norm).max(0.0);
                for i in 0..dims[mode] {
                    let expect = factor * a.get(&at(i));
                    assert!((z.get(&at(i)) - expect).abs() < 1e-14);
                }
            }
        }
        assert!(best_probe_gain(&spec, &a, tau, &z, 2_000, &mut rng) <= 1e-12);
    }
}

#[test]
fn fiber_prox_rejects_other_exponents() {
    let spec = RegularizerSpec::fiber_group(0, 3.0, 1);
    let a = DenseTensor::filled(&[2, 2, 2], 1.0).unwrap();
    assert!(spec.prox(&a, 0.5, &ProxOptions::default()).is_err());
}

#[test]
fn large_weight_zeroes_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = gaussian(&[3, 3, 3], &mut rng);
    for spec in [
        RegularizerSpec::entry_l1(1),
        RegularizerSpec::slice_nuclear(1, 1),
        RegularizerSpec::fiber_group(0, 2.0, 1),
        RegularizerSpec::overlapped_nuclear(1),
    ] {
        let tau = 10.0 * spec.dual(&a).unwrap();
        let z = spec.prox(&a, tau, &ProxOptions::default()).unwrap();
        assert!(z.max_abs() < 1e-6, "{:?}", spec.kind);
    }
}
