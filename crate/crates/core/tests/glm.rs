//! Link functions and the data term against finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tensor_bandit::glm::{glm_loss, glm_loss_gradient};
use tensor_bandit::{DenseTensor, GlmFamily};

fn families() -> [GlmFamily; 3] {
    [GlmFamily::logistic(), GlmFamily::poisson(1.0), GlmFamily::gaussian(1.0)]
}

#[test]
fn mean_is_cumulant_derivative() {
    for family in families() {
        for i in 0..=200 {
            let x = -5.0 + 0.05 * i as f64;
            let h = 1e-5;
            let fd = (family.cumulant(x + h) - family.cumulant(x - h)) / (2.0 * h);
            let mu = family.mu(x);
            assert!((fd - mu).abs() / mu.abs().max(1e-12) < 1e-6, "{:?} at {x}: {fd} vs {mu}", family.kind);
        }
    }
}

#[test]
fn mean_slope_is_bounded_on_unit_interval() {
    for family in families() {
        for i in 0..=400 {
            let x = -1.0 + 0.005 * i as f64;
            let slope = family.mu_prime(x);
            let h = 1e-6;
            let fd = (family.mu(x + h) - family.mu(x - h)) / (2.0 * h);
            assert!((slope - fd).abs() < 1e-6 * slope.max(1.0));
            assert!(slope.abs() <= family.k_mu() * (1.0 + 1e-12), "{:?} at {x}", family.kind);
        }
    }
    assert_eq!(GlmFamily::logistic().k_mu(), 0.25);
    assert_eq!(GlmFamily::poisson(1.0).k_mu(), std::f64::consts::E);
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dims = [3, 2, 2];
    for family in families() {
        let theta = DenseTensor::from_vec(&dims, (0..12).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect()).unwrap();
        let contexts: Vec<DenseTensor> = (0..30)
            .map(|_| DenseTensor::from_vec(&dims, (0..12).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect()).unwrap())
            .collect();
        let rewards: Vec<f64> = contexts
            .iter()
            .map(|_| family.sample_reward(rng.random_range(-1.0..1.0), &mut rng))
            .collect();
        let grad = glm_loss_gradient(&theta, &contexts, &rewards, &family).unwrap();
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut up = theta.data().to_vec();
            let mut down = theta.data().to_vec();
            up[j] += h;
            down[j] -= h;
            let f = |v: Vec<f64>| glm_loss(&DenseTensor::from_vec(&dims, v).unwrap(), &contexts, &rewards, &family).unwrap();
            let fd = (f(up) - f(down)) / (2.0 * h);
            let g = grad.data()[j];
            assert!((fd - g).abs() / g.abs().max(1e-3) < 1e-4, "{:?} coord {j}: {fd} vs {g}", family.kind);
        }
    }
}

#[test]
fn loss_matches_hand_computation() {
    // Logistic, one sample: b(η) − yη with η = 0.5, y = 1.
    let dims = [2];
    let theta = DenseTensor::from_vec(&dims, vec![0.5, 0.0]).unwrap();
    let x = DenseTensor::from_vec(&dims, vec![1.0, 7.0]).unwrap();
    let loss = glm_loss(&theta, &[x], &[1.0], &GlmFamily::logistic()).unwrap();
    let expect = (1.0 + 0.5f64.exp()).ln() - 0.5;
    assert!((loss - expect).abs() < 1e-14);
}
