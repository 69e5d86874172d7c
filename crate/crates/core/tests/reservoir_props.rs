use nalgebra::DMatrix;
use patchecho::reservoir::{batch_final_states, run, EsnParams};
use patchecho::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn eigen_radius(m: &Tensor<f32>) -> f64 {
    let n = m.shape()[0];
    let a = DMatrix::from_row_slice(n, n, &m.to_f64_vec());
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn inputs(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Tensor<f32> {
    Tensor::new(vec![steps, dim], (0..steps * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn init_hits_requested_spectral_radius(size in 4usize..40, rho in 0.1f64..1.2, sparsity in 0.0f64..0.5, seed in any::<u64>()) {
        let esn = EsnParams::init(size, 3, rho, sparsity, seed).unwrap();
        let actual = eigen_radius(esn.w_reservoir());
        prop_assert!((actual - rho).abs() <= 0.02 * rho, "target {rho}, eigen radius {actual}");
    }

    #[test]
    fn states_stay_inside_tanh_range(size in 2usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let esn = EsnParams::init(size, 4, 1.5, 0.0, seed).unwrap();
        let u = inputs(&mut rng, 20, 4).map(|v| v * 10.0);
        let states = run(&esn, &u, &vec![0.0; size]).unwrap();
        prop_assert!(states.states.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn batching_does_not_change_states(batch in 1usize..6, steps in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let esn = EsnParams::init(16, 5, 0.9, 0.0, seed).unwrap();
        let seqs: Vec<Tensor<f32>> = (0..batch).map(|_| inputs(&mut rng, steps, 5)).collect();
        let refs: Vec<&Tensor<f32>> = seqs.iter().collect();
        let batched = batch_final_states(&esn, &refs).unwrap();
        for (i, s) in seqs.iter().enumerate() {
            let single = run(&esn, s, &[0.0; 16]).unwrap();
            for (a, b) in batched.row(i).iter().zip(single.last()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn dense_fifty_unit_radius_matches_eigenvalues() {
    for seed in 0..5 {
        let esn = EsnParams::init(50, 6, 0.9, 0.0, seed).unwrap();
        let r = eigen_radius(esn.w_reservoir());
        assert!((0.882..=0.918).contains(&r), "seed {seed}: {r}");
    }
}

#[test]
fn forgets_initial_state_at_default_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..5 {
        let esn = EsnParams::init(100, 8, 0.9, 0.0, seed).unwrap();
        let u = inputs(&mut rng, 200, 8);
        let a: Vec<f32> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (fa, fb) = (run(&esn, &u, &a).unwrap(), run(&esn, &u, &b).unwrap());
        let dist: f32 = fa.last().iter().zip(fb.last()).map(|(x, y)| (x - y).powi(2)).sum::<f32>().sqrt();
        assert!(dist <= 1e-6, "seed {seed}: {dist}");
    }
}
