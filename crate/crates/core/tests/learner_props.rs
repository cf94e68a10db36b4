mod common;

use common::{random_bundle, random_obs, random_state, random_transition, LossFn};
use gridmix::dense_net::finite_diff_check;
use gridmix::qmix::{argmax, MixerMode, Which};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_tot_is_monotone_in_every_agent(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_bundle(&mut rng, MixerMode::Qmix, n, 1, 12);
        let state = random_state(&mut rng, 12);
        let qs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let base = b.mix(Which::Online, &qs, &state).unwrap();
        for i in 0..n {
            for delta in [1e-3, 0.1, 1.0] {
                let mut up = qs.clone();
                up[i] += delta;
                prop_assert!(b.mix(Which::Online, &up, &state).unwrap() - base >= -1e-12);
            }
        }
    }

    #[test]
    fn greedy_profile_maximizes_q_tot(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_bundle(&mut rng, MixerMode::Qmix, n, 1, 12);
        let state = random_state(&mut rng, 12);
        let q: Vec<[f64; 5]> = (0..n).map(|_| b.agent_q_values(Which::Online, &random_obs(&mut rng, 1)).unwrap()).collect();
        let greedy: Vec<usize> = q.iter().map(|v| argmax(v)).collect();
        let value = |profile: &[usize]| {
            let qs: Vec<f64> = profile.iter().enumerate().map(|(i, &a)| q[i][a]).collect();
            b.mix(Which::Online, &qs, &state).unwrap()
        };
        let best = value(&greedy);
        for code in 0..5usize.pow(n as u32) {
            let profile: Vec<usize> = (0..n).map(|i| code / 5usize.pow(i as u32) % 5).collect();
            prop_assert!(value(&profile) <= best + 1e-12);
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences_in_every_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for mode in [MixerMode::Qmix, MixerMode::Vdn, MixerMode::Iql] {
        for _ in 0..10 {
            let n = rng.gen_range(1..4);
            let mut b = random_bundle(&mut rng, mode, n, 1, 12);
            let batch: Vec<_> = (0..6).map(|_| random_transition(&mut rng, n, 1, 12)).collect();
            let refs: Vec<_> = batch.iter().collect();
            let params = b.online_params().to_vec();
            let mut f = LossFn::new(&mut b, &refs);
            let rep = finite_diff_check(&params, &mut f, 1e-5, None, 1e-6, &mut rng);
            assert!(rep.max_rel_error < 1e-4, "{mode:?}: {rep:?}");
            assert!(rep.coords_checked > rep.kinks_skipped);
        }
    }
}

#[test]
fn training_reduces_loss_on_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mode in [MixerMode::Qmix, MixerMode::Vdn, MixerMode::Iql] {
        let mut b = random_bundle(&mut rng, mode, 2, 1, 12);
        let batch: Vec<_> = (0..16).map(|_| random_transition(&mut rng, 2, 1, 12)).collect();
        let refs: Vec<_> = batch.iter().collect();
        let first = b.loss_and_gradient(&refs).unwrap().0.loss;
        for _ in 0..300 {
            b.train_step(&refs).unwrap();
        }
        let last = b.loss_and_gradient(&refs).unwrap().0.loss;
        assert!(last < first, "{mode:?}: {first} -> {last}");
    }
}
