mod common;

use ndarray::Array2;
use proptest::prelude::*;

use terrasonic::audio::{stft, AudioClip, StftParams, WindowFn};
use terrasonic::cluster::{clustering_accuracy, hungarian, nmi};
use terrasonic::geometry::{CameraModel, Pose};
use terrasonic::imagery::{encode_class, LabelMask};
use terrasonic::mapplan::{path_cost, plan, CostMap, SemanticMap};
use terrasonic::Exec;

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hungarian_matches_brute_force(vals in proptest::collection::vec(-50.0f64..50.0, 25), n in 1usize..=5) {
        let cost = Array2::from_shape_fn((n, n), |(i, j)| vals[i * 5 + j]);
        let a = hungarian(&cost).unwrap();
        prop_assert!((a.cost - common::brute_force_assignment(&cost)).abs() < 1e-9);
        let mut seen = a.perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn accuracy_matches_exhaustive_mapping((pred, truth) in (1usize..40).prop_flat_map(|n| (labels(n, 4), labels(n, 4)))) {
        let ours = clustering_accuracy(&pred, &truth).unwrap();
        prop_assert!((ours - common::exhaustive_accuracy(&pred, &truth, 4)).abs() < 1e-9);
    }

    #[test]
    fn nmi_is_symmetric_and_label_invariant((a, b) in (1usize..40).prop_flat_map(|n| (labels(n, 5), labels(n, 5)))) {
        let v = nmi(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - nmi(&b, &a).unwrap()).abs() < 1e-12);
        let renamed: Vec<usize> = b.iter().map(|&x| (x * 3 + 7) % 5 + 100).collect();
        prop_assert!((v - nmi(&a, &renamed).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn stft_matches_direct_dft(x in proptest::collection::vec(-1.0f64..1.0, 64..200), hann in any::<bool>()) {
        let params = StftParams {
            window_size: 32,
            hop: 16,
            window_fn: if hann { WindowFn::Hann } else { WindowFn::Rectangular },
        };
        let clip = AudioClip::new(x.clone(), 8000).unwrap();
        let z = stft(&clip, &params).unwrap();
        let oracle = common::direct_stft(&x, &params.window_fn.coefficients(32), 16);
        prop_assert_eq!(z.dim(), oracle.dim());
        for (a, b) in z.iter().zip(oracle.iter()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn planner_is_optimal(costs in proptest::collection::vec(1u8..9, 42), walls in proptest::collection::vec(any::<bool>(), 42)) {
        let (w, h) = (7, 6);
        let c: Vec<f64> = costs
            .iter()
            .zip(&walls)
            .enumerate()
            .map(|(i, (&v, &wall))| if wall && i % 3 == 0 && i != 0 && i != 41 { f64::INFINITY } else { v as f64 })
            .collect();
        let map = CostMap { width: w, height: h, costs: c.clone() };
        let oracle = common::bellman_ford(&c, w, h, (0, 0), (h - 1, w - 1));
        match plan(&map, (0, 0), (h - 1, w - 1)).unwrap() {
            Some(t) => {
                prop_assert!((t.cost - oracle.unwrap()).abs() < 1e-9);
                prop_assert!((path_cost(&map, &t.cells) - t.cost).abs() < 1e-9);
                for pair in t.cells.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    prop_assert_eq!(a.0.abs_diff(b.0) + a.1.abs_diff(b.1), 1);
                }
            }
            None => prop_assert!(oracle.is_none()),
        }
    }

    #[test]
    fn raising_costs_never_lowers_the_optimum(costs in proptest::collection::vec(1u8..9, 30), bump in 0usize..30) {
        let base: Vec<f64> = costs.iter().map(|&v| v as f64).collect();
        let mut raised = base.clone();
        raised[bump] += 5.0;
        let run = |c: Vec<f64>| plan(&CostMap { width: 6, height: 5, costs: c }, (0, 0), (4, 5)).unwrap().unwrap().cost;
        prop_assert!(run(raised) >= run(base));
    }

    #[test]
    fn fusion_is_order_invariant(seeds in proptest::collection::vec(0u64..1000, 2..5), order_seed in any::<u64>()) {
        let camera = CameraModel::birds_eye(16, 16, 0.25, 2.0).unwrap();
        let obs: Vec<(LabelMask, Pose)> = seeds
            .iter()
            .map(|&s| {
                let mut m = LabelMask::new(16, 16, 0);
                for (i, v) in m.data.iter_mut().enumerate() {
                    *v = encode_class(((i as u64 * 31 + s * 7) % 3) as usize);
                }
                (m, Pose::planar(0.0, 2.0 + (s % 5) as f64 * 0.5, 2.0 + (s % 7) as f64 * 0.3, 0.0).north_up())
            })
            .collect();
        let fuse = |order: &[usize]| {
            let mut map = SemanticMap::new(20, 20, 0.25, 3).unwrap();
            for &i in order {
                map.fuse_observation(&obs[i].0, &obs[i].1, &camera).unwrap();
            }
            map.votes
        };
        let forward: Vec<usize> = (0..obs.len()).collect();
        let mut shuffled = forward.clone();
        shuffled.rotate_left((order_seed as usize) % obs.len());
        shuffled.reverse();
        prop_assert_eq!(fuse(&forward), fuse(&shuffled));
    }
}

#[test]
fn parallel_and_sequential_stft_batches_agree() {
    let clips: Vec<AudioClip> = (0..6)
        .map(|k| AudioClip::new((0..2048).map(|i| ((i * (k + 3)) as f64 * 0.01).sin()).collect(), 8000).unwrap())
        .collect();
    let p = StftParams::default();
    let a = terrasonic::audio::spectrogram_batch(&clips, &p, Exec::Sequential).unwrap();
    let b = terrasonic::audio::spectrogram_batch(&clips, &p, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}
