use nalgebra::DMatrix;
use ordscr::classify::{ari, ipf_joint_posterior, loss_measure, PartitionMatrix};
use ordscr::model::{
    count_parameters, derive_moments, first_second_order_correlation, random_parameters,
    OrdinalSchema, PackLayout, ScrParameters,
};
use ordscr::numerics::{bivariate_normal_cdf, ipf_fit, MarginTargets};
use ordscr::pairwise::build_pairwise_tables;
use ordscr::simulate::summarize;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn schema_and_model() -> impl Strategy<Value = (Vec<usize>, usize, usize, u64)> {
    (2usize..=5).prop_flat_map(|p| {
        (
            prop::collection::vec(3usize..=5, p),
            1usize..=3,
            1usize..=p,
            any::<u64>(),
        )
    })
}

fn draw(cats: &[usize], g: usize, q: usize, seed: u64) -> (OrdinalSchema, ScrParameters) {
    let schema = OrdinalSchema::new(cats.to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_parameters(&schema, g, q, &mut rng).unwrap();
    (schema, p)
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pack_round_trip((cats, g, q, seed) in schema_and_model()) {
        let (schema, p) = draw(&cats, g, q, seed);
        let layout = PackLayout::new(&schema, g, q).unwrap();
        let theta = layout.pack(&p).unwrap();
        prop_assert_eq!(theta.len(), layout.len());
        let back = layout.unpack(&theta).unwrap();
        let tol = 1e-12;
        prop_assert!(p.weights.iter().zip(&back.weights).all(|(a, b)| (a - b).abs() <= tol));
        prop_assert!(close(&p.signal_loadings, &back.signal_loadings, tol));
        prop_assert!(close(&p.noise_loadings, &back.noise_loadings, tol));
        for (a, b) in p.shape_factors.iter().zip(&back.shape_factors) {
            prop_assert!(close(a, b, tol));
        }
        for (a, b) in p.signal_means.iter().zip(&back.signal_means) {
            prop_assert!(close(&DMatrix::from_column_slice(a.len(), 1, a.as_slice()), &DMatrix::from_column_slice(b.len(), 1, b.as_slice()), tol));
        }
        for (a, b) in p.noise_mean.iter().zip(back.noise_mean.iter()) {
            prop_assert!((a - b).abs() <= tol * (1.0 + b.abs()));
        }
        for (a, b) in p.thresholds.all().iter().flatten().zip(back.thresholds.all().iter().flatten()) {
            prop_assert!((a - b).abs() <= tol * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn component_covariances_are_positive_definite((cats, g, q, seed) in schema_and_model()) {
        let (_, p) = draw(&cats, g, q, seed);
        for m in derive_moments(&p).unwrap() {
            prop_assert!(m.covariance.clone().cholesky().is_some());
        }
    }

    #[test]
    fn correlations_are_bounded((cats, g, q, seed) in schema_and_model()) {
        let (_, p) = draw(&cats, g, q, seed);
        let r = first_second_order_correlation(&p);
        prop_assert!(r.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn parameter_count_is_monotone(
        cats in prop::collection::vec(3usize..=6, 2..=6),
        g in 1usize..=5,
        q_frac in 0.0f64..1.0,
        bump in 0usize..6,
    ) {
        let p = cats.len();
        let q = 1 + ((p - 1) as f64 * q_frac) as usize;
        let base = count_parameters(p, q, g, &cats).count;
        prop_assert!(count_parameters(p, q, g + 1, &cats).count >= base);
        let mut more = cats.clone();
        more[bump % p] += 1;
        prop_assert!(count_parameters(p, q, g, &more).count >= base);
    }

    #[test]
    fn rectangles_partition_the_plane(
        a in prop::collection::vec(-3.0f64..3.0, 1..5),
        b in prop::collection::vec(-3.0f64..3.0, 1..5),
        rho in -0.99f64..0.99,
    ) {
        let ext = |v: &[f64]| {
            let mut c = v.to_vec();
            c.sort_by(f64::total_cmp);
            let mut out = vec![f64::NEG_INFINITY];
            out.extend(c);
            out.push(f64::INFINITY);
            out
        };
        let (ea, eb) = (ext(&a), ext(&b));
        let f = |x: f64, y: f64| bivariate_normal_cdf(x, y, rho).unwrap();
        let mut total = 0.0;
        for wa in ea.windows(2) {
            for wb in eb.windows(2) {
                total += f(wa[1], wb[1]) - f(wa[0], wb[1]) - f(wa[1], wb[0]) + f(wa[0], wb[0]);
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ipf_keeps_mass_and_sign(
        init in prop::collection::vec(0.01f64..2.0, 24),
        row in prop::collection::vec(0.1f64..1.0, 6),
        col in prop::collection::vec(0.1f64..1.0, 4),
    ) {
        // a 2 x 3 x 4 array with margins over (0, 1) and (2)
        let shape = [2, 3, 4];
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| 5.0 * x / s).collect::<Vec<_>>()
        };
        let axes = [vec![0, 1], vec![2]];
        let tables = [norm(&row), norm(&col)];
        for m in 1..=2 {
            let targets = MarginTargets::new(axes[..m].to_vec(), tables[..m].to_vec()).unwrap();
            for sweeps in 1..=3 {
                let out = ipf_fit(&init, &shape, &targets, 0.0, sweeps).unwrap();
                let mass: f64 = out.array.iter().sum();
                prop_assert!((mass - 5.0).abs() <= 1e-12 * 5.0);
                prop_assert!(out.array.iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn ari_is_symmetric_and_label_invariant(
        a in prop::collection::vec(0usize..4, 2..40),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::{seq::SliceRandom, Rng};
        let b: Vec<usize> = a.iter().map(|&x| if rng.random_bool(0.3) { rng.random_range(0..4) } else { x }).collect();
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut rng);
        let relabeled: Vec<usize> = b.iter().map(|&x| perm[x]).collect();
        let pa = PartitionMatrix::new(a.clone(), 4).unwrap();
        let pb = PartitionMatrix::new(b, 4).unwrap();
        let pr = PartitionMatrix::new(relabeled, 4).unwrap();
        let ab = ari(&pa, &pb).unwrap();
        prop_assert!((ab - ari(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!((ab - ari(&pa, &pr).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
    }

    #[test]
    fn loss_is_a_pseudometric(seed in any::<u64>(), n in 1usize..20, g in 2usize..=4) {
        use rand::{seq::SliceRandom, Rng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut post = || -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..g).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / s).collect()
                })
                .collect()
        };
        let (x, y, z) = (post(), post(), post());
        let l = |a: &[Vec<f64>], b: &[Vec<f64>]| loss_measure(a, b).unwrap();
        prop_assert!((l(&x, &y) - l(&y, &x)).abs() < 1e-12);
        prop_assert!(l(&x, &z) <= l(&x, &y) + l(&y, &z) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&l(&x, &y)));
        let mut perm: Vec<usize> = (0..g).collect();
        perm.shuffle(&mut rng);
        let swapped: Vec<Vec<f64>> = x.iter().map(|r| perm.iter().map(|&k| r[k]).collect()).collect();
        prop_assert!(l(&x, &swapped) < 1e-12);
        prop_assert!(l(&x, &x) == 0.0);
    }

    #[test]
    fn summaries_ignore_replicate_order(
        values in prop::collection::vec(-10.0f64..10.0, 1..30),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = summarize("m", "ari", &values).unwrap();
        let b = summarize("m", "ari", &shuffled).unwrap();
        for (x, y) in [(a.mean, b.mean), (a.sd, b.sd), (a.q025, b.q025), (a.q25, b.q25), (a.q50, b.q50), (a.q75, b.q75), (a.q975, b.q975)] {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()) || (x.is_nan() && y.is_nan()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn joint_posteriors_are_distributions(
        cats in prop::collection::vec(3usize..=4, 3..=4),
        g in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let (schema, p) = draw(&cats, g, 1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        use rand::Rng;
        let rows: Vec<Vec<usize>> = (0..50)
            .map(|_| cats.iter().map(|&c| rng.random_range(1..=c)).collect())
            .collect();
        let t = build_pairwise_tables(&rows, None, &schema).unwrap();
        let post = ipf_joint_posterior(&p, &t).unwrap();
        for r in post.probabilities() {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
