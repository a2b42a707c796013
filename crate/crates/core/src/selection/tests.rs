use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::em::{em_fit, initialize, FitConfig, StartMode};
use crate::model::{random_parameters, OrdinalSchema, PackLayout, Thresholds};
use crate::numerics::optimize::{central_difference_gradient, MaximizeOptions};
use crate::pairwise::{
    build_pairwise_tables, objective_and_gradient, pairwise_loglik, Objective, PairwiseTables,
};
use crate::simulate::{sample_rows, ScenarioSpec};

fn data(schema: &OrdinalSchema, g: usize, q: usize, n: usize, seed: u64) -> PairwiseTables {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_parameters(schema, g, q, &mut rng).unwrap();
    let spec = ScenarioSpec::from_parameters("t", &truth).unwrap();
    let (rows, _) = sample_rows(&spec, n, seed).unwrap();
    build_pairwise_tables(&rows, None, schema).unwrap()
}

/// Two components on a 5 x 5 x 5 schema sharing one correlated covariance and
/// differing by an oblique mean shift, so a (2, 1) fit sits in the interior.
fn two_groups(n: usize, seed: u64) -> PairwiseTables {
    let cov = DMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.1, 0.2, 1.0, 0.3, 0.1, 0.3, 1.0]);
    let spec = ScenarioSpec::new(
        "two-groups",
        vec![0.4, 0.6],
        vec![
            DVector::from_vec(vec![-0.2, 0.5, 2.4]),
            DVector::from_vec(vec![2.6, 2.3, 0.9]),
        ],
        vec![cov.clone(), cov],
        Thresholds::new(vec![vec![0.0, 1.0, 2.0, 3.0]; 3]).unwrap(),
        true,
        false,
        1,
    )
    .unwrap();
    let (rows, _) = sample_rows(&spec, n, seed).unwrap();
    build_pairwise_tables(&rows, None, &spec.schema()).unwrap()
}

fn bivariate(n: usize, seed: u64) -> PairwiseTables {
    let spec = ScenarioSpec::new(
        "bivariate",
        vec![1.0],
        vec![DVector::from_vec(vec![0.8, 0.4])],
        vec![DMatrix::from_row_slice(2, 2, &[1.2, 0.5, 0.5, 0.9])],
        Thresholds::new(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0]]).unwrap(),
        false,
        false,
        2,
    )
    .unwrap();
    let (rows, _) = sample_rows(&spec, n, seed).unwrap();
    build_pairwise_tables(&rows, None, &spec.schema()).unwrap()
}

fn tight() -> FitConfig {
    FitConfig {
        n_starts: 1,
        em_tol: 1e-9,
        max_em_iters: 2000,
        mstep: MaximizeOptions {
            gtol: 1e-8,
            ftol: 1e-12,
            max_evals: 400,
        },
        seed: 0,
        screen_tol: None,
    }
}

#[test]
fn total_score_is_the_loglik_gradient() {
    let t = two_groups(300, 1);
    let schema = t.schema().clone();
    let p = initialize(&t, 2, 2, 0, StartMode::Rational).unwrap();
    let layout = PackLayout::new(&schema, 2, 2).unwrap();
    let theta = layout.pack(&p).unwrap();
    let scores = pair_cell_scores(&p, &t).unwrap();
    let total = total_score(&scores, &t);
    let fd = central_difference_gradient(
        |x| pairwise_loglik(&layout.unpack(x).unwrap(), &t).unwrap(),
        &theta,
        SCORE_STEP,
    );
    let (_, analytic) = objective_and_gradient(&layout, &p, &t, Objective::Pairwise).unwrap();
    for k in 0..theta.len() {
        assert!(
            (total[k] - fd[k]).abs() <= 1e-8 * (1.0 + fd[k].abs()),
            "{k}"
        );
        assert!(
            (total[k] - analytic[k]).abs() <= 1e-4 * (1.0 + analytic[k].abs()),
            "{k}: {} vs {}",
            total[k],
            analytic[k]
        );
    }
}

#[test]
fn scores_vanish_off_the_pair() {
    // variable 2 has two free cut increments; pair (0, 1) must not see them
    let schema = OrdinalSchema::new(vec![3, 3, 5]).unwrap();
    let t = data(&schema, 1, 3, 100, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_parameters(&schema, 1, 3, &mut rng).unwrap();
    let layout = PackLayout::new(&schema, 1, 3).unwrap();
    let scores = pair_cell_scores(&p, &t).unwrap();
    let th = layout.thresholds.clone();
    assert_eq!(th.len(), 2);
    let pair01 = schema.pair_index(0, 1);
    for c in 0..9 {
        for k in th.clone() {
            assert!(scores.cell(pair01, c)[k].abs() < 1e-10);
        }
    }
    let pair02 = schema.pair_index(0, 2);
    assert!((0..15).any(|c| scores.cell(pair02, c)[th.start].abs() > 1e-3));
}

#[test]
fn one_pair_sensitivity_equals_variability() {
    let t = bivariate(400, 4);
    let start = initialize(&t, 1, 2, 0, StartMode::Rational).unwrap();
    let fit = em_fit(
        &t,
        &start,
        &FitConfig {
            em_tol: 1e-3,
            ..tight()
        },
    )
    .unwrap();
    let m = sensitivity_variability(&fit.params, &t).unwrap();
    assert!((&m.sensitivity - &m.variability).amax() < 1e-8);
    let d = m.dim() as f64;
    let pen = m.trace_penalty().unwrap();
    assert!((pen - d).abs() < 1e-6 * d, "{pen} vs {d}");
    assert!(pen > 0.0);
}

#[test]
fn matrices_by_hand() {
    let schema = OrdinalSchema::new(vec![3, 3, 4]).unwrap();
    let t = data(&schema, 1, 3, 150, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_parameters(&schema, 1, 3, &mut rng).unwrap();
    let scores = pair_cell_scores(&p, &t).unwrap();
    let m = score_matrices(&scores, &t);
    let d = scores.dim();
    let n = t.n_obs() as f64;
    let cats = schema.categories();
    for a in 0..d {
        for b in 0..d {
            let mut h = 0.0;
            for (k, _) in schema.pairs().enumerate() {
                for (c, cnt) in t.pair_counts(k).iter().enumerate() {
                    h += cnt * scores.cell(k, c)[a] * scores.cell(k, c)[b];
                }
            }
            let mut v = 0.0;
            for (pat, cnt) in t.patterns() {
                let s = |x: usize| -> f64 {
                    schema
                        .pairs()
                        .enumerate()
                        .map(|(k, (i, j))| scores.cell(k, pat[i] * cats[j] + pat[j])[x])
                        .sum()
                };
                v += *cnt as f64 * s(a) * s(b);
            }
            assert!((m.sensitivity[(a, b)] - h / n).abs() < 1e-10 * (1.0 + h.abs() / n));
            assert!((m.variability[(a, b)] - v / n).abs() < 1e-10 * (1.0 + v.abs() / n));
        }
    }
    assert!((&m.sensitivity - m.sensitivity.transpose()).amax() <= 1e-10);
    let eig = m.variability.clone().symmetric_eigen();
    assert!(eig.eigenvalues.min() > -1e-8);
}

#[test]
fn penalty_is_invariant_to_rescaling_a_coordinate() {
    let t = two_groups(500, 7);
    let schema = t.schema().clone();
    let start = initialize(&t, 2, 1, 0, StartMode::Rational).unwrap();
    let fit = em_fit(
        &t,
        &start,
        &FitConfig {
            em_tol: 1e-4,
            ..tight()
        },
    )
    .unwrap();
    let base = score_matrices(&pair_cell_scores(&fit.params, &t).unwrap(), &t)
        .trace_penalty()
        .unwrap();
    let d = PackLayout::new(&schema, 2, 1).unwrap().len();
    for k in [0, d / 2, d - 1] {
        let mut scale = vec![1.0; d];
        scale[k] = 2.0;
        let pen = score_matrices(
            &pair_cell_scores_scaled(&fit.params, &t, Some(&scale)).unwrap(),
            &t,
        )
        .trace_penalty()
        .unwrap();
        assert!((pen - base).abs() < 1e-3 * base, "{k}: {pen} vs {base}");
    }
}

#[test]
fn converged_total_score_is_small() {
    let schema = OrdinalSchema::new(vec![3, 4, 3]).unwrap();
    let t = data(&schema, 1, 3, 400, 8);
    let start = initialize(&t, 1, 3, 0, StartMode::Rational).unwrap();
    let cfg = tight();
    let fit = em_fit(&t, &start, &cfg).unwrap();
    let total = total_score(&pair_cell_scores(&fit.params, &t).unwrap(), &t);
    let norm = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(norm <= 10.0 * cfg.mstep.gtol * t.n_obs() as f64, "{norm}");
}

#[test]
fn grid_bookkeeping() {
    let t = two_groups(300, 10);
    let cfg = FitConfig {
        n_starts: 2,
        em_tol: 1e-3,
        max_em_iters: 200,
        ..FitConfig::default()
    };
    let r = grid_select(&t, &[2], &[1], &cfg).unwrap();
    assert_eq!(r.chosen, (2, 1));
    assert_eq!(r.grid.len(), 1);
    let big = 9;
    assert!(!crate::model::count_parameters(3, 3, big, t.schema().categories()).identifiable);
    let r = grid_select(&t, &[1, big], &[3], &cfg).unwrap();
    assert_eq!(r.chosen, (1, 3));
    assert_eq!(r.skipped.len(), 1);
    assert_eq!((r.skipped[0].n_components, r.skipped[0].n_signal), (big, 3));
    let json = serde_json::to_string(&r).unwrap();
    let back: SelectionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    assert!(r.table().contains('*'));
    assert!(grid_select(&t, &[], &[1], &cfg).is_err());
}

#[test]
fn cbic_requires_convergence() {
    let schema = OrdinalSchema::new(vec![3, 3, 3]).unwrap();
    let t = data(&schema, 2, 1, 200, 11);
    let start = initialize(&t, 2, 1, 0, StartMode::Rational).unwrap();
    let cfg = FitConfig {
        max_em_iters: 1,
        em_tol: 1e-12,
        ..tight()
    };
    let fit = em_fit(&t, &start, &cfg).unwrap();
    assert!(!fit.converged);
    assert!(matches!(cbic(&fit, &t), Err(crate::Error::Selection(_))));
}
