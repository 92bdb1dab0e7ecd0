use nalgebra::{DMatrix, DVector};
use regstab_core::oracle::population_beta_hat;
use regstab_core::permtest::{random_permutation, StabilityEngine};
use regstab_core::regression::{beta_hat_subset, GammaEstimate};
use regstab_core::selection::random_selection;
use regstab_core::sem::{generate_sem_params, sample_dataset, PriorKind, SemDesign};
use regstab_core::{permutation_test, stability_statistic, CoefficientSet, Dataset, SubsetFamily};

/// Direct normal-equation solve of Y on [1, X, W_S]; returns the X block.
fn naive_beta(data: &Dataset, s: &[usize]) -> DVector<f64> {
    let n = data.rows();
    let d = data.n_causes();
    let p = 1 + d + s.len();
    let design = DMatrix::from_fn(n, p, |i, j| match j {
        0 => 1.0,
        j if j <= d => data.x()[(i, j - 1)],
        j => data.w()[(i, s[j - 1 - d])],
    });
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * data.y();
    let coef = gram.try_inverse().unwrap() * rhs;
    coef.rows(1, d).into_owned()
}

fn naive_stability(vs: &[DVector<f64>]) -> f64 {
    let m = vs.len() as f64;
    let mean = vs.iter().fold(DVector::zeros(vs[0].len()), |a, v| a + v) / m;
    let mean_sq: f64 = vs.iter().map(|v| v.norm_squared()).sum::<f64>() / m;
    1.0 - mean.norm_squared() / mean_sq
}

#[test]
fn engine_matches_naive_regressions() {
    let p = generate_sem_params(2, 15, 3, 1.0, 2.0, PriorKind::Sphere, 21).unwrap();
    let data = sample_dataset(&p, 80, 22).unwrap();
    let family = random_selection(15, 4, 12, 23).unwrap();
    let engine = StabilityEngine::from_family(&data, &family).unwrap();
    let coeffs = engine.coefficients(data.y());
    let mut naive = Vec::new();
    for (j, s) in family.iter().enumerate() {
        let b = naive_beta(&data, s);
        let lib = beta_hat_subset(&data, s).unwrap();
        for i in 0..2 {
            assert!((coeffs[(i, j)] - b[i]).abs() < 1e-9);
            assert!((lib[i] - b[i]).abs() < 1e-9);
        }
        naive.push(b);
    }
    let v = engine.statistic(data.y()).unwrap();
    assert!((v - naive_stability(&naive)).abs() < 1e-10);
    let lib = stability_statistic(&CoefficientSet::new(naive.clone()).unwrap()).unwrap();
    assert!((lib - naive_stability(&naive)).abs() < 1e-12);
}

#[test]
fn sample_coefficients_approach_population_values() {
    let mut design = SemDesign::new(1, 6, 2, 1.0, 1.5);
    design.a_variance = Some(1.0);
    let p = design.generate(31).unwrap();
    let data = sample_dataset(&p, 200_000, 32).unwrap();
    for s in [vec![0], vec![1, 3], vec![0, 2, 4, 5]] {
        let sample = beta_hat_subset(&data, &s).unwrap()[0];
        let pop = population_beta_hat(&p, &s).unwrap()[0];
        assert!((sample - pop).abs() < 0.02, "{s:?}: {sample} vs {pop}");
    }
}

#[test]
fn null_distribution_is_reproducible_from_public_pieces() {
    let p = generate_sem_params(1, 10, 2, 0.0, 1.0, PriorKind::Sphere, 41).unwrap();
    let data = sample_dataset(&p, 50, 42).unwrap();
    let family = random_selection(10, 3, 8, 43).unwrap();
    let gamma = GammaEstimate::oracle(p.gamma.clone());
    let res = permutation_test(&data, &family, &gamma, 30, 44).unwrap();

    let engine = StabilityEngine::from_family(&data, &family).unwrap();
    let fitted = data.w() * &p.gamma;
    let resid = data.y() - &fitted;
    for (i, v) in res.v_null.iter().enumerate() {
        let perm = random_permutation(50, 44, i);
        let y_pi = &fitted + DVector::from_fn(50, |r, _| resid[perm[r]]);
        assert!((engine.statistic(&y_pi).unwrap() - v).abs() < 1e-12);
    }
    let below = res.v_null.iter().filter(|v| **v <= res.v_observed).count();
    assert_eq!(res.p_value, (below + 1) as f64 / 31.0);
}

#[test]
fn more_permutations_extend_the_same_draws() {
    let p = generate_sem_params(1, 10, 2, 0.5, 1.0, PriorKind::Sphere, 51).unwrap();
    let data = sample_dataset(&p, 40, 52).unwrap();
    let family = random_selection(10, 3, 6, 53).unwrap();
    let gamma = GammaEstimate::oracle(p.gamma.clone());
    let short = permutation_test(&data, &family, &gamma, 20, 9).unwrap();
    let long = permutation_test(&data, &family, &gamma, 60, 9).unwrap();
    assert_eq!(short.v_null[..], long.v_null[..20]);
}

#[test]
fn causal_effect_gives_small_p_and_null_does_not_collapse() {
    let mut design = SemDesign::new(1, 40, 3, 3.0, 1.0);
    design.a_variance = Some(0.0);
    let p = design.generate(61).unwrap();
    let data = sample_dataset(&p, 200, 62).unwrap();
    let family = random_selection(40, 5, 30, 63).unwrap();
    let res = permutation_test(&data, &family, &GammaEstimate::oracle(p.gamma.clone()), 99, 64).unwrap();
    assert_eq!(res.p_value, 0.01);

    let null = p.with_beta(DVector::zeros(1)).unwrap();
    let ps: Vec<f64> = (0..40)
        .map(|rep| {
            let data = sample_dataset(&null, 200, 100 + rep).unwrap();
            permutation_test(&data, &family, &GammaEstimate::oracle(null.gamma.clone()), 19, rep).unwrap().p_value
        })
        .collect();
    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
    // Uniform on {1/20, ..., 1}: mean 0.525, sd of the mean ≈ 0.046.
    assert!((mean - 0.525).abs() < 0.2, "mean p {mean}");
}

#[test]
fn lifted_family_selects_the_same_columns() {
    let p = generate_sem_params(1, 8, 1, 1.0, 1.0, PriorKind::Sphere, 71).unwrap();
    let data = sample_dataset(&p, 40, 72).unwrap();
    let pool = [1, 3, 4, 6];
    let sub = data.select_background(&pool).unwrap();
    let local = SubsetFamily::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
    let lifted = local.lift(&pool, 8).unwrap();
    assert_eq!(lifted.subsets(), &[vec![1, 4], vec![3, 6]]);
    for (a, b) in local.iter().zip(lifted.iter()) {
        let x = beta_hat_subset(&sub, a).unwrap();
        let y = beta_hat_subset(&data, b).unwrap();
        assert!((x - y).norm() < 1e-12);
    }
}
