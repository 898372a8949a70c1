//! Monte-Carlo checks of the samplers and predictors against closed forms.

use fracpredict_core::exact::{
    build_fcir_predictor, build_fou_predictor, fcir_predict_orthant_mc, orthant_expectation, OrthantSampling,
};
use fracpredict_core::simulation::{
    sample_fbm, sample_fcir, sample_fou, sample_integral_process, subsample, FbmSampler, PathSimulator,
};
use fracpredict_core::{
    evaluate_me_mse, fbm_cov, BlockConditional, Coefficient, CovarianceModel, HurstIndex, Matrix, TimeGrid,
};

fn h(v: f64) -> HurstIndex {
    HurstIndex::new(v).unwrap()
}

fn mean_se(x: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = x.clone().count() as f64;
    let m = x.clone().sum::<f64>() / n;
    let var = x.map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Sample covariance of columns `a` and `b` with the SE of the product mean.
fn cov_se(values: &Matrix, a: usize, b: usize) -> (f64, f64) {
    let n = values.rows();
    let ma = (0..n).map(|i| values[(i, a)]).sum::<f64>() / n as f64;
    let mb = (0..n).map(|i| values[(i, b)]).sum::<f64>() / n as f64;
    mean_se((0..n).map(|i| (values[(i, a)] - ma) * (values[(i, b)] - mb)))
}

#[test]
fn brownian_increments_have_mean_zero_and_variance_dt() {
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let dt = 1.0 / 64.0;
    let b = sample_fbm(h(0.5), &grid, 100_000, 1).unwrap();
    for k in 0..64 {
        let inc = (0..b.n_paths()).map(|i| b.path(i)[k + 1] - b.path(i)[k]);
        let (m, se) = mean_se(inc.clone());
        assert!(m.abs() < 4.0 * se, "step {k}: mean {m}");
        let (v, se_v) = mean_se(inc.map(|d| d * d));
        assert!((v - dt).abs() < 4.0 * se_v, "step {k}: var {v}");
    }
}

#[test]
fn persistent_covariance_at_one_and_two() {
    let grid = TimeGrid::uniform(2.0, 64).unwrap();
    let b = sample_fbm(h(0.7), &grid, 100_000, 2).unwrap();
    let (c, se) = cov_se(&b.values, 32, 64);
    let want = 0.5 * 2f64.powf(1.4);
    assert!((want - fbm_cov(1.0, 2.0, h(0.7)).unwrap()).abs() < 1e-15);
    assert!((c - want).abs() < 4.0 * se, "{c} vs {want}");
}

#[test]
fn integral_of_u_has_ito_variance() {
    let grid = TimeGrid::uniform(1.0, 512).unwrap();
    let f = Coefficient::tabulate(&grid, |u| u);
    let z = sample_integral_process(f, h(0.5), &grid, 100_000, 3).unwrap();
    let (v, se) = mean_se((0..z.n_paths()).map(|i| z.path(i)[512].powi(2)));
    assert!((v - 1.0 / 3.0).abs() < 4.0 * se, "{v}");
}

#[test]
fn ou_reaches_stationary_variance() {
    let grid = TimeGrid::uniform(8.0, 1024).unwrap();
    let c = Coefficient::Constant;
    let a = sample_fou(c(0.0), c(0.5), c(1.0), 0.0, h(0.5), &grid, 20_000, 4).unwrap();
    let (v, se) = mean_se((0..a.n_paths()).map(|i| a.path(i)[1024].powi(2)));
    assert!((v - 1.0).abs() < 4.0 * se, "{v} ± {se}");
}

#[test]
fn circulant_and_cholesky_samplers_agree() {
    let grid = TimeGrid::uniform(3.0, 31).unwrap();
    let model = CovarianceModel::Fbm { hurst: h(0.7) };
    let fast = PathSimulator::new(model.clone(), grid.clone()).unwrap();
    let slow = PathSimulator::with_sampler(model, grid.clone(), FbmSampler::cholesky(h(0.7), &grid).unwrap()).unwrap();
    assert_ne!(fast.sampler().method(), slow.sampler().method());
    let a = fast.sample(20_000, 5).unwrap();
    let b = slow.sample(20_000, 6).unwrap();
    for i in 1..32 {
        for j in i..32 {
            let (ca, sa) = cov_se(&a.values, i, j);
            let (cb, sb) = cov_se(&b.values, i, j);
            assert!((ca - cb).abs() < 5.0 * (sa * sa + sb * sb).sqrt(), "({i},{j}): {ca} vs {cb}");
        }
    }
}

#[test]
fn fbm_is_self_similar() {
    let n = 100_000;
    let grid = TimeGrid::uniform(4.0, 64).unwrap();
    for hv in [0.3, 0.7] {
        let b = sample_fbm(h(hv), &grid, n, 7).unwrap();
        let var = |k: usize| (0..n).map(|i| b.path(i)[k].powi(2)).sum::<f64>() / n as f64;
        let ratio = var(64) / (4f64.powf(2.0 * hv) * var(16));
        let tol = 4.0 / (n as f64).sqrt() * 2f64.sqrt();
        assert!((ratio - 1.0).abs() < tol, "H={hv}: {ratio}");
    }
}

#[test]
fn strongly_reverting_fcir_concentrates_at_zero() {
    let grid = TimeGrid::uniform(20.0, 512).unwrap();
    let r = sample_fcir(5.0, 1.0, 1.0, h(0.7), &grid, 20_000, 8).unwrap();
    let (m, se) = mean_se((0..r.n_paths()).map(|i| r.path(i)[512]));
    assert!(m.abs() < 4.0 * se, "{m} ± {se}");
    let spread = (0..r.n_paths()).map(|i| r.path(i)[512].abs()).sum::<f64>() / r.n_paths() as f64;
    assert!(spread < 0.2, "{spread}");
}

#[test]
fn fou_covariance_matches_samples() {
    let grid = TimeGrid::uniform(2.0, 256).unwrap();
    let c = Coefficient::Constant;
    let model = CovarianceModel::Fou { hurst: h(0.7), level: c(0.0), decay: c(0.5), volatility: c(1.0), initial: 0.0 };
    let want = model.covariance_at(&grid, &[128, 256]).unwrap();
    let a = sample_fou(c(0.0), c(0.5), c(1.0), 0.0, h(0.7), &grid, 50_000, 9).unwrap();
    for (p, q) in [(0, 0), (0, 1), (1, 1)] {
        let (got, se) = cov_se(&a.values, [128, 256][p], [128, 256][q]);
        assert!((got - want[(p, q)]).abs() < 4.0 * se, "({p},{q}): {got} vs {}", want[(p, q)]);
    }
}

#[test]
fn fou_predictor_is_unbiased_and_attains_its_mse() {
    let grid = TimeGrid::uniform(10.0, 320).unwrap();
    let obs = TimeGrid::new((1..=32).map(|k| 5.0 * k as f64 / 32.0).collect()).unwrap();
    let c = Coefficient::Constant;
    for hv in [0.3, 0.7] {
        let p = build_fou_predictor(c(0.2), c(0.5), c(1.0), 1.0, h(hv), &obs, 10.0, &grid).unwrap();
        let batch = sample_fou(c(0.2), c(0.5), c(1.0), 1.0, h(hv), &grid, 20_000, 10).unwrap();
        let (x, y) = subsample(&batch, &obs, 10.0).unwrap();
        let pred = p.predict_rows(&x.values).unwrap();
        let st = evaluate_me_mse(&pred, &y).unwrap();
        let mse = fracpredict_core::exact::theoretical_mse(&p).unwrap();
        assert!(st.me.abs() < 4.0 * st.se_me, "H={hv}: ME {}", st.me);
        assert!((st.mse - mse).abs() < 4.0 * st.se_mse, "H={hv}: {} vs {mse}", st.mse);
    }
}

#[test]
fn orthant_expectation_matches_half_normal_oracle() {
    let rho: f64 = 0.6;
    let law = BlockConditional {
        weights: Matrix::zeros(2, 0),
        offset: vec![0.0, 0.0],
        covariance: Matrix::from_row_major(2, 2, vec![1.0, rho, rho, 1.0]).unwrap(),
    };
    // E[U₂ | U₁ ≤ 0] = −ρ·φ(0)/Φ(0)
    let want = -rho * (2.0 / std::f64::consts::PI).sqrt();
    let est = orthant_expectation(&law, &[], &[0], 1, |x| x, OrthantSampling::new(100_000, 11)).unwrap();
    assert!((est.value - want).abs() < 3.0 * est.std_error, "{} vs {want}", est.value);
    let indep = BlockConditional { covariance: Matrix::identity(2), ..law };
    let odd = orthant_expectation(&indep, &[], &[0], 1, |x| x * x.abs(), OrthantSampling::new(100_000, 12)).unwrap();
    assert!(odd.value.abs() < 3.0 * odd.std_error, "{}", odd.value);
}

#[test]
fn orthant_standard_error_scales_like_inverse_root() {
    let law = BlockConditional {
        weights: Matrix::zeros(2, 0),
        offset: vec![0.3, -0.2],
        covariance: Matrix::from_row_major(2, 2, vec![1.0, 0.5, 0.5, 2.0]).unwrap(),
    };
    let se: Vec<f64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&n| orthant_expectation(&law, &[], &[0], 1, |x| x, OrthantSampling::new(n, 13)).unwrap().std_error)
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1] / 10f64.sqrt();
        assert!((1.0 / 1.5..1.5).contains(&ratio), "{se:?}");
    }
}

#[test]
fn fcir_orthant_estimate_reduces_to_closed_form_when_constraint_is_slack() {
    // A strongly negative reading just before a zero one forces A ≤ 0 there
    // almost surely, so the zero carries no information.
    let grid = TimeGrid::uniform(2.0, 200).unwrap();
    let (lambda, sigma, r0) = (1.0, 2.0, 1.0);
    let single = TimeGrid::new(vec![1.0]).unwrap();
    let closed = build_fcir_predictor(lambda, sigma, r0, h(0.7), &single, 2.0, &grid).unwrap();
    let want = closed.predict(&[-25.0]).unwrap();
    let pair = TimeGrid::new(vec![1.0, 1.01]).unwrap();
    let est = fcir_predict_orthant_mc(
        lambda,
        sigma,
        r0,
        h(0.7),
        &pair,
        &[-25.0, 0.0],
        2.0,
        &grid,
        OrthantSampling::new(50_000, 14),
    )
    .unwrap();
    assert!(est.accepted as f64 > 0.999 * est.proposals as f64);
    assert!((est.value - want).abs() < 3.0 * est.std_error, "{} vs {want}", est.value);
}
