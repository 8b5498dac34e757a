mod common;

use proptest::prelude::*;
use rand::Rng;
use stockhpo::attribution::{
    explain, mean_abs_shap, rank_stability, shap_exact, shap_sampled, RankTable, ShapSettings,
};
use stockhpo::dataset::ExperimentId;
use stockhpo::evaluation::{
    aggregate, evaluate_model, historical_mean_forecast, mse, r2_is, r2_os, Benchmark, ForecastSeries, OlsModel,
    SeedMetrics, Variant,
};
use stockhpo::market_data::MonthlySeries;
use stockhpo::nn::{Activation, HyperConfig, NetworkState, Predictor, Regularizer};
use stockhpo::seed::rng_from;
use stockhpo::Error;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let design: Vec<Vec<f64>> = rows.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let k = design[0].len();
    let xtx = (0..k)
        .map(|a| (0..k).map(|b| design.iter().map(|r| r[a] * r[b]).sum()).collect())
        .collect();
    let xty = (0..k).map(|a| design.iter().zip(y).map(|(r, v)| r[a] * v).sum()).collect();
    solve(xtx, xty)
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = rng_from(20, &[]);
    let rows: Vec<Vec<f64>> = (0..20).map(|_| common::random_vec(&mut rng, 3, -1.0, 1.0)).collect();
    let y = common::random_vec(&mut rng, 20, -1.0, 1.0);
    let m = OlsModel::fit(&rows, &y, false).unwrap();
    let oracle = normal_equations(&rows, &y);
    assert!((m.alpha - oracle[0]).abs() < 1e-8);
    for (b, o) in m.beta.iter().zip(&oracle[1..]) {
        assert!((b - o).abs() < 1e-8);
    }
    assert!(!m.ridge_used);
}

#[test]
fn ols_recovers_exact_linear_data() {
    let mut rng = rng_from(21, &[]);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| common::random_vec(&mut rng, 4, -3.0, 3.0)).collect();
    let y: Vec<f64> = rows.iter().map(|r| 0.5 + 2.0 * r[0] - r[1] + 0.25 * r[3]).collect();
    let m = OlsModel::fit(&rows, &y, false).unwrap();
    for (r, v) in rows.iter().zip(&y) {
        assert!((m.predict_row(r) - v).abs() < 1e-10);
    }
}

#[test]
fn collinear_design_needs_the_ridge() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
    assert!(matches!(OlsModel::fit(&rows, &y, false), Err(Error::RankDeficient)));
    let m = OlsModel::fit(&rows, &y, true).unwrap();
    assert!(m.ridge_used);
    for (r, v) in rows.iter().zip(&y) {
        assert!((m.predict_row(r) - v).abs() < 1e-6);
    }
}

#[test]
fn in_sample_r2_of_a_fixed_line() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [1.0, 3.0, 2.0, 5.0];
    let pred = x.to_vec();
    // SSE = 0 + 1 + 1 + 1 = 3, mean 2.75, SST = 3.0625 + 0.0625 + 0.5625 + 5.0625 = 8.75
    assert!((r2_is(&pred, &y).unwrap() - (1.0 - 3.0 / 8.75)).abs() < 1e-15);
    assert!(r2_is(&[1.0; 3], &[2.0; 3]).is_err());
}

#[test]
fn constant_actuals_give_constant_benchmark() {
    let b = historical_mean_forecast(&[0.01; 5], &[0.01; 7]).unwrap();
    assert!(b.iter().all(|v| (v - 0.01).abs() < 1e-15));
}

#[test]
fn out_of_sample_r2_against_the_expanding_mean() {
    let data = common::synthetic_matrix(240, 2, 4, 0.5, |r| 0.3 * r[0]);
    let split = common::split_tail(&data, 60);
    // returns series whose values are the targets, dated by target month
    let returns = MonthlySeries::new("r", data.target_date(0), data.target.clone()).unwrap();
    let ins = split.in_sample();
    let model = OlsModel::fit(&ins.rows, &ins.target, false).unwrap();
    let (m, f) = evaluate_model(&model, &split, &returns, Benchmark::Expanding, 0).unwrap();
    let f = f.unwrap();

    let n_in = ins.len();
    let mut sse_m = 0.0;
    let mut sse_b = 0.0;
    for (i, row) in split.test.rows.iter().enumerate() {
        let actual = data.target[n_in + i];
        let bench = data.target[..n_in + i].iter().sum::<f64>() / (n_in + i) as f64;
        assert!((f.benchmark[i] - bench).abs() < 1e-14);
        sse_m += (actual - model.predict_row(row)).powi(2);
        sse_b += (actual - bench).powi(2);
    }
    assert!((m.r2_os.unwrap() - (1.0 - sse_m / sse_b)).abs() < 1e-12);
    assert!(m.r2_os.unwrap() > 0.0);
    assert!((m.mse_test.unwrap() - sse_m / 60.0).abs() < 1e-12);

    let (fixed, _) = evaluate_model(&model, &split, &returns, Benchmark::InSampleMean, 0).unwrap();
    let ins_mean = ins.target.iter().sum::<f64>() / n_in as f64;
    let sse_fixed: f64 = split.test.target.iter().map(|a| (a - ins_mean).powi(2)).sum();
    assert!((fixed.r2_os.unwrap() - (1.0 - sse_m / sse_fixed)).abs() < 1e-12);
}

#[test]
fn aggregate_is_recomputable_from_seeds() {
    let mut rng = rng_from(8, &[]);
    let seeds: Vec<SeedMetrics> = (0..5)
        .map(|k| SeedMetrics {
            seed_index: k,
            mse_train: rng.gen(),
            mse_val: rng.gen(),
            mse_test: Some(rng.gen()),
            r2_is: rng.gen_range(-0.1..0.1),
            r2_os: Some(rng.gen_range(-0.1..0.1)),
        })
        .collect();
    let rep = aggregate(ExperimentId::Exp2, Variant::network(Regularizer::Dropout, "technical"), seeds.clone()).unwrap();
    let xs: Vec<f64> = seeds.iter().map(|s| s.r2_os.unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / 5.0;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
    assert!((rep.mean.r2_os.unwrap() - mean).abs() < 1e-12);
    assert!((rep.sd.r2_os.unwrap() - sd).abs() < 1e-12);
    assert!(!rep.single_seed);
    let one = aggregate(ExperimentId::Exp2, Variant::network(Regularizer::Dropout, "technical"), seeds[..1].to_vec()).unwrap();
    assert!(one.single_seed);
    assert_eq!(one.sd.mse_train, 0.0);
    let text = serde_json::to_string(&rep).unwrap();
    assert_eq!(serde_json::from_str::<stockhpo::evaluation::EvalReport>(&text).unwrap(), rep);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn r2_os_sign_matches_msfe_comparison(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..40)) {
        let actual: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let pred: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let bench: Vec<f64> = vals.iter().map(|v| v.2).collect();
        let dates = (0..vals.len()).map(|i| common::start().add_months(i as i32)).collect();
        let f = ForecastSeries::new(dates, pred.clone(), actual.clone(), bench.clone()).unwrap();
        let r = r2_os(&f).unwrap();
        let (m_model, m_bench) = (mse(&pred, &actual).unwrap(), mse(&bench, &actual).unwrap());
        prop_assert_eq!(r > 0.0, m_model < m_bench);

        let scaled = ForecastSeries::new(
            f.dates.clone(),
            pred.iter().map(|v| 3.7 * v - 0.2).collect(),
            actual.iter().map(|v| 3.7 * v - 0.2).collect(),
            bench.iter().map(|v| 3.7 * v - 0.2).collect(),
        ).unwrap();
        prop_assert!((r2_os(&scaled).unwrap() - r).abs() < 1e-10 * r.abs().max(1.0));
    }

    #[test]
    fn benchmark_ignores_the_current_return(history in prop::collection::vec(-1.0f64..1.0, 1..10),
                                            actual in prop::collection::vec(-1.0f64..1.0, 2..20),
                                            i in 0usize..20, bump in -5.0f64..5.0) {
        let i = i % actual.len();
        let a = historical_mean_forecast(&history, &actual).unwrap();
        let mut moved = actual.clone();
        moved[i] += bump;
        let b = historical_mean_forecast(&history, &moved).unwrap();
        prop_assert_eq!(&a[..=i], &b[..=i]);
    }

    #[test]
    fn ols_residuals_are_orthogonal(seed in any::<u64>(), n in 8usize..40, p in 1usize..5) {
        let mut rng = rng_from(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| common::random_vec(&mut rng, p, -2.0, 2.0)).collect();
        let y = common::random_vec(&mut rng, n, -1.0, 1.0);
        let m = OlsModel::fit(&rows, &y, true).unwrap();
        let e: Vec<f64> = rows.iter().zip(&y).map(|(r, v)| v - m.predict_row(r)).collect();
        prop_assert!(e.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..p {
            prop_assert!(rows.iter().zip(&e).map(|(r, v)| r[j] * v).sum::<f64>().abs() < 1e-8);
        }
    }
}

fn net(p: usize, seed: u64) -> NetworkState {
    let cfg = HyperConfig {
        n_units: 6,
        ..common::tiny_config(Activation::Tanh, Regularizer::BatchNorm)
    };
    let mut n = NetworkState::init(&cfg, p, seed).unwrap();
    let mut rng = rng_from(seed, &[7]);
    for b in &mut n.batch_norm {
        b.running_mean = common::random_vec(&mut rng, b.running_mean.len(), -0.3, 0.3);
        b.running_var = common::random_vec(&mut rng, b.running_var.len(), 0.5, 1.5);
    }
    n
}

fn coalition_value(model: &dyn Predictor, x: &[f64], bg: &[Vec<f64>], mask: u32) -> f64 {
    let rows: Vec<Vec<f64>> = bg
        .iter()
        .map(|b| (0..x.len()).map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] }).collect())
        .collect();
    model.predict(&rows).iter().sum::<f64>() / bg.len() as f64
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

#[test]
fn exact_values_match_brute_force_coalitions() {
    let p = 5;
    let model = net(p, 31);
    let mut rng = rng_from(31, &[]);
    let bg: Vec<Vec<f64>> = (0..12).map(|_| common::random_vec(&mut rng, p, -1.5, 1.5)).collect();
    let x = common::random_vec(&mut rng, p, -1.5, 1.5);
    let (phi, base) = shap_exact(&model, &x, &bg).unwrap();
    for (i, got) in phi.iter().enumerate() {
        let mut want = 0.0;
        for s in 0u32..1 << p {
            if s >> i & 1 == 1 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = fact(k) * fact(p - k - 1) / fact(p);
            want += w * (coalition_value(&model, &x, &bg, s | 1 << i) - coalition_value(&model, &x, &bg, s));
        }
        assert!((got - want).abs() < 1e-10, "feature {i}: {got} vs {want}");
    }
    assert!((base - coalition_value(&model, &x, &bg, 0)).abs() < 1e-12);
    let fx = model.predict(std::slice::from_ref(&x))[0];
    assert!((phi.iter().sum::<f64>() + base - fx).abs() < 1e-10);
}

#[test]
fn ignored_input_gets_zero_attribution() {
    let p = 6;
    let mut model = net(p, 3);
    let units = model.hidden[0].out_dim;
    for u in 0..units {
        model.hidden[0].weights[2 * units + u] = 0.0;
    }
    let mut rng = rng_from(4, &[]);
    let bg: Vec<Vec<f64>> = (0..10).map(|_| common::random_vec(&mut rng, p, -1.0, 1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..5).map(|_| common::random_vec(&mut rng, p, -1.0, 1.0)).collect();
    for x in &rows {
        let (phi, _) = shap_exact(&model, x, &bg).unwrap();
        assert_eq!(phi[2], 0.0);
    }
    let imp = mean_abs_shap(&model, &rows, &bg, &ShapSettings::default(), 0).unwrap();
    assert_eq!(imp[2], 0.0);
}

#[test]
fn twin_features_share_attribution() {
    let p = 4;
    let mut model = net(p, 9);
    let units = model.hidden[0].out_dim;
    // column 3 copies column 1 in both weights and data
    for u in 0..units {
        model.hidden[0].weights[3 * units + u] = model.hidden[0].weights[units + u];
    }
    let mut rng = rng_from(10, &[]);
    let twin = |rng: &mut stockhpo::seed::Rng| {
        let mut r = common::random_vec(rng, p, -1.0, 1.0);
        r[3] = r[1];
        r
    };
    let bg: Vec<Vec<f64>> = (0..10).map(|_| twin(&mut rng)).collect();
    let x = twin(&mut rng);
    let (phi, _) = shap_exact(&model, &x, &bg).unwrap();
    assert!((phi[1] - phi[3]).abs() < 1e-8, "{phi:?}");
}

#[test]
fn sampled_values_are_repeatable_and_efficient() {
    let p = 17;
    let model = net(p, 12);
    let mut rng = rng_from(12, &[]);
    let bg: Vec<Vec<f64>> = (0..20).map(|_| common::random_vec(&mut rng, p, -1.0, 1.0)).collect();
    let x = common::random_vec(&mut rng, p, -1.0, 1.0);
    let a = shap_sampled(&model, &x, &bg, 512, &mut rng_from(1, &[])).unwrap();
    let b = shap_sampled(&model, &x, &bg, 512, &mut rng_from(1, &[])).unwrap();
    assert_eq!(a, b);
    let fx = model.predict(std::slice::from_ref(&x))[0];
    assert!((a.0.iter().sum::<f64>() + a.1 - fx).abs() < 1e-10);
    assert!(matches!(
        shap_sampled(&model, &x, &bg, 2 * p - 1, &mut rng_from(1, &[])),
        Err(Error::SingularShapSystem(_))
    ));
}

#[test]
fn mean_importance_matches_rowwise_recomputation() {
    let p = 17;
    let model = net(p, 40);
    let mut rng = rng_from(40, &[]);
    let bg: Vec<Vec<f64>> = (0..16).map(|_| common::random_vec(&mut rng, p, -1.0, 1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..50).map(|_| common::random_vec(&mut rng, p, -1.0, 1.0)).collect();
    let settings = ShapSettings {
        n_coalitions: 256,
        ..ShapSettings::default()
    };
    let cols: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    let m = explain(&model, &cols, &rows, &bg, &settings, 77).unwrap();
    assert!(!m.exact);
    assert!(m.efficiency_gap() < 1e-10);
    let imp = mean_abs_shap(&model, &rows, &bg, &settings, 77).unwrap();
    let mut oracle = vec![0.0; p];
    for (i, row) in m.values.iter().enumerate() {
        assert_eq!(row.len(), p);
        for (o, v) in oracle.iter_mut().zip(row) {
            *o += v.abs() / 50.0;
        }
        let single = explain(&model, &cols, &rows[i..=i], &bg, &settings, 77).unwrap();
        if i == 0 {
            assert_eq!(&single.values[0], row);
        }
    }
    for (a, b) in imp.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("f{j}")).collect()
}

#[test]
fn reversed_ranking_leaves_nothing_persistent() {
    let n = 10;
    let a = RankTable::new(ExperimentId::Exp1, names(n), (1..=n).collect()).unwrap();
    let b = RankTable::new(ExperimentId::Exp2, names(n), (1..=n).rev().collect()).unwrap();
    let r = rank_stability(&[a.clone(), b]).unwrap();
    assert_eq!(r.n_top_persistent, 0);
    assert_eq!(r.n_bottom_persistent, 0);
    let same = rank_stability(&[a.clone(), RankTable { experiment: ExperimentId::Exp3, ..a.clone() }]).unwrap();
    assert_eq!(same.n_top_persistent + same.n_bottom_persistent, n);
}

#[test]
fn mismatched_feature_sets_are_rejected() {
    let a = RankTable::new(ExperimentId::Exp1, names(3), vec![1, 2, 3]).unwrap();
    let b = RankTable::new(ExperimentId::Exp2, vec!["f0".into(), "f1".into(), "g".into()], vec![1, 2, 3]).unwrap();
    assert!(rank_stability(&[a.clone(), b]).is_err());
    assert!(rank_stability(&[a]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn importance_ranks_form_a_permutation(imp in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let t = RankTable::from_importance(ExperimentId::Exp4, names(imp.len()), &imp).unwrap();
        prop_assert!(t.is_permutation());
        let top = t.ranks.iter().position(|&r| r == 1).unwrap();
        prop_assert!(imp.iter().all(|&v| v <= imp[top]));
    }
}
