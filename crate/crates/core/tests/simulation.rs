use sareg::sim::{run_experiment, Evaluation, Model, ResultTable};
use sareg::{gaussian_kernel, Estimator, SimulationConfig};

fn table(model: Model, sigma: f64, n: usize, reps: usize) -> ResultTable {
    let mut c = SimulationConfig::new(model, sigma, n);
    c.replications = reps;
    c.seed = 2024;
    run_experiment(&c, &gaussian_kernel()).unwrap()
}

#[test]
fn logistic_recursive2_beats_nadaraya_watson_at_n_500() {
    let t = table(Model::Logistic, 0.1, 500, 500);
    let nw = t.row(Estimator::NadarayaWatson).unwrap().mse;
    let r2 = t.row(Estimator::Recursive2).unwrap().mse;
    assert!(r2 < nw, "Recursive2 {r2:.3e} vs NW {nw:.3e}");
}

#[test]
fn mse_decreases_with_n_at_low_noise() {
    for model in Model::ALL {
        let (small, large) = (table(model, 0.1, 100, 500), table(model, 0.1, 500, 500));
        for e in Estimator::ALL {
            let (a, b) = (small.row(e).unwrap().mse, large.row(e).unwrap().mse);
            assert!(b < a, "{model} {e}: {a:.3e} -> {b:.3e}");
        }
    }
}

#[test]
fn recursive_estimators_stay_comparable_to_nadaraya_watson() {
    for model in Model::ALL {
        for sigma in [0.1, 0.5] {
            for n in [100, 200, 500] {
                let t = table(model, sigma, n, 500);
                let nw = t.row(Estimator::NadarayaWatson).unwrap().mse;
                for row in &t.rows {
                    let ratio = row.mse / nw;
                    assert!((1.0 / 3.0..=3.0).contains(&ratio), "{model} sigma {sigma} n {n} {}: {ratio:.2}", row.estimator);
                }
            }
        }
    }
}

#[test]
fn grid_evaluation_is_available() {
    let mut c = SimulationConfig::new(Model::Cos, 0.3, 150);
    c.replications = 10;
    c.evaluation = Evaluation::Grid { lo: -1.5, hi: 1.5, points: 61 };
    let t = run_experiment(&c, &gaussian_kernel()).unwrap();
    assert_eq!(t.len(), 5);
    assert!(t.rows.iter().all(|r| r.mse > 0.0 && r.mse < 0.05));
}

#[test]
fn rows_follow_requested_estimators() {
    let mut c = SimulationConfig::new(Model::Cos, 0.1, 40);
    c.replications = 3;
    c.estimators = vec![Estimator::Recursive4, Estimator::NadarayaWatson];
    let t = run_experiment(&c, &gaussian_kernel()).unwrap();
    let order: Vec<Estimator> = t.rows.iter().map(|r| r.estimator).collect();
    assert_eq!(order, c.estimators);
}
