use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robcor::sim::{
    contaminate_cellwise, contaminate_rowwise, gen_clean, run_scenario, write_sim_csv,
    Contamination, Estimator, SimScenario,
};
use robcor::PsiSpec;

fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
    let cxy = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    (vx, vy, cxy / (vx * vy).sqrt())
}

#[test]
fn clean_generator_has_target_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for rho in [-0.7, 0.0, 0.3, 0.9] {
        let d = gen_clean(rho, 200_000, &mut rng).unwrap();
        let (vx, vy, r) = moments(d.column(0), d.column(1));
        assert!(
            (vx - 1.0).abs() < 0.01 && (vy - 1.0).abs() < 0.01,
            "{} {}",
            vx,
            vy
        );
        assert!((r - rho).abs() < 0.01, "{} vs {}", r, rho);
    }
    assert!(gen_clean(1.0, 10, &mut rng).is_err());
}

#[test]
fn contamination_fractions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut d = gen_clean(0.5, n, &mut rng).unwrap();
    let rows = contaminate_rowwise(&mut d, 0.1, 3.0, &mut rng).unwrap();
    assert!((rows as f64 / n as f64 - 0.1).abs() < 0.005);
    let moved = (0..n)
        .filter(|&i| {
            (d.get(i, 0).abs() - 3.0).abs() < 0.1 && (d.get(i, 0) + d.get(i, 1)).abs() < 0.1
        })
        .count();
    assert!(moved >= rows);

    let mut d = gen_clean(0.5, n, &mut rng).unwrap();
    let cells = contaminate_cellwise(&mut d, 0.1, 3.0, &mut rng).unwrap();
    assert!((cells as f64 / (2 * n) as f64 - 0.1).abs() < 0.005);
    let hit = |v: f64, c: f64| (v - c).abs() < 0.06;
    let x_hit = (0..n).filter(|&i| hit(d.get(i, 0), 3.0)).count() as f64 / n as f64;
    let y_hit = (0..n).filter(|&i| hit(d.get(i, 1), -3.0)).count() as f64 / n as f64;
    let both = (0..n)
        .filter(|&i| hit(d.get(i, 0), 3.0) && hit(d.get(i, 1), -3.0))
        .count() as f64
        / n as f64;
    // independent cells: both coordinates hit about eps² of the time
    assert!(
        (both - x_hit * y_hit).abs() < 0.003,
        "{} vs {}",
        both,
        x_hit * y_hit
    );
    assert!((both - 0.01).abs() < 0.003, "{}", both);
}

fn small(kind: Contamination, eps: f64, k: f64) -> SimScenario {
    let mut s = SimScenario::new(kind, eps, k).unwrap();
    s.rhos = vec![0.2, 0.6];
    s.m = 100;
    s.seed = 11;
    s
}

#[test]
fn identical_seed_gives_identical_tables() {
    let s = small(Contamination::Cellwise, 0.1, 3.0);
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_sim_csv(&pa, Some("robcor sim"), &a).unwrap();
    write_sim_csv(&pb, Some("robcor sim"), &b).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    let mut other = s.clone();
    other.seed = 12;
    assert_ne!(run_scenario(&other).unwrap(), a);
}

#[test]
fn thread_count_does_not_change_results() {
    let s = small(Contamination::Rowwise, 0.1, 3.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_scenario(&s).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn estimators_share_data() {
    let s = small(Contamination::None, 0.0, 0.0);
    let d1 = s.dataset(1, 7).unwrap();
    let d2 = s.dataset(1, 7).unwrap();
    assert_eq!(d1, d2);
    assert_ne!(d1, s.dataset(1, 8).unwrap());
    assert_ne!(d1, s.dataset(0, 7).unwrap());
}

#[test]
fn clean_bias_is_never_positive() {
    let mut s = SimScenario::new(Contamination::None, 0.0, 0.0).unwrap();
    s.rhos = (1..10).map(|i| i as f64 / 10.0).collect();
    s.m = 2000;
    let rows = run_scenario(&s).unwrap();
    for r in rows.iter().filter(|r| r.estimator != "pearson") {
        assert!(
            r.bias <= 3.0 * r.bias_se,
            "{} at rho {}: bias {} se {}",
            r.estimator,
            r.rho,
            r.bias,
            r.bias_se
        );
    }
}

#[test]
fn wrapping_mse_saturates_beyond_rejection_point() {
    let wrapping = vec![Estimator::new(PsiSpec::default_wrapping())];
    let mse_at = |k: f64| {
        let mut s = SimScenario::new(Contamination::Rowwise, 0.1, k).unwrap();
        s.rhos = vec![0.5];
        s.estimators = wrapping.clone();
        run_scenario(&s).unwrap()[0].clone()
    };
    let base = mse_at(5.0);
    for k in [6.0, 10.0, 50.0] {
        let r = mse_at(k);
        let tol = 3.0 * base.bias_se * base.bias_se.max(0.01);
        assert!(
            (r.mse - base.mse).abs() <= tol,
            "k = {}: {} vs {}",
            k,
            r.mse,
            base.mse
        );
    }
}

#[test]
fn config_round_trip() {
    let s = small(Contamination::Cellwise, 0.05, 2.5);
    let back = SimScenario::from_config(&s.to_config()).unwrap();
    assert_eq!(back, s);
    assert!(SimScenario::from_config("kind = cellwise\nbogus = 1\n").is_err());
    assert!("wrapping:1.5:4".parse::<Estimator>().is_ok());
    assert!("nonsense".parse::<Estimator>().is_err());
}
