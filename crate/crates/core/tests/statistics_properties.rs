use nsl_core::flow_integrator::{IntegratorSettings, SectionConfig};
use nsl_core::saddle_model::{Saddle, SaddleParams};
use nsl_core::statistics::{
    expected_tail_constant, ks_test, sample_entry, stable_index, tail_fit, tau_samples, ReturnConfig, TailFitConfig,
    TailMethod,
};

const XI_MAX: f64 = 1e-3;

fn hill(samples: &[f64]) -> f64 {
    tail_fit(samples, &TailFitConfig { bootstrap: 0, ..Default::default() }).unwrap().beta_hat
}

#[test]
fn entries_fill_the_strip_uniformly() {
    let sec = SectionConfig::default();
    let e = sample_entry(&sec, XI_MAX, 100_000, 5).unwrap();
    let (e0, e1) = sec.eta_range;
    let xs: Vec<f64> = e.iter().map(|p| p.xi / XI_MAX).collect();
    let ys: Vec<f64> = e.iter().map(|p| (p.eta - e0) / (e1 - e0)).collect();
    assert!(ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 1e-3);
    assert!(ks_test(&ys, |x| x.clamp(0.0, 1.0)).unwrap().p_value > 1e-3);
    assert_ne!(e, sample_entry(&sec, XI_MAX, 100_000, 6).unwrap());
}

#[test]
fn same_seed_same_taus() {
    let s = Saddle::reduced(1.5).unwrap();
    let sec = SectionConfig::default();
    let run = |seed| {
        let e = sample_entry(&sec, XI_MAX, 2_000, seed).unwrap();
        tau_samples(&s, &sec, &e, &ReturnConfig::default(), &IntegratorSettings::default()).unwrap().taus()
    };
    let a = run(9);
    assert_eq!(a, run(9));
    assert_ne!(a, run(10));
}

#[test]
fn reduced_family_tail() {
    let s = Saddle::reduced(0.0).unwrap();
    let sec = SectionConfig::default();
    let e = sample_entry(&sec, XI_MAX, 200_000, 3).unwrap();
    let cfg = ReturnConfig { rho: None, c_bdry: 0.0 };
    let set = tau_samples(&s, &sec, &e, &cfg, &IntegratorSettings::default()).unwrap();
    assert!((set.censored as f64) < 1e-3 * e.len() as f64, "{} censored", set.censored);

    // the boundary constant shifts every return time and leaves the index alone
    let base = set.taus();
    let b1 = hill(&base.iter().map(|t| t + 1.0).collect::<Vec<_>>());
    assert!((b1 - 2.0).abs() < 0.15, "{b1}");
    for c in [0.0, 0.5, 2.0, 5.0, 10.0] {
        let b = hill(&base.iter().map(|t| t + c).collect::<Vec<_>>());
        assert!((b - b1).abs() <= 0.05, "c = {c}: {b} vs {b1}");
    }
    let shifted = tau_samples(&s, &sec, &e[..1000], &ReturnConfig { rho: None, c_bdry: 4.0 }, &IntegratorSettings::default())
        .unwrap();
    for (a, b) in shifted.taus().iter().zip(&base) {
        assert!((a - b - 4.0).abs() < 1e-9 * b);
    }

    let fit = tail_fit(
        &base.iter().map(|t| t + 1.0).collect::<Vec<_>>(),
        &TailFitConfig { method: TailMethod::LoglogRegression { window: Some((1e2, 2e3)) }, bootstrap: 0, seed: 0 },
    )
    .unwrap();
    let c_star = expected_tail_constant(&s, &sec, XI_MAX).unwrap();
    assert!((fit.c_hat / c_star - 1.0).abs() < 0.25, "{} vs {c_star}", fit.c_hat);
}

#[test]
fn non_preserving_family_tail() {
    let s = Saddle::new(SaddleParams::new([1.0, 0.0, 2.0], [3.0, 0.0, 1.0])).unwrap();
    assert!((s.exponents().beta2 - 1.5).abs() < 1e-12);
    let sec = SectionConfig::default();
    let e = sample_entry(&sec, XI_MAX, 400_000, 17).unwrap();
    let set = tau_samples(&s, &sec, &e, &ReturnConfig::default(), &IntegratorSettings::default()).unwrap();
    assert_eq!(set.censored, 0);
    let b = hill(&set.taus());
    assert!((b - 1.5).abs() < 0.1, "{b}");
}

#[test]
fn observable_index_increases_with_rho() {
    let s = Saddle::reduced(0.0).unwrap();
    let sec = SectionConfig::default();
    let e = sample_entry(&sec, XI_MAX, 50_000, 23).unwrap();
    let alphas: Vec<f64> = [-1.5, -1.0, -0.5]
        .iter()
        .map(|&rho| {
            let set = tau_samples(&s, &sec, &e, &ReturnConfig { rho: Some(rho), c_bdry: 1.0 }, &IntegratorSettings::default())
                .unwrap();
            let v: Vec<f64> = set.samples.iter().map(|r| r.vbar).collect();
            stable_index(&v, None).unwrap().alpha_hat
        })
        .collect();
    assert!(alphas.windows(2).all(|w| w[1] > w[0]), "{alphas:?}");
}
