use edgedl::channel_model::{outage_worstbest_multicast, RadioConfig};
use edgedl::cocoa::PartitionMode;
use edgedl::completion_time::{avg_completion_mc, Access, DistModel, Scenario, SigmaProduct, Spacing};
use edgedl::device_planner::{
    addition_verdict_in, high_accuracy_condition, necessary_condition_holds, optimal_k_search, q_of_k,
    stationarity_residual, stationarity_roots, HighAccuracyForm, HighAccuracyInput, LargeDataParams, StationarityForm,
    Verdict,
};

fn scenario() -> Scenario {
    Scenario {
        n_total: 4600,
        radio: RadioConfig::new(20e6, 5e6, 5e6, 5e6).unwrap(),
        rho_db: (10.0, 20.0),
        eta_db: (10.0, 20.0),
        compute: (1e-10, 1e-9),
        compute_spacing: Spacing::Log,
        slot_seconds: 1e-3,
        eps_local: 1e-3,
        eps_gap: 1e-3,
        lambda_reg: 0.01,
        mu_smooth: 1.0,
        zeta_convex: 1.0,
        partition: PartitionMode::Uniform,
        partition_seed: 0,
        sigma_product: SigmaProduct::PerDevice,
        dist_model: DistModel::Scaled,
        access: Access::Oma,
        ideal_channel: false,
    }
}

fn compute_bound() -> Scenario {
    Scenario {
        compute: (1e-3, 1e-3),
        rho_db: (60.0, 60.0),
        eta_db: (60.0, 60.0),
        radio: RadioConfig::new(20e6, 1e3, 1e3, 1e3).unwrap(),
        ..scenario()
    }
}

fn comm_bound() -> Scenario {
    Scenario {
        n_total: 100,
        compute: (1e-15, 1e-15),
        rho_db: (10.0, 10.0),
        eta_db: (10.0, 10.0),
        radio: RadioConfig::new(20e6, 20e6, 20e6, 20e6).unwrap(),
        ..scenario()
    }
}

fn params() -> LargeDataParams {
    LargeDataParams {
        n_total: 4600.0,
        slot_seconds: 1e-3,
        c: 1e-10,
        bandwidth_hz: 20e6,
        rate_dist: 5e6,
        eps_local: 1e-3,
        eps_gap: 1e-3,
        lambda_reg: 0.01,
        rho_min: 10.0,
    }
}

#[test]
fn verdicts_agree_with_simulation() {
    for (s, want) in [
        (compute_bound(), Verdict::Decreases),
        (comm_bound(), Verdict::Increases),
    ] {
        for k in 1..=4 {
            let v = addition_verdict_in(&s, k).unwrap();
            assert_eq!(v.verdict, want, "K={k}");
            let a = avg_completion_mc(&s.system_at(k).unwrap(), 4000, 1).unwrap();
            let b = avg_completion_mc(&s.system_at(k + 1).unwrap(), 4000, 2).unwrap();
            let se = (a.stderr_s.powi(2) + b.stderr_s.powi(2)).sqrt();
            match want {
                Verdict::Decreases => assert!(b.mean_s < a.mean_s + 4.0 * se, "K={k}"),
                _ => assert!(b.mean_s > a.mean_s - 4.0 * se, "K={k}"),
            }
        }
    }
}

#[test]
fn verdicts_on_defaults_are_sound_when_determinate() {
    let s = scenario();
    for k in 1..=10 {
        let v = addition_verdict_in(&s, k).unwrap();
        assert!(!v.divergent);
        if v.verdict == Verdict::Indeterminate {
            assert!(v.margin_s > 0.0);
            continue;
        }
        let a = avg_completion_mc(&s.system_at(k).unwrap(), 3000, 3).unwrap();
        let b = avg_completion_mc(&s.system_at(k + 1).unwrap(), 3000, 4).unwrap();
        let se = (a.stderr_s.powi(2) + b.stderr_s.powi(2)).sqrt();
        match v.verdict {
            Verdict::Decreases => assert!(b.mean_s < a.mean_s + 4.0 * se, "K={k}"),
            _ => assert!(b.mean_s > a.mean_s - 4.0 * se, "K={k}"),
        }
    }
}

fn fixture_input(k: usize) -> HighAccuracyInput {
    HighAccuracyInput {
        k,
        eta_max: 100.0,
        eta_min: 10.0,
        rho_max: 100.0,
        rho_min: 10.0,
        radio: RadioConfig::new(20e6, 5e6, 5e6, 5e6).unwrap(),
        c: 1e-10,
        n_total: 4600,
        eps_local: 1e-3,
    }
}

#[test]
fn high_accuracy_multicast_terms_are_bound_differences() {
    // With a negligible upload rate the upload terms are 1 and K, and
    // the multicast terms are 1/(1-p) at K+1 (best SNR) and K (worst).
    let r = RadioConfig::new(20e6, 5e6, 1e-9, 5e6).unwrap();
    for k in 1..=12 {
        let input = HighAccuracyInput {
            radio: r,
            ..fixture_input(k)
        };
        let p_next = outage_worstbest_multicast(100.0, k + 1, &r).unwrap();
        let p_now = outage_worstbest_multicast(10.0, k, &r).unwrap();
        let want = 1.0 + p_next.expected_tx() - k as f64 - p_now.expected_tx();
        for form in [HighAccuracyForm::Scaled, HighAccuracyForm::Unscaled] {
            let got = high_accuracy_condition(&input, form).unwrap();
            assert!((got.lhs - want).abs() < 1e-9 * want.abs().max(1.0), "K={k} {form:?}");
            let saving = 1e-10 * 4600.0 / 1e-3 * (1.0 / k as f64 - 1.0 / (k + 1) as f64);
            assert!((got.rhs - saving).abs() < 1e-15);
        }
    }
}

#[test]
fn high_accuracy_flips_with_compute() {
    // very poor worst-case upload at K+1 against a cheap compute saving
    let weak = HighAccuracyInput {
        eta_max: 0.5,
        eta_min: 0.5,
        rho_max: 0.5,
        rho_min: 0.5,
        c: 0.0,
        ..fixture_input(1)
    };
    let r = high_accuracy_condition(&weak, HighAccuracyForm::Unscaled).unwrap();
    assert!(r.holds, "{r:?}");
    let heavy = HighAccuracyInput { c: 1e3, ..weak };
    assert!(
        !high_accuracy_condition(&heavy, HighAccuracyForm::Unscaled)
            .unwrap()
            .holds
    );
    assert!(high_accuracy_condition(&HighAccuracyInput { k: 0, ..weak }, HighAccuracyForm::Unscaled).is_err());
    assert!(high_accuracy_condition(&HighAccuracyInput { c: -1.0, ..weak }, HighAccuracyForm::Unscaled).is_err());
}

#[test]
fn failing_the_necessary_condition_means_decreasing_bound() {
    let mut checked = 0;
    for &c in &[1e-10, 1e-8, 1e-6, 1e-4] {
        for &rate in &[1e3, 1e5, 5e6] {
            for &rho in &[1.0, 10.0, 100.0] {
                let p = LargeDataParams {
                    c,
                    rate_dist: rate,
                    rho_min: rho,
                    ..params()
                };
                for k in 1..=30 {
                    if !necessary_condition_holds(k, rho, &p).unwrap() {
                        checked += 1;
                        for form in [StationarityForm::Derivative, StationarityForm::SlotScaled] {
                            let r = stationarity_residual(k as f64, &p, form);
                            assert!(r < 0.0, "c={c} rate={rate} rho={rho} K={k} {form:?}: {r}");
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn q_on_the_default_grid() {
    let p = params();
    let q: Vec<f64> = (1..=30).map(|k| q_of_k(k, &p)).collect();
    assert!(q.iter().all(|v| v.is_finite() && *v < 0.0));
    assert!((1..=30).all(|k| necessary_condition_holds(k, 10.0, &p).unwrap()));
    assert!(q[3] > q[0]);
}

#[test]
fn derivative_roots_bracket_the_relaxed_minimum() {
    let p = params();
    let roots = stationarity_roots(&p, StationarityForm::Derivative, 0.5, 64.0, 4000).unwrap();
    assert_eq!(roots.len(), 1);
    let k0 = roots[0];
    let f0 = p.relaxed_upper(k0);
    for &k in &[0.5, 1.0, 2.0, 4.0, 8.0, 32.0] {
        assert!(p.relaxed_upper(k) >= f0 - 1e-12 * f0, "K={k}");
    }
    assert!(stationarity_roots(&p, StationarityForm::Derivative, 2.0, 1.0, 10).is_err());
}

#[test]
fn optimal_k_special_cases() {
    let ideal = Scenario {
        ideal_channel: true,
        ..scenario()
    };
    assert_eq!(optimal_k_search(&ideal, 9, 5, 0).unwrap().k_star, 9);
    // no compute and almost no data: only per-iteration traffic is left
    let free = Scenario {
        n_total: 2,
        compute: (0.0, 0.0),
        compute_spacing: Spacing::Linear,
        ..scenario()
    };
    let r = optimal_k_search(&free, 6, 2000, 0).unwrap();
    assert_eq!(r.k_star, 1, "{:?}", r.table);
    assert!(optimal_k_search(&scenario(), 0, 10, 0).is_err());
}

#[test]
fn search_is_deterministic() {
    let s = scenario();
    let a = optimal_k_search(&s, 8, 200, 5).unwrap();
    let b = optimal_k_search(&s, 8, 200, 5).unwrap();
    assert_eq!(a, b);
    let best = a.table.iter().map(|r| r.mean_s).fold(f64::INFINITY, f64::min);
    assert_eq!(a.table[a.k_star - 1].mean_s, best);
}
