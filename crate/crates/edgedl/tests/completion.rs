use edgedl::channel_model::{outage_data_dist, PhaseOutages, RadioConfig, SnrProfile};
use edgedl::cocoa::PartitionMode;
use edgedl::completion_time::{
    avg_completion_mc, centralized_time, completion_bounds, global_iterations, large_data_upper, local_compute_time,
    Access, DistModel, Scenario, SigmaProduct, Spacing,
};
use edgedl::retransmission::expected_max_weighted_tx_mc;

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

#[test]
fn sandwich_on_a_coarse_k_grid() {
    let s = scenario();
    for k in [1, 2, 5, 10, 15, 20] {
        let e = avg_completion_mc(&s.system_at(k).unwrap(), 2000, 7).unwrap();
        let slack = 3.0 * e.stderr_s;
        assert!(
            e.lower_bound_s - slack <= e.mean_s && e.mean_s <= e.upper_bound_s + slack,
            "K={k}: {e:?}"
        );
    }
}

#[test]
fn homogeneous_profiles_collapse_the_bounds() {
    let s = Scenario {
        rho_db: (13.0, 13.0),
        eta_db: (11.0, 11.0),
        compute: (5e-10, 5e-10),
        ..scenario()
    };
    for k in [1, 3, 8] {
        let cfg = s.system_at(k).unwrap();
        let b = completion_bounds(&cfg).unwrap();
        assert!((b.upper_s - b.lower_s).abs() <= 1e-12 * b.upper_s);
        let e = avg_completion_mc(&cfg, 4000, 3).unwrap();
        assert!(
            (e.mean_s - b.upper_s).abs() < 4.0 * e.stderr_s,
            "K={k}: {} vs {}",
            e.mean_s,
            b.upper_s
        );
    }
}

#[test]
fn bound_gap_grows_with_spread() {
    let base = scenario();
    for k in [2, 5, 12] {
        let mut last = -1.0;
        for half in [0.0, 2.0, 4.0, 6.0, 8.0] {
            let s = Scenario {
                rho_db: (15.0 - half, 15.0 + half),
                eta_db: (15.0 - half, 15.0 + half),
                ..base.clone()
            };
            let b = completion_bounds(&s.system_at(k).unwrap()).unwrap();
            let gap = b.upper_s - b.lower_s;
            assert!(gap >= last - 1e-12, "K={k} half={half}");
            last = gap;
        }
    }
}

#[test]
fn resampling_matches_linearity_of_expectation() {
    let cfg = scenario().system_at(6).unwrap();
    let o = PhaseOutages::oma(&cfg.snr, &cfg.radio).unwrap();
    let m_k = global_iterations(&cfg).unwrap().count as f64;
    let sizes: Vec<f64> = cfg.partition_sizes.iter().map(|&n| n as f64).collect();
    let (dist, dist_se) = expected_max_weighted_tx_mc(&o.dist, &sizes, 400_000, 1).unwrap();
    let (up, up_se) = expected_max_weighted_tx_mc(&o.up, &[1.0; 6], 400_000, 2).unwrap();
    let w = cfg.slot_seconds;
    let assembled = w * dist + m_k * (cfg.max_compute_load() / cfg.eps_local + w * up + w * o.mul.expected_tx());
    let assembled_se = ((w * dist_se).powi(2) + (m_k * w * up_se).powi(2)).sqrt();
    let e = avg_completion_mc(&cfg, 5000, 5).unwrap();
    let se = (e.stderr_s.powi(2) + assembled_se.powi(2)).sqrt();
    assert!((e.mean_s - assembled).abs() < 4.0 * se, "{} vs {assembled}", e.mean_s);
}

#[test]
fn ideal_channel_is_exact() {
    let s = Scenario {
        ideal_channel: true,
        compute: (2e-9, 2e-9),
        ..scenario()
    };
    for k in [1, 4, 7] {
        let cfg = s.system_at(k).unwrap();
        let e = avg_completion_mc(&cfg, 10, 0).unwrap();
        let m_k = e.iterations_m_k as f64;
        let n_max = cfg.max_block() as f64;
        let exact = 1e-3 * n_max + m_k * (2e-9 * n_max / 1e-3 + 2e-3);
        assert!((e.mean_s - exact).abs() <= 1e-9 * exact, "K={k}");
        assert_eq!(e.stderr_s, 0.0);
    }
}

#[test]
fn estimates_are_seeded() {
    let cfg = scenario().system_at(9).unwrap();
    let a = avg_completion_mc(&cfg, 300, 42).unwrap();
    let b = avg_completion_mc(&cfg, 300, 42).unwrap();
    let c = avg_completion_mc(&cfg, 300, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mean_s, c.mean_s);
}

#[test]
fn large_data_upper_bounds_dist_and_compute_terms() {
    let s = scenario();
    for k in 1..=20 {
        let cfg = s.system_at(k).unwrap();
        let m_k = global_iterations(&cfg).unwrap().count as f64;
        let p = outage_data_dist(cfg.snr.rho_max(), k, &cfg.radio).unwrap();
        let lower_part =
            cfg.slot_seconds * cfg.max_block() as f64 * p.expected_tx() + m_k * cfg.max_compute_load() / cfg.eps_local;
        assert!(large_data_upper(&cfg).unwrap() >= lower_part, "K={k}");
    }
    let cfg = scenario().system_at(4).unwrap();
    let p = outage_data_dist(10.0, 4, &cfg.radio).unwrap().prob();
    let m_k = global_iterations(&cfg).unwrap().count as f64;
    let expect = 1e-3 * 4600.0 / (1.0 - p) + m_k * cfg.max_compute_load() / 1e-3;
    assert!((large_data_upper(&cfg).unwrap() - expect).abs() < 1e-9 * expect);
}

#[test]
fn simple_time_formulas() {
    assert!((local_compute_time(1e-9, 1000, 1e-3).unwrap() - 1e-3).abs() < 1e-18);
    assert_eq!(local_compute_time(1e-9, 0, 1e-3).unwrap(), 0.0);
    assert!(local_compute_time(1e-9, 10, 0.0).is_err());
    assert!((centralized_time(1e-10, 4600, 1e-3).unwrap() - 4.6e-4).abs() < 1e-15);
    assert!(centralized_time(1e-10, 4600, 0.0).is_err());
}

#[test]
fn idle_devices_are_allowed() {
    let s = Scenario {
        n_total: 3,
        ..scenario()
    };
    let cfg = s.system_at(5).unwrap();
    assert_eq!(cfg.partition_sizes, vec![1, 1, 1, 0, 0]);
    let e = avg_completion_mc(&cfg, 50, 1).unwrap();
    assert!(e.mean_s.is_finite());
}

#[test]
fn noma_estimates_have_open_bounds() {
    let s = Scenario {
        access: Access::Noma { trials: 20_000 },
        ..scenario()
    };
    let cfg = s.system_at(3).unwrap();
    assert!(completion_bounds(&cfg).is_err());
    let e = avg_completion_mc(&cfg, 200, 1).unwrap();
    assert_eq!((e.lower_bound_s, e.upper_bound_s), (0.0, f64::INFINITY));
}

#[test]
fn noma_and_oma_agree_for_one_device() {
    let s = scenario();
    let oma = avg_completion_mc(&s.system_at(1).unwrap(), 4000, 3).unwrap();
    let noma_s = Scenario {
        access: Access::Noma { trials: 400_000 },
        ..s
    };
    let noma = avg_completion_mc(&noma_s.system_at(1).unwrap(), 4000, 4).unwrap();
    let se = (oma.stderr_s.powi(2) + noma.stderr_s.powi(2)).sqrt();
    assert!(
        (oma.mean_s - noma.mean_s).abs() < 4.0 * se,
        "{} vs {}",
        oma.mean_s,
        noma.mean_s
    );
}

#[test]
fn per_example_mode_runs_and_is_not_slower_than_scaled_worst_case() {
    let s = Scenario {
        dist_model: DistModel::PerExample,
        ..scenario()
    };
    let cfg = s.system_at(4).unwrap();
    let e = avg_completion_mc(&cfg, 500, 2).unwrap();
    assert!(e.mean_s.is_finite() && e.mean_s > 0.0);
    let snr = SnrProfile::homogeneous(1, 10.0, 10.0).unwrap();
    assert_eq!(snr.len(), 1);
}
