use num_traits::ToPrimitive;
use parking_core::analytic::{density_time, end_density, DiscreteDist};
use parking_core::simulator::{
    mann_kendall, raise_fraction, recommended_arrivals, run, Mode, RunConfig, SiteLabel,
};

const CENTER: SiteLabel = SiteLabel::Site(1);

#[test]
fn fixed_time_agrees_with_closed_form() {
    for (i, t) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let cfg = RunConfig::new(3, Mode::FixedTime(t), 100_000, 6, 100 + i as u64);
        let out = run(&cfg).unwrap();
        for r in 1..=6u32 {
            let e = out.estimate(CENTER, r).unwrap();
            let d = density_time(r as usize, t).unwrap();
            let se = (d * (1.0 - d) / e.replications as f64).sqrt();
            assert!(
                (e.mean - d).abs() <= 4.0 * se,
                "t={t} r={r}: {} vs {d}",
                e.mean
            );
        }
    }
}

#[test]
fn height_histogram_agrees_with_law() {
    let cfg = RunConfig::new(3, Mode::FixedTime(1.0), 1_000_000, 1, 5);
    let out = run(&cfg).unwrap();
    let heights = out.heights.unwrap();
    assert_eq!(heights.identity_violations, 0);
    let law = DiscreteDist::height(1.0, 1e-15).unwrap();
    for h in 0..=6 {
        let p = *law.get(h as i64).unwrap();
        let se = (p * (1.0 - p) / 1e6).sqrt();
        assert!((heights.probability(h) - p).abs() <= 4.0 * se, "h={h}");
    }
}

#[test]
fn end_density_plateau_under_doubling() {
    let layers = 8;
    let m = 60 * u64::from(layers);
    let short = run(&RunConfig::new(
        3,
        Mode::FixedArrivals(m),
        50_000,
        layers,
        9,
    ))
    .unwrap();
    let long = run(&RunConfig::new(
        3,
        Mode::FixedArrivals(2 * m),
        50_000,
        layers,
        9,
    ))
    .unwrap();
    for r in 1..=layers {
        let a = short.estimate(CENTER, r).unwrap();
        let b = long.estimate(CENTER, r).unwrap();
        assert!(
            (a.mean - b.mean).abs() <= 2.0 * a.stderr.max(b.stderr),
            "r={r}"
        );
    }
}

#[test]
fn end_density_agrees_with_exact_values() {
    let layers = 6;
    let m = recommended_arrivals(3, layers);
    let out = run(&RunConfig::new(
        3,
        Mode::FixedArrivals(m),
        200_000,
        layers,
        77,
    ))
    .unwrap();
    assert_eq!(out.unsettled, 0);
    for r in 1..=layers {
        let exact = end_density(r as usize).unwrap().to_f64().unwrap();
        let e = out.estimate(CENTER, r).unwrap();
        assert!((e.mean - exact).abs() <= 4.0 * e.stderr, "r={r}");
    }
}

#[test]
fn two_thirds_of_arrivals_raise_the_height() {
    let mut cfg = RunConfig::new(3, Mode::FixedArrivals(30_000), 100, 1, 2024);
    cfg.track_raises = true;
    let stats = raise_fraction(&cfg).unwrap();
    assert!(stats.raised <= stats.total);
    assert!(
        (stats.fraction() - 2.0 / 3.0).abs() < 0.005,
        "{}",
        stats.fraction()
    );
}

#[test]
fn side_imbalance_grows_like_square_root() {
    let gap = |m: u64| {
        let mut cfg = RunConfig::new(3, Mode::FixedArrivals(m), 2_000, 1, 31);
        cfg.track_raises = true;
        raise_fraction(&cfg).unwrap().mean_side_gap()
    };
    let ratio = gap(40_000) / gap(10_000);
    assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn nine_sites_increase_with_layer() {
    let layers = 40;
    let m = recommended_arrivals(9, layers);
    let out = run(&RunConfig::new(
        9,
        Mode::FixedArrivals(m),
        40_000,
        layers,
        3,
    ))
    .unwrap();
    let column: Vec<f64> = out
        .column(SiteLabel::Site(4))
        .iter()
        .map(|e| e.mean)
        .collect();
    assert!(mann_kendall(&column).increasing_at_95());
    assert!(column.iter().all(|&v| v < 0.5));
}
