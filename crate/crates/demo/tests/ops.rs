use countmodels_demo::{copula_grid, gibbs_grid, lognormal_scatter, MAX_POINTS};

#[test]
fn scatter_is_thinned_and_signed() {
    let s = lognormal_scatter(2.0, 0.999, 20_000, 1).unwrap();
    assert!(s.points.len() <= MAX_POINTS);
    assert!(s.spearman.unwrap() > 0.5);
    let neg = lognormal_scatter(2.0, -0.999, 20_000, 1).unwrap();
    assert!(neg.spearman.unwrap() < -0.4);
    assert!(lognormal_scatter(2.0, 0.5, 1, 1).is_err());
}

#[test]
fn grids_are_distributions() {
    let g = copula_grid(3.0, 4.0, 0.7, 5_000, 2, 12).unwrap();
    let total: f64 = g.freq.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(g.freq.len(), 13);
    assert!(g.spearman.unwrap() > 0.5);

    let t = gibbs_grid("tpgm", 0.2, 0.1, -0.3, 4, 2_000, 50, 3).unwrap();
    assert_eq!(t.freq.len(), 5);
    assert!((t.freq.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-9);
    let s = gibbs_grid("sqr", 0.5, 0.5, 0.2, 10, 1_000, 50, 3).unwrap();
    assert_eq!(s.freq.len(), 11);
    assert!(gibbs_grid("pgm", 0.0, 0.0, 0.0, 4, 100, 5, 0).is_err());
}

#[test]
fn outputs_serialise_and_repeat() {
    let a = serde_json::to_string(&copula_grid(2.0, 2.0, 0.3, 500, 9, 8).unwrap()).unwrap();
    let b = serde_json::to_string(&copula_grid(2.0, 2.0, 0.3, 500, 9, 8).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("{\"max\":8"));
}
