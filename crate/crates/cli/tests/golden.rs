use std::path::Path;

use catbranch::plot::{render_plot, PlotSpec, Series};

fn envelope_spec() -> PlotSpec {
    let t: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
    PlotSpec {
        title: "Lyapunov envelope".into(),
        x_label: "t".into(),
        y_label: "log scale".into(),
        series: vec![Series::new("log E[Phi_delta(zeta)]", t.iter().map(|&t| (t, 1e-4 * t)).collect())],
        bound: Some(Series::new("log Phi_delta(zeta_0) + K t", t.iter().map(|&t| (t, 2.0 * t)).collect())),
    }
}

#[test]
fn envelope_plot_matches_golden() {
    let svg = render_plot(&envelope_spec()).unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/envelope.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(svg, golden);
}

#[test]
fn exact_coupling_plot_is_flat_zero() {
    let spec = PlotSpec {
        title: "zeta".into(),
        x_label: "t".into(),
        y_label: "zeta".into(),
        series: vec![Series::new("zeta", (0..50).map(|k| (k as f64 * 0.02, 0.0)).collect())],
        bound: None,
    };
    let svg = render_plot(&spec).unwrap();
    let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let ys: std::collections::BTreeSet<&str> = poly
        .split("points=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap()
        .split(' ')
        .map(|p| p.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(ys.len(), 1);
}
