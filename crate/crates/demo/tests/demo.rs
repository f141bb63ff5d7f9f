use biteweight_demo::{aic_scan, describe, describe_json, generate_signal, grnn_curve, SignalKind};

#[test]
fn descriptor_view_is_complete_and_finite() {
    for kind in [SignalKind::Sine, SignalKind::Noise, SignalKind::Chirp] {
        let v = describe(kind, 4096, 1500.0, 0.3, 7).unwrap();
        assert_eq!(v.samples.len(), 4096);
        assert_eq!(v.values.len(), v.names.len());
        assert!(v.values.iter().all(|x| x.is_finite()));
        assert!(v.band_edges_hz.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn signal_kinds_parse_and_noise_is_seeded() {
    assert_eq!(SignalKind::parse("chirp"), Some(SignalKind::Chirp));
    assert_eq!(SignalKind::parse("square"), None);
    let a = generate_signal(SignalKind::Noise, 512, 3000.0, 1.0, 1);
    assert_eq!(a, generate_signal(SignalKind::Noise, 512, 3000.0, 1.0, 1));
    assert_ne!(a, generate_signal(SignalKind::Noise, 512, 3000.0, 1.0, 2));
}

#[test]
fn json_export_parses() {
    let s = describe_json("sine", 2048, 800.0, 0.5, 0).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 2048);
}

#[test]
fn aic_scan_separates_two_clusters_and_keeps_one_blob() {
    let far = aic_scan(10.0, 150, 6, 3).unwrap();
    assert_eq!(far.k, 2);
    assert_eq!(far.centroids.len(), 2);
    assert_eq!(far.aic_curve.len(), 6);
    let near = aic_scan(0.0, 150, 6, 3).unwrap();
    assert_eq!(near.k, 1);
}

fn nw(x: &[f64], y: &[f64], sigma: f64, at: f64) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| (-(v - at).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
}

#[test]
fn grnn_curve_matches_a_direct_kernel_average() {
    let v = grnn_curve(0.3, 40, 0.2, 5).unwrap();
    assert_eq!(v.grid.len(), v.prediction.len());
    for (g, p) in v.grid.iter().zip(&v.prediction) {
        let want = nw(&v.x, &v.y, v.sigma, *g);
        assert!((p - want).abs() <= 1e-9 * want.abs().max(1.0), "{g}: {p} vs {want}");
    }
    let wide = grnn_curve(1e3, 40, 0.2, 5).unwrap();
    let mean = wide.y.iter().sum::<f64>() / wide.y.len() as f64;
    assert!(wide.prediction.iter().all(|p| (p - mean).abs() < 1e-4));
    assert!(grnn_curve(1.0, 1, 0.2, 5).is_err());
}
