use lindblad_core::spectral::{ginibre_alpha, ginibre_alpha_stats, rho_g_cdf};

#[test]
fn ginue_overlaps_follow_rho_g() {
    let samples: Vec<_> = (11..14).map(|seed| ginibre_alpha(1000, seed).unwrap()).collect();
    let st = ginibre_alpha_stats(&samples, 0.9, 40).unwrap();
    assert!(st.values.len() > 2100, "{} values inside the disk", st.values.len());
    assert!(st.ks_distance <= 0.05, "KS {}", st.ks_distance);
    // histogram integrates to the fraction of mass below the last bin edge
    let width = st.centres[1] - st.centres[0];
    let mass: f64 = st.hist.iter().map(|h| h * width).sum();
    let edge = st.centres.last().unwrap() + width / 2.0;
    assert!((mass - 1.0).abs() < 0.05 && rho_g_cdf(edge) > 0.9);
}
