//! ⟨x^αp, Φ_k⟩ integrated by parts leaves the Wronskian boundary term
//! 2ν·r_k/(½+ν); the two closed forms coincide only at μ = 0.

use singheat::simulate::{source_projection, source_projection_quadrature, source_projection_wronskian};
use singheat::spectrum::{build_spectrum, derive_params};
use singheat::{Mpf, Precision, Real};

fn ratios(mu: f64) -> Vec<(f64, f64)> {
    let p = Precision::new(256).unwrap();
    let s = p.scope(|| build_spectrum(&derive_params(&Mpf::lit(mu)).unwrap(), 8, &p)).unwrap();
    (1..=8)
        .map(|k| {
            let q = source_projection_quadrature(&s, k).unwrap().to_f64_lossy();
            let w = source_projection_wronskian(&s, k).unwrap().to_f64_lossy();
            let plain = source_projection(&s, k).unwrap().to_f64_lossy();
            (-q / w, -q / plain)
        })
        .collect()
}

#[test]
fn quadrature_matches_the_wronskian_form() {
    for mu in [-1.0, -0.3, 0.0, 0.1, 0.2, 0.24] {
        for (k, (w, _)) in ratios(mu).into_iter().enumerate() {
            assert!((w - 1.0).abs() <= 1e-8, "mu = {mu}, k = {}: {w}", k + 1);
        }
    }
}

#[test]
fn plain_trace_form_is_off_by_a_mode_independent_factor() {
    for mu in [-1.0, 0.0, 0.2, 0.24] {
        let nu = 0.5 * (1.0 - 4.0 * mu).sqrt();
        let factor = 2.0 * nu / (0.5 + nu);
        for (_, plain) in ratios(mu) {
            assert!((plain - factor).abs() <= 1e-8, "mu = {mu}: {plain} vs {factor}");
        }
    }
}
