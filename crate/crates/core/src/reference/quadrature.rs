use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ray_map::InitialPhase;
use crate::wkb::InitialAmplitude;

/// Target density of quadrature nodes per local wavelength of the integrand.
pub const NODES_PER_WAVELENGTH: f64 = 40.0;
/// Total node budget of one evaluation.
pub const QUADRATURE_NODE_BUDGET: usize = 4_000_000;
/// Gauss–Legendre nodes per panel.
const PANEL_ORDER: usize = 16;
/// Panels never exceed this fraction of the amplitude length scale.
const MAX_PANEL_FRACTION: f64 = 1.0 / 16.0;

/// Free-space solution at `(t, x)` as the oscillatory integral
///
/// ```text
/// (2 pi i eps t)^(-1/2) int exp(i phi(y) / eps) a_in(y) dy,   phi = (x - y)^2 / (2t) + S_in(y)
/// ```
///
/// with the principal square root, by composite Gauss–Legendre panels sized
/// from the local phase derivative.
pub fn free_quadrature(
    t: f64,
    x: f64,
    eps: f64,
    amplitude: &InitialAmplitude,
    phase: &InitialPhase,
) -> Result<Complex64> {
    if amplitude.dim() != 1 || phase.dim() != 1 {
        return Err(Error::InvalidInput("the quadrature oracle is one-dimensional".into()));
    }
    if t == 0.0 || !t.is_finite() || !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "quadrature needs finite t != 0 and x, got t = {t}, x = {x}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
    }
    let rule = GaussLegendre::new(PANEL_ORDER).expect("panel order is at least 2");
    let support = amplitude.support();
    let (a, b) = (support.lower[0], support.upper[0]);
    let h_max = amplitude.length_scale() * MAX_PANEL_FRACTION;

    let phi = |y: f64| (x - y) * (x - y) / (2.0 * t) + phase.value(&[y]);
    let dphi = |y: f64| {
        let mut g = [0.0];
        phase.gradient(&[y], &mut g);
        (y - x) / t + g[0]
    };
    let max_dphi = |lo: f64, hi: f64| {
        (0..=8)
            .map(|k| dphi(lo + (hi - lo) * k as f64 / 8.0).abs())
            .fold(0.0, f64::max)
    };

    let mut sum = Complex64::new(0.0, 0.0);
    let mut used = 0usize;
    let mut left = a;
    while left < b {
        let mut h = h_max.min(b - left);
        loop {
            let slope = max_dphi(left, left + h);
            let allowed = PANEL_ORDER as f64 * 2.0 * PI * eps / (NODES_PER_WAVELENGTH * slope);
            if h <= allowed {
                break;
            }
            h = 0.9 * allowed;
        }
        used += PANEL_ORDER;
        if used > QUADRATURE_NODE_BUDGET {
            return Err(Error::UnderResolved {
                budget: QUADRATURE_NODE_BUDGET,
            });
        }
        let half = 0.5 * h;
        let mid = left + half;
        for &(node, weight) in rule.as_node_weight_pairs() {
            let y = mid + half * node;
            let amp = amplitude.value(&[y]);
            if amp != 0.0 {
                sum += Complex64::from_polar(weight * half * amp, phi(y) / eps);
            }
        }
        left += h;
    }
    let prefactor = Complex64::new(0.0, 2.0 * PI * eps * t).sqrt();
    Ok(sum / prefactor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_phase_gaussian_matches_closed_form() {
        // a = exp(-y^2 / 2) evolves to (1 + i eps t)^(-1/2) exp(-x^2 / (2 (1 + i eps t)))
        let a = InitialAmplitude::gaussian(vec![0.0], 1.0).unwrap();
        let s = InitialPhase::isotropic_quadratic(1, 0.0);
        let (t, eps) = (1.0, 0.1);
        for x in [0.0, 0.4, -1.3] {
            let z = Complex64::new(1.0, eps * t);
            let exact = (-(x * x) / (2.0 * z)).exp() / z.sqrt();
            let got = free_quadrature(t, x, eps, &a, &s).unwrap();
            assert!((got - exact).norm() < 1e-10, "{x}: {got} vs {exact}");
        }
    }

    #[test]
    fn short_time_limit_recovers_initial_datum() {
        let a = InitialAmplitude::bump(vec![0.0], 3.0).unwrap();
        let s = InitialPhase::cosine(1);
        let eps = 0.05;
        for x in [0.0, 0.7, -1.5] {
            let got = free_quadrature(1e-3, x, eps, &a, &s).unwrap();
            let datum = Complex64::from_polar(a.value(&[x]), x.cos() / eps);
            assert!((got - datum).norm() < 1e-2);
        }
    }

    #[test]
    fn negative_time_uses_principal_root() {
        let a = InitialAmplitude::gaussian(vec![0.0], 1.0).unwrap();
        let s = InitialPhase::isotropic_quadratic(1, 0.0);
        let (t, eps) = (-0.5, 0.2);
        let z = Complex64::new(1.0, eps * t);
        let got = free_quadrature(t, 0.0, eps, &a, &s).unwrap();
        assert!((got - 1.0 / z.sqrt()).norm() < 1e-10);
    }

    #[test]
    fn budget_is_enforced() {
        let a = InitialAmplitude::bump(vec![0.0], 3.0).unwrap();
        let s = InitialPhase::cosine(1);
        assert!(matches!(
            free_quadrature(1e-6, 0.0, 1e-4, &a, &s),
            Err(Error::UnderResolved { .. })
        ));
        assert!(free_quadrature(0.0, 0.0, 0.1, &a, &s).is_err());
    }
}
