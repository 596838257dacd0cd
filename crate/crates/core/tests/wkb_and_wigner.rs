use num_complex::Complex64;
use proptest::prelude::*;

use semiclassical::phase_space::PotentialModel;
use semiclassical::ray_map::{InitialPhase, SearchBox};
use semiclassical::reference::{evolve_split_step, resolved_grid, SpatialGrid, WaveField};
use semiclassical::wigner::{concentration_weights, natural_xi_grid, wigner_transform};
use semiclassical::wkb::{InitialAmplitude, Problem};

fn problem(potential: PotentialModel, width: f64) -> Problem {
    Problem::new(
        potential,
        InitialPhase::cosine(1),
        InitialAmplitude::bump(vec![0.0], width).unwrap(),
        SearchBox::symmetric(1, 8.0).unwrap(),
    )
    .unwrap()
}

fn evolved(p: &Problem, eps: f64, t: f64) -> WaveField {
    let base = SpatialGrid::uniform(1, -20.0, 40.0, 2048).unwrap();
    let start = WaveField::initial_datum(resolved_grid(p, &base, eps).unwrap(), eps, p).unwrap();
    evolve_split_step(&p.potential, &start, t, 0.005).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn branch_amplitudes_do_not_depend_on_eps(
        lattice in any::<bool>(),
        t in 1.8f64..3.0,
        x in -1.0f64..1.0,
        eps in 0.001f64..0.1,
    ) {
        let v = if lattice { PotentialModel::cosine(1, 0.2, 1.0) } else { PotentialModel::zero(1) };
        let p = problem(v, 3.0);
        let parts = p.contributions(t, &[x]).unwrap();
        let rebuilt: Complex64 = parts.iter().map(|c| c.amplitude * Complex64::from_polar(1.0, c.phase / eps)).sum();
        prop_assert!((rebuilt - p.wkb_value(eps, t, &[x]).unwrap()).norm() <= 1e-12);
        for c in &parts {
            let expected = p.amplitude.value(&c.branch.y).abs() / c.branch.jacobian.sqrt();
            prop_assert!((c.amplitude.norm() - expected).abs() <= 1e-12);
            // the phase factor is a power of i
            let unit = c.amplitude / expected.max(f64::MIN_POSITIVE);
            prop_assert!(expected == 0.0 || (unit.re.abs() - 1.0).abs() + unit.im.abs() < 1e-12
                || unit.re.abs() + (unit.im.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn time_zero_reproduces_the_initial_datum(x in -4.0f64..4.0, eps in 0.001f64..0.1) {
        let p = problem(PotentialModel::harmonic(1, 1.0), 3.0);
        let wkb = p.wkb_value(eps, 0.0, &[x]).unwrap();
        let datum = p.amplitude.value(&[x]) * Complex64::from_polar(1.0, x.cos() / eps);
        prop_assert!((wkb - datum).norm() <= 1e-14);
        prop_assert_eq!(wkb, p.initial_value(eps, &[x]));
    }
}

#[test]
fn branches_outside_the_support_contribute_nothing() {
    // a narrow bump leaves the outer branches at x = 0, t = 2 outside its support
    let p = problem(PotentialModel::zero(1), 1.0);
    let parts = p.contributions(2.0, &[0.0]).unwrap();
    assert_eq!(parts.len(), 3);
    let silent = parts.iter().filter(|c| c.amplitude == Complex64::new(0.0, 0.0)).count();
    assert_eq!(silent, 2);
    let eps = 1.0 / 64.0;
    let kept: Complex64 = parts
        .iter()
        .filter(|c| c.amplitude != Complex64::new(0.0, 0.0))
        .map(|c| c.value(eps))
        .sum();
    assert_eq!(kept, p.wkb_value(eps, 2.0, &[0.0]).unwrap());
}

#[test]
fn wigner_marginal_and_total_mass() {
    let p = problem(PotentialModel::zero(1), 3.0);
    let eps = 1.0 / 64.0;
    let field = evolved(&p, eps, 2.0);
    let grid = natural_xi_grid(&field);
    let interp = field.interpolant();
    for x in [-1.234, -0.3, 0.0, 0.0371, 0.5, 2.2] {
        let slice = wigner_transform(&field, &[x], &grid).unwrap();
        let density = interp.value(&[x]).norm_sqr();
        assert!(
            (slice.marginal() - density).abs() <= 1e-6,
            "x {x}: {} vs {density}",
            slice.marginal()
        );
    }
    let total = field.mass();
    for x in [-1.0, 0.0, 0.2] {
        let masses = concentration_weights(&field, &p, 2.0, &[x], 0.2).unwrap();
        let sum: f64 = masses.iter().map(|m| m.mass).sum();
        assert!(sum <= total + 1e-3, "x {x}: {sum} > {total}");
    }
}
