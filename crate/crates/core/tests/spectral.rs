use std::f64::consts::TAU;

use acim_core::spectral::{acim, analyze, cesaro_projector, correlation_series, lasota_yorke_check, SpectralOptions};
use acim_core::transfer_op::assemble_ulam;
use acim_core::{AssemblyConfig, GridFunction, MapSpec, UniformGrid};
use proptest::prelude::*;

fn matrix(name: &str, n: usize) -> acim_core::UlamMatrix {
    // an even lattice splits cells evenly at 1/2, a multiple of 3 at 1/3
    let map = MapSpec::named(name).build().unwrap();
    assemble_ulam(&map, UniformGrid::new(1, n).unwrap(), AssemblyConfig::lattice(30)).unwrap()
}

#[test]
fn tent_density_is_uniform() {
    let a = matrix("tent", 64);
    let h = acim(&a, 1e-13, 1000).unwrap().density;
    assert!(h.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
}

#[test]
fn sqrt_density_matches_preimage_sum() {
    // oracle: the invariant density of a√x mod 1 is the fixed point of
    // Lh(y) = Σ_k 2(y+k)/a² h(((y+k)/a)²), iterated on a fine grid
    let a_param = 7.0f64;
    let fine = 4000;
    let mut h = vec![1.0; fine];
    for _ in 0..200 {
        let next: Vec<f64> = (0..fine)
            .map(|i| {
                let y = (i as f64 + 0.5) / fine as f64;
                (0..7)
                    .map(|k| {
                        let x = ((y + k as f64) / a_param).powi(2);
                        2.0 * (y + k as f64) / (a_param * a_param) * h[((x * fine as f64) as usize).min(fine - 1)]
                    })
                    .sum()
            })
            .collect();
        let mass: f64 = next.iter().sum::<f64>() / fine as f64;
        h = next.into_iter().map(|v| v / mass).collect();
    }
    // cells near 0 spread over many image cells and need dense sampling
    let map = MapSpec::named("sqrt1d").build().unwrap();
    let a = assemble_ulam(&map, UniformGrid::new(1, 200).unwrap(), AssemblyConfig::lattice(4096)).unwrap();
    let ulam = acim(&a, 1e-12, 10_000).unwrap().density;
    let err: f64 = (0..200)
        .map(|j| {
            let avg: f64 = h[j * 20..(j + 1) * 20].iter().sum::<f64>() / 20.0;
            (avg - ulam.values()[j]).abs()
        })
        .sum::<f64>()
        / 200.0;
    assert!(err < 1e-2, "L1 distance {err}");
}

#[test]
fn cesaro_average_at_one_keeps_mass() {
    let a = matrix("ternary", 81);
    let g = GridFunction::from_fn(*a.grid(), |x| 2.0 * x[0]);
    let avg = cesaro_projector(&a, 0.0, 50, &g).unwrap();
    // θ = 0 leaves no imaginary part; the mass of g is kept
    assert!(avg.imag_l1 == 0.0);
    assert!((avg.real.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn two_cycle_spectrum() {
    let a = matrix("two-cycle", 54);
    let r = analyze(&a, &SpectralOptions::default()).unwrap();
    let [re, im] = r.leading_eigenvalue;
    assert!((re - 1.0).hypot(im) < 1e-6);
    assert_eq!(r.peripheral_eigenvalues.len(), 2);
    assert!(r.cyclic_groups.cyclic);
    // the decomposition sees one component (the whole interval)
    let comps = r.ergodic_components.unwrap();
    assert_eq!(comps.multiplicity, 1);
    assert_eq!(comps.components[0].len(), 54);
}

#[test]
fn ternary_correlations_vanish_after_one_step() {
    // for 3x mod 1, ∫cos(2πx)·Lⁿcos(2πx) = ∫cos(2πx)cos(2π3ⁿx) = 0
    let a = matrix("ternary", 243);
    let h = GridFunction::constant(*a.grid(), 1.0);
    let f = GridFunction::from_fn(*a.grid(), |x| (TAU * x[0]).cos());
    let c = correlation_series(&a, &f, &f, &h, 4).unwrap();
    assert!((c[0].1 - 0.5).abs() < 1e-3);
    assert!(c[1..].iter().all(|x| x.1.abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn two_norm_check_never_grows_l1(seed in 0u64..1000, sigma in 0.4f64..0.9) {
        let a = matrix("ternary", 81);
        let r = lasota_yorke_check(&a, sigma, 10, 4, seed).unwrap();
        prop_assert_eq!(r.l1_violations, 0);
        prop_assert!(r.max_violation <= 1e-9);
    }
}
