use acim_core::grid_bv::{bv_norm, gradient_l1, io, lp_norm, mollify, sobolev_exponent};
use acim_core::{GridFunction, UniformGrid};
use proptest::prelude::*;

#[test]
fn square_indicator_variation_is_its_perimeter() {
    let grid = UniformGrid::new(2, 40).unwrap();
    let h = GridFunction::from_fn(grid, |x| {
        if (0.25..0.75).contains(&x[0]) && (0.25..0.75).contains(&x[1]) {
            1.0
        } else {
            0.0
        }
    });
    assert!((bv_norm(&h) - 2.0).abs() < 1e-12);
    assert!((gradient_l1(&h) - 2.0).abs() < 1e-12);
}

#[test]
fn sobolev_exponent_by_dimension() {
    assert_eq!(sobolev_exponent(&UniformGrid::new(2, 4).unwrap()), 2.0);
    assert_eq!(sobolev_exponent(&UniformGrid::new(3, 4).unwrap()), 1.5);
}

fn grid_function(dim: usize, n: usize) -> impl Strategy<Value = GridFunction> {
    let grid = UniformGrid::new(dim, n).unwrap();
    prop::collection::vec(0.0f64..4.0, grid.cell_count())
        .prop_map(move |v| GridFunction::new(grid, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mollified_density_is_floored(h in grid_function(2, 20), delta in 0.1f64..0.5) {
        let hd = mollify(&h, delta).unwrap();
        prop_assert!(hd.min() >= delta);
        prop_assert!(gradient_l1(&hd) <= bv_norm(&h) + 1e-9);
    }

    #[test]
    fn mollifier_preserves_mass_of_interior_bumps(delta in 0.1f64..0.2) {
        let grid = UniformGrid::new(1, 100).unwrap();
        let h = GridFunction::from_fn(grid, |x| if (0.4..0.6).contains(&x[0]) { 5.0 } else { 0.0 });
        let hd = mollify(&h, delta).unwrap();
        prop_assert!((hd.mass() - h.mass() - delta).abs() < 1e-12);
    }

    #[test]
    fn variation_is_a_seminorm_plus_boundary(f in grid_function(1, 30), g in grid_function(1, 30), c in -3.0f64..3.0) {
        let sum = f.add(&g).unwrap();
        prop_assert!(bv_norm(&sum) <= bv_norm(&f) + bv_norm(&g) + 1e-12);
        prop_assert!((bv_norm(&f.clone().scaled(c)) - c.abs() * bv_norm(&f)).abs() < 1e-9);
        prop_assert!(bv_norm(&f) >= gradient_l1(&f));
    }

    #[test]
    fn csv_and_binary_round_trip(h in grid_function(2, 7)) {
        let mut csv = Vec::new();
        io::write_csv(&h, &mut csv).unwrap();
        prop_assert_eq!(&io::read_csv(*h.grid(), csv.as_slice()).unwrap(), &h);
        let mut bin = Vec::new();
        io::write_binary(&h, &mut bin).unwrap();
        prop_assert_eq!(&io::read_binary(bin.as_slice()).unwrap(), &h);
    }

    #[test]
    fn l1_norm_dominated_by_sup(h in grid_function(3, 5)) {
        prop_assert!(lp_norm(&h, 1.0) <= lp_norm(&h, f64::INFINITY) + 1e-12);
        prop_assert!(lp_norm(&h, 1.0) <= lp_norm(&h, 2.0) + 1e-12);
    }
}
