use nalgebra::DMatrix;

use super::*;
use crate::map_model::{AffinePieceSpec, MapDynamics, MapSpec, Piece, PieceId};

fn named(name: &str) -> PiecewiseMap {
    MapSpec::named(name).build().unwrap()
}

fn liverani() -> PiecewiseMap {
    MapSpec::liverani2d(7.0, 7.0).build().unwrap()
}

fn unit_square_piece(id: usize, x_lo: f64, x_hi: f64) -> Piece {
    Piece {
        id: PieceId(id),
        bounds: vec![[x_lo, x_hi], [0.0, 1.0]],
        centroid: vec![0.5 * (x_lo + x_hi), 0.5],
    }
}

fn edge_distance(x: &[f64]) -> f64 {
    x.iter().map(|&v| v.min(1.0 - v)).fold(f64::INFINITY, f64::min)
}

/// Left half collapses onto the line `x = 1/2`, which is a piece boundary.
#[derive(Debug)]
struct Collapse {
    pieces: Vec<Piece>,
}

impl MapDynamics for Collapse {
    fn dimension(&self) -> usize {
        2
    }
    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        let inside = x.iter().all(|&v| v > 0.0 && v < 1.0);
        match x[0] {
            v if inside && v < 0.5 - 1e-12 => Some(PieceId(0)),
            v if inside && v > 0.5 + 1e-12 => Some(PieceId(1)),
            _ => None,
        }
    }
    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]) {
        out[0] = if piece.0 == 0 { 0.5 } else { 2.0 * x[0] - 1.0 };
        out[1] = x[1];
    }
    fn jacobian(&self, piece: PieceId, _x: &[f64]) -> DMatrix<f64> {
        let s = if piece.0 == 0 { 0.0 } else { 2.0 };
        DMatrix::from_row_slice(2, 2, &[s, 0.0, 0.0, 1.0])
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        edge_distance(x).min((x[0] - 0.5).abs())
    }
}

/// `T(x, y) = (2x + ln y mod 1, 2y mod 1)`: the product
/// `(DT)_{01} [(DT)^{-1}]_{11} = 1/(2y)` is not integrable.
#[derive(Debug)]
struct LogShear {
    pieces: Vec<Piece>,
}

impl MapDynamics for LogShear {
    fn dimension(&self) -> usize {
        2
    }
    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        x.iter().all(|&v| v > 0.0 && v < 1.0).then_some(PieceId(0))
    }
    fn branch_image(&self, _piece: PieceId, x: &[f64], out: &mut [f64]) {
        out[0] = (2.0 * x[0] + x[1].ln()).rem_euclid(1.0);
        out[1] = (2.0 * x[1]).rem_euclid(1.0);
    }
    fn jacobian(&self, _piece: PieceId, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0 / x[1], 0.0, 2.0])
    }
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        edge_distance(x)
    }
}

/// Strips of width `2^{-k²}` stacked down from `x = 1`, accumulating at an
/// interior point, plus one piece for the rest.
fn accumulating_strips() -> PiecewiseMap {
    let mut pieces = Vec::new();
    let mut hi = 1.0;
    for k in 1..=5 {
        let w = 2f64.powi(-(k * k));
        let lo = hi - w;
        pieces.push(AffinePieceSpec::new(
            vec![[lo, hi], [0.0, 1.0]],
            vec![vec![1.0 / w, 0.0], vec![0.0, 2.0]],
            vec![-lo / w, 0.0],
        ));
        hi = lo;
    }
    pieces.push(AffinePieceSpec::new(
        vec![[0.0, hi], [0.0, 1.0]],
        vec![vec![1.0 / hi, 0.0], vec![0.0, 2.0]],
        vec![0.0, 0.0],
    ));
    // the y-direction folds at 1/2; split every strip there
    let split: Vec<AffinePieceSpec> = pieces
        .into_iter()
        .flat_map(|p| {
            let mut lower = p.clone();
            lower.bounds[1] = [0.0, 0.5];
            let mut upper = p;
            upper.bounds[1] = [0.5, 1.0];
            upper.offset[1] = -1.0;
            [lower, upper]
        })
        .collect();
    MapSpec::affine(split).build().unwrap()
}

#[test]
fn ternary_window_sum_is_two_thirds() {
    // oracle: the three branch intervals with |1/T'| = 1/3
    let exact = [(0.0, 1.0 / 3.0, 1.0 / 3.0), (1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0), (2.0 / 3.0, 1.0, 1.0 / 3.0)];
    let oracle = lines::max_window_sum(&exact, 1e-4);
    let r = check_h3_expansion(&named("ternary"), &[1e-4, 1e-2], 4, 0).unwrap();
    assert!((r.window_sum - oracle).abs() < 1e-12, "{r:?}");
    assert!((r.lambda - 1.5).abs() < 1e-10);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn doubling_fails_expansion() {
    let r = check_h3_expansion(&named("doubling"), &[1e-4, 1e-3, 1e-2], 4, 0).unwrap();
    assert!((r.window_sum - 1.0).abs() < 1e-12);
    assert_eq!(r.verdict, Verdict::Violated);
}

#[test]
fn liverani_window_sums() {
    // oracle: row norms max(2√x/7, 1/49 + 1/7) on a dense grid; a generic
    // window meets two intervals
    let sup = (0..=100_000)
        .map(|i| {
            let x = i as f64 / 100_000.0;
            (2.0 * x.sqrt() / 7.0).max(1.0 / 49.0 + 1.0 / 7.0)
        })
        .fold(0.0, f64::max);
    // near the crossing of x = (k/7)² with a curve, a horizontal window
    // meets three: two with sup 2k/49 and the next with sup 2(k+1)/49
    let crossing = (1..=6)
        .map(|k| (4 * k + 2 * (k + 1)) as f64 / 49.0)
        .fold(0.0, f64::max);
    assert!((crossing - 38.0 / 49.0).abs() < 1e-15);
    let r = check_h3_expansion(&liverani(), &[1e-4, 1e-3], 64, 0).unwrap();
    assert!(r.window_sum >= 2.0 * sup - 1e-9, "{r:?}");
    assert!(r.window_sum <= crossing + 1e-9, "{r:?}");
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn nu0_values() {
    assert!((estimate_nu0(&named("ternary"), 1000, 0) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(estimate_nu0(&named("identity"), 1000, 0), 1.0);
    let nu = estimate_nu0(&liverani(), 1 << 16, 0);
    assert!((nu - 2.0 / 7.0).abs() < 0.01 && nu <= 2.0 / 7.0, "{nu}");
}

#[test]
fn affine_collar_integrals_vanish() {
    let r = check_h4_boundary_integral(&named("ternary"), &[0.1, 0.01], 2, 0).unwrap();
    assert_eq!(r.values, vec![0.0, 0.0]);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn sqrt_collar_integral_matches_exact() {
    // 1/(a√x) over the ε-neighbourhood of {0, (k/a)², 1}, integrated exactly
    let a = 7.0f64;
    let exact = |eps: f64| {
        let mut marks = vec![0.0];
        marks.extend((1..7).map(|k| (k as f64 / a).powi(2)));
        marks.push(1.0);
        let mut spans: Vec<(f64, f64)> = marks
            .iter()
            .map(|&m| ((m - eps).max(0.0), (m + eps).min(1.0)))
            .collect();
        spans.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for s in spans {
            match merged.last_mut() {
                Some(last) if s.0 <= last.1 => last.1 = last.1.max(s.1),
                _ => merged.push(s),
            }
        }
        merged.iter().map(|&(lo, hi)| 2.0 * (hi.sqrt() - lo.sqrt()) / a).sum::<f64>()
    };
    let eps = [0.01, 0.003, 0.001];
    let r = check_h4_boundary_integral(&named("sqrt1d"), &eps, 1, 0).unwrap();
    for (v, &e) in r.values.iter().zip(&eps) {
        assert!((v - exact(e)).abs() < 5e-3 * exact(e), "ε={e}: {v} vs {}", exact(e));
    }
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn liverani_collar_integrals_decrease() {
    let eps = [0.05, 0.01, 0.002];
    let r = check_h4_boundary_integral(&liverani(), &eps, 8, 1).unwrap();
    // lines lying entirely inside a collar keep the first values level
    assert!(r.values.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.values);
    assert!(r.values[2] < 0.5 * r.values[0]);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn liverani_products_are_bounded() {
    let r = check_h5_integrability(&liverani(), 1 << 14, 0).unwrap();
    // oracle: the products are constant in x
    let a = 7.0;
    let expect = [1.0, 0.0, 0.0, 0.0, 1.0 / a, 0.0, 1.0 / a, 1.0];
    for (p, e) in r.products.iter().zip(expect) {
        assert!((p.mean - e).abs() < 1e-12, "{p:?}");
    }
    assert!((r.estimate - 1.0).abs() < 1e-12);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn non_integrable_product_is_flagged() {
    let map = PiecewiseMap::from_dynamics(
        "log-shear",
        LogShear {
            pieces: vec![unit_square_piece(0, 0.0, 1.0)],
        },
    );
    let r = check_h5_integrability(&map, 1 << 18, 0).unwrap();
    assert_eq!(r.verdict, Verdict::Violated, "{:?}", r.products);
    let worst = r.products.iter().find(|p| p.index == [0, 1, 1]).unwrap();
    assert!(worst.drift >= 0.01);
}

#[test]
fn orbit_checks() {
    assert_eq!(check_h0(&named("ternary"), 10, 5000, 0).verdict, Verdict::Consistent);
    let id = check_h0(&named("identity"), 10, 5000, 0);
    assert_eq!((id.hits, id.verdict), (0, Verdict::Consistent));
    let map = PiecewiseMap::from_dynamics(
        "collapse",
        Collapse {
            pieces: vec![unit_square_piece(0, 0.0, 0.5), unit_square_piece(1, 0.5, 1.0)],
        },
    );
    let r = check_h0(&map, 5, 5000, 0);
    assert!(r.hits > 2000, "{r:?}");
    assert_eq!(r.verdict, Verdict::Violated);
}

#[test]
fn structural_checks_pass_on_builtins() {
    for map in [named("ternary"), named("sqrt1d"), liverani()] {
        let (h1, h2) = check_structure(&map, 2000, 0);
        assert_eq!(h1.verdict, Verdict::VerifiedStructurally, "{}: {}", map.name(), h1.evidence);
        assert_eq!(h2.verdict, Verdict::VerifiedStructurally, "{}: {}", map.name(), h2.evidence);
    }
}

#[test]
fn ternary_collar_is_linear() {
    let eps = [1e-3, 4e-3, 1.6e-2];
    let r = check_h6_scaling(&named("ternary"), &eps, 1 << 16, 0).unwrap();
    // oracle: the ε-neighbourhood of {0, 1/3, 2/3, 1} has measure 6ε
    for &(e, m) in &r.collar {
        assert!((m - 6.0 * e).abs() < 4.0 * (6.0 * e / 65536.0).sqrt(), "{e}: {m}");
    }
    assert!((r.alpha_fitted - 1.0).abs() < 0.02);
    assert_eq!((r.a, r.a_fitted), (1.0, None));
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn liverani_scaling_exponents() {
    let r = check_h6_scaling(&liverani(), &[1e-3, 2e-3, 4e-3, 8e-3], 1 << 18, 0).unwrap();
    assert!((r.alpha_fitted - 1.0).abs() < 0.1, "{r:?}");
    assert!((r.a - 1.5).abs() < 0.15, "{:?}", r.envelope);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn accumulating_strips_have_sublinear_collar() {
    let r = check_h6_scaling(&accumulating_strips(), &[1e-3, 2e-3, 4e-3, 8e-3], 1 << 17, 0).unwrap();
    assert!(r.alpha_fitted < 0.97, "{r:?}");
    assert!(r.alpha_fitted > 0.5);
}

#[test]
fn ternary_report() {
    let opts = HypothesisOptions {
        samples: 1 << 14,
        lines: 2,
        ..Default::default()
    };
    let r = check_all(&named("ternary"), &opts).unwrap();
    assert_eq!(r.verdicts.len(), 7);
    assert!((r.lambda.unwrap() - 1.5).abs() < 1e-10);
    assert!((r.nu0 - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.a, Some(1.0));
    let nu = r.nu_default.unwrap();
    assert!((nu - 2.0 / 3.0).abs() < 1e-12);
    let back = HypothesisReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert!(r.to_json().contains("\"verified-structurally\""));
}

#[test]
fn identity_has_no_default_nu() {
    let opts = HypothesisOptions {
        samples: 1 << 12,
        lines: 2,
        ..Default::default()
    };
    let r = check_all(&named("identity"), &opts).unwrap();
    assert_eq!(r.nu0, 1.0);
    assert_eq!(r.nu_default, None);
    assert_eq!(r.verdict(3), Verdict::Violated);
    assert_eq!(r.lambda, None);
}
