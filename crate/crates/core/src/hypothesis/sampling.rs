use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 4096;

/// `count` uniform points of the open cube, flattened row-major. Chunks of
/// points draw from their own stream, so the result does not depend on the
/// thread count.
pub(crate) fn uniform_points(dim: usize, count: usize, seed: u64, salt: u64) -> Vec<f64> {
    (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            rng.set_stream(chunk as u64);
            let len = CHUNK.min(count - chunk * CHUNK) * dim;
            (0..len)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u == 0.0 {
                        f64::MIN_POSITIVE
                    } else {
                        u
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Ordinary least squares slope and intercept.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
