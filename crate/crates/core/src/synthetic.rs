//! Deterministic synthetic scenes for tests and demos.

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::rng_from_seed;
use crate::tensor::HsiCube;

const ENDMEMBERS: usize = 4;
const PATCHES_PER_MATERIAL: usize = 2;

fn smooth_spectrum(p: usize, rng: &mut impl Rng) -> Vec<f64> {
    let centers: [f64; 2] = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
    let widths: [f64; 2] = [rng.random_range(0.15..0.4), rng.random_range(0.15..0.4)];
    let base = rng.random_range(0.1..0.3);
    (0..p)
        .map(|k| {
            let t = if p > 1 { k as f64 / (p - 1) as f64 } else { 0.5 };
            base + centers
                .iter()
                .zip(&widths)
                .map(|(c, w)| 0.5 * (-(t - c).powi(2) / (2.0 * w * w)).exp())
                .sum::<f64>()
        })
        .collect()
}

fn interval(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    let len = rng.random_range(n / 4..=n / 2).max(1);
    let start = rng.random_range(0..=n - len);
    (start, start + len)
}

/// A piecewise-constant mixture of a few materials: each material covers a
/// background level plus two axis-aligned rectangles and carries a smooth
/// spectrum. The result is exactly low-rank along the band mode and close
/// to low-rank spatially. Values lie in `[0.05, 0.95]`.
pub fn low_rank_scene(dims: [usize; 3], seed: u64) -> Result<HsiCube> {
    let [h, w, p] = dims;
    if h < 4 || w < 4 || p == 0 {
        return Err(Error::arg(format!("synthetic scenes need h, w >= 4 and p >= 1, got {dims:?}")));
    }
    let mut rng = rng_from_seed(seed);
    let spectra: Vec<Vec<f64>> = (0..ENDMEMBERS).map(|_| smooth_spectrum(p, &mut rng)).collect();
    let mut abundance = vec![vec![0.0; h * w]; ENDMEMBERS];
    for (e, map) in abundance.iter_mut().enumerate() {
        let background = if e == 0 { 1.0 } else { 0.0 };
        map.iter_mut().for_each(|v| *v = background);
        for _ in 0..PATCHES_PER_MATERIAL {
            let (i0, i1) = interval(h, &mut rng);
            let (j0, j1) = interval(w, &mut rng);
            let level = rng.random_range(0.5..1.0);
            for j in j0..j1 {
                for i in i0..i1 {
                    map[i + h * j] += level;
                }
            }
        }
    }
    let mut cube = HsiCube::from_fn(dims, |i, j, k| {
        (0..ENDMEMBERS).map(|e| abundance[e][i + h * j] * spectra[e][k]).sum()
    })?;
    let lo = cube.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cube.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    cube.as_mut_slice().iter_mut().for_each(|v| *v = 0.05 + 0.9 * (*v - lo) / span);
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = low_rank_scene([16, 12, 5], 3).unwrap();
        let b = low_rank_scene([16, 12, 5], 3).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|&v| (0.05 - 1e-12..=0.95 + 1e-12).contains(&v)));
        assert_ne!(a, low_rank_scene([16, 12, 5], 4).unwrap());
        assert!(low_rank_scene([2, 12, 5], 1).is_err());
    }
}
