//! Multi-dimensional FFT of real lattice data.
//!
//! The last axis uses a real-to-complex transform and keeps `M/2 + 1`
//! modes; the remaining axes are complex transforms over that half
//! spectrum. Callers see the full Hermitian spectrum in row-major order.
//!
//! Plans are built once per length and shared through a process-wide
//! synchronized cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

fn plans(len: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(len)
        .or_insert_with(|| {
            let mut complex = FftPlanner::new();
            let mut real = RealFftPlanner::new();
            Arc::new(Plans {
                forward: complex.plan_fft_forward(len),
                inverse: complex.plan_fft_inverse(len),
                r2c: real.plan_fft_forward(len),
                c2r: real.plan_fft_inverse(len),
            })
        })
        .clone()
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const TILE: usize = 16;

/// `dst[c * rows + r] = src[r * cols + c]`, walked in square tiles so both
/// sides stay in cache for power-of-two strides.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r0 in (0..rows).step_by(TILE) {
        let r1 = (r0 + TILE).min(rows);
        for c0 in (0..cols).step_by(TILE) {
            let c1 = (c0 + TILE).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Transforms every axis but the innermost. The array has `dim - 1` leading
/// axes of length `m` followed by an innermost axis of length `inner`.
fn leading_axes(data: &mut [Complex64], m: usize, dim: usize, inner: usize, fft: &dyn Fft<f64>) {
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    let mut block = Vec::new();
    let total = data.len();
    for axis in (0..dim - 1).rev() {
        let stride = inner * m.pow((dim - 2 - axis) as u32);
        let outer = total / (stride * m);
        block.resize(stride * m, ZERO);
        for b in 0..outer {
            let plane = &mut data[b * stride * m..(b + 1) * stride * m];
            transpose(plane, &mut block, m, stride);
            fft.process_with_scratch(&mut block, &mut scratch);
            transpose(&block, plane, stride, m);
        }
    }
}

/// Index of the line holding `-k` for the line at `line` (all axes but the
/// last negated).
fn negated_line(line: usize, m: usize, dim: usize) -> usize {
    let neg = |i: usize| (m - i) % m;
    match dim {
        2 => neg(line),
        _ => neg(line / m) * m + neg(line % m),
    }
}

/// Unnormalized forward transform `Σ_x f(x) e^{-ik·x}` of real samples.
pub(crate) fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let m = grid.points();
    let h = m / 2 + 1;
    let lines = grid.len() / m;
    let p = plans(m);
    let mut half = vec![ZERO; lines * h];
    let mut line = vec![0.0; m];
    let mut scratch = vec![ZERO; p.r2c.get_scratch_len()];
    for l in 0..lines {
        line.copy_from_slice(&values[l * m..(l + 1) * m]);
        p.r2c
            .process_with_scratch(&mut line, &mut half[l * h..(l + 1) * h], &mut scratch)
            .expect("buffer lengths match the plan");
    }
    leading_axes(&mut half, m, grid.dim(), h, p.forward.as_ref());

    let mut full = vec![ZERO; grid.len()];
    for l in 0..lines {
        let nl = negated_line(l, m, grid.dim());
        let row = &mut full[l * m..(l + 1) * m];
        row[..h].copy_from_slice(&half[l * h..(l + 1) * h]);
        for j in h..m {
            row[j] = half[nl * h + (m - j)].conj();
        }
    }
    full
}

/// Unnormalized inverse transform `Σ_k c(k) e^{ik·x}` of a Hermitian
/// spectrum. Only the `k_last ≥ 0` half is read, so a non-Hermitian input
/// yields the transform of its Hermitian part along that axis.
pub(crate) fn inverse_real(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    let m = grid.points();
    let h = m / 2 + 1;
    let lines = grid.len() / m;
    let p = plans(m);
    let mut half = vec![ZERO; lines * h];
    for l in 0..lines {
        half[l * h..(l + 1) * h].copy_from_slice(&coeffs[l * m..l * m + h]);
    }
    leading_axes(&mut half, m, grid.dim(), h, p.inverse.as_ref());

    let mut out = vec![0.0; grid.len()];
    let mut scratch = vec![ZERO; p.c2r.get_scratch_len()];
    for l in 0..lines {
        let src = &mut half[l * h..(l + 1) * h];
        src[0].im = 0.0;
        src[h - 1].im = 0.0;
        p.c2r
            .process_with_scratch(src, &mut out[l * m..(l + 1) * m], &mut scratch)
            .expect("buffer lengths match the plan");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Direct O(n²) DFT used as the oracle.
    fn naive(grid: &Grid, input: &[Complex64], sign: f64) -> Vec<Complex64> {
        let m = grid.points() as f64;
        (0..grid.len())
            .map(|kf| {
                let kk = grid.unflatten(kf);
                let mut acc = ZERO;
                for (xf, v) in input.iter().enumerate() {
                    let xx = grid.unflatten(xf);
                    let phase: f64 = (0..grid.dim())
                        .map(|a| (kk[a] * xx[a]) as f64)
                        .sum::<f64>()
                        * sign
                        * 2.0
                        * PI
                        / m;
                    acc += v * Complex64::from_polar(1.0, phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft_2d_and_3d() {
        for grid in [Grid::new(2, 1.0, 8).unwrap(), Grid::new(3, 1.0, 4).unwrap()] {
            let input: Vec<f64> = (0..grid.len()).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
            let fast = forward_real(&grid, &input);
            let as_complex: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let slow = naive(&grid, &as_complex, -1.0);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10, "{a} vs {b}");
            }
            let back = inverse_real(&grid, &fast);
            let n = grid.len() as f64;
            for (a, b) in back.iter().zip(&input) {
                assert!((a / n - b).abs() < 1e-13);
            }
            let slow_back = naive(&grid, &slow, 1.0);
            for (a, b) in back.iter().zip(&slow_back) {
                assert!((a - b.re).abs() < 1e-10);
            }
        }
    }
}
