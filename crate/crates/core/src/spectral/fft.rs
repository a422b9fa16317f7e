//! Axis-by-axis complex FFT on isotropic periodic grids.
//!
//! Coefficients are normalized so that `f(x) = sum_k c_k exp(i 2 pi k.x / L)`,
//! i.e. the forward pass divides by `M^N`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(m: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((m, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(m)
            } else {
                planner.plan_fft_forward(m)
            }
        })
        .clone()
}

fn transform(data: &mut [Complex64], dim: usize, m: usize, inverse: bool) {
    let total = m.pow(dim as u32);
    debug_assert_eq!(data.len(), total);
    let fft = plan(m, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);
    if dim == 1 {
        return;
    }
    let mut lines = vec![Complex64::new(0.0, 0.0); total];
    for axis in 0..dim - 1 {
        let stride = m.pow((dim - 1 - axis) as u32);
        let block = stride * m;
        // gather every line along `axis` into contiguous storage
        let mut line = 0;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let dst = &mut lines[line * m..(line + 1) * m];
                for (j, slot) in dst.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                line += 1;
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        let mut line = 0;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let src = &lines[line * m..(line + 1) * m];
                for (j, v) in src.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
                line += 1;
            }
        }
    }
}

/// In-place forward transform of one scalar component, normalized by `M^N`.
pub fn forward(data: &mut [Complex64], dim: usize, m: usize) {
    transform(data, dim, m, false);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// In-place inverse transform (no normalization; pairs with [`forward`]).
pub fn inverse(data: &mut [Complex64], dim: usize, m: usize) {
    transform(data, dim, m, true);
}
