//! Thin 2D FFT layer over rustfft with plan caching.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use once_cell_like::PlanCache;

mod once_cell_like {
    use super::*;

    pub struct PlanCache {
        plans: Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>,
    }

    impl PlanCache {
        pub fn new() -> Self {
            Self { plans: Mutex::new(HashMap::new()) }
        }

        pub fn plan(&self, n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
            let mut guard = self.plans.lock().unwrap();
            guard
                .entry((n, forward))
                .or_insert_with(|| {
                    let dir = if forward { FftDirection::Forward } else { FftDirection::Inverse };
                    FftPlanner::new().plan_fft(n, dir)
                })
                .clone()
        }
    }
}

fn cache() -> &'static PlanCache {
    use std::sync::OnceLock;
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(PlanCache::new)
}

/// In-place 2D FFT of an n*n row-major buffer. Unnormalized (plain sums),
/// matching rustfft's convention; callers apply the 1/n^2 factor.
pub fn fft2_inplace(data: &mut [Complex64], n: usize, forward: bool) {
    assert_eq!(data.len(), n * n);
    let plan = cache().plan(n, forward);
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];

    // rows
    for row in data.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    // columns, via transpose-process-transpose
    let mut col = vec![Complex64::default(); n];
    for ix in 0..n {
        for iy in 0..n {
            col[iy] = data[iy * n + ix];
        }
        plan.process_with_scratch(&mut col, &mut scratch);
        for iy in 0..n {
            data[iy * n + ix] = col[iy];
        }
    }
}
