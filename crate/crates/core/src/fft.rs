//! Separable 3D FFT over the crate's x-fastest layout.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::volume::line_starts;

/// Planned forward and inverse transforms for one set of extents.
/// The inverse is normalised by `1 / (n1 n2 n3)`.
pub struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| planner.plan_fft_forward(n));
        let inverse = dims.map(|n| planner.plan_fft_inverse(n));
        Self { dims, forward, inverse }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// Forward transform of a real array.
    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [n1, n2, _] = self.dims;
        assert_eq!(data.len(), self.dims.iter().product::<usize>());
        let max_scratch = plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        let mut scratch = vec![Complex64::default(); max_scratch];

        // x lines are contiguous, rustfft processes consecutive chunks in one call.
        let s0 = plans[0].get_inplace_scratch_len();
        plans[0].process_with_scratch(data, &mut scratch[..s0]);

        for (axis, plan) in plans.iter().enumerate().skip(1) {
            let n = self.dims[axis];
            let stride = if axis == 1 { n1 } else { n1 * n2 };
            let s = plan.get_inplace_scratch_len();
            let mut line = vec![Complex64::default(); n];
            for start in line_starts(self.dims, axis) {
                for (p, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + p * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch[..s]);
                for (p, v) in line.iter().enumerate() {
                    data[start + p * stride] = *v;
                }
            }
        }
    }
}
