//! Linear convolution of plain sequences.

use std::fmt;

use realfft::RealFftPlanner;

use crate::registry::Registry;

/// Computes the full linear convolution `c[m] = sum_i a[i] * b[m - i]`,
/// of length `a.len() + b.len() - 1`.
pub trait ConvolutionBackend: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn linear(&self, a: &[f64], b: &[f64]) -> Vec<f64>;
}

/// Zero-padded real FFT. Small products fall back to direct summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct SpectralBackend;

/// O(n*m) summation. Exact up to rounding, useful deep in tails where spectral
/// round-off dominates.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirectBackend;

pub static BACKENDS: Registry<&'static dyn ConvolutionBackend> = Registry::new(
    "convolution backend",
    &[("fft", &SpectralBackend), ("direct", &DirectBackend)],
);

const DIRECT_THRESHOLD: usize = 4096;

impl ConvolutionBackend for DirectBackend {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn linear(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        direct(a, b)
    }
}

impl ConvolutionBackend for SpectralBackend {
    fn name(&self) -> &'static str {
        "fft"
    }

    fn linear(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        if a.len().min(b.len()) <= 16 || a.len() * b.len() <= DIRECT_THRESHOLD {
            return direct(a, b);
        }
        let n = a.len() + b.len() - 1;
        let size = fast_size(n);
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);

        let spectrum = |x: &[f64]| {
            let mut input = forward.make_input_vec();
            input[..x.len()].copy_from_slice(x);
            let mut out = forward.make_output_vec();
            forward
                .process(&mut input, &mut out)
                .expect("buffer sizes come from the plan");
            out
        };
        let sa = spectrum(a);
        let mut sb = spectrum(b);
        for (y, x) in sb.iter_mut().zip(&sa) {
            *y *= x;
        }
        // imaginary parts of DC and Nyquist bins must be exactly zero for the inverse
        if let Some(first) = sb.first_mut() {
            first.im = 0.0;
        }
        if size.is_multiple_of(2) {
            if let Some(last) = sb.last_mut() {
                last.im = 0.0;
            }
        }
        let mut out = inverse.make_output_vec();
        inverse
            .process(&mut sb, &mut out)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / size as f64;
        out.truncate(n);
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Smallest even `2^p * 3^q >= n`.
fn fast_size(n: usize) -> usize {
    let mut best = n.next_power_of_two().max(2);
    let mut p3 = 1usize;
    while p3 < best {
        let mut m = p3;
        while m < n {
            m *= 2;
        }
        if m.is_multiple_of(2) && m < best {
            best = m;
        }
        p3 *= 3;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size(1), 2);
        assert_eq!(fast_size(5), 6);
        assert_eq!(fast_size(17), 18);
        assert_eq!(fast_size(100), 108);
        for n in 1..2000 {
            let s = fast_size(n);
            assert!(s >= n && s.is_multiple_of(2));
        }
    }

    #[test]
    fn spectral_matches_direct() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 7919) % 113) as f64 / 113.0).collect();
        let b: Vec<f64> = (0..517).map(|i| ((i * 104_729) % 97) as f64 / 97.0).collect();
        let d = DirectBackend.linear(&a, &b);
        let s = SpectralBackend.linear(&a, &b);
        assert_eq!(d.len(), 816);
        for (x, y) in d.iter().zip(&s) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn registry_lists_backends() {
        assert_eq!(BACKENDS.names().collect::<Vec<_>>(), ["fft", "direct"]);
        assert_eq!(BACKENDS.get("direct").unwrap().name(), "direct");
    }
}
