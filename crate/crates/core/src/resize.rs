//! Separable bilinear resampling with corner-aligned sampling, plus its adjoint.
//!
//! Output index `i` of an axis of length `n_out` samples the input at
//! `i * (n_in - 1) / (n_out - 1)`, so the first and last samples of both
//! grids coincide. A length-1 output samples the input center.

use ndarray::Array2;

use crate::map::DenseMap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tap {
    lo: usize,
    hi: usize,
    w_lo: f64,
    w_hi: f64,
}

fn axis_taps(n_in: usize, n_out: usize) -> Vec<Tap> {
    (0..n_out)
        .map(|i| {
            let src = if n_out == 1 {
                (n_in - 1) as f64 / 2.0
            } else {
                i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
            };
            let lo = (src.floor() as usize).min(n_in - 1);
            let hi = (lo + 1).min(n_in - 1);
            let frac = src - lo as f64;
            Tap {
                lo,
                hi,
                w_lo: 1.0 - frac,
                w_hi: frac,
            }
        })
        .collect()
}

/// A precomputed linear map from `input` to `output` grid sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampler {
    input: (usize, usize),
    output: (usize, usize),
    rows: Vec<Tap>,
    cols: Vec<Tap>,
}

impl Resampler {
    /// Panics if any dimension is zero.
    pub fn new(input: (usize, usize), output: (usize, usize)) -> Self {
        assert!(
            input.0 > 0 && input.1 > 0 && output.0 > 0 && output.1 > 0,
            "resampling dimensions must be positive"
        );
        Self {
            input,
            output,
            rows: axis_taps(input.0, output.0),
            cols: axis_taps(input.1, output.1),
        }
    }

    pub fn input(&self) -> (usize, usize) {
        self.input
    }

    pub fn output(&self) -> (usize, usize) {
        self.output
    }

    pub fn is_identity(&self) -> bool {
        self.input == self.output
    }

    pub fn apply(&self, src: &Array2<f64>) -> Array2<f64> {
        assert_eq!(src.dim(), self.input, "resampler input size");
        if self.is_identity() {
            return src.clone();
        }
        let (in_h, _) = self.input;
        let (out_h, out_w) = self.output;
        let mut tmp = Array2::<f64>::zeros((in_h, out_w));
        for r in 0..in_h {
            for (c, t) in self.cols.iter().enumerate() {
                tmp[[r, c]] = t.w_lo * src[[r, t.lo]] + t.w_hi * src[[r, t.hi]];
            }
        }
        let mut out = Array2::<f64>::zeros((out_h, out_w));
        for (r, t) in self.rows.iter().enumerate() {
            for c in 0..out_w {
                out[[r, c]] = t.w_lo * tmp[[t.lo, c]] + t.w_hi * tmp[[t.hi, c]];
            }
        }
        out
    }

    /// Transpose of [`Resampler::apply`]: distributes output-grid values back
    /// onto the input grid with the same interpolation weights.
    pub fn adjoint(&self, grad: &Array2<f64>) -> Array2<f64> {
        assert_eq!(grad.dim(), self.output, "resampler output size");
        if self.is_identity() {
            return grad.clone();
        }
        let (in_h, in_w) = self.input;
        let (_, out_w) = self.output;
        let mut tmp = Array2::<f64>::zeros((in_h, out_w));
        for (r, t) in self.rows.iter().enumerate() {
            for c in 0..out_w {
                let g = grad[[r, c]];
                tmp[[t.lo, c]] += t.w_lo * g;
                tmp[[t.hi, c]] += t.w_hi * g;
            }
        }
        let mut out = Array2::<f64>::zeros((in_h, in_w));
        for r in 0..in_h {
            for (c, t) in self.cols.iter().enumerate() {
                let g = tmp[[r, c]];
                out[[r, t.lo]] += t.w_lo * g;
                out[[r, t.hi]] += t.w_hi * g;
            }
        }
        out
    }

    pub fn apply_map(&self, m: &DenseMap) -> DenseMap {
        DenseMap::new(self.apply(m.values())).expect("convex combinations of finite values are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_matches_dot_product_identity() {
        let r = Resampler::new((3, 5), (7, 4));
        let x = Array2::from_shape_fn((3, 5), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin());
        let y = Array2::from_shape_fn((7, 4), |(i, j)| ((i * 4 + j) as f64 * 0.91).cos());
        let lhs: f64 = (&r.apply(&x) * &y).sum();
        let rhs: f64 = (&x * &r.adjoint(&y)).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn corners_align() {
        let r = Resampler::new((2, 3), (5, 9));
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i * 3 + j) as f64);
        let y = r.apply(&x);
        assert_eq!(y[[0, 0]], x[[0, 0]]);
        assert_eq!(y[[4, 8]], x[[1, 2]]);
        assert_eq!(y[[0, 8]], x[[0, 2]]);
    }

    #[test]
    fn single_output_samples_center() {
        let r = Resampler::new((3, 3), (1, 1));
        let x = Array2::from_shape_fn((3, 3), |(i, j)| (i * 3 + j) as f64);
        assert_eq!(r.apply(&x)[[0, 0]], 4.0);
    }
}
