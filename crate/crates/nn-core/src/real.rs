//! Scalar abstraction so the whole engine runs in f32 (training) or f64
//! (gradient checking) without duplicated kernels.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use ndarray::linalg::general_mat_mul;
use ndarray::ArrayView2;
use ndarray::ArrayViewMut2;

/// Floating-point element type of tensors and parameters.
pub trait Real:
    Copy
    + PartialOrd
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn maximum(self, other: Self) -> Self;
    fn is_finite(self) -> bool;

    fn sigmoid(self) -> Self {
        Self::ONE / (Self::ONE + (-self).exp())
    }

    /// `out += a · b` for row-major matrices: `a` is m×k, `b` is k×n, `out` is m×n.
    ///
    /// `trans_a`/`trans_b` interpret the slice as the transpose of a row-major
    /// k×m (resp. n×k) matrix, so no copies are needed for the backward passes.
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        trans_a: bool,
        b: &[Self],
        trans_b: bool,
        out: &mut [Self],
    );
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;

            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn tanh(self) -> Self {
                self.tanh()
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn abs(self) -> Self {
                self.abs()
            }
            fn maximum(self, other: Self) -> Self {
                if self > other {
                    self
                } else {
                    other
                }
            }
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }

            fn gemm_acc(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                trans_a: bool,
                b: &[Self],
                trans_b: bool,
                out: &mut [Self],
            ) {
                let av = if trans_a {
                    ArrayView2::from_shape((k, m), a).unwrap().reversed_axes()
                } else {
                    ArrayView2::from_shape((m, k), a).unwrap()
                };
                let bv = if trans_b {
                    ArrayView2::from_shape((n, k), b).unwrap().reversed_axes()
                } else {
                    ArrayView2::from_shape((k, n), b).unwrap()
                };
                let ov = ArrayViewMut2::from_shape((m, n), out).unwrap();
                let mut ov = ov;
                general_mat_mul(1.0, &av, &bv, 1.0, &mut ov);
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_hand_product() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut out = [0.0f64; 4];
        f64::gemm_acc(2, 2, 2, &a, false, &b, false, &mut out);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn gemm_transposed_operands() {
        // aT stored as 2x2 row-major [[1,3],[2,4]] -> a = [[1,2],[3,4]]
        let a_t = [1.0f64, 3.0, 2.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut out = [0.0f64; 4];
        f64::gemm_acc(2, 2, 2, &a_t, true, &b, false, &mut out);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);

        // bT stored as 2x2 row-major [[5,7],[6,8]] -> b = [[5,6],[7,8]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b_t = [5.0f64, 7.0, 6.0, 8.0];
        let mut out2 = [0.0f64; 4];
        f64::gemm_acc(2, 2, 2, &a, false, &b_t, true, &mut out2);
        assert_eq!(out2, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn gemm_accumulates_into_out() {
        let a = [1.0f32, 0.0, 0.0, 1.0];
        let b = [1.0f32, 2.0, 3.0, 4.0];
        let mut out = [10.0f32; 4];
        f32::gemm_acc(2, 2, 2, &a, false, &b, false, &mut out);
        assert_eq!(out, [11.0, 12.0, 13.0, 14.0]);
    }
}
