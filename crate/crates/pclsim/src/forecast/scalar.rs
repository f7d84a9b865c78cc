//! Scalar abstraction so the LSTM runs in f32 for production training and in
//! f64 when its analytic gradients are being audited against finite
//! differences (f32 rounding would drown the comparison).

use super::gemm;

/// Floating-point element type usable by the network math.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn is_finite(self) -> bool;

    /// Strided row-major `C = alpha * op(A) * op(B) + beta * C`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f64, a: &[Self],
        lda: usize, b: &[Self], ldb: usize, beta: f64, c: &mut [Self], ldc: usize,
    );
}

/// Polynomial `expf` (Cephes coefficients): ~2 ulp over the clamped range,
/// branch-light so gate loops vectorize, and — unlike libm — bit-identical
/// across platforms. Training calls this tens of millions of times per epoch;
/// libm's scalar `expf` was ~20% of total training time.
#[inline]
fn exp_poly_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    // ln(2) split into high/low parts for an exact-ish range reduction.
    const LN2_HI: f32 = 0.693_145_75;
    const LN2_LO: f32 = 1.428_606_8e-6;
    // Round-to-nearest via the 1.5·2²³ magic constant: `f32::round()` is a
    // libm call on baseline x86-64 and would dominate this function.
    const MAGIC: f32 = 12_582_912.0;
    let x = x.clamp(-87.0, 87.0);
    let n = (x * LOG2E + MAGIC) - MAGIC;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let y = ((((1.987_569_2e-4 * r + 1.398_2e-3) * r + 8.333_452e-3) * r + 4.166_579_6e-2) * r
        + 1.666_666_5e-1)
        * r
        + 0.5;
    let p = 1.0 + r + r * r * y;
    // 2^n by exponent-field construction; |n| ≤ 126 after the clamp.
    p * f32::from_bits((((n as i32) + 127) << 23) as u32)
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn exp(self) -> Self {
        exp_poly_f32(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        // tanh(x) = sign(x) · (1 − e^{−2|x|}) / (1 + e^{−2|x|})
        let t = exp_poly_f32(-2.0 * self.abs());
        let m = (1.0 - t) / (1.0 + t);
        if self < 0.0 {
            -m
        } else {
            m
        }
    }
    #[inline]
    fn sigmoid(self) -> Self {
        let t = exp_poly_f32(-self.abs());
        if self >= 0.0 {
            1.0 / (1.0 + t)
        } else {
            t / (1.0 + t)
        }
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    #[inline]
    fn gemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f64, a: &[Self],
        lda: usize, b: &[Self], ldb: usize, beta: f64, c: &mut [Self], ldc: usize,
    ) {
        gemm::sgemm(trans_a, trans_b, m, n, k, alpha as f32, a, lda, b, ldb, beta as f32, c, ldc);
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        // Stable two-branch form; f64 keeps full libm precision because it is
        // the reference arithmetic the finite-difference oracle audits.
        if self >= 0.0 {
            1.0 / (1.0 + (-self).exp())
        } else {
            let e = self.exp();
            e / (1.0 + e)
        }
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    #[inline]
    fn gemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f64, a: &[Self],
        lda: usize, b: &[Self], ldb: usize, beta: f64, c: &mut [Self], ldc: usize,
    ) {
        gemm::dgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_poly_matches_reference_to_f32_precision() {
        let mut x = -20.0f64;
        while x <= 20.0 {
            let got = (x as f32).exp() as f64; // trait impl: polynomial
            let want = x.exp();
            let rel = (got - want).abs() / want;
            assert!(rel < 1e-6, "exp({x}): {got} vs {want} rel {rel:.2e}");
            x += 0.0137;
        }
        assert_eq!(Scalar::exp(0.0f32), 1.0);
    }

    #[test]
    fn sigmoid_and_tanh_match_f64_reference() {
        let mut x = -15.0f64;
        while x <= 15.0 {
            let s32 = (x as f32).sigmoid() as f64;
            let s64 = x.sigmoid();
            assert!((s32 - s64).abs() < 5e-7, "sigmoid({x}): {s32} vs {s64}");
            let t32 = Scalar::tanh(x as f32) as f64;
            let t64 = Scalar::tanh(x);
            assert!((t32 - t64).abs() < 6e-7, "tanh({x}): {t32} vs {t64}");
            x += 0.0251;
        }
        // Symmetry and saturation.
        assert_eq!((0.0f32).sigmoid(), 0.5);
        assert!((50.0f32).sigmoid() == 1.0 && (-50.0f32).sigmoid() < 1e-21);
        assert_eq!(Scalar::tanh(0.0f32), 0.0);
    }
}
