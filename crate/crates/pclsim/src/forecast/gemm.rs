//! Row-major strided GEMM over the system BLAS (default) or a pure-Rust
//! fallback (`--no-default-features --features pure-rust-gemm`).
//!
//! Leading dimensions are explicit so sequence buffers laid out as
//! `[rows × (time · batch)]` can expose per-timestep column blocks without
//! copying. BLAS threading is forced to one thread: parallelism lives at the
//! per-series level, and nested pools would destroy both throughput and
//! determinism.

#[cfg(all(feature = "openblas", feature = "pure-rust-gemm"))]
compile_error!("features `openblas` and `pure-rust-gemm` are mutually exclusive");

#[cfg(not(any(feature = "openblas", feature = "pure-rust-gemm")))]
compile_error!("select a GEMM backend: feature `openblas` (default) or `pure-rust-gemm`");

#[cfg(feature = "openblas")]
mod backend {
    use std::sync::Once;

    const ROW_MAJOR: i32 = 101;
    const NO_TRANS: i32 = 111;
    const TRANS: i32 = 112;

    extern "C" {
        fn cblas_sgemm(
            layout: i32, trans_a: i32, trans_b: i32, m: i32, n: i32, k: i32, alpha: f32,
            a: *const f32, lda: i32, b: *const f32, ldb: i32, beta: f32, c: *mut f32, ldc: i32,
        );
        fn cblas_dgemm(
            layout: i32, trans_a: i32, trans_b: i32, m: i32, n: i32, k: i32, alpha: f64,
            a: *const f64, lda: i32, b: *const f64, ldb: i32, beta: f64, c: *mut f64, ldc: i32,
        );
        fn openblas_set_num_threads(n: i32);
    }

    fn init() {
        static ONCE: Once = Once::new();
        ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
    }

    #[allow(clippy::too_many_arguments)]
    pub fn sgemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f32, a: &[f32],
        lda: usize, b: &[f32], ldb: usize, beta: f32, c: &mut [f32], ldc: usize,
    ) {
        init();
        let ta = if trans_a { TRANS } else { NO_TRANS };
        let tb = if trans_b { TRANS } else { NO_TRANS };
        unsafe {
            cblas_sgemm(
                ROW_MAJOR, ta, tb, m as i32, n as i32, k as i32, alpha, a.as_ptr(), lda as i32,
                b.as_ptr(), ldb as i32, beta, c.as_mut_ptr(), ldc as i32,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn dgemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f64, a: &[f64],
        lda: usize, b: &[f64], ldb: usize, beta: f64, c: &mut [f64], ldc: usize,
    ) {
        init();
        let ta = if trans_a { TRANS } else { NO_TRANS };
        let tb = if trans_b { TRANS } else { NO_TRANS };
        unsafe {
            cblas_dgemm(
                ROW_MAJOR, ta, tb, m as i32, n as i32, k as i32, alpha, a.as_ptr(), lda as i32,
                b.as_ptr(), ldb as i32, beta, c.as_mut_ptr(), ldc as i32,
            );
        }
    }
}

#[cfg(feature = "pure-rust-gemm")]
mod backend {
    /// (row, col) strides of a logical matrix stored row-major with leading
    /// dimension `ld`, optionally transposed.
    fn strides(trans: bool, ld: usize) -> (isize, isize) {
        if trans {
            (1, ld as isize)
        } else {
            (ld as isize, 1)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn sgemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f32, a: &[f32],
        lda: usize, b: &[f32], ldb: usize, beta: f32, c: &mut [f32], ldc: usize,
    ) {
        let (rsa, csa) = strides(trans_a, lda);
        let (rsb, csb) = strides(trans_b, ldb);
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta,
                c.as_mut_ptr(), ldc as isize, 1,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn dgemm(
        trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f64, a: &[f64],
        lda: usize, b: &[f64], ldb: usize, beta: f64, c: &mut [f64], ldc: usize,
    ) {
        let (rsa, csa) = strides(trans_a, lda);
        let (rsb, csb) = strides(trans_b, ldb);
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta,
                c.as_mut_ptr(), ldc as isize, 1,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_dims(
    trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, a: usize, lda: usize, b: usize,
    ldb: usize, c: usize, ldc: usize,
) {
    let (ar, ac) = if trans_a { (k, m) } else { (m, k) };
    let (br, bc) = if trans_b { (n, k) } else { (k, n) };
    assert!(lda >= ac.max(1) && ldb >= bc.max(1) && ldc >= n.max(1), "leading dims too small");
    assert!(a >= (ar.saturating_sub(1)) * lda + ac, "matrix A too short");
    assert!(b >= (br.saturating_sub(1)) * ldb + bc, "matrix B too short");
    assert!(c >= (m.saturating_sub(1)) * ldc + n, "matrix C too short");
}

/// `C = alpha * op(A) * op(B) + beta * C` for f32, row-major, strided.
///
/// `op(X)` transposes when the flag is set; slices hold the stored
/// (pre-transpose) matrices with the given leading dimension.
#[allow(clippy::too_many_arguments)]
pub fn sgemm(
    trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f32, a: &[f32], lda: usize,
    b: &[f32], ldb: usize, beta: f32, c: &mut [f32], ldc: usize,
) {
    check_dims(trans_a, trans_b, m, n, k, a.len(), lda, b.len(), ldb, c.len(), ldc);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    backend::sgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

/// `C = alpha * op(A) * op(B) + beta * C` for f64, row-major, strided.
#[allow(clippy::too_many_arguments)]
pub fn dgemm(
    trans_a: bool, trans_b: bool, m: usize, n: usize, k: usize, alpha: f64, a: &[f64], lda: usize,
    b: &[f64], ldb: usize, beta: f64, c: &mut [f64], ldc: usize,
) {
    check_dims(trans_a, trans_b, m, n, k, a.len(), lda, b.len(), ldb, c.len(), ldc);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    backend::dgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
