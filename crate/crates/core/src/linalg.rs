//! Small numeric helpers shared by the simulation modules: complex matrix
//! products routed through real `f64` GEMM kernels, and order-insensitive
//! summation for Monte-Carlo accumulators.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

/// Complex matrix product `a · b`.
///
/// Split into four real GEMMs so the optimized f64 kernels are used; the
/// generic complex fallback is an order of magnitude slower at the matrix
/// shapes the Monte-Carlo loop produces.
pub fn cmatmul(a: &ArrayView2<Complex64>, b: &ArrayView2<Complex64>) -> Array2<Complex64> {
    let ar = a.mapv(|z| z.re);
    let ai = a.mapv(|z| z.im);
    let br = b.mapv(|z| z.re);
    let bi = b.mapv(|z| z.im);

    let mut re = ar.dot(&br);
    re.scaled_add(-1.0, &ai.dot(&bi));
    let mut im = ar.dot(&bi);
    im.scaled_add(1.0, &ai.dot(&br));

    let mut out = Array2::<Complex64>::zeros(re.raw_dim());
    ndarray::azip!((o in &mut out, &r in &re, &i in &im) *o = Complex64::new(r, i));
    out
}

/// Pairwise (cascade) summation; the reduction tree depends only on the slice
/// length, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and standard error of the mean over `values`.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}
