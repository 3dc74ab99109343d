//! Small dense matrix kernels backing the convolution lowering.
//!
//! All matrices are row-major slices. The loops are ordered so the innermost
//! pass runs over contiguous memory in both the source and destination, which
//! is what the auto-vectorizer needs; these three kernels carry essentially
//! the whole training cost.

use crate::scalar::Scalar;

/// `out = a · b` for `a: [m×k]`, `b: [k×n]`, `out: [m×n]`.
///
/// The reduction axis runs outermost so each `b` row is streamed exactly
/// once; with the small `m` of this workload the whole output stays cache
/// resident. Every output element still accumulates in ascending-`l` order,
/// so the result is bit-identical to the textbook loop nest.
pub fn matmul<E: Scalar>(a: &[E], b: &[E], m: usize, k: usize, n: usize, out: &mut [E]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(E::ZERO);
    for l in 0..k {
        let b_row = &b[l * n..(l + 1) * n];
        for i in 0..m {
            let a_il = a[i * k + l];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_il * bv;
            }
        }
    }
}

/// `out = aᵀ · b` for `a: [l×m]`, `b: [l×n]`, `out: [m×n]`.
///
/// `l` is a channel count here (small), while `m×n` is large; iterating
/// output rows outermost writes each exactly once and keeps the whole of `b`
/// cache resident.
pub fn matmul_at_b<E: Scalar>(a: &[E], b: &[E], l: usize, m: usize, n: usize, out: &mut [E]) {
    debug_assert_eq!(a.len(), l * m);
    debug_assert_eq!(b.len(), l * n);
    debug_assert_eq!(out.len(), m * n);
    for (i, out_row) in out.chunks_exact_mut(n).enumerate() {
        out_row.fill(E::ZERO);
        for li in 0..l {
            let a_li = a[li * m + i];
            let b_row = &b[li * n..(li + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_li * bv;
            }
        }
    }
}

/// `out += a · bᵀ` for `a: [m×k]`, `b: [n×k]`, `out: [m×n]`.
///
/// `k` is the long reduction axis (output pixels). The dot products run on
/// eight explicit accumulator lanes — a single scalar accumulator would
/// serialize the additions and defeat vectorization — and `k` is tiled so
/// one tile of `b` stays cache resident across all of `a`'s rows. The lane
/// and tile splits fix the summation order, so results stay deterministic.
pub fn matmul_acc_a_bt<E: Scalar>(a: &[E], b: &[E], m: usize, k: usize, n: usize, out: &mut [E]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    const LANES: usize = 8;
    const TILE: usize = 512;
    let mut k0 = 0;
    while k0 < k {
        let k1 = (k0 + TILE).min(k);
        for i in 0..m {
            let a_seg = &a[i * k + k0..i * k + k1];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_seg = &b[j * k + k0..j * k + k1];
                let mut lanes = [E::ZERO; LANES];
                let mut a_chunks = a_seg.chunks_exact(LANES);
                let mut b_chunks = b_seg.chunks_exact(LANES);
                for (av, bv) in (&mut a_chunks).zip(&mut b_chunks) {
                    for l in 0..LANES {
                        lanes[l] += av[l] * bv[l];
                    }
                }
                let mut acc = E::ZERO;
                for &lane in &lanes {
                    acc += lane;
                }
                for (&av, &bv) in a_chunks.remainder().iter().zip(b_chunks.remainder()) {
                    acc += av * bv;
                }
                *o += acc;
            }
        }
        k0 = k1;
    }
}
