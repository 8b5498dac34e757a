//! Row-major dense kernels sized for small networks.

/// `out[n×m] = a[n×k] · w[k×m] + bias[m]`
pub(crate) fn affine(a: &[f64], n: usize, k: usize, w: &[f64], m: usize, bias: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(w.len(), k * m);
    let mut out = Vec::with_capacity(n * m);
    for row in a.chunks_exact(k) {
        let start = out.len();
        out.extend_from_slice(bias);
        let dst = &mut out[start..];
        for (x, wrow) in row.iter().zip(w.chunks_exact(m)) {
            if *x == 0.0 {
                continue;
            }
            for (d, wv) in dst.iter_mut().zip(wrow) {
                *d += x * wv;
            }
        }
    }
    out
}

/// `aᵀ[k×n] · d[n×m]`, accumulated into `out[k×m]`.
pub(crate) fn at_b(a: &[f64], n: usize, k: usize, d: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * m];
    for (arow, drow) in a.chunks_exact(k).zip(d.chunks_exact(m)).take(n) {
        for (x, orow) in arow.iter().zip(out.chunks_exact_mut(m)) {
            if *x == 0.0 {
                continue;
            }
            for (o, dv) in orow.iter_mut().zip(drow) {
                *o += x * dv;
            }
        }
    }
    out
}

/// `d[n×m] · wᵀ` where `w` is `k×m`, giving `n×k`.
pub(crate) fn a_bt(d: &[f64], n: usize, m: usize, w: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * k);
    for drow in d.chunks_exact(m).take(n) {
        for wrow in w.chunks_exact(m) {
            out.push(drow.iter().zip(wrow).map(|(a, b)| a * b).sum());
        }
    }
    out
}

/// Column sums of an `n×m` matrix.
pub(crate) fn col_sums(d: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for row in d.chunks_exact(m) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}
