//! Dense tensors stored with axis 0 varying fastest.

/// Applies `mat` (`out_len` rows by `shape[axis]` columns, row-major) along
/// `axis`, returning the transformed tensor. The summation order per output
/// entry is fixed, so results are deterministic.
pub(crate) fn apply_along_axis(
    input: &[f64],
    shape: &[usize],
    axis: usize,
    mat: &[f64],
    out_len: usize,
) -> Vec<f64> {
    let in_len = shape[axis];
    debug_assert_eq!(mat.len(), in_len * out_len);
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; inner * out_len * outer];
    for o in 0..outer {
        let in_base = o * in_len * inner;
        let out_base = o * out_len * inner;
        for j in 0..out_len {
            let row = &mat[j * in_len..(j + 1) * in_len];
            let dst = &mut out[out_base + j * inner..out_base + (j + 1) * inner];
            for (i, &m) in row.iter().enumerate() {
                let src = &input[in_base + i * inner..in_base + (i + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    out
}

/// Writes the outer product of `vecs` into `out` (axis 0 fastest).
pub(crate) fn outer_product(vecs: &[&[f64]], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    for v in vecs {
        let len = out.len();
        out.resize(len * v.len(), 0.0);
        // fill back to front so the prefix can be read in place
        for k in (0..v.len()).rev() {
            let w = v[k];
            for j in (0..len).rev() {
                out[j + len * k] = out[j] * w;
            }
        }
    }
}

/// Computes `sum_k a[k] * prod_i vecs[i][k_i]`.
pub(crate) fn contract(a: &[f64], vecs: &[&[f64]], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(a);
    let mut len = a.len();
    for v in vecs {
        let n = v.len();
        let rest = len / n;
        for r in 0..rest {
            let chunk = &scratch[r * n..(r + 1) * n];
            let s: f64 = chunk.iter().zip(v.iter()).map(|(x, w)| x * w).sum();
            scratch[r] = s;
        }
        len = rest;
    }
    scratch[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_product_is_axis0_fastest() {
        let mut out = Vec::new();
        outer_product(&[&[1.0, 2.0], &[10.0, 20.0, 30.0]], &mut out);
        assert_eq!(out, vec![10.0, 20.0, 20.0, 40.0, 30.0, 60.0]);
    }

    #[test]
    fn contract_matches_brute_force() {
        let a: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        let v0 = [1.0, -2.0, 0.5];
        let v1 = [3.0, 0.25, -1.0, 2.0];
        let mut expect = 0.0;
        for k1 in 0..4 {
            for k0 in 0..3 {
                expect += a[k0 + 3 * k1] * v0[k0] * v1[k1];
            }
        }
        let mut scratch = Vec::new();
        let got = contract(&a, &[&v0, &v1], &mut scratch);
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn apply_along_axis_1() {
        // shape [2, 3]: t[i + 2 j]
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        // sum along axis 1
        let out = apply_along_axis(&t, &[2, 3], 1, &[1.0, 1.0, 1.0], 1);
        assert_eq!(out, vec![9.0, 12.0]);
        let out = apply_along_axis(&t, &[2, 3], 0, &[1.0, -1.0], 1);
        assert_eq!(out, vec![-1.0, -1.0, -1.0]);
    }
}
