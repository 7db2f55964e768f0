//! Dense real-symmetric eigensolver: Householder tridiagonalization followed
//! by QL iteration with implicit shifts, after the classic TRED2/TQL2
//! routines (Martin, Reinsch & Wilkinson, Num. Math. 11, 1968; Bowdler,
//! Martin, Reinsch & Wilkinson, Num. Math. 11, 1968).
//!
//! All spectra in this crate come through [`diagonalize`]; the ordering and
//! sign conventions below make line tables reproducible run to run:
//! eigenvalues ascend, each eigenvector's largest-magnitude component is
//! positive, and exactly degenerate eigenvalues are ordered by the basis
//! index of their dominant component.

use crate::error::{Error, Result};
use crate::operators::{BasisLabel, OperatorMatrix, ProductBasis};

/// Maximum QL sweeps per eigenvalue before reporting non-convergence.
const MAX_QL_ITERATIONS: usize = 50;

/// Relative symmetry tolerance accepted by [`diagonalize`].
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues below this relative spacing are treated as degenerate when
/// fixing the deterministic ordering.
const DEGENERACY_TOL: f64 = 1e-12;

/// Complete spectrum of a real symmetric matrix.
///
/// `values` ascend; column `k` of `vectors` is the unit eigenvector of
/// `values[k]`. The basis labels of the input matrix, when present, are
/// carried through for dressed-state labeling.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    dim: usize,
    values: Vec<f64>,
    /// Column-major storage: eigenvector k occupies vectors[k*dim..(k+1)*dim].
    vectors: Vec<f64>,
    basis: Option<ProductBasis>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Eigenvector k as a contiguous slice.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn basis(&self) -> Option<&ProductBasis> {
        self.basis.as_ref()
    }

    /// ||V Lambda V^T - H||_F, the reconstruction residual against `h`.
    pub fn reconstruction_residual(&self, h: &OperatorMatrix) -> f64 {
        let n = self.dim;
        let mut resid = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += self.vectors[k * n + i] * self.values[k] * self.vectors[k * n + j];
                }
                let d = v - h[(i, j)];
                resid += d * d;
            }
        }
        resid.sqrt()
    }

    /// ||V^T V - I||_F, the orthonormality residual.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.dim;
        let mut resid = 0.0;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = self
                    .vector(a)
                    .iter()
                    .zip(self.vector(b))
                    .map(|(x, y)| x * y)
                    .sum();
                let d = dot - if a == b { 1.0 } else { 0.0 };
                resid += d * d;
            }
        }
        resid.sqrt()
    }
}

/// Dominant bare component of an eigenstate.
#[derive(Debug, Clone)]
pub struct DressedLabel {
    pub label: BasisLabel,
    /// Overlap probability |<label|psi_k>|^2.
    pub overlap: f64,
    /// Second-largest overlap probability.
    pub runner_up: f64,
    /// Set when the top two overlaps differ by less than 0.1, i.e. near an
    /// avoided crossing where bare labels lose meaning.
    pub ambiguous: bool,
}

/// Full eigendecomposition of a real symmetric matrix.
pub fn diagonalize(h: &OperatorMatrix) -> Result<EigenDecomposition> {
    let defect = h.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { defect });
    }
    let n = h.dim();
    let mut z: Vec<f64> = h.entries().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, n, &mut d, &mut e);
    tql2(&mut z, n, &mut d, &mut e)?;

    // z now holds eigenvectors in its columns (row-major storage); copy into
    // column-major order, then sort, orient, and break degeneracies.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));

    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    let mut dominant = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        values.push(d[src]);
        let col = &mut vectors[k * n..(k + 1) * n];
        for i in 0..n {
            col[i] = z[i * n + src];
        }
        let mut arg = 0;
        for i in 1..n {
            if col[i].abs() > col[arg].abs() {
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
        dominant.push(arg);
    }

    // stable ordering inside (numerically) degenerate clusters: ascending
    // basis index of the dominant component
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && (values[end] - values[end - 1]).abs() <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - k > 1 {
            let mut cluster: Vec<usize> = (k..end).collect();
            cluster.sort_by_key(|&c| dominant[c]);
            let vals: Vec<f64> = cluster.iter().map(|&c| values[c]).collect();
            let cols: Vec<Vec<f64>> = cluster
                .iter()
                .map(|&c| vectors[c * n..(c + 1) * n].to_vec())
                .collect();
            for (offset, (val, col)) in vals.into_iter().zip(cols).enumerate() {
                values[k + offset] = val;
                vectors[(k + offset) * n..(k + offset + 1) * n].copy_from_slice(&col);
            }
        }
        k = end;
    }

    Ok(EigenDecomposition {
        dim: n,
        values,
        vectors,
        basis: h.basis().cloned(),
    })
}

/// Dominant-component label and overlap of eigenstate `k`.
pub fn dressed_label(dec: &EigenDecomposition, k: usize) -> DressedLabel {
    let basis = dec
        .basis()
        .expect("dressed labels need basis metadata on the diagonalized matrix");
    let v = dec.vector(k);
    let mut best = 0;
    let mut second = 0.0;
    for i in 1..v.len() {
        let p = v[i] * v[i];
        if p > v[best] * v[best] {
            second = v[best] * v[best];
            best = i;
        } else if p > second {
            second = p;
        }
    }
    let overlap = v[best] * v[best];
    DressedLabel {
        label: basis.label(best).clone(),
        overlap,
        runner_up: second,
        ambiguous: overlap - second < 0.1,
    }
}

/// Eigenstate with the largest overlap on a bare basis label, with its
/// overlap probability. Errors when the label cannot be resolved
/// unambiguously (near an avoided crossing).
pub fn find_dressed_state(dec: &EigenDecomposition, label: &BasisLabel) -> Result<(usize, f64)> {
    let basis = dec
        .basis()
        .expect("dressed lookup needs basis metadata on the diagonalized matrix");
    let idx = basis.index_of(label).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "label {} outside the truncated space",
            label.text(basis.frame)
        ))
    })?;
    let n = dec.dim();
    let mut best_k = 0;
    let mut best = 0.0;
    let mut second = 0.0;
    for k in 0..n {
        let amp = dec.vector(k)[idx];
        let p = amp * amp;
        if p > best {
            second = best;
            best = p;
            best_k = k;
        } else if p > second {
            second = p;
        }
    }
    if best - second < 0.1 {
        return Err(Error::AmbiguousLabel {
            label: label.text(basis.frame),
            best,
            runner_up: second,
        });
    }
    Ok((best_k, best))
}

/// Eigenvalues only (no eigenvector accumulation); same ordering guarantees.
/// Used in flux sweeps and fit objectives where only line positions matter.
pub fn eigenvalues(h: &OperatorMatrix) -> Result<Vec<f64>> {
    let defect = h.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { defect });
    }
    let n = h.dim();
    let mut a: Vec<f64> = h.entries().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2_values(&mut a, n, &mut d, &mut e);
    tql2_values(n, &mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

/// Householder reduction of a (row-major, symmetric) matrix to tridiagonal
/// form, accumulating the orthogonal transformation in `a` for later
/// eigenvector recovery. On output `d` holds the diagonal and `e[1..]` the
/// subdiagonal.
fn tred2(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    a[j * n + i] = a[i * n + j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[i * n + j];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[i * n + k] * a[k * n + j];
                }
                for k in 0..i {
                    a[k * n + j] -= g * a[k * n + i];
                }
            }
        }
        d[i] = a[i * n + i];
        a[i * n + i] = 1.0;
        for j in 0..i {
            a[j * n + i] = 0.0;
            a[i * n + j] = 0.0;
        }
    }
}

/// Householder reduction without accumulating the transformation (values-only
/// path; `a` is scratch).
fn tred2_values(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[i * n + k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[i * n + j];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    e[0] = 0.0;
}

/// QL iteration with implicit shifts on the tridiagonal (d, e), rotating the
/// columns of `z` along so that on success column k of `z` is the
/// eigenvector of d[k].
fn tql2(z: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// QL iteration without eigenvectors.
fn tql2_values(n: usize, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand::SeedableRng as _;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> OperatorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = OperatorMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn permutation_of_diagonal() {
        let h = OperatorMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let dec = diagonalize(&h).unwrap();
        assert_eq!(dec.values(), &[1.0, 2.0, 3.0]);
        // eigenvectors are basis vectors with the positive-sign convention
        assert_eq!(dec.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(dec.vector(1), &[0.0, 0.0, 1.0]);
        assert_eq!(dec.vector(2), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let h = OperatorMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let dec = diagonalize(&h).unwrap();
        assert_abs_diff_eq!(dec.value(0), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.value(1), 1.0, epsilon = 1e-12);
        let inv_sqrt2 = 0.5_f64.sqrt();
        assert_abs_diff_eq!(dec.vector(0)[0].abs(), inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.vector(1)[0], inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.vector(1)[1], inv_sqrt2, epsilon = 1e-12);
        // sign convention: dominant component positive
        assert!(dec.vector(0)[0] > 0.0 || dec.vector(0)[1] > 0.0);
    }

    /// Closed-form oracle for symmetric 2x2 [[a, b], [b, c]], in the
    /// cancellation-safe form.
    fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
        let mean = 0.5 * (a + c);
        let r = (0.5 * (a - c)).hypot(b);
        (mean - r, mean + r)
    }

    #[test]
    fn agreement_with_two_by_two_oracle() {
        let cases = [
            (2.0, 0.3, -1.0),
            (5.0, 2.0, 5.0),
            (-0.5, 1e-6, -0.5000001),
            (1e4, 3.0, -1e4),
        ];
        for (a, b, c) in cases {
            let h = OperatorMatrix::from_rows(&[&[a, b], &[b, c]]);
            let dec = diagonalize(&h).unwrap();
            let (lo, hi) = eig2(a, b, c);
            assert_abs_diff_eq!(dec.value(0), lo, epsilon = 1e-12 * hi.abs().max(1.0));
            assert_abs_diff_eq!(dec.value(1), hi, epsilon = 1e-12 * hi.abs().max(1.0));
        }
    }

    /// Closed-form 3x3 oracle via the trigonometric solution of the
    /// characteristic cubic for symmetric matrices.
    fn eig3(m: &OperatorMatrix) -> [f64; 3] {
        let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
        let q = m.trace() / 3.0;
        let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return [q, q, q];
        }
        let mut b = m.clone();
        for i in 0..3 {
            b[(i, i)] -= q;
        }
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let r = (det_b / (2.0 * p.powi(3))).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut out = [e1, e2, e3];
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn agreement_with_three_by_three_oracle() {
        for seed in 0..20 {
            let h = random_symmetric(3, seed);
            let dec = diagonalize(&h).unwrap();
            let oracle = eig3(&h);
            let scale = oracle.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for k in 0..3 {
                assert_abs_diff_eq!(dec.value(k), oracle[k], epsilon = 1e-12 * scale);
            }
        }
    }

    #[test]
    fn rejects_nonsymmetric_input() {
        let mut h = OperatorMatrix::zeros(3);
        h[(0, 1)] = 1.0;
        assert!(matches!(
            diagonalize(&h),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn values_only_path_matches_full_path() {
        for seed in [1, 2, 3] {
            let h = random_symmetric(24, seed);
            let dec = diagonalize(&h).unwrap();
            let vals = eigenvalues(&h).unwrap();
            for (a, b) in dec.values().iter().zip(&vals) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn trace_preserved() {
        let h = random_symmetric(40, 7);
        let dec = diagonalize(&h).unwrap();
        let sum: f64 = dec.values().iter().sum();
        assert_abs_diff_eq!(sum, h.trace(), epsilon = 1e-10 * h.frobenius_norm().max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn reconstruction_and_orthonormality(n in 2usize..32, seed in 0u64..1000) {
            let h = random_symmetric(n, seed);
            let dec = diagonalize(&h).unwrap();
            let norm = h.frobenius_norm().max(1e-300);
            prop_assert!(dec.reconstruction_residual(&h) / norm < 1e-12 * (n as f64));
            prop_assert!(dec.orthonormality_residual() < 1e-9);
            for k in 1..n {
                prop_assert!(dec.value(k) >= dec.value(k - 1));
            }
        }
    }
}
