//! Dense complex helpers shared by the register-aware types.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::layout::SystemLayout;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Re Tr(AB) without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn herm_eig_raw(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    herm_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// V diag(f(λ)) V† from a precomputed decomposition.
pub fn from_spectrum(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (k, &l) in values.iter().enumerate() {
        let w = f(l);
        for i in 0..n {
            scaled[(i, k)] *= w;
        }
    }
    scaled * vectors.adjoint()
}

pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = herm_eig_raw(m);
    from_spectrum(&values, &vectors, f)
}

pub fn psd_sqrt(m: &CMat) -> CMat {
    herm_fn(m, |l| l.max(0.0).sqrt())
}

/// Inverse square root on the support, eigenvalues at or below `threshold` dropped.
pub fn pinv_sqrt(m: &CMat, threshold: f64) -> CMat {
    herm_fn(m, |l| if l > threshold { 1.0 / l.sqrt() } else { 0.0 })
}

/// Projector onto eigenvectors with eigenvalue above `threshold`.
pub fn support_projector(m: &CMat, threshold: f64) -> CMat {
    herm_fn(m, |l| if l > threshold { 1.0 } else { 0.0 })
}

/// Sum of singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    m.clone().singular_values().iter().sum()
}

/// Index map for reordering tensor factors: factor `i` of the output is
/// factor `perm[i]` of the input.
fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let k = dims.len();
    let total: usize = dims.iter().product();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    // stride of each old factor inside the new index
    let mut new_stride_of_old = vec![0usize; k];
    let mut s = 1;
    for i in (0..k).rev() {
        new_stride_of_old[perm[i]] = s;
        s *= new_dims[i];
    }
    let mut map = vec![0usize; total];
    let mut digits = vec![0usize; k];
    for (old, slot) in map.iter_mut().enumerate() {
        let mut rem = old;
        for f in (0..k).rev() {
            digits[f] = rem % dims[f];
            rem /= dims[f];
        }
        *slot = digits
            .iter()
            .zip(&new_stride_of_old)
            .map(|(d, s)| d * s)
            .sum();
    }
    map
}

fn check_perm(dims: &[usize], perm: &[usize]) {
    debug_assert_eq!(dims.len(), perm.len());
    debug_assert!({
        let mut seen = vec![false; perm.len()];
        perm.iter().all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
    });
}

pub fn permute_operator(m: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    check_perm(dims, perm);
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return m.clone();
    }
    let map = permutation_index_map(dims, perm);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        let nj = map[j];
        for i in 0..n {
            out[(map[i], nj)] = m[(i, j)];
        }
    }
    out
}

/// Permutes row and column factors independently (for maps between spaces).
pub fn permute_rect(
    m: &CMat,
    row_dims: &[usize],
    row_perm: &[usize],
    col_dims: &[usize],
    col_perm: &[usize],
) -> CMat {
    check_perm(row_dims, row_perm);
    check_perm(col_dims, col_perm);
    let rmap = permutation_index_map(row_dims, row_perm);
    let cmap = permutation_index_map(col_dims, col_perm);
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(rmap[i], cmap[j])] = m[(i, j)];
        }
    }
    out
}

pub fn permute_vector(v: &CVec, dims: &[usize], perm: &[usize]) -> CVec {
    check_perm(dims, perm);
    let map = permutation_index_map(dims, perm);
    let mut out = CVec::zeros(v.len());
    for (i, z) in v.iter().enumerate() {
        out[map[i]] = *z;
    }
    out
}

/// Positions in `from` of each register of `to`; both must hold the same registers.
pub fn layout_permutation(from: &SystemLayout, to: &SystemLayout) -> Result<Vec<usize>> {
    if !from.same_registers(to) {
        return Err(Error::DimensionMismatch(format!(
            "layouts {from} and {to} hold different registers"
        )));
    }
    to.registers()
        .iter()
        .map(|r| from.position(&r.label).ok_or_else(|| Error::UnknownLabel(r.label.clone())))
        .collect()
}

pub fn reorder_operator(m: &CMat, from: &SystemLayout, to: &SystemLayout) -> Result<CMat> {
    let perm = layout_permutation(from, to)?;
    Ok(permute_operator(m, &from.dims(), &perm))
}

/// Traces out every factor whose `keep` flag is false; kept factors retain their order.
pub fn partial_trace_raw(m: &CMat, dims: &[usize], keep: &[bool]) -> CMat {
    let kept: Vec<usize> = (0..dims.len()).filter(|&i| keep[i]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|&i| !keep[i]).collect();
    let dk: usize = kept.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();
    if dt == 1 {
        // only unit factors are traced; kept order is already the original one
        return m.clone();
    }
    let perm: Vec<usize> = kept.iter().chain(traced.iter()).copied().collect();
    let p = permute_operator(m, dims, &perm);
    let mut out = CMat::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += p[(a * dt + t, b * dt + t)];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Extends an operator on `from` (a subset of `target`) by identities and
/// reorders the factors to match `target`.
pub fn embed_operator(m: &CMat, from: &SystemLayout, target: &SystemLayout) -> Result<CMat> {
    from.check_subset_of(target)?;
    let rest = target.without(&from.labels());
    let extended = if rest.total_dim() == 1 {
        m.clone()
    } else {
        kron(m, &identity(rest.total_dim()))
    };
    let ext_layout = from.concat(&rest)?;
    reorder_operator(&extended, &ext_layout, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_matrix(d: usize) -> CMat {
        let mut s = CMat::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                s[(j * d + i, i * d + j)] = c(1.0, 0.0);
            }
        }
        s
    }

    #[test]
    fn permutation_matches_swap_conjugation() {
        let a = CMat::from_fn(3, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| c((i * j) as f64, (i + 2 * j) as f64));
        let ab = kron(&a, &b);
        let s = swap_matrix(3);
        let expected = &s * &ab * s.adjoint();
        let got = permute_operator(&ab, &[3, 3], &[1, 0]);
        assert!(max_abs(&(got - expected)) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = CMat::from_fn(2, 2, |i, j| c((i + j) as f64, (i as f64) - (j as f64)));
        let b = CMat::from_diagonal(&CVec::from_vec(vec![c(0.25, 0.0), c(0.75, 0.0), c(0.0, 0.0)]));
        let ab = kron(&a, &b);
        let ra = partial_trace_raw(&ab, &[2, 3], &[true, false]);
        assert!(max_abs(&(ra - &a)) < 1e-14);
        let rb = partial_trace_raw(&ab, &[2, 3], &[false, true]);
        assert!(max_abs(&(rb - b.scale(trace_re(&a)))) < 1e-14);
    }

    #[test]
    fn tracing_unit_factors_is_identity() {
        let m = CMat::from_fn(6, 6, |i, j| c(i as f64, j as f64));
        let r = partial_trace_raw(&m, &[2, 1, 3, 1], &[true, false, true, false]);
        assert_eq!(r, m);
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let z = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let (vals, vecs) = herm_eig_raw(&z);
        assert_eq!(vals, vec![1.0, -1.0]);
        assert!((vecs[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }
}
