//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis of `{u : A u = 0}` for the stacked `rows` of `A`,
/// each of length `m`. Rows are normalised first; singular values below
/// `rel_tol * max(1, σ_max)` count as zero.
pub fn nullspace(rows: &[Vec<f64>], m: usize, rel_tol: f64) -> Vec<DVector<f64>> {
    let mut kept: Vec<&Vec<f64>> = Vec::new();
    let mut norms = Vec::new();
    for r in rows {
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-300 && n.is_finite() {
            kept.push(r);
            norms.push(n);
        }
    }
    if kept.is_empty() {
        return (0..m)
            .map(|k| DVector::from_fn(m, |i, _| (i == k) as u8 as f64))
            .collect();
    }
    let r = kept.len().max(m);
    let mut a = DMatrix::<f64>::zeros(r, m);
    for (i, (row, n)) in kept.iter().zip(&norms).enumerate() {
        for j in 0..m {
            a[(i, j)] = row[j] / n;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut basis = Vec::new();
    for k in 0..m {
        let s = if k < sigma.len() { sigma[k] } else { 0.0 };
        if s <= rel_tol * smax {
            basis.push(v_t.row(k).transpose());
        }
    }
    basis
}

/// Orthogonal projection of `x` onto the span of the orthonormal `basis`.
pub fn project(x: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for b in basis {
        out += b * b.dot(x);
    }
    out
}

/// Orthonormalises `vectors` (modified Gram-Schmidt), dropping dependent ones.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for b in &out {
            w -= b * b.dot(&w);
        }
        let n = w.norm();
        if n > tol {
            out.push(w / n);
        }
    }
    out
}

/// Rounds values within `tol` of an integer, and flushes tiny values to 0.
pub fn snap(x: f64, tol: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < tol {
        if r == 0.0 {
            0.0
        } else {
            r
        }
    } else {
        x
    }
}
