//! Multivariate total-degree polynomial bases and weighted least-squares
//! fitting.
//!
//! Monomials are ordered graded-lexicographically: ascending total degree,
//! and within a degree block descending powers of the leading variable. For
//! `d = 2, m = 2` the basis reads `1, x, y, x^2, x*y, y^2`, so the first
//! basis function is always the constant `1` and the fitted value at the
//! origin is the first coefficient row.
//!
//! Two solution routes are provided for the same minimization: the primal
//! weighted least-squares fit ([`wls_fit`]) and the dual constrained form
//! ([`backus_gilbert_coeffs`]) that returns per-sample coefficients `a_i`
//! with `p(x0) = sum_i a_i y_i`. They are kept independent so one can verify
//! the other.

use crate::error::{MmlsError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Default reciprocal-condition threshold for the rank-revealing solves.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Number of monomials of total degree <= m in d variables: C(m+d, d).
pub fn basis_size(d: usize, m: usize) -> usize {
    // Product form of the binomial; stays exact for every size this crate
    // can realistically fit.
    let mut j: usize = 1;
    for i in 1..=d {
        j = j * (m + i) / i;
    }
    j
}

/// Exponent tuples of all monomials of total degree <= m in d variables,
/// in graded-lexicographic order.
pub fn monomial_exponents(d: usize, m: usize) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, remaining: u32, vars_left: usize, out: &mut Vec<Vec<u32>>) {
        if vars_left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            fill(prefix, remaining - e, vars_left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(basis_size(d, m));
    for deg in 0..=m as u32 {
        fill(&mut Vec::with_capacity(d), deg, d, &mut out);
    }
    out
}

/// Evaluate the graded-lex monomial basis at `x`; the first entry is 1.
pub fn monomial_basis(x: &DVector<f64>, m: usize) -> DVector<f64> {
    let d = x.len();
    let exps = monomial_exponents(d, m);
    let mut out = DVector::zeros(exps.len());
    for (j, alpha) in exps.iter().enumerate() {
        let mut v = 1.0;
        for (i, &e) in alpha.iter().enumerate() {
            if e > 0 {
                v *= x[i].powi(e as i32);
            }
        }
        out[j] = v;
    }
    out
}

/// Describes the monomial ordering a coefficient matrix refers to, so that
/// serialized models are portable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisOrder {
    pub scheme: String,
    pub exponents: Vec<Vec<u32>>,
}

impl BasisOrder {
    pub fn graded_lex(d: usize, m: usize) -> Self {
        BasisOrder {
            scheme: "graded-lex".to_string(),
            exponents: monomial_exponents(d, m),
        }
    }
}

/// Coefficients of a total-degree-`m` polynomial map from `d`-dimensional
/// chart coordinates to `n_out`-dimensional values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub dim_domain: usize,
    pub degree: usize,
    pub dim_range: usize,
    /// J x n_out; row `j` multiplies the `j`-th basis monomial.
    pub coeffs: DMatrix<f64>,
    pub basis_order: BasisOrder,
}

impl PolyModel {
    /// Evaluate the polynomial map at chart coordinates `x`.
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let phi = monomial_basis(x, self.degree);
        self.coeffs.transpose() * phi
    }

    /// Value at the chart origin: the constant coefficient row.
    pub fn value_at_origin(&self) -> DVector<f64> {
        self.coeffs.row(0).transpose()
    }

    /// Write the model as CSV: one comment header carrying the dimensions,
    /// then one row per monomial (`e1..ed, c1..c_nout`).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# polymodel d={} m={} n_out={} order={}",
            self.dim_domain, self.degree, self.dim_range, self.basis_order.scheme
        )?;
        let mut header: Vec<String> = (1..=self.dim_domain).map(|i| format!("e{i}")).collect();
        header.extend((1..=self.dim_range).map(|i| format!("c{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (j, alpha) in self.basis_order.exponents.iter().enumerate() {
            let mut fields: Vec<String> = alpha.iter().map(|e| e.to_string()).collect();
            fields.extend((0..self.dim_range).map(|c| crate::io::fmt_f64(self.coeffs[(j, c)])));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// A weighted least-squares instance: chart coordinates, target values and
/// nonnegative weights, row-aligned.
#[derive(Debug, Clone)]
pub struct WlsProblem {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    w: DVector<f64>,
}

impl WlsProblem {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() || x.nrows() != w.len() {
            return Err(MmlsError::DimensionMismatch(format!(
                "WLS problem rows disagree: X has {}, Y has {}, w has {}",
                x.nrows(),
                y.nrows(),
                w.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(MmlsError::Config("WLS problem has no samples".into()));
        }
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi < 0.0 {
                return Err(MmlsError::Config(format!(
                    "weight {wi} at index {i} is not finite and nonnegative"
                )));
            }
        }
        Ok(WlsProblem { x, y, w })
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }
    pub fn dim_domain(&self) -> usize {
        self.x.ncols()
    }
    pub fn dim_range(&self) -> usize {
        self.y.ncols()
    }
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }
    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }
}

/// Fit with the default rcond threshold.
pub fn wls_fit(problem: &WlsProblem, m: usize) -> Result<PolyModel> {
    wls_fit_with(problem, m, DEFAULT_RCOND)
}

/// Minimize `sum_i w_i |p(x_i) - y_i|^2` over polynomial maps of total
/// degree <= m, one shared factorization for all output coordinates.
///
/// Samples with zero weight are dropped before the solve, so they cannot
/// perturb the result even at rounding level.
pub fn wls_fit_with(problem: &WlsProblem, m: usize, rcond_threshold: f64) -> Result<PolyModel> {
    let d = problem.dim_domain();
    let n_out = problem.dim_range();
    let j_size = basis_size(d, m);

    let active: Vec<usize> = (0..problem.n_samples())
        .filter(|&i| problem.w[i] > 0.0)
        .collect();
    if active.len() < j_size {
        return Err(MmlsError::InsufficientSamples {
            needed: j_size,
            found: active.len(),
            degree: m,
        });
    }

    let mut design = DMatrix::zeros(active.len(), j_size);
    let mut rhs = DMatrix::zeros(active.len(), n_out);
    for (row, &i) in active.iter().enumerate() {
        let sw = problem.w[i].sqrt();
        let phi = monomial_basis(&problem.x.row(i).transpose(), m);
        for c in 0..j_size {
            design[(row, c)] = sw * phi[c];
        }
        for c in 0..n_out {
            rhs[(row, c)] = sw * problem.y[(i, c)];
        }
    }

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 {
        return Err(MmlsError::RankDeficient {
            rcond: 0.0,
            threshold: rcond_threshold,
        });
    }
    let rcond = smin / smax;
    if rcond < rcond_threshold {
        return Err(MmlsError::RankDeficient {
            rcond,
            threshold: rcond_threshold,
        });
    }
    let coeffs = svd
        .solve(&rhs, 0.0)
        .map_err(|e| MmlsError::Config(format!("SVD solve failed: {e}")))?;

    Ok(PolyModel {
        dim_domain: d,
        degree: m,
        dim_range: n_out,
        coeffs,
        basis_order: BasisOrder::graded_lex(d, m),
    })
}

/// Dual route: the coefficient vector `a` minimizing `sum_i a_i^2 / w_i`
/// subject to exact reproduction of every basis monomial at `x0`, so that
/// `p(x0) = sum_i a_i y_i` for the [`wls_fit`] polynomial.
///
/// Requires strictly positive weights (the diagonal of the dual system is
/// `1/w_i`); callers restrict to the support first.
pub fn backus_gilbert_coeffs(problem: &WlsProblem, m: usize, x0: &DVector<f64>) -> Result<DVector<f64>> {
    backus_gilbert_coeffs_with(problem, m, x0, DEFAULT_RCOND)
}

pub fn backus_gilbert_coeffs_with(
    problem: &WlsProblem,
    m: usize,
    x0: &DVector<f64>,
    rcond_threshold: f64,
) -> Result<DVector<f64>> {
    let d = problem.dim_domain();
    let n = problem.n_samples();
    let j_size = basis_size(d, m);
    if x0.len() != d {
        return Err(MmlsError::DimensionMismatch(format!(
            "x0 has dimension {}, problem domain is {d}",
            x0.len()
        )));
    }
    if let Some(index) = (0..n).find(|&i| problem.w[i] == 0.0) {
        return Err(MmlsError::ZeroWeight { index });
    }
    if n < j_size {
        return Err(MmlsError::InsufficientSamples {
            needed: j_size,
            found: n,
            degree: m,
        });
    }

    // a = W E (E^T W E)^{-1} b(x0), computed through the SVD of sqrt(W) E.
    let mut e = DMatrix::zeros(n, j_size);
    let mut f = DMatrix::zeros(n, j_size);
    for i in 0..n {
        let phi = monomial_basis(&problem.x.row(i).transpose(), m);
        let sw = problem.w[i].sqrt();
        for c in 0..j_size {
            e[(i, c)] = phi[c];
            f[(i, c)] = sw * phi[c];
        }
    }
    let svd = f.svd(false, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin / smax < rcond_threshold {
        return Err(MmlsError::RankDeficient {
            rcond: if smax > 0.0 { smin / smax } else { 0.0 },
            threshold: rcond_threshold,
        });
    }
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    // z = V diag(1/s^2) V^T b(x0)
    let b0 = monomial_basis(x0, m);
    let mut t = v_t * &b0;
    for (idx, s) in svd.singular_values.iter().enumerate() {
        t[idx] /= s * s;
    }
    let z = v_t.transpose() * t;
    let mut a = e * z;
    for i in 0..n {
        a[i] *= problem.w[i];
    }
    Ok(a)
}
