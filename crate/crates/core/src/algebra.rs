//! Polynomials in noncommuting observables x_1, …, x_n with canonical
//! commutation relations [x_j, x_k] = iθ_jk.
//!
//! Monomials are stored as written: index order is significant and nothing
//! is normal-ordered. The CCRs are applied only inside [`commutator`], where
//! the Leibniz rule reduces every bracket to scalars.
//!
//! Indices are zero-based in this API (x_1 is index 0).

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Magnitude below which coefficients produced by floating-point expansion
/// (centering) are dropped.
pub const FLOAT_PRUNE_TOL: f64 = 1e-14;

/// Tolerance used when checking P = P† on coefficients that went through
/// floating-point arithmetic.
pub const SELF_ADJOINT_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;

/// Dimension n and the real antisymmetric CCR matrix Θ.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrStructure {
    theta: Matrix,
}

impl CcrStructure {
    /// Accepts Θ antisymmetric within 1e-12 and stores its exact
    /// antisymmetric part.
    pub fn new(theta: Matrix) -> Result<Self> {
        let n = theta.nrows();
        if theta.ncols() != n {
            return Err(Error::Dimension(format!(
                "CCR matrix must be square, got {}x{}",
                n,
                theta.ncols()
            )));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "number of observables must be even and at least 2, got {n}"
            )));
        }
        let defect = linalg::antisymmetry_defect(&theta);
        if defect > SYMMETRY_TOL {
            return Err(Error::Validation(format!(
                "CCR matrix is not antisymmetric (max |θ_jk + θ_kj| = {defect:e})"
            )));
        }
        Ok(Self { theta: linalg::antisymmetrize(&theta) })
    }

    /// Θ = J ⊗ I_ν: ν position/momentum pairs ordered (q_1..q_ν, p_1..p_ν).
    pub fn canonical(nu: usize) -> Self {
        Self { theta: linalg::symplectic(nu.max(1)) }
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }
}

/// A single ordered product `coeff · x_{i_1} x_{i_2} ⋯`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: Complex64,
    pub indices: Vec<usize>,
}

impl Monomial {
    pub fn new(coeff: Complex64, indices: Vec<usize>) -> Self {
        Self { coeff, indices }
    }
}

/// Finite sum of monomials over a fixed CCR structure.
///
/// Canonical form: each index sequence appears once and no stored
/// coefficient is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPolynomial {
    ccr: Arc<CcrStructure>,
    terms: BTreeMap<Vec<usize>, Complex64>,
}

fn accumulate(terms: &mut BTreeMap<Vec<usize>, Complex64>, key: Vec<usize>, c: Complex64) {
    if c == Complex64::new(0.0, 0.0) {
        return;
    }
    let entry = terms.entry(key);
    match entry {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            let sum = *o.get() + c;
            if sum == Complex64::new(0.0, 0.0) {
                o.remove();
            } else {
                *o.get_mut() = sum;
            }
        }
    }
}

impl OperatorPolynomial {
    pub fn zero(ccr: Arc<CcrStructure>) -> Self {
        Self { ccr, terms: BTreeMap::new() }
    }

    pub fn constant(ccr: Arc<CcrStructure>, c: Complex64) -> Self {
        let mut p = Self::zero(ccr);
        accumulate(&mut p.terms, Vec::new(), c);
        p
    }

    /// The observable x_j.
    pub fn variable(ccr: Arc<CcrStructure>, j: usize) -> Result<Self> {
        Self::from_monomials(ccr, [Monomial::new(Complex64::new(1.0, 0.0), vec![j])])
    }

    pub fn from_monomials(
        ccr: Arc<CcrStructure>,
        monomials: impl IntoIterator<Item = Monomial>,
    ) -> Result<Self> {
        let n = ccr.dim();
        let mut p = Self::zero(ccr);
        for m in monomials {
            if let Some(&bad) = m.indices.iter().find(|&&i| i >= n) {
                return Err(Error::Dimension(format!(
                    "monomial index {bad} out of range for n = {n}"
                )));
            }
            accumulate(&mut p.terms, m.indices, m.coeff);
        }
        Ok(p)
    }

    pub fn ccr(&self) -> &Arc<CcrStructure> {
        &self.ccr
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], Complex64)> {
        self.terms.iter().map(|(k, &c)| (k.as_slice(), c))
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        self.terms().map(|(k, c)| Monomial::new(c, k.to_vec())).collect()
    }

    pub fn coefficient(&self, indices: &[usize]) -> Complex64 {
        self.terms.get(indices).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Length of the longest stored monomial; 0 for constants and for zero.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Largest coefficient magnitude; 0 for the zero polynomial.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.ccr, &other.ccr) || self.ccr == other.ccr {
            Ok(())
        } else {
            Err(Error::Structure(
                "polynomials are defined over different CCR structures".into(),
            ))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            accumulate(&mut out.terms, k.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.ccr.clone());
        for (k, &v) in &self.terms {
            accumulate(&mut out.terms, k.clone(), v * c);
        }
        out
    }

    /// Noncommutative product: index sequences concatenate, coefficients
    /// multiply.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.ccr.clone());
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let mut key = Vec::with_capacity(a.len() + b.len());
                key.extend_from_slice(a);
                key.extend_from_slice(b);
                accumulate(&mut out.terms, key, ca * cb);
            }
        }
        Ok(out)
    }

    /// P†: every index sequence reversed, every coefficient conjugated.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.ccr.clone());
        for (k, c) in &self.terms {
            let rev: Vec<usize> = k.iter().rev().copied().collect();
            accumulate(&mut out.terms, rev, c.conj());
        }
        out
    }

    /// P = P† up to a relative tolerance on each coefficient.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        let scale = self.max_abs_coeff().max(1.0);
        let adj = self.adjoint();
        let keys = self.terms.keys().chain(adj.terms.keys());
        for k in keys {
            let d = self.coefficient(k) - adj.coefficient(k);
            if d.norm() > tol * scale {
                return false;
            }
        }
        true
    }

    pub fn require_self_adjoint(&self, what: &str) -> Result<()> {
        if self.is_self_adjoint(SELF_ADJOINT_TOL) {
            Ok(())
        } else {
            Err(Error::Validation(format!("{what} is not self-adjoint")))
        }
    }

    /// Drops coefficients of magnitude at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(k, &c)| (k.clone(), c))
            .collect();
        Self { ccr: self.ccr.clone(), terms }
    }

    /// Substitutes x_j = ξ_j + μ_j and expands; the result is read as a
    /// polynomial in ξ. A degree-k monomial expands into 2^k ordered terms.
    pub fn center(&self, mu: &Vector) -> Result<Self> {
        let n = self.ccr.dim();
        if mu.len() != n {
            return Err(Error::Dimension(format!(
                "shift vector has length {}, expected {n}",
                mu.len()
            )));
        }
        let mut out = Self::zero(self.ccr.clone());
        let mut key = Vec::new();
        for (seq, &c) in &self.terms {
            let k = seq.len();
            for mask in 0u64..(1u64 << k) {
                // bit set: keep ξ at that position; clear: replace by μ
                let mut coeff = c;
                key.clear();
                for (pos, &idx) in seq.iter().enumerate() {
                    if mask >> pos & 1 == 1 {
                        key.push(idx);
                    } else {
                        coeff *= mu[idx];
                    }
                }
                if coeff != Complex64::new(0.0, 0.0) {
                    accumulate(&mut out.terms, key.clone(), coeff);
                }
            }
        }
        Ok(out.pruned(FLOAT_PRUNE_TOL))
    }

    /// Rewrites every monomial with nondecreasing indices using
    /// x_k x_j = x_j x_k + iθ_kj. Two polynomials denote the same operator
    /// exactly when their normal-ordered forms coincide.
    pub fn normal_ordered(&self) -> Self {
        let theta = self.ccr.theta();
        let mut out = Self::zero(self.ccr.clone());
        let mut work: Vec<(Vec<usize>, Complex64)> = self.terms.iter().map(|(k, &c)| (k.clone(), c)).collect();
        while let Some((word, c)) = work.pop() {
            match word.windows(2).position(|w| w[0] > w[1]) {
                None => accumulate(&mut out.terms, word, c),
                Some(p) => {
                    let (k, j) = (word[p], word[p + 1]);
                    let mut swapped = word.clone();
                    swapped.swap(p, p + 1);
                    work.push((swapped, c));
                    let mut shorter = word[..p].to_vec();
                    shorter.extend_from_slice(&word[p + 2..]);
                    work.push((shorter, c * Complex64::new(0.0, theta[(k, j)])));
                }
            }
        }
        out
    }

    /// Real symmetric R such that the degree-2 part equals xᵀRx/2 up to
    /// commutator constants (exact for self-adjoint input).
    pub fn quadratic_form_matrix(&self) -> Matrix {
        let n = self.ccr.dim();
        let mut r = Matrix::zeros(n, n);
        for (k, c) in &self.terms {
            if let [j, l] = k.as_slice() {
                r[(*j, *l)] += c.re;
                r[(*l, *j)] += c.re;
            }
        }
        r
    }

    /// Real vector b of the degree-1 part bᵀx.
    pub fn linear_part(&self) -> Vector {
        let n = self.ccr.dim();
        let mut b = Vector::zeros(n);
        for (k, c) in &self.terms {
            if let [j] = k.as_slice() {
                b[*j] += c.re;
            }
        }
        b
    }
}

/// [A, B] for two monomials, reduced with the CCRs:
/// [A, b_1⋯b_s] = Σ_j b_1⋯b_{j-1} [A, b_j] b_{j+1}⋯b_s and
/// [a_1⋯a_r, x] = Σ_i iθ_{a_i x} · (A with position i removed).
fn monomial_commutator(
    a: &[usize],
    b: &[usize],
    theta: &Matrix,
    scale: Complex64,
    out: &mut BTreeMap<Vec<usize>, Complex64>,
) {
    for (jpos, &bj) in b.iter().enumerate() {
        for (ipos, &ai) in a.iter().enumerate() {
            let t = theta[(ai, bj)];
            if t == 0.0 {
                continue;
            }
            let mut key = Vec::with_capacity(a.len() + b.len() - 2);
            key.extend_from_slice(&b[..jpos]);
            key.extend_from_slice(&a[..ipos]);
            key.extend_from_slice(&a[ipos + 1..]);
            key.extend_from_slice(&b[jpos + 1..]);
            accumulate(out, key, scale * Complex64::new(0.0, t));
        }
    }
}

/// [p, q] = pq − qp, fully reduced to a polynomial of degree at most
/// deg p + deg q − 2.
pub fn commutator(p: &OperatorPolynomial, q: &OperatorPolynomial) -> Result<OperatorPolynomial> {
    p.check_same(q)?;
    let theta = p.ccr.theta();
    let mut out = OperatorPolynomial::zero(p.ccr.clone());
    for (a, &ca) in &p.terms {
        for (b, &cb) in &q.terms {
            monomial_commutator(a, b, theta, ca * cb, &mut out.terms);
        }
    }
    Ok(out)
}

/// Heisenberg drift i[h, x_ℓ] for ℓ = 1..n.
pub fn heisenberg_rhs(h: &OperatorPolynomial, ccr: &CcrStructure) -> Result<Vec<OperatorPolynomial>> {
    if h.ccr.as_ref() != ccr {
        return Err(Error::Structure(
            "Hamiltonian is defined over a different CCR structure".into(),
        ));
    }
    h.require_self_adjoint("Hamiltonian")?;
    let i = Complex64::new(0.0, 1.0);
    (0..ccr.dim())
        .map(|l| {
            let x = OperatorPolynomial::variable(h.ccr.clone(), l)?;
            Ok(commutator(h, &x)?.scale(i))
        })
        .collect()
}

/// a + bᵀx + xᵀRx/2 as a polynomial.
pub fn build_quadratic(
    a: f64,
    b: &Vector,
    r: &Matrix,
    ccr: Arc<CcrStructure>,
) -> Result<OperatorPolynomial> {
    let n = ccr.dim();
    if b.len() != n || r.nrows() != n || r.ncols() != n {
        return Err(Error::Dimension(format!(
            "quadratic parameters do not match n = {n} (b: {}, R: {}x{})",
            b.len(),
            r.nrows(),
            r.ncols()
        )));
    }
    let asym = linalg::asymmetry(r);
    if asym > SYMMETRY_TOL {
        return Err(Error::Validation(format!(
            "quadratic coefficient matrix is not symmetric (max deviation {asym:e})"
        )));
    }
    let r = linalg::symmetrize(r);
    let mut out = OperatorPolynomial::zero(ccr);
    accumulate(&mut out.terms, Vec::new(), Complex64::new(a, 0.0));
    for j in 0..n {
        accumulate(&mut out.terms, vec![j], Complex64::new(b[j], 0.0));
    }
    for j in 0..n {
        for k in 0..n {
            accumulate(&mut out.terms, vec![j, k], Complex64::new(0.5 * r[(j, k)], 0.0));
        }
    }
    Ok(out)
}

/// The affine vector Θ(b + Rx) as polynomials, one per component.
pub fn affine_drift(
    b: &Vector,
    r: &Matrix,
    ccr: Arc<CcrStructure>,
) -> Result<Vec<OperatorPolynomial>> {
    let theta = ccr.theta().clone();
    let n = ccr.dim();
    let mut out = Vec::with_capacity(n);
    for l in 0..n {
        let mut p = OperatorPolynomial::zero(ccr.clone());
        for j in 0..n {
            let t = theta[(l, j)];
            if t == 0.0 {
                continue;
            }
            accumulate(&mut p.terms, Vec::new(), Complex64::new(t * b[j], 0.0));
            for k in 0..n {
                accumulate(&mut p.terms, vec![k], Complex64::new(t * r[(j, k)], 0.0));
            }
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn mono(coeff: f64, idx: &[usize]) -> Monomial {
        Monomial::new(c(coeff), idx.to_vec())
    }

    fn qp() -> Arc<CcrStructure> {
        Arc::new(CcrStructure::canonical(1))
    }

    #[test]
    fn ccr_validation() {
        assert!(CcrStructure::new(Matrix::zeros(3, 3)).is_err());
        assert!(CcrStructure::new(Matrix::zeros(2, 3)).is_err());
        let bad = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -0.9, 0.0]);
        assert!(matches!(CcrStructure::new(bad), Err(Error::Validation(_))));
        let near = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0 + 1e-13, 0.0]);
        let ccr = CcrStructure::new(near).unwrap();
        assert_eq!(ccr.theta()[(0, 1)], -ccr.theta()[(1, 0)]);
    }

    #[test]
    fn multiply_examples() {
        let ccr = qp();
        let x1 = OperatorPolynomial::variable(ccr.clone(), 0).unwrap();
        let x2 = OperatorPolynomial::variable(ccr.clone(), 1).unwrap();
        let p = x1.multiply(&x2).unwrap();
        assert_eq!(p.monomials(), vec![mono(1.0, &[0, 1])]);

        let two_plus_x1 =
            OperatorPolynomial::from_monomials(ccr.clone(), [mono(2.0, &[]), mono(1.0, &[0])]).unwrap();
        let p = two_plus_x1.multiply(&x1).unwrap();
        assert_eq!(p.coefficient(&[0]), c(2.0));
        assert_eq!(p.coefficient(&[0, 0]), c(1.0));
        assert_eq!(p.len(), 2);

        let a = OperatorPolynomial::from_monomials(ccr.clone(), [mono(1.0, &[0, 1])]).unwrap();
        let b = OperatorPolynomial::from_monomials(ccr.clone(), [mono(1.0, &[1, 0])]).unwrap();
        assert_eq!(a.multiply(&b).unwrap().monomials(), vec![mono(1.0, &[0, 1, 1, 0])]);
    }

    #[test]
    fn multiply_rejects_mismatched_structures() {
        let a = OperatorPolynomial::variable(qp(), 0).unwrap();
        let b = OperatorPolynomial::variable(Arc::new(CcrStructure::canonical(2)), 0).unwrap();
        assert!(matches!(a.multiply(&b), Err(Error::Structure(_))));
        assert!(matches!(commutator(&a, &b), Err(Error::Structure(_))));
    }

    #[test]
    fn adjoint_examples() {
        let ccr = qp();
        let p = OperatorPolynomial::from_monomials(
            ccr.clone(),
            [Monomial::new(Complex64::new(0.0, 1.0), vec![0, 1])],
        )
        .unwrap();
        let adj = p.adjoint();
        assert_eq!(adj.monomials(), vec![Monomial::new(Complex64::new(0.0, -1.0), vec![1, 0])]);

        let sq = OperatorPolynomial::from_monomials(ccr.clone(), [mono(3.0, &[0, 0])]).unwrap();
        assert_eq!(sq.adjoint(), sq);

        let h = build_quadratic(
            0.7,
            &Vector::from_vec(vec![1.0, -2.0]),
            &Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            ccr,
        )
        .unwrap();
        assert_eq!(h.adjoint(), h);
    }

    #[test]
    fn base_commutator() {
        let ccr = qp();
        let x1 = OperatorPolynomial::variable(ccr.clone(), 0).unwrap();
        let x2 = OperatorPolynomial::variable(ccr.clone(), 1).unwrap();
        let br = commutator(&x1, &x2).unwrap();
        assert_eq!(br.monomials(), vec![Monomial::new(Complex64::new(0.0, 1.0), vec![])]);
    }

    #[test]
    fn commutator_degree_bound() {
        let ccr = Arc::new(CcrStructure::canonical(2));
        let p = OperatorPolynomial::from_monomials(ccr.clone(), [mono(1.0, &[0, 2, 1])]).unwrap();
        let q = OperatorPolynomial::from_monomials(ccr.clone(), [mono(1.0, &[2, 3, 0, 1])]).unwrap();
        let br = commutator(&p, &q).unwrap();
        assert!(br.degree() <= 5);
    }

    #[test]
    fn constants_have_zero_drift() {
        let ccr = qp();
        let h = OperatorPolynomial::constant(ccr.clone(), c(4.0));
        let rhs = heisenberg_rhs(&h, &ccr).unwrap();
        assert!(rhs.iter().all(OperatorPolynomial::is_zero));
    }

    #[test]
    fn heisenberg_rejects_non_self_adjoint() {
        let ccr = qp();
        let h = OperatorPolynomial::from_monomials(ccr.clone(), [mono(1.0, &[0, 1])]).unwrap();
        assert!(matches!(heisenberg_rhs(&h, &ccr), Err(Error::Validation(_))));
    }

    #[test]
    fn quadratic_drift_is_affine() {
        let ccr = qp();
        let b = Vector::from_vec(vec![0.5, -1.5]);
        let r = Matrix::from_row_slice(2, 2, &[2.0, 0.25, 0.25, 1.0]);
        let h = build_quadratic(1.0, &b, &r, ccr.clone()).unwrap();
        let rhs = heisenberg_rhs(&h, &ccr).unwrap();
        let expected = affine_drift(&b, &r, ccr.clone()).unwrap();
        for (got, want) in rhs.iter().zip(&expected) {
            assert!(got.sub(want).unwrap().is_zero(), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn center_examples() {
        let ccr = qp();
        let kappa = 1.5;
        let mu = Vector::from_vec(vec![kappa, 0.0]);
        let x1 = OperatorPolynomial::variable(ccr.clone(), 0).unwrap();
        let shifted = x1.center(&mu).unwrap();
        assert_eq!(shifted.coefficient(&[0]), c(1.0));
        assert_eq!(shifted.coefficient(&[]), c(kappa));
        assert_eq!(shifted.len(), 2);

        let q4 = OperatorPolynomial::from_monomials(ccr.clone(), [mono(1.0, &[0, 0, 0, 0])]).unwrap();
        let e = q4.center(&mu).unwrap();
        assert_eq!(e.coefficient(&[]), c(kappa.powi(4)));
        assert_eq!(e.coefficient(&[0]), c(4.0 * kappa.powi(3)));
        assert_eq!(e.coefficient(&[0, 0]), c(6.0 * kappa.powi(2)));
        assert_eq!(e.coefficient(&[0, 0, 0]), c(4.0 * kappa));
        assert_eq!(e.coefficient(&[0, 0, 0, 0]), c(1.0));
        assert_eq!(e.len(), 5);

        let zero = Vector::zeros(2);
        let p = OperatorPolynomial::from_monomials(ccr.clone(), [mono(2.0, &[0, 1, 1]), mono(-1.0, &[1])])
            .unwrap();
        assert_eq!(p.center(&zero).unwrap(), p);
        assert!(matches!(p.center(&Vector::zeros(3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn build_quadratic_examples() {
        let ccr = qp();
        let h = build_quadratic(0.0, &Vector::zeros(2), &Matrix::identity(2, 2), ccr.clone()).unwrap();
        assert_eq!(h.monomials(), vec![mono(0.5, &[0, 0]), mono(0.5, &[1, 1])]);

        let h = build_quadratic(1.0, &Vector::zeros(2), &Matrix::zeros(2, 2), ccr.clone()).unwrap();
        assert_eq!(h.monomials(), vec![mono(1.0, &[])]);

        let bad = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            build_quadratic(0.0, &Vector::zeros(2), &bad, ccr),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn quadratic_form_roundtrip() {
        let ccr = qp();
        let r = Matrix::from_row_slice(2, 2, &[3.0, -0.5, -0.5, 1.0]);
        let b = Vector::from_vec(vec![0.25, 2.0]);
        let h = build_quadratic(0.0, &b, &r, ccr).unwrap();
        assert_eq!(h.quadratic_form_matrix(), r);
        assert_eq!(h.linear_part(), b);
    }
}
