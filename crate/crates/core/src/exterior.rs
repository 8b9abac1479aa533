//! Exterior powers of `R^m`.
//!
//! Grade-`k` multivectors are stored in the basis `e_{j_1} ∧ … ∧ e_{j_k}`,
//! `j_1 < … < j_k`, enumerated in lexicographic order. The coordinate of
//! `u_1 ∧ … ∧ u_k` on a basis element is the `k×k` minor of the column matrix
//! `[u_1 … u_k]` on the corresponding rows, and the matrix of `∧^k A`
//! (the k-th multiplicative compound) has entry `(I, J)` equal to the minor of
//! `A` on rows `I` and columns `J`.
//!
//! For `k = m - 1` the basis element missing index `p` (1-based) is identified
//! with `δ_p e_p`, where `δ_p = +1` for odd `p` and `-1` for even `p`. Under
//! this identification `∧^{m-1} A` becomes the cofactor matrix
//! `cof(A) = det(A)·A^{-T}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{self, minor};

/// Largest ambient dimension accepted by the kernel (`C(12, 6) = 924`).
pub const MAX_DIM: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("grade {k} in dimension {m} violates 1 <= k <= m <= {MAX_DIM}")]
    Size { m: usize, k: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular")]
    Singular,
    #[error("det(A) is determined only up to sign when m-1 = {0} is even; pass a sign hint")]
    AmbiguousSign(usize),
}

pub type Result<T> = std::result::Result<T, ExteriorError>;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn check_dims(m: usize, k: usize) -> Result<()> {
    if k == 0 || k > m || m > MAX_DIM {
        return Err(ExteriorError::Size { m, k });
    }
    Ok(())
}

/// A strictly increasing tuple of 0-based indices together with its position
/// in the lexicographic enumeration of all such tuples of the same length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<usize>,
    rank: usize,
}

impl MultiIndex {
    pub fn new(m: usize, entries: Vec<usize>) -> Result<Self> {
        check_dims(m, entries.len())?;
        if entries.windows(2).any(|w| w[0] >= w[1]) || entries.iter().any(|&e| e >= m) {
            return Err(ExteriorError::Shape(format!(
                "multi-index {entries:?} is not strictly increasing within 0..{m}"
            )));
        }
        let rank = lex_rank(m, &entries);
        Ok(Self { entries, rank })
    }

    /// 0-based entries.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// Entries in the conventional 1-based numbering.
    pub fn one_based(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e + 1).collect()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn grade(&self) -> usize {
        self.entries.len()
    }
}

fn lex_rank(m: usize, entries: &[usize]) -> usize {
    let k = entries.len();
    let mut rank = 0;
    let mut start = 0;
    for (i, &e) in entries.iter().enumerate() {
        for skipped in start..e {
            rank += binomial(m - 1 - skipped, k - 1 - i);
        }
        start = e + 1;
    }
    rank
}

/// All grade-`k` multi-indices of `{0, …, m-1}` in lexicographic order.
pub fn enumerate_multi_indices(m: usize, k: usize) -> Result<Vec<MultiIndex>> {
    check_dims(m, k)?;
    let total = binomial(m, k);
    let mut out = Vec::with_capacity(total);
    let mut current: Vec<usize> = (0..k).collect();
    for rank in 0..total {
        out.push(MultiIndex { entries: current.clone(), rank });
        // Advance to the next combination.
        let mut i = k;
        while i > 0 {
            i -= 1;
            if current[i] < m - k + i {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
    Ok(out)
}

/// A grade-`k` multivector in `∧^k R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KVector {
    m: usize,
    k: usize,
    coords: DVector<f64>,
}

impl KVector {
    pub fn new(m: usize, k: usize, coords: DVector<f64>) -> Result<Self> {
        check_dims(m, k)?;
        if coords.len() != binomial(m, k) {
            return Err(ExteriorError::Shape(format!(
                "{} coordinates given, C({m},{k}) = {} expected",
                coords.len(),
                binomial(m, k)
            )));
        }
        Ok(Self { m, k, coords })
    }

    pub fn zeros(m: usize, k: usize) -> Result<Self> {
        Self::new(m, k, DVector::zeros(binomial(m, k)))
    }

    pub fn basis(m: usize, index: &MultiIndex) -> Result<Self> {
        let mut v = Self::zeros(m, index.grade())?;
        v.coords[index.rank()] = 1.0;
        Ok(v)
    }

    /// `v_1 ∧ … ∧ v_k`.
    pub fn wedge(vectors: &[DVector<f64>]) -> Result<Self> {
        let m = vectors.first().map(|v| v.len()).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != m) {
            return Err(ExteriorError::Shape("vectors of different dimension".into()));
        }
        Self::wedge_columns(&DMatrix::from_columns(vectors))
            .map_err(|e| if m == 0 { ExteriorError::Size { m, k: vectors.len() } } else { e })
    }

    /// Wedge product of the columns of an `m×k` matrix.
    pub fn wedge_columns(frame: &DMatrix<f64>) -> Result<Self> {
        let (m, k) = frame.shape();
        let indices = enumerate_multi_indices(m, k)?;
        let cols: Vec<usize> = (0..k).collect();
        let mut scratch = Vec::with_capacity(k * k);
        let coords = DVector::from_iterator(
            indices.len(),
            indices.iter().map(|rows| minor(frame, rows.entries(), &cols, &mut scratch)),
        );
        Ok(Self { m, k, coords })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn grade(&self) -> usize {
        self.k
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    /// Induced inner product: the Euclidean dot product of coordinates in the
    /// orthonormal basis `{e_I}`.
    pub fn inner(&self, other: &KVector) -> Result<f64> {
        if self.m != other.m || self.k != other.k {
            return Err(ExteriorError::Shape(format!(
                "inner product of grades ({},{}) and ({},{})",
                self.m, self.k, other.m, other.k
            )));
        }
        Ok(self.coords.dot(&other.coords))
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn normalized(&self) -> Self {
        Self { m: self.m, k: self.k, coords: self.coords.normalize() }
    }
}

/// `⟨u_1∧…∧u_r, v_1∧…∧v_r⟩ = det(⟨u_i, v_j⟩)`.
pub fn gram_inner_product(us: &[DVector<f64>], vs: &[DVector<f64>]) -> Result<f64> {
    if us.len() != vs.len() {
        return Err(ExteriorError::Shape(format!("{} vs {} factors", us.len(), vs.len())));
    }
    let r = us.len();
    let m = us.first().map(|u| u.len()).unwrap_or(0);
    if us.iter().chain(vs).any(|v| v.len() != m) {
        return Err(ExteriorError::Shape("factors of different dimension".into()));
    }
    let mut buf: Vec<f64> = Vec::with_capacity(r * r);
    for u in us {
        for v in vs {
            buf.push(u.dot(v));
        }
    }
    Ok(linalg::det_in_place(&mut buf, r))
}

/// Induced inner product of two k-vectors (bilinear extension of the Gram
/// determinant).
pub fn induced_inner_product(u: &KVector, v: &KVector) -> Result<f64> {
    u.inner(v)
}

/// Matrix of `∧^k A` in the lexicographic basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundOperator {
    m: usize,
    k: usize,
    matrix: DMatrix<f64>,
}

impl CompoundOperator {
    pub fn identity(m: usize, k: usize) -> Result<Self> {
        check_dims(m, k)?;
        let n = binomial(m, k);
        Ok(Self { m, k, matrix: DMatrix::identity(n, n) })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn grade(&self) -> usize {
        self.k
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn apply(&self, v: &KVector) -> Result<KVector> {
        if v.m != self.m || v.k != self.k {
            return Err(ExteriorError::Shape(format!(
                "compound of grade ({},{}) applied to k-vector of grade ({},{})",
                self.m, self.k, v.m, v.k
            )));
        }
        Ok(KVector { m: self.m, k: self.k, coords: &self.matrix * &v.coords })
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &CompoundOperator) -> Result<Self> {
        if self.m != other.m || self.k != other.k {
            return Err(ExteriorError::Shape("composing compounds of different grade".into()));
        }
        Ok(Self { m: self.m, k: self.k, matrix: &self.matrix * &other.matrix })
    }
}

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(ExteriorError::Shape(format!("{}×{} matrix is not square", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

/// k-th multiplicative compound: entry `(I, J)` is `det A[I, J]`.
pub fn compound_operator(a: &DMatrix<f64>, k: usize) -> Result<CompoundOperator> {
    let m = check_square(a)?;
    let indices = enumerate_multi_indices(m, k)?;
    let n = indices.len();
    let mut matrix = DMatrix::zeros(n, n);
    let fill_column = |(col, out): (usize, &mut [f64])| {
        let mut scratch = Vec::with_capacity(k * k);
        let cols = indices[col].entries();
        for (row, slot) in out.iter_mut().enumerate() {
            *slot = minor(a, indices[row].entries(), cols, &mut scratch);
        }
    };
    // nalgebra storage is column-major: one chunk per column.
    if n >= 64 {
        matrix.as_mut_slice().par_chunks_mut(n).enumerate().for_each(fill_column);
    } else {
        matrix.as_mut_slice().chunks_mut(n).enumerate().for_each(fill_column);
    }
    Ok(CompoundOperator { m, k, matrix })
}

/// k-th additive compound `A^{[k]} = d/dt ∧^k exp(tA) |_{t=0}`, the generator
/// of the compound cocycle.
pub fn additive_compound(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let m = check_square(a)?;
    let indices = enumerate_multi_indices(m, k)?;
    let n = indices.len();
    let mut out = DMatrix::zeros(n, n);
    for (ci, col) in indices.iter().enumerate() {
        for (ri, row) in indices.iter().enumerate() {
            if ri == ci {
                out[(ri, ci)] = row.entries().iter().map(|&i| a[(i, i)]).sum();
                continue;
            }
            // Non-zero only when the index sets differ in exactly one slot.
            let only_row: Vec<usize> =
                row.entries().iter().copied().filter(|i| !col.entries().contains(i)).collect();
            let only_col: Vec<usize> =
                col.entries().iter().copied().filter(|j| !row.entries().contains(j)).collect();
            if only_row.len() != 1 {
                continue;
            }
            let (r, s) = (only_row[0], only_col[0]);
            let pos_r = row.entries().iter().position(|&i| i == r).unwrap_or(0);
            let pos_s = col.entries().iter().position(|&j| j == s).unwrap_or(0);
            let sign = if (pos_r + pos_s) % 2 == 0 { 1.0 } else { -1.0 };
            out[(ri, ci)] = sign * a[(r, s)];
        }
    }
    Ok(out)
}

/// Cofactor matrix `[(−1)^{i+j} M_ij]`; equals `det(A)·A^{-T}` when `A` is
/// invertible.
pub fn cofactor_operator(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = check_square(a)?;
    if m == 0 {
        return Err(ExteriorError::Size { m, k: 0 });
    }
    if m == 1 {
        return Ok(DMatrix::from_element(1, 1, 1.0));
    }
    let mut scratch = Vec::with_capacity((m - 1) * (m - 1));
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        let rows: Vec<usize> = (0..m).filter(|&r| r != i).collect();
        for j in 0..m {
            let cols: Vec<usize> = (0..m).filter(|&c| c != j).collect();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[(i, j)] = sign * minor(a, &rows, &cols, &mut scratch);
        }
    }
    Ok(out)
}

/// The linear bijection `∧^{m-1} R^m → R^m` sending the basis element that
/// omits index `p` to `δ_p e_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeIdentification {
    m: usize,
    /// `signs[p]` is `δ_{p+1}`.
    signs: Vec<f64>,
}

impl HodgeIdentification {
    pub fn new(m: usize) -> Result<Self> {
        check_dims(m, m.saturating_sub(1))?;
        let signs = (1..=m).map(|p| if p % 2 == 1 { 1.0 } else { -1.0 }).collect();
        Ok(Self { m, signs })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// `δ_p` for 1-based `p`.
    pub fn sign(&self, p: usize) -> f64 {
        self.signs[p - 1]
    }

    /// Lexicographic rank of the `(m-1)`-index omitting 0-based `p`.
    fn rank_omitting(&self, p: usize) -> usize {
        self.m - 1 - p
    }

    pub fn to_vector(&self, w: &KVector) -> Result<DVector<f64>> {
        if w.m != self.m || w.k + 1 != self.m {
            return Err(ExteriorError::Shape(format!(
                "identification needs grade {} in dimension {}, got grade {} in dimension {}",
                self.m - 1,
                self.m,
                w.k,
                w.m
            )));
        }
        Ok(DVector::from_fn(self.m, |p, _| self.signs[p] * w.coords[self.rank_omitting(p)]))
    }

    pub fn from_vector(&self, v: &DVector<f64>) -> Result<KVector> {
        if v.len() != self.m {
            return Err(ExteriorError::Shape(format!(
                "vector of length {} for dimension {}",
                v.len(),
                self.m
            )));
        }
        let mut coords = DVector::zeros(self.m);
        for p in 0..self.m {
            coords[self.rank_omitting(p)] = self.signs[p] * v[p];
        }
        KVector::new(self.m, self.m - 1, coords)
    }

    /// Matrix `T` with `to_vector(w) = T · coords(w)`; a signed permutation,
    /// so `T^{-1} = T^T`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.m, self.m);
        for p in 0..self.m {
            t[(p, self.rank_omitting(p))] = self.signs[p];
        }
        t
    }

    /// `T · C · T^{-1}`: an operator on `∧^{m-1}` expressed on vectors.
    pub fn conjugate(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if c.shape() != (self.m, self.m) {
            return Err(ExteriorError::Shape(format!(
                "{}×{} operator on ∧^{} R^{}",
                c.nrows(),
                c.ncols(),
                self.m - 1,
                self.m
            )));
        }
        let t = self.matrix();
        Ok(&t * c * t.transpose())
    }

    /// `∧^{m-1} A` seen through the identification.
    pub fn identified_compound(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let c = compound_operator(a, self.m - 1)?;
        self.conjugate(c.matrix())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Inverts `A ↦ cof(A)`: returns `A` with `cofactor_operator(A) = C`.
///
/// `det(C) = det(A)^{m-1}`, so `|det A| = |det C|^{1/(m-1)}` and
/// `A = det(A)·C^{-T}`. When `m-1` is odd the sign of `det A` is that of
/// `det C` and `det_sign` is ignored; when `m-1` is even both signs give a
/// valid preimage and the caller has to choose.
pub fn recover_base_operator(c: &DMatrix<f64>, det_sign: Option<Sign>) -> Result<DMatrix<f64>> {
    let m = check_square(c)?;
    if m < 2 {
        return Err(ExteriorError::Size { m, k: m.saturating_sub(1) });
    }
    let lu = c.clone().lu();
    let det_c = lu.determinant();
    let inv = lu.try_inverse().ok_or(ExteriorError::Singular)?;
    if det_c == 0.0 || !det_c.is_finite() {
        return Err(ExteriorError::Singular);
    }
    let power = m - 1;
    let sign = if power % 2 == 1 {
        det_c.signum()
    } else {
        det_sign.ok_or(ExteriorError::AmbiguousSign(power))?.value()
    };
    let det_a = sign * det_c.abs().powf(1.0 / power as f64);
    Ok(inv.transpose() * det_a)
}

/// `trace(D)·Id − D^T`: the generator of `∧^{m-1} exp(tD)` read through the
/// identification.
pub fn codim1_generator(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = check_square(d)?;
    Ok(DMatrix::identity(m, m) * linalg::trace(d) - d.transpose())
}
