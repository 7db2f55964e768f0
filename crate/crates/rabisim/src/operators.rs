//! Truncated bosonic and qubit operators on the multi-mode product space.
//!
//! Everything here is real: in the persistent-current basis the qubit
//! operators tau_z, tau_x and the mode quadratures (a + a^dag) all have real
//! matrix elements, and the rotation to the qubit eigenbasis is a real
//! orthogonal transformation. Hamiltonians assembled from these blocks are
//! therefore real symmetric matrices.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Parameters of one resonator mode. Frequencies and couplings are linear
/// frequencies in GHz (omega/2pi), photon cutoff `truncation` is the number
/// of Fock states kept (occupations 0..truncation-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Mode label n (1 for lambda/2, 2 for lambda, 3 for 3*lambda/2).
    pub index: usize,
    /// Mode frequency nu_n = omega_n/2pi in GHz.
    pub omega: f64,
    /// Coupling strength g_n/2pi in GHz.
    pub coupling_g: f64,
    /// Fock cutoff N_max >= 1.
    pub truncation: usize,
}

impl ModeSpec {
    pub fn new(index: usize, omega: f64, coupling_g: f64, truncation: usize) -> Self {
        Self {
            index,
            omega,
            coupling_g,
            truncation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation < 1 {
            return Err(Error::InvalidTruncation);
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mode {} frequency must be positive, got {}",
                self.index, self.omega
            )));
        }
        if !(self.coupling_g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mode {} coupling must be non-negative, got {}",
                self.index, self.coupling_g
            )));
        }
        Ok(())
    }
}

/// Which two-level basis the qubit slot of a product basis refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitFrame {
    /// Persistent-current basis, labels written as circulating currents.
    PersistentCurrent,
    /// Qubit energy eigenbasis, labels written g (index 0) / e (index 1).
    Eigen,
}

/// One bare product state: qubit index (0 or 1) plus per-mode occupation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisLabel {
    pub qubit: usize,
    pub photons: Vec<usize>,
}

impl BasisLabel {
    pub fn new(qubit: usize, photons: Vec<usize>) -> Self {
        Self { qubit, photons }
    }

    /// Text form in a given frame, e.g. `|g01>` or `|e,10,0>` when any
    /// occupation needs more than one digit.
    pub fn text(&self, frame: QubitFrame) -> String {
        let q = match (frame, self.qubit) {
            (QubitFrame::Eigen, 0) => "g",
            (QubitFrame::Eigen, _) => "e",
            (QubitFrame::PersistentCurrent, 0) => "\u{21ba}",
            (QubitFrame::PersistentCurrent, _) => "\u{21bb}",
        };
        if self.photons.iter().all(|&n| n < 10) {
            let digits: String = self.photons.iter().map(|n| n.to_string()).collect();
            format!("|{q}{digits}>")
        } else {
            let parts: Vec<String> = self.photons.iter().map(|n| n.to_string()).collect();
            format!("|{q},{}>", parts.join(","))
        }
    }
}

/// Ordered enumeration of the full product basis: qubit slot slowest, then
/// modes in ascending mode-index order, each occupation fastest-last
/// (lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasis {
    pub frame: QubitFrame,
    pub mode_indices: Vec<usize>,
    pub truncations: Vec<usize>,
    labels: Vec<BasisLabel>,
}

impl ProductBasis {
    pub fn new(frame: QubitFrame, modes: &[ModeSpec]) -> Result<Self> {
        let mut mode_indices = Vec::with_capacity(modes.len());
        let mut truncations = Vec::with_capacity(modes.len());
        for m in modes {
            m.validate()?;
            mode_indices.push(m.index);
            truncations.push(m.truncation);
        }
        let mode_states: usize = truncations.iter().product();
        let dim = 2 * mode_states;
        let mut labels = Vec::with_capacity(dim);
        for q in 0..2 {
            for flat in 0..mode_states {
                // mixed-radix decode, last mode fastest
                let mut occ = vec![0usize; truncations.len()];
                let mut rem = flat;
                for (slot, &t) in truncations.iter().enumerate().rev() {
                    occ[slot] = rem % t;
                    rem /= t;
                }
                labels.push(BasisLabel::new(q, occ));
            }
        }
        debug_assert_eq!(labels.len(), dim);
        Ok(Self {
            frame,
            mode_indices,
            truncations,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &BasisLabel {
        &self.labels[index]
    }

    /// Index of a label in the enumeration; `None` when out of range.
    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        if label.qubit > 1 || label.photons.len() != self.truncations.len() {
            return None;
        }
        let mut idx = label.qubit;
        for (n, &t) in label.photons.iter().zip(&self.truncations) {
            if *n >= t {
                return None;
            }
            idx = idx * t + n;
        }
        Some(idx)
    }

    /// Position of a paper mode index (1, 2, 3) within the enabled-mode list.
    pub fn mode_slot(&self, mode_index: usize) -> Option<usize> {
        self.mode_indices.iter().position(|&i| i == mode_index)
    }

    /// Label with a single excitation in the given mode, qubit state `qubit`.
    pub fn single_photon_label(&self, mode_index: usize, qubit: usize) -> Option<BasisLabel> {
        self.n_photon_label(mode_index, 1, qubit)
    }

    /// Label with `n` photons in the given mode, everything else empty.
    pub fn n_photon_label(&self, mode_index: usize, n: usize, qubit: usize) -> Option<BasisLabel> {
        let slot = self.mode_slot(mode_index)?;
        if n >= self.truncations[slot] {
            return None;
        }
        let mut photons = vec![0usize; self.truncations.len()];
        photons[slot] = n;
        Some(BasisLabel::new(qubit, photons))
    }

    pub fn text(&self, index: usize) -> String {
        self.labels[index].text(self.frame)
    }
}

/// Dense real square matrix, row-major, optionally carrying the product
/// basis its rows and columns are enumerated in.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<f64>,
    basis: Option<ProductBasis>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
            basis: None,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "from_rows needs a square layout");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn basis(&self) -> Option<&ProductBasis> {
        self.basis.as_ref()
    }

    pub fn with_basis(mut self, basis: ProductBasis) -> Self {
        assert_eq!(basis.dim(), self.dim, "basis dimension must match matrix");
        self.basis = Some(basis);
        self
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t.basis = self.basis.clone();
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.entries[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let row_b = &other.entries[k * n..(k + 1) * n];
                let row_o = &mut out.entries[i * n..(i + 1) * n];
                for j in 0..n {
                    row_o[j] += aik * row_b[j];
                }
            }
        }
        out.basis = self.basis.clone();
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "matvec dimension mismatch");
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &self.entries[i * n..(i + 1) * n];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        assert_eq!(self.dim, other.dim, "add dimension mismatch");
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += factor * b;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.entries {
            *v *= factor;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        let ab = self.matmul(other);
        let ba = other.matmul(self);
        ab.sub(&ba)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ||A - A^T||_F / ||A||_F, zero for the zero matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut defect = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let d = self[(i, j)] - self[(j, i)];
                defect += 2.0 * d * d;
            }
        }
        defect.sqrt() / norm
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect() <= rel_tol
    }
}

impl Index<(usize, usize)> for OperatorMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for OperatorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl fmt::Display for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            for j in 0..self.dim {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>12.6}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Bosonic annihilation operator on a truncated Fock space:
/// a[N-1, N] = sqrt(N) for N = 1..trunc-1.
pub fn annihilation(trunc: usize) -> Result<OperatorMatrix> {
    if trunc < 1 {
        return Err(Error::InvalidTruncation);
    }
    let mut a = OperatorMatrix::zeros(trunc);
    for n in 1..trunc {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    Ok(a)
}

/// Creation operator, the transpose of [`annihilation`].
pub fn creation(trunc: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(trunc)?.transpose())
}

/// Number operator a^dag a = diag(0, 1, ..., trunc-1).
pub fn number_operator(trunc: usize) -> Result<OperatorMatrix> {
    if trunc < 1 {
        return Err(Error::InvalidTruncation);
    }
    Ok(OperatorMatrix::from_diagonal(
        &(0..trunc).map(|n| n as f64).collect::<Vec<_>>(),
    ))
}

/// Position-like quadrature a + a^dag.
pub fn quadrature(trunc: usize) -> Result<OperatorMatrix> {
    let a = annihilation(trunc)?;
    let mut x = a.transpose();
    x.add_scaled(&a, 1.0);
    Ok(x)
}

/// Two-level operators.
///
/// tau_z, tau_x act in the persistent-current basis where tau_z is diagonal.
/// sigma_z, sigma_x, sigma_+/- act in the qubit eigenbasis ordered (g, e),
/// so sigma_z = diag(-1, +1) and sigma_+ = |e><g| raises the qubit. All are
/// real matrices; sigma_+/- have a single off-diagonal 1 and are only used
/// inside symmetric combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    TauZ,
    TauX,
    SigmaZ,
    SigmaX,
    SigmaPlus,
    SigmaMinus,
}

pub fn pauli(which: Pauli) -> OperatorMatrix {
    let rows: [[f64; 2]; 2] = match which {
        Pauli::TauZ => [[1.0, 0.0], [0.0, -1.0]],
        Pauli::TauX => [[0.0, 1.0], [1.0, 0.0]],
        Pauli::SigmaZ => [[-1.0, 0.0], [0.0, 1.0]],
        Pauli::SigmaX => [[0.0, 1.0], [1.0, 0.0]],
        Pauli::SigmaPlus => [[0.0, 0.0], [1.0, 0.0]],
        Pauli::SigmaMinus => [[0.0, 1.0], [0.0, 0.0]],
    };
    OperatorMatrix::from_rows(&[&rows[0], &rows[1]])
}

/// Kronecker product, row-major, first factor slowest.
pub fn kron(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let mut out = OperatorMatrix::zeros(n);
    for ia in 0..na {
        for ja in 0..na {
            let va = a[(ia, ja)];
            if va == 0.0 {
                continue;
            }
            for ib in 0..nb {
                for jb in 0..nb {
                    let vb = b[(ib, jb)];
                    if vb != 0.0 {
                        out[(ia * nb + ib, ja * nb + jb)] = va * vb;
                    }
                }
            }
        }
    }
    out
}

/// The multi-mode product space qubit (x) mode_1 (x) ... in ascending mode
/// order. Factory for embedded operators with matching basis metadata.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    pub frame: QubitFrame,
    pub modes: Vec<ModeSpec>,
}

impl ProductSpace {
    pub fn new(frame: QubitFrame, modes: &[ModeSpec]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("at least one mode required".into()));
        }
        let mut modes = modes.to_vec();
        modes.sort_by_key(|m| m.index);
        for m in &modes {
            m.validate()?;
        }
        Ok(Self { frame, modes })
    }

    pub fn dim(&self) -> usize {
        2 * self.modes.iter().map(|m| m.truncation).product::<usize>()
    }

    pub fn basis(&self) -> ProductBasis {
        ProductBasis::new(self.frame, &self.modes).expect("modes validated at construction")
    }

    /// Kronecker product over all slots. `ops[0]` is the qubit factor,
    /// `ops[1..]` the mode factors in ascending mode order; `None` means
    /// identity. Factor dimensions must match the declared truncations.
    pub fn kron_embed(&self, ops: &[Option<&OperatorMatrix>]) -> Result<OperatorMatrix> {
        if ops.len() != 1 + self.modes.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "expected {} factors (qubit + {} modes), got {}",
                    1 + self.modes.len(),
                    self.modes.len(),
                    ops.len()
                ),
            });
        }
        let mut acc = match ops[0] {
            Some(q) => {
                if q.dim() != 2 {
                    return Err(Error::DimensionMismatch {
                        context: format!("qubit factor must be 2x2, got {}x{0}", q.dim()),
                    });
                }
                q.clone()
            }
            None => OperatorMatrix::identity(2),
        };
        for (slot, mode) in self.modes.iter().enumerate() {
            let factor = match ops[slot + 1] {
                Some(m) => {
                    if m.dim() != mode.truncation {
                        return Err(Error::DimensionMismatch {
                            context: format!(
                                "mode {} factor is {}x{0}, truncation is {}",
                                mode.index,
                                m.dim(),
                                mode.truncation
                            ),
                        });
                    }
                    m.clone()
                }
                None => OperatorMatrix::identity(mode.truncation),
            };
            acc = kron(&acc, &factor);
        }
        Ok(acc.with_basis(self.basis()))
    }

    /// Qubit operator tensored with identities on every mode.
    pub fn embed_qubit(&self, op: &OperatorMatrix) -> Result<OperatorMatrix> {
        let mut ops: Vec<Option<&OperatorMatrix>> = vec![None; 1 + self.modes.len()];
        ops[0] = Some(op);
        self.kron_embed(&ops)
    }

    /// Single-mode operator (by paper mode index) tensored with identities.
    pub fn embed_mode(&self, mode_index: usize, op: &OperatorMatrix) -> Result<OperatorMatrix> {
        let slot = self
            .modes
            .iter()
            .position(|m| m.index == mode_index)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {mode_index} not enabled")))?;
        let mut ops: Vec<Option<&OperatorMatrix>> = vec![None; 1 + self.modes.len()];
        ops[slot + 1] = Some(op);
        self.kron_embed(&ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn annihilation_rejects_zero_truncation() {
        assert!(matches!(annihilation(0), Err(Error::InvalidTruncation)));
    }

    #[test]
    fn annihilation_trunc_one_is_zero() {
        let a = annihilation(1).unwrap();
        assert_eq!(a.dim(), 1);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn annihilation_trunc_three_entries() {
        let a = annihilation(3).unwrap();
        assert_eq!(a[(0, 1)], 1.0);
        assert_abs_diff_eq!(a[(1, 2)], 2.0_f64.sqrt(), epsilon = 0.0);
        for i in 0..3 {
            for j in 0..3 {
                if !((i == 0 && j == 1) || (i == 1 && j == 2)) {
                    assert_eq!(a[(i, j)], 0.0, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn number_operator_from_ladder_product() {
        // independent route: multiply a^dag * a straight from the definition
        let a = annihilation(4).unwrap();
        let n = a.transpose().matmul(&a);
        let expected = OperatorMatrix::from_diagonal(&[0.0, 1.0, 2.0, 3.0]);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(n[(i, j)], expected[(i, j)], epsilon = 1e-15);
            }
        }
        assert_eq!(number_operator(4).unwrap(), expected);
    }

    #[test]
    fn commutator_canonical_up_to_top_level() {
        // [a, a^dag] = I except the (trunc-1, trunc-1) corner, which is
        // exactly -(trunc-1) instead of 1.
        let trunc = 6;
        let a = annihilation(trunc).unwrap();
        let adag = a.transpose();
        let c = a.commutator(&adag);
        for i in 0..trunc {
            for j in 0..trunc {
                let expected = if i == j {
                    if i == trunc - 1 {
                        -((trunc - 1) as f64)
                    } else {
                        1.0
                    }
                } else {
                    0.0
                };
                assert_abs_diff_eq!(c[(i, j)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pauli_conventions() {
        let tz = pauli(Pauli::TauZ);
        assert_eq!((tz[(0, 0)], tz[(1, 1)]), (1.0, -1.0));
        let tx = pauli(Pauli::TauX);
        let tx2 = tx.matmul(&tx);
        assert_eq!(tx2, OperatorMatrix::identity(2));
        let mut pm = pauli(Pauli::SigmaPlus);
        pm.add_scaled(&pauli(Pauli::SigmaMinus), 1.0);
        assert_eq!(pm, pauli(Pauli::SigmaX));
    }

    fn two_mode_space() -> ProductSpace {
        ProductSpace::new(
            QubitFrame::Eigen,
            &[ModeSpec::new(1, 3.0, 0.1, 4), ModeSpec::new(3, 9.0, 0.2, 4)],
        )
        .unwrap()
    }

    #[test]
    fn kron_identities() {
        let a = OperatorMatrix::identity(2);
        let b = OperatorMatrix::identity(3);
        assert_eq!(kron(&a, &b), OperatorMatrix::identity(6));
    }

    #[test]
    fn tau_z_embedding_sign() {
        // 2-dim single mode: index of |q=1, n=1> is 1*2+1 = 3
        let space = ProductSpace::new(
            QubitFrame::PersistentCurrent,
            &[ModeSpec::new(1, 3.0, 0.0, 2)],
        )
        .unwrap();
        let op = space.embed_qubit(&pauli(Pauli::TauZ)).unwrap();
        assert_eq!(op[(3, 3)], -1.0);
        assert_eq!(op[(0, 0)], 1.0);
    }

    #[test]
    fn quadrature_element_by_index_lookup() {
        // <g,1,0| (a1 + a1^dag) (x) I |g,0,0> with truncations (4,4)
        let space = two_mode_space();
        let x1 = quadrature(4).unwrap();
        let op = space.embed_mode(1, &x1).unwrap();
        let basis = space.basis();
        let from = basis
            .index_of(&BasisLabel::new(0, vec![0, 0]))
            .expect("|g00> exists");
        let to = basis
            .index_of(&BasisLabel::new(0, vec![1, 0]))
            .expect("|g10> exists");
        assert_abs_diff_eq!(op[(to, from)], 1.0, epsilon = 0.0);
    }

    #[test]
    fn kron_embed_checks_dimensions() {
        let space = two_mode_space();
        let wrong = OperatorMatrix::identity(3);
        assert!(space.embed_mode(1, &wrong).is_err());
        assert!(space.embed_mode(2, &wrong).is_err());
        assert!(space
            .kron_embed(&[None, None])
            .is_err_and(|e| matches!(e, Error::DimensionMismatch { .. })));
    }

    #[test]
    fn hamiltonian_like_assembly_is_symmetric() {
        let space = two_mode_space();
        let x1 = quadrature(4).unwrap();
        let mut h = space.embed_qubit(&pauli(Pauli::SigmaZ)).unwrap().scaled(3.0);
        h.add_scaled(&space.embed_mode(1, &x1).unwrap(), 0.3);
        assert_eq!(h.symmetry_defect(), 0.0);
    }

    proptest! {
        #[test]
        fn basis_enumeration_is_a_bijection(t1 in 1usize..6, t2 in 1usize..6, q in 0usize..2) {
            let modes = [ModeSpec::new(1, 3.0, 0.1, t1), ModeSpec::new(3, 9.0, 0.2, t2)];
            let basis = ProductBasis::new(QubitFrame::Eigen, &modes).unwrap();
            prop_assert_eq!(basis.dim(), 2 * t1 * t2);
            // every label maps back to its own index, and all are distinct
            for idx in 0..basis.dim() {
                let label = basis.label(idx).clone();
                prop_assert_eq!(basis.index_of(&label), Some(idx));
            }
            // a specific roundtrip with random occupations
            let label = BasisLabel::new(q, vec![t1 - 1, t2 - 1]);
            let idx = basis.index_of(&label).unwrap();
            prop_assert_eq!(basis.label(idx), &label);
        }

        #[test]
        fn kron_of_symmetric_is_symmetric(n in 2usize..5) {
            let x = quadrature(n).unwrap();
            let k = kron(&x, &x);
            prop_assert_eq!(k.symmetry_defect(), 0.0);
        }
    }
}
