//! Quasi-degenerate perturbation theory (numerical Schrieffer-Wolff via
//! Loewdin partitioning) for the effective multi-photon couplings, plus an
//! exact cross-check that block-diagonalizes the dressed pair
//! nonperturbatively.
//!
//! Working frame: the qubit eigenbasis with bare energies on the diagonal
//! and the interaction as the off-diagonal perturbation. The order-2 and
//! order-3 expressions are the symmetrized van Vleck forms, Hermitian by
//! construction.

use serde::Serialize;

use crate::eigensolver::{diagonalize, find_dressed_state};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, qubit_frequency, FluxBias, SystemConfig};
use crate::operators::{BasisLabel, OperatorMatrix, ProductBasis};
use crate::spectroscopy::{dispersive_guard, SidebandKind};

/// Couplings below this magnitude are treated as structurally zero when
/// scanning neighbor lists.
const COUPLING_EPS: f64 = 1e-14;

/// Minimum energy denominator in GHz; smaller values abort the series.
pub const MIN_DENOMINATOR: f64 = 1e-6;

/// Gap factor: block states must be separated from every coupled complement
/// state by more than this multiple of the largest off-block coupling.
pub const GAP_FACTOR: f64 = 5.0;

/// Effective coupling kinds: the transverse (R-type) sidebands of the
/// spectroscopy classifier plus the longitudinal (Z-type) photon couplings
/// responsible for the horizontal resonator lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "coupling", rename_all = "snake_case")]
pub enum CouplingKind {
    Zeroth,
    Red { order: u32, mode: usize },
    Blue { order: u32, mode: usize },
    CrossMode { from_mode: usize, to_mode: usize },
    /// Z^(s)_n: connects |g, 0> to |g, s photons in mode n>, no qubit flip.
    ZMode { order: u32, mode: usize },
    /// Z^(2) cross coupling: moves one photon between two modes.
    ZCross { mode_a: usize, mode_b: usize },
}

impl CouplingKind {
    pub fn text(&self) -> String {
        match self {
            CouplingKind::Zeroth => "zeroth".into(),
            CouplingKind::Red { order, mode } => format!("R({order}) mode {mode}"),
            CouplingKind::Blue { order, mode } => format!("blue R({order}) mode {mode}"),
            CouplingKind::CrossMode { from_mode, to_mode } => {
                format!("R cross {from_mode}->{to_mode}")
            }
            CouplingKind::ZMode { order, mode } => format!("Z({order}) mode {mode}"),
            CouplingKind::ZCross { mode_a, mode_b } => format!("Z cross {mode_a}<->{mode_b}"),
        }
    }

    /// Lowest series order at which this coupling is generically nonzero.
    pub fn order(&self) -> u32 {
        match self {
            CouplingKind::Zeroth => 1,
            CouplingKind::Red { order, .. } | CouplingKind::Blue { order, .. } => *order,
            CouplingKind::CrossMode { .. } => 2,
            CouplingKind::ZMode { order, .. } => *order,
            CouplingKind::ZCross { .. } => 2,
        }
    }
}

impl From<SidebandKind> for CouplingKind {
    fn from(kind: SidebandKind) -> Self {
        match kind {
            SidebandKind::Zeroth | SidebandKind::Other => CouplingKind::Zeroth,
            SidebandKind::Red { order, mode } => CouplingKind::Red { order, mode },
            SidebandKind::Blue { order, mode } => CouplingKind::Blue { order, mode },
            SidebandKind::CrossMode { from_mode, to_mode } => {
                CouplingKind::CrossMode { from_mode, to_mode }
            }
        }
    }
}

/// Bare-state pair realizing a coupling kind.
pub fn coupling_pair(
    basis: &ProductBasis,
    kind: &CouplingKind,
) -> Result<(BasisLabel, BasisLabel)> {
    let zeros = vec![0usize; basis.truncations.len()];
    let pair = match kind {
        CouplingKind::Zeroth => Some((
            BasisLabel::new(0, zeros.clone()),
            BasisLabel::new(1, zeros),
        )),
        CouplingKind::Red { order, mode } => basis
            .n_photon_label(*mode, *order as usize, 0)
            .map(|from| (from, BasisLabel::new(1, zeros))),
        CouplingKind::Blue { order, mode } => basis
            .n_photon_label(*mode, *order as usize, 1)
            .map(|to| (BasisLabel::new(0, zeros), to)),
        CouplingKind::CrossMode { from_mode, to_mode } => match (
            basis.single_photon_label(*from_mode, 0),
            basis.single_photon_label(*to_mode, 1),
        ) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        },
        CouplingKind::ZMode { order, mode } => basis
            .n_photon_label(*mode, *order as usize, 0)
            .map(|to| (BasisLabel::new(0, zeros), to)),
        CouplingKind::ZCross { mode_a, mode_b } => match (
            basis.single_photon_label(*mode_a, 0),
            basis.single_photon_label(*mode_b, 0),
        ) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        },
    };
    pair.ok_or_else(|| Error::UnsupportedKind(kind.text()))
}

/// One effective coupling evaluated at one flux point, excluding the pump
/// amplitude factor.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveCoupling {
    #[serde(flatten)]
    pub kind: CouplingKind,
    pub order: u32,
    /// Coupling magnitude in GHz (pump amplitude factor excluded).
    pub value: f64,
    /// Flux offset in mPhi0 this was evaluated at.
    pub flux: f64,
    /// Detunings Delta_n^-/+ = nu_q -/+ nu_n entering the series, for each
    /// mode involved.
    pub detunings: Vec<f64>,
}

struct Partition {
    energies: Vec<f64>,
    /// Nonzero off-diagonal couplings per row: (column, value).
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Partition {
    fn new(h: &OperatorMatrix) -> Self {
        let n = h.dim();
        let mut energies = Vec::with_capacity(n);
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            energies.push(h[(i, i)]);
            for j in 0..n {
                if i != j && h[(i, j)].abs() > COUPLING_EPS {
                    neighbors[i].push((j, h[(i, j)]));
                }
            }
        }
        Self { energies, neighbors }
    }

    fn coupling(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    fn denominator(&self, i: usize, k: usize) -> Result<f64> {
        let d = self.energies[i] - self.energies[k];
        if d.abs() < MIN_DENOMINATOR {
            return Err(Error::DenominatorUnderflow {
                i,
                j: k,
                min: MIN_DENOMINATOR,
            });
        }
        Ok(d)
    }
}

/// Effective Hamiltonian element between bare block states `i` and `j` at a
/// single series order (1, 2 or 3). Order 1 is the bare element itself;
/// order 2 uses symmetrized energy denominators; order 3 is the standard
/// third-order quasi-degenerate expression with double sums over the
/// complement.
pub fn lowdin_effective_element(
    h: &OperatorMatrix,
    block: &[usize],
    i: usize,
    j: usize,
    order: u32,
) -> Result<f64> {
    if !block.contains(&i) || !block.contains(&j) {
        return Err(Error::InvalidParameter(
            "element indices must belong to the block".into(),
        ));
    }
    let part = Partition::new(h);
    let in_block = |k: usize| block.contains(&k);

    // gap guard: every coupled (block, complement) pair must be separated
    // by more than GAP_FACTOR times the largest off-block coupling
    let mut max_offblock = 0.0_f64;
    for &m in block {
        for &(k, v) in &part.neighbors[m] {
            if !in_block(k) {
                max_offblock = max_offblock.max(v.abs());
            }
        }
    }
    let required = GAP_FACTOR * max_offblock;
    let mut violations: Vec<(usize, usize, f64)> = Vec::new();
    for &m in block {
        for &(k, _) in &part.neighbors[m] {
            if !in_block(k) {
                let gap = (part.energies[m] - part.energies[k]).abs();
                if gap <= required {
                    violations.push((m, k, gap));
                }
            }
        }
    }
    if !violations.is_empty() {
        violations.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
        return Err(Error::GapViolation {
            pairs: violations,
            required,
        });
    }

    match order {
        1 => Ok(if i == j {
            part.energies[i]
        } else {
            part.coupling(i, j)
        }),
        2 => {
            let mut total = 0.0;
            for &(k, vik) in &part.neighbors[i] {
                if in_block(k) {
                    continue;
                }
                let vkj = part.coupling(k, j);
                if vkj == 0.0 {
                    continue;
                }
                let di = part.denominator(i, k)?;
                let dj = part.denominator(j, k)?;
                total += 0.5 * vik * vkj * (1.0 / di + 1.0 / dj);
            }
            Ok(total)
        }
        3 => {
            let mut total = 0.0;
            // + 1/2 sum_{l,l' in B} V_il V_ll' V_l'j [ 1/((E_i-E_l)(E_i-E_l'))
            //                                        + 1/((E_j-E_l)(E_j-E_l')) ]
            for &(l, vil) in &part.neighbors[i] {
                if in_block(l) {
                    continue;
                }
                for &(lp, vllp) in &part.neighbors[l] {
                    if in_block(lp) {
                        continue;
                    }
                    let vlpj = part.coupling(lp, j);
                    if vlpj == 0.0 {
                        continue;
                    }
                    let di_l = part.denominator(i, l)?;
                    let di_lp = part.denominator(i, lp)?;
                    let dj_l = part.denominator(j, l)?;
                    let dj_lp = part.denominator(j, lp)?;
                    total += 0.5
                        * vil
                        * vllp
                        * vlpj
                        * (1.0 / (di_l * di_lp) + 1.0 / (dj_l * dj_lp));
                }
            }
            // - 1/2 sum_{l in B, m in A} [ V_il V_lm V_mj / ((E_m-E_l)(E_j-E_l))
            //                            + V_im V_ml V_lj / ((E_m-E_l)(E_i-E_l)) ]
            for &m in block {
                for &(l, vml) in &part.neighbors[m] {
                    if in_block(l) {
                        continue;
                    }
                    let dm_l = part.denominator(m, l)?;
                    let vil = part.coupling(i, l);
                    let vmj = part.coupling(m, j);
                    if vil != 0.0 && vmj != 0.0 {
                        let dj_l = part.denominator(j, l)?;
                        total -= 0.5 * vil * vml * vmj / (dm_l * dj_l);
                    }
                    let vim = part.coupling(i, m);
                    let vlj = part.coupling(l, j);
                    if vim != 0.0 && vlj != 0.0 {
                        let di_l = part.denominator(i, l)?;
                        total -= 0.5 * vim * vml * vlj / (dm_l * di_l);
                    }
                }
            }
            Ok(total)
        }
        _ => Err(Error::InvalidParameter(format!(
            "series order {order} not supported (1..3)"
        ))),
    }
}

/// Detunings Delta^- = nu_q - nu_n and Delta^+ = nu_q + nu_n for every mode
/// a coupling kind involves.
fn detunings_for(config: &SystemConfig, flux: FluxBias, kind: &CouplingKind) -> Vec<f64> {
    let nu_q = qubit_frequency(&config.qubit, flux);
    let modes: Vec<usize> = match kind {
        CouplingKind::Zeroth => vec![],
        CouplingKind::Red { mode, .. }
        | CouplingKind::Blue { mode, .. }
        | CouplingKind::ZMode { mode, .. } => vec![*mode],
        CouplingKind::CrossMode { from_mode, to_mode } => vec![*from_mode, *to_mode],
        CouplingKind::ZCross { mode_a, mode_b } => vec![*mode_a, *mode_b],
    };
    let mut out = Vec::new();
    for idx in modes {
        if let Some(m) = config.mode(idx) {
            out.push(nu_q - m.omega);
            out.push(nu_q + m.omega);
        }
    }
    out
}

/// Loewdin effective coupling for the bare-state pair named by `kind`, at
/// the minimal order where it is generically nonzero.
pub fn effective_sideband_coupling(
    config: &SystemConfig,
    flux: FluxBias,
    kind: &CouplingKind,
) -> Result<EffectiveCoupling> {
    dispersive_guard(config, flux)?;
    let h = build_hamiltonian(config, flux)?;
    let basis = h.basis().expect("hamiltonian carries its basis").clone();
    let (from, to) = coupling_pair(&basis, kind)?;
    let i = basis.index_of(&from).expect("pair label in range");
    let j = basis.index_of(&to).expect("pair label in range");
    let order = kind.order();
    let value = lowdin_effective_element(&h, &[i, j], i, j, order)?;
    Ok(EffectiveCoupling {
        kind: *kind,
        order,
        value: value.abs(),
        flux: flux.0,
        detunings: detunings_for(config, flux, kind),
    })
}

/// Exact effective coupling for the pair, from the full diagonalization:
/// project the two dressed eigenstates onto the bare pair subspace,
/// symmetrically orthonormalize (the nonperturbative Schrieffer-Wolff
/// block), and read off the off-diagonal element.
pub fn exact_block_coupling(
    config: &SystemConfig,
    flux: FluxBias,
    kind: &CouplingKind,
) -> Result<f64> {
    dispersive_guard(config, flux)?;
    let h = build_hamiltonian(config, flux)?;
    let dec = diagonalize(&h)?;
    let basis = h.basis().expect("hamiltonian carries its basis");
    let (from, to) = coupling_pair(basis, kind)?;
    let i = basis.index_of(&from).expect("pair label in range");
    let j = basis.index_of(&to).expect("pair label in range");
    let (ki, _) = find_dressed_state(&dec, &from)?;
    let (kf, _) = find_dressed_state(&dec, &to)?;

    // overlap matrix M[row: bare i/j][col: dressed ki/kf]
    let m = [
        [dec.vector(ki)[i], dec.vector(kf)[i]],
        [dec.vector(ki)[j], dec.vector(kf)[j]],
    ];
    let u = polar_orthogonal_2x2(m).ok_or_else(|| Error::AmbiguousLabel {
        label: format!(
            "{} / {}",
            from.text(basis.frame),
            to.text(basis.frame)
        ),
        best: 0.0,
        runner_up: 0.0,
    })?;
    let (ei, ef) = (dec.value(ki), dec.value(kf));
    // H_eff = U diag(E) U^T; off-diagonal element couples the bare pair
    Ok((u[0][0] * ei * u[1][0] + u[0][1] * ef * u[1][1]).abs())
}

/// Closest orthogonal matrix to a 2x2 matrix (polar factor
/// U = M (M^T M)^{-1/2}); `None` if M is singular to working precision.
fn polar_orthogonal_2x2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    // S = M^T M, symmetric positive semi-definite
    let s00 = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let s11 = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let s01 = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    // eigen-decomposition of S
    let tr = s00 + s11;
    let det = s00 * s11 - s01 * s01;
    if det <= 1e-24 {
        return None;
    }
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let (l0, l1) = (tr / 2.0 - disc, tr / 2.0 + disc);
    // eigenvectors of S
    let (c, s) = if s01.abs() < 1e-300 {
        if s00 <= s11 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let t = (l0 - s00) / s01;
        let norm = (1.0 + t * t).sqrt();
        (1.0 / norm, t / norm)
    };
    // S^{-1/2} = R diag(1/sqrt(l)) R^T with R = [[c, -s], [s, c]]
    let (w0, w1) = (1.0 / l0.sqrt(), 1.0 / l1.sqrt());
    let inv_sqrt = [
        [c * c * w0 + s * s * w1, c * s * (w0 - w1)],
        [c * s * (w0 - w1), s * s * w0 + c * c * w1],
    ];
    let mut u = [[0.0; 2]; 2];
    for r in 0..2 {
        for cidx in 0..2 {
            u[r][cidx] = m[r][0] * inv_sqrt[0][cidx] + m[r][1] * inv_sqrt[1][cidx];
        }
    }
    Some(u)
}

/// Relative discrepancy between the Loewdin coupling and the exact
/// block-diagonalization coupling. Defined as zero when both vanish.
pub fn validate_against_exact(
    config: &SystemConfig,
    flux: FluxBias,
    kind: &CouplingKind,
) -> Result<f64> {
    let approx = effective_sideband_coupling(config, flux, kind)?.value;
    let exact = exact_block_coupling(config, flux, kind)?;
    if approx < 1e-14 && exact < 1e-14 {
        return Ok(0.0);
    }
    Ok((approx - exact).abs() / exact.max(1e-14))
}
