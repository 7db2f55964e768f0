//! Transition-line enumeration, sideband classification, dressed drive
//! matrix elements, and synthetic 2D spectroscopy maps.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigensolver::{diagonalize, dressed_label, find_dressed_state, EigenDecomposition};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_hamiltonian, drive_operator_in, qubit_frequency, FluxBias, SystemConfig,
};
use crate::operators::{BasisLabel, ModeSpec, OperatorMatrix, ProductBasis, QubitFrame};

/// Highest sideband order searched by the classifier.
pub const MAX_SIDEBAND_ORDER: u32 = 3;

/// Default classification tolerance in GHz.
pub const DEFAULT_CLASSIFY_TOL: f64 = 0.02;

/// Dispersive-regime factor: labels are trusted when |nu_q - nu_n| > 5 g_n.
pub const DISPERSIVE_FACTOR: f64 = 5.0;

/// What a spectral line is, in terms of the pump resonance conditions
/// omega_d = omega_q -/+ s*omega_n and the cross-mode condition
/// omega_d = omega_q - (omega_m - omega_n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SidebandKind {
    Zeroth,
    Red { order: u32, mode: usize },
    Blue { order: u32, mode: usize },
    /// Photon moves out of `from_mode` into `to_mode` while the qubit flips.
    CrossMode { from_mode: usize, to_mode: usize },
    Other,
}

impl SidebandKind {
    pub fn text(&self) -> String {
        match self {
            SidebandKind::Zeroth => "zeroth".into(),
            SidebandKind::Red { order, mode } => format!("red({order}) mode {mode}"),
            SidebandKind::Blue { order, mode } => format!("blue({order}) mode {mode}"),
            SidebandKind::CrossMode { from_mode, to_mode } => {
                format!("cross-mode {from_mode}->{to_mode}")
            }
            SidebandKind::Other => "other".into(),
        }
    }
}

/// Classification plus a degeneracy flag: when a second resonance condition
/// also matches within tolerance (the red(2)/cross-mode near-coincidence of
/// this device), both labels are reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    #[serde(flatten)]
    pub kind: SidebandKind,
    pub degenerate_with: Option<SidebandKind>,
}

impl Classification {
    pub fn other() -> Self {
        Self {
            kind: SidebandKind::Other,
            degenerate_with: None,
        }
    }
}

/// Inputs the classifier needs: the bare qubit frequency at the working
/// flux, the mode table, and the matching tolerance.
#[derive(Debug, Clone)]
pub struct SidebandContext {
    pub qubit_freq: f64,
    pub modes: Vec<ModeSpec>,
    pub tolerance: f64,
}

impl SidebandContext {
    pub fn new(config: &SystemConfig, flux: FluxBias, tolerance: f64) -> Self {
        Self {
            qubit_freq: qubit_frequency(&config.qubit, flux),
            modes: config.modes.clone(),
            tolerance,
        }
    }

    fn mode_freq(&self, index: usize) -> Option<f64> {
        self.modes.iter().find(|m| m.index == index).map(|m| m.omega)
    }
}

/// Predicted pump frequency of a sideband kind, from the resonance
/// conditions; `None` for `Other`.
pub fn sideband_frequency(kind: &SidebandKind, ctx: &SidebandContext) -> Option<f64> {
    let nu_q = ctx.qubit_freq;
    match kind {
        SidebandKind::Zeroth => Some(nu_q),
        SidebandKind::Red { order, mode } => {
            Some(nu_q - *order as f64 * ctx.mode_freq(*mode)?)
        }
        SidebandKind::Blue { order, mode } => {
            Some(nu_q + *order as f64 * ctx.mode_freq(*mode)?)
        }
        SidebandKind::CrossMode { from_mode, to_mode } => {
            Some(nu_q - (ctx.mode_freq(*from_mode)? - ctx.mode_freq(*to_mode)?))
        }
        SidebandKind::Other => None,
    }
}

/// All resonance conditions in the fixed priority order: zeroth, red by
/// ascending order (modes ascending within an order), blue likewise, then
/// cross-mode pairs.
fn candidate_kinds(ctx: &SidebandContext) -> Vec<SidebandKind> {
    let mut kinds = vec![SidebandKind::Zeroth];
    for order in 1..=MAX_SIDEBAND_ORDER {
        for m in &ctx.modes {
            kinds.push(SidebandKind::Red {
                order,
                mode: m.index,
            });
        }
    }
    for order in 1..=MAX_SIDEBAND_ORDER {
        for m in &ctx.modes {
            kinds.push(SidebandKind::Blue {
                order,
                mode: m.index,
            });
        }
    }
    for a in &ctx.modes {
        for b in &ctx.modes {
            if a.index != b.index {
                kinds.push(SidebandKind::CrossMode {
                    from_mode: a.index,
                    to_mode: b.index,
                });
            }
        }
    }
    kinds
}

/// Match a line frequency against the sideband resonance conditions. The
/// first matching condition in priority order names the line; any further
/// match sets the degeneracy flag.
pub fn classify_sideband(line_freq: f64, ctx: &SidebandContext) -> Classification {
    let mut matches = candidate_kinds(ctx).into_iter().filter(|kind| {
        sideband_frequency(kind, ctx)
            .map(|f| (line_freq - f).abs() < ctx.tolerance)
            .unwrap_or(false)
    });
    match matches.next() {
        Some(kind) => Classification {
            kind,
            degenerate_with: matches.next(),
        },
        None => Classification::other(),
    }
}

/// One endpoint of a transition: eigenstate index plus its dressed label.
#[derive(Debug, Clone, Serialize)]
pub struct StateRef {
    pub index: usize,
    pub label: BasisLabel,
    pub label_text: String,
    pub overlap: f64,
    pub ambiguous: bool,
}

fn state_ref(dec: &EigenDecomposition, k: usize) -> StateRef {
    let dl = dressed_label(dec, k);
    let frame = dec.basis().map(|b| b.frame).unwrap_or(QubitFrame::Eigen);
    StateRef {
        index: k,
        label_text: dl.label.text(frame),
        label: dl.label,
        overlap: dl.overlap,
        ambiguous: dl.ambiguous,
    }
}

/// One spectroscopic line out of the ground state.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionLine {
    pub from: StateRef,
    pub to: StateRef,
    /// E_to - E_from in GHz.
    pub frequency: f64,
    /// |<to| tau_z |from>| between dressed states, dimensionless in [0, 1].
    pub drive_element: f64,
    pub classification: Classification,
}

/// |<j| drive |i>|, computed in a canonical index order so that the i<->j
/// symmetry holds bit for bit.
pub fn drive_element(dec: &EigenDecomposition, drive: &OperatorMatrix, i: usize, j: usize) -> f64 {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    let dv = drive.matvec(dec.vector(lo));
    dec.vector(hi)
        .iter()
        .zip(&dv)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .abs()
}

/// Transitions from the ground state to the next `max_lines` eigenstates,
/// sorted by frequency, with drive elements and sideband classification.
pub fn lines_from_ground(
    dec: &EigenDecomposition,
    drive: &OperatorMatrix,
    ctx: &SidebandContext,
    max_lines: usize,
) -> Vec<TransitionLine> {
    let n = dec.dim();
    let count = max_lines.min(n - 1);
    let dv0 = drive.matvec(dec.vector(0));
    let ground = state_ref(dec, 0);
    (1..=count)
        .map(|k| {
            let freq = dec.value(k) - dec.value(0);
            let element = dec
                .vector(k)
                .iter()
                .zip(&dv0)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs();
            TransitionLine {
                from: ground.clone(),
                to: state_ref(dec, k),
                frequency: freq,
                drive_element: element,
                classification: classify_sideband(freq, ctx),
            }
        })
        .collect()
}

/// Bare-state pair realizing a sideband kind, e.g. blue(1) on mode 1 is
/// (|g00>, |e10>) and the cross-mode transition is (|g01>, |e10>).
pub fn sideband_pair(
    basis: &ProductBasis,
    kind: &SidebandKind,
) -> Result<(BasisLabel, BasisLabel)> {
    let zeros = vec![0usize; basis.truncations.len()];
    let pair = match kind {
        SidebandKind::Zeroth => Some((
            BasisLabel::new(0, zeros.clone()),
            BasisLabel::new(1, zeros),
        )),
        SidebandKind::Red { order, mode } => basis
            .n_photon_label(*mode, *order as usize, 0)
            .map(|from| (from, BasisLabel::new(1, zeros))),
        SidebandKind::Blue { order, mode } => basis
            .n_photon_label(*mode, *order as usize, 1)
            .map(|to| (BasisLabel::new(0, zeros), to)),
        SidebandKind::CrossMode { from_mode, to_mode } => {
            match (
                basis.single_photon_label(*from_mode, 0),
                basis.single_photon_label(*to_mode, 1),
            ) {
                (Some(from), Some(to)) => Some((from, to)),
                _ => None,
            }
        }
        SidebandKind::Other => None,
    };
    pair.ok_or_else(|| Error::UnsupportedKind(kind.text()))
}

/// Check the dispersive-regime precondition |nu_q - nu_n| > 5 g_n for every
/// mode with nonzero coupling.
pub fn dispersive_guard(config: &SystemConfig, flux: FluxBias) -> Result<()> {
    let nu_q = qubit_frequency(&config.qubit, flux);
    for m in &config.modes {
        let detuning = (nu_q - m.omega).abs();
        let required = DISPERSIVE_FACTOR * m.coupling_g;
        if detuning <= required {
            return Err(Error::DispersiveGuard {
                mode: m.index,
                detuning,
                required,
            });
        }
    }
    Ok(())
}

/// Drive matrix element |<dressed target| tau_z |dressed source>| for the
/// bare-state pair named by a sideband kind. This is the drive-assisted
/// transition amplitude of the line, up to the pump amplitude factor.
pub fn sideband_matrix_element(
    config: &SystemConfig,
    flux: FluxBias,
    kind: &SidebandKind,
) -> Result<f64> {
    dispersive_guard(config, flux)?;
    let h = build_hamiltonian(config, flux)?;
    let dec = diagonalize(&h)?;
    let drive = drive_operator_in(config, flux, QubitFrame::Eigen)?;
    let basis = h.basis().expect("hamiltonian carries its basis");
    let (from, to) = sideband_pair(basis, kind)?;
    let (ki, _) = find_dressed_state(&dec, &from)?;
    let (kf, _) = find_dressed_state(&dec, &to)?;
    Ok(drive_element(&dec, &drive, ki, kf))
}

/// Frequency window for map rendering.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FreqRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl FreqRange {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }
}

/// Synthetic pump-probe map: summed Lorentzian line strengths over
/// (flux, pump frequency).
#[derive(Debug, Clone, Serialize)]
pub struct SpectroscopyMap {
    /// Flux axis in mPhi0 (columns).
    pub flux_axis: Vec<f64>,
    /// Pump frequency axis in GHz (rows).
    pub freq_axis: Vec<f64>,
    /// intensity[row][col] at (freq_axis[row], flux_axis[col]), in units of
    /// the squared pump amplitude.
    pub intensity: Vec<Vec<f64>>,
}

/// Peak-normalized Lorentzian with half width `hwhm`.
fn lorentzian(detune: f64, hwhm: f64) -> f64 {
    let h2 = hwhm * hwhm;
    h2 / (detune * detune + h2)
}

/// Render the spectroscopy map over the config flux sweep. Every transition
/// out of the ground state contributes drive_element^2 * Omega_d^2 times a
/// Lorentzian of half width `linewidth`; photon-creating |g00> -> |g,1_n>
/// lines enter with their own (Z-type) drive elements and produce the
/// horizontal resonator lines.
pub fn render_map(
    config: &SystemConfig,
    freq_range: FreqRange,
    linewidth: f64,
) -> Result<SpectroscopyMap> {
    if !(linewidth > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "linewidth must be positive, got {linewidth}"
        )));
    }
    config.validate()?;
    let flux_points = config.flux_sweep.points();
    let freqs = freq_range.points();
    let strength = config.drive_amplitude * config.drive_amplitude;

    let columns: Result<Vec<Vec<f64>>> = flux_points
        .par_iter()
        .map(|&flux| {
            let h = build_hamiltonian(config, flux)?;
            let dec = diagonalize(&h)?;
            let drive = drive_operator_in(config, flux, QubitFrame::Eigen)?;
            let ctx = SidebandContext::new(config, flux, DEFAULT_CLASSIFY_TOL);
            let lines = lines_from_ground(&dec, &drive, &ctx, dec.dim() - 1);
            let col: Vec<f64> = freqs
                .iter()
                .map(|&f| {
                    lines
                        .iter()
                        .map(|line| {
                            strength
                                * line.drive_element
                                * line.drive_element
                                * lorentzian(f - line.frequency, linewidth)
                        })
                        .sum()
                })
                .collect();
            Ok(col)
        })
        .collect();
    let columns = columns?;

    // transpose columns into [freq][flux]
    let mut intensity = vec![vec![0.0; flux_points.len()]; freqs.len()];
    for (ci, col) in columns.iter().enumerate() {
        for (fi, &v) in col.iter().enumerate() {
            intensity[fi][ci] = v;
        }
    }
    Ok(SpectroscopyMap {
        flux_axis: flux_points.iter().map(|f| f.0).collect(),
        freq_axis: freqs,
        intensity,
    })
}

impl SpectroscopyMap {
    /// CSV layout: header row holds the flux values; each data row starts
    /// with the pump frequency followed by the intensities.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.flux_axis.iter().map(|v| v.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (fi, freq) in self.freq_axis.iter().enumerate() {
            let mut row = Vec::with_capacity(1 + self.flux_axis.len());
            row.push(freq.to_string());
            for v in &self.intensity[fi] {
                row.push(v.to_string());
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Companion gnuplot script; `csv_name` is the map CSV written next to it.
    pub fn gnuplot_script(&self, csv_name: &str) -> String {
        format!(
            "# gnuplot script for the spectroscopy map\n\
             # prepend the column count so the CSV parses as a nonuniform matrix\n\
             system(\"awk 'NR==1{{print 0 \\\",\\\" $0}} NR>1{{print}}' {csv} > {csv}.matrix\")\n\
             set datafile separator ','\n\
             set view map\n\
             set xlabel 'flux offset (mPhi0)'\n\
             set ylabel 'pump frequency (GHz)'\n\
             set cblabel 'intensity (Omega_d^2 units)'\n\
             splot '{csv}.matrix' matrix nonuniform with image notitle\n",
            csv = csv_name
        )
    }
}
