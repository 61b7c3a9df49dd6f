//! Reset-if-leaked target functions, qubit-gate penalties, and extraction of the
//! realised qubit gate and reset state from a sequence isometry.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{isometry, normalize_angle, ExchangeSequence, RilIsometry};
use crate::linalg::{cis, isometry_defect, pauli, phase_distance, polar_unitary, Mat2, C64, ZERO};

/// Tolerance on the unitarity of inputs to [`f_gate`].
pub const UNITARY_TOL: f64 = 1e-6;
/// Largest unitarity defect of the qubit block accepted by [`extract_qubit_gate`].
pub const GATE_DEFECT_TOL: f64 = 1e-4;
/// Largest residual `|5⟩`/`|8⟩` weight accepted by [`extract_reset_state`].
pub const RESET_RESIDUAL_TOL: f64 = 1e-4;
/// `f_total` below which full-precision angles count as a solution.
pub const SOLUTION_THRESHOLD: f64 = 1e-9;
/// Same, for angles printed with six decimals.
pub const PRINTED_THRESHOLD: f64 = 1e-5;

/// Penalty imposed on the gate realised on an unleaked qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GateConstraint {
    None,
    #[default]
    Identity,
    Pauli,
    Clifford,
}

impl GateConstraint {
    pub const ALL: [GateConstraint; 4] = [
        GateConstraint::None,
        GateConstraint::Identity,
        GateConstraint::Pauli,
        GateConstraint::Clifford,
    ];
}

impl fmt::Display for GateConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateConstraint::None => "none",
            GateConstraint::Identity => "identity",
            GateConstraint::Pauli => "pauli",
            GateConstraint::Clifford => "clifford",
        })
    }
}

impl FromStr for GateConstraint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(GateConstraint::None),
            "identity" => Ok(GateConstraint::Identity),
            "pauli" => Ok(GateConstraint::Pauli),
            "clifford" => Ok(GateConstraint::Clifford),
            _ => Err(Error::invalid(format!(
                "unknown gate constraint '{s}' (expected none, identity, pauli or clifford)"
            ))),
        }
    }
}

/// Which reset-if-leaked variant is targeted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RilSpec {
    /// Pin the QA output to `|0_QA⟩`, so the ancilla flag is reliable.
    pub flaggable: bool,
    pub gate: GateConstraint,
}

impl RilSpec {
    pub fn new(flaggable: bool, gate: GateConstraint) -> Self {
        RilSpec { flaggable, gate }
    }
}

/// QA output `cos(γ/2)|0_QA⟩ + e^{iφ} sin(γ/2)|1_QA⟩` undone before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QaReversal {
    pub phi: f64,
    pub gamma: f64,
}

impl QaReversal {
    pub const NONE: QaReversal = QaReversal { phi: 0.0, gamma: 0.0 };

    pub fn new(phi: f64, gamma: f64) -> Self {
        QaReversal { phi, gamma }
    }

    pub fn normalized(&self) -> Self {
        QaReversal {
            phi: normalize_angle(self.phi),
            gamma: normalize_angle(self.gamma),
        }
    }
}

/// State `α|0_Q⟩ + β|1_Q⟩` a leaked qubit is reset into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetState {
    /// real and nonnegative
    pub alpha: C64,
    pub beta: C64,
    /// polar angle in `[0, π]`
    pub theta_bloch: f64,
    /// azimuth in `[0, 2π)`
    pub phi_bloch: f64,
}

impl ResetState {
    /// Build from amplitudes on `|6⟩, |7⟩`, fixing the global phase so `α ≥ 0`.
    pub fn from_amplitudes(alpha: C64, beta: C64) -> Self {
        let (alpha, beta) = if alpha.norm() > 1e-14 {
            let ph = alpha.conj() / alpha.norm();
            (alpha * ph, beta * ph)
        } else if beta.norm() > 1e-14 {
            (ZERO, C64::new(beta.norm(), 0.0))
        } else {
            (ZERO, ZERO)
        };
        let theta = 2.0 * beta.norm().atan2(alpha.re.max(0.0));
        let phi = if beta.norm() > 1e-14 {
            normalize_angle(beta.arg())
        } else {
            0.0
        };
        ResetState {
            alpha: C64::new(alpha.re, 0.0),
            beta,
            theta_bloch: theta,
            phi_bloch: phi,
        }
    }

    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        ResetState {
            alpha: C64::new((theta / 2.0).cos(), 0.0),
            beta: cis(phi) * (theta / 2.0).sin(),
            theta_bloch: theta,
            phi_bloch: normalize_angle(phi),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    /// Unit Bloch vector.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta_bloch.sin_cos();
        let (sp, cp) = self.phi_bloch.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Euclidean distance between Bloch vectors.
    pub fn bloch_distance(&self, other: &ResetState) -> f64 {
        let a = self.bloch_vector();
        let b = other.bloch_vector();
        (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
    }
}

/// `T^{1/2}` with the QA rotation undone on the `(|0_QA⟩, |1_QA⟩)` row pairs
/// `(|0⟩,|2⟩)` and `(|1⟩,|3⟩)`; row `|4⟩` is untouched.
pub fn reversed_half(iso: &RilIsometry, rev: QaReversal) -> SMatrix<C64, 5, 2> {
    let c = (rev.gamma / 2.0).cos();
    let s = (rev.gamma / 2.0).sin();
    let e = cis(rev.phi);
    let es = e.conj() * s;
    let h = &iso.half;
    let mut out = *h;
    for col in 0..2 {
        for (a, b) in [(0usize, 2usize), (1, 3)] {
            out[(a, col)] = h[(a, col)] * c + h[(b, col)] * es;
            out[(b, col)] = -e * s * h[(a, col)] + h[(b, col)] * c;
        }
    }
    out
}

/// Sum of squared moduli of the eight entries that must vanish for a
/// reset-if-leaked isometry.
pub fn f0_ril(iso: &RilIsometry, rev: QaReversal) -> f64 {
    let h = reversed_half(iso, rev);
    let mut f = 0.0;
    for row in 2..5 {
        for col in 0..2 {
            f += h[(row, col)].norm_sqr();
        }
    }
    f + iso.threehalf[0].norm_sqr() + iso.threehalf[3].norm_sqr()
}

fn pauli_coefficients(m: &Mat2) -> [C64; 4] {
    std::array::from_fn(|n| (m * pauli(n)).trace() * 0.5)
}

fn norm4(c: &[C64; 4]) -> f64 {
    c.iter().map(|x| x.norm_sqr().powi(2)).sum::<f64>().powf(0.25)
}

/// Gate penalty without the unitarity check (used inside `f_total`, where the
/// qubit block is only approximately unitary away from a solution).
fn gate_term(u: &Mat2, kind: GateConstraint) -> f64 {
    let v = match kind {
        GateConstraint::None => 0.0,
        GateConstraint::Identity => 1.0 - (u.trace() * 0.5).norm(),
        GateConstraint::Pauli => 1.0 - norm4(&pauli_coefficients(u)),
        GateConstraint::Clifford => {
            let ud = u.adjoint();
            let cx = pauli_coefficients(&(u * pauli(1) * ud));
            let cz = pauli_coefficients(&(u * pauli(3) * ud));
            2.0 - norm4(&cx) - norm4(&cz)
        }
    };
    v.max(0.0)
}

/// Penalty for `u_q` not being (up to phase) in the class `kind`.
pub fn f_gate(u_q: &Mat2, kind: GateConstraint) -> Result<f64> {
    let defect = isometry_defect(u_q);
    if !(defect <= UNITARY_TOL) {
        return Err(Error::invalid(format!(
            "qubit gate is not unitary (defect {defect:.3e})"
        )));
    }
    Ok(gate_term(u_q, kind))
}

/// `f⁰ + f_gate` for an isometry.
pub fn f_total_iso(iso: &RilIsometry, rev: QaReversal, spec: &RilSpec) -> f64 {
    let rev = if spec.flaggable { QaReversal::NONE } else { rev };
    let h = reversed_half(iso, rev);
    let u = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    f0_ril(iso, rev) + gate_term(&u, spec.gate)
}

/// `f⁰ + f_gate` for a sequence. For flaggable specs `rev` is ignored.
pub fn f_total(seq: &ExchangeSequence, rev: QaReversal, spec: &RilSpec) -> f64 {
    f_total_iso(&isometry(seq), rev, spec)
}

/// The reversal minimising `f⁰` for a fixed isometry.
///
/// Rows 2 and 3 after reversal are `x₁·A + x₂·B` with `A`, `B` the `|0_QA⟩`
/// and `|1_QA⟩` rows and `(x₁, x₂) = (−e^{iφ} sin(γ/2), cos(γ/2))`, so the
/// optimum is the lowest eigenvector of the 2×2 Gram matrix of `A`, `B`.
pub fn best_reversal(iso: &RilIsometry) -> QaReversal {
    let h = &iso.half;
    let mut g = Matrix2::<C64>::zeros();
    for col in 0..2 {
        for (a, b) in [(0usize, 2usize), (1, 3)] {
            let va = [h[(a, col)], h[(b, col)]];
            for i in 0..2 {
                for j in 0..2 {
                    g[(i, j)] += va[i].conj() * va[j];
                }
            }
        }
    }
    let eig = g.symmetric_eigen();
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let x = eig.eigenvectors.column(k);
    let (x1, x2) = (x[0], x[1]);
    let c = x2.norm().min(1.0);
    let gamma = 2.0 * c.acos();
    let phi = if x1.norm() > 1e-14 && c > 1e-14 {
        (-x1 * x2.conj()).arg()
    } else if x1.norm() > 1e-14 {
        (-x1).arg()
    } else {
        0.0
    };
    QaReversal::new(normalize_angle(phi), gamma).normalized()
}

/// Qubit block of the reversed isometry, made exactly unitary by polar decomposition.
pub fn extract_qubit_gate(iso: &RilIsometry, rev: QaReversal) -> Result<Mat2> {
    let h = reversed_half(iso, rev);
    let block = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let defect = isometry_defect(&block);
    if !(defect <= GATE_DEFECT_TOL) {
        return Err(Error::NotASolution(format!(
            "qubit block deviates from unitary by {defect:.3e}"
        )));
    }
    Ok(polar_unitary(&block))
}

/// Phase-insensitive distance between the realised gate and its nearest target.
/// For `Pauli`/`Clifford` the nearest member of the class is used.
pub fn gate_distance(u_q: &Mat2, kind: GateConstraint) -> f64 {
    match kind {
        GateConstraint::None => 0.0,
        GateConstraint::Identity => phase_distance(u_q, &Mat2::identity()),
        GateConstraint::Pauli => (0..4)
            .map(|n| phase_distance(u_q, &pauli(n)))
            .fold(f64::INFINITY, f64::min),
        GateConstraint::Clifford => single_qubit_cliffords()
            .iter()
            .map(|g| phase_distance(u_q, g))
            .fold(f64::INFINITY, f64::min),
    }
}

/// The 24 single-qubit Clifford gates modulo phase.
pub fn single_qubit_cliffords() -> Vec<Mat2> {
    let h = (pauli(1) + pauli(3)) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let s = Matrix2::new(C64::new(1.0, 0.0), ZERO, ZERO, C64::new(0.0, 1.0));
    let mut group: Vec<Mat2> = vec![Mat2::identity()];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for gen in [&h, &s] {
                let cand = gen * g;
                if group.iter().all(|x| phase_distance(&cand, x) > 1e-9) {
                    group.push(cand);
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    group
}

/// Reset state from `T^{3/2}` rows `|6⟩, |7⟩`.
pub fn extract_reset_state(iso: &RilIsometry) -> Result<ResetState> {
    let residual = iso.threehalf[0].norm_sqr() + iso.threehalf[3].norm_sqr();
    if !(residual <= RESET_RESIDUAL_TOL) {
        return Err(Error::NotASolution(format!(
            "leaked input keeps weight {residual:.3e} on |5⟩ and |8⟩"
        )));
    }
    Ok(ResetState::from_amplitudes(iso.threehalf[1], iso.threehalf[2]))
}

/// Everything `verify` reports about one sequence.
#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub spec: RilSpec,
    pub rev: QaReversal,
    pub f0: f64,
    pub f_total: f64,
    pub f_total_by_gate: Vec<(GateConstraint, f64)>,
    pub gate: Option<[[(f64, f64); 2]; 2]>,
    pub gate_distance: Option<f64>,
    pub reset: Option<ResetState>,
    pub isometry_defect: f64,
    pub threshold: f64,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Evaluate a sequence against `spec`. Unflaggable specs use [`best_reversal`].
pub fn verify(seq: &ExchangeSequence, spec: &RilSpec, threshold: f64) -> Verification {
    let iso = isometry(seq);
    let rev = if spec.flaggable {
        QaReversal::NONE
    } else {
        best_reversal(&iso)
    };
    let f0 = f0_ril(&iso, rev);
    let f_tot = f_total_iso(&iso, rev, spec);
    let f_total_by_gate = GateConstraint::ALL
        .iter()
        .map(|&g| (g, f_total_iso(&iso, rev, &RilSpec::new(spec.flaggable, g))))
        .collect();
    let mut notes = Vec::new();
    let (gate, gate_distance) = match extract_qubit_gate(&iso, rev) {
        Ok(u) => (
            Some(std::array::from_fn(|i| {
                std::array::from_fn(|j| (u[(i, j)].re, u[(i, j)].im))
            })),
            Some(gate_distance(&u, spec.gate)),
        ),
        Err(e) => {
            notes.push(e.to_string());
            (None, None)
        }
    };
    let reset = match extract_reset_state(&iso) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let passed = f_tot < threshold && gate.is_some() && reset.is_some();
    Verification {
        spec: *spec,
        rev,
        f0,
        f_total: f_tot,
        f_total_by_gate,
        gate,
        gate_distance,
        reset,
        isometry_defect: iso.defect(),
        threshold,
        passed,
        notes,
    }
}

/// Wrap an angle difference into `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = normalize_angle(x);
    if y > TAU / 2.0 {
        y - TAU
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::ExchangeSequence;
    use crate::linalg::{c, r};
    use crate::sequence::bundled;
    use std::f64::consts::PI;

    fn hadamard() -> Mat2 {
        (pauli(1) + pauli(3)) * r(std::f64::consts::FRAC_1_SQRT_2)
    }

    #[test]
    fn identity_sequence_scores_one() {
        let seq = ExchangeSequence::zeros(ExchangeSequence::full_mask()).unwrap();
        let spec = RilSpec::new(false, GateConstraint::Identity);
        assert!((f_total(&seq, QaReversal::NONE, &spec) - 1.0).abs() < 1e-12);
        assert!((f0_ril(&isometry(&seq), QaReversal::NONE) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_penalties_on_known_gates() {
        let id = Mat2::identity();
        assert!(f_gate(&id, GateConstraint::Identity).unwrap().abs() < 1e-15);
        for n in 0..4 {
            assert!(f_gate(&pauli(n), GateConstraint::Pauli).unwrap().abs() < 1e-15);
        }
        assert!((f_gate(&pauli(1), GateConstraint::Identity).unwrap() - 1.0).abs() < 1e-15);
        assert!(f_gate(&hadamard(), GateConstraint::Clifford).unwrap().abs() < 1e-12);
        assert!(f_gate(&hadamard(), GateConstraint::Pauli).unwrap() > 0.1);
        let t = Mat2::new(r(1.0), ZERO, ZERO, cis(PI / 4.0));
        assert!(f_gate(&t, GateConstraint::Clifford).unwrap() > 0.1);
        assert!(f_gate(&(id * r(2.0)), GateConstraint::Identity).is_err());
    }

    #[test]
    fn clifford_group_has_24_elements() {
        let g = single_qubit_cliffords();
        assert_eq!(g.len(), 24);
        for u in &g {
            assert!(gate_term(u, GateConstraint::Clifford) < 1e-12);
        }
    }

    #[test]
    fn reversal_is_unitary_on_row_pairs() {
        let (seq, _) = bundled("best_flag").unwrap();
        let iso = isometry(&seq);
        let rev = QaReversal::new(0.7, 2.1);
        let h = reversed_half(&iso, rev);
        assert!(isometry_defect(&h) < 1e-12);
    }

    #[test]
    fn no_flag_is_a_solution() {
        let (seq, _) = bundled("no_flag").unwrap();
        let iso = isometry(&seq);
        let rev = best_reversal(&iso);
        let spec = RilSpec::new(false, GateConstraint::Identity);
        assert!(f_total(&seq, rev, &spec) < 1e-9);
        let u = extract_qubit_gate(&iso, rev).unwrap();
        assert!(gate_distance(&u, GateConstraint::Identity) < 1e-6);
        let reset = extract_reset_state(&iso).unwrap();
        assert!((reset.alpha.norm() - (PI / 6.0).cos()).abs() < 1e-6);
        assert!((reset.beta.norm() - (PI / 6.0).sin()).abs() < 1e-6);
        assert!((reset.theta_bloch - PI / 3.0).abs() < 1e-6);
    }

    #[test]
    fn reset_state_phase_convention() {
        let s = ResetState::from_amplitudes(c(0.0, 0.6), c(-0.8, 0.0));
        assert!(s.alpha.im == 0.0 && s.alpha.re >= 0.0);
        assert!((s.alpha.re - 0.6).abs() < 1e-15);
        assert!((s.beta - c(0.0, 0.8)).norm() < 1e-15);
        assert!((s.phi_bloch - PI / 2.0).abs() < 1e-12);
        let t = ResetState::from_bloch(s.theta_bloch, s.phi_bloch);
        assert!(s.bloch_distance(&t) < 1e-12);
    }

    #[test]
    fn pure_transfer_to_label_six() {
        let iso = RilIsometry {
            half: SMatrix::<C64, 5, 2>::identity(),
            threehalf: nalgebra::SVector::<C64, 4>::new(ZERO, r(1.0), ZERO, ZERO),
        };
        let s = extract_reset_state(&iso).unwrap();
        assert!((s.alpha - r(1.0)).norm() < 1e-15 && s.beta.norm() < 1e-15);
    }

    #[test]
    fn gate_constraint_parsing() {
        for g in GateConstraint::ALL {
            assert_eq!(g.to_string().parse::<GateConstraint>().unwrap(), g);
        }
        assert!("hadamard".parse::<GateConstraint>().is_err());
    }
}
