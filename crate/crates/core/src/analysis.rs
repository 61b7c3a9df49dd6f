//! Flag reliability and gauge pumping.
//!
//! The flag functions are named after the conditioning measurement outcome:
//! [`wrong_guess_given_0`] is the probability that a `0_M` flag ("no leakage")
//! is wrong, [`wrong_guess_given_1`] the same for a `1_M` flag.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::noise::{CsvRow, MetricSet};
use crate::spin_basis::{self, Amplitudes};

/// Above this the leading-order flag formulas are no longer trustworthy.
pub const SMALL_PARAMETER_LIMIT: f64 = 0.1;

/// Phenomenological leakage prior and ancilla readout errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagParams {
    /// probability that the qubit is leaked before the sequence
    pub eps_l: f64,
    /// `P(1_M | S_A)`
    pub eps_1s: f64,
    /// `P(0_M | T_A)`
    pub eps_0t: f64,
}

impl FlagParams {
    pub fn new(eps_l: f64, eps_1s: f64, eps_0t: f64) -> Result<Self> {
        for (name, v) in [("eps_L", eps_l), ("eps_1S", eps_1s), ("eps_0T", eps_0t)] {
            check_probability(name, v)?;
        }
        Ok(FlagParams {
            eps_l,
            eps_1s,
            eps_0t,
        })
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{name} = {v} is not a probability")));
    }
    Ok(())
}

/// The channel quantities the flag analysis needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagMetrics {
    pub p_l_ind: f64,
    pub eps_f: f64,
    pub eps_5: f64,
    pub eps_8: f64,
}

impl FlagMetrics {
    pub fn new(p_l_ind: f64, eps_f: f64, eps_5: f64, eps_8: f64) -> Result<Self> {
        for (name, v) in [("p_L_ind", p_l_ind), ("eps_F", eps_f), ("eps_5", eps_5), ("eps_8", eps_8)] {
            check_probability(name, v)?;
        }
        Ok(FlagMetrics {
            p_l_ind,
            eps_f,
            eps_5,
            eps_8,
        })
    }

    pub fn ideal() -> Self {
        FlagMetrics {
            p_l_ind: 0.0,
            eps_f: 0.0,
            eps_5: 0.0,
            eps_8: 0.0,
        }
    }
}

impl From<&MetricSet> for FlagMetrics {
    fn from(m: &MetricSet) -> Self {
        FlagMetrics {
            p_l_ind: m.p_l_ind.mean,
            eps_f: m.eps_f.mean,
            eps_5: m.eps_5.mean,
            eps_8: m.eps_8.mean,
        }
    }
}

impl From<&CsvRow> for FlagMetrics {
    fn from(r: &CsvRow) -> Self {
        FlagMetrics {
            p_l_ind: r.p_L_ind,
            eps_f: r.eps_F,
            eps_5: r.eps_5,
            eps_8: r.eps_8,
        }
    }
}

/// Leading-order `P(¬(U_out U_in) | 0_M) ≈ ε_0T p_L + ε_0T ε_L + ε_5 ε_L`.
pub fn wrong_guess_given_0(flag: &FlagParams, m: &FlagMetrics) -> f64 {
    flag.eps_0t * m.p_l_ind + flag.eps_0t * flag.eps_l + m.eps_5 * flag.eps_l
}

/// A probability that may be undefined (0/0); then `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessError {
    pub value: f64,
    pub defined: bool,
}

/// Leading-order `P(¬(U_out L_in) | 1_M) ≈ 1 / (1 + ε_L / (ε_1S + ε_F))`.
///
/// With `ε_1S + ε_F = 0` and `ε_L = 0` a `1_M` outcome never happens; the
/// result is then 0 and flagged as undefined.
pub fn wrong_guess_given_1(flag: &FlagParams, m: &FlagMetrics) -> GuessError {
    let noise = flag.eps_1s + m.eps_f;
    if noise == 0.0 {
        return GuessError {
            value: 0.0,
            defined: flag.eps_l > 0.0,
        };
    }
    GuessError {
        value: 1.0 / (1.0 + flag.eps_l / noise),
        defined: true,
    }
}

/// Inputs that exceed [`SMALL_PARAMETER_LIMIT`], where the leading-order
/// formulas should not be trusted.
pub fn leading_order_warnings(flag: &FlagParams, m: &FlagMetrics) -> Vec<String> {
    [
        ("eps_L", flag.eps_l),
        ("eps_1S", flag.eps_1s),
        ("eps_0T", flag.eps_0t),
        ("p_L_ind", m.p_l_ind),
        ("eps_F", m.eps_f),
        ("eps_5", m.eps_5),
        ("eps_8", m.eps_8),
    ]
    .into_iter()
    .filter(|(_, v)| *v > SMALL_PARAMETER_LIMIT)
    .map(|(n, v)| format!("{n} = {v} is not small; leading-order results are unreliable"))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagOutcome {
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Occupation {
    Unleaked,
    Leaked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AncillaState {
    Singlet,
    Triplet,
}

/// `P(j_A, O | I)` under exchange-only noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncillaConditionals {
    pub s_u_given_u: f64,
    pub t_u_given_u: f64,
    pub s_l_given_u: f64,
    pub t_l_given_u: f64,
    pub s_u_given_l: f64,
    pub t_u_given_l: f64,
    pub s_l_given_l: f64,
    pub t_l_given_l: f64,
}

impl AncillaConditionals {
    pub fn from_metrics(m: &FlagMetrics) -> Result<Self> {
        if m.eps_f < m.p_l_ind {
            return Err(Error::Inconsistent(format!(
                "eps_F = {} is below p_L_ind = {}",
                m.eps_f, m.p_l_ind
            )));
        }
        if m.eps_5 + m.eps_8 > 1.0 {
            return Err(Error::Inconsistent(format!(
                "eps_5 + eps_8 = {} exceeds 1",
                m.eps_5 + m.eps_8
            )));
        }
        Ok(AncillaConditionals {
            s_u_given_u: 1.0 - m.eps_f,
            t_u_given_u: m.eps_f - m.p_l_ind,
            // total spin is conserved, so an unleaked input cannot leak with a singlet ancilla
            s_l_given_u: 0.0,
            t_l_given_u: m.p_l_ind,
            s_u_given_l: 0.0,
            t_u_given_l: 1.0 - m.eps_5 - m.eps_8,
            s_l_given_l: m.eps_5,
            t_l_given_l: m.eps_8,
        })
    }

    pub fn get(&self, j: AncillaState, o: Occupation, i: Occupation) -> f64 {
        use AncillaState::*;
        use Occupation::*;
        match (j, o, i) {
            (Singlet, Unleaked, Unleaked) => self.s_u_given_u,
            (Triplet, Unleaked, Unleaked) => self.t_u_given_u,
            (Singlet, Leaked, Unleaked) => self.s_l_given_u,
            (Triplet, Leaked, Unleaked) => self.t_l_given_u,
            (Singlet, Unleaked, Leaked) => self.s_u_given_l,
            (Triplet, Unleaked, Leaked) => self.t_u_given_l,
            (Singlet, Leaked, Leaked) => self.s_l_given_l,
            (Triplet, Leaked, Leaked) => self.t_l_given_l,
        }
    }
}

/// Exact joint distribution `P(F, O, I) = Σ_j P(F|j) P(j O|I) P(I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointFlagTable {
    pub conditionals: AncillaConditionals,
    /// `(flag, output, input, probability)` for all eight combinations
    pub entries: Vec<(FlagOutcome, Occupation, Occupation, f64)>,
}

impl JointFlagTable {
    pub fn p(&self, f: FlagOutcome, o: Occupation, i: Occupation) -> f64 {
        self.entries
            .iter()
            .find(|e| e.0 == f && e.1 == o && e.2 == i)
            .map(|e| e.3)
            .expect("table holds every combination")
    }

    pub fn p_flag(&self, f: FlagOutcome) -> f64 {
        self.entries.iter().filter(|e| e.0 == f).map(|e| e.3).sum()
    }

    /// `P(f)` minus the `(o, i)` entry, summed directly to avoid cancellation.
    fn p_flag_except(&self, f: FlagOutcome, o: Occupation, i: Occupation) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == f && !(e.1 == o && e.2 == i))
            .map(|e| e.3)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.3).sum()
    }

    /// Exact `P(¬(U_out U_in) | 0_M)`.
    pub fn wrong_guess_given_0(&self) -> GuessError {
        let p0 = self.p_flag(FlagOutcome::Zero);
        if p0 == 0.0 {
            return GuessError {
                value: 0.0,
                defined: false,
            };
        }
        GuessError {
            value: self.p_flag_except(FlagOutcome::Zero, Occupation::Unleaked, Occupation::Unleaked) / p0,
            defined: true,
        }
    }

    /// Exact `P(¬(U_out L_in) | 1_M)`.
    pub fn wrong_guess_given_1(&self) -> GuessError {
        let p1 = self.p_flag(FlagOutcome::One);
        if p1 == 0.0 {
            return GuessError {
                value: 0.0,
                defined: false,
            };
        }
        GuessError {
            value: self.p_flag_except(FlagOutcome::One, Occupation::Unleaked, Occupation::Leaked) / p1,
            defined: true,
        }
    }
}

pub fn joint_flag_table(flag: &FlagParams, m: &FlagMetrics) -> Result<JointFlagTable> {
    use AncillaState::*;
    use FlagOutcome::*;
    use Occupation::*;
    let cond = AncillaConditionals::from_metrics(m)?;
    let p_flag = |f: FlagOutcome, j: AncillaState| match (f, j) {
        (Zero, Singlet) => 1.0 - flag.eps_1s,
        (One, Singlet) => flag.eps_1s,
        (Zero, Triplet) => flag.eps_0t,
        (One, Triplet) => 1.0 - flag.eps_0t,
    };
    let p_in = |i: Occupation| match i {
        Unleaked => 1.0 - flag.eps_l,
        Leaked => flag.eps_l,
    };
    let mut entries = Vec::with_capacity(8);
    for f in [Zero, One] {
        for o in [Unleaked, Leaked] {
            for i in [Unleaked, Leaked] {
                let p: f64 = [Singlet, Triplet]
                    .into_iter()
                    .map(|j| p_flag(f, j) * cond.get(j, o, i) * p_in(i))
                    .sum();
                entries.push((f, o, i, p));
            }
        }
    }
    Ok(JointFlagTable {
        conditionals: cond,
        entries,
    })
}

/// Leading-order `P(1_M) ≈ ε_1S + ε_F + ε_L`.
pub fn p_one_leading_order(flag: &FlagParams, m: &FlagMetrics) -> f64 {
    flag.eps_1s + m.eps_f + flag.eps_l
}

/// Gauge relaxation probability per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeParams {
    pub eta: f64,
}

impl GaugeParams {
    pub fn new(eta: f64) -> Result<Self> {
        check_probability("eta", eta)?;
        Ok(GaugeParams { eta })
    }
}

/// Gauge pumping of an ideal unflaggable reset, basis `(↓, ↑)`.
pub fn pumping_matrix() -> Matrix2<f64> {
    Matrix2::new(1.0, 2.0, 2.0, 1.0) / 3.0
}

/// Column-stochastic relaxation towards `↓`.
pub fn relaxation_matrix(eta: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, eta, 0.0, 1.0 - eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeStationary {
    pub p_down: f64,
    pub p_up: f64,
    /// eigenvalue of the decaying mode `(−1, 1)`
    pub decay_eigenvalue: f64,
    /// `Tr[ρ_G Z_G] = p_down − p_up`, the weight of coherent leakage terms
    pub coherence_weight: f64,
}

/// Fixed point of `R(η) P_G`, computed from the matrix itself.
pub fn gauge_stationary(g: &GaugeParams) -> GaugeStationary {
    let m = relaxation_matrix(g.eta) * pumping_matrix();
    // for a column-stochastic 2×2 matrix the fixed point is ∝ (m01, m10)
    let (a, b) = (m[(0, 1)], m[(1, 0)]);
    let p_down = a / (a + b);
    let p_up = b / (a + b);
    GaugeStationary {
        p_down,
        p_up,
        decay_eigenvalue: m.trace() - 1.0,
        coherence_weight: p_down - p_up,
    }
}

/// `‖R P_G p − p‖_∞` for the reported fixed point.
pub fn stationary_residual(g: &GaugeParams, s: &GaugeStationary) -> f64 {
    let m = relaxation_matrix(g.eta) * pumping_matrix();
    let p = Vector2::new(s.p_down, s.p_up);
    (m * p - p).amax()
}

/// One ancilla block of [`coherence_trace_out`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncillaBlock {
    /// `None` for the singlet, `Some(m)` for `|T_m⟩`
    pub ancilla: Option<i32>,
    pub unleaked: f64,
    pub leaked: f64,
    /// `⟨ψ_U| ρ |L⟩` after summing over gauge projections
    pub coherence: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub blocks: Vec<AncillaBlock>,
    /// representation-level state over `(ψ_U, L)`
    pub rho: [[C64; 2]; 2],
    pub purity: f64,
}

/// Prepare `α|1_QA, m⟩ + β|L, m⟩` on the five spins, decohere the ancilla in
/// the `{S, T_−, T_0, T_+}` basis and sum out the gauge projections.
///
/// `psi_u = (u₀, u₁)` is the logical state carried by the QA triplet branch.
/// `|1_QA⟩` is taken as `−(u₀|2⟩ + u₁|3⟩)` in the representation basis, which is
/// the sign with `+√(1/3) |ψ_U⟩|T_0⟩` at `m = −1/2`; `|L⟩` is `|4⟩`.
pub fn coherence_trace_out(alpha: C64, beta: C64, psi_u: [C64; 2], twice_m: i32) -> Result<CoherenceReport> {
    if twice_m.abs() != 1 {
        return Err(Error::invalid("the gauge must be m = ±1/2"));
    }
    let nu = (psi_u[0].norm_sqr() + psi_u[1].norm_sqr()).sqrt();
    let na = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if !(nu > 0.0) || !(na > 0.0) {
        return Err(Error::invalid("states must be nonzero"));
    }
    let (u0, u1) = (psi_u[0] / nu, psi_u[1] / nu);
    let (alpha, beta) = (alpha / na, beta / na);
    let s2 = &spin_basis::state(2, twice_m)?.amplitudes;
    let s3 = &spin_basis::state(3, twice_m)?.amplitudes;
    let s4 = &spin_basis::state(4, twice_m)?.amplitudes;
    let psi: Amplitudes = -(s2 * u0 + s3 * u1) * alpha + s4 * beta;

    let mut blocks = Vec::new();
    let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
    for anc in [None, Some(-1), Some(0), Some(1)] {
        let a = spin_basis::ancilla_state(anc)?;
        // Q-register vector ⟨a|_A ψ
        let q = Amplitudes::from_fn(8, |i, _| (0..4).map(|k| psi[4 * i + k] * a[k].conj()).sum());
        let mut u = C64::new(0.0, 0.0);
        for tm in [-1, 1] {
            let basis_u = spin_basis::qubit_register_state(0, tm)? * u0
                + spin_basis::qubit_register_state(1, tm)? * u1;
            u += basis_u.dotc(&q);
        }
        let mut l = C64::new(0.0, 0.0);
        for tm in [-3, -1, 1, 3] {
            l += spin_basis::quartet_state(tm)?.dotc(&q);
        }
        let block = AncillaBlock {
            ancilla: anc,
            unleaked: u.norm_sqr(),
            leaked: l.norm_sqr(),
            coherence: u * l.conj(),
        };
        rho[0][0] += block.unleaked;
        rho[1][1] += block.leaked;
        rho[0][1] += block.coherence;
        rho[1][0] += block.coherence.conj();
        blocks.push(block);
    }
    let purity = rho
        .iter()
        .flat_map(|row| row.iter())
        .map(|x| x.norm_sqr())
        .sum();
    Ok(CoherenceReport { blocks, rho, purity })
}
