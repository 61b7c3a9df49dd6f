//! Total-angular-momentum basis of five spin-½ particles.
//!
//! The five dots are ordered Q1 Q2 Q3 A1 A2; in the 32-dimensional product basis
//! Q1 is the most significant bit and a set bit means spin down. The nine
//! representation labels are
//!
//! | label | J   | content                                     |
//! |-------|-----|---------------------------------------------|
//! | 0     | 1/2 | `|0_Q⟩ ⊗ |S⟩_A`                              |
//! | 1     | 1/2 | `|1_Q⟩ ⊗ |S⟩_A`                              |
//! | 2     | 1/2 | `(|0_Q⟩ ⊗ |T⟩_A)_{1/2}`                      |
//! | 3     | 1/2 | `(|1_Q⟩ ⊗ |T⟩_A)_{1/2}`                      |
//! | 4     | 1/2 | `(D^Q_{3/2} ⊗ |T⟩_A)_{1/2}`                  |
//! | 5     | 3/2 | `D^Q_{3/2} ⊗ |S⟩_A`                          |
//! | 6     | 3/2 | `(|0_Q⟩ ⊗ |T⟩_A)_{3/2}`                      |
//! | 7     | 3/2 | `(|1_Q⟩ ⊗ |T⟩_A)_{3/2}`                      |
//! | 8     | 3/2 | `(D^Q_{3/2} ⊗ |T⟩_A)_{3/2}`                  |
//!
//! Representatives are written out at `M = -1/2` (J = 1/2) and `M = -3/2`
//! (J = 3/2); every other `M` is reached with the total raising operator, so
//! matrix elements of any exchange are identical in every `M` sector.
//!
//! Couplings follow the Condon–Shortley convention with the left factor as
//! `j1`. States 7 and 8 carry an extra overall sign so that the J = 3/2 exchange
//! blocks come out exactly in the closed form used by [`crate::exchange`].

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::link::Link;
use crate::linalg::{cis, r, C64, ONE, ZERO};

pub const N_SPINS: usize = 5;
pub const DIM: usize = 1 << N_SPINS;

/// Labels spanning the J = 1/2 sector.
pub const HALF_LABELS: [usize; 5] = [0, 1, 2, 3, 4];
/// Labels spanning the J = 3/2 sector.
pub const THREE_HALF_LABELS: [usize; 4] = [5, 6, 7, 8];

pub type Amplitudes = DVector<C64>;
pub type Operator = DMatrix<C64>;

/// One member of the representation basis at a definite `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisState {
    pub label: usize,
    /// `2J`
    pub twice_j: i32,
    /// `2M`
    pub twice_m: i32,
    pub amplitudes: Amplitudes,
}

impl BasisState {
    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }
}

pub fn twice_j_of(label: usize) -> i32 {
    if label < 5 {
        1
    } else {
        3
    }
}

// ---------------------------------------------------------------------------
// few-spin building blocks

fn up() -> DVector<C64> {
    DVector::from_vec(vec![ONE, ZERO])
}

fn down() -> DVector<C64> {
    DVector::from_vec(vec![ZERO, ONE])
}

fn kron(a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
    a.kronecker(b)
}

fn kron3(a: &DVector<C64>, b: &DVector<C64>, c: &DVector<C64>) -> DVector<C64> {
    a.kronecker(b).kronecker(c)
}

/// Two-spin singlet `(|↑↓⟩ − |↓↑⟩)/√2`.
fn singlet() -> DVector<C64> {
    (kron(&up(), &down()) - kron(&down(), &up())) * r(0.5f64.sqrt())
}

/// Two-spin triplet `|T_m⟩` for `m ∈ {-1, 0, 1}`.
fn triplet(m: i32) -> DVector<C64> {
    match m {
        1 => kron(&up(), &up()),
        0 => (kron(&up(), &down()) + kron(&down(), &up())) * r(0.5f64.sqrt()),
        -1 => kron(&down(), &down()),
        _ => unreachable!(),
    }
}

/// Total `S_+` on `n` spins.
fn raising(n: usize) -> Operator {
    let dim = 1 << n;
    let mut op = Operator::zeros(dim, dim);
    for col in 0..dim {
        for site in 0..n {
            let bit = 1 << (n - 1 - site);
            if col & bit != 0 {
                op[(col & !bit, col)] += ONE;
            }
        }
    }
    op
}

/// Total `S_z` on `n` spins (diagonal).
fn total_sz_n(n: usize) -> Operator {
    let dim = 1 << n;
    let mut op = Operator::zeros(dim, dim);
    for idx in 0..dim {
        let downs = idx.count_ones() as f64;
        op[(idx, idx)] = r(0.5 * (n as f64 - downs) - 0.5 * downs);
    }
    op
}

/// Total `S²` on `n` spins.
fn total_s2_n(n: usize) -> Operator {
    let sp = raising(n);
    let sm = sp.adjoint();
    let sz = total_sz_n(n);
    &sz * &sz + (&sp * &sm + &sm * &sp) * r(0.5)
}

fn normalized_raise(op: &Operator, v: &DVector<C64>) -> DVector<C64> {
    let w = op * v;
    let n = w.norm();
    w / r(n)
}

/// Three-spin qubit states `|1/2, m, 0_Q⟩` (Q1 with a Q2Q3 singlet).
fn qubit_zero(twice_m: i32) -> DVector<C64> {
    let s1 = if twice_m > 0 { up() } else { down() };
    kron(&s1, &singlet())
}

/// Three-spin qubit states `|1/2, m, 1_Q⟩` (Q1 coupled to a Q2Q3 triplet).
fn qubit_one(twice_m: i32) -> DVector<C64> {
    let low = kron(&down(), &triplet(0)) * r(-(1.0f64 / 3.0).sqrt())
        + kron(&up(), &triplet(-1)) * r((2.0f64 / 3.0).sqrt());
    if twice_m < 0 {
        low
    } else {
        normalized_raise(&raising(3), &low)
    }
}

/// Fully symmetric three-spin quartet `|3/2, m⟩_Q`.
fn quartet(twice_m: i32) -> DVector<C64> {
    let sp = raising(3);
    let mut v = kron3(&down(), &down(), &down());
    let mut m = -3;
    while m < twice_m {
        v = normalized_raise(&sp, &v);
        m += 2;
    }
    v
}

/// Three-spin qubit register state `|logical, m⟩_Q` (8 amplitudes, Q1 most
/// significant); `logical` 0 pairs Q2Q3 in a singlet, 1 in a triplet.
pub fn qubit_register_state(logical: usize, twice_m: i32) -> Result<Amplitudes> {
    if twice_m.abs() != 1 {
        return Err(Error::invalid(format!("qubit register has no M = {twice_m}/2")));
    }
    match logical {
        0 => Ok(qubit_zero(twice_m)),
        1 => Ok(qubit_one(twice_m)),
        _ => Err(Error::invalid(format!("logical state {logical} is not 0 or 1"))),
    }
}

/// Three-spin quartet `|3/2, m⟩_Q`.
pub fn quartet_state(twice_m: i32) -> Result<Amplitudes> {
    if !(-3..=3).contains(&twice_m) || twice_m % 2 == 0 {
        return Err(Error::invalid(format!("quartet has no M = {twice_m}/2")));
    }
    Ok(quartet(twice_m))
}

/// Ancilla pair state: `None` for the singlet, `Some(m)` for `|T_m⟩`.
pub fn ancilla_state(triplet_m: Option<i32>) -> Result<Amplitudes> {
    match triplet_m {
        None => Ok(singlet()),
        Some(m) if (-1..=1).contains(&m) => Ok(triplet(m)),
        Some(m) => Err(Error::invalid(format!("triplet has no m = {m}"))),
    }
}

fn representative(label: usize) -> DVector<C64> {
    let third = (1.0f64 / 3.0).sqrt();
    let two_thirds = (2.0f64 / 3.0).sqrt();
    match label {
        0 => kron(&qubit_zero(-1), &singlet()),
        1 => kron(&qubit_one(-1), &singlet()),
        2 => {
            kron(&qubit_zero(-1), &triplet(0)) * r(-third)
                + kron(&qubit_zero(1), &triplet(-1)) * r(two_thirds)
        }
        3 => {
            kron(&qubit_one(-1), &triplet(0)) * r(-third)
                + kron(&qubit_one(1), &triplet(-1)) * r(two_thirds)
        }
        4 => {
            kron(&quartet(-3), &triplet(1)) * r(0.5f64.sqrt())
                - kron(&quartet(-1), &triplet(0)) * r(third)
                + kron(&quartet(1), &triplet(-1)) * r((1.0f64 / 6.0).sqrt())
        }
        5 => kron(&quartet(-3), &singlet()),
        6 => kron(&qubit_zero(-1), &triplet(-1)),
        7 => -kron(&qubit_one(-1), &triplet(-1)),
        8 => -(kron(&quartet(-3), &triplet(0)) * r(-(3.0f64 / 5.0).sqrt())
            + kron(&quartet(-1), &triplet(-1)) * r((2.0f64 / 5.0).sqrt())),
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// five-spin operators

/// Total `S_+ = Σ_i S_{i,+}` on the five spins.
pub fn total_raising() -> &'static Operator {
    static OP: OnceLock<Operator> = OnceLock::new();
    OP.get_or_init(|| raising(N_SPINS))
}

pub fn total_sz() -> &'static Operator {
    static OP: OnceLock<Operator> = OnceLock::new();
    OP.get_or_init(|| total_sz_n(N_SPINS))
}

pub fn total_s2() -> &'static Operator {
    static OP: OnceLock<Operator> = OnceLock::new();
    OP.get_or_init(|| total_s2_n(N_SPINS))
}

/// `S²` of the three qubit dots, extended by the identity on the ancillas.
pub fn qubit_register_s2() -> &'static Operator {
    static OP: OnceLock<Operator> = OnceLock::new();
    OP.get_or_init(|| total_s2_n(3).kronecker(&Operator::identity(4, 4)))
}

/// The representative state of `label`, before any raising.
pub fn representative_state(label: usize) -> Result<BasisState> {
    if label > 8 {
        return Err(Error::invalid(format!("basis label {label} out of range 0..=8")));
    }
    let twice_j = twice_j_of(label);
    Ok(BasisState {
        label,
        twice_j,
        twice_m: -twice_j,
        amplitudes: representative(label),
    })
}

/// `J_+ |state⟩` without renormalisation.
pub fn raise_raw(state: &BasisState) -> Result<Amplitudes> {
    if state.twice_m >= state.twice_j {
        return Err(Error::invalid(format!(
            "cannot raise label {} beyond its top weight M = J = {}/2",
            state.label, state.twice_j
        )));
    }
    Ok(total_raising() * &state.amplitudes)
}

/// Apply `J_+` and divide out the ladder prefactor `√(J(J+1) − M(M+1))`.
pub fn raise_m(state: &BasisState) -> Result<BasisState> {
    let raw = raise_raw(state)?;
    let (j, m) = (state.j(), state.m());
    let prefactor = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
    Ok(BasisState {
        label: state.label,
        twice_j: state.twice_j,
        twice_m: state.twice_m + 2,
        amplitudes: raw / r(prefactor),
    })
}

/// All 26 basis states: labels 0–4 at `M = ±1/2` and labels 5–8 at
/// `M = -3/2 … 3/2`, ordered by label then `M`.
pub fn build_basis() -> Vec<BasisState> {
    let mut out = Vec::with_capacity(26);
    for label in 0..9 {
        let mut state = representative_state(label).expect("label in range");
        loop {
            let next = if state.twice_m < state.twice_j {
                Some(raise_m(&state).expect("below top weight"))
            } else {
                None
            };
            out.push(state);
            match next {
                Some(s) => state = s,
                None => break,
            }
        }
    }
    out
}

/// Cached basis, see [`build_basis`].
pub fn basis() -> &'static [BasisState] {
    static BASIS: OnceLock<Vec<BasisState>> = OnceLock::new();
    BASIS.get_or_init(build_basis)
}

/// Look up the basis state with the given label and `2M`.
pub fn state(label: usize, twice_m: i32) -> Result<&'static BasisState> {
    basis()
        .iter()
        .find(|s| s.label == label && s.twice_m == twice_m)
        .ok_or_else(|| {
            Error::invalid(format!("no basis state with label {label} and 2M = {twice_m}"))
        })
}

/// Matrix elements `⟨a_M| op |b_M⟩` for `a, b` ranging over `labels`.
pub fn block_elements(op: &Operator, labels: &[usize], twice_m: i32) -> Result<DMatrix<C64>> {
    let states: Vec<&BasisState> = labels
        .iter()
        .map(|&l| state(l, twice_m))
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(labels.len(), labels.len());
    for (i, a) in states.iter().enumerate() {
        let opa = op.adjoint() * &a.amplitudes;
        for (j, b) in states.iter().enumerate() {
            out[(i, j)] = opa.dotc(&b.amplitudes);
        }
    }
    Ok(out)
}

/// Swap of the spins on `link` as a permutation of the product basis.
pub fn swap_operator(link: Link) -> Operator {
    let (i, j) = link.sites();
    let (bi, bj) = (1 << (N_SPINS - 1 - i), 1 << (N_SPINS - 1 - j));
    let mut op = Operator::zeros(DIM, DIM);
    for col in 0..DIM {
        let (si, sj) = (col & bi != 0, col & bj != 0);
        let mut row = col & !(bi | bj);
        if si {
            row |= bj;
        }
        if sj {
            row |= bi;
        }
        op[(row, col)] = ONE;
    }
    op
}

/// Heisenberg exchange on `link` in the full product space:
/// `e^{iθ} P_S + P_T` with `P_S = (1 − SWAP)/2` the singlet projector of the pair.
pub fn oracle_exchange(link: Link, theta: f64) -> Result<Operator> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("exchange angle {theta} is not finite")));
    }
    let id = Operator::identity(DIM, DIM);
    let p_singlet = (&id - swap_operator(link)) * r(0.5);
    let p_triplet = &id - &p_singlet;
    Ok(p_singlet * cis(theta) + p_triplet)
}

/// Same as [`oracle_exchange`] but addressed by 1-based dot labels.
pub fn oracle_exchange_dots(i: usize, j: usize, theta: f64) -> Result<Operator> {
    oracle_exchange(Link::from_dots(i, j)?, theta)
}

// ---------------------------------------------------------------------------
// projectors

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    /// `P_Q`: the qubit triple is in its spin-½ (computational) representation.
    Qubit,
    /// `P_L`: the qubit triple is in its spin-3/2 (leaked) representation.
    Leaked,
    /// `P_{1/2}`: total spin ½ of all five dots.
    HalfSpin,
}

#[derive(Debug, Clone)]
pub struct SectorProjector {
    pub kind: ProjectorKind,
    /// 32×32 form
    pub matrix: Operator,
    /// Which of the labels 0–8 lie in the range of the projector.
    pub labels: [bool; 9],
}

impl SectorProjector {
    pub fn new(kind: ProjectorKind) -> Self {
        let id = Operator::identity(DIM, DIM);
        let matrix = match kind {
            ProjectorKind::Leaked => (qubit_register_s2() - &id * r(0.75)) * r(1.0 / 3.0),
            ProjectorKind::Qubit => {
                let leaked = (qubit_register_s2() - &id * r(0.75)) * r(1.0 / 3.0);
                id - leaked
            }
            ProjectorKind::HalfSpin => {
                // Lagrange interpolation on the S² spectrum {3/4, 15/4, 35/4}.
                let s2 = total_s2();
                let a = s2 - &id * r(15.0 / 4.0);
                let b = s2 - &id * r(35.0 / 4.0);
                (a * b) * r(1.0 / ((0.75 - 3.75) * (0.75 - 8.75)))
            }
        };
        let labels = match kind {
            ProjectorKind::Qubit => [true, true, true, true, false, false, true, true, false],
            ProjectorKind::Leaked => [false, false, false, false, true, true, false, false, true],
            ProjectorKind::HalfSpin => [true, true, true, true, true, false, false, false, false],
        };
        SectorProjector {
            kind,
            matrix,
            labels,
        }
    }

    /// Block form over labels 0–8 as a 9×9 diagonal 0/1 matrix.
    pub fn block_form(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            9,
            self.labels.iter().map(|&b| if b { 1.0 } else { 0.0 }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dmax_abs_diff;

    const TOL: f64 = 1e-12;

    fn expectation(op: &Operator, v: &Amplitudes) -> C64 {
        v.dotc(&(op * v))
    }

    #[test]
    fn basis_has_expected_multiplets() {
        let b = build_basis();
        assert_eq!(b.len(), 26);
        for label in 0..5 {
            let ms: Vec<i32> = b.iter().filter(|s| s.label == label).map(|s| s.twice_m).collect();
            assert_eq!(ms, vec![-1, 1]);
        }
        for label in 5..9 {
            let ms: Vec<i32> = b.iter().filter(|s| s.label == label).map(|s| s.twice_m).collect();
            assert_eq!(ms, vec![-3, -1, 1, 3]);
        }
    }

    #[test]
    fn basis_states_are_normalised_eigenvectors() {
        for s in basis() {
            assert!((s.amplitudes.norm() - 1.0).abs() < TOL, "label {}", s.label);
            let j = s.j();
            let s2 = total_s2() * &s.amplitudes;
            assert!((s2 - &s.amplitudes * r(j * (j + 1.0))).norm() < TOL);
            let sz = total_sz() * &s.amplitudes;
            assert!((sz - &s.amplitudes * r(s.m())).norm() < TOL);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let b = basis();
        for (i, x) in b.iter().enumerate() {
            for (k, y) in b.iter().enumerate() {
                let g = x.amplitudes.dotc(&y.amplitudes);
                let target = if i == k { 1.0 } else { 0.0 };
                assert!((g - r(target)).norm() < TOL, "{i} {k}");
            }
        }
    }

    #[test]
    fn label_zero_is_qubit_zero_times_ancilla_singlet() {
        // |1/2,-1/2,0_Q⟩ = |↓⟩ ⊗ (|↑↓⟩−|↓↑⟩)/√2, ancilla singlet likewise.
        let s = state(0, -1).unwrap();
        let h = 0.5;
        // bits: Q1 Q2 Q3 A1 A2, 1 = down
        let expect = [
            (0b10101usize, h),
            (0b10110, -h),
            (0b11001, -h),
            (0b11010, h),
        ];
        let mut v = Amplitudes::zeros(DIM);
        for (idx, a) in expect {
            v[idx] = r(a);
        }
        assert!((&s.amplitudes - v).norm() < TOL);
    }

    #[test]
    fn label_two_weights() {
        let s = state(2, -1).unwrap();
        let t0_branch = kron(&qubit_zero(-1), &triplet(0));
        let tm_branch = kron(&qubit_zero(1), &triplet(-1));
        assert!((t0_branch.dotc(&s.amplitudes) - r(-(1.0f64 / 3.0).sqrt())).norm() < TOL);
        assert!((tm_branch.dotc(&s.amplitudes) - r((2.0f64 / 3.0).sqrt())).norm() < TOL);
    }

    #[test]
    fn raising_label_five_has_ladder_norm_sqrt_three() {
        let s = representative_state(5).unwrap();
        let raw = raise_raw(&s).unwrap();
        assert!((raw.norm() - 3f64.sqrt()).abs() < TOL);
        let up = raise_m(&s).unwrap();
        assert_eq!(up.twice_m, -1);
        assert!((up.amplitudes.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn raising_top_weight_fails() {
        let top = state(6, 3).unwrap();
        assert!(matches!(raise_m(top), Err(Error::InvalidArgument(_))));
        let top_half = state(0, 1).unwrap();
        assert!(raise_m(top_half).is_err());
    }

    #[test]
    fn exchange_at_zero_is_identity() {
        for link in Link::ALL {
            let u = oracle_exchange(link, 0.0).unwrap();
            assert!(dmax_abs_diff(&u, &Operator::identity(DIM, DIM)) < TOL);
        }
    }

    #[test]
    fn exchange_at_pi_is_swap() {
        // P_T − P_S = SWAP, built independently by explicit bit swapping.
        let u = oracle_exchange(Link::L23, std::f64::consts::PI).unwrap();
        let mut swap = Operator::zeros(DIM, DIM);
        for col in 0..DIM {
            let q2 = (col >> 3) & 1;
            let q3 = (col >> 2) & 1;
            let row = (col & !0b01100) | (q3 << 3) | (q2 << 2);
            swap[(row, col)] = ONE;
        }
        assert!(dmax_abs_diff(&u, &swap) < TOL);
    }

    #[test]
    fn exchange_is_unitary_and_conserves_spin() {
        for (k, link) in Link::ALL.into_iter().enumerate() {
            let u = oracle_exchange(link, 0.37 + k as f64).unwrap();
            assert!(crate::linalg::dunitary_defect(&u) < TOL);
            let c2 = &u * total_s2() - total_s2() * &u;
            let cz = &u * total_sz() - total_sz() * &u;
            assert!(c2.iter().map(|x| x.norm()).fold(0.0, f64::max) < TOL);
            assert!(cz.iter().map(|x| x.norm()).fold(0.0, f64::max) < TOL);
        }
    }

    #[test]
    fn disjoint_exchanges_commute() {
        let a = oracle_exchange(Link::L12, 0.8).unwrap();
        let b = oracle_exchange(Link::L34, -1.9).unwrap();
        assert!(dmax_abs_diff(&(&a * &b), &(&b * &a)) < TOL);
    }

    #[test]
    fn matrix_elements_are_independent_of_m() {
        let u = oracle_exchange(Link::L34, 1.234).unwrap();
        let half_lo = block_elements(&u, &HALF_LABELS, -1).unwrap();
        let half_hi = block_elements(&u, &HALF_LABELS, 1).unwrap();
        assert!(dmax_abs_diff(&half_lo, &half_hi) < TOL);
        let ref_block = block_elements(&u, &THREE_HALF_LABELS, -3).unwrap();
        for m in [-1, 1, 3] {
            let blk = block_elements(&u, &THREE_HALF_LABELS, m).unwrap();
            assert!(dmax_abs_diff(&ref_block, &blk) < TOL);
        }
    }

    #[test]
    fn projectors_are_consistent_with_labels() {
        for kind in [ProjectorKind::Qubit, ProjectorKind::Leaked, ProjectorKind::HalfSpin] {
            let p = SectorProjector::new(kind);
            assert!(dmax_abs_diff(&(&p.matrix * &p.matrix), &p.matrix) < TOL);
            assert!(dmax_abs_diff(&p.matrix.adjoint(), &p.matrix) < TOL);
            for s in basis() {
                let image = &p.matrix * &s.amplitudes;
                let expected = if p.labels[s.label] {
                    s.amplitudes.clone()
                } else {
                    Amplitudes::zeros(DIM)
                };
                assert!((image - expected).norm() < TOL, "{kind:?} label {}", s.label);
            }
        }
        let pq = SectorProjector::new(ProjectorKind::Qubit);
        let pl = SectorProjector::new(ProjectorKind::Leaked);
        let sum = &pq.matrix + &pl.matrix;
        assert!(dmax_abs_diff(&sum, &Operator::identity(DIM, DIM)) < TOL);
    }

    #[test]
    fn half_spin_projector_matches_basis_span() {
        let mut p = Operator::zeros(DIM, DIM);
        for s in basis().iter().filter(|s| s.twice_j == 1) {
            p += &s.amplitudes * s.amplitudes.adjoint();
        }
        let proj = SectorProjector::new(ProjectorKind::HalfSpin);
        assert!(dmax_abs_diff(&p, &proj.matrix) < TOL);
        assert!((expectation(&proj.matrix, &state(4, 1).unwrap().amplitudes) - ONE).norm() < TOL);
    }
}
