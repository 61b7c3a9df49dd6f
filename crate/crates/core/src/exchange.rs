//! Sector-blocked exchange unitaries and brickwork sequence composition.
//!
//! Every exchange acts as `U(θ) = e^{iθ} P_S + P_T` on its dot pair. Total spin is
//! conserved, so in the representation basis of [`crate::spin_basis`] the action
//! splits into a 5×5 J = 1/2 block, a 4×4 J = 3/2 block, and the identity on
//! the single J = 5/2 multiplet (not stored).

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix4, Matrix5, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::link::{slot_link, Link, PLACEHOLDER_SLOT, SLOT_COUNT};
use crate::linalg::{cis, isometry_defect, max_abs_diff, r, C64, ONE, ZERO};
use crate::spin_basis::{block_elements, oracle_exchange, Operator, HALF_LABELS, THREE_HALF_LABELS};

pub type HalfBlock = Matrix5<C64>;
pub type ThreeHalfBlock = Matrix4<C64>;

/// Tolerance used for exact-algebra checks on blocks.
pub const EXACT_TOL: f64 = 1e-12;

/// J = 1/2 and J = 3/2 blocks of an exchange gate or of a composed sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockUnitary {
    /// basis `|0⟩ … |4⟩`
    pub half: HalfBlock,
    /// basis `|5⟩ … |8⟩`
    pub threehalf: ThreeHalfBlock,
}

impl BlockUnitary {
    pub fn identity() -> Self {
        BlockUnitary {
            half: HalfBlock::identity(),
            threehalf: ThreeHalfBlock::identity(),
        }
    }

    /// `self · rhs`, i.e. `rhs` acts first.
    pub fn then_after(&self, rhs: &BlockUnitary) -> BlockUnitary {
        BlockUnitary {
            half: self.half * rhs.half,
            threehalf: self.threehalf * rhs.threehalf,
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        isometry_defect(&self.half).max(isometry_defect(&self.threehalf))
    }

    pub fn max_abs_diff(&self, other: &BlockUnitary) -> f64 {
        max_abs_diff(&self.half, &other.half).max(max_abs_diff(&self.threehalf, &other.threehalf))
    }

    /// Project a 32×32 operator that conserves total spin onto the representation
    /// blocks, reading off the elements at `M = -1/2` and `M = -3/2`.
    pub fn from_operator(op: &Operator) -> Result<BlockUnitary> {
        let h = block_elements(op, &HALF_LABELS, -1)?;
        let t = block_elements(op, &THREE_HALF_LABELS, -3)?;
        Ok(BlockUnitary {
            half: HalfBlock::from_fn(|i, j| h[(i, j)]),
            threehalf: ThreeHalfBlock::from_fn(|i, j| t[(i, j)]),
        })
    }
}

/// Singlet-projector (coefficient of `e^{iθ}`) and triplet-projector parts of
/// the J = 1/2 block for `link`.
fn half_parts(link: Link) -> (HalfBlock, HalfBlock) {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    match link {
        Link::L12 => {
            #[rustfmt::skip]
            let singlet = HalfBlock::from_row_slice(&[
                r(0.25), r(-s3 / 4.0), ZERO, ZERO, ZERO,
                r(-s3 / 4.0), r(0.75), ZERO, ZERO, ZERO,
                ZERO, ZERO, r(0.25), r(-s3 / 4.0), ZERO,
                ZERO, ZERO, r(-s3 / 4.0), r(0.75), ZERO,
                ZERO, ZERO, ZERO, ZERO, ZERO,
            ]);
            #[rustfmt::skip]
            let triplet = HalfBlock::from_row_slice(&[
                r(0.75), r(s3 / 4.0), ZERO, ZERO, ZERO,
                r(s3 / 4.0), r(0.25), ZERO, ZERO, ZERO,
                ZERO, ZERO, r(0.75), r(s3 / 4.0), ZERO,
                ZERO, ZERO, r(s3 / 4.0), r(0.25), ZERO,
                ZERO, ZERO, ZERO, ZERO, ONE,
            ]);
            (singlet, triplet)
        }
        Link::L23 => (
            diag5([1.0, 0.0, 1.0, 0.0, 0.0]),
            diag5([0.0, 1.0, 0.0, 1.0, 1.0]),
        ),
        Link::L34 => {
            #[rustfmt::skip]
            let singlet = HalfBlock::from_row_slice(&[
                r(3.0), ZERO, ZERO, r(3.0), r(-3.0 * s2),
                ZERO, r(3.0), r(3.0), r(-2.0 * s3), r(-s6),
                ZERO, r(3.0), r(3.0), r(-2.0 * s3), r(-s6),
                r(3.0), r(-2.0 * s3), r(-2.0 * s3), r(7.0), r(-s2),
                r(-3.0 * s2), r(-s6), r(-s6), r(-s2), r(8.0),
            ]) / r(12.0);
            #[rustfmt::skip]
            let triplet = HalfBlock::from_row_slice(&[
                r(9.0), ZERO, ZERO, r(-3.0), r(3.0 * s2),
                ZERO, r(9.0), r(-3.0), r(2.0 * s3), r(s6),
                ZERO, r(-3.0), r(9.0), r(2.0 * s3), r(s6),
                r(-3.0), r(2.0 * s3), r(2.0 * s3), r(5.0), r(s2),
                r(3.0 * s2), r(s6), r(s6), r(s2), r(4.0),
            ]) / r(12.0);
            (singlet, triplet)
        }
        Link::L45 => (
            diag5([1.0, 1.0, 0.0, 0.0, 0.0]),
            diag5([0.0, 0.0, 1.0, 1.0, 1.0]),
        ),
    }
}

/// Same as [`half_parts`] for the J = 3/2 block.
fn three_half_parts(link: Link) -> (ThreeHalfBlock, ThreeHalfBlock) {
    let s3 = 3f64.sqrt();
    let s5 = 5f64.sqrt();
    let s15 = 15f64.sqrt();
    match link {
        Link::L12 => {
            #[rustfmt::skip]
            let singlet = ThreeHalfBlock::from_row_slice(&[
                ZERO, ZERO, ZERO, ZERO,
                ZERO, r(0.25), r(s3 / 4.0), ZERO,
                ZERO, r(s3 / 4.0), r(0.75), ZERO,
                ZERO, ZERO, ZERO, ZERO,
            ]);
            #[rustfmt::skip]
            let triplet = ThreeHalfBlock::from_row_slice(&[
                ONE, ZERO, ZERO, ZERO,
                ZERO, r(0.75), r(-s3 / 4.0), ZERO,
                ZERO, r(-s3 / 4.0), r(0.25), ZERO,
                ZERO, ZERO, ZERO, ONE,
            ]);
            (singlet, triplet)
        }
        Link::L23 => (diag4([0.0, 1.0, 0.0, 0.0]), diag4([1.0, 0.0, 1.0, 1.0])),
        Link::L34 => {
            #[rustfmt::skip]
            let singlet = ThreeHalfBlock::from_row_slice(&[
                r(3.0), r(3.0), r(-s3), r(s15),
                r(3.0), r(3.0), r(-s3), r(s15),
                r(-s3), r(-s3), r(1.0), r(-s5),
                r(s15), r(s15), r(-s5), r(5.0),
            ]) / r(12.0);
            #[rustfmt::skip]
            let triplet = ThreeHalfBlock::from_row_slice(&[
                r(9.0), r(-3.0), r(s3), r(-s15),
                r(-3.0), r(9.0), r(s3), r(-s15),
                r(s3), r(s3), r(11.0), r(s5),
                r(-s15), r(-s15), r(s5), r(7.0),
            ]) / r(12.0);
            (singlet, triplet)
        }
        Link::L45 => (diag4([1.0, 0.0, 0.0, 0.0]), diag4([0.0, 1.0, 1.0, 1.0])),
    }
}

fn diag5(d: [f64; 5]) -> HalfBlock {
    HalfBlock::from_diagonal(&SVector::<C64, 5>::from_iterator(d.into_iter().map(r)))
}

fn diag4(d: [f64; 4]) -> ThreeHalfBlock {
    ThreeHalfBlock::from_diagonal(&SVector::<C64, 4>::from_iterator(d.into_iter().map(r)))
}

/// Singlet projector blocks `(P_S^{1/2}, P_S^{3/2})` of `link`, cached.
fn singlet_projectors(link: Link) -> &'static (HalfBlock, ThreeHalfBlock) {
    use std::sync::OnceLock;
    static CACHE: OnceLock<[(HalfBlock, ThreeHalfBlock); 4]> = OnceLock::new();
    &CACHE.get_or_init(|| Link::ALL.map(|l| (half_parts(l).0, three_half_parts(l).0)))
        [link.index()]
}

/// Closed-form blocks of a single exchange on `link` with angle `theta` (radians).
pub fn block_exchange(link: Link, theta: f64) -> BlockUnitary {
    let phase = cis(theta);
    let (hs, ht) = half_parts(link);
    let (ts, tt) = three_half_parts(link);
    BlockUnitary {
        half: hs * phase + ht,
        threehalf: ts * phase + tt,
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let x = theta.rem_euclid(TAU);
    if x >= TAU {
        0.0
    } else {
        x
    }
}

/// Shortest distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

/// Twenty brickwork exchange angles (radians) with an active-slot mask.
///
/// Slot `k` (1-based) drives [`slot_link(k)`](crate::link::slot_link); slot 1 acts
/// first. Slot 19 is a numbering placeholder and is always inactive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeSequence {
    angles: [f64; SLOT_COUNT],
    mask: [bool; SLOT_COUNT],
}

impl ExchangeSequence {
    /// Build a sequence; inactive slots must carry a zero angle.
    pub fn new(angles: [f64; SLOT_COUNT], mask: [bool; SLOT_COUNT]) -> Result<Self> {
        for k in 0..SLOT_COUNT {
            if !angles[k].is_finite() {
                return Err(Error::invalid(format!(
                    "angle of slot {} is not finite",
                    k + 1
                )));
            }
            if !mask[k] && angles[k] != 0.0 {
                return Err(Error::invalid(format!(
                    "slot {} is inactive but carries angle {}",
                    k + 1,
                    angles[k]
                )));
            }
        }
        if mask[PLACEHOLDER_SLOT - 1] {
            return Err(Error::invalid(format!(
                "slot {PLACEHOLDER_SLOT} is a placeholder and cannot be active"
            )));
        }
        Ok(ExchangeSequence { angles, mask })
    }

    /// All-zero sequence with the given mask.
    pub fn zeros(mask: [bool; SLOT_COUNT]) -> Result<Self> {
        Self::new([0.0; SLOT_COUNT], mask)
    }

    /// Sequence whose active slots are exactly the slots with nonzero angle.
    pub fn from_angles(angles: [f64; SLOT_COUNT]) -> Result<Self> {
        let mask = angles.map(|a| a != 0.0);
        Self::new(angles, mask)
    }

    /// Same as [`from_angles`](Self::from_angles) with angles in units of π.
    pub fn from_angles_pi(angles_pi: [f64; SLOT_COUNT]) -> Result<Self> {
        Self::from_angles(angles_pi.map(|a| a * PI))
    }

    /// Mask with every slot except the placeholder active.
    pub fn full_mask() -> [bool; SLOT_COUNT] {
        let mut m = [true; SLOT_COUNT];
        m[PLACEHOLDER_SLOT - 1] = false;
        m
    }

    /// Mask from 1-based slot numbers.
    pub fn mask_from_slots(slots: &[usize]) -> Result<[bool; SLOT_COUNT]> {
        let mut m = [false; SLOT_COUNT];
        for &k in slots {
            if !(1..=SLOT_COUNT).contains(&k) {
                return Err(Error::invalid(format!("slot {k} out of range 1..={SLOT_COUNT}")));
            }
            m[k - 1] = true;
        }
        Ok(m)
    }

    pub fn angles(&self) -> &[f64; SLOT_COUNT] {
        &self.angles
    }

    pub fn angles_pi(&self) -> [f64; SLOT_COUNT] {
        self.angles.map(|a| a / PI)
    }

    pub fn mask(&self) -> &[bool; SLOT_COUNT] {
        &self.mask
    }

    /// 1-based numbers of the active slots.
    pub fn active_slots(&self) -> Vec<usize> {
        (1..=SLOT_COUNT).filter(|&k| self.mask[k - 1]).collect()
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Angles of the active slots, in slot order.
    pub fn active_angles(&self) -> Vec<f64> {
        self.active_slots()
            .into_iter()
            .map(|k| self.angles[k - 1])
            .collect()
    }

    /// Same mask, new active angles (slot order).
    pub fn with_active_angles(&self, values: &[f64]) -> Result<Self> {
        let slots = self.active_slots();
        if values.len() != slots.len() {
            return Err(Error::invalid(format!(
                "expected {} active angles, got {}",
                slots.len(),
                values.len()
            )));
        }
        let mut angles = [0.0; SLOT_COUNT];
        for (k, v) in slots.into_iter().zip(values) {
            angles[k - 1] = *v;
        }
        Self::new(angles, self.mask)
    }

    /// Every angle reduced into `[0, 2π)`.
    pub fn normalized(&self) -> Self {
        ExchangeSequence {
            angles: self.angles.map(normalize_angle),
            mask: self.mask,
        }
    }

    /// Slot-wise multiplicative perturbation `Θ_k (1 + x_k)`; inactive slots stay zero.
    pub fn perturbed(&self, x: &[f64; SLOT_COUNT]) -> Result<Self> {
        let mut angles = self.angles;
        for k in 0..SLOT_COUNT {
            if !x[k].is_finite() {
                return Err(Error::invalid(format!(
                    "noise component of slot {} is not finite",
                    k + 1
                )));
            }
            angles[k] *= 1.0 + x[k];
        }
        Self::new(angles, self.mask)
    }

    /// Swap the two gates of one brickwork layer (they act on disjoint links).
    /// Returns the per-slot application order with that layer exchanged.
    fn order_with_swapped_layer(layer: usize) -> [usize; SLOT_COUNT] {
        let mut order: [usize; SLOT_COUNT] = std::array::from_fn(|i| i + 1);
        order.swap(2 * layer, 2 * layer + 1);
        order
    }
}

/// Compose slots `order[0]`, `order[1]`, … (first acts first).
fn compose_in_order(seq: &ExchangeSequence, order: &[usize]) -> BlockUnitary {
    let mut half = HalfBlock::identity();
    let mut threehalf = ThreeHalfBlock::identity();
    for &k in order {
        let theta = seq.angles[k - 1];
        if theta == 0.0 {
            continue;
        }
        // (1 + (e^{iθ} − 1) P_S) U
        let (ps_half, ps_three) = singlet_projectors(slot_link(k));
        let factor = cis(theta) - ONE;
        half += (ps_half * half) * factor;
        threehalf += (ps_three * threehalf) * factor;
    }
    BlockUnitary { half, threehalf }
}

/// Total blocks `U_{23}(Θ_20) U_{45}(Θ_19) … U_{12}(Θ_2) U_{34}(Θ_1)`.
pub fn compose(seq: &ExchangeSequence) -> BlockUnitary {
    let order: [usize; SLOT_COUNT] = std::array::from_fn(|i| i + 1);
    compose_in_order(seq, &order)
}

/// Composition with the two gates of brickwork layer `layer` (0-based) applied
/// in the opposite order. Equal to [`compose`] because the gates commute.
pub fn compose_with_swapped_layer(seq: &ExchangeSequence, layer: usize) -> BlockUnitary {
    assert!(layer < SLOT_COUNT / 2);
    compose_in_order(seq, &ExchangeSequence::order_with_swapped_layer(layer))
}

/// The sequence restricted to singlet-initialised ancillas: inputs `|0⟩, |1⟩`
/// (J = 1/2) and `|5⟩` (J = 3/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RilIsometry {
    /// rows `|0⟩…|4⟩`, columns inputs `|0⟩, |1⟩`
    pub half: SMatrix<C64, 5, 2>,
    /// rows `|5⟩…|8⟩`, input `|5⟩`
    pub threehalf: SVector<C64, 4>,
}

impl RilIsometry {
    pub fn from_blocks(u: &BlockUnitary) -> Self {
        RilIsometry {
            half: u.half.fixed_columns::<2>(0).into_owned(),
            threehalf: u.threehalf.column(0).into_owned(),
        }
    }

    /// Deviation of the columns from orthonormality.
    pub fn defect(&self) -> f64 {
        isometry_defect(&self.half).max((self.threehalf.norm() - 1.0).abs())
    }

    /// The 14-component vector `[vec(T^{1/2}); T^{3/2}]` (column-major).
    pub fn to_vector(&self) -> SVector<C64, 14> {
        let mut v = SVector::<C64, 14>::zeros();
        for col in 0..2 {
            for row in 0..5 {
                v[5 * col + row] = self.half[(row, col)];
            }
        }
        for row in 0..4 {
            v[10 + row] = self.threehalf[row];
        }
        v
    }
}

/// Isometry realised by `seq` on singlet-initialised ancillas.
///
/// Equal to the input columns of [`compose`], but only those columns are
/// propagated through the gates.
pub fn isometry(seq: &ExchangeSequence) -> RilIsometry {
    let mut half = SMatrix::<C64, 5, 2>::zeros();
    half[(0, 0)] = ONE;
    half[(1, 1)] = ONE;
    let mut threehalf = SVector::<C64, 4>::zeros();
    threehalf[0] = ONE;
    for k in 1..=SLOT_COUNT {
        let theta = seq.angles[k - 1];
        if theta == 0.0 {
            continue;
        }
        let (ps_half, ps_three) = singlet_projectors(slot_link(k));
        let factor = cis(theta) - ONE;
        half += (ps_half * half) * factor;
        threehalf += (ps_three * threehalf) * factor;
    }
    RilIsometry { half, threehalf }
}

/// Full 32×32 unitary of `seq` built from the spin-basis oracle.
pub fn oracle_compose(seq: &ExchangeSequence) -> Result<Operator> {
    let mut u = Operator::identity(crate::spin_basis::DIM, crate::spin_basis::DIM);
    for k in 1..=SLOT_COUNT {
        let theta = seq.angles[k - 1];
        if theta != 0.0 {
            u = oracle_exchange(slot_link(k), theta)? * u;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_45_half_block_is_diagonal_phase() {
        let th = 0.913;
        let b = block_exchange(Link::L45, th);
        let e = cis(th);
        let expect = HalfBlock::from_diagonal(&SVector::<C64, 5>::from_column_slice(&[
            e, e, ONE, ONE, ONE,
        ]));
        assert!(max_abs_diff(&b.half, &expect) < EXACT_TOL);
    }

    #[test]
    fn link_34_threehalf_corner() {
        let th = 2.2;
        let b = block_exchange(Link::L34, th);
        let expect = (cis(th) * r(3.0) + r(9.0)) / r(12.0);
        assert!((b.threehalf[(0, 0)] - expect).norm() < EXACT_TOL);
    }

    #[test]
    fn link_34_half_diagonal_term() {
        // (7 e^{iθ} + 5)/12 on |3⟩
        let b = block_exchange(Link::L34, PI);
        assert!((b.half[(3, 3)] - r(-2.0 / 12.0)).norm() < EXACT_TOL);
        let b0 = block_exchange(Link::L34, 0.0);
        assert!((b0.half[(3, 3)] - ONE).norm() < EXACT_TOL);
    }

    #[test]
    fn zero_angle_is_identity() {
        for link in Link::ALL {
            let b = block_exchange(link, 0.0);
            assert!(b.max_abs_diff(&BlockUnitary::identity()) < EXACT_TOL);
        }
    }

    #[test]
    fn closed_form_matches_oracle() {
        for (n, link) in Link::ALL.into_iter().enumerate() {
            for th in [0.3, 1.7, -2.5 + n as f64] {
                let closed = block_exchange(link, th);
                let oracle = BlockUnitary::from_operator(&oracle_exchange(link, th).unwrap()).unwrap();
                assert!(closed.max_abs_diff(&oracle) < EXACT_TOL, "{link} {th}");
            }
        }
    }

    #[test]
    fn compose_zero_sequence_is_identity() {
        let seq = ExchangeSequence::zeros(ExchangeSequence::full_mask()).unwrap();
        assert!(compose(&seq).max_abs_diff(&BlockUnitary::identity()) < EXACT_TOL);
        let iso = isometry(&seq);
        assert!((iso.half[(0, 0)] - ONE).norm() < EXACT_TOL);
        assert!((iso.half[(1, 1)] - ONE).norm() < EXACT_TOL);
        assert!((iso.threehalf[0] - ONE).norm() < EXACT_TOL);
        assert!(iso.defect() < EXACT_TOL);
    }

    #[test]
    fn single_active_slot_equals_one_gate() {
        for k in [1usize, 6, 11, 20] {
            let mut angles = [0.0; SLOT_COUNT];
            angles[k - 1] = 1.1;
            let seq = ExchangeSequence::from_angles(angles).unwrap();
            let expect = block_exchange(slot_link(k), 1.1);
            assert!(compose(&seq).max_abs_diff(&expect) < EXACT_TOL);
        }
    }

    #[test]
    fn isometry_matches_composed_columns_and_oracle() {
        let mut angles = [0.0; SLOT_COUNT];
        for (k, a) in angles.iter_mut().enumerate() {
            *a = 0.37 * (k as f64 + 1.0).sin() * PI + 0.1;
        }
        angles[PLACEHOLDER_SLOT - 1] = 0.0;
        let seq = ExchangeSequence::from_angles(angles).unwrap();
        let full = compose(&seq);
        let iso = isometry(&seq);
        let from_blocks = RilIsometry::from_blocks(&full);
        assert!(max_abs_diff(&iso.half, &from_blocks.half) < EXACT_TOL);
        assert!(max_abs_diff(&iso.threehalf, &from_blocks.threehalf) < EXACT_TOL);
        let oracle = BlockUnitary::from_operator(&oracle_compose(&seq).unwrap()).unwrap();
        assert!(full.max_abs_diff(&oracle) < 1e-11);
        assert!(full.unitarity_defect() < EXACT_TOL);
    }

    #[test]
    fn rejects_active_placeholder_and_stray_angles() {
        let mut mask = [false; SLOT_COUNT];
        mask[PLACEHOLDER_SLOT - 1] = true;
        assert!(ExchangeSequence::zeros(mask).is_err());
        let mut angles = [0.0; SLOT_COUNT];
        angles[3] = 0.5;
        assert!(ExchangeSequence::new(angles, [false; SLOT_COUNT]).is_err());
        angles[3] = f64::NAN;
        assert!(ExchangeSequence::new(angles, ExchangeSequence::full_mask()).is_err());
    }

    #[test]
    fn angle_normalisation() {
        assert!((normalize_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((normalize_angle(TAU + 0.25) - 0.25).abs() < 1e-15);
        assert_eq!(normalize_angle(-0.0), 0.0);
        assert!(normalize_angle(-1e-18) < TAU);
        assert!((circular_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn perturbation_keeps_inactive_slots_zero() {
        let mut angles = [0.0; SLOT_COUNT];
        angles[0] = PI;
        let seq = ExchangeSequence::from_angles(angles).unwrap();
        let x = [0.02; SLOT_COUNT];
        let p = seq.perturbed(&x).unwrap();
        assert!((p.angles()[0] - 1.02 * PI).abs() < 1e-15);
        assert!(p.angles()[1..].iter().all(|&a| a == 0.0));
        assert_eq!(seq.perturbed(&[0.0; SLOT_COUNT]).unwrap(), seq);
    }
}
