//! C ABI over the `eoril` library.
//!
//! Every fallible function returns an [`EorilStatus`]. On failure a message is
//! available from [`eoril_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eoril::analysis::{self, FlagMetrics, FlagParams, GaugeParams};
use eoril::noise::{self, ChiMatrix, Correlation, NoiseModel, CHI_DIM};
use eoril::objective::{extract_reset_state, verify};
use eoril::{isometry, Error, ExchangeSequence, GateConstraint, RilSpec, SLOT_COUNT};

/// Number of exchange slots in a sequence.
pub const EORIL_SLOT_COUNT: usize = 20;
/// Dimension of the process matrix.
pub const EORIL_CHI_DIM: usize = 14;

const _: () = assert!(EORIL_SLOT_COUNT == SLOT_COUNT && EORIL_CHI_DIM == CHI_DIM);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EorilStatus {
    Ok = 0,
    InvalidArgument = 1,
    NotASolution = 2,
    NonFinite = 3,
    Inconsistent = 4,
    MissingResetState = 5,
    Parse = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EorilGate {
    None = 0,
    Identity = 1,
    Pauli = 2,
    Clifford = 3,
}

impl From<EorilGate> for GateConstraint {
    fn from(g: EorilGate) -> Self {
        match g {
            EorilGate::None => GateConstraint::None,
            EorilGate::Identity => GateConstraint::Identity,
            EorilGate::Pauli => GateConstraint::Pauli,
            EorilGate::Clifford => GateConstraint::Clifford,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EorilNoiseModel {
    Static = 0,
    Markovian = 1,
}

impl From<EorilNoiseModel> for Correlation {
    fn from(m: EorilNoiseModel) -> Self {
        match m {
            EorilNoiseModel::Static => Correlation::Static,
            EorilNoiseModel::Markovian => Correlation::Markovian,
        }
    }
}

/// Opaque exchange sequence.
pub struct EorilSequence(ExchangeSequence);

/// Opaque noise-averaged process matrix.
pub struct EorilChi(ChiMatrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EorilVerification {
    pub f0: f64,
    pub f_total: f64,
    /// negative when no gate could be extracted
    pub gate_distance: f64,
    pub qa_phi: f64,
    pub qa_gamma: f64,
    pub has_reset: bool,
    pub reset_alpha: f64,
    pub reset_beta_re: f64,
    pub reset_beta_im: f64,
    pub reset_theta: f64,
    pub reset_phi: f64,
    pub isometry_defect: f64,
    pub passed: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EorilEstimate {
    pub mean: f64,
    pub sem: f64,
}

impl From<noise::Estimate> for EorilEstimate {
    fn from(e: noise::Estimate) -> Self {
        EorilEstimate {
            mean: e.mean,
            sem: e.sem,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EorilMetrics {
    pub p_l_ind: EorilEstimate,
    pub f_e: EorilEstimate,
    pub f_q: EorilEstimate,
    pub one_minus_f2: EorilEstimate,
    pub eps_f: EorilEstimate,
    pub eps_5: EorilEstimate,
    pub eps_8: EorilEstimate,
    pub eps_l_rem: EorilEstimate,
    pub has_eps_r: bool,
    pub eps_r: EorilEstimate,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EorilFlagInputs {
    pub eps_l: f64,
    pub eps_1s: f64,
    pub eps_0t: f64,
    pub p_l_ind: f64,
    pub eps_f: f64,
    pub eps_5: f64,
    pub eps_8: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EorilFlagResult {
    pub leading_given_0: f64,
    pub leading_given_1: f64,
    pub leading_given_1_defined: bool,
    pub leading_p_one: f64,
    pub exact_given_0: f64,
    pub exact_given_1: f64,
    pub exact_given_1_defined: bool,
    pub exact_p_one: f64,
    /// sum of all joint table entries
    pub exact_total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EorilGaugeStationary {
    pub p_down: f64,
    pub p_up: f64,
    pub decay_eigenvalue: f64,
    pub coherence_weight: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EorilStatus {
    match e {
        Error::InvalidArgument(_) => EorilStatus::InvalidArgument,
        Error::NotASolution(_) => EorilStatus::NotASolution,
        Error::NonFinite { .. } => EorilStatus::NonFinite,
        Error::Inconsistent(_) => EorilStatus::Inconsistent,
        Error::MissingResetState(_) => EorilStatus::MissingResetState,
        Error::Parse { .. } => EorilStatus::Parse,
        Error::Io { .. } => EorilStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EorilStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EorilStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is a null pointer"));
            EorilStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            EorilStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eoril_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eoril_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Bundled sequence by name (`no_flag`, `best_flag`, `worst_flag`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` and `flaggable` valid pointers
/// (`flaggable` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn eoril_sequence_bundled(
    name: *const c_char,
    out_seq: *mut *mut EorilSequence,
    flaggable: *mut bool,
) -> EorilStatus {
    guard(|| {
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let slot = out(out_seq, "out_seq")?;
        let name = CStr::from_ptr(name).to_string_lossy();
        let (seq, f) = eoril::sequence::bundled(&name)
            .ok_or_else(|| Error::InvalidArgument(format!("no bundled sequence named '{name}'")))?;
        if let Some(fl) = flaggable.as_mut() {
            *fl = f;
        }
        *slot = Box::into_raw(Box::new(EorilSequence(seq)));
        Ok(())
    })
}

/// Sequence from `len` (= 20) angles in units of π; zero angles mark inactive slots.
///
/// # Safety
/// `angles_pi` must point to `len` doubles; `out_seq` must be valid.
#[no_mangle]
pub unsafe extern "C" fn eoril_sequence_from_angles_pi(
    angles_pi: *const f64,
    len: usize,
    out_seq: *mut *mut EorilSequence,
) -> EorilStatus {
    guard(|| {
        if angles_pi.is_null() {
            return Err(Fail::Null("angles_pi"));
        }
        let slot = out(out_seq, "out_seq")?;
        if len != SLOT_COUNT {
            return Err(Error::InvalidArgument(format!("expected {SLOT_COUNT} angles, got {len}")).into());
        }
        let v = std::slice::from_raw_parts(angles_pi, len);
        let angles: [f64; SLOT_COUNT] = v.try_into().expect("length checked");
        let seq = ExchangeSequence::from_angles_pi(angles)?;
        *slot = Box::into_raw(Box::new(EorilSequence(seq)));
        Ok(())
    })
}

/// Copy the angles (units of π) into `out_angles[0..len]`, `len` = 20.
///
/// # Safety
/// `seq` must be a live handle; `out_angles` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eoril_sequence_angles_pi(
    seq: *const EorilSequence,
    out_angles: *mut f64,
    len: usize,
) -> EorilStatus {
    guard(|| {
        let seq = deref(seq, "seq")?;
        if out_angles.is_null() {
            return Err(Fail::Null("out_angles"));
        }
        if len != SLOT_COUNT {
            return Err(Error::InvalidArgument(format!("expected room for {SLOT_COUNT} angles, got {len}")).into());
        }
        std::slice::from_raw_parts_mut(out_angles, len).copy_from_slice(&seq.0.angles_pi());
        Ok(())
    })
}

/// # Safety
/// `seq` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eoril_sequence_free(seq: *mut EorilSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Score `seq` against the reset-if-leaked target.
///
/// # Safety
/// `seq` must be a live handle; `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eoril_verify(
    seq: *const EorilSequence,
    flaggable: bool,
    gate: EorilGate,
    threshold: f64,
    result: *mut EorilVerification,
) -> EorilStatus {
    guard(|| {
        let seq = deref(seq, "seq")?;
        let result = out(result, "result")?;
        if !(threshold > 0.0) {
            return Err(Error::InvalidArgument("threshold must be positive".into()).into());
        }
        let v = verify(&seq.0, &RilSpec::new(flaggable, gate.into()), threshold);
        let mut r = EorilVerification {
            f0: v.f0,
            f_total: v.f_total,
            gate_distance: v.gate_distance.unwrap_or(-1.0),
            qa_phi: v.rev.phi,
            qa_gamma: v.rev.gamma,
            isometry_defect: v.isometry_defect,
            passed: v.passed,
            ..Default::default()
        };
        if let Some(s) = v.reset {
            r.has_reset = true;
            r.reset_alpha = s.alpha.re;
            r.reset_beta_re = s.beta.re;
            r.reset_beta_im = s.beta.im;
            r.reset_theta = s.theta_bloch;
            r.reset_phi = s.phi_bloch;
        }
        *result = r;
        Ok(())
    })
}

/// Noise-averaged process matrix of `seq` in its QA frame.
///
/// # Safety
/// `seq` must be a live handle; `out_chi` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eoril_chi_average(
    seq: *const EorilSequence,
    flaggable: bool,
    sigma: f64,
    model: EorilNoiseModel,
    samples: usize,
    seed: u64,
    out_chi: *mut *mut EorilChi,
) -> EorilStatus {
    guard(|| {
        let seq = deref(seq, "seq")?;
        let slot = out(out_chi, "out_chi")?;
        let model = NoiseModel::new(sigma, model.into())?;
        let frame = noise::qa_frame(&seq.0, flaggable);
        let chi = noise::chi_average_in_frame(&seq.0, frame, &model, samples, seed)?;
        *slot = Box::into_raw(Box::new(EorilChi(chi)));
        Ok(())
    })
}

/// Entry `(i, j)` of the averaged process matrix.
///
/// # Safety
/// `chi` must be a live handle; `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn eoril_chi_entry(
    chi: *const EorilChi,
    i: usize,
    j: usize,
    re: *mut f64,
    im: *mut f64,
) -> EorilStatus {
    guard(|| {
        let chi = deref(chi, "chi")?;
        let re = out(re, "re")?;
        let im = out(im, "im")?;
        if i >= CHI_DIM || j >= CHI_DIM {
            return Err(Error::InvalidArgument(format!("index ({i}, {j}) outside {CHI_DIM}x{CHI_DIM}")).into());
        }
        let z = chi.0.matrix[(i, j)];
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Error metrics of `chi`; `eps_R` uses the reset state of `ideal` when given.
///
/// # Safety
/// `chi` must be a live handle, `ideal` NULL or a live handle, `result` valid.
#[no_mangle]
pub unsafe extern "C" fn eoril_chi_metrics(
    chi: *const EorilChi,
    ideal: *const EorilSequence,
    result: *mut EorilMetrics,
) -> EorilStatus {
    guard(|| {
        let chi = deref(chi, "chi")?;
        let result = out(result, "result")?;
        let reset = match ideal.as_ref() {
            Some(s) => Some(extract_reset_state(&isometry(&s.0))?),
            None => None,
        };
        let m = noise::metrics(&chi.0, reset.as_ref());
        *result = EorilMetrics {
            p_l_ind: m.p_l_ind.into(),
            f_e: m.f_e.into(),
            f_q: m.f_q.into(),
            one_minus_f2: m.one_minus_f2.into(),
            eps_f: m.eps_f.into(),
            eps_5: m.eps_5.into(),
            eps_8: m.eps_8.into(),
            eps_l_rem: m.eps_l_rem.into(),
            has_eps_r: m.eps_r.is_some(),
            eps_r: m.eps_r.map(Into::into).unwrap_or_default(),
        };
        Ok(())
    })
}

/// # Safety
/// `chi` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eoril_chi_free(chi: *mut EorilChi) {
    if !chi.is_null() {
        drop(Box::from_raw(chi));
    }
}

/// Leading-order and exact flag reliability.
///
/// # Safety
/// `inputs` and `result` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn eoril_flag(inputs: *const EorilFlagInputs, result: *mut EorilFlagResult) -> EorilStatus {
    guard(|| {
        let i = deref(inputs, "inputs")?;
        let result = out(result, "result")?;
        let p = FlagParams::new(i.eps_l, i.eps_1s, i.eps_0t)?;
        let m = FlagMetrics::new(i.p_l_ind, i.eps_f, i.eps_5, i.eps_8)?;
        let table = analysis::joint_flag_table(&p, &m)?;
        let g1 = analysis::wrong_guess_given_1(&p, &m);
        let e1 = table.wrong_guess_given_1();
        *result = EorilFlagResult {
            leading_given_0: analysis::wrong_guess_given_0(&p, &m),
            leading_given_1: g1.value,
            leading_given_1_defined: g1.defined,
            leading_p_one: analysis::p_one_leading_order(&p, &m),
            exact_given_0: table.wrong_guess_given_0().value,
            exact_given_1: e1.value,
            exact_given_1_defined: e1.defined,
            exact_p_one: table.p_flag(analysis::FlagOutcome::One),
            exact_total: table.total(),
        };
        Ok(())
    })
}

/// Stationary gauge populations for relaxation probability `eta`.
///
/// # Safety
/// `result` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eoril_gauge_stationary(eta: f64, result: *mut EorilGaugeStationary) -> EorilStatus {
    guard(|| {
        let result = out(result, "result")?;
        let s = analysis::gauge_stationary(&GaugeParams::new(eta)?);
        *result = EorilGaugeStationary {
            p_down: s.p_down,
            p_up: s.p_up,
            decay_eigenvalue: s.decay_eigenvalue,
            coherence_weight: s.coherence_weight,
        };
        Ok(())
    })
}
