//! Multiplicative exchange noise, the noise-averaged 14×14 process matrix, and
//! the scalar error metrics derived from it.
//!
//! Sampling is split into fixed-size chunks. Chunk `c` draws from a ChaCha8
//! stream `(seed, c)`, and chunk results are reduced in chunk order, so results
//! do not depend on the number of threads.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{isometry, ExchangeSequence, RilIsometry};
use crate::link::{slot_link, SLOT_COUNT};
use crate::linalg::{hermitian_min_eigenvalue, C64};
use crate::objective::{best_reversal, reversed_half, QaReversal, ResetState};

/// Dimension of the process-matrix operator basis.
pub const CHI_DIM: usize = 14;
/// Samples per RNG chunk.
pub const CHUNK: usize = 4096;
/// Default number of Monte-Carlo samples.
pub const DEFAULT_SAMPLES: usize = 100_000;

pub type ChiVector = SVector<C64, CHI_DIM>;
pub type ChiMat = SMatrix<C64, CHI_DIM, CHI_DIM>;

/// Correlation structure of the slot multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    /// one multiplier per link, shared by every slot on that link
    #[default]
    Static,
    /// an independent multiplier per slot
    Markovian,
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correlation::Static => "static",
            Correlation::Markovian => "markovian",
        })
    }
}

impl FromStr for Correlation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Correlation::Static),
            "markovian" => Ok(Correlation::Markovian),
            _ => Err(Error::invalid(format!(
                "unknown noise model '{s}' (expected static or markovian)"
            ))),
        }
    }
}

/// Gaussian multiplicative noise `Θ_k → Θ_k (1 + x_k)`, `x ~ N(0, σ²)`.
/// The Gaussian is not truncated at `x = −1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub correlation: Correlation,
}

impl NoiseModel {
    pub fn new(sigma: f64, correlation: Correlation) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!(
                "noise strength must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma, correlation })
    }

    /// One draw of the twenty slot multipliers.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; SLOT_COUNT] {
        match self.correlation {
            Correlation::Static => {
                let per_link: [f64; 4] =
                    std::array::from_fn(|_| self.sigma * rng.sample::<f64, _>(StandardNormal));
                std::array::from_fn(|k| per_link[slot_link(k + 1).index()])
            }
            Correlation::Markovian => {
                std::array::from_fn(|_| self.sigma * rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// `Θ_k (1 + x_k)` slot-wise.
pub fn perturb(seq: &ExchangeSequence, x: &[f64; SLOT_COUNT]) -> Result<ExchangeSequence> {
    seq.perturbed(x)
}

/// `[vec(T^{1/2}); T^{3/2}]` of one realisation.
pub fn chi_vector(seq: &ExchangeSequence) -> ChiVector {
    isometry(seq).to_vector()
}

// per-sample observables, each linear in χ
const OBS_P_L: usize = 0;
const OBS_F_E: usize = 1;
const OBS_F_Q: usize = 2;
const OBS_ONE_MINUS_F2: usize = 3;
const OBS_EPS_F: usize = 4;
const OBS_EPS_5: usize = 5;
const OBS_EPS_8: usize = 6;
const OBS_EPS_L_REM: usize = 7;
const N_OBS: usize = 8;

fn observables(v: &ChiVector) -> [f64; N_OBS] {
    let a = |i: usize| v[i].norm_sqr();
    let p_l = (a(4) + a(9)) / 2.0;
    let f_e = ((v[0] + v[6]).norm_sqr() + (v[2] + v[8]).norm_sqr()) / 4.0;
    let f_q = (2.0 * f_e + 1.0 - p_l) / 3.0;
    let eps_f = (a(2) + a(3) + a(4) + a(7) + a(8) + a(9)) / 2.0;
    let mut o = [0.0; N_OBS];
    o[OBS_P_L] = p_l;
    o[OBS_F_E] = f_e;
    o[OBS_F_Q] = f_q;
    o[OBS_ONE_MINUS_F2] = (1.0 - f_q) - p_l;
    o[OBS_EPS_F] = eps_f;
    o[OBS_EPS_5] = a(10);
    o[OBS_EPS_8] = a(13);
    o[OBS_EPS_L_REM] = a(10) + a(13);
    o
}

/// Running sums of one chunk (or of a merge of chunks).
#[derive(Debug, Clone)]
struct Accumulator {
    n: usize,
    vv: ChiMat,
    abs2: SMatrix<f64, CHI_DIM, CHI_DIM>,
    obs_mean: [f64; N_OBS],
    obs_m2: [f64; N_OBS],
    /// Σ w_a w_b* w_c w_d* for w = (T65, T75), index 8a+4b+2c+d
    w4: [C64; 16],
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            n: 0,
            vv: ChiMat::zeros(),
            abs2: SMatrix::zeros(),
            obs_mean: [0.0; N_OBS],
            obs_m2: [0.0; N_OBS],
            w4: [C64::new(0.0, 0.0); 16],
        }
    }

    fn push(&mut self, v: &ChiVector) {
        self.n += 1;
        self.vv += v * v.adjoint();
        for i in 0..CHI_DIM {
            let ai = v[i].norm_sqr();
            for j in 0..CHI_DIM {
                self.abs2[(i, j)] += ai * v[j].norm_sqr();
            }
        }
        // Welford update
        let o = observables(v);
        let n = self.n as f64;
        for k in 0..N_OBS {
            let d = o[k] - self.obs_mean[k];
            self.obs_mean[k] += d / n;
            self.obs_m2[k] += d * (o[k] - self.obs_mean[k]);
        }
        let w = [v[11], v[12]];
        for a in 0..2 {
            for b in 0..2 {
                let ab = w[a] * w[b].conj();
                for c in 0..2 {
                    for d in 0..2 {
                        self.w4[8 * a + 4 * b + 2 * c + d] += ab * w[c] * w[d].conj();
                    }
                }
            }
        }
    }

    /// Chan et al. parallel merge.
    fn merge(mut self, other: &Accumulator) -> Self {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other.clone();
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        for k in 0..N_OBS {
            let d = other.obs_mean[k] - self.obs_mean[k];
            self.obs_mean[k] += d * nb / n;
            self.obs_m2[k] += other.obs_m2[k] + d * d * na * nb / n;
        }
        self.n += other.n;
        self.vv += other.vv;
        self.abs2 += other.abs2;
        for i in 0..16 {
            self.w4[i] += other.w4[i];
        }
        self
    }
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub sem: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Estimate { mean, sem: 0.0 }
    }

    /// `sem / |mean|`; zero when both vanish.
    pub fn rel_sem(&self) -> f64 {
        if self.sem == 0.0 {
            0.0
        } else {
            self.sem / self.mean.abs()
        }
    }
}

/// Sample statistics kept alongside the averaged process matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    obs: [Estimate; N_OBS],
    /// mean of w_a w_b* w_c w_d*
    w4: [C64; 16],
}

/// Noise-averaged process matrix in the basis `E_0 … E_13`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub matrix: ChiMat,
    /// standard error of each entry
    pub sem: SMatrix<f64, CHI_DIM, CHI_DIM>,
    pub n_samples: usize,
    pub moments: Option<SampleMoments>,
}

impl ChiMatrix {
    /// Exact `χ = v v†` of a single realisation.
    pub fn from_vector(v: &ChiVector) -> Self {
        let mut acc = Accumulator::new();
        acc.push(v);
        Self::from_accumulator(&acc)
    }

    /// Wrap a matrix without sampling statistics.
    pub fn from_matrix(matrix: ChiMat, n_samples: usize) -> Self {
        ChiMatrix {
            matrix,
            sem: SMatrix::zeros(),
            n_samples,
            moments: None,
        }
    }

    fn from_accumulator(acc: &Accumulator) -> Self {
        let n = acc.n as f64;
        let matrix = acc.vv / C64::new(n, 0.0);
        let mut sem = SMatrix::<f64, CHI_DIM, CHI_DIM>::zeros();
        if acc.n > 1 {
            for i in 0..CHI_DIM {
                for j in 0..CHI_DIM {
                    let var = (acc.abs2[(i, j)] / n - matrix[(i, j)].norm_sqr()).max(0.0);
                    sem[(i, j)] = (var * n / (n - 1.0) / n).sqrt();
                }
            }
        }
        let obs = std::array::from_fn(|k| Estimate {
            mean: acc.obs_mean[k],
            sem: if acc.n > 1 {
                (acc.obs_m2[k] / (n - 1.0) / n).sqrt()
            } else {
                0.0
            },
        });
        ChiMatrix {
            matrix,
            sem,
            n_samples: acc.n,
            moments: Some(SampleMoments {
                obs,
                w4: acc.w4.map(|x| x / n),
            }),
        }
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.matrix - self.matrix.adjoint();
        d.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::DMatrix::from_fn(CHI_DIM, CHI_DIM, |i, j| self.matrix[(i, j)]);
        hermitian_min_eigenvalue(&m)
    }

    /// Column-norm traces `(Σ_{0..5} χ_ii, Σ_{5..10} χ_ii, Σ_{10..14} χ_ii)`, each 1.
    pub fn block_traces(&self) -> [f64; 3] {
        let t = |r: std::ops::Range<usize>| r.map(|i| self.matrix[(i, i)].re).sum::<f64>();
        [t(0..5), t(5..10), t(10..14)]
    }
}

/// `v` of one realisation with the QA rotation `frame` undone on the J = 1/2 rows.
pub fn chi_vector_in_frame(seq: &ExchangeSequence, frame: QaReversal) -> ChiVector {
    let iso = isometry(seq);
    if frame == QaReversal::NONE {
        return iso.to_vector();
    }
    RilIsometry {
        half: reversed_half(&iso, frame),
        threehalf: iso.threehalf,
    }
    .to_vector()
}

fn run_chunk(
    seq: &ExchangeSequence,
    frame: QaReversal,
    model: &NoiseModel,
    seed: u64,
    chunk: usize,
    n: usize,
) -> Result<Accumulator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    let mut acc = Accumulator::new();
    for _ in 0..n {
        let x = model.draw(&mut rng);
        acc.push(&chi_vector_in_frame(&perturb(seq, &x)?, frame));
    }
    Ok(acc)
}

/// QA frame in which `seq` is characterised: none for flaggable sequences, the
/// best-fit reversal otherwise.
pub fn qa_frame(seq: &ExchangeSequence, flaggable: bool) -> QaReversal {
    if flaggable {
        QaReversal::NONE
    } else {
        best_reversal(&isometry(seq))
    }
}

/// Average `v v†` over `n_samples` noise realisations of `seq`.
pub fn chi_average(seq: &ExchangeSequence, model: &NoiseModel, n_samples: usize, seed: u64) -> Result<ChiMatrix> {
    chi_average_in_frame(seq, QaReversal::NONE, model, n_samples, seed)
}

/// As [`chi_average`], with every realisation expressed in the QA frame of an
/// unflaggable sequence (its ideal QA output rotated back onto `|0_QA⟩`).
///
/// Only the flag-failure probability depends on the frame; the other metrics
/// are invariant because the rotation is unitary on each `(|0_QA⟩, |1_QA⟩)` pair.
pub fn chi_average_in_frame(
    seq: &ExchangeSequence,
    frame: QaReversal,
    model: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<ChiMatrix> {
    if n_samples == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunks: Vec<Accumulator> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(n_samples - c * CHUNK);
            run_chunk(seq, frame, model, seed, c, n)
        })
        .collect::<Result<_>>()?;
    let total = chunks
        .iter()
        .fold(Accumulator::new(), |acc, c| acc.merge(c));
    Ok(ChiMatrix::from_accumulator(&total))
}

/// Error metrics of a noisy reset-if-leaked channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// induced leakage for a maximally mixed unleaked input
    pub p_l_ind: Estimate,
    /// entanglement fidelity of the qubit channel
    pub f_e: Estimate,
    /// average qubit fidelity
    pub f_q: Estimate,
    /// `(1 − F_Q) − p_L,ind`, the small-error form of `1 − F_2`
    pub one_minus_f2: Estimate,
    /// probability of leaving the `|0_QA⟩` flag state
    pub eps_f: Estimate,
    /// leaked input left in `|5⟩`
    pub eps_5: Estimate,
    /// leaked input ending in `|8⟩`
    pub eps_8: Estimate,
    pub eps_l_rem: Estimate,
    /// leaked input missing the reset state; needs a reset state
    pub eps_r: Option<Estimate>,
}

impl MetricSet {
    pub fn eps_r(&self) -> Result<Estimate> {
        self.eps_r.ok_or_else(|| {
            Error::MissingResetState("eps_R needs the reset state of the ideal sequence".into())
        })
    }

    /// `(name, estimate)` pairs in CSV column order.
    pub fn named(&self) -> Vec<(&'static str, Estimate)> {
        let mut v = vec![
            ("p_L_ind", self.p_l_ind),
            ("F_Q", self.f_q),
            ("F_e", self.f_e),
            ("one_minus_F2", self.one_minus_f2),
            ("eps_F", self.eps_f),
            ("eps_5", self.eps_5),
            ("eps_8", self.eps_8),
            ("eps_L_rem", self.eps_l_rem),
        ];
        if let Some(r) = self.eps_r {
            v.push(("eps_R", r));
        }
        v
    }

    /// Error-type metrics (zero for an ideal channel), with `1 − F_Q` and `1 − F_e`.
    pub fn errors(&self) -> Vec<(&'static str, Estimate)> {
        let flip = |e: Estimate| Estimate {
            mean: 1.0 - e.mean,
            sem: e.sem,
        };
        let mut v = vec![
            ("p_L_ind", self.p_l_ind),
            ("1-F_Q", flip(self.f_q)),
            ("1-F_e", flip(self.f_e)),
            ("one_minus_F2", self.one_minus_f2),
            ("eps_F", self.eps_f),
            ("eps_5", self.eps_5),
            ("eps_8", self.eps_8),
            ("eps_L_rem", self.eps_l_rem),
        ];
        if let Some(r) = self.eps_r {
            v.push(("eps_R", r));
        }
        v
    }
}

/// Metrics from an averaged process matrix. Means are read off `χ̄`; error bars
/// come from the per-sample moments when present.
pub fn metrics(chi: &ChiMatrix, reset: Option<&ResetState>) -> MetricSet {
    let m = &chi.matrix;
    let d = |i: usize| m[(i, i)].re;
    let p_l = (d(4) + d(9)) / 2.0;
    let f_e = (d(0) + d(6) + 2.0 * m[(0, 6)].re + d(2) + d(8) + 2.0 * m[(2, 8)].re) / 4.0;
    let f_q = (2.0 * f_e + 1.0 - p_l) / 3.0;
    let eps_f = (d(2) + d(3) + d(4) + d(7) + d(8) + d(9)) / 2.0;
    let means = [
        p_l,
        f_e,
        f_q,
        (1.0 - f_q) - p_l,
        eps_f,
        d(10),
        d(13),
        d(10) + d(13),
    ];
    let est = |k: usize| Estimate {
        mean: means[k],
        sem: chi.moments.as_ref().map_or(0.0, |mo| mo.obs[k].sem),
    };
    let eps_r = reset.map(|r| {
        let norm = r.norm_sqr().sqrt();
        // ψ = (0, α, β, 0) normalised; p = ψ* on the (|6⟩, |7⟩) rows
        let p = [r.alpha.conj() / norm, r.beta.conj() / norm];
        let mut overlap = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                overlap += p[a] * p[b].conj() * m[(11 + a, 11 + b)];
            }
        }
        let y = overlap.re;
        let sem = match &chi.moments {
            Some(mo) if chi.n_samples > 1 => {
                let mut y2 = C64::new(0.0, 0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        for c in 0..2 {
                            for dd in 0..2 {
                                y2 += p[a] * p[b].conj() * p[c] * p[dd].conj() * mo.w4[8 * a + 4 * b + 2 * c + dd];
                            }
                        }
                    }
                }
                let n = chi.n_samples as f64;
                ((y2.re - y * y).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
            _ => 0.0,
        };
        Estimate { mean: 1.0 - y, sem }
    });
    MetricSet {
        p_l_ind: est(OBS_P_L),
        f_e: est(OBS_F_E),
        f_q: est(OBS_F_Q),
        one_minus_f2: est(OBS_ONE_MINUS_F2),
        eps_f: est(OBS_EPS_F),
        eps_5: est(OBS_EPS_5),
        eps_8: est(OBS_EPS_8),
        eps_l_rem: est(OBS_EPS_L_REM),
        eps_r,
    }
}

/// Check the orderings every channel must satisfy, allowing `slack` SEMs.
pub fn check_consistency(m: &MetricSet, slack: f64) -> Result<()> {
    let tol = |a: Estimate, b: Estimate| slack * (a.sem + b.sem) + 1e-12;
    if m.eps_f.mean + tol(m.eps_f, m.p_l_ind) < m.p_l_ind.mean {
        return Err(Error::Inconsistent(format!(
            "eps_F = {} below p_L_ind = {}",
            m.eps_f.mean, m.p_l_ind.mean
        )));
    }
    if let Some(r) = m.eps_r {
        if r.mean + tol(r, m.eps_l_rem) < m.eps_l_rem.mean {
            return Err(Error::Inconsistent(format!(
                "eps_R = {} below eps_L_rem = {}",
                r.mean, m.eps_l_rem.mean
            )));
        }
    }
    Ok(())
}

/// One row of a noise sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub metrics: MetricSet,
    pub n_samples: usize,
    pub seed: u64,
}

/// `chi_average` and `metrics` for each σ. Every σ reuses the same seed, so the
/// curves share their underlying normal draws.
pub fn sweep(
    seq: &ExchangeSequence,
    frame: QaReversal,
    reset: Option<&ResetState>,
    sigmas: &[f64],
    correlation: Correlation,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    sigmas
        .iter()
        .map(|&sigma| {
            let model = NoiseModel::new(sigma, correlation)?;
            let chi = chi_average_in_frame(seq, frame, &model, n_samples, seed)?;
            Ok(SweepPoint {
                sigma,
                metrics: metrics(&chi, reset),
                n_samples,
                seed,
            })
        })
        .collect()
}

/// CSV row layout of a sweep.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub sigma: f64,
    pub p_L_ind: f64,
    pub sem_p_L_ind: f64,
    pub F_Q: f64,
    pub F_e: f64,
    pub one_minus_F2: f64,
    pub eps_F: f64,
    pub eps_5: f64,
    pub eps_8: f64,
    pub eps_L_rem: f64,
    pub eps_R: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl From<&SweepPoint> for CsvRow {
    fn from(p: &SweepPoint) -> Self {
        let m = &p.metrics;
        CsvRow {
            sigma: p.sigma,
            p_L_ind: m.p_l_ind.mean,
            sem_p_L_ind: m.p_l_ind.sem,
            F_Q: m.f_q.mean,
            F_e: m.f_e.mean,
            one_minus_F2: m.one_minus_f2.mean,
            eps_F: m.eps_f.mean,
            eps_5: m.eps_5.mean,
            eps_8: m.eps_8.mean,
            eps_L_rem: m.eps_l_rem.mean,
            eps_R: m.eps_r.map(|e| e.mean),
            n_samples: p.n_samples,
            seed: p.seed,
        }
    }
}

pub fn write_csv<W: std::io::Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(CsvRow::from(p))
            .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Read rows written by [`write_csv`]. Lines starting with `#` are skipped.
pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::parse(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::isometry;
    use crate::objective::extract_reset_state;
    use crate::sequence::bundled;

    #[test]
    fn static_draw_repeats_per_link() {
        let model = NoiseModel::new(0.1, Correlation::Static).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = model.draw(&mut rng);
        for k in 0..SLOT_COUNT - 4 {
            assert_eq!(x[k], x[k + 4]);
        }
        assert_ne!(x[0], x[1]);
        let m = NoiseModel::new(0.1, Correlation::Markovian).unwrap();
        let y = m.draw(&mut rng);
        assert_ne!(y[0], y[4]);
    }

    #[test]
    fn negative_sigma_is_rejected() {
        assert!(NoiseModel::new(-0.1, Correlation::Static).is_err());
        assert!(NoiseModel::new(f64::NAN, Correlation::Static).is_err());
    }

    #[test]
    fn zero_noise_gives_rank_one_chi() {
        let (seq, _) = bundled("no_flag").unwrap();
        let model = NoiseModel::new(0.0, Correlation::Static).unwrap();
        let chi = chi_average(&seq, &model, 50, 3).unwrap();
        let v = chi_vector(&seq);
        let exact = v * v.adjoint();
        let dev = (chi.matrix - exact).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-14);
        assert!(chi.sem.iter().all(|&s| s < 1e-7));
    }

    #[test]
    fn ideal_metrics_vanish() {
        let (seq, _) = bundled("no_flag").unwrap();
        let iso = isometry(&seq);
        let reset = extract_reset_state(&iso).unwrap();
        let frame = crate::objective::best_reversal(&iso);
        let m = metrics(&ChiMatrix::from_vector(&chi_vector_in_frame(&seq, frame)), Some(&reset));
        for (name, e) in m.errors() {
            assert!(e.mean.abs() < 1e-12, "{name} = {}", e.mean);
        }
    }

    #[test]
    fn only_flag_failure_depends_on_frame() {
        let (seq, _) = bundled("no_flag").unwrap();
        let iso = isometry(&seq);
        let frame = crate::objective::best_reversal(&iso);
        let reset = extract_reset_state(&iso).unwrap();
        let model = NoiseModel::new(0.02, Correlation::Static).unwrap();
        let plain = metrics(&chi_average(&seq, &model, 500, 8).unwrap(), Some(&reset));
        let framed = metrics(&chi_average_in_frame(&seq, frame, &model, 500, 8).unwrap(), Some(&reset));
        for ((n, a), (_, b)) in plain.errors().into_iter().zip(framed.errors()) {
            if n == "eps_F" {
                assert!(a.mean > 0.9 && b.mean < 0.1, "{} {}", a.mean, b.mean);
            } else {
                assert!((a.mean - b.mean).abs() < 1e-12, "{n}");
            }
        }
        let ideal = metrics(&ChiMatrix::from_vector(&chi_vector_in_frame(&seq, frame)), Some(&reset));
        assert!(ideal.eps_f.mean < 1e-12);
    }

    #[test]
    fn missing_reset_state() {
        let (seq, _) = bundled("no_flag").unwrap();
        let m = metrics(&ChiMatrix::from_vector(&chi_vector(&seq)), None);
        assert!(matches!(m.eps_r(), Err(Error::MissingResetState(_))));
    }

    #[test]
    fn chunked_sampling_is_deterministic() {
        let (seq, _) = bundled("best_flag").unwrap();
        let model = NoiseModel::new(0.01, Correlation::Markovian).unwrap();
        let a = chi_average(&seq, &model, CHUNK + 17, 5).unwrap();
        let b = chi_average(&seq, &model, CHUNK + 17, 5).unwrap();
        assert_eq!(a, b);
        let c = chi_average(&seq, &model, CHUNK + 17, 6).unwrap();
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn observables_match_matrix_formulas() {
        let (seq, _) = bundled("worst_flag").unwrap();
        let model = NoiseModel::new(0.03, Correlation::Static).unwrap();
        let chi = chi_average(&seq, &model, 2000, 2).unwrap();
        let mo = chi.moments.clone().unwrap();
        let m = metrics(&chi, None);
        let direct = [m.p_l_ind, m.f_e, m.f_q, m.one_minus_f2, m.eps_f, m.eps_5, m.eps_8, m.eps_l_rem];
        for (k, e) in direct.iter().enumerate() {
            assert!((mo.obs[k].mean - e.mean).abs() < 1e-12, "observable {k}");
        }
    }

    #[test]
    fn zero_samples_is_an_error() {
        let (seq, _) = bundled("no_flag").unwrap();
        let model = NoiseModel::new(0.01, Correlation::Static).unwrap();
        assert!(chi_average(&seq, &model, 0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (seq, _) = bundled("no_flag").unwrap();
        let reset = extract_reset_state(&isometry(&seq)).unwrap();
        let pts = sweep(&seq, QaReversal::NONE, Some(&reset), &[0.0, 0.01], Correlation::Static, 300, 4).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &pts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, &buf).unwrap();
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], CsvRow::from(&pts[1]));
        let header = String::from_utf8(buf).unwrap();
        assert!(header.starts_with(
            "sigma,p_L_ind,sem_p_L_ind,F_Q,F_e,one_minus_F2,eps_F,eps_5,eps_8,eps_L_rem,eps_R,n_samples,seed"
        ));
    }
}
