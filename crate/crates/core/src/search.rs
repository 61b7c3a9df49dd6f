//! Basin-hopping search for reset-if-leaked sequences.
//!
//! Local descent is BFGS on central finite-difference gradients. The outer loop
//! follows the usual basin-hopping scheme: uniform perturbation of every
//! coordinate, local minimisation, Metropolis acceptance, and periodic step
//! size adaptation towards an acceptance rate of one half.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{circular_distance, isometry, normalize_angle, ExchangeSequence};
use crate::link::SLOT_COUNT;
use crate::objective::{
    extract_qubit_gate, extract_reset_state, f_total, f_total_iso, gate_distance, GateConstraint,
    QaReversal, ResetState, RilSpec, SOLUTION_THRESHOLD,
};
use crate::sequence::{round_significant, ANGLE_DIGITS};

/// Tolerance for both the angle and the Bloch-vector test in [`dedup`].
pub const DEDUP_TOL: f64 = 1e-6;

/// Settings of the local quasi-Newton descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    /// central-difference step
    pub fd_step: f64,
    /// stop once the gradient norm falls below this
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            fd_step: 1e-7,
            grad_tol: 1e-8,
            max_iter: 2000,
        }
    }
}

/// Outcome of [`local_minimize`].
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// objective value after each accepted step, starting with `f(x0)`
    pub history: Vec<f64>,
}

struct Counted<'a, F> {
    f: &'a F,
    evals: usize,
    iteration: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                value: v,
                iteration: self.iteration,
            })
        }
    }

    fn gradient(&mut self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut xp = x.to_vec();
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = self.eval(&xp)?;
            xp[i] = xi - h;
            let fm = self.eval(&xp)?;
            xp[i] = xi;
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// BFGS descent with an Armijo backtracking line search.
///
/// The returned value never exceeds `f(x0)`. Stops when the gradient norm drops
/// below `cfg.grad_tol`, when the line search can no longer make progress, or
/// after `cfg.max_iter` iterations.
pub fn local_minimize<F>(f: &F, x0: &[f64], cfg: &LocalConfig) -> Result<LocalResult>
where
    F: Fn(&[f64]) -> f64,
{
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("starting point is not finite"));
    }
    let n = x0.len();
    let mut cf = Counted {
        f,
        evals: 0,
        iteration: 0,
    };
    let mut x = x0.to_vec();
    let mut fx = cf.eval(&x)?;
    let mut history = vec![fx];
    if n == 0 {
        return Ok(LocalResult {
            x,
            f: fx,
            grad_norm: 0.0,
            iterations: 0,
            evaluations: cf.evals,
            history,
        });
    }
    let mut g = cf.gradient(&x, cfg.fd_step)?;
    // inverse Hessian estimate, row-major
    let mut hinv = identity(n);
    let mut iterations = 0;
    while iterations < cfg.max_iter && norm(&g) >= cfg.grad_tol {
        iterations += 1;
        cf.iteration = iterations;
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&hinv[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hinv = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fn_ = cf.eval(&xn)?;
            if fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            if hinv == identity(n) {
                break;
            }
            // retry along steepest descent next iteration
            hinv = identity(n);
            continue;
        };
        let gn = cf.gradient(&xn, cfg.fd_step)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        let stalled = fx - fn_ <= f64::EPSILON * fx.abs() && norm(&s) <= 1e-15 * (1.0 + norm(&x));
        x = xn;
        fx = fn_;
        g = gn;
        history.push(fx);
        if stalled {
            break;
        }
    }
    Ok(LocalResult {
        grad_norm: norm(&g),
        x,
        f: fx,
        iterations,
        evaluations: cf.evals,
        history,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Maps a parameter vector to a sequence and reversal: the active angles in slot
/// order, followed by `(φ, γ)` for unflaggable specs.
#[derive(Debug, Clone, Copy)]
pub struct Parametrization {
    pub mask: [bool; SLOT_COUNT],
    pub spec: RilSpec,
    slots: [usize; SLOT_COUNT],
    n_active: usize,
}

impl Parametrization {
    pub fn new(mask: [bool; SLOT_COUNT], spec: RilSpec) -> Result<Self> {
        ExchangeSequence::zeros(mask)?;
        let mut slots = [0; SLOT_COUNT];
        let mut n_active = 0;
        for (k, &m) in mask.iter().enumerate() {
            if m {
                slots[n_active] = k;
                n_active += 1;
            }
        }
        Ok(Parametrization {
            mask,
            spec,
            slots,
            n_active,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_active + if self.spec.flaggable { 0 } else { 2 }
    }

    pub fn decode(&self, x: &[f64]) -> (ExchangeSequence, QaReversal) {
        let mut angles = [0.0; SLOT_COUNT];
        for i in 0..self.n_active {
            angles[self.slots[i]] = x[i];
        }
        let seq = ExchangeSequence::new(angles, self.mask).expect("mask validated at construction");
        let rev = if self.spec.flaggable {
            QaReversal::NONE
        } else {
            QaReversal::new(x[self.n_active], x[self.n_active + 1])
        };
        (seq, rev)
    }

    pub fn encode(&self, seq: &ExchangeSequence, rev: QaReversal) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n_active).map(|i| seq.angles()[self.slots[i]]).collect();
        if !self.spec.flaggable {
            x.push(rev.phi);
            x.push(rev.gamma);
        }
        x
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::NAN;
        }
        let (seq, rev) = self.decode(x);
        f_total_iso(&isometry(&seq), rev, &self.spec)
    }
}

/// A sequence found by the search that satisfies the target below threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    /// units of π, in `[0, 2)`
    pub angles_pi: Vec<f64>,
    pub mask: Vec<bool>,
    pub flaggable: bool,
    pub gate: GateConstraint,
    /// QA reversal in units of π; absent for flaggable solutions
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rev_pi: Option<[f64; 2]>,
    pub f_total: f64,
    pub gate_distance: f64,
    pub reset_theta_pi: f64,
    pub reset_phi_pi: f64,
    pub seed: u64,
    pub restart: u64,
    pub hop: u64,
}

impl SolutionRecord {
    /// Build a record from a converged point. Angles are normalised into
    /// `[0, 2π)` and rounded to the on-disk precision before scoring, so the
    /// stored values re-verify from the record alone.
    pub fn from_point(
        seq: &ExchangeSequence,
        rev: QaReversal,
        spec: &RilSpec,
        seed: u64,
        restart: u64,
        hop: u64,
    ) -> Result<Self> {
        let norm_seq = seq.normalized();
        let angles_pi: Vec<f64> = norm_seq
            .angles_pi()
            .iter()
            .map(|&a| round_significant(a, ANGLE_DIGITS))
            .collect();
        let rev_pi = (!spec.flaggable).then(|| {
            let r = rev.normalized();
            [
                round_significant(r.phi / PI, ANGLE_DIGITS),
                round_significant(r.gamma / PI, ANGLE_DIGITS),
            ]
        });
        let mut rec = SolutionRecord {
            angles_pi,
            mask: seq.mask().to_vec(),
            flaggable: spec.flaggable,
            gate: spec.gate,
            rev_pi,
            f_total: 0.0,
            gate_distance: 0.0,
            reset_theta_pi: 0.0,
            reset_phi_pi: 0.0,
            seed,
            restart,
            hop,
        };
        let seq = rec.sequence()?;
        let rev = rec.reversal();
        let iso = isometry(&seq);
        rec.f_total = f_total_iso(&iso, rev, &rec.spec());
        let u = extract_qubit_gate(&iso, rev)?;
        rec.gate_distance = gate_distance(&u, spec.gate);
        let reset = extract_reset_state(&iso)?;
        rec.reset_theta_pi = reset.theta_bloch / PI;
        rec.reset_phi_pi = reset.phi_bloch / PI;
        Ok(rec)
    }

    pub fn spec(&self) -> RilSpec {
        RilSpec::new(self.flaggable, self.gate)
    }

    pub fn sequence(&self) -> Result<ExchangeSequence> {
        let angles: [f64; SLOT_COUNT] = self
            .angles_pi
            .iter()
            .map(|a| a * PI)
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|_| Error::invalid("solution record must hold 20 angles"))?;
        let mask: [bool; SLOT_COUNT] = self
            .mask
            .as_slice()
            .try_into()
            .map_err(|_| Error::invalid("solution record must hold 20 mask entries"))?;
        ExchangeSequence::new(angles, mask)
    }

    pub fn reversal(&self) -> QaReversal {
        match self.rev_pi {
            Some([p, g]) => QaReversal::new(p * PI, g * PI),
            None => QaReversal::NONE,
        }
    }

    pub fn reset_state(&self) -> ResetState {
        ResetState::from_bloch(self.reset_theta_pi * PI, self.reset_phi_pi * PI)
    }

    /// `f_total` recomputed from the stored angles.
    pub fn reverify(&self) -> Result<f64> {
        Ok(f_total(&self.sequence()?, self.reversal(), &self.spec()))
    }

    /// Equivalence used by [`dedup`].
    pub fn equivalent(&self, other: &SolutionRecord) -> bool {
        self.mask == other.mask
            && self
                .angles_pi
                .iter()
                .zip(&other.angles_pi)
                .all(|(a, b)| circular_distance(a * PI, b * PI) < DEDUP_TOL)
            && self.reset_state().bloch_distance(&other.reset_state()) < DEDUP_TOL
    }
}

/// Merge equivalent records, keeping the lowest `f_total` of each class.
///
/// Records are processed in order of increasing `f_total` (ties broken by
/// angles), so the result does not depend on the input order.
pub fn dedup(mut records: Vec<SolutionRecord>) -> Vec<SolutionRecord> {
    records.sort_by(|a, b| {
        a.f_total
            .total_cmp(&b.f_total)
            .then_with(|| cmp_slices(&a.angles_pi, &b.angles_pi))
            .then_with(|| (a.seed, a.restart, a.hop).cmp(&(b.seed, b.restart, b.hop)))
    });
    let mut kept: Vec<SolutionRecord> = Vec::new();
    for r in records {
        if !kept.iter().any(|k| k.equivalent(&r)) {
            kept.push(r);
        }
    }
    kept
}

fn cmp_slices(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.total_cmp(y);
        if o.is_ne() {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Basin-hopping configuration. Defaults: T = 1e-5, step 2π, 100 hops, interval 50.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub temperature: f64,
    pub stepsize: f64,
    /// hops per restart
    pub iterations: usize,
    /// hops between step size adjustments
    pub interval: usize,
    pub mask: [bool; SLOT_COUNT],
    pub spec: RilSpec,
    pub seed: u64,
    pub success_threshold: f64,
    pub max_restarts: usize,
    /// index of the first restart (restarts are numbered from here)
    pub first_restart: u64,
    /// stop a restart, and skip the remaining ones, after the first success
    pub stop_at_first: bool,
    pub local: LocalConfig,
}

impl SearchConfig {
    pub fn new(mask: [bool; SLOT_COUNT], spec: RilSpec, seed: u64) -> Self {
        SearchConfig {
            temperature: 1e-5,
            stepsize: TAU,
            iterations: 100,
            interval: 50,
            mask,
            spec,
            seed,
            success_threshold: SOLUTION_THRESHOLD,
            max_restarts: 20,
            first_restart: 0,
            stop_at_first: false,
            local: LocalConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid("temperature must be positive and finite"));
        }
        if !(self.stepsize > 0.0) || !self.stepsize.is_finite() {
            return Err(Error::invalid("stepsize must be positive and finite"));
        }
        if self.interval == 0 {
            return Err(Error::invalid("interval must be at least 1"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::invalid("success threshold must be positive"));
        }
        Ok(())
    }
}

/// Statistics of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub restart: u64,
    pub hops: usize,
    pub accepted: usize,
    pub final_stepsize: f64,
    pub best_f: f64,
    pub successes: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// distinct solutions, best first
    pub records: Vec<SolutionRecord>,
    pub reports: Vec<RestartReport>,
}

/// RNG for restart `restart` of a search seeded with `seed`.
pub fn restart_rng(seed: u64, restart: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    rng
}

/// One basin-hopping chain.
pub fn run_restart(cfg: &SearchConfig, restart: u64) -> Result<(Vec<SolutionRecord>, RestartReport)> {
    cfg.validate()?;
    let par = Parametrization::new(cfg.mask, cfg.spec)?;
    let mut rng = restart_rng(cfg.seed, restart);
    let f = |x: &[f64]| par.objective(x);
    let dim = par.dim();
    let mut report = RestartReport {
        restart,
        hops: 0,
        accepted: 0,
        final_stepsize: cfg.stepsize,
        best_f: f64::INFINITY,
        successes: 0,
    };
    let mut found = Vec::new();
    if par.n_active == 0 {
        // nothing to optimise; the objective is a constant
        let x: Vec<f64> = vec![0.0; dim];
        report.best_f = f(&x);
        return Ok((found, report));
    }
    let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..TAU)).collect();
    let first = local_minimize(&f, &x0, &cfg.local)?;
    let (mut x, mut fx) = (first.x, first.f);
    report.best_f = fx;
    let record = |x: &[f64], fx: f64, hop: u64, found: &mut Vec<SolutionRecord>| -> bool {
        if fx >= cfg.success_threshold {
            return false;
        }
        let (seq, rev) = par.decode(x);
        match SolutionRecord::from_point(&seq, rev, &cfg.spec, cfg.seed, restart, hop) {
            Ok(r) if r.f_total < cfg.success_threshold => {
                found.push(r);
                true
            }
            _ => false,
        }
    };
    if record(&x, fx, 0, &mut found) && cfg.stop_at_first {
        report.successes = 1;
        return Ok((found, report));
    }
    let mut stepsize = cfg.stepsize;
    let mut window_trials = 0usize;
    let mut window_accepts = 0usize;
    for hop in 1..=cfg.iterations {
        let trial: Vec<f64> = x
            .iter()
            .map(|v| v + rng.random_range(-stepsize..=stepsize))
            .collect();
        let res = local_minimize(&f, &trial, &cfg.local)?;
        let u: f64 = rng.random();
        let accept = res.f < fx || u < (-(res.f - fx) / cfg.temperature).exp();
        report.hops += 1;
        window_trials += 1;
        if res.f < report.best_f {
            report.best_f = res.f;
        }
        let success = record(&res.x, res.f, hop as u64, &mut found);
        if accept {
            x = res.x;
            fx = res.f;
            report.accepted += 1;
            window_accepts += 1;
        }
        if success && cfg.stop_at_first {
            break;
        }
        if hop % cfg.interval == 0 {
            let rate = window_accepts as f64 / window_trials as f64;
            if rate > 0.5 {
                stepsize /= 0.9;
            } else {
                stepsize *= 0.9;
            }
            window_trials = 0;
            window_accepts = 0;
        }
    }
    report.final_stepsize = stepsize;
    report.successes = found.len();
    Ok((dedup(found), report))
}

/// Independent seeded restarts, run in parallel, merged and deduplicated.
///
/// With `stop_at_first` the restarts run one after another and the search ends
/// with the first restart that produces a solution.
pub fn basin_hop(cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let restarts: Vec<u64> = (0..cfg.max_restarts as u64)
        .map(|i| cfg.first_restart + i)
        .collect();
    let results: Vec<(Vec<SolutionRecord>, RestartReport)> = if cfg.stop_at_first {
        let mut out = Vec::new();
        for &r in &restarts {
            let res = run_restart(cfg, r)?;
            let done = !res.0.is_empty();
            out.push(res);
            if done {
                break;
            }
        }
        out
    } else {
        restarts
            .par_iter()
            .map(|&r| run_restart(cfg, r))
            .collect::<Result<Vec<_>>>()?
    };
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for (recs, rep) in results {
        records.extend(recs);
        reports.push(rep);
    }
    Ok(SearchOutcome {
        records: dedup(records),
        reports,
    })
}

/// On-disk catalog of solutions. `next_restart` lets a census resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub seed: u64,
    #[serde(default)]
    pub next_restart: u64,
    /// run manifest that produced this file
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default)]
    pub solution: Vec<SolutionRecord>,
}

impl Catalog {
    pub fn read(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("cannot serialise catalog: {e}")))
    }

    /// Write atomically (temporary file, then rename).
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("toml.tmp");
        std::fs::write(&tmp, self.to_toml()?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn merge(&mut self, records: Vec<SolutionRecord>) {
        let mut all = std::mem::take(&mut self.solution);
        all.extend(records);
        self.solution = dedup(all);
    }
}

/// Long-running census: batches of `cfg.max_restarts` restarts, checkpointed to
/// `path` after each batch, until `total_restarts` have run. Resumes from an
/// existing catalog with the same seed.
pub fn census(
    cfg: &SearchConfig,
    total_restarts: u64,
    path: &Path,
    mut progress: impl FnMut(&Catalog),
) -> Result<Catalog> {
    let mut catalog = if path.exists() {
        let c = Catalog::read(path)?;
        if c.seed != cfg.seed {
            return Err(Error::invalid(format!(
                "checkpoint {} was written with seed {}, not {}",
                path.display(),
                c.seed,
                cfg.seed
            )));
        }
        c
    } else {
        Catalog {
            seed: cfg.seed,
            next_restart: 0,
            manifest: None,
            solution: Vec::new(),
        }
    };
    let batch = cfg.max_restarts.max(1) as u64;
    while catalog.next_restart < total_restarts {
        let n = batch.min(total_restarts - catalog.next_restart);
        let mut c = *cfg;
        c.first_restart = catalog.next_restart;
        c.max_restarts = n as usize;
        c.stop_at_first = false;
        let out = basin_hop(&c)?;
        catalog.merge(out.records);
        catalog.next_restart += n;
        catalog.write(path)?;
        progress(&catalog);
    }
    Ok(catalog)
}

/// Angles (radians) of `x` wrapped into `[0, 2π)`.
pub fn wrap_all(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| normalize_angle(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::bundled;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let res = local_minimize(&f, &[0.0; 6], &LocalConfig::default()).unwrap();
        assert!(res.f < 1e-16, "{}", res.f);
        assert!(res.x.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = local_minimize(&f, &[-1.2, 1.0], &LocalConfig::default()).unwrap();
        assert!(res.f < 1e-14, "{}", res.f);
    }

    #[test]
    fn history_is_nonincreasing() {
        let (seq, _) = bundled("no_flag").unwrap();
        let spec = RilSpec::new(false, GateConstraint::Identity);
        let par = Parametrization::new(*seq.mask(), spec).unwrap();
        let mut rng = restart_rng(3, 0);
        let x0: Vec<f64> = (0..par.dim()).map(|_| rng.random_range(0.0..TAU)).collect();
        let res = local_minimize(&|x: &[f64]| par.objective(x), &x0, &LocalConfig::default()).unwrap();
        assert!(res.f >= 0.0);
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.f <= par.objective(&x0));
    }

    #[test]
    fn non_finite_objective_aborts() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        assert!(matches!(
            local_minimize(&f, &[0.0], &LocalConfig::default()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn parametrization_round_trip() {
        let (seq, _) = bundled("no_flag").unwrap();
        let spec = RilSpec::new(false, GateConstraint::Identity);
        let par = Parametrization::new(*seq.mask(), spec).unwrap();
        assert_eq!(par.dim(), 16);
        let rev = QaReversal::new(0.3, 1.2);
        let x = par.encode(&seq, rev);
        let (s2, r2) = par.decode(&x);
        assert_eq!(s2, seq);
        assert_eq!(r2, rev);
    }

    #[test]
    fn empty_mask_finds_nothing() {
        let spec = RilSpec::new(true, GateConstraint::Identity);
        let mut cfg = SearchConfig::new([false; SLOT_COUNT], spec, 1);
        cfg.max_restarts = 2;
        let out = basin_hop(&cfg).unwrap();
        assert!(out.records.is_empty());
        assert!(out.reports.iter().all(|r| r.best_f >= 1.0));
    }

    fn no_flag_record() -> SolutionRecord {
        let (seq, _) = bundled("no_flag").unwrap();
        let spec = RilSpec::new(false, GateConstraint::Identity);
        let rev = crate::objective::best_reversal(&isometry(&seq));
        SolutionRecord::from_point(&seq, rev, &spec, 0, 0, 0).unwrap()
    }

    #[test]
    fn record_reverifies_and_dedups_periodic_copy() {
        let rec = no_flag_record();
        assert!(rec.reverify().unwrap() < 1e-9);
        assert!(rec.angles_pi.iter().all(|&a| (0.0..2.0).contains(&a)));
        let mut shifted = rec.clone();
        shifted.angles_pi[0] += 2.0;
        shifted.f_total = rec.f_total * 2.0 + 1e-20;
        let out = dedup(vec![shifted, rec.clone()]);
        assert_eq!(out, vec![rec]);
    }

    #[test]
    fn distinct_reset_states_are_kept() {
        let a = no_flag_record();
        let mut b = a.clone();
        b.reset_theta_pi += 0.1;
        assert_eq!(dedup(vec![a, b]).len(), 2);
    }

    #[test]
    fn catalog_round_trip() {
        let cat = Catalog {
            seed: 9,
            next_restart: 4,
            manifest: Some("run.manifest.toml".into()),
            solution: vec![no_flag_record()],
        };
        let text = cat.to_toml().unwrap();
        let back: Catalog = toml::from_str(&text).unwrap();
        assert_eq!(back, cat);
    }
}
