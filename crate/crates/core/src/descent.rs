//! Extreme-point descent inside the set of marginal tracial states, the
//! trace-norm probe on `ℂI + V`, and single-trial hunt logic.
//!
//! A non-extremal `h` has a Hermitian `v ∈ R(B⊗B)R ∩ V`. Both `h ± t·v` stay
//! marginal tracial while PSD, so moving to the positivity boundary along the
//! better-conditioned sign strictly lowers the rank.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

// Unused when std is linked in (e.g. via dev-dependencies); needed for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::extremality::{
    certify, compress, t23_with_range, witness_residual, Certificate, WITNESS_TOL,
};
use crate::hsspace::{eigh, range_projection, trace_norm, RangeProjection};
use crate::margstates::{
    check_marginal, marginal_residuals, proj_ci_plus_v, sample_mts_with, SampleMethod, StateElement,
};
use crate::matrix::{Matrix, C64};
use crate::random::random_psd;
use crate::{Error, Result, Tolerances};

/// Below this `λ_min(g)/λ_max(g)` the step is found by bisection.
pub const CONDITION_FLOOR: f64 = 1e-10;
const BISECTION_ITERS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub rank_before: usize,
    pub rank_after: usize,
    pub step_size: f64,
    /// `+1` for `h + t·v`, `−1` for `h − t·v`.
    pub direction_sign: i8,
    pub direction_norm: f64,
    /// `max(‖P(h′)−I‖₂, ‖Q(h′)−I‖₂)` after the step.
    pub marginal_residual: f64,
    pub min_eigenvalue_ratio: f64,
    pub bisection: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DescentOutcome {
    Extremal,
    MaxSteps,
    /// A step failed to lower the rank even after tightening.
    Stalled,
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DescentTrace {
    pub steps: Vec<StepRecord>,
    pub terminal: StateElement,
    pub terminal_certificate: Certificate,
    pub seed: Option<u64>,
    pub outcome: DescentOutcome,
}

impl DescentTrace {
    pub fn is_success(&self) -> bool {
        self.outcome == DescentOutcome::Extremal && self.terminal_certificate.is_extremal()
    }
}

/// Largest `t ≥ 0` with `g + sign·t·w ⪰ 0` via `g^{-1/2} w g^{-1/2}`.
fn generalized_step(g: &Matrix, w: &Matrix, sign: f64) -> Result<f64> {
    let ginv = eigh(g)?.map(|x| 1.0 / x.sqrt());
    let m = (&(&ginv * w) * &ginv).hermitian_part();
    let e = eigh(&m)?;
    // g + s t w ⪰ 0  ⇔  I + s t M ⪰ 0.
    let extreme = if sign < 0.0 { e.max() } else { -e.min() };
    if extreme <= 0.0 {
        return Err(Error::Inconsistent("descent direction is unbounded"));
    }
    Ok(1.0 / extreme)
}

/// Largest `t` with `λ_min(h + sign·t·v) ≥ −floor·λ_max(h)` by bisection.
fn bisection_step(h: &Matrix, v: &Matrix, sign: f64, floor: f64) -> Result<f64> {
    let scale = eigh(h)?.max();
    let feasible = |t: f64| -> Result<bool> {
        let mut x = h.clone();
        x.axpy(C64::new(sign * t, 0.0), v);
        Ok(eigh(&x.hermitian_part())?.min() >= -floor * scale)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Inconsistent("descent direction is unbounded"));
        }
    }
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

struct Step {
    state: Matrix,
    t: f64,
    sign: i8,
    bisection: bool,
}

fn take_step(h: &Matrix, v: &Matrix, rp: &RangeProjection) -> Result<Step> {
    let u = &rp.basis;
    let g = u.adjoint_mul(&h.matmul(u)).hermitian_part();
    let w = u.adjoint_mul(&v.matmul(u)).hermitian_part();
    let ge = eigh(&g)?;
    let well_conditioned = ge.max() > 0.0 && ge.min() / ge.max() >= CONDITION_FLOOR;
    let (t_minus, t_plus) = if well_conditioned {
        (
            generalized_step(&g, &w, -1.0)?,
            generalized_step(&g, &w, 1.0)?,
        )
    } else {
        (
            bisection_step(h, v, -1.0, 0.0)?,
            bisection_step(h, v, 1.0, 0.0)?,
        )
    };
    let (t, sign) = if t_plus > t_minus {
        (t_plus, 1i8)
    } else {
        (t_minus, -1i8)
    };
    let mut state = h.clone();
    state.axpy(C64::new(f64::from(sign) * t, 0.0), v);
    Ok(Step {
        state: state.hermitian_part(),
        t,
        sign,
        bisection: !well_conditioned,
    })
}

/// Descends from `h` to an extreme point, at most `max_steps` steps.
pub fn descend(h: &StateElement, tols: &Tolerances, max_steps: usize) -> Result<DescentTrace> {
    let n = h.n();
    let report = check_marginal(h, tols.tol);
    if !report.is_marginal_tracial {
        return Err(Error::NotMarginal {
            residual: report.max_residual(),
        });
    }
    let mut current = h.clone();
    let mut steps = Vec::new();
    let outcome = loop {
        let rp = range_projection(current.matrix(), tols.rank_tol)?;
        let t23 = t23_with_range(n, &rp, tols)?;
        if t23.extremal {
            break DescentOutcome::Extremal;
        }
        if steps.len() >= max_steps {
            break DescentOutcome::MaxSteps;
        }
        let v = t23
            .witness
            .ok_or(Error::Inconsistent("non-extremal state without witness"))?;
        if witness_residual(&v, &rp.projection, n)? > WITNESS_TOL {
            return Err(Error::Inconsistent("witness fails membership checks"));
        }
        let hm = current.matrix();
        let mut step = take_step(hm, &v, &rp)?;
        let mut after = range_projection(&step.state, tols.rank_tol)?;
        if after.rank >= rp.rank {
            // Retry once, landing within a tenth of rank_tol of the boundary.
            let floor = tols.rank_tol / 10.0;
            let sign = f64::from(step.sign);
            let t = bisection_step(hm, &v, sign, floor)?;
            let mut state = hm.clone();
            state.axpy(C64::new(sign * t, 0.0), &v);
            step = Step {
                state: state.hermitian_part(),
                t,
                sign: step.sign,
                bisection: true,
            };
            after = range_projection(&step.state, tols.rank_tol)?;
            if after.rank >= rp.rank {
                break DescentOutcome::Stalled;
            }
        }
        let next = StateElement::new(n, step.state, tols.rank_tol)?;
        let (p_res, q_res) = marginal_residuals(next.matrix(), n)?;
        let lmax = after.eigen.max();
        steps.push(StepRecord {
            rank_before: rp.rank,
            rank_after: after.rank,
            step_size: step.t,
            direction_sign: step.sign,
            direction_norm: v.hs_norm(),
            marginal_residual: p_res.max(q_res),
            min_eigenvalue_ratio: if lmax > 0.0 {
                after.eigen.min() / lmax
            } else {
                0.0
            },
            bisection: step.bisection,
        });
        current = next;
    };
    let terminal_certificate = certify(&current, tols);
    Ok(DescentTrace {
        steps,
        terminal: current,
        terminal_certificate,
        seed: None,
        outcome,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeResult {
    /// `‖(I − (P−Q)²)(k)‖₁`.
    pub trace_norm: f64,
    pub is_psd: bool,
    /// Evaluated only when PSD with trace norm at most `1 + tol`.
    pub is_marginal: Option<bool>,
}

fn probe_unchecked(k: &Matrix, n: usize, tols: &Tolerances) -> Result<ProbeResult> {
    let l = proj_ci_plus_v(k, n)?.hermitian_part();
    let tn = trace_norm(&l);
    let e = eigh(&l)?;
    let is_psd = e.min() >= -tols.tol * e.max().abs().max(1.0);
    let is_marginal = if is_psd && tn <= 1.0 + tols.tol {
        let (p, q) = marginal_residuals(&l, n)?;
        Some(p.max(q) <= tols.tol)
    } else {
        None
    };
    Ok(ProbeResult {
        trace_norm: tn,
        is_psd,
        is_marginal,
    })
}

fn require_extremal_range(h0: &StateElement, tols: &Tolerances) -> Result<RangeProjection> {
    let report = check_marginal(h0, tols.tol);
    if !report.is_marginal_tracial {
        return Err(Error::NotMarginal {
            residual: report.max_residual(),
        });
    }
    let rp = range_projection(h0.matrix(), tols.rank_tol)?;
    if !t23_with_range(h0.n(), &rp, tols)?.extremal {
        return Err(Error::NotExtremal);
    }
    Ok(rp)
}

/// Trace norm of the `ℂI + V` projection of a state `k` supported on the range of an extreme `h0`.
pub fn probe_problem(
    h0: &StateElement,
    k: &StateElement,
    tols: &Tolerances,
) -> Result<ProbeResult> {
    if k.n() != h0.n() {
        return Err(Error::DimensionMismatch {
            expected: h0.n(),
            found: k.n(),
        });
    }
    let rp = require_extremal_range(h0, tols)?;
    let km = k.matrix();
    let leak = (km - &compress(&rp.projection, km)).hs_norm();
    if leak > tols.tol * km.hs_norm().max(1.0) {
        return Err(Error::InvalidArgument(
            "k is not supported on the range of h0",
        ));
    }
    probe_unchecked(km, h0.n(), tols)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeSummary {
    pub samples: usize,
    pub max_trace_norm: f64,
    pub min_trace_norm: f64,
    /// Samples whose projection was PSD with trace norm `≤ 1 + tol` but not marginal tracial.
    pub non_marginal_count: usize,
    pub non_psd_count: usize,
}

/// Probes `h0` itself plus `samples` random states supported on its range.
pub fn probe_random<R: Rng + ?Sized>(
    h0: &StateElement,
    samples: usize,
    rng: &mut R,
    tols: &Tolerances,
) -> Result<ProbeSummary> {
    let n = h0.n();
    let rp = require_extremal_range(h0, tols)?;
    let first = probe_unchecked(h0.matrix(), n, tols)?;
    let mut summary = ProbeSummary {
        samples: 0,
        max_trace_norm: first.trace_norm,
        min_trace_norm: first.trace_norm,
        non_marginal_count: 0,
        non_psd_count: 0,
    };
    if rp.rank == 1 {
        return Ok(summary);
    }
    for _ in 0..samples {
        let w = random_psd(rng, rp.rank, 0.0);
        let k = rp.basis.matmul(&w.matmul(&rp.basis.adjoint()));
        let k = k.scale_real(1.0 / k.tau().re).hermitian_part();
        let p = probe_unchecked(&k, n, tols)?;
        summary.samples += 1;
        summary.max_trace_norm = summary.max_trace_norm.max(p.trace_norm);
        summary.min_trace_norm = summary.min_trace_norm.min(p.trace_norm);
        if !p.is_psd {
            summary.non_psd_count += 1;
        }
        if p.is_marginal == Some(false) {
            summary.non_marginal_count += 1;
        }
    }
    Ok(summary)
}

/// Settings shared by every hunt trial.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HuntConfig {
    pub n: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Defaults to `n²`.
    pub max_steps: usize,
    pub probe_samples: usize,
}

impl HuntConfig {
    pub fn new(n: usize, seed: u64, tolerances: Tolerances) -> Self {
        HuntConfig {
            n,
            seed,
            tolerances,
            max_steps: n * n,
            probe_samples: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrialOutcome {
    Pure,
    Candidate,
    Failure,
}

/// A terminal extreme point that was not certified pure.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CandidateRecord {
    pub trial: usize,
    pub state: StateElement,
    pub certificate: Certificate,
    /// Certificate with every tolerance divided by ten.
    pub reverify_certificate: Certificate,
    pub reverified: bool,
    pub steps: Vec<StepRecord>,
    pub probe: Option<ProbeSummary>,
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub trial: usize,
    pub method: String,
    pub initial_rank: usize,
    pub terminal_rank: Option<usize>,
    pub steps: usize,
    pub outcome: TrialOutcome,
    pub probe_max: Option<f64>,
    pub failure: Option<String>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub candidate: Option<CandidateRecord>,
}

/// RNG for one trial: `ChaCha8` seeded with `seed`, stream `trial`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Even trials sample mixtures, odd trials project-and-shrink.
pub fn trial_method(trial: usize) -> SampleMethod {
    if trial.is_multiple_of(2) {
        SampleMethod::Mixture
    } else {
        SampleMethod::ProjectShrink
    }
}

/// One hunt trial; a pure function of `(config, trial)`.
pub fn hunt_trial(config: &HuntConfig, trial: usize) -> TrialRecord {
    let mut rng = trial_rng(config.seed, trial);
    let method = trial_method(trial);
    let mut record = TrialRecord {
        trial,
        method: method.as_str().to_string(),
        initial_rank: 0,
        terminal_rank: None,
        steps: 0,
        outcome: TrialOutcome::Failure,
        probe_max: None,
        failure: None,
        candidate: None,
    };
    if let Err(e) = run_trial(config, trial, method, &mut rng, &mut record) {
        record.outcome = TrialOutcome::Failure;
        record.failure = Some(format!("{e}"));
    }
    record
}

fn run_trial(
    config: &HuntConfig,
    trial: usize,
    method: SampleMethod,
    rng: &mut ChaCha8Rng,
    record: &mut TrialRecord,
) -> Result<()> {
    let tols = &config.tolerances;
    let h = sample_mts_with(config.n, rng, method)?;
    record.initial_rank = range_projection(h.matrix(), tols.rank_tol)?.rank;
    let trace = descend(&h, tols, config.max_steps)?;
    record.steps = trace.steps.len();
    record.terminal_rank = Some(trace.terminal_certificate.rank);
    let cert = &trace.terminal_certificate;
    match trace.outcome {
        DescentOutcome::Extremal => {}
        DescentOutcome::MaxSteps => {
            record.failure = Some("max_steps exceeded".to_string());
            return Ok(());
        }
        DescentOutcome::Stalled => {
            record.failure = Some("descent step did not lower the rank".to_string());
            return Ok(());
        }
    }
    if !cert.is_consistent() {
        record.failure = Some(format!(
            "inconsistent certificate: {}",
            cert.inconsistencies.join("; ")
        ));
        return Ok(());
    }
    if !cert.is_extremal() {
        record.failure = Some("terminal state not certified extremal".to_string());
        return Ok(());
    }
    match cert.verdict_pure {
        Some(true) => {
            let p = probe_unchecked(trace.terminal.matrix(), config.n, tols)?;
            record.probe_max = Some(p.trace_norm);
            record.outcome = TrialOutcome::Pure;
        }
        Some(false) => {
            let fine = tols.tightened(10.0);
            let tightened = trace.terminal.with_rank_tol(fine.rank_tol)?;
            let reverify_certificate = certify(&tightened, &fine);
            let reverified = reverify_certificate.is_extremal()
                && reverify_certificate.verdict_pure == Some(false)
                && reverify_certificate.is_consistent();
            let probe = probe_random(&trace.terminal, config.probe_samples, rng, tols)?;
            record.probe_max = Some(probe.max_trace_norm);
            record.outcome = TrialOutcome::Candidate;
            record.candidate = Some(CandidateRecord {
                trial,
                state: trace.terminal.clone(),
                certificate: cert.clone(),
                reverify_certificate,
                reverified,
                steps: trace.steps.clone(),
                probe: Some(probe),
            });
        }
        None => {
            record.failure = Some("purity verdict missing".to_string());
        }
    }
    Ok(())
}

/// Aggregate over trials, ordered by trial index.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HuntReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub max_steps: usize,
    pub probe_samples: usize,
    pub pure_count: usize,
    pub candidate_count: usize,
    pub reverified_candidate_count: usize,
    pub failure_count: usize,
    /// Terminal rank of every certified extreme point.
    pub rank_histogram: BTreeMap<usize, usize>,
    pub max_probe: Option<f64>,
    pub max_probe_trial: Option<usize>,
    pub candidates: Vec<CandidateRecord>,
    pub trial_records: Vec<TrialRecord>,
}

impl HuntReport {
    /// Merges records; sorting by trial index makes the result independent of completion order.
    pub fn from_records(config: &HuntConfig, mut records: Vec<TrialRecord>) -> Self {
        records.sort_by_key(|r| r.trial);
        let mut report = HuntReport {
            n: config.n,
            trials: records.len(),
            seed: config.seed,
            tolerances: config.tolerances,
            max_steps: config.max_steps,
            probe_samples: config.probe_samples,
            pure_count: 0,
            candidate_count: 0,
            reverified_candidate_count: 0,
            failure_count: 0,
            rank_histogram: BTreeMap::new(),
            max_probe: None,
            max_probe_trial: None,
            candidates: Vec::new(),
            trial_records: Vec::new(),
        };
        for mut r in records {
            match r.outcome {
                TrialOutcome::Pure => report.pure_count += 1,
                TrialOutcome::Candidate => report.candidate_count += 1,
                TrialOutcome::Failure => report.failure_count += 1,
            }
            if r.outcome != TrialOutcome::Failure {
                if let Some(rank) = r.terminal_rank {
                    *report.rank_histogram.entry(rank).or_insert(0) += 1;
                }
            }
            if let Some(p) = r.probe_max {
                if report.max_probe.is_none_or(|m| p > m) {
                    report.max_probe = Some(p);
                    report.max_probe_trial = Some(r.trial);
                }
            }
            if let Some(c) = r.candidate.take() {
                if c.reverified {
                    report.reverified_candidate_count += 1;
                }
                report.candidates.push(c);
            }
            report.trial_records.push(r);
        }
        report
    }
}

/// Sequential hunt over trials `0..trials`.
pub fn hunt(config: &HuntConfig, trials: usize) -> Result<HuntReport> {
    if config.n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2"));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1"));
    }
    let records = (0..trials).map(|t| hunt_trial(config, t)).collect();
    Ok(HuntReport::from_records(config, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margstates::{mix, state_tau};
    use crate::schmidt::pure_mts_from_unitary;

    fn bell(sign: f64) -> StateElement {
        pure_mts_from_unitary(&Matrix::diag(&[1.0, sign]))
            .unwrap()
            .1
    }

    #[test]
    fn pure_input_takes_no_steps() {
        let h = bell(1.0);
        let t = descend(&h, &Tolerances::default(), 4).unwrap();
        assert!(t.steps.is_empty());
        assert!(t.is_success());
        assert_eq!(t.terminal_certificate.verdict_pure, Some(true));
        assert!((t.terminal.matrix() - h.matrix()).hs_norm() == 0.0);
    }

    #[test]
    fn bell_mixture_one_step() {
        let h = mix(&[bell(1.0), bell(-1.0)], &[0.5, 0.5]).unwrap();
        let t = descend(&h, &Tolerances::default(), 4).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!((t.steps[0].rank_before, t.steps[0].rank_after), (2, 1));
        assert!(t.is_success());
    }

    #[test]
    fn tau_descends_to_rank_one() {
        let t = descend(&state_tau(2).unwrap(), &Tolerances::default(), 4).unwrap();
        assert!(t.is_success());
        assert_eq!(t.terminal_certificate.rank, 1);
        assert_eq!(t.terminal_certificate.verdict_pure, Some(true));
        for w in t.steps.windows(2) {
            assert!(w[1].rank_before == w[0].rank_after);
        }
        for s in &t.steps {
            assert!(s.rank_after < s.rank_before);
            assert!(s.marginal_residual < 1e-9);
        }
    }

    #[test]
    fn max_steps_reported() {
        let t = descend(&state_tau(2).unwrap(), &Tolerances::default(), 0).unwrap();
        assert_eq!(t.outcome, DescentOutcome::MaxSteps);
        assert!(!t.is_success());
    }

    #[test]
    fn probe_fixed_point() {
        let tols = Tolerances::default();
        let h = bell(1.0);
        let p = probe_problem(&h, &h, &tols).unwrap();
        assert!((p.trace_norm - 1.0).abs() < 1e-12);
        assert!(p.is_psd);
        assert_eq!(p.is_marginal, Some(true));
        let tau = state_tau(2).unwrap();
        assert!(matches!(
            probe_problem(&tau, &tau, &tols),
            Err(Error::NotExtremal)
        ));
        assert!(probe_problem(&h, &bell(-1.0), &tols).is_err());
    }

    #[test]
    fn hunt_n2_small() {
        let cfg = HuntConfig::new(2, 3, Tolerances::default());
        let r = hunt(&cfg, 6).unwrap();
        for t in &r.trial_records {
            assert!(t.failure.is_none(), "{:?}", t);
        }
        assert_eq!(r.pure_count, 6);
        assert_eq!(r.rank_histogram.get(&1), Some(&6));
    }

    #[test]
    fn trial_streams_differ() {
        let a: u64 = trial_rng(1, 0).random();
        let b: u64 = trial_rng(1, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, trial_rng(1, 0).random::<u64>());
    }
}
