//! Error probabilities: exact enumeration, static and mobile Monte Carlo,
//! budget sweeps and mismatched-knowledge comparisons.
//!
//! Monte Carlo trials run in fixed blocks. Each trial draws from its own
//! substream, and blocks reduce through integer counts, so estimates do not
//! depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    mean_distance_absorbing_cir, mean_passive_cir, BrownianPair, ChannelDistribution,
    ChannelParams, Receiver,
};
use crate::constellation::Constellation;
use crate::decoder::{
    BoundDecoder, ChannelKnowledge, Decode, DecoderKind, DecoderSpec, Requirement,
};
use crate::error::{Error, Result};
use crate::reception::{
    check_h, port_pmf_table, sample_received_into, truncation_bound, ReceptionParams,
};
use crate::rng::{trial_stream, Purpose};

/// Largest enumeration box accepted by [`exact_error_probability`].
pub const MAX_EXACT_CELLS: u128 = 100_000_000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

const BLOCK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "monte-carlo" | "mc" => Ok(Method::MonteCarlo),
            other => Err(Error::param(
                "method",
                format!("unknown method `{other}`; expected exact|monte-carlo"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub value: f64,
    pub method: Method,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Half-width of the 95% interval; 0 for exact values.
    pub half_width: f64,
    pub trials: u64,
    pub errors: u64,
}

impl ErrorEstimate {
    pub fn exact(value: f64) -> Self {
        let value = value.clamp(0.0, 1.0);
        ErrorEstimate {
            value,
            method: Method::Exact,
            ci_low: value,
            ci_high: value,
            half_width: 0.0,
            trials: 0,
            errors: 0,
        }
    }

    /// Point estimate `errors / trials` with a Wilson 95% interval.
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials);
        ErrorEstimate {
            value: errors as f64 / trials as f64,
            method: Method::MonteCarlo,
            ci_low,
            ci_high,
            half_width: (ci_high - ci_low) / 2.0,
            trials,
            errors,
        }
    }

    /// Whether `self` lies below `other` with the two intervals disjoint.
    pub fn clearly_below(&self, other: &ErrorEstimate) -> bool {
        self.ci_high < other.ci_low
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the closed-form bounds at the edges are exact in real arithmetic
    let lo = if errors == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if errors == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Symbol error probability with equal priors, by enumerating every received
/// vector in the truncation box of each port. Error mass is summed directly;
/// the mass outside the box (beyond 12 standard deviations) is ignored.
pub fn exact_error_probability<D: Decode + ?Sized>(
    cst: &Constellation,
    decoder: &D,
    h: f64,
    reception: &ReceptionParams,
) -> Result<ErrorEstimate> {
    check_h(h)?;
    let k = cst.k();
    if k > 3 {
        return Err(Error::SupportTooLarge {
            cells: u128::MAX,
            limit: MAX_EXACT_CELLS,
        });
    }
    let uppers: Vec<u64> = (0..k)
        .map(|i| {
            cst.symbols()
                .iter()
                .map(|s| truncation_bound(s[i], h, reception.lambda))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let cells = uppers
        .iter()
        .fold(1u128, |acc, &u| acc.saturating_mul(u as u128 + 1));
    if cells > MAX_EXACT_CELLS {
        return Err(Error::SupportTooLarge {
            cells,
            limit: MAX_EXACT_CELLS,
        });
    }
    // tables[b][i][m]
    let tables: Vec<Vec<Vec<f64>>> = cst
        .symbols()
        .iter()
        .map(|s| {
            s.iter()
                .zip(&uppers)
                .map(|(&a, &u)| port_pmf_table(a, h, reception, u))
                .collect()
        })
        .collect();
    let n_symbols = cst.m();
    let rest: Vec<u64> = uppers[1..].to_vec();
    let rows: Vec<Vec<f64>> = (0..=uppers[0])
        .into_par_iter()
        .map(|m1| -> Result<Vec<f64>> {
            let mut err = vec![0.0; n_symbols];
            let mut m = vec![0u64; k];
            let mut probs = vec![0.0; n_symbols];
            m[0] = m1;
            let inner: u64 = rest.iter().map(|u| u + 1).product();
            for flat in 0..inner {
                let mut r = flat;
                for (i, &u) in rest.iter().enumerate().rev() {
                    m[i + 1] = r % (u + 1);
                    r /= u + 1;
                }
                for (p, tb) in probs.iter_mut().zip(&tables) {
                    *p = tb
                        .iter()
                        .zip(&m)
                        .map(|(t, &mi)| t[mi as usize])
                        .product::<f64>();
                }
                // cells no symbol reaches carry no error mass
                if probs.iter().all(|&p| p == 0.0) {
                    continue;
                }
                let decided = decoder.decode(&m)?;
                for (b, &p) in probs.iter().enumerate() {
                    if b != decided {
                        err[b] += p;
                    }
                }
            }
            Ok(err)
        })
        .collect::<Result<_>>()?;
    let total: f64 = (0..n_symbols)
        .map(|b| rows.iter().map(|r| r[b]).sum::<f64>())
        .sum();
    Ok(ErrorEstimate::exact(total / n_symbols as f64))
}

/// A fixed-gain channel: the setting of the static comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticScenario {
    pub constellation: Constellation,
    pub h: f64,
    pub reception: ReceptionParams,
    pub decoder: DecoderKind,
}

impl StaticScenario {
    /// Binds the decoder with the knowledge a static channel provides: the
    /// gain itself, its mean, or its (point-mass) distribution.
    pub fn bind(&self) -> Result<BoundDecoder<'_>> {
        check_h(self.h)?;
        let knowledge = match self.decoder.requirement() {
            Requirement::ExactGain => ChannelKnowledge::ExactGain(self.h),
            Requirement::MeanGain => ChannelKnowledge::MeanGain(self.h),
            Requirement::Distribution => {
                ChannelKnowledge::Distribution(ChannelDistribution::point_mass(self.h)?)
            }
            Requirement::Nothing => ChannelKnowledge::Nothing,
        };
        DecoderSpec::new(self.decoder, knowledge)?.bind(&self.constellation, self.reception.lambda)
    }

    pub fn exact(&self) -> Result<ErrorEstimate> {
        exact_error_probability(&self.constellation, &self.bind()?, self.h, &self.reception)
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    Ok(())
}

/// Runs `block(start, end)` over `[0, trials)` in parallel and adds up the
/// per-block integer tallies.
fn run_blocks<T, F>(trials: u64, width: usize, block: F) -> Result<Vec<T>>
where
    T: Copy + Default + Send + std::ops::AddAssign,
    F: Fn(u64, u64) -> Result<Vec<T>> + Sync + Send,
{
    let n_blocks = trials.div_ceil(BLOCK);
    let parts: Vec<Vec<T>> = (0..n_blocks)
        .into_par_iter()
        .map(|j| block(j * BLOCK, ((j + 1) * BLOCK).min(trials)))
        .collect::<Result<_>>()?;
    let mut total = vec![T::default(); width];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

/// Monte Carlo symbol error rate with uniform symbols.
pub fn monte_carlo_static(
    scenario: &StaticScenario,
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    check_trials(trials)?;
    let decoder = scenario.bind()?;
    let cst = &scenario.constellation;
    let errors = run_blocks(trials, 1, |start, end| {
        let mut m = vec![0u64; cst.k()];
        let mut errors = 0u64;
        for trial in start..end {
            let mut rng = trial_stream(seed, trial, Purpose::Transmission);
            let b = rng.random_range(0..cst.m());
            sample_received_into(
                cst.symbol(b),
                scenario.h,
                &scenario.reception,
                &mut rng,
                &mut m,
            );
            if decoder.decode(&m)? != b {
                errors += 1;
            }
        }
        Ok(vec![errors])
    })?;
    Ok(ErrorEstimate::from_counts(errors[0], trials))
}

/// Spacing between consecutive release times in a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotSpacing {
    /// One sampling offset `τ_s` per slot.
    SamplingOffset,
    /// One bit duration `T_b` per slot.
    BitDuration,
    Seconds(f64),
}

impl SlotSpacing {
    pub fn seconds(&self, params: &ChannelParams) -> f64 {
        match *self {
            SlotSpacing::SamplingOffset => params.tau_s,
            SlotSpacing::BitDuration => params.t_b,
            SlotSpacing::Seconds(s) => s,
        }
    }
}

impl fmt::Display for SlotSpacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotSpacing::SamplingOffset => f.write_str("tau_s"),
            SlotSpacing::BitDuration => f.write_str("t_b"),
            SlotSpacing::Seconds(s) => write!(f, "{s:?}"),
        }
    }
}

/// A stream of `stream_length` symbols over a channel whose endpoints diffuse.
#[derive(Debug, Clone, PartialEq)]
pub struct MobileScenario {
    pub constellation: Constellation,
    /// Physics of the channel.
    pub params: ChannelParams,
    pub receiver: Receiver,
    pub reception: ReceptionParams,
    pub decoder: DecoderKind,
    /// Parameters the decoder believes in; `None` means the true ones.
    pub declared: Option<ChannelParams>,
    /// Let gain-dependent decoders see the realized gain of every slot.
    pub genie: bool,
    pub stream_length: usize,
    pub spacing: SlotSpacing,
}

/// How one slot's decoder is obtained.
enum SlotDecoder<'a> {
    Fixed(BoundDecoder<'a>),
    Genie,
}

impl MobileScenario {
    pub fn slot_times(&self) -> Vec<f64> {
        let dt = self.spacing.seconds(&self.params);
        (0..self.stream_length).map(|j| j as f64 * dt).collect()
    }

    pub fn declared_params(&self) -> ChannelParams {
        self.declared.unwrap_or(self.params)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.declared_params().validate()?;
        if self.stream_length == 0 {
            return Err(Error::param("stream_length", "must be >= 1"));
        }
        let dt = self.spacing.seconds(&self.params);
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::param(
                "slot_spacing",
                format!("must be finite and >= 0, got {dt}"),
            ));
        }
        if self.decoder.requirement() == Requirement::ExactGain && !self.genie {
            return Err(Error::Infeasible(format!(
                "decoder {} needs the instantaneous gain, which a mobile channel does not reveal; enable genie mode or pick mean-ci/full-csi/expected-log/channel-free",
                self.decoder
            )));
        }
        Ok(())
    }

    /// Channel knowledge available to the decoder at release time `t`.
    pub fn knowledge_at(&self, t: f64) -> Result<ChannelKnowledge> {
        let p = self.declared_params();
        Ok(match self.decoder.requirement() {
            Requirement::MeanGain => ChannelKnowledge::MeanGain(match self.receiver {
                Receiver::Passive => mean_passive_cir(t, &p),
                Receiver::Absorbing => mean_distance_absorbing_cir(t, &p)?,
            }),
            Requirement::Distribution => {
                ChannelKnowledge::Distribution(ChannelDistribution::at_time(t, &p, self.receiver)?)
            }
            Requirement::Nothing => ChannelKnowledge::Nothing,
            Requirement::ExactGain => {
                return Err(Error::Infeasible(
                    "exact gain is only known in genie mode".into(),
                ))
            }
        })
    }

    fn slot_decoders(&self) -> Result<Vec<SlotDecoder<'_>>> {
        self.validate()?;
        let lambda = self.reception.lambda;
        if self.decoder.requirement() == Requirement::Nothing {
            let spec = DecoderSpec::new(self.decoder, ChannelKnowledge::Nothing)?;
            let bound = spec.bind(&self.constellation, lambda)?;
            return Ok((0..self.stream_length)
                .map(|_| SlotDecoder::Fixed(bound.clone()))
                .collect());
        }
        if self.genie {
            return Ok((0..self.stream_length)
                .map(|_| SlotDecoder::Genie)
                .collect());
        }
        self.slot_times()
            .into_par_iter()
            .map(|t| {
                let spec = DecoderSpec::new(self.decoder, self.knowledge_at(t)?)?;
                Ok(SlotDecoder::Fixed(spec.bind(&self.constellation, lambda)?))
            })
            .collect()
    }

    fn genie_decode(&self, h: f64, m: &[u64]) -> Result<usize> {
        let gain = match self.decoder {
            DecoderKind::RatioThreshold | DecoderKind::OokThreshold => h.max(f64::MIN_POSITIVE),
            _ => h,
        };
        let knowledge = match self.decoder.requirement() {
            Requirement::ExactGain => ChannelKnowledge::ExactGain(gain),
            Requirement::MeanGain => ChannelKnowledge::MeanGain(gain.max(f64::MIN_POSITIVE)),
            Requirement::Distribution => {
                ChannelKnowledge::Distribution(ChannelDistribution::point_mass(gain)?)
            }
            Requirement::Nothing => ChannelKnowledge::Nothing,
        };
        DecoderSpec::new(self.decoder, knowledge)?
            .bind(&self.constellation, self.reception.lambda)?
            .decode(m)
    }

    fn label(&self) -> String {
        if self.declared.is_some_and(|d| d != self.params) {
            format!("{}@declared", self.decoder)
        } else if self.genie && self.decoder.requirement() != Requirement::Nothing {
            format!("{}@genie", self.decoder)
        } else {
            self.decoder.to_string()
        }
    }
}

/// One point of an error curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub estimate: ErrorEstimate,
}

/// Trial-level tallies of a stream simulation, used for the time average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamTally {
    pub trials: u64,
    pub slots: u64,
    pub errors: u64,
    /// Σ over trials of (errors in that trial)².
    pub errors_squared: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Name of the first CSV column.
    pub x_label: String,
    pub decoder: String,
    pub constellation: String,
    pub points: Vec<CurvePoint>,
    pub tally: Option<StreamTally>,
}

impl Curve {
    /// Error rate averaged over all slots of all trials. The interval is the
    /// wider of the pooled Wilson interval and a trial-level normal interval,
    /// since slots of one trial share a trajectory.
    pub fn time_average(&self) -> ErrorEstimate {
        let Some(t) = self.tally else {
            let n = self.points.len().max(1) as f64;
            let value = self.points.iter().map(|p| p.estimate.value).sum::<f64>() / n;
            let half = (self
                .points
                .iter()
                .map(|p| p.estimate.half_width.powi(2))
                .sum::<f64>())
            .sqrt()
                / n;
            return ErrorEstimate {
                value,
                method: Method::MonteCarlo,
                ci_low: (value - half).max(0.0),
                ci_high: (value + half).min(1.0),
                half_width: half,
                trials: self.points.iter().map(|p| p.estimate.trials).sum(),
                errors: self.points.iter().map(|p| p.estimate.errors).sum(),
            };
        };
        let pooled = ErrorEstimate::from_counts(t.errors, t.trials * t.slots);
        let n = t.trials as f64;
        let l = t.slots as f64;
        let mean = t.errors as f64 / n;
        let var = ((t.errors_squared as f64 / n) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        let half = Z95 * (var / n).sqrt() / l;
        let value = pooled.value;
        let (lo, hi) = ((value - half).max(0.0), (value + half).min(1.0));
        ErrorEstimate {
            ci_low: lo.min(pooled.ci_low),
            ci_high: hi.max(pooled.ci_high),
            half_width: half.max(pooled.half_width),
            ..pooled
        }
    }

    pub fn csv_header(x_label: &str) -> String {
        format!("{x_label},p_e,ci_low,ci_high,trials,decoder,constellation\n")
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let e = &p.estimate;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_num(p.x),
                fmt_num(e.value),
                fmt_num(e.ci_low),
                fmt_num(e.ci_high),
                e.trials,
                self.decoder,
                self.constellation
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        Curve::csv_header(&self.x_label) + &self.csv_rows()
    }
}

/// Writes several curves sharing an x axis as one CSV table.
pub fn curves_to_csv(curves: &[Curve]) -> String {
    let label = curves.first().map_or("t_seconds", |c| c.x_label.as_str());
    let mut out = Curve::csv_header(label);
    for c in curves {
        out.push_str(&c.csv_rows());
    }
    out
}

/// Locale-independent number formatting: plain decimals in the usual range,
/// scientific notation for very small or very large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Per-slot error rates of a stream over a mobile channel. Each trial follows
/// one Brownian trajectory; slot `j` is released at `t_j` and sees the gain
/// at that instant.
pub fn monte_carlo_mobile(scenario: &MobileScenario, trials: u64, seed: u64) -> Result<Curve> {
    check_trials(trials)?;
    let decoders = scenario.slot_decoders()?;
    let times = scenario.slot_times();
    let slots = times.len();
    let cst = &scenario.constellation;
    let p = scenario.params;
    // per-slot errors, then total errors, then Σ errors² (as u128 halves)
    let tallies = run_blocks(trials, slots + 1, |start, end| {
        let mut counts = vec![0u128; slots + 1];
        let mut m = vec![0u64; cst.k()];
        for trial in start..end {
            let mut path_rng = trial_stream(seed, trial, Purpose::Trajectory);
            let mut tx_rng = trial_stream(seed, trial, Purpose::Transmission);
            let mut pair = BrownianPair::new(p.r0, p.d_tr);
            let mut trial_errors = 0u128;
            for (j, t) in times.iter().enumerate() {
                if j > 0 {
                    pair.advance(t - times[j - 1], &mut path_rng);
                }
                let h = scenario.receiver.hit_probability(pair.distance(), &p)?;
                let b = tx_rng.random_range(0..cst.m());
                sample_received_into(cst.symbol(b), h, &scenario.reception, &mut tx_rng, &mut m);
                let decided = match &decoders[j] {
                    SlotDecoder::Fixed(d) => d.decode(&m)?,
                    SlotDecoder::Genie => scenario.genie_decode(h, &m)?,
                };
                if decided != b {
                    counts[j] += 1;
                    trial_errors += 1;
                }
            }
            counts[slots] += trial_errors * trial_errors;
        }
        Ok(counts)
    })?;
    let points = times
        .iter()
        .zip(&tallies)
        .map(|(&t, &e)| CurvePoint {
            x: t,
            estimate: ErrorEstimate::from_counts(e as u64, trials),
        })
        .collect::<Vec<_>>();
    let errors = tallies[..slots].iter().sum::<u128>() as u64;
    Ok(Curve {
        x_label: "t_seconds".into(),
        decoder: scenario.label(),
        constellation: cst.label().to_string(),
        points,
        tally: Some(StreamTally {
            trials,
            slots: slots as u64,
            errors,
            errors_squared: tallies[slots],
        }),
    })
}

/// Direct estimate of `E_{h(t_j)}[P_e(h)]` for one slot: the gain is drawn
/// from its marginal law at `t_j` instead of along a trajectory.
pub fn monte_carlo_slot_marginal(
    scenario: &MobileScenario,
    slot: usize,
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    check_trials(trials)?;
    let decoders = scenario.slot_decoders()?;
    let t = *scenario.slot_times().get(slot).ok_or_else(|| {
        Error::param(
            "slot",
            format!(
                "slot {slot} beyond stream length {}",
                scenario.stream_length
            ),
        )
    })?;
    let dist = ChannelDistribution::at_time(t, &scenario.params, scenario.receiver)?;
    let cst = &scenario.constellation;
    let errors = run_blocks(trials, 1, |start, end| {
        let mut m = vec![0u64; cst.k()];
        let mut errors = 0u64;
        for trial in start..end {
            let mut path_rng = trial_stream(seed, trial, Purpose::Trajectory);
            let mut tx_rng = trial_stream(seed, trial, Purpose::Transmission);
            let h = dist.sample(&mut path_rng)?;
            let b = tx_rng.random_range(0..cst.m());
            sample_received_into(cst.symbol(b), h, &scenario.reception, &mut tx_rng, &mut m);
            let decided = match &decoders[slot] {
                SlotDecoder::Fixed(d) => d.decode(&m)?,
                SlotDecoder::Genie => scenario.genie_decode(h, &m)?,
            };
            if decided != b {
                errors += 1;
            }
        }
        Ok(vec![errors])
    })?;
    Ok(ErrorEstimate::from_counts(errors[0], trials))
}

/// `E_h[P_e(h)]` for a decoder that does not depend on `h`, by quadrature of
/// the exact static error probability over the gain law.
pub fn expected_exact_error_probability<D: Decode + ?Sized>(
    cst: &Constellation,
    decoder: &D,
    dist: &ChannelDistribution,
    reception: &ReceptionParams,
) -> Result<f64> {
    let failure = std::sync::Mutex::new(None);
    let value = dist.expect(
        |h| match exact_error_probability(cst, decoder, h, reception) {
            Ok(e) => e.value,
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                f64::NAN
            }
        },
    );
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    value
}

/// Time-averaged error against the per-bit budget `c`, re-instantiating the
/// constellation through `build` at every budget.
pub fn ber_vs_budget<F>(
    template: &MobileScenario,
    build: F,
    budgets: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Curve>
where
    F: Fn(f64) -> Result<Constellation>,
{
    if budgets.is_empty() {
        return Err(Error::param("budgets", "at least one budget is required"));
    }
    if budgets.iter().any(|&c| !(c > 0.0)) || budgets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "budgets",
            "budgets must be positive and strictly ascending",
        ));
    }
    let mut points = Vec::with_capacity(budgets.len());
    let mut label = String::new();
    let mut decoder = String::new();
    for &c in budgets {
        let scenario = MobileScenario {
            constellation: build(c)?,
            ..template.clone()
        };
        let curve = monte_carlo_mobile(&scenario, trials, seed)?;
        label = curve.constellation.clone();
        decoder = curve.decoder.clone();
        points.push(CurvePoint {
            x: c,
            estimate: curve.time_average(),
        });
    }
    Ok(Curve {
        x_label: "c".into(),
        decoder,
        constellation: label,
        points,
        tally: None,
    })
}

/// The same stream simulated twice with identical randomness: once with the
/// decoder informed by the true parameters and once by `wrong`.
pub fn imperfect_csi_sweep(
    scenario: &MobileScenario,
    wrong: &ChannelParams,
    trials: u64,
    seed: u64,
) -> Result<(Curve, Curve)> {
    wrong.validate()?;
    let truthful = MobileScenario {
        declared: None,
        ..scenario.clone()
    };
    let mismatched = MobileScenario {
        declared: Some(*wrong),
        ..scenario.clone()
    };
    Ok((
        monte_carlo_mobile(&truthful, trials, seed)?,
        monte_carlo_mobile(&mismatched, trials, seed)?,
    ))
}

/// Relative gain `1 − a/b` of the time-averaged error of `a` over `b`.
pub fn relative_gain(a: &Curve, b: &Curve) -> f64 {
    let (ea, eb) = (a.time_average().value, b.time_average().value);
    if eb == 0.0 {
        0.0
    } else {
        1.0 - ea / eb
    }
}

/// Runs `f` on a dedicated pool with `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::param("threads", "must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Infeasible(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{ook, sbrsk};
    use crate::reception::ReceptionModel;

    fn poisson(lambda: f64) -> ReceptionParams {
        ReceptionParams::new(lambda, ReceptionModel::Poisson).unwrap()
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-15);
        assert!((hi - Z95 * Z95 / (100.0 + Z95 * Z95)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5 && ((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicate_symbols_give_one_half() {
        let cst =
            Constellation::with_duplicates("dup", vec![vec![10.0, 3.0], vec![10.0, 3.0]]).unwrap();
        let sc = StaticScenario {
            constellation: cst,
            h: 0.3,
            reception: poisson(1.0),
            decoder: DecoderKind::PoissonMl,
        };
        assert!((sc.exact().unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_form_zero_noise() {
        let sc = StaticScenario {
            constellation: sbrsk(0.0, 400.0).unwrap(),
            h: 0.0281,
            reception: poisson(0.0),
            decoder: DecoderKind::ChannelFree,
        };
        let want = (-400.0f64 * 0.0281).exp() / 2.0;
        let got = sc.exact().unwrap().value;
        assert!(((got - want) / want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn noiseless_perfect_channel_never_errs() {
        let cst = Constellation::new("ints", vec![vec![0.0, 3.0], vec![2.0, 5.0], vec![7.0, 1.0]])
            .unwrap();
        let sc = StaticScenario {
            constellation: cst,
            h: 1.0,
            reception: ReceptionParams::new(0.0, ReceptionModel::Exact).unwrap(),
            decoder: DecoderKind::ExactMl,
        };
        assert_eq!(monte_carlo_static(&sc, 5000, 1).unwrap().errors, 0);
    }

    #[test]
    fn support_guard() {
        let sc = StaticScenario {
            constellation: sbrsk(0.0, 1e9).unwrap(),
            h: 0.5,
            reception: poisson(1.0),
            decoder: DecoderKind::ChannelFree,
        };
        assert!(matches!(sc.exact(), Err(Error::SupportTooLarge { .. })));
    }

    #[test]
    fn zero_trials_rejected() {
        let sc = StaticScenario {
            constellation: ook(10.0).unwrap(),
            h: 0.5,
            reception: poisson(1.0),
            decoder: DecoderKind::PoissonMl,
        };
        assert!(monte_carlo_static(&sc, 0, 1).is_err());
    }

    #[test]
    fn mobile_requires_genie_for_exact_gain() {
        let sc = MobileScenario {
            constellation: ook(800.0).unwrap(),
            params: ChannelParams::table2(),
            receiver: Receiver::Passive,
            reception: poisson(10.0),
            decoder: DecoderKind::PoissonMl,
            declared: None,
            genie: false,
            stream_length: 4,
            spacing: SlotSpacing::BitDuration,
        };
        assert!(matches!(
            monte_carlo_mobile(&sc, 10, 1),
            Err(Error::Infeasible(_))
        ));
        let genie = MobileScenario { genie: true, ..sc };
        assert_eq!(monte_carlo_mobile(&genie, 10, 1).unwrap().points.len(), 4);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1e-20), "1e-20");
        assert_eq!(fmt_num(6.5e-6), "6.5e-6");
    }
}
