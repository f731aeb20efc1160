//! Decoding rules and decision-region geometry.
//!
//! Every decoder returns exactly one symbol index per received vector. Ties
//! (scores within a relative [`TIE_TOLERANCE`]) go to the symbol that comes
//! first in the constellation's tie order, which is the lowest index unless
//! the constellation says otherwise.
//!
//! Poisson log-likelihoods are evaluated as
//! `Σ_i m_i·ln(1 + a_ib·h/λ) − a_ib·h`, which differs from the full
//! log-likelihood only by terms shared by all symbols. With `λ = 0` the
//! shared term is `Σ m_i ln h` and zero means are handled symbolically.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::ChannelDistribution;
use crate::constellation::{check_channel_free, Constellation, PairPattern, RATIO_TOLERANCE};
use crate::error::{Error, Result};
use crate::reception::{
    check_h, check_lambda, integerize, ln_pmf_exact, truncation_bound, xlny, ReceivedVector,
};

/// Relative score gap below which two symbols count as tied.
pub const TIE_TOLERANCE: f64 = 1e-11;

/// Relative gap below which full-CSI scores are re-checked with a direct
/// difference integral.
const NEAR_TIE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    /// Argmax of the exact binomial-plus-Poisson likelihood.
    ExactMl,
    /// Optimal weighted combining under Poisson reception.
    PoissonMl,
    /// Pairwise count comparisons for channel-free constellations.
    ChannelFree,
    /// `argmax_b Σ m_i ln r_ib`, exact for any ratio constellation when λ = 0.
    NoiseFree,
    /// `m1/m2 ≥ η` for binary two-type ratio keying.
    RatioThreshold,
    /// `m > τ` for on-off keying.
    OokThreshold,
    /// Poisson ML with the mean gain in place of the gain.
    MeanCi,
    /// Argmax of the likelihood averaged over the gain distribution.
    FullCsi,
    /// Argmax of the expected log-likelihood.
    ExpectedLog,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 9] = [
        DecoderKind::ExactMl,
        DecoderKind::PoissonMl,
        DecoderKind::ChannelFree,
        DecoderKind::NoiseFree,
        DecoderKind::RatioThreshold,
        DecoderKind::OokThreshold,
        DecoderKind::MeanCi,
        DecoderKind::FullCsi,
        DecoderKind::ExpectedLog,
    ];

    pub fn requirement(self) -> Requirement {
        match self {
            DecoderKind::ExactMl
            | DecoderKind::PoissonMl
            | DecoderKind::RatioThreshold
            | DecoderKind::OokThreshold => Requirement::ExactGain,
            DecoderKind::MeanCi => Requirement::MeanGain,
            DecoderKind::FullCsi | DecoderKind::ExpectedLog => Requirement::Distribution,
            DecoderKind::ChannelFree | DecoderKind::NoiseFree => Requirement::Nothing,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::ExactMl => "ml-exact",
            DecoderKind::PoissonMl => "ml-poisson",
            DecoderKind::ChannelFree => "channel-free",
            DecoderKind::NoiseFree => "noise-free",
            DecoderKind::RatioThreshold => "ratio-threshold",
            DecoderKind::OokThreshold => "ook-threshold",
            DecoderKind::MeanCi => "mean-ci",
            DecoderKind::FullCsi => "full-csi",
            DecoderKind::ExpectedLog => "expected-log",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        DecoderKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = DecoderKind::ALL.iter().map(|k| k.name()).collect();
                Error::param(
                    "decoder",
                    format!("unknown decoder `{s}`; expected one of {}", names.join("|")),
                )
            })
    }
}

/// What a decoder needs to know about the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    ExactGain,
    MeanGain,
    Distribution,
    Nothing,
}

/// Channel knowledge handed to a decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKnowledge {
    ExactGain(f64),
    MeanGain(f64),
    Distribution(ChannelDistribution),
    Nothing,
}

impl ChannelKnowledge {
    fn satisfies(&self, req: Requirement) -> bool {
        matches!(
            (self, req),
            (ChannelKnowledge::ExactGain(_), Requirement::ExactGain)
                | (ChannelKnowledge::MeanGain(_), Requirement::MeanGain)
                | (ChannelKnowledge::Distribution(_), Requirement::Distribution)
                | (_, Requirement::Nothing)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderSpec {
    pub kind: DecoderKind,
    pub knowledge: ChannelKnowledge,
}

impl DecoderSpec {
    pub fn new(kind: DecoderKind, knowledge: ChannelKnowledge) -> Result<Self> {
        if !knowledge.satisfies(kind.requirement()) {
            return Err(Error::Infeasible(format!(
                "decoder {kind} needs {:?} channel knowledge, got {knowledge:?}",
                kind.requirement()
            )));
        }
        Ok(DecoderSpec { kind, knowledge })
    }

    /// Binds the rule to a constellation and noise level.
    pub fn bind<'a>(&self, cst: &'a Constellation, lambda: f64) -> Result<BoundDecoder<'a>> {
        check_lambda(lambda)?;
        let gain = |k: &ChannelKnowledge| match *k {
            ChannelKnowledge::ExactGain(h) | ChannelKnowledge::MeanGain(h) => h,
            _ => unreachable!("requirement checked in DecoderSpec::new"),
        };
        Ok(match self.kind {
            DecoderKind::PoissonMl | DecoderKind::MeanCi => {
                let h = gain(&self.knowledge);
                check_h(h)?;
                BoundDecoder::PoissonMl { cst, h, lambda }
            }
            DecoderKind::ExactMl => {
                let h = gain(&self.knowledge);
                check_h(h)?;
                let counts = integer_counts(cst);
                BoundDecoder::ExactMl {
                    cst,
                    h,
                    lambda,
                    tables: ExactTables::new(&counts, h, lambda),
                    counts,
                }
            }
            DecoderKind::ChannelFree => BoundDecoder::ChannelFree(ChannelFreeDecoder::new(cst)?),
            DecoderKind::NoiseFree => BoundDecoder::NoiseFree(NoiseFreeDecoder::new(cst)?),
            DecoderKind::RatioThreshold => {
                let (rho0, rho1, c) = brsk_shape(cst)?;
                BoundDecoder::RatioThreshold {
                    eta: ratio_threshold(rho0, rho1, c, gain(&self.knowledge), lambda)?,
                }
            }
            DecoderKind::OokThreshold => {
                let n_a = ook_shape(cst)?;
                BoundDecoder::OokThreshold {
                    tau: ook_threshold(n_a, gain(&self.knowledge), lambda)?,
                }
            }
            DecoderKind::FullCsi => {
                let ChannelKnowledge::Distribution(dist) = self.knowledge else {
                    unreachable!()
                };
                BoundDecoder::FullCsi(FullCsiDecoder::new(cst, dist, lambda)?)
            }
            DecoderKind::ExpectedLog => {
                let ChannelKnowledge::Distribution(dist) = self.knowledge else {
                    unreachable!()
                };
                BoundDecoder::ExpectedLog {
                    cst,
                    table: expected_log_table(cst, &dist, lambda)?,
                }
            }
        })
    }
}

/// A decoding rule applied to raw per-port counts.
pub trait Decode: Send + Sync {
    fn decode(&self, m: &[u64]) -> Result<usize>;
}

/// A decoder with its constellation and channel knowledge resolved.
#[derive(Debug, Clone)]
pub enum BoundDecoder<'a> {
    PoissonMl {
        cst: &'a Constellation,
        h: f64,
        lambda: f64,
    },
    ExactMl {
        cst: &'a Constellation,
        h: f64,
        lambda: f64,
        counts: Vec<Vec<u64>>,
        tables: ExactTables,
    },
    ChannelFree(ChannelFreeDecoder<'a>),
    NoiseFree(NoiseFreeDecoder<'a>),
    RatioThreshold {
        eta: f64,
    },
    OokThreshold {
        tau: f64,
    },
    FullCsi(FullCsiDecoder<'a>),
    ExpectedLog {
        cst: &'a Constellation,
        table: ExpectedLogTable,
    },
}

impl Decode for BoundDecoder<'_> {
    fn decode(&self, m: &[u64]) -> Result<usize> {
        match self {
            BoundDecoder::PoissonMl { cst, h, lambda } => {
                check_ports(m, cst)?;
                let (scores, scale) = poisson_scores(m, cst, *h, *lambda);
                select(cst, &scores, scale)
            }
            BoundDecoder::ExactMl {
                cst,
                h,
                lambda,
                counts,
                tables,
            } => {
                check_ports(m, cst)?;
                let (scores, scale) =
                    exact_scores(m, counts, |mi, a| tables.ln_pmf(mi, a, *h, *lambda));
                select(cst, &scores, scale)
            }
            BoundDecoder::ChannelFree(d) => d.decode(m),
            BoundDecoder::NoiseFree(d) => d.decode(m),
            BoundDecoder::RatioThreshold { eta } => {
                if m.len() != 2 {
                    return Err(Error::param(
                        "m",
                        "ratio-threshold decoding needs two ports",
                    ));
                }
                Ok(usize::from(m[0] as f64 >= eta * m[1] as f64))
            }
            BoundDecoder::OokThreshold { tau } => {
                if m.len() != 1 {
                    return Err(Error::param("m", "threshold decoding needs one port"));
                }
                Ok(usize::from(m[0] as f64 > *tau))
            }
            BoundDecoder::FullCsi(d) => d.decode(m),
            BoundDecoder::ExpectedLog { cst, table } => {
                check_ports(m, cst)?;
                let (scores, scale) = table.scores(m, cst);
                select(cst, &scores, scale)
            }
        }
    }
}

fn check_ports(m: &[u64], cst: &Constellation) -> Result<()> {
    if m.len() != cst.k() {
        return Err(Error::param(
            "m",
            format!(
                "received vector has {} ports, expected {}",
                m.len(),
                cst.k()
            ),
        ));
    }
    Ok(())
}

fn integer_counts(cst: &Constellation) -> Vec<Vec<u64>> {
    cst.symbols()
        .iter()
        .map(|s| s.iter().map(|&a| integerize(a)).collect())
        .collect()
}

/// Picks the best-scoring symbol; `None` scores are impossible symbols.
fn select(cst: &Constellation, scores: &[Option<f64>], scale: f64) -> Result<usize> {
    let best = scores
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation);
    }
    let tol = TIE_TOLERANCE * scale.max(best.abs()).max(f64::MIN_POSITIVE);
    cst.tie_order()
        .iter()
        .copied()
        .find(|&b| scores[b].is_some_and(|s| s >= best - tol))
        .ok_or(Error::ImpossibleObservation)
}

/// Per-port Poisson score `m ln(1 + a h/λ) − a h` (or `m ln(a h) − a h` when
/// λ = 0) and its magnitude for tie scaling.
fn poisson_port_score(m: u64, a: f64, h: f64, lambda: f64) -> Option<(f64, f64)> {
    let signal = a * h;
    let log_term = if lambda > 0.0 {
        m as f64 * (signal / lambda).ln_1p()
    } else {
        xlny(m as f64, signal)?
    };
    Some((log_term - signal, log_term.abs() + signal))
}

fn poisson_scores(m: &[u64], cst: &Constellation, h: f64, lambda: f64) -> (Vec<Option<f64>>, f64) {
    let mut scale: f64 = 0.0;
    let scores = cst
        .symbols()
        .iter()
        .map(|s| {
            let mut total = 0.0;
            let mut mag = 0.0;
            for (&mi, &a) in m.iter().zip(s) {
                let (v, g) = poisson_port_score(mi, a, h, lambda)?;
                total += v;
                mag += g;
            }
            scale = scale.max(mag);
            Some(total)
        })
        .collect();
    (scores, scale)
}

/// Cached `ln P(m | a)` of the exact reception model for the counts of one
/// constellation, up to the truncation bound of each count.
#[derive(Debug, Clone)]
pub struct ExactTables {
    entries: Vec<(u64, Vec<Option<f64>>)>,
}

impl ExactTables {
    fn new(counts: &[Vec<u64>], h: f64, lambda: f64) -> Self {
        let mut distinct: Vec<u64> = counts.iter().flatten().copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        let entries = distinct
            .into_iter()
            .map(|a| {
                let upper = truncation_bound(a as f64, h, lambda);
                (
                    a,
                    (0..=upper).map(|m| ln_pmf_exact(m, a, h, lambda)).collect(),
                )
            })
            .collect();
        ExactTables { entries }
    }

    fn ln_pmf(&self, m: u64, a: u64, h: f64, lambda: f64) -> Option<f64> {
        match self.entries.iter().find(|(x, _)| *x == a) {
            Some((_, t)) if (m as usize) < t.len() => t[m as usize],
            _ => ln_pmf_exact(m, a, h, lambda),
        }
    }
}

fn exact_scores(
    m: &[u64],
    counts: &[Vec<u64>],
    ln_pmf: impl Fn(u64, u64) -> Option<f64>,
) -> (Vec<Option<f64>>, f64) {
    let mut scale: f64 = 0.0;
    let scores = counts
        .iter()
        .map(|s| {
            let mut total = 0.0;
            let mut mag = 0.0;
            for (&mi, &a) in m.iter().zip(s) {
                let v = ln_pmf(mi, a)?;
                total += v;
                mag += v.abs();
            }
            scale = scale.max(mag);
            Some(total)
        })
        .collect();
    (scores, scale)
}

/// OWC decoder under Poisson reception with known gain `h`.
pub fn decode_ml_poisson(
    m: &ReceivedVector,
    cst: &Constellation,
    h: f64,
    lambda: f64,
) -> Result<usize> {
    DecoderSpec::new(DecoderKind::PoissonMl, ChannelKnowledge::ExactGain(h))?
        .bind(cst, lambda)?
        .decode(&m.0)
}

/// ML decoder under exact binomial-plus-Poisson reception.
pub fn decode_ml_exact(
    m: &ReceivedVector,
    cst: &Constellation,
    h: f64,
    lambda: f64,
) -> Result<usize> {
    DecoderSpec::new(DecoderKind::ExactMl, ChannelKnowledge::ExactGain(h))?
        .bind(cst, lambda)?
        .decode(&m.0)
}

/// ML decoding with the mean gain substituted for the gain.
pub fn decode_mean_ci(
    m: &ReceivedVector,
    cst: &Constellation,
    mean_h: f64,
    lambda: f64,
) -> Result<usize> {
    if !(mean_h > 0.0 && mean_h <= 1.0) {
        return Err(Error::param(
            "mean_h",
            format!("must lie in (0, 1], got {mean_h}"),
        ));
    }
    DecoderSpec::new(DecoderKind::MeanCi, ChannelKnowledge::MeanGain(mean_h))?
        .bind(cst, lambda)?
        .decode(&m.0)
}

/// Channel-independent decoder for constellations that pass
/// [`check_channel_free`]: symbol `b` beats `b'` iff the counts on the axes
/// where `b` holds the larger share are at least the counts on the axes where
/// it holds the smaller one.
#[derive(Debug, Clone)]
pub struct ChannelFreeDecoder<'a> {
    cst: &'a Constellation,
    patterns: Vec<Vec<PairPattern>>,
}

impl<'a> ChannelFreeDecoder<'a> {
    pub fn new(cst: &'a Constellation) -> Result<Self> {
        let report = check_channel_free(cst);
        if let Some(w) = report.witness {
            return Err(Error::NotChannelFree(w));
        }
        Ok(ChannelFreeDecoder {
            cst,
            patterns: report.patterns,
        })
    }

    fn beats(&self, m: &[u64], b: usize, other: usize) -> bool {
        let p = &self.patterns[b][other];
        let favor: u64 = p.favor.iter().map(|&i| m[i]).sum();
        let against: u64 = p.against.iter().map(|&i| m[i]).sum();
        favor >= against
    }
}

impl Decode for ChannelFreeDecoder<'_> {
    fn decode(&self, m: &[u64]) -> Result<usize> {
        check_ports(m, self.cst)?;
        let n = self.cst.m();
        let order = self.cst.tie_order();
        if let Some(&b) = order
            .iter()
            .find(|&&b| (0..n).all(|o| o == b || self.beats(m, b, o)))
        {
            return Ok(b);
        }
        // Unreachable for a consistent pattern set; fall back to most pairwise wins.
        let wins = |b: usize| (0..n).filter(|&o| o != b && self.beats(m, b, o)).count();
        let top = order.iter().map(|&b| wins(b)).max().unwrap_or(0);
        Ok(*order
            .iter()
            .find(|&&b| wins(b) == top)
            .expect("non-empty constellation"))
    }
}

pub fn decode_channel_free(m: &ReceivedVector, cst: &Constellation) -> Result<usize> {
    ChannelFreeDecoder::new(cst)?.decode(&m.0)
}

/// Noise-free ratio decoder `argmax_b Σ m_i ln r_ib` for constellations with
/// a common symbol total.
#[derive(Debug, Clone)]
pub struct NoiseFreeDecoder<'a> {
    cst: &'a Constellation,
    shares: Vec<Vec<f64>>,
}

impl<'a> NoiseFreeDecoder<'a> {
    pub fn new(cst: &'a Constellation) -> Result<Self> {
        let c = cst.total(0);
        if c <= 0.0 || (0..cst.m()).any(|b| (cst.total(b) - c).abs() > RATIO_TOLERANCE * c) {
            return Err(Error::Infeasible(
                "the noise-free ratio rule needs every symbol to spend the same positive total"
                    .into(),
            ));
        }
        let shares = (0..cst.m())
            .map(|b| cst.symbol(b).iter().map(|a| a / cst.total(b)).collect())
            .collect();
        Ok(NoiseFreeDecoder { cst, shares })
    }
}

impl Decode for NoiseFreeDecoder<'_> {
    fn decode(&self, m: &[u64]) -> Result<usize> {
        check_ports(m, self.cst)?;
        let mut scale: f64 = 0.0;
        let scores: Vec<Option<f64>> = self
            .shares
            .iter()
            .map(|r| {
                let mut total = 0.0;
                for (&mi, &ri) in m.iter().zip(r) {
                    total += xlny(mi as f64, ri)?;
                }
                scale = scale.max(total.abs());
                Some(total)
            })
            .collect();
        select(self.cst, &scores, scale)
    }
}

/// Ratio threshold η for binary two-type ratio keying: decode bit 1 iff
/// `m1/m2 ≥ η`.
pub fn ratio_threshold(rho0: f64, rho1: f64, c: f64, h: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::param("h", format!("must lie in (0, 1], got {h}")));
    }
    if !(rho1 > rho0) || !(0.0..=1.0).contains(&rho0) || !(0.0..=1.0).contains(&rho1) {
        return Err(Error::param(
            "rho1",
            format!("need 0 <= rho0 < rho1 <= 1, got ({rho0}, {rho1})"),
        ));
    }
    // symmetric shares: both log ratios are the same number
    if (rho0 + rho1 - 1.0).abs() <= RATIO_TOLERANCE {
        return Ok(1.0);
    }
    let mu = |share: f64| c * share * h + lambda;
    let (mu11, mu10, mu21, mu20) = (mu(rho1), mu(rho0), mu(1.0 - rho1), mu(1.0 - rho0));
    if mu10 == 0.0 || mu21 == 0.0 {
        return Err(Error::param(
            "lambda",
            "a zero-share axis with λ = 0 gives an infinite log ratio; use the ML decoder instead",
        ));
    }
    let den = (mu11 / mu10).ln();
    if den == 0.0 {
        return Err(Error::param("rho1", "log-ratio denominator vanished"));
    }
    Ok(-(mu21 / mu20).ln() / den)
}

/// OOK count threshold: decode 1 iff `m > τ`. With λ = 0 the threshold is 0,
/// i.e. any received molecule means 1.
pub fn ook_threshold(n_a: f64, h: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::param("h", format!("must lie in (0, 1], got {h}")));
    }
    if !(n_a > 0.0) {
        return Err(Error::param("n_a", format!("must be > 0, got {n_a}")));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let signal = n_a * h;
    Ok(signal / (signal / lambda).ln_1p())
}

fn brsk_shape(cst: &Constellation) -> Result<(f64, f64, f64)> {
    if cst.k() != 2 || cst.m() != 2 {
        return Err(Error::Infeasible(
            "ratio-threshold decoding needs a binary two-type constellation".into(),
        ));
    }
    let c = cst.total(0);
    if (cst.total(1) - c).abs() > RATIO_TOLERANCE * c || c <= 0.0 {
        return Err(Error::Infeasible(
            "ratio-threshold decoding needs equal symbol totals".into(),
        ));
    }
    Ok((cst.symbol(0)[0] / c, cst.symbol(1)[0] / c, c))
}

fn ook_shape(cst: &Constellation) -> Result<f64> {
    if cst.k() != 1 || cst.m() != 2 || cst.symbol(0)[0] != 0.0 || cst.symbol(1)[0] <= 0.0 {
        return Err(Error::Infeasible(
            "threshold decoding needs an on-off keying constellation {0, N_a}".into(),
        ));
    }
    Ok(cst.symbol(1)[0])
}

/// ML decoder averaged over a gain distribution: `argmax_b E_h[P(m | b, h)]`.
#[derive(Debug, Clone)]
pub struct FullCsiDecoder<'a> {
    cst: &'a Constellation,
    dist: ChannelDistribution,
    lambda: f64,
    /// For on-off keying: smallest count decoded as 1.
    ook_cut: Option<u64>,
}

impl<'a> FullCsiDecoder<'a> {
    pub fn new(cst: &'a Constellation, dist: ChannelDistribution, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let mut dec = FullCsiDecoder {
            cst,
            dist,
            lambda,
            ook_cut: None,
        };
        if !matches!(dist, ChannelDistribution::PointMass { .. }) && ook_shape(cst).is_ok() {
            dec.ook_cut = Some(dec.locate_ook_cut()?);
        }
        Ok(dec)
    }

    /// The single count threshold of an OOK decision, located by bisection;
    /// the averaged likelihood ratio is increasing in `m`.
    fn locate_ook_cut(&self) -> Result<u64> {
        let decide = |m: u64| self.decode_general(&[m]).map(|b| b == 1);
        if decide(0)? {
            return Ok(0);
        }
        let mut hi = (self.lambda.ceil() as u64).max(1);
        while !decide(hi)? {
            hi = hi
                .checked_mul(2)
                .filter(|h| *h < 1 << 50)
                .ok_or(Error::Quadrature {
                    estimate: f64::NAN,
                    error: f64::NAN,
                    evaluations: 0,
                })?;
        }
        let mut lo = 0;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if decide(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub fn ook_cut(&self) -> Option<u64> {
        self.ook_cut
    }

    fn log_likelihood(&self, m: &[u64], b: usize) -> impl Fn(f64) -> f64 + '_ {
        let symbol = self.cst.symbol(b).to_vec();
        let m = m.to_vec();
        let lambda = self.lambda;
        move |h| {
            let mut total = 0.0;
            for (&mi, &a) in m.iter().zip(&symbol) {
                match poisson_port_score(mi, a, h, lambda) {
                    Some((v, _)) => total += v,
                    None => return f64::NEG_INFINITY,
                }
            }
            total
        }
    }

    /// `ln P(m | b, h) − ln P(m | b', h)`, formed port by port so that nearly
    /// equal likelihoods keep their relative order.
    fn log_ratio(&self, m: &[u64], b: usize, b_prime: usize) -> impl Fn(f64) -> f64 + '_ {
        let pairs: Vec<(u64, f64, f64)> = m
            .iter()
            .zip(self.cst.symbol(b).iter().zip(self.cst.symbol(b_prime)))
            .map(|(&mi, (&a, &a_p))| (mi, a, a_p))
            .collect();
        let lambda = self.lambda;
        move |h| {
            let mut total = 0.0;
            for &(mi, a, a_p) in &pairs {
                if a == a_p {
                    continue;
                }
                let log_term = if mi == 0 {
                    0.0
                } else if lambda > 0.0 {
                    mi as f64 * ((a - a_p) * h / (lambda + a_p * h)).ln_1p()
                } else if a_p == 0.0 {
                    f64::INFINITY
                } else if a == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    mi as f64 * (a / a_p).ln()
                };
                total += log_term - (a - a_p) * h;
            }
            total
        }
    }

    /// Averaged log-likelihood of each symbol, up to a shared constant.
    pub fn scores(&self, m: &[u64]) -> Result<Vec<Option<f64>>> {
        (0..self.cst.m())
            .map(|b| {
                let v = self.dist.ln_expect_exp(self.log_likelihood(m, b))?;
                Ok((v > f64::NEG_INFINITY).then_some(v))
            })
            .collect()
    }

    fn decode_general(&self, m: &[u64]) -> Result<usize> {
        if let ChannelDistribution::PointMass { h } = self.dist {
            let (scores, scale) = poisson_scores(m, self.cst, h, self.lambda);
            return select(self.cst, &scores, scale);
        }
        let scores = self.scores(m)?;
        let best = scores
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return Err(Error::ImpossibleObservation);
        }
        let tol = NEAR_TIE * (1.0 + best.abs());
        let group: Vec<usize> = self
            .cst
            .tie_order()
            .iter()
            .copied()
            .filter(|&b| scores[b].is_some_and(|s| s >= best - tol))
            .collect();
        let mut champion = group[0];
        for &challenger in &group[1..] {
            if scores[challenger] == scores[champion] {
                continue;
            }
            let diff = self.dist.expect_exp_difference(
                self.log_likelihood(m, champion),
                self.log_ratio(m, challenger, champion),
            )?;
            if diff > 0.0 {
                champion = challenger;
            }
        }
        Ok(champion)
    }
}

impl Decode for FullCsiDecoder<'_> {
    fn decode(&self, m: &[u64]) -> Result<usize> {
        check_ports(m, self.cst)?;
        match self.ook_cut {
            Some(cut) => Ok(usize::from(m[0] >= cut)),
            None => self.decode_general(m),
        }
    }
}

pub fn decode_full_csi(
    m: &ReceivedVector,
    cst: &Constellation,
    dist: &ChannelDistribution,
    lambda: f64,
) -> Result<usize> {
    FullCsiDecoder::new(cst, *dist, lambda)?.decode(&m.0)
}

/// Moments used by the expected-log decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedLogTable {
    pub mean_h: f64,
    pub lambda: f64,
    /// `E[ln(1 + h a_ib/λ)]`, or `ln a_ib` when λ = 0 (`None` for a zero count).
    excess: Vec<Vec<Option<f64>>>,
}

impl ExpectedLogTable {
    /// `E_h[ln(h·a_ib + λ)]`. With λ = 0 the shared `E[ln h]` is omitted.
    pub fn elog(&self, b: usize, i: usize) -> Option<f64> {
        let e = self.excess[b][i]?;
        Some(if self.lambda > 0.0 {
            self.lambda.ln() + e
        } else {
            e
        })
    }

    fn scores(&self, m: &[u64], cst: &Constellation) -> (Vec<Option<f64>>, f64) {
        let mut scale: f64 = 0.0;
        let scores = (0..cst.m())
            .map(|b| {
                let mut total = 0.0;
                let mut mag = 0.0;
                for (i, &mi) in m.iter().enumerate() {
                    let a = cst.symbol(b)[i];
                    let log_term = if mi == 0 {
                        0.0
                    } else {
                        mi as f64 * self.excess[b][i]?
                    };
                    let signal = a * self.mean_h;
                    total += log_term - signal;
                    mag += log_term.abs() + signal;
                }
                scale = scale.max(mag);
                Some(total)
            })
            .collect();
        (scores, scale)
    }
}

/// Precomputes `E[h]` and `E[ln(h a_ib + λ)]` for every symbol and port.
pub fn expected_log_table(
    cst: &Constellation,
    dist: &ChannelDistribution,
    lambda: f64,
) -> Result<ExpectedLogTable> {
    check_lambda(lambda)?;
    let mean_h = dist.mean()?;
    let mut cache: Vec<(f64, Option<f64>)> = Vec::new();
    let mut excess = Vec::with_capacity(cst.m());
    for s in cst.symbols() {
        let mut row = Vec::with_capacity(cst.k());
        for &a in s {
            if let Some((_, v)) = cache.iter().find(|(x, _)| *x == a) {
                row.push(*v);
                continue;
            }
            let v = if lambda > 0.0 {
                Some(dist.expect(|h| (a * h / lambda).ln_1p())?)
            } else if a > 0.0 {
                Some(a.ln())
            } else {
                None
            };
            cache.push((a, v));
            row.push(v);
        }
        excess.push(row);
    }
    Ok(ExpectedLogTable {
        mean_h,
        lambda,
        excess,
    })
}

pub fn decode_expected_log(
    m: &ReceivedVector,
    cst: &Constellation,
    table: &ExpectedLogTable,
) -> Result<usize> {
    check_ports(&m.0, cst)?;
    let (scores, scale) = table.scores(&m.0, cst);
    select(cst, &scores, scale)
}

/// Pairwise boundary `Σ w_i m_i + offset = 0`; positive values favor `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn evaluate(&self, m: &[u64]) -> f64 {
        self.weights
            .iter()
            .zip(m)
            .map(|(w, &x)| w * x as f64)
            .sum::<f64>()
            + self.offset
    }
}

/// Boundary between the Poisson-ML regions of `b` and `b_prime`:
/// `w_i = ln(μ_ib/μ_ib')`, offset `(c_b' − c_b)·h`.
pub fn decoding_boundary_hyperplane(
    cst: &Constellation,
    b: usize,
    b_prime: usize,
    h: f64,
    lambda: f64,
) -> Result<Hyperplane> {
    check_h(h)?;
    check_lambda(lambda)?;
    if b >= cst.m() || b_prime >= cst.m() {
        return Err(Error::param("b", "symbol index out of range"));
    }
    let weights = cst
        .symbol(b)
        .iter()
        .zip(cst.symbol(b_prime))
        .map(|(&x, &y)| {
            let (mu, mu_p) = (x * h + lambda, y * h + lambda);
            if mu == 0.0 || mu_p == 0.0 {
                Err(Error::param(
                    "lambda",
                    "a zero mean count makes the boundary weight infinite",
                ))
            } else {
                Ok((mu / mu_p).ln())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Hyperplane {
        weights,
        offset: (cst.total(b_prime) - cst.total(b)) * h,
    })
}

/// Independent per-axis decisions for a rectangular lattice. `levels[i]` are
/// the strictly increasing molecule counts of axis `i`; the result holds the
/// chosen level index per axis.
pub fn per_axis_decode(
    m: &ReceivedVector,
    levels: &[Vec<f64>],
    h: f64,
    lambda: f64,
) -> Result<Vec<usize>> {
    check_h(h)?;
    check_lambda(lambda)?;
    if m.0.len() != levels.len() {
        return Err(Error::param("m", "one level set per port is required"));
    }
    m.0.iter()
        .zip(levels)
        .map(|(&mi, lv)| {
            let cuts = axis_thresholds(lv, h, lambda)?;
            Ok(cuts.iter().filter(|&&tau| mi as f64 > tau).count())
        })
        .collect()
}

/// Adjacent-level Poisson ML thresholds `(A_{j+1} − A_j) h / ln(μ_{j+1}/μ_j)`.
pub fn axis_thresholds(levels: &[f64], h: f64, lambda: f64) -> Result<Vec<f64>> {
    if levels.len() < 2 {
        return Err(Error::param("levels", "an axis needs at least two levels"));
    }
    if h <= 0.0 {
        return Err(Error::param("h", "per-axis thresholds need h > 0"));
    }
    levels
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            if !(hi > lo) || lo < 0.0 {
                return Err(Error::param(
                    "levels",
                    format!("levels must be nonnegative and strictly increasing ({lo}, {hi})"),
                ));
            }
            let (mu0, mu1) = (lo * h + lambda, hi * h + lambda);
            if mu0 == 0.0 {
                Ok(0.0)
            } else {
                Ok((hi - lo) * h / (mu1 / mu0).ln())
            }
        })
        .collect()
}

/// Decoded symbol for every integer point of `[0, grid_max]^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRegionRaster {
    pub k: usize,
    pub grid_max: u64,
    cells: Vec<usize>,
}

impl DecisionRegionRaster {
    fn side(&self) -> usize {
        self.grid_max as usize + 1
    }

    fn index(&self, m: &[u64]) -> usize {
        m.iter().fold(0, |acc, &x| acc * self.side() + x as usize)
    }

    pub fn get(&self, m: &[u64]) -> usize {
        self.cells[self.index(m)]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// CSV with header `m1,m2[,m3],symbol`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = (1..=self.k).map(|i| format!("m{i}")).collect();
        out.push_str(&names.join(","));
        out.push_str(",symbol\n");
        let side = self.side();
        for (idx, sym) in self.cells.iter().enumerate() {
            let mut coords = vec![0; self.k];
            let mut rest = idx;
            for c in coords.iter_mut().rev() {
                *c = rest % side;
                rest /= side;
            }
            for c in coords {
                out.push_str(&c.to_string());
                out.push(',');
            }
            out.push_str(&sym.to_string());
            out.push('\n');
        }
        out
    }

    /// For a 2-D raster: for each row `m2`, the first `m1` decoded as `upper`
    /// after a cell not decoded as `upper`.
    pub fn boundary_points(&self, upper: usize) -> Vec<(u64, u64)> {
        assert_eq!(self.k, 2, "boundary points are defined for 2-D rasters");
        (1..=self.grid_max)
            .filter_map(|m2| {
                (1..=self.grid_max)
                    .find(|&m1| self.get(&[m1, m2]) == upper && self.get(&[m1 - 1, m2]) != upper)
                    .map(|m1| (m1, m2))
            })
            .collect()
    }

    /// Least-squares slope through the origin of the boundary points
    /// `m1 ≈ slope · m2`, restricted to rows `m2` in `rows`.
    pub fn boundary_slope(&self, upper: usize, rows: std::ops::RangeInclusive<u64>) -> Option<f64> {
        let pts: Vec<(u64, u64)> = self
            .boundary_points(upper)
            .into_iter()
            .filter(|(_, m2)| rows.contains(m2))
            .collect();
        if pts.is_empty() {
            return None;
        }
        let num: f64 = pts.iter().map(|&(m1, m2)| m1 as f64 * m2 as f64).sum();
        let den: f64 = pts.iter().map(|&(_, m2)| (m2 * m2) as f64).sum();
        Some(num / den)
    }
}

/// Evaluates `decoder` at every integer grid point in `[0, grid_max]^k`,
/// `k ∈ {2, 3}`. Rows are decoded in parallel; the output does not depend on
/// scheduling.
pub fn raster_regions<D: Decode + ?Sized>(
    decoder: &D,
    k: usize,
    grid_max: u64,
) -> Result<DecisionRegionRaster> {
    if !(2..=3).contains(&k) {
        return Err(Error::param(
            "k",
            format!("rasterization supports 2 or 3 axes, got {k}"),
        ));
    }
    let side = grid_max + 1;
    let rows: Vec<Vec<usize>> = (0..side)
        .into_par_iter()
        .map(|m1| {
            let mut row = Vec::with_capacity(side.pow(k as u32 - 1) as usize);
            if k == 2 {
                for m2 in 0..side {
                    row.push(decoder.decode(&[m1, m2])?);
                }
            } else {
                for m2 in 0..side {
                    for m3 in 0..side {
                        row.push(decoder.decode(&[m1, m2, m3])?);
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(DecisionRegionRaster {
        k,
        grid_max,
        cells: rows.into_iter().flatten().collect(),
    })
}
