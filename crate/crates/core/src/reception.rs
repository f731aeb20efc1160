//! Received molecule counts: exact binomial-plus-Poisson law, the Poisson
//! approximation, and samplers. All PMF arithmetic is done in log space;
//! `None` stands for a log-probability of `-inf`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::constellation::Constellation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceptionModel {
    /// Binomial(a, h) signal plus Poisson(λ) noise per port.
    Exact,
    /// Poisson(a·h + λ) per port.
    Poisson,
}

impl fmt::Display for ReceptionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceptionModel::Exact => "exact",
            ReceptionModel::Poisson => "poisson",
        })
    }
}

impl FromStr for ReceptionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" | "binomial" => Ok(ReceptionModel::Exact),
            "poisson" | "poisson-approx" => Ok(ReceptionModel::Poisson),
            other => Err(Error::param(
                "model",
                format!("expected exact|poisson, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionParams {
    /// Mean noise molecules per port per slot.
    pub lambda: f64,
    pub model: ReceptionModel,
}

impl ReceptionParams {
    pub fn new(lambda: f64, model: ReceptionModel) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(ReceptionParams { lambda, model })
    }
}

/// Per-port received counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReceivedVector(pub Vec<u64>);

impl ReceivedVector {
    pub fn counts(&self) -> &[u64] {
        &self.0
    }
}

impl From<Vec<u64>> for ReceivedVector {
    fn from(v: Vec<u64>) -> Self {
        ReceivedVector(v)
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(
            "lambda",
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_h(h: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::param("h", format!("must lie in [0, 1], got {h}")));
    }
    Ok(())
}

/// `x · ln(y)` with `0 · ln 0 = 0`; `None` for `x > 0, y = 0`.
pub(crate) fn xlny(x: f64, y: f64) -> Option<f64> {
    if x == 0.0 {
        Some(0.0)
    } else if y == 0.0 {
        None
    } else {
        Some(x * y.ln())
    }
}

/// `ln Σ exp(t)` over the finite terms; `None` if there are none.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> Option<f64> {
    let terms: Vec<f64> = terms
        .into_iter()
        .filter(|t| *t > f64::NEG_INFINITY)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    Some(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}

/// Round half to even, the integerization applied to design counts before
/// binomial transmission.
pub fn integerize(x: f64) -> u64 {
    x.round_ties_even().max(0.0) as u64
}

/// `ln P(m)` for Poisson(mu).
pub fn ln_pmf_poisson(m: u64, mu: f64) -> Option<f64> {
    Some(xlny(m as f64, mu)? - mu - ln_factorial(m))
}

/// `ln P(m)` for Binomial(a, h) signal plus Poisson(λ) noise.
pub fn ln_pmf_exact(m: u64, a: u64, h: f64, lambda: f64) -> Option<f64> {
    let terms = (0..=a.min(m)).filter_map(|k| {
        let signal = ln_binomial(a, k) + xlny(k as f64, h)? + xlny((a - k) as f64, 1.0 - h)?;
        let noise = ln_pmf_poisson(m - k, lambda)?;
        Some(signal + noise)
    });
    log_sum_exp(terms)
}

/// Probability of receiving `m` molecules when `a` are sent with hit
/// probability `h` and Poisson(λ) noise.
pub fn pmf_exact(m: u64, a: u64, h: f64, lambda: f64) -> Result<f64> {
    check_h(h)?;
    check_lambda(lambda)?;
    Ok(ln_pmf_exact(m, a, h, lambda).map_or(0.0, f64::exp))
}

pub fn pmf_poisson(m: u64, mu: f64) -> f64 {
    ln_pmf_poisson(m, mu).map_or(0.0, f64::exp)
}

/// `ln P(m | b)` for a single port `i` of symbol `b`.
pub fn ln_port_pmf(m: u64, a: f64, h: f64, params: &ReceptionParams) -> Option<f64> {
    match params.model {
        ReceptionModel::Exact => ln_pmf_exact(m, integerize(a), h, params.lambda),
        ReceptionModel::Poisson => ln_pmf_poisson(m, a * h + params.lambda),
    }
}

/// `ln P(m | b)` with independent ports.
pub fn ln_joint_pmf(
    m: &ReceivedVector,
    b: usize,
    cst: &Constellation,
    h: f64,
    params: &ReceptionParams,
) -> Result<Option<f64>> {
    check_h(h)?;
    check_lambda(params.lambda)?;
    if b >= cst.m() {
        return Err(Error::param(
            "b",
            format!("symbol index {b} out of range for M = {}", cst.m()),
        ));
    }
    if m.0.len() != cst.k() {
        return Err(Error::param(
            "m",
            format!(
                "received vector has {} ports, expected {}",
                m.0.len(),
                cst.k()
            ),
        ));
    }
    let mut total = 0.0;
    for (&mi, &a) in m.0.iter().zip(cst.symbol(b)) {
        match ln_port_pmf(mi, a, h, params) {
            Some(v) => total += v,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

pub fn joint_pmf(
    m: &ReceivedVector,
    b: usize,
    cst: &Constellation,
    h: f64,
    params: &ReceptionParams,
) -> Result<f64> {
    Ok(ln_joint_pmf(m, b, cst, h, params)?.map_or(0.0, f64::exp))
}

/// Largest count worth enumerating for one port: mean + 12 sd + 50, with
/// the Poisson variance, which bounds the binomial one.
pub fn truncation_bound(a: f64, h: f64, lambda: f64) -> u64 {
    let mean = a * h + lambda;
    (mean + 12.0 * mean.sqrt() + 50.0).ceil() as u64
}

/// PMF values for `m = 0..=upper` on one port.
pub fn port_pmf_table(a: f64, h: f64, params: &ReceptionParams, upper: u64) -> Vec<f64> {
    (0..=upper)
        .map(|m| ln_port_pmf(m, a, h, params).map_or(0.0, f64::exp))
        .collect()
}

fn sample_poisson<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mu).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

fn sample_port<R: Rng + ?Sized>(a: f64, h: f64, params: &ReceptionParams, rng: &mut R) -> u64 {
    match params.model {
        ReceptionModel::Exact => {
            let n = integerize(a);
            let signal = if n == 0 || h == 0.0 {
                0
            } else {
                Binomial::new(n, h)
                    .expect("h checked to lie in [0, 1]")
                    .sample(rng)
            };
            signal + sample_poisson(params.lambda, rng)
        }
        ReceptionModel::Poisson => sample_poisson(a * h + params.lambda, rng),
    }
}

/// Draws the received vector for symbol `b`; ports are independent.
pub fn sample_received<R: Rng + ?Sized>(
    b: usize,
    cst: &Constellation,
    h: f64,
    params: &ReceptionParams,
    rng: &mut R,
) -> Result<ReceivedVector> {
    check_h(h)?;
    check_lambda(params.lambda)?;
    if b >= cst.m() {
        return Err(Error::param(
            "b",
            format!("symbol index {b} out of range for M = {}", cst.m()),
        ));
    }
    Ok(ReceivedVector(
        cst.symbol(b)
            .iter()
            .map(|&a| sample_port(a, h, params, rng))
            .collect(),
    ))
}

/// Writes the received counts for symbol `b` into `out` without allocating.
pub(crate) fn sample_received_into<R: Rng + ?Sized>(
    symbol: &[f64],
    h: f64,
    params: &ReceptionParams,
    rng: &mut R,
    out: &mut [u64],
) {
    for (slot, &a) in out.iter_mut().zip(symbol) {
        *slot = sample_port(a, h, params, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{sbrsk, Constellation};
    use crate::rng::substream;

    #[test]
    fn no_signal_is_poisson() {
        for m in 0..30 {
            let p = pmf_exact(m, 0, 0.3, 4.0).unwrap();
            let q =
                (-4.0f64).exp() * 4f64.powi(m as i32) / (1..=m).map(|x| x as f64).product::<f64>();
            assert!((p - q).abs() <= 1e-14 * q.max(1e-300), "m={m}");
        }
    }

    #[test]
    fn deterministic_delivery() {
        for m in 0..20 {
            let p = pmf_exact(m, 7, 1.0, 0.0).unwrap();
            assert_eq!(p, if m == 7 { 1.0 } else { 0.0 });
        }
        // λ = 0 and m > a is exactly zero
        assert_eq!(pmf_exact(9, 7, 0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn normalization_at_default_operating_point() {
        let total: f64 = (0..=200)
            .map(|m| pmf_exact(m, 400, 0.0281, 10.0).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn binomial_reduction() {
        for m in 0..=10u64 {
            let p = pmf_exact(m, 10, 0.3, 0.0).unwrap();
            let q = ln_binomial(10, m).exp() * 0.3f64.powi(m as i32) * 0.7f64.powi(10 - m as i32);
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn integerize_half_even() {
        assert_eq!(integerize(2.5), 2);
        assert_eq!(integerize(3.5), 4);
        assert_eq!(integerize(133.333), 133);
        assert_eq!(integerize(266.6667), 267);
    }

    #[test]
    fn joint_is_product() {
        let cst = sbrsk(0.25, 100.0).unwrap();
        let params = ReceptionParams::new(3.0, ReceptionModel::Poisson).unwrap();
        let m = ReceivedVector(vec![4, 9]);
        let j = joint_pmf(&m, 0, &cst, 0.1, &params).unwrap();
        let e = pmf_poisson(4, 25.0 * 0.1 + 3.0) * pmf_poisson(9, 75.0 * 0.1 + 3.0);
        assert!((j - e).abs() < 1e-15);
        let one = Constellation::new("k1", vec![vec![10.0], vec![20.0]]).unwrap();
        let exact = ReceptionParams::new(2.0, ReceptionModel::Exact).unwrap();
        let j = joint_pmf(&ReceivedVector(vec![3]), 1, &one, 0.2, &exact).unwrap();
        assert!((j - pmf_exact(3, 20, 0.2, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn silent_channel_samples_zero() {
        let cst = sbrsk(0.0, 400.0).unwrap();
        let mut rng = substream(5, 0);
        for model in [ReceptionModel::Exact, ReceptionModel::Poisson] {
            let p = ReceptionParams::new(0.0, model).unwrap();
            for b in 0..2 {
                assert_eq!(
                    sample_received(b, &cst, 0.0, &p, &mut rng).unwrap().0,
                    vec![0, 0]
                );
            }
        }
    }

    #[test]
    fn log_sum_exp_handles_empty_and_large() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), None);
        let v = log_sum_exp([1000.0, 1000.0]).unwrap();
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
