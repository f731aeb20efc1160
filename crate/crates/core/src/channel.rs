//! Physical channel: hit probabilities for passive and absorbing receivers,
//! Brownian transceiver mobility, and the induced law of the channel gain.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of channel evaluations so far that fell outside `[0, 1]` and were
/// clamped. Zero for physical parameters.
pub fn clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

fn clamp_probability(h: f64) -> f64 {
    if h > 1.0 || h < 0.0 {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    h.clamp(0.0, 1.0)
}

/// Diffusion and geometry of one transmitter/receiver pair (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Diffusion coefficient of the signaling molecules (m²/s).
    pub d_inf: f64,
    /// Common diffusion coefficient of the transmitter and receiver (m²/s).
    pub d_tr: f64,
    /// Receiver port radius (m).
    pub r_rx: f64,
    /// Initial transmitter-receiver distance (m).
    pub r0: f64,
    /// Sampling offset after release (s).
    pub tau_s: f64,
    /// Bit duration (s).
    pub t_b: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::table2()
    }
}

impl ChannelParams {
    /// Default system parameters: r0 = 1 µm, r_rx = 0.45 µm,
    /// D_inf = 5e-9 m²/s, D_TR = 5e-12 m²/s, T_b = 0.5 ms, τ_s = 0.035 ms.
    pub fn table2() -> Self {
        ChannelParams {
            d_inf: 5e-9,
            d_tr: 5e-12,
            r_rx: 0.45e-6,
            r0: 1e-6,
            tau_s: 0.035e-3,
            t_b: 0.5e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_inf", self.d_inf),
            ("r_rx", self.r_rx),
            ("r0", self.r0),
            ("tau_s", self.tau_s),
            ("t_b", self.t_b),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    field,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.d_tr.is_finite() && self.d_tr >= 0.0) {
            return Err(Error::param(
                "d_tr",
                format!("must be finite and >= 0, got {}", self.d_tr),
            ));
        }
        if self.r0 <= self.r_rx {
            return Err(Error::param(
                "r0",
                format!(
                    "transmitter must start outside the receiver (r0 = {} <= r_rx = {})",
                    self.r0, self.r_rx
                ),
            ));
        }
        Ok(())
    }

    /// Receiver volume (4/3)π r_rx³.
    pub fn rx_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.r_rx.powi(3)
    }

    /// D_inf + D_TR, the relative diffusion of a molecule with respect to the receiver.
    pub fn effective_diffusion(&self) -> f64 {
        self.d_inf + self.d_tr
    }

    pub fn is_static(&self) -> bool {
        self.d_tr == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    Passive,
    Absorbing,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Receiver::Passive => "passive",
            Receiver::Absorbing => "absorbing",
        })
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "passive" => Ok(Receiver::Passive),
            "absorbing" => Ok(Receiver::Absorbing),
            other => Err(Error::param(
                "receiver",
                format!("expected passive|absorbing, got `{other}`"),
            )),
        }
    }
}

impl Receiver {
    /// Hit probability at distance `r` for a moving pair. Unlike
    /// [`absorbing_hit_prob`], a transmitter that has wandered inside an
    /// absorbing boundary counts as contact (h = 1).
    pub fn hit_probability(self, r: f64, params: &ChannelParams) -> Result<f64> {
        match self {
            Receiver::Passive => passive_cir(r, params),
            Receiver::Absorbing if r < params.r_rx && r >= 0.0 => Ok(1.0),
            Receiver::Absorbing => absorbing_hit_prob(r, params),
        }
    }

    /// Supremum of the hit probability over all distances.
    pub fn h_max(self, params: &ChannelParams) -> f64 {
        match self {
            Receiver::Passive => passive_cir(0.0, params).unwrap_or(1.0),
            Receiver::Absorbing => 1.0,
        }
    }
}

/// A realized channel gain at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub h: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub r: f64,
    pub t: f64,
}

fn check_distance(r: f64) -> Result<()> {
    if !r.is_finite() {
        return Err(Error::param(
            "r",
            format!("distance must be finite, got {r}"),
        ));
    }
    if r < 0.0 {
        return Err(Error::param("r", format!("distance must be >= 0, got {r}")));
    }
    Ok(())
}

/// Probability that a molecule released at distance `r` is inside a passive
/// receiver `tau_s` after release.
pub fn passive_cir(r: f64, params: &ChannelParams) -> Result<f64> {
    check_distance(r)?;
    let spread = 4.0 * params.effective_diffusion() * params.tau_s;
    let h = params.rx_volume() / (PI * spread).powf(1.5) * (-r * r / spread).exp();
    Ok(clamp_probability(h))
}

/// Probability that a molecule released at distance `r` is absorbed within
/// one bit duration `t_b`.
pub fn absorbing_hit_prob(r: f64, params: &ChannelParams) -> Result<f64> {
    check_distance(r)?;
    if r < params.r_rx {
        return Err(Error::InvalidGeometry(format!(
            "transmitter at r = {r} m is inside the absorbing receiver (r_rx = {} m)",
            params.r_rx
        )));
    }
    let scale = 2.0 * (params.effective_diffusion() * params.t_b).sqrt();
    let h = params.r_rx / r * erfc((r - params.r_rx) / scale);
    Ok(clamp_probability(h))
}

fn check_mobility(d_tr: f64, t: f64) -> Result<()> {
    if !(t > 0.0 && d_tr > 0.0) || !t.is_finite() || !d_tr.is_finite() {
        return Err(Error::StaticChannel);
    }
    Ok(())
}

/// Natural log of the distance density; `-inf` where the density vanishes.
pub fn ln_distance_pdf(r: f64, r0: f64, d_tr: f64, t: f64) -> Result<f64> {
    check_mobility(d_tr, t)?;
    check_distance(r)?;
    if r == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let four_dt = 4.0 * d_tr * t;
    // sinh(a)·exp(-b) = exp(a - b)·(1 - exp(-2a)) / 2 with a - b = -(r - r0)²/(8 D t)
    let a = r0 * r / four_dt;
    let diff = r - r0;
    Ok(
        r.ln() - r0.ln() - 0.5 * (2.0 * PI * d_tr * t).ln() - diff * diff / (2.0 * four_dt)
            + (-(-2.0 * a).exp_m1()).ln()
            - std::f64::consts::LN_2,
    )
}

/// Density of the transmitter-receiver distance at time `t` when both
/// devices diffuse with coefficient `d_tr` from an initial separation `r0`.
pub fn distance_pdf(r: f64, r0: f64, d_tr: f64, t: f64) -> Result<f64> {
    Ok(ln_distance_pdf(r, r0, d_tr, t)?.exp())
}

/// Draws the distance at time `t` from six independent Gaussian coordinates:
/// transmitter around the origin, receiver around `(r0, 0, 0)`.
pub fn sample_distance<R: Rng + ?Sized>(r0: f64, d_tr: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param(
            "t",
            format!("must be finite and >= 0, got {t}"),
        ));
    }
    if !(d_tr >= 0.0 && d_tr.is_finite()) {
        return Err(Error::param(
            "d_tr",
            format!("must be finite and >= 0, got {d_tr}"),
        ));
    }
    let sd = (2.0 * d_tr * t).sqrt();
    if sd == 0.0 {
        return Ok(r0);
    }
    let mut sq = 0.0;
    for axis in 0..3 {
        let tx: f64 = sd * rng.sample::<f64, _>(StandardNormal);
        let rx: f64 = if axis == 0 { r0 } else { 0.0 } + sd * rng.sample::<f64, _>(StandardNormal);
        sq += (rx - tx) * (rx - tx);
    }
    Ok(sq.sqrt())
}

/// Closed-form mean distance at time `t`.
pub fn mean_distance(r0: f64, d_tr: f64, t: f64) -> f64 {
    if !(t > 0.0 && d_tr > 0.0) {
        return r0;
    }
    let var8 = 8.0 * d_tr * t;
    (var8 / PI).sqrt() * (-r0 * r0 / var8).exp()
        + (r0 + 4.0 * d_tr * t / r0) * erf(r0 / var8.sqrt())
}

/// Mean passive hit probability for a release at time `t`.
pub fn mean_passive_cir(t: f64, params: &ChannelParams) -> f64 {
    let t = t.max(0.0);
    let d1 = params.effective_diffusion();
    let d2 = 2.0 * params.d_tr;
    let spread = d1 * params.tau_s + d2 * t;
    let h = params.rx_volume() / (4.0 * PI * spread).powf(1.5)
        * (-params.r0 * params.r0 / (4.0 * spread)).exp();
    clamp_probability(h)
}

/// Approximate mean absorbing hit probability: the hit probability at the
/// mean distance.
pub fn mean_distance_absorbing_cir(t: f64, params: &ChannelParams) -> Result<f64> {
    let r = mean_distance(params.r0, params.d_tr, t);
    Receiver::Absorbing.hit_probability(r, params)
}

/// Positions of a diffusing transmitter/receiver pair, advanced by
/// independent Gaussian increments.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPair {
    tx: [f64; 3],
    rx: [f64; 3],
    d_tr: f64,
    t: f64,
}

impl BrownianPair {
    pub fn new(r0: f64, d_tr: f64) -> Self {
        BrownianPair {
            tx: [0.0; 3],
            rx: [r0, 0.0, 0.0],
            d_tr,
            t: 0.0,
        }
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let sd = (2.0 * self.d_tr * dt).sqrt();
        if sd > 0.0 {
            for i in 0..3 {
                self.tx[i] += sd * rng.sample::<f64, _>(StandardNormal);
                self.rx[i] += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        self.t += dt;
    }

    pub fn distance(&self) -> f64 {
        let mut sq = 0.0;
        for i in 0..3 {
            let d = self.rx[i] - self.tx[i];
            sq += d * d;
        }
        sq.sqrt()
    }

    pub fn state(&self) -> MobilityState {
        MobilityState {
            r: self.distance(),
            t: self.t,
        }
    }
}

/// Law of the channel gain `h` at one release time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelDistribution {
    /// Deterministic gain: a static channel, or `t = 0`.
    PointMass { h: f64 },
    /// Pushforward of the distance law at time `t` through the receiver's CIR.
    Mobile {
        params: ChannelParams,
        receiver: Receiver,
        t: f64,
    },
}

const PRESCAN_POINTS: usize = 512;

/// Maximum of a log-integrand and breakpoints that resolve its peak.
struct Peak {
    value: f64,
    breaks: Vec<f64>,
}

/// Grid scan, golden-section refinement, then breakpoints at multiples of
/// the distance over which the log-integrand falls by one. Likelihoods of
/// large counts make the integrand far narrower than the scan spacing.
fn locate_peak<F: Fn(f64) -> f64>(v: &F, lo: f64, hi: f64) -> Result<Option<Peak>> {
    let nan = |evaluations| Error::Quadrature {
        estimate: f64::NAN,
        error: f64::NAN,
        evaluations,
    };
    let step = (hi - lo) / PRESCAN_POINTS as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_at = lo;
    for j in 0..=PRESCAN_POINTS {
        let r = lo + step * j as f64;
        let x = v(r);
        if x.is_nan() {
            return Err(nan(j));
        }
        if x > best {
            best = x;
            best_at = r;
        }
    }
    if best == f64::NEG_INFINITY {
        return Ok(None);
    }
    // golden-section search on the bracket around the best grid point
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_at - step).max(lo), (best_at + step).min(hi));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (v(c), v(d));
    for _ in 0..200 {
        if b - a <= 1e-15 * best_at.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = v(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = v(d);
        }
    }
    let (at, value) = [(best_at, best), (c, fc), (d, fd)]
        .into_iter()
        .filter(|(_, x)| !x.is_nan())
        .fold((best_at, best), |acc, p| if p.1 > acc.1 { p } else { acc });
    let mut breaks = vec![at];
    for (edge, sign) in [(lo, -1.0), (hi, 1.0)] {
        if v(edge) >= value - 1.0 || edge == at {
            continue;
        }
        // bisection for the point where the log-integrand has dropped by one
        let (mut inner, mut outer) = (at, edge);
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if mid == inner || mid == outer {
                break;
            }
            if v(mid) >= value - 1.0 {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        let w = (outer - at).abs();
        breaks.extend([1.0, 4.0, 16.0, 64.0, 256.0].map(|k| at + sign * k * w));
    }
    breaks.extend([at - step, at + step]);
    Ok(Some(Peak { value, breaks }))
}

impl ChannelDistribution {
    /// Gain distribution for a release at time `t > 0` with moving devices.
    pub fn new(t: f64, params: &ChannelParams, receiver: Receiver) -> Result<Self> {
        params.validate()?;
        check_mobility(params.d_tr, t)?;
        Ok(ChannelDistribution::Mobile {
            params: *params,
            receiver,
            t,
        })
    }

    /// Like [`ChannelDistribution::new`], but degenerates to a point mass at
    /// the initial-distance gain when `t = 0` or the devices are static.
    pub fn at_time(t: f64, params: &ChannelParams, receiver: Receiver) -> Result<Self> {
        params.validate()?;
        if t > 0.0 && params.d_tr > 0.0 {
            Self::new(t, params, receiver)
        } else {
            Ok(ChannelDistribution::PointMass {
                h: receiver.hit_probability(params.r0, params)?,
            })
        }
    }

    pub fn point_mass(h: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::param("h", format!("must lie in [0, 1], got {h}")));
        }
        Ok(ChannelDistribution::PointMass { h })
    }

    /// `[0, h_max]`, or the single atom for a point mass.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ChannelDistribution::PointMass { h } => (h, h),
            ChannelDistribution::Mobile {
                params, receiver, ..
            } => (0.0, receiver.h_max(&params)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            ChannelDistribution::PointMass { h } => Ok(h),
            ChannelDistribution::Mobile {
                params,
                receiver,
                t,
            } => {
                let r = sample_distance(params.r0, params.d_tr, t, rng)?;
                receiver.hit_probability(r, &params)
            }
        }
    }

    fn radial_window(params: &ChannelParams, receiver: Receiver, t: f64) -> (f64, f64, Vec<f64>) {
        let sigma = (4.0 * params.d_tr * t).sqrt();
        let r0 = params.r0;
        let hi = r0 + 12.0 * sigma;
        let mut breaks = vec![r0, r0 + 4.0 * sigma];
        for k in [12.0, 4.0] {
            if r0 - k * sigma > 0.0 {
                breaks.push(r0 - k * sigma);
            }
        }
        if receiver == Receiver::Absorbing {
            breaks.push(params.r_rx);
        }
        (0.0, hi, breaks)
    }

    /// `E[g(h)]`, by quadrature over the distance density.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        match *self {
            ChannelDistribution::PointMass { h } => Ok(g(h)),
            ChannelDistribution::Mobile {
                params,
                receiver,
                t,
            } => {
                let (lo, hi, breaks) = Self::radial_window(&params, receiver, t);
                let integrand = |r: f64| {
                    let Ok(h) = receiver.hit_probability(r, &params) else {
                        return f64::NAN;
                    };
                    let Ok(f) = distance_pdf(r, params.r0, params.d_tr, t) else {
                        return f64::NAN;
                    };
                    if f == 0.0 {
                        0.0
                    } else {
                        g(h) * f
                    }
                };
                let tol = Tolerance {
                    abs: 1e-300,
                    ..Tolerance::default()
                };
                Ok(quadrature::integrate(integrand, lo, hi, &breaks, tol)?.value)
            }
        }
    }

    /// `ln E[exp(log_g(h))]`, computed with the integrand rescaled by its
    /// maximum so that very small likelihoods do not underflow. `log_g` may
    /// return `-inf`.
    pub fn ln_expect_exp<G: Fn(f64) -> f64>(&self, log_g: G) -> Result<f64> {
        match *self {
            ChannelDistribution::PointMass { h } => Ok(log_g(h)),
            ChannelDistribution::Mobile {
                params,
                receiver,
                t,
            } => {
                let (lo, hi, mut breaks) = Self::radial_window(&params, receiver, t);
                let sigma = (4.0 * params.d_tr * t).sqrt();
                let scan_lo = (params.r0 - 12.0 * sigma).max(lo);
                let log_integrand = |r: f64| -> f64 {
                    let (Ok(h), Ok(lf)) = (
                        receiver.hit_probability(r, &params),
                        ln_distance_pdf(r, params.r0, params.d_tr, t),
                    ) else {
                        return f64::NAN;
                    };
                    if lf == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    log_g(h) + lf
                };
                let Some(peak) = locate_peak(&log_integrand, scan_lo, hi)? else {
                    return Ok(f64::NEG_INFINITY);
                };
                breaks.extend_from_slice(&peak.breaks);
                let peak = peak.value;
                let tol = Tolerance {
                    abs: 1e-300,
                    ..Tolerance::default()
                };
                let integral = quadrature::integrate(
                    |r| {
                        let v = log_integrand(r);
                        if v == f64::NEG_INFINITY {
                            0.0
                        } else {
                            (v - peak).min(0.0).exp()
                        }
                    },
                    lo,
                    hi,
                    &breaks,
                    tol,
                )?;
                if integral.value > 0.0 {
                    Ok(peak + integral.value.ln())
                } else {
                    Ok(f64::NEG_INFINITY)
                }
            }
        }
    }

    pub fn mean(&self) -> Result<f64> {
        self.expect(|h| h)
    }

    /// `E[exp(base(h)) · expm1(delta(h))]` up to a positive factor, i.e. the
    /// sign-faithful difference `E[e^{base+delta}] − E[e^{base}]`. Passing the
    /// log-ratio `delta` directly keeps the sign even when the two
    /// expectations agree to more digits than a double carries.
    pub fn expect_exp_difference<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(
        &self,
        base: F,
        delta: G,
    ) -> Result<f64> {
        let term = |b: f64, d: f64, shift: f64| {
            if b == f64::NEG_INFINITY {
                0.0
            } else if d > 0.0 {
                (b + d - shift).exp() * -(-d).exp_m1()
            } else {
                (b - shift).exp() * d.exp_m1()
            }
        };
        match *self {
            ChannelDistribution::PointMass { h } => Ok(term(base(h), delta(h), base(h).max(0.0))),
            ChannelDistribution::Mobile {
                params,
                receiver,
                t,
            } => {
                let (lo, hi, mut breaks) = Self::radial_window(&params, receiver, t);
                let sigma = (4.0 * params.d_tr * t).sqrt();
                let scan_lo = (params.r0 - 12.0 * sigma).max(lo);
                let logs = |r: f64| -> Option<(f64, f64)> {
                    let h = receiver.hit_probability(r, &params).ok()?;
                    let lf = ln_distance_pdf(r, params.r0, params.d_tr, t).ok()?;
                    Some((base(h) + lf, delta(h)))
                };
                let envelope = |r: f64| match logs(r) {
                    Some((b, d)) => b + d.max(0.0),
                    None => f64::NAN,
                };
                let Some(peak) = locate_peak(&envelope, scan_lo, hi)? else {
                    return Ok(0.0);
                };
                breaks.extend_from_slice(&peak.breaks);
                let peak = peak.value;
                // The normalized integrand is at most O(1) near the peak, so
                // differences below this floor are numerical ties.
                let tol = Tolerance {
                    abs: 1e-13 * (hi - lo),
                    ..Tolerance::default()
                };
                let integral = quadrature::integrate(
                    |r| match logs(r) {
                        Some((b, d)) => term(b, d, peak),
                        None => f64::NAN,
                    },
                    lo,
                    hi,
                    &breaks,
                    tol,
                )?;
                Ok(integral.value)
            }
        }
    }
}
