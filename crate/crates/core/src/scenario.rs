//! Scenario files: a sectioned `key = value` text format with SI unit
//! suffixes.
//!
//! ```text
//! # comment
//! [channel]
//! r0 = 1um
//! d_inf = 5e-9m2/s
//! receiver = passive
//!
//! [reception]
//! lambda = 10, 30, 90
//! model = poisson
//!
//! [run]
//! mode = static
//!
//! [scheme.sbrsk]
//! family = sbrsk
//! c = 400
//! decoder = channel-free
//!
//! [scheme.custom]
//! family = explicit
//! decoder = ml-poisson
//!
//! [scheme.custom.symbols]
//! 0 400
//! 400 0
//! ```
//!
//! Sections: `channel`, `reception`, `run`, `declared` (parameters the
//! decoder believes in, same keys as `channel`), `regions`, `scheme.NAME`
//! and `scheme.NAME.symbols`. Lengths accept `m|mm|um|µm|nm`, times
//! `s|ms|us|µs`, diffusion coefficients `m2/s|um2/s`; bare numbers are SI.
//! [`Scenario::to_text`] writes a file that parses back to the same value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{ChannelDistribution, ChannelParams, Receiver};
use crate::constellation::{
    brsk, normalize_budget, ook, rectangular_lattice, sbrsk, smaxrsk33, Constellation,
};
use crate::decoder::{ChannelKnowledge, DecoderKind, Requirement};
use crate::error::{Error, Result};
use crate::evaluation::{Method, MobileScenario, SlotSpacing, StaticScenario};
use crate::reception::{ReceptionModel, ReceptionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Static,
    Mobile,
    BudgetSweep,
    ImperfectCsi,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Mobile => "mobile",
            Mode::BudgetSweep => "budget-sweep",
            Mode::ImperfectCsi => "imperfect-csi",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(Mode::Static),
            "mobile" => Ok(Mode::Mobile),
            "budget-sweep" => Ok(Mode::BudgetSweep),
            "imperfect-csi" => Ok(Mode::ImperfectCsi),
            other => Err(Error::param(
                "mode",
                format!(
                    "unknown mode `{other}`; expected static|mobile|budget-sweep|imperfect-csi"
                ),
            )),
        }
    }
}

/// How a scheme's constellation is generated from a per-bit budget `c`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Sbrsk {
        rho0: f64,
    },
    Brsk {
        rho0: f64,
        rho1: f64,
    },
    /// On-off keying with `n_a` molecules, or `budget_factor · c` when
    /// `n_a` is absent.
    Ook {
        n_a: Option<f64>,
        budget_factor: f64,
    },
    Smaxrsk33 {
        p: f64,
    },
    /// `axes`-dimensional lattice with `levels` per axis; the spacing is
    /// explicit or follows from the equal-budget rule.
    Lattice {
        axes: usize,
        levels: usize,
        spacing: Option<f64>,
    },
    Explicit(Constellation),
}

impl Family {
    fn name(&self) -> &'static str {
        match self {
            Family::Sbrsk { .. } => "sbrsk",
            Family::Brsk { .. } => "brsk",
            Family::Ook { .. } => "ook",
            Family::Smaxrsk33 { .. } => "smaxrsk33",
            Family::Lattice { .. } => "lattice",
            Family::Explicit(_) => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub name: String,
    pub family: Family,
    /// Per-bit budget.
    pub c: Option<f64>,
    pub decoder: DecoderKind,
    pub tie_order: Option<Vec<usize>>,
}

impl Scheme {
    /// The constellation at the scheme's own budget, or at `c` when given.
    pub fn constellation(&self, c: Option<f64>) -> Result<Constellation> {
        let need_c = || {
            c.or(self.c).ok_or_else(|| {
                Error::config(None, format!("scheme `{}` needs a budget `c`", self.name))
            })
        };
        let cst = match &self.family {
            Family::Sbrsk { rho0 } => sbrsk(*rho0, need_c()?)?,
            Family::Brsk { rho0, rho1 } => brsk(*rho0, *rho1, need_c()?)?,
            Family::Ook { n_a, budget_factor } => match (c, n_a) {
                (None, Some(n)) => ook(*n)?,
                _ => ook(budget_factor * need_c()?)?,
            },
            Family::Smaxrsk33 { p } => smaxrsk33(*p, need_c()?)?,
            Family::Lattice {
                axes,
                levels,
                spacing,
            } => {
                let spacing = match (c, spacing) {
                    (None, Some(s)) => *s,
                    _ => {
                        let order = (*levels as u64).pow(*axes as u32);
                        normalize_budget(*axes as u32, order, need_c()?)?
                            .multi_axis
                            .spacing()
                    }
                };
                rectangular_lattice(*axes, *levels, spacing)?
            }
            Family::Explicit(cst) => {
                if c.is_some() {
                    return Err(Error::Infeasible(format!(
                        "scheme `{}` lists its symbols explicitly and cannot be rescaled to a new budget",
                        self.name
                    )));
                }
                cst.clone()
            }
        };
        let cst = match &self.tie_order {
            Some(order) => cst.with_tie_order(order.clone())?,
            None => cst,
        };
        Ok(cst.with_label(self.name.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub mode: Mode,
    pub method: Method,
    pub trials: u64,
    pub seed: Option<u64>,
    /// Static gain; the hit probability at `r0` when absent.
    pub h: Option<f64>,
    pub stream_length: usize,
    pub spacing: SlotSpacing,
    pub budgets: Vec<f64>,
    pub genie: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: Mode::Static,
            method: Method::MonteCarlo,
            trials: 10_000,
            seed: None,
            h: None,
            stream_length: 50,
            spacing: SlotSpacing::SamplingOffset,
            budgets: Vec::new(),
            genie: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionsSection {
    /// Scheme to rasterize; the first one when absent.
    pub scheme: Option<String>,
    pub grid_max: u64,
    /// Release time whose gain law informs distribution-based decoders.
    pub t: f64,
}

impl Default for RegionsSection {
    fn default() -> Self {
        RegionsSection {
            scheme: None,
            grid_max: 100,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ChannelParams,
    pub receiver: Receiver,
    pub lambdas: Vec<f64>,
    pub model: ReceptionModel,
    pub run: RunSection,
    pub declared: Option<ChannelParams>,
    pub regions: RegionsSection,
    pub schemes: Vec<Scheme>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: ChannelParams::table2(),
            receiver: Receiver::Passive,
            lambdas: vec![0.0],
            model: ReceptionModel::Poisson,
            run: RunSection::default(),
            declared: None,
            regions: RegionsSection::default(),
            schemes: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Dimension {
    Length,
    Time,
    Diffusion,
}

/// Suffix, dimension and power of ten. Longest suffixes come first.
const UNITS: &[(&str, Dimension, i32)] = &[
    ("um2/s", Dimension::Diffusion, -12),
    ("µm2/s", Dimension::Diffusion, -12),
    ("m2/s", Dimension::Diffusion, 0),
    ("mm", Dimension::Length, -3),
    ("um", Dimension::Length, -6),
    ("µm", Dimension::Length, -6),
    ("nm", Dimension::Length, -9),
    ("ms", Dimension::Time, -3),
    ("us", Dimension::Time, -6),
    ("µs", Dimension::Time, -6),
    ("m", Dimension::Length, 0),
    ("s", Dimension::Time, 0),
];

/// Parses `number[unit]`. The unit shifts the decimal exponent before the
/// conversion so `0.035ms` rounds once, to the same double as `3.5e-5`.
pub(crate) fn parse_quantity(raw: &str, dim: Option<Dimension>, line: usize) -> Result<f64> {
    let text = raw.trim();
    let not_a_number = || Error::config(Some(line), format!("`{text}` is not a number"));
    let (number, unit) = UNITS
        .iter()
        .find_map(|&(suffix, d, pow)| {
            text.strip_suffix(suffix)
                .map(|n| (n.trim(), Some((suffix, d, pow))))
        })
        .filter(|(n, _)| n.parse::<f64>().is_ok())
        .unwrap_or((text, None));
    let Some((suffix, d, pow)) = unit else {
        return number.parse().map_err(|_| not_a_number());
    };
    if dim != Some(d) {
        return Err(Error::config(
            Some(line),
            format!("unit `{suffix}` does not fit this key"),
        ));
    }
    let (mantissa, exp) = match number.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| not_a_number())?),
        None => (number, 0),
    };
    format!("{mantissa}e{}", exp + pow)
        .parse()
        .map_err(|_| not_a_number())
}

fn parse_list(raw: &str, dim: Option<Dimension>, line: usize) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_quantity(s, dim, line))
        .collect()
}

fn parse_count(raw: &str, line: usize) -> Result<u64> {
    let v = parse_quantity(raw, None, line)?;
    if !(v >= 0.0 && v.fract() == 0.0 && v < 1.8e19) {
        return Err(Error::config(
            Some(line),
            format!("`{}` is not a nonnegative integer", raw.trim()),
        ));
    }
    Ok(v as u64)
}

fn parse_bool(raw: &str, line: usize) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::config(
            Some(line),
            format!("`{other}` is not a boolean"),
        )),
    }
}

fn at_line<T>(r: Result<T>, line: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(c) if c.line.is_some() => Error::Config(c),
        other => Error::config(Some(line), other.to_string()),
    })
}

fn set_channel_key(p: &mut ChannelParams, key: &str, value: &str, line: usize) -> Result<bool> {
    let slot = match key {
        "d_inf" => (&mut p.d_inf, Dimension::Diffusion),
        "d_tr" => (&mut p.d_tr, Dimension::Diffusion),
        "r_rx" => (&mut p.r_rx, Dimension::Length),
        "r0" => (&mut p.r0, Dimension::Length),
        "tau_s" => (&mut p.tau_s, Dimension::Time),
        "t_b" => (&mut p.t_b, Dimension::Time),
        _ => return Ok(false),
    };
    *slot.0 = parse_quantity(value, Some(slot.1), line)?;
    Ok(true)
}

#[derive(Default)]
struct SchemeDraft {
    name: String,
    line: usize,
    family: Option<String>,
    c: Option<f64>,
    rho0: Option<f64>,
    rho1: Option<f64>,
    p: Option<f64>,
    n_a: Option<f64>,
    budget_factor: Option<f64>,
    axes: Option<usize>,
    levels: Option<usize>,
    spacing: Option<f64>,
    decoder: Option<DecoderKind>,
    tie_order: Option<Vec<usize>>,
    symbols: Option<(String, usize)>,
}

impl SchemeDraft {
    fn finish(self) -> Result<Scheme> {
        let line = Some(self.line);
        let name = self.name.clone();
        let missing =
            |key: &str| Error::config(line, format!("scheme `{name}` is missing `{key}`"));
        let family = self.family.clone().ok_or_else(|| missing("family"))?;
        let family = match family.as_str() {
            "sbrsk" => Family::Sbrsk {
                rho0: self.rho0.unwrap_or(0.0),
            },
            "brsk" => Family::Brsk {
                rho0: self.rho0.ok_or_else(|| missing("rho0"))?,
                rho1: self.rho1.ok_or_else(|| missing("rho1"))?,
            },
            "ook" => Family::Ook {
                n_a: self.n_a,
                budget_factor: self.budget_factor.unwrap_or(2.0),
            },
            "smaxrsk33" => Family::Smaxrsk33 {
                p: self.p.ok_or_else(|| missing("p"))?,
            },
            "lattice" => Family::Lattice {
                axes: self.axes.ok_or_else(|| missing("axes"))?,
                levels: self.levels.ok_or_else(|| missing("levels"))?,
                spacing: self.spacing,
            },
            "explicit" => {
                let (text, first) = self.symbols.clone().ok_or_else(|| {
                    Error::config(
                        line,
                        format!("scheme `{name}` needs a [scheme.{name}.symbols] block"),
                    )
                })?;
                Family::Explicit(Constellation::parse_block(&name, &text, first)?)
            }
            other => return Err(Error::config(
                line,
                format!(
                    "unknown family `{other}`; expected sbrsk|brsk|ook|smaxrsk33|lattice|explicit"
                ),
            )),
        };
        let scheme = Scheme {
            name: self.name,
            family,
            c: self.c,
            decoder: self.decoder.ok_or_else(|| missing("decoder"))?,
            tie_order: self.tie_order,
        };
        let has_own_budget = matches!(scheme.family, Family::Explicit(_))
            || matches!(scheme.family, Family::Ook { n_a: Some(_), .. })
            || matches!(
                scheme.family,
                Family::Lattice {
                    spacing: Some(_),
                    ..
                }
            );
        if scheme.c.is_some() || has_own_budget {
            at_line(scheme.constellation(None), self.line)?;
        }
        Ok(scheme)
    }
}

enum Section {
    None,
    Channel,
    Reception,
    Run,
    Declared,
    Regions,
    Scheme(usize),
    Symbols(usize),
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sc = Scenario::default();
        let mut drafts: Vec<SchemeDraft> = Vec::new();
        // declared keys are overrides applied on top of the final [channel]
        let mut declared: Option<Vec<(String, String, usize)>> = None;
        let mut section = Section::None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if let Section::Symbols(s) = section {
                if !raw.trim_start().starts_with('[') {
                    let entry = drafts[s]
                        .symbols
                        .get_or_insert_with(|| (String::new(), line));
                    entry.0.push_str(raw);
                    entry.0.push('\n');
                    continue;
                }
            }
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(header) = content.strip_prefix('[') {
                let name = header
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(Some(line), "section header is missing `]`"))?
                    .trim();
                section = match name {
                    "channel" => Section::Channel,
                    "reception" => Section::Reception,
                    "run" => Section::Run,
                    "declared" => {
                        declared.get_or_insert_with(Vec::new);
                        Section::Declared
                    }
                    "regions" => Section::Regions,
                    _ => {
                        let Some(rest) = name.strip_prefix("scheme.") else {
                            return Err(Error::config(
                                Some(line),
                                format!("unknown section [{name}]"),
                            ));
                        };
                        let (scheme, is_symbols) = match rest.strip_suffix(".symbols") {
                            Some(s) => (s, true),
                            None => (rest, false),
                        };
                        if scheme.is_empty()
                            || !scheme
                                .chars()
                                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                        {
                            return Err(Error::config(
                                Some(line),
                                format!("invalid scheme name `{scheme}`"),
                            ));
                        }
                        let pos = match drafts.iter().position(|d| d.name == scheme) {
                            Some(p) if !is_symbols => {
                                return Err(Error::config(
                                    Some(line),
                                    format!(
                                        "scheme `{scheme}` defined twice (first at line {})",
                                        drafts[p].line
                                    ),
                                ))
                            }
                            Some(p) => p,
                            None => {
                                drafts.push(SchemeDraft {
                                    name: scheme.to_string(),
                                    line,
                                    ..SchemeDraft::default()
                                });
                                drafts.len() - 1
                            }
                        };
                        if is_symbols {
                            Section::Symbols(pos)
                        } else {
                            Section::Scheme(pos)
                        }
                    }
                };
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    Error::config(
                        Some(line),
                        format!("expected `key = value`, got `{content}`"),
                    )
                })?;
            let unknown =
                || Error::config(Some(line), format!("unknown key `{key}` in this section"));
            match section {
                Section::None => {
                    return Err(Error::config(Some(line), "key outside of any section"))
                }
                Section::Channel => {
                    if key == "receiver" {
                        sc.receiver = at_line(value.parse(), line)?;
                    } else if !set_channel_key(&mut sc.params, key, value, line)? {
                        return Err(unknown());
                    }
                }
                Section::Declared => {
                    let mut probe = sc.params;
                    if !set_channel_key(&mut probe, key, value, line)? {
                        return Err(unknown());
                    }
                    declared.as_mut().expect("initialized on header").push((
                        key.to_string(),
                        value.to_string(),
                        line,
                    ));
                }
                Section::Reception => match key {
                    "lambda" => {
                        sc.lambdas = parse_list(value, None, line)?;
                        if sc.lambdas.is_empty() {
                            return Err(Error::config(
                                Some(line),
                                "`lambda` needs at least one value",
                            ));
                        }
                    }
                    "model" => sc.model = at_line(value.parse(), line)?,
                    _ => return Err(unknown()),
                },
                Section::Run => match key {
                    "mode" => {
                        sc.run.mode = at_line(value.parse(), line)?;
                    }
                    "method" => sc.run.method = at_line(value.parse(), line)?,
                    "trials" => sc.run.trials = parse_count(value, line)?,
                    "seed" => sc.run.seed = Some(parse_count(value, line)?),
                    "h" => sc.run.h = Some(parse_quantity(value, None, line)?),
                    "stream_length" => sc.run.stream_length = parse_count(value, line)? as usize,
                    "slot_spacing" => {
                        sc.run.spacing = match value {
                            "tau_s" => SlotSpacing::SamplingOffset,
                            "t_b" => SlotSpacing::BitDuration,
                            v => SlotSpacing::Seconds(parse_quantity(
                                v,
                                Some(Dimension::Time),
                                line,
                            )?),
                        }
                    }
                    "budgets" => sc.run.budgets = parse_list(value, None, line)?,
                    "genie" => sc.run.genie = parse_bool(value, line)?,
                    _ => return Err(unknown()),
                },
                Section::Regions => match key {
                    "scheme" => sc.regions.scheme = Some(value.to_string()),
                    "grid_max" => sc.regions.grid_max = parse_count(value, line)?,
                    "t" => sc.regions.t = parse_quantity(value, Some(Dimension::Time), line)?,
                    _ => return Err(unknown()),
                },
                Section::Scheme(s) => {
                    let d = &mut drafts[s];
                    let num = || parse_quantity(value, None, line);
                    match key {
                        "family" => d.family = Some(value.to_ascii_lowercase()),
                        "c" => d.c = Some(num()?),
                        "rho0" => d.rho0 = Some(num()?),
                        "rho1" => d.rho1 = Some(num()?),
                        "p" => d.p = Some(num()?),
                        "n_a" => d.n_a = Some(num()?),
                        "budget_factor" => d.budget_factor = Some(num()?),
                        "axes" => d.axes = Some(parse_count(value, line)? as usize),
                        "levels" => d.levels = Some(parse_count(value, line)? as usize),
                        "spacing" => d.spacing = Some(num()?),
                        "decoder" => d.decoder = Some(at_line(value.parse(), line)?),
                        "tie_order" => {
                            d.tie_order = Some(
                                value
                                    .split(',')
                                    .map(|s| parse_count(s, line).map(|v| v as usize))
                                    .collect::<Result<_>>()?,
                            )
                        }
                        _ => return Err(unknown()),
                    }
                }
                Section::Symbols(_) => unreachable!("handled above"),
            }
        }
        sc.schemes = drafts
            .into_iter()
            .map(SchemeDraft::finish)
            .collect::<Result<_>>()?;
        sc.declared = match declared {
            None => None,
            Some(overrides) => {
                let mut d = sc.params;
                for (key, value, line) in overrides {
                    set_channel_key(&mut d, &key, &value, line)?;
                }
                Some(d)
            }
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if let Some(d) = &self.declared {
            d.validate()?;
        }
        for &l in &self.lambdas {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::config(
                    None,
                    format!("lambda must be finite and >= 0, got {l}"),
                ));
            }
        }
        if let Some(h) = self.run.h {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::config(
                    None,
                    format!("run.h must lie in [0, 1], got {h}"),
                ));
            }
        }
        if let Some(name) = &self.regions.scheme {
            if !self.schemes.iter().any(|s| &s.name == name) {
                return Err(Error::config(
                    None,
                    format!("regions.scheme `{name}` is not defined"),
                ));
            }
        }
        Ok(())
    }

    pub fn scheme(&self, name: &str) -> Result<&Scheme> {
        self.schemes
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::config(None, format!("no scheme named `{name}`")))
    }

    /// Static gain: `run.h`, or the hit probability at the initial distance.
    pub fn static_gain(&self) -> Result<f64> {
        match self.run.h {
            Some(h) => Ok(h),
            None => self.receiver.hit_probability(self.params.r0, &self.params),
        }
    }

    pub fn reception(&self, lambda: f64) -> Result<ReceptionParams> {
        ReceptionParams::new(lambda, self.model)
    }

    fn single_lambda(&self) -> Result<f64> {
        match self.lambdas.as_slice() {
            [l] => Ok(*l),
            _ => Err(Error::config(
                None,
                format!("mode {} needs exactly one lambda", self.run.mode.name()),
            )),
        }
    }

    pub fn static_scenario(&self, scheme: &Scheme, lambda: f64) -> Result<StaticScenario> {
        Ok(StaticScenario {
            constellation: scheme.constellation(None)?,
            h: self.static_gain()?,
            reception: self.reception(lambda)?,
            decoder: scheme.decoder,
        })
    }

    pub fn mobile_scenario(&self, scheme: &Scheme) -> Result<MobileScenario> {
        self.mobile_with(scheme.constellation(None)?, scheme.decoder)
    }

    /// The mobile setting of this scenario around an arbitrary constellation.
    pub fn mobile_with(
        &self,
        constellation: Constellation,
        decoder: DecoderKind,
    ) -> Result<MobileScenario> {
        let sc = MobileScenario {
            constellation,
            params: self.params,
            receiver: self.receiver,
            reception: self.reception(self.single_lambda()?)?,
            decoder,
            declared: None,
            genie: self.run.genie,
            stream_length: self.run.stream_length,
            spacing: self.run.spacing,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Channel knowledge for rasterizing decision regions.
    pub fn region_knowledge(&self, decoder: DecoderKind) -> Result<ChannelKnowledge> {
        let t = self.regions.t;
        Ok(match decoder.requirement() {
            Requirement::Nothing => ChannelKnowledge::Nothing,
            Requirement::ExactGain => ChannelKnowledge::ExactGain(self.static_gain()?),
            Requirement::MeanGain => {
                ChannelKnowledge::MeanGain(if t > 0.0 && self.params.d_tr > 0.0 {
                    ChannelDistribution::new(t, &self.params, self.receiver)?.mean()?
                } else {
                    self.static_gain()?
                })
            }
            Requirement::Distribution => {
                ChannelKnowledge::Distribution(if t > 0.0 && self.params.d_tr > 0.0 {
                    ChannelDistribution::new(t, &self.params, self.receiver)?
                } else {
                    ChannelDistribution::point_mass(self.static_gain()?)?
                })
            }
        })
    }

    /// A scenario file that parses back to `self`. Numbers are written in SI
    /// without suffixes, using the shortest exact decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let _ = writeln!(out, "[channel]");
        write_params(&mut out, p);
        let _ = writeln!(out, "receiver = {}", self.receiver);
        let _ = writeln!(out, "\n[reception]");
        let lambdas: Vec<String> = self.lambdas.iter().map(|l| format!("{l:?}")).collect();
        let _ = writeln!(out, "lambda = {}", lambdas.join(", "));
        let _ = writeln!(out, "model = {}", self.model);
        let r = &self.run;
        let _ = writeln!(out, "\n[run]");
        let _ = writeln!(out, "mode = {}", r.mode.name());
        let _ = writeln!(out, "method = {}", r.method);
        let _ = writeln!(out, "trials = {}", r.trials);
        if let Some(seed) = r.seed {
            let _ = writeln!(out, "seed = {seed}");
        }
        if let Some(h) = r.h {
            let _ = writeln!(out, "h = {h:?}");
        }
        let _ = writeln!(out, "stream_length = {}", r.stream_length);
        let _ = writeln!(out, "slot_spacing = {}", r.spacing);
        if !r.budgets.is_empty() {
            let b: Vec<String> = r.budgets.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "budgets = {}", b.join(", "));
        }
        let _ = writeln!(out, "genie = {}", r.genie);
        if let Some(d) = &self.declared {
            let _ = writeln!(out, "\n[declared]");
            write_params(&mut out, d);
        }
        let _ = writeln!(out, "\n[regions]");
        if let Some(s) = &self.regions.scheme {
            let _ = writeln!(out, "scheme = {s}");
        }
        let _ = writeln!(out, "grid_max = {}", self.regions.grid_max);
        let _ = writeln!(out, "t = {:?}", self.regions.t);
        for s in &self.schemes {
            let _ = writeln!(out, "\n[scheme.{}]", s.name);
            let _ = writeln!(out, "family = {}", s.family.name());
            if let Some(c) = s.c {
                let _ = writeln!(out, "c = {c:?}");
            }
            match &s.family {
                Family::Sbrsk { rho0 } => {
                    let _ = writeln!(out, "rho0 = {rho0:?}");
                }
                Family::Brsk { rho0, rho1 } => {
                    let _ = writeln!(out, "rho0 = {rho0:?}\nrho1 = {rho1:?}");
                }
                Family::Ook { n_a, budget_factor } => {
                    if let Some(n) = n_a {
                        let _ = writeln!(out, "n_a = {n:?}");
                    }
                    let _ = writeln!(out, "budget_factor = {budget_factor:?}");
                }
                Family::Smaxrsk33 { p } => {
                    let _ = writeln!(out, "p = {p:?}");
                }
                Family::Lattice {
                    axes,
                    levels,
                    spacing,
                } => {
                    let _ = writeln!(out, "axes = {axes}\nlevels = {levels}");
                    if let Some(sp) = spacing {
                        let _ = writeln!(out, "spacing = {sp:?}");
                    }
                }
                Family::Explicit(_) => {}
            }
            let _ = writeln!(out, "decoder = {}", s.decoder);
            if let Some(order) = &s.tie_order {
                let o: Vec<String> = order.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "tie_order = {}", o.join(", "));
            }
            if let Family::Explicit(cst) = &s.family {
                let _ = writeln!(out, "\n[scheme.{}.symbols]", s.name);
                out.push_str(&cst.to_block());
            }
        }
        out
    }
}

fn write_params(out: &mut String, p: &ChannelParams) {
    let _ = writeln!(out, "d_inf = {:?}", p.d_inf);
    let _ = writeln!(out, "d_tr = {:?}", p.d_tr);
    let _ = writeln!(out, "r_rx = {:?}", p.r_rx);
    let _ = writeln!(out, "r0 = {:?}", p.r0);
    let _ = writeln!(out, "tau_s = {:?}", p.tau_s);
    let _ = writeln!(out, "t_b = {:?}", p.t_b);
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# two schemes at equal budget
[channel]
r0 = 1um
d_inf = 5e-9m2/s
d_tr = 5e-12 m2/s
tau_s = 0.035ms
t_b = 0.5 ms
receiver = passive

[reception]
lambda = 10, 30, 90
model = poisson

[run]
mode = static
trials = 1000
seed = 42

[declared]
d_inf = 9e-8m2/s

[scheme.sbrsk]
family = sbrsk
c = 400
decoder = channel-free

[scheme.ook]
family = ook
c = 400
decoder = ook-threshold

[scheme.custom]
family = explicit
decoder = ml-poisson
tie_order = 1, 0

[scheme.custom.symbols]
0 400   # bit 0
400 0
";

    #[test]
    fn parses_units_and_schemes() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        assert_eq!(sc.params, ChannelParams::table2());
        assert_eq!(sc.lambdas, vec![10.0, 30.0, 90.0]);
        assert_eq!(sc.run.seed, Some(42));
        assert_eq!(sc.declared.unwrap().d_inf, 9e-8);
        assert_eq!(sc.schemes.len(), 3);
        let ook = sc.scheme("ook").unwrap().constellation(None).unwrap();
        assert_eq!(ook.symbol(1), &[800.0]);
        let custom = sc.scheme("custom").unwrap().constellation(None).unwrap();
        assert_eq!(custom.tie_order(), &[1, 0]);
        assert_eq!(custom.label(), "custom");
    }

    #[test]
    fn round_trip() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        let again = Scenario::parse(&sc.to_text()).unwrap();
        assert_eq!(sc, again);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "[channel]\nr0 = 1ms\n";
        match Scenario::parse(bad) {
            Err(Error::Config(c)) => assert_eq!(c.line, Some(2)),
            other => panic!("{other:?}"),
        }
        let bad = "[run]\nfoo = 1\n";
        assert!(matches!(Scenario::parse(bad), Err(Error::Config(c)) if c.line == Some(2)));
        let bad =
            "[scheme.x]\nfamily = explicit\ndecoder = ml-poisson\n[scheme.x.symbols]\n1 2\n3\n";
        assert!(matches!(Scenario::parse(bad), Err(Error::Config(c)) if c.line == Some(6)));
    }

    #[test]
    fn quantities() {
        assert_eq!(
            parse_quantity("1um", Some(Dimension::Length), 1).unwrap(),
            1e-6
        );
        assert_eq!(
            parse_quantity("0.5ms", Some(Dimension::Time), 1).unwrap(),
            0.5e-3
        );
        assert_eq!(
            parse_quantity("5e-9m2/s", Some(Dimension::Diffusion), 1).unwrap(),
            5e-9
        );
        assert_eq!(
            parse_quantity("1e-5", Some(Dimension::Time), 1).unwrap(),
            1e-5
        );
        assert!(parse_quantity("3 furlongs", None, 1).is_err());
    }

    #[test]
    fn budget_rescaling() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        let ook = sc
            .scheme("ook")
            .unwrap()
            .constellation(Some(1000.0))
            .unwrap();
        assert_eq!(ook.symbol(1), &[2000.0]);
        assert!(sc
            .scheme("custom")
            .unwrap()
            .constellation(Some(10.0))
            .is_err());
    }
}
