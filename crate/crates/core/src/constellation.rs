//! Multi-axis constellations: rectangular lattices, ratio-shift families,
//! the channel-free design check, and molecular budget bookkeeping.

use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4096;
pub const MAX_AXES: usize = 16;

/// Relative tolerance used when matching ratio patterns between symbols.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// An ordered set of `m` symbols in a `k`-axis nonnegative molecule-count space.
///
/// Symbol index is the symbol label. Ties between equally likely symbols are
/// resolved by `tie_order`: the symbol appearing first wins. The default is
/// the identity, i.e. the lowest index wins.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    label: String,
    k: usize,
    symbols: Vec<Vec<f64>>,
    tie_order: Vec<usize>,
    tie_rank: Vec<usize>,
}

impl Constellation {
    pub fn new(label: impl Into<String>, symbols: Vec<Vec<f64>>) -> Result<Self> {
        let cst = Self::build(label.into(), symbols)?;
        for b in 0..cst.m() {
            for b2 in b + 1..cst.m() {
                if cst.symbols[b] == cst.symbols[b2] {
                    return Err(Error::InvalidConstellation(format!(
                        "symbols {b} and {b2} coincide"
                    )));
                }
            }
        }
        Ok(cst)
    }

    /// Builds a constellation that may contain repeated symbols. Only useful
    /// for degenerate-case analysis; every other invariant is still checked.
    pub fn with_duplicates(label: impl Into<String>, symbols: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(label.into(), symbols)
    }

    fn build(label: String, symbols: Vec<Vec<f64>>) -> Result<Self> {
        let m = symbols.len();
        if m == 0 {
            return Err(Error::InvalidConstellation("no symbols".into()));
        }
        if m > MAX_ORDER {
            return Err(Error::InvalidConstellation(format!(
                "order {m} exceeds the maximum of {MAX_ORDER}"
            )));
        }
        let k = symbols[0].len();
        if k == 0 || k > MAX_AXES {
            return Err(Error::InvalidConstellation(format!(
                "axis count {k} outside 1..={MAX_AXES}"
            )));
        }
        for (b, s) in symbols.iter().enumerate() {
            if s.len() != k {
                return Err(Error::InvalidConstellation(format!(
                    "symbol {b} has {} entries, expected {k}",
                    s.len()
                )));
            }
            if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidConstellation(format!(
                    "symbol {b} has entry {v}; molecule counts must be finite and nonnegative"
                )));
            }
        }
        let tie_order: Vec<usize> = (0..m).collect();
        Ok(Constellation {
            label,
            k,
            symbols,
            tie_rank: tie_order.clone(),
            tie_order,
        })
    }

    /// Replaces the tie preference; `order` must be a permutation of `0..m`.
    pub fn with_tie_order(mut self, order: Vec<usize>) -> Result<Self> {
        let m = self.m();
        let mut seen = vec![false; m];
        if order.len() != m
            || order
                .iter()
                .any(|&b| b >= m || std::mem::replace(&mut seen[b], true))
        {
            return Err(Error::InvalidConstellation(format!(
                "tie order {order:?} is not a permutation of 0..{m}"
            )));
        }
        let mut rank = vec![0; m];
        for (pos, &b) in order.iter().enumerate() {
            rank[b] = pos;
        }
        self.tie_order = order;
        self.tie_rank = rank;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn m(&self) -> usize {
        self.symbols.len()
    }
    pub fn symbols(&self) -> &[Vec<f64>] {
        &self.symbols
    }
    pub fn symbol(&self, b: usize) -> &[f64] {
        &self.symbols[b]
    }
    pub fn tie_order(&self) -> &[usize] {
        &self.tie_order
    }
    /// Position of `b` in the tie preference (0 = preferred).
    pub fn tie_rank(&self, b: usize) -> usize {
        self.tie_rank[b]
    }

    /// Total molecules `c_b` spent on symbol `b`.
    pub fn total(&self, b: usize) -> f64 {
        self.symbols[b].iter().sum()
    }

    /// Average molecules per symbol under equal priors.
    pub fn mean_total(&self) -> f64 {
        (0..self.m()).map(|b| self.total(b)).sum::<f64>() / self.m() as f64
    }

    /// Parses the plain-text block: one symbol per line, whitespace-separated
    /// counts. Blank lines and `#` comments are skipped. `first_line` is the
    /// line number of the block's first line, for error messages.
    pub fn parse_block(label: &str, text: &str, first_line: usize) -> Result<Self> {
        let mut symbols = Vec::new();
        let mut last_line = first_line;
        for (offset, raw) in text.lines().enumerate() {
            let line_no = first_line + offset;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            last_line = line_no;
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::config(Some(line_no), format!("`{tok}` is not a molecule count"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = symbols.first() {
                let first: &Vec<f64> = first;
                if first.len() != row.len() {
                    return Err(Error::config(
                        Some(line_no),
                        format!("symbol has {} counts, expected {}", row.len(), first.len()),
                    ));
                }
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::config(
                    Some(line_no),
                    format!("count {v} must be finite and nonnegative"),
                ));
            }
            symbols.push(row);
        }
        Constellation::new(label, symbols)
            .map_err(|e| Error::config(Some(last_line), e.to_string()))
    }

    /// Inverse of [`Constellation::parse_block`].
    pub fn to_block(&self) -> String {
        let mut out = String::new();
        for s in &self.symbols {
            let row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (K={}, M={})", self.label, self.k, self.m())
    }
}

/// A normalized composition vector: nonnegative shares summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioVector(Vec<f64>);

impl RatioVector {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::param("ratios", "empty ratio vector"));
        }
        if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::param("ratios", format!("share {r} outside [0, 1]")));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "ratios",
                format!("shares sum to {sum}, expected 1"),
            ));
        }
        Ok(RatioVector(ratios))
    }

    /// From ratios relative to the first molecule type:
    /// `(1, r_2, ..., r_K) / (1 + Σ r_i)`. An infinite ratio puts all mass on
    /// that type.
    pub fn from_reference_ratios(ratios: &[f64]) -> Result<Self> {
        if ratios.iter().any(|r| r.is_nan() || *r < 0.0) {
            return Err(Error::param(
                "ratios",
                "relative ratios must be nonnegative",
            ));
        }
        let infinite = ratios.iter().filter(|r| r.is_infinite()).count();
        let shares = if infinite > 0 {
            std::iter::once(0.0)
                .chain(ratios.iter().map(|r| {
                    if r.is_infinite() {
                        1.0 / infinite as f64
                    } else {
                        0.0
                    }
                }))
                .collect()
        } else {
            let norm = 1.0 + ratios.iter().sum::<f64>();
            std::iter::once(1.0 / norm)
                .chain(ratios.iter().map(|r| r / norm))
                .collect()
        };
        RatioVector::new(shares)
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }
}

/// Rectangular lattice: every `k`-tuple of levels `i·spacing`, `i < m_per_axis`,
/// in row-major order (last axis fastest).
pub fn rectangular_lattice(k: usize, m_per_axis: usize, spacing: f64) -> Result<Constellation> {
    if k == 0 || k > MAX_AXES {
        return Err(Error::param(
            "k",
            format!("must be in 1..={MAX_AXES}, got {k}"),
        ));
    }
    if m_per_axis < 2 {
        return Err(Error::param(
            "m_per_axis",
            format!("must be >= 2, got {m_per_axis}"),
        ));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::param(
            "spacing",
            format!("must be > 0, got {spacing}"),
        ));
    }
    let order = (m_per_axis as u128)
        .checked_pow(k as u32)
        .filter(|o| *o <= MAX_ORDER as u128);
    let Some(order) = order else {
        return Err(Error::InvalidConstellation(format!(
            "lattice order {m_per_axis}^{k} exceeds the maximum of {MAX_ORDER}"
        )));
    };
    let symbols = (0..order as usize)
        .map(|idx| {
            let mut rest = idx;
            let mut s = vec![0.0; k];
            for axis in (0..k).rev() {
                s[axis] = (rest % m_per_axis) as f64 * spacing;
                rest /= m_per_axis;
            }
            s
        })
        .collect();
    Constellation::new(format!("lattice({k},{order})"), symbols)
}

/// On-off keying: `{(0), (n_a)}`.
pub fn ook(n_a: f64) -> Result<Constellation> {
    Ok(rectangular_lattice(1, 2, n_a)?.with_label("ook"))
}

/// Ratio-shift constellation: symbol `b` is `c · R_b`.
pub fn maxrsk(c: f64, ratio_vectors: &[RatioVector]) -> Result<Constellation> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::param("c", format!("must be > 0, got {c}")));
    }
    for (i, r) in ratio_vectors.iter().enumerate() {
        if ratio_vectors[..i].contains(r) {
            return Err(Error::InvalidConstellation(format!(
                "ratio vector {i} duplicates an earlier one"
            )));
        }
    }
    let symbols = ratio_vectors
        .iter()
        .map(|r| r.shares().iter().map(|s| c * s).collect())
        .collect();
    Constellation::new(
        format!(
            "maxrsk({},{})",
            ratio_vectors.first().map_or(0, |r| r.0.len()),
            ratio_vectors.len()
        ),
        symbols,
    )
}

/// Binary ratio-shift keying with type-1 shares `rho0` (bit 0) and `rho1`
/// (bit 1). Bit 1 wins ties, so that `m` on the decision boundary decodes
/// as 1.
pub fn brsk(rho0: f64, rho1: f64, c: f64) -> Result<Constellation> {
    for (field, rho) in [("rho0", rho0), ("rho1", rho1)] {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::param(
                field,
                format!("must lie in [0, 1], got {rho}"),
            ));
        }
    }
    if rho1 <= rho0 {
        return Err(Error::param(
            "rho1",
            format!("must exceed rho0 ({rho1} <= {rho0})"),
        ));
    }
    let ratios = [
        RatioVector::new(vec![rho0, 1.0 - rho0])?,
        RatioVector::new(vec![rho1, 1.0 - rho1])?,
    ];
    Ok(maxrsk(c, &ratios)?
        .with_tie_order(vec![1, 0])?
        .with_label(format!("brsk({rho0},{rho1})")))
}

/// Symmetric BRSK: bit 0 ↦ `(cρ₀, c(1−ρ₀))`, bit 1 ↦ `(c(1−ρ₀), cρ₀)`.
pub fn sbrsk(rho0: f64, c: f64) -> Result<Constellation> {
    if !(0.0..0.5).contains(&rho0) {
        return Err(Error::param(
            "rho0",
            format!("must lie in [0, 1/2), got {rho0}"),
        ));
    }
    Ok(brsk(rho0, 1.0 - rho0, c)?.with_label(format!("sbrsk({rho0})")))
}

/// Three-type, three-symbol symmetric ratio constellation built from cyclic
/// shifts of `(p, 1−2p, p)`.
pub fn smaxrsk33(p: f64, c: f64) -> Result<Constellation> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::param("p", format!("must lie in (0, 1/2), got {p}")));
    }
    if (p - 1.0 / 3.0).abs() < 1e-12 {
        return Err(Error::param("p", "p = 1/3 makes all three symbols equal"));
    }
    let q = 1.0 - 2.0 * p;
    let ratios = [
        RatioVector::new(vec![p, q, p])?,
        RatioVector::new(vec![q, p, p])?,
        RatioVector::new(vec![p, p, q])?,
    ];
    Ok(maxrsk(c, &ratios)?.with_label(format!("smaxrsk33({p})")))
}

/// Where [`check_channel_free`] found a violation: the symbol pair and, for
/// ratio violations, the offending axis (`None` when the totals differ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Witness {
    pub b: usize,
    pub b_prime: usize,
    pub axis: Option<usize>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.axis {
            Some(i) => write!(
                f,
                "symbols {} and {} break the swap pattern on axis {}",
                self.b, self.b_prime, i
            ),
            None => write!(
                f,
                "symbols {} and {} have different totals",
                self.b, self.b_prime
            ),
        }
    }
}

/// Axes on which symbol `b` holds the larger (`favor`) or smaller
/// (`against`) share in a channel-free pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPattern {
    pub favor: Vec<usize>,
    pub against: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFreeReport {
    pub witness: Option<Witness>,
    /// `patterns[b][b']` for channel-free constellations.
    pub patterns: Vec<Vec<PairPattern>>,
}

impl ChannelFreeReport {
    pub fn is_channel_free(&self) -> bool {
        self.witness.is_none()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATIO_TOLERANCE * a.abs().max(b.abs())
}

/// Checks whether ML decoding under Poisson reception is independent of the
/// channel gain and noise level: equal symbol totals, and for every pair the
/// per-axis share pairs are all equal, `(α, β)`, or `(β, α)`.
pub fn check_channel_free(cst: &Constellation) -> ChannelFreeReport {
    let m = cst.m();
    let fail = |b, b_prime, axis| ChannelFreeReport {
        witness: Some(Witness { b, b_prime, axis }),
        patterns: Vec::new(),
    };
    let c0 = cst.total(0);
    for b in 1..m {
        if !close(cst.total(b), c0) {
            return fail(0, b, None);
        }
    }
    let mut patterns = vec![
        vec![
            PairPattern {
                favor: Vec::new(),
                against: Vec::new(),
            };
            m
        ];
        m
    ];
    for b in 0..m {
        for b2 in (b + 1)..m {
            let (x, y) = (cst.symbol(b), cst.symbol(b2));
            let mut pair: Option<(f64, f64)> = None;
            let mut favor = Vec::new();
            let mut against = Vec::new();
            for i in 0..cst.k() {
                if close(x[i], y[i]) {
                    continue;
                }
                let (hi, lo) = if x[i] > y[i] {
                    (x[i], y[i])
                } else {
                    (y[i], x[i])
                };
                match pair {
                    None => pair = Some((hi, lo)),
                    Some((ph, pl)) if close(ph, hi) && close(pl, lo) => {}
                    Some(_) => return fail(b, b2, Some(i)),
                }
                if x[i] > y[i] {
                    favor.push(i);
                } else {
                    against.push(i);
                }
            }
            patterns[b2][b] = PairPattern {
                favor: against.clone(),
                against: favor.clone(),
            };
            patterns[b][b2] = PairPattern { favor, against };
        }
    }
    ChannelFreeReport {
        witness: None,
        patterns,
    }
}

/// Smallest Euclidean distance between two symbols.
pub fn min_symbol_separation(cst: &Constellation) -> Result<f64> {
    if cst.m() < 2 {
        return Err(Error::InvalidConstellation(
            "separation needs at least two symbols".into(),
        ));
    }
    let mut best = f64::INFINITY;
    for b in 0..cst.m() {
        for b2 in b + 1..cst.m() {
            let d = cst
                .symbol(b)
                .iter()
                .zip(cst.symbol(b2))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    Ok(best)
}

/// Molecule budget of one lattice variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetPlan {
    pub per_bit_budget: f64,
    pub bits_per_symbol: u32,
    /// Symbol spacing c′ as a multiple of the per-bit budget.
    pub spacing_coefficient: Ratio<u64>,
}

impl BudgetPlan {
    pub fn spacing(&self) -> f64 {
        self.per_bit_budget * *self.spacing_coefficient.numer() as f64
            / *self.spacing_coefficient.denom() as f64
    }
}

/// Multi-axis versus single-axis lattice of the same order under one
/// per-bit budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetComparison {
    pub order: u64,
    pub levels_per_axis: u64,
    pub multi_axis: BudgetPlan,
    pub single_axis: BudgetPlan,
    /// Molecules per symbol as a multiple of the per-bit budget.
    pub per_symbol_coefficient: Ratio<u64>,
}

/// Equal-budget symbol spacing for a `k`-axis lattice of order `M^k` and
/// for the single-axis lattice of the same order.
pub fn normalize_budget(k: u32, order: u64, per_bit_budget: f64) -> Result<BudgetComparison> {
    if k == 0 || k as usize > MAX_AXES {
        return Err(Error::param(
            "k",
            format!("must be in 1..={MAX_AXES}, got {k}"),
        ));
    }
    if !(per_bit_budget.is_finite() && per_bit_budget > 0.0) {
        return Err(Error::param(
            "c",
            format!("must be > 0, got {per_bit_budget}"),
        ));
    }
    let root = (order as f64).powf(1.0 / k as f64).round() as u64;
    let levels = [root.saturating_sub(1), root, root + 1]
        .into_iter()
        .find(|m| m.checked_pow(k) == Some(order));
    let Some(levels) = levels.filter(|m| *m >= 2) else {
        return Err(Error::param(
            "order",
            format!("{order} is not a perfect {k}-th power of an integer >= 2"),
        ));
    };
    if !levels.is_power_of_two() {
        return Err(Error::param(
            "order",
            format!("levels per axis {levels} is not a power of two; bits per symbol would not be integral"),
        ));
    }
    let n = levels.trailing_zeros() as u64;
    let bits = k as u64 * n;
    // per-symbol power k (M-1) c'/2 = k N c  =>  c' = 2 N c / (M - 1)
    let multi = Ratio::new(2 * n, levels - 1);
    // per-symbol power (M^k - 1) c'/2 = k N c  =>  c' = 2 k N c / (M^k - 1)
    let single = Ratio::new(2 * bits, order - 1);
    Ok(BudgetComparison {
        order,
        levels_per_axis: levels,
        multi_axis: BudgetPlan {
            per_bit_budget,
            bits_per_symbol: bits as u32,
            spacing_coefficient: multi,
        },
        single_axis: BudgetPlan {
            per_bit_budget,
            bits_per_symbol: bits as u32,
            spacing_coefficient: single,
        },
        per_symbol_coefficient: Ratio::from_integer(bits),
    })
}
