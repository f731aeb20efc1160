use molcomm::channel::{distance_pdf, sample_distance, ChannelParams, Receiver};
use molcomm::constellation::{maxrsk, sbrsk, smaxrsk33, Constellation, RatioVector};
use molcomm::decoder::{
    decode_channel_free, decode_ml_poisson, raster_regions, ChannelKnowledge, Decode, DecoderKind,
    DecoderSpec,
};
use molcomm::evaluation::{
    exact_error_probability, monte_carlo_mobile, monte_carlo_static, wilson_interval, with_threads,
    MobileScenario, SlotSpacing, StaticScenario,
};
use molcomm::reception::{
    ln_port_pmf, sample_received, truncation_bound, ReceivedVector, ReceptionModel, ReceptionParams,
};
use molcomm::rng::substream;
use molcomm::scenario::Scenario;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn reception(lambda: f64, model: ReceptionModel) -> ReceptionParams {
    ReceptionParams::new(lambda, model).unwrap()
}

fn model() -> impl Strategy<Value = ReceptionModel> {
    prop_oneof![Just(ReceptionModel::Exact), Just(ReceptionModel::Poisson)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn port_pmf_sums_to_one(a in 0u32..3000, h in 0.0f64..1.0, lambda in 0.0f64..150.0, model in model()) {
        let params = reception(lambda, model);
        let a = a as f64;
        let upper = truncation_bound(a, h, lambda);
        let total: f64 = (0..=upper).map(|m| ln_port_pmf(m, a, h, &params).map_or(0.0, f64::exp)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "sum {total}");
    }

    #[test]
    fn channel_free_decoding_ignores_the_channel(
        rho in 0.0f64..0.49,
        p in 0.01f64..0.33,
        c in 10.0f64..2000.0,
        h in 1e-4f64..0.5,
        lambda in 0.0f64..100.0,
        m in proptest::collection::vec(0u64..200, 3),
    ) {
        for cst in [sbrsk(rho, c).unwrap(), smaxrsk33(p, c).unwrap()] {
            let mv = ReceivedVector(m[..cst.k()].to_vec());
            let ml = decode_ml_poisson(&mv, &cst, h, lambda);
            let cf = decode_channel_free(&mv, &cst);
            match (ml, cf) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b, "{} at {:?}", cst, mv.0),
                // λ = 0 can make an observation impossible for ML only
                (Err(_), Ok(_)) => prop_assert!(lambda == 0.0),
                (a, b) => prop_assert!(false, "{a:?} {b:?}"),
            }
        }
    }

    #[test]
    fn decoders_are_deterministic_and_total(
        shares in proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, 2), 2..5),
        c in 10.0f64..500.0,
        h in 0.01f64..0.5,
        lambda in 0.1f64..50.0,
        m in proptest::collection::vec(0u64..120, 2),
    ) {
        let ratios: Vec<RatioVector> = shares
            .iter()
            .map(|s| {
                let total: f64 = s.iter().sum();
                RatioVector::new(s.iter().map(|x| x / total).collect()).unwrap()
            })
            .collect();
        let Ok(cst) = maxrsk(c, &ratios) else { return Ok(()) };
        for kind in [DecoderKind::PoissonMl, DecoderKind::ExactMl, DecoderKind::MeanCi, DecoderKind::NoiseFree] {
            let knowledge = match kind {
                DecoderKind::MeanCi => ChannelKnowledge::MeanGain(h),
                DecoderKind::NoiseFree => ChannelKnowledge::Nothing,
                _ => ChannelKnowledge::ExactGain(h),
            };
            let dec = DecoderSpec::new(kind, knowledge).unwrap().bind(&cst, lambda).unwrap();
            let first = dec.decode(&m).unwrap();
            prop_assert!(first < cst.m());
            prop_assert_eq!(first, dec.decode(&m).unwrap());
        }
    }

    #[test]
    fn wilson_contains_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let e = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(e, n);
        let p = e as f64 / n as f64;
        prop_assert!(lo <= p && p <= hi && 0.0 <= lo && hi <= 1.0);
    }

    #[test]
    fn scenario_text_round_trips(
        d_inf in 1e-12f64..1e-6,
        r0 in 0.5e-6f64..1e-4,
        lambdas in proptest::collection::vec(0.0f64..200.0, 1..4),
        c in 1.0f64..1e7,
        rho in 0.0f64..0.5,
        trials in 1u64..1_000_000,
    ) {
        let lambda_list: Vec<String> = lambdas.iter().map(|l| format!("{l:?}")).collect();
        let text = format!(
            "[channel]\nd_inf = {d_inf:?}\nr0 = {r0:?}\n[reception]\nlambda = {}\n[run]\ntrials = {trials}\n\
             [scheme.s]\nfamily = sbrsk\nrho0 = {rho:?}\nc = {c:?}\ndecoder = channel-free\n",
            lambda_list.join(", ")
        );
        let sc = Scenario::parse(&text).unwrap();
        prop_assert_eq!(sc.params.d_inf, d_inf);
        prop_assert_eq!(&sc.lambdas, &lambdas);
        prop_assert_eq!(Scenario::parse(&sc.to_text()).unwrap(), sc);
    }
}

/// Pearson chi-square p-value of `counts` against cell probabilities; cells
/// with expected count below 5 are pooled into their neighbour.
fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * n as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += obs;
        last.1 += exp;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn received_counts_follow_the_pmf() {
    let cases = [
        (400.0, 0.0281, 10.0, ReceptionModel::Exact),
        (400.0, 0.0281, 10.0, ReceptionModel::Poisson),
        (50.0, 0.6, 0.0, ReceptionModel::Exact),
        (2e5, 1e-4, 90.0, ReceptionModel::Poisson),
    ];
    for (i, &(a, h, lambda, model)) in cases.iter().enumerate() {
        let params = reception(lambda, model);
        let cst = Constellation::new("one", vec![vec![a]]).unwrap();
        let upper = truncation_bound(a, h, lambda);
        let mut counts = vec![0u64; upper as usize + 1];
        let mut rng = substream(99, i as u64);
        for _ in 0..40_000 {
            let m = sample_received(0, &cst, h, &params, &mut rng).unwrap().0[0];
            counts[(m.min(upper)) as usize] += 1;
        }
        let probs: Vec<f64> = (0..=upper)
            .map(|m| ln_port_pmf(m, a, h, &params).map_or(0.0, f64::exp))
            .collect();
        let p = chi_square_p(&counts, &probs);
        assert!(p > 1e-4, "case {i}: chi-square p = {p}");
    }
}

#[test]
fn sampled_distances_follow_the_density() {
    let (r0, d_tr, t): (f64, f64, f64) = (1e-6, 5e-12, 0.05);
    let sigma = (4.0 * d_tr * t).sqrt();
    let edges: Vec<f64> = (0..=40)
        .map(|j| (r0 - 4.0 * sigma).max(0.0) + j as f64 * 8.0 * sigma / 40.0)
        .collect();
    // Simpson on each bin of the density as the oracle
    let bin_mass = |a: f64, b: f64| {
        let n = 64;
        let hstep = (b - a) / n as f64;
        let f = |x: f64| distance_pdf(x, r0, d_tr, t).unwrap();
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * hstep) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * hstep / 3.0
    };
    let mut probs: Vec<f64> = edges.windows(2).map(|w| bin_mass(w[0], w[1])).collect();
    let inside: f64 = probs.iter().sum::<f64>();
    probs.push((1.0f64 - inside).max(0.0));
    let mut counts = vec![0u64; probs.len()];
    let mut rng = substream(5, 0);
    for _ in 0..40_000 {
        let r = sample_distance(r0, d_tr, t, &mut rng).unwrap();
        let bin = edges
            .windows(2)
            .position(|w| r >= w[0] && r < w[1])
            .unwrap_or(probs.len() - 1);
        counts[bin] += 1;
    }
    let p = chi_square_p(&counts, &probs);
    assert!(p > 1e-4, "chi-square p = {p}");
}

#[test]
fn regions_partition_the_grid() {
    let cst = smaxrsk33(0.2, 300.0).unwrap();
    let dec = DecoderSpec::new(DecoderKind::PoissonMl, ChannelKnowledge::ExactGain(0.05))
        .unwrap()
        .bind(&cst, 3.0)
        .unwrap();
    let raster = raster_regions(&dec, 3, 30).unwrap();
    assert_eq!(raster.cells().len(), 31 * 31 * 31);
    assert!(raster.cells().iter().all(|&b| b < 3));
    // every cell agrees with a direct decode
    for (flat, &b) in raster.cells().iter().enumerate() {
        let m = [
            (flat / 961) as u64,
            (flat / 31 % 31) as u64,
            (flat % 31) as u64,
        ];
        assert_eq!(dec.decode(&m).unwrap(), b);
    }
}

#[test]
fn error_mass_plus_correct_mass_is_one() {
    // P_e from enumeration plus the correct mass collected cell by cell
    let cst = sbrsk(0.3, 200.0).unwrap();
    let (h, params) = (0.05, reception(4.0, ReceptionModel::Poisson));
    let dec = DecoderSpec::new(DecoderKind::PoissonMl, ChannelKnowledge::ExactGain(h))
        .unwrap()
        .bind(&cst, 4.0)
        .unwrap();
    let pe = exact_error_probability(&cst, &dec, h, &params)
        .unwrap()
        .value;
    let mut correct = 0.0;
    for m1 in 0..120u64 {
        for m2 in 0..120u64 {
            let b = dec.decode(&[m1, m2]).unwrap();
            let s = cst.symbol(b);
            correct += (ln_port_pmf(m1, s[0], h, &params).unwrap()
                + ln_port_pmf(m2, s[1], h, &params).unwrap())
            .exp();
        }
    }
    correct /= 2.0;
    assert!((pe + correct - 1.0).abs() < 1e-9, "{pe} + {correct}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let st = StaticScenario {
        constellation: sbrsk(0.0, 400.0).unwrap(),
        h: 0.0281,
        reception: reception(30.0, ReceptionModel::Exact),
        decoder: DecoderKind::ChannelFree,
    };
    let one = with_threads(Some(1), || monte_carlo_static(&st, 20_000, 8))
        .unwrap()
        .unwrap();
    let many = with_threads(Some(4), || monte_carlo_static(&st, 20_000, 8))
        .unwrap()
        .unwrap();
    assert_eq!(one, many);

    let mobile = MobileScenario {
        constellation: molcomm::constellation::ook(4e5).unwrap(),
        params: ChannelParams::table2(),
        receiver: Receiver::Passive,
        reception: reception(90.0, ReceptionModel::Poisson),
        decoder: DecoderKind::FullCsi,
        declared: None,
        genie: false,
        stream_length: 50,
        spacing: SlotSpacing::BitDuration,
    };
    let one = with_threads(Some(1), || monte_carlo_mobile(&mobile, 3_000, 2))
        .unwrap()
        .unwrap();
    let many = with_threads(Some(3), || monte_carlo_mobile(&mobile, 3_000, 2))
        .unwrap()
        .unwrap();
    assert_eq!(one, many);
    let other_seed = monte_carlo_mobile(&mobile, 3_000, 3).unwrap();
    assert_ne!(one, other_seed);
}
