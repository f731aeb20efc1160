// Error rate over time for mobile transceivers: SBRSK needs no channel
// knowledge, on-off keying is decoded with the gain distribution or only its
// mean.

use molcomm::channel::{ChannelParams, Receiver};
use molcomm::constellation::{ook, sbrsk};
use molcomm::decoder::DecoderKind;
use molcomm::evaluation::{monte_carlo_mobile, relative_gain, MobileScenario, SlotSpacing};
use molcomm::reception::{ReceptionModel, ReceptionParams};

pub fn run_example() -> molcomm::Result<()> {
    let c = 2e5;
    let base = MobileScenario {
        constellation: sbrsk(0.0, c)?,
        params: ChannelParams::table2(),
        receiver: Receiver::Passive,
        reception: ReceptionParams::new(90.0, ReceptionModel::Poisson)?,
        decoder: DecoderKind::ChannelFree,
        declared: None,
        genie: false,
        stream_length: 50,
        spacing: SlotSpacing::BitDuration,
    };
    let runs = [
        base.clone(),
        MobileScenario {
            constellation: ook(2.0 * c)?,
            decoder: DecoderKind::FullCsi,
            ..base.clone()
        },
        MobileScenario {
            constellation: ook(2.0 * c)?,
            decoder: DecoderKind::MeanCi,
            ..base.clone()
        },
    ];
    let curves = runs
        .iter()
        .map(|sc| monte_carlo_mobile(sc, 2_000, 5))
        .collect::<molcomm::Result<Vec<_>>>()?;
    for curve in &curves {
        let avg = curve.time_average();
        let first = curve.points[0].estimate.value;
        let last = curve.points[curve.points.len() - 1].estimate.value;
        println!(
            "{:>6} {:<13} P_e(t=0) {first:.4}  P_e(end) {last:.4}  average {:.4} [{:.4}, {:.4}]",
            curve.constellation, curve.decoder, avg.value, avg.ci_low, avg.ci_high
        );
    }
    for other in &curves[1..] {
        println!(
            "gain of SBRSK over ook {}: {:.1}%",
            other.decoder,
            100.0 * relative_gain(&curves[0], other)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
