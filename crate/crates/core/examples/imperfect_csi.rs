// Decoding with wrong channel parameters: the SBRSK curve does not move,
// on-off keying degrades.

use molcomm::channel::{ChannelParams, Receiver};
use molcomm::constellation::{ook, sbrsk};
use molcomm::decoder::DecoderKind;
use molcomm::evaluation::{imperfect_csi_sweep, MobileScenario, SlotSpacing};
use molcomm::reception::{ReceptionModel, ReceptionParams};

pub fn run_example() -> molcomm::Result<()> {
    let params = ChannelParams {
        d_tr: 5e-11,
        t_b: 0.05,
        ..ChannelParams::table2()
    };
    let c = 2e6;
    let base = MobileScenario {
        constellation: sbrsk(0.0, c)?,
        params,
        receiver: Receiver::Absorbing,
        reception: ReceptionParams::new(80.0, ReceptionModel::Poisson)?,
        decoder: DecoderKind::ChannelFree,
        declared: None,
        genie: false,
        stream_length: 50,
        spacing: SlotSpacing::BitDuration,
    };
    let full_csi_ook = MobileScenario {
        constellation: ook(2.0 * c)?,
        decoder: DecoderKind::FullCsi,
        ..base.clone()
    };
    let wrong = [
        (
            "d_inf x18",
            ChannelParams {
                d_inf: 9e-8,
                ..params
            },
        ),
        (
            "d_tr x10",
            ChannelParams {
                d_tr: 5e-10,
                ..params
            },
        ),
    ];
    for (what, wrong) in wrong {
        for sc in [&base, &full_csi_ook] {
            let (truth, mismatched) = imperfect_csi_sweep(sc, &wrong, 2_000, 9)?;
            let (a, b) = (truth.time_average(), mismatched.time_average());
            let same = truth
                .points
                .iter()
                .zip(&mismatched.points)
                .all(|(x, y)| x.estimate == y.estimate);
            println!(
                "{what}: {:>5} true {:.3e}  wrong {:.3e}  identical curves: {same}",
                truth.constellation, a.value, b.value
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
