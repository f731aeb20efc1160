// Time-averaged error against the per-bit budget for mobile transceivers.

use molcomm::channel::{ChannelParams, Receiver};
use molcomm::constellation::{ook, sbrsk};
use molcomm::decoder::DecoderKind;
use molcomm::evaluation::{ber_vs_budget, curves_to_csv, MobileScenario, SlotSpacing};
use molcomm::reception::{ReceptionModel, ReceptionParams};

pub fn run_example() -> molcomm::Result<()> {
    let budgets = [2.5e4, 1e5, 4e5];
    let template = MobileScenario {
        constellation: sbrsk(0.0, budgets[0])?,
        params: ChannelParams::table2(),
        receiver: Receiver::Passive,
        reception: ReceptionParams::new(90.0, ReceptionModel::Poisson)?,
        decoder: DecoderKind::ChannelFree,
        declared: None,
        genie: false,
        stream_length: 50,
        spacing: SlotSpacing::BitDuration,
    };
    let sbrsk_curve = ber_vs_budget(&template, |c| sbrsk(0.0, c), &budgets, 500, 3)?;
    let ook_template = MobileScenario {
        decoder: DecoderKind::FullCsi,
        ..template.clone()
    };
    let ook_curve = ber_vs_budget(&ook_template, |c| ook(2.0 * c), &budgets, 500, 3)?;
    print!("{}", curves_to_csv(&[sbrsk_curve, ook_curve]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
