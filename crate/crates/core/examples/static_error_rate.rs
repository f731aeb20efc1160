// Error probability over a static channel: exact enumeration against Monte
// Carlo, and SBRSK against on-off keying at equal and at doubled budget.

use molcomm::constellation::{ook, sbrsk};
use molcomm::decoder::DecoderKind;
use molcomm::evaluation::{monte_carlo_static, StaticScenario};
use molcomm::reception::{ReceptionModel, ReceptionParams};

pub fn run_example() -> molcomm::Result<()> {
    let (c, h) = (400.0, 0.0281);
    println!("lambda   sbrsk exact   sbrsk MC (95% CI)                ook exact    sbrsk 2c exact");
    for lambda in [0.0, 10.0, 30.0, 90.0] {
        let reception = ReceptionParams::new(lambda, ReceptionModel::Poisson)?;
        let scenario = |constellation, decoder| StaticScenario {
            constellation,
            h,
            reception,
            decoder,
        };
        let s = scenario(sbrsk(0.0, c)?, DecoderKind::ChannelFree);
        let exact = s.exact()?;
        let mc = monte_carlo_static(&s, 20_000, 11)?;
        let o = scenario(ook(2.0 * c)?, DecoderKind::OokThreshold).exact()?;
        let s2 = scenario(sbrsk(0.0, 2.0 * c)?, DecoderKind::ChannelFree).exact()?;
        println!(
            "{lambda:6}   {:.4e}    {:.4e} [{:.3e}, {:.3e}]   {:.4e}   {:.4e}",
            exact.value, mc.value, mc.ci_low, mc.ci_high, o.value, s2.value
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
