// Decision regions of asymmetric BRSK: with the gain known the boundary is a
// line whose slope falls toward 1 as noise grows; decoded with only the
// gain distribution of a mobile channel it bends.

use molcomm::channel::{ChannelDistribution, ChannelParams, Receiver};
use molcomm::constellation::brsk;
use molcomm::decoder::{
    raster_regions, ratio_threshold, ChannelKnowledge, DecoderKind, DecoderSpec,
};

pub fn run_example() -> molcomm::Result<()> {
    let (h, grid) = (0.0281, 100);
    let cst = brsk(0.4, 0.8, 400.0)?;
    for lambda in [1.0, 30.0] {
        let dec = DecoderSpec::new(DecoderKind::PoissonMl, ChannelKnowledge::ExactGain(h))?
            .bind(&cst, lambda)?;
        let raster = raster_regions(&dec, 2, grid)?;
        let slope = raster.boundary_slope(1, 1..=grid).unwrap_or(f64::NAN);
        let eta = ratio_threshold(0.4, 0.8, 400.0, h, lambda)?;
        println!("static, lambda = {lambda:4}: boundary slope {slope:.3}, threshold eta {eta:.3}");
    }

    let mobile = brsk(0.4, 0.8, 1000.0)?;
    let dist = ChannelDistribution::new(50.0, &ChannelParams::table2(), Receiver::Passive)?;
    let dec = DecoderSpec::new(DecoderKind::FullCsi, ChannelKnowledge::Distribution(dist))?
        .bind(&mobile, 10.0)?;
    let raster = raster_regions(&dec, 2, grid)?;
    println!("\nmobile, t = 50 s, lambda = 10: first m1 decoded as bit 1");
    for (m1, m2) in raster
        .boundary_points(1)
        .into_iter()
        .filter(|(_, m2)| m2 % 10 == 0)
    {
        println!(
            "  m2 = {m2:3}  m1 = {m1:3}  ratio {:.2}",
            m1 as f64 / m2 as f64
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
