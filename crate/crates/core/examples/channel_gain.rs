// Hit probabilities of passive and absorbing receivers, and the mean gain of
// a channel whose endpoints diffuse.

use molcomm::channel::{
    absorbing_hit_prob, mean_passive_cir, passive_cir, ChannelDistribution, ChannelParams, Receiver,
};

pub fn run_example() -> molcomm::Result<()> {
    let p = ChannelParams::table2();
    println!("passive h(r0 = 1 um)    = {:.4}", passive_cir(p.r0, &p)?);
    let short = ChannelParams { t_b: 1e-5, ..p };
    println!(
        "absorbing h(r0), T_b=10us = {:.4}",
        absorbing_hit_prob(short.r0, &short)?
    );

    println!("\n r (um)   passive h");
    for r in [0.6e-6, 1e-6, 1.5e-6, 2e-6, 3e-6] {
        println!("{:7.2}   {:.3e}", r * 1e6, passive_cir(r, &p)?);
    }

    // the mean over the distance law, computed two ways
    println!("\n t (s)    E[h] closed form   E[h] by quadrature");
    for t in [0.01, 0.1, 1.0, 10.0] {
        let dist = ChannelDistribution::new(t, &p, Receiver::Passive)?;
        println!(
            "{t:6}   {:.6e}       {:.6e}",
            mean_passive_cir(t, &p),
            dist.mean()?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
