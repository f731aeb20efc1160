// Building constellations, testing which ones decode without channel
// knowledge, and the single-axis against multi-axis budget table.

use molcomm::constellation::{
    brsk, check_channel_free, min_symbol_separation, normalize_budget, rectangular_lattice, sbrsk,
    smaxrsk33,
};

pub fn run_example() -> molcomm::Result<()> {
    let c = 400.0;
    for cst in [
        sbrsk(0.0, c)?,
        sbrsk(0.2, c)?,
        brsk(0.4, 0.8, c)?,
        smaxrsk33(0.2, c)?,
    ] {
        let report = check_channel_free(&cst);
        print!("{cst}: channel-free = {}", report.is_channel_free());
        match report.witness {
            Some(w) => println!(" ({w})"),
            None => println!(),
        }
    }

    println!("\norder  bits  multi-axis  single-axis  per-symbol");
    for order in [4, 16, 64] {
        let cmp = normalize_budget(2, order, 1.0)?;
        println!(
            "{:5}  {:4}  {:>8}c  {:>10}c  {:>9}c",
            cmp.order,
            cmp.multi_axis.bits_per_symbol,
            cmp.multi_axis.spacing_coefficient.to_string(),
            cmp.single_axis.spacing_coefficient.to_string(),
            cmp.per_symbol_coefficient.to_string()
        );
        // the spacing claim, checked on the built lattices
        let multi = rectangular_lattice(
            2,
            cmp.levels_per_axis as usize,
            cmp.multi_axis.spacing() * c,
        )?;
        let single = rectangular_lattice(1, order as usize, cmp.single_axis.spacing() * c)?;
        println!(
            "       min separation at c = {c}: {:.1} (2 axes) vs {:.1} (1 axis)",
            min_symbol_separation(&multi)?,
            min_symbol_separation(&single)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
