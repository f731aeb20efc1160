// Driving an experiment from a scenario file, as the command line does.

use molcomm::cli::ber_table;
use molcomm::scenario::Scenario;

const SCENARIO: &str = "
[channel]
r0 = 1um
receiver = passive

[reception]
lambda = 0, 10, 30
model = poisson

[run]
mode = static
method = exact

[scheme.sbrsk]
family = sbrsk
c = 400
decoder = channel-free

[scheme.ook]
family = ook
c = 400
decoder = ook-threshold
";

pub fn run_example() -> molcomm::Result<()> {
    let scenario = Scenario::parse(SCENARIO)?;
    print!("{}", ber_table(&scenario)?);
    println!("\nresolved configuration:\n{}", scenario.to_text());
    Ok(())
}

#[allow(dead_code)]
fn main() -> molcomm::Result<()> {
    run_example()
}
