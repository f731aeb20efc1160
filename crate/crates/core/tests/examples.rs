mod channel_gain {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/channel_gain.rs"
    ));
}

mod constellation_design {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/constellation_design.rs"
    ));
}

mod decision_regions {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/decision_regions.rs"
    ));
}

mod static_error_rate {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/static_error_rate.rs"
    ));
}

mod mobile_error_rate {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/mobile_error_rate.rs"
    ));
}

mod imperfect_csi {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/imperfect_csi.rs"
    ));
}

mod budget_sweep {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/budget_sweep.rs"
    ));
}

mod scenario_file {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/scenario_file.rs"
    ));
}

#[test]
fn channel_gain_example_runs() {
    channel_gain::run_example().expect("channel_gain example should run");
}

#[test]
fn constellation_design_example_runs() {
    constellation_design::run_example().expect("constellation_design example should run");
}

#[test]
fn decision_regions_example_runs() {
    decision_regions::run_example().expect("decision_regions example should run");
}

#[test]
fn static_error_rate_example_runs() {
    static_error_rate::run_example().expect("static_error_rate example should run");
}

#[test]
fn mobile_error_rate_example_runs() {
    mobile_error_rate::run_example().expect("mobile_error_rate example should run");
}

#[test]
fn imperfect_csi_example_runs() {
    imperfect_csi::run_example().expect("imperfect_csi example should run");
}

#[test]
fn budget_sweep_example_runs() {
    budget_sweep::run_example().expect("budget_sweep example should run");
}

#[test]
fn scenario_file_example_runs() {
    scenario_file::run_example().expect("scenario_file example should run");
}
