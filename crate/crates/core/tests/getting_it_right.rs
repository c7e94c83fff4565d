use bnr::gibbs::{run_getting_it_right, Fault, GirConfig, GirReport};

fn print(report: &GirReport, label: &str) {
    for s in &report.statistics {
        println!(
            "{label} {:<16} prior {:>10.5} ± {:.5}  chain {:>10.5} ± {:.5}  z {:>7.2}",
            s.name, s.prior_mean, s.prior_se, s.chain_mean, s.chain_se, s.z
        );
    }
}

#[test]
fn sampler_preserves_the_joint_distribution() {
    let report = run_getting_it_right(&GirConfig::default()).unwrap();
    print(&report, "ok");
    assert_eq!(report.statistics.len(), 12);
    assert!(report.passed(), "max |z| = {}", report.max_abs_z());
}

#[test]
fn injected_tau2_fault_is_detected() {
    let config = GirConfig {
        fault: Fault::Tau2ShapeOffByOne,
        ..GirConfig::default()
    };
    let report = run_getting_it_right(&config).unwrap();
    print(&report, "fault");
    assert!(report.max_abs_z() > 6.0, "max |z| = {}", report.max_abs_z());
}
