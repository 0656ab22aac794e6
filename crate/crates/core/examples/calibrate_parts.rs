//! Held-out part accuracy after LQ/MQ/HQ exposure at each domain's noise.

use xil::harness::{measure, CalibrationSettings};
use xil::worldsim::DomainConfig;

fn main() -> xil::Result<()> {
    for cfg in [DomainConfig::single_4way(), DomainConfig::double_5way()] {
        let report = measure(&cfg, &CalibrationSettings::default())?;
        println!("{} (region sigma {:.2})", cfg.name.as_str(), report.sigma);
        for row in &report.rows {
            println!("  {} {:6.2}%  target {:6.2}%", row.quality, row.accuracy, row.target);
        }
    }
    Ok(())
}
