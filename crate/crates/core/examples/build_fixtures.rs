//! Regenerates the shipped base matrices from the distribution fixtures.

use qcldpc::construction::{girth, qc_peg_detailed, validate_distribution, MetDegreeDistribution};
use qcldpc::expand;

fn main() -> qcldpc::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    for (met, n, z, out) in [
        ("met_rate02.met", 8000, 100, "rate02_n8000_z100.base"),
        ("met_rate01.met", 9600, 80, "rate01_n9600_z80.base"),
    ] {
        let dist = MetDegreeDistribution::load(format!("{dir}/{met}"))?;
        let peg = qc_peg_detailed(&dist, n, z, 1)?;
        validate_distribution(&peg.realized_distribution(dist.edge_types))?;
        let code = expand(&peg.base);
        println!(
            "{out}: girth {} stats n_total={} n_avr={:.4}",
            girth(&code, 12)?,
            code.stats().n_total,
            code.stats().n_avr
        );
        peg.base.save(format!("{dir}/{out}"))?;
    }
    Ok(())
}
