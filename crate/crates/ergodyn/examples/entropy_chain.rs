//! Three entropy estimators on one cloud of the doubling map, all
//! converging on log 2: covering growth over a pruned cloud, shadowing
//! masses at cloud points, and reference-volume decay along returning
//! times. Smaller sizes than the test suite uses, so this runs in seconds.

use ergodyn::cloud::{generate_cloud, CloudMeasure};
use ergodyn::entropy::{brin_katok_local, katok_entropy, riemannian_panel, ReturnWindow};
use ergodyn::models::doubling_system;

fn main() -> ergodyn::Result<()> {
    let sys = doubling_system();
    let cloud = generate_cloud(&sys, &CloudMeasure::Lebesgue, 30_000, 17)?;
    let exact = 2f64.ln();

    let katok = katok_entropy(&sys, &cloud, &[0.1, 0.2], &[2, 3, 4, 5, 6, 7, 8], 0.1)?;
    report("covering growth", katok.value, katok.std_err, exact);
    println!("  chosen radius: {}", katok.diagnostics["chosen_r"]);

    let bk = brin_katok_local(&sys, &cloud, 12, 0.1, &[2, 3, 4, 5, 6, 7, 8])?;
    report("shadowing mass", bk.value, bk.std_err, exact);

    let rie = riemannian_panel(
        &sys,
        &cloud,
        8,
        ReturnWindow::Everywhere,
        0.1,
        &[2, 4, 6, 8],
        150_000,
        23,
    )?;
    report("volume decay", rie.value, rie.std_err, exact);
    Ok(())
}

fn report(name: &str, value: f64, std_err: f64, exact: f64) {
    println!(
        "{name}: {value:.4} +- {std_err:.4}  (log 2 = {exact:.4}, rel err {:.1}%)",
        (value / exact - 1.0).abs() * 100.0
    );
}
