//! Clustering scores are invariant to label names: accuracy searches over
//! cluster-to-class mappings, and NMI/ARI compare partition structure.

use concurl::metrics::{evaluate_clustering, ClusterReport};
use concurl::Result;

fn show(name: &str, report: &ClusterReport) {
    println!(
        "{name}: acc {:.4}  nmi {:.4}  ari {:.4}  (mapping {:?})",
        report.acc, report.nmi, report.ari, report.mapping
    );
}

fn main() -> Result<()> {
    let truth = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];

    // Same partition, permuted names: every score is exactly 1.
    let renamed = vec![2, 2, 2, 0, 0, 0, 1, 1, 1];
    show("renamed   ", &evaluate_clustering(&renamed, &truth)?);

    // One point defects from each cluster.
    let noisy = vec![0, 0, 1, 1, 1, 2, 2, 2, 0];
    show("noisy     ", &evaluate_clustering(&noisy, &truth)?);

    // Two clusters merged: accuracy degrades gracefully, ARI drops harder.
    let merged = vec![0, 0, 0, 0, 0, 0, 1, 1, 1];
    show("merged    ", &evaluate_clustering(&merged, &truth)?);

    // A single cluster carries no information.
    let collapsed = vec![0; 9];
    show("collapsed ", &evaluate_clustering(&collapsed, &truth)?);
    Ok(())
}
