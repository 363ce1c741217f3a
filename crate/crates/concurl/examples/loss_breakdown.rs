//! One forward pass, four loss presets. Shows how the mode choice gates the
//! similarity, swapped-clustering, and consensus components, and that the
//! skipped components report as zero.

use concurl::augment::{make_views, AugmentPolicy};
use concurl::autodiff::Graph;
use concurl::config::Mode;
use concurl::dataset::generate_blobs;
use concurl::ensemble::TransformEnsemble;
use concurl::model::{Activation, Model, NetworkSpec};
use concurl::objectives::{total_loss, SinkhornConfig};
use concurl::Result;

fn main() -> Result<()> {
    let data = generate_blobs(3, 8, 16, 5.0, 1.0, 2)?;
    let spec = NetworkSpec {
        encoder_layers: vec![8, 24, 16],
        projector: (24, 8),
        predictor: (24, 8),
        cluster_projector: (24, 8),
        activation: Activation::Relu,
        batch_norm: true,
    };
    let mut model = Model::init(&spec, 3, 0.99, 9)?;
    let transforms = TransformEnsemble::gaussian_projections(5, spec.cluster_dim(), 2, 31)?;

    let batch = data.batch(&(0..24).collect::<Vec<_>>())?;
    let views = make_views(&batch, &AugmentPolicy::default())?;
    let sinkhorn = SinkhornConfig::default();

    println!("{:>10} {:>10} {:>10} {:>10} {:>10}", "mode", "l1", "l2", "l3", "total");
    for mode in [Mode::Concurl, Mode::Byol, Mode::Soft, Mode::ByolSoft] {
        // A fresh graph per pass; the model parameters are reused.
        let graph = Graph::new();
        let bundle = model.forward(&graph, &views)?;
        let (_, parts) =
            total_loss(&bundle, Some(&transforms), &mode.weights(), 0.1, &sinkhorn)?;
        println!(
            "{:>10} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            mode.as_str(),
            parts.l1,
            parts.l2,
            parts.l3,
            parts.total
        );
    }

    // An untrained cluster head sits near the uniform-assignment ceiling of
    // ln K for the swapped loss.
    println!("\nln K = {:.5} for K = 3", (3.0f64).ln());
    Ok(())
}
