//! Trains the same data and seed under two presets: similarity-only, and the
//! full consensus objective. The consensus run should cluster at least as
//! well, which is the point of the extra loss terms.

use concurl::config::{DatasetSpec, EnsembleConfig, EnsembleKindConfig, Mode, TrainConfig};
use concurl::model::{Activation, NetworkSpec};
use concurl::objectives::SinkhornConfig;
use concurl::trainer::train;
use concurl::Result;

fn main() -> Result<()> {
    let base = std::env::temp_dir().join("concurl_mode_comparison");
    for mode in [Mode::Byol, Mode::Concurl] {
        let config = TrainConfig {
            dataset: DatasetSpec::Blobs {
                num_clusters: 4,
                dim: 16,
                points_per_cluster: 96,
                center_scale: 5.0,
                noise_sigma: 1.0,
                seed: 3,
            },
            mode,
            batch_size: 96,
            epochs: 10,
            learning_rate: 5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            tau_b: 0.99,
            temperature: 0.1,
            sinkhorn: SinkhornConfig::default(),
            ensemble: EnsembleConfig {
                kind: EnsembleKindConfig::GaussianProjection,
                m: 10,
                d_out: None,
                seed: None,
            },
            augment: Default::default(),
            network: Some(NetworkSpec {
                encoder_layers: vec![16, 64, 32],
                projector: (64, 16),
                predictor: (64, 16),
                cluster_projector: (64, 16),
                activation: Activation::Relu,
                batch_norm: true,
            }),
            seed: 11,
            eval_every: 10,
            output_dir: base.join(mode.as_str()),
        };
        let artifacts = train(&config)?;
        println!(
            "{:>8}: acc {:.4}  nmi {:.4}  ari {:.4}",
            mode.as_str(),
            artifacts.final_report.acc,
            artifacts.final_report.nmi,
            artifacts.final_report.ari
        );
    }
    Ok(())
}
