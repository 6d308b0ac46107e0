use inrobust::data::synth::{gradient_image, scene_rgb};
use inrobust::data::{load_signal, load_weights, save_reconstruction, save_weights, WeightDtype};
use inrobust::metrics::{clean_psnr, noisy_psnr_stats};
use inrobust::{train, LossSpec, NoiseFamily, NoiseSpec, SirenConfig, TrainConfig};

fn small_model() -> SirenConfig {
    SirenConfig {
        hidden_width: 32,
        hidden_layers: 2,
        ..SirenConfig::new(2, 1)
    }
}

#[test]
fn fitted_model_degrades_with_noise_strength() {
    let ds = gradient_image(16, 16);
    let cfg = TrainConfig {
        epochs: 400,
        ..TrainConfig::default()
    };
    let (params, _) = train(&ds, small_model(), &cfg).unwrap();
    for family in [NoiseFamily::GaussianMult, NoiseFamily::BinaryMask] {
        let means: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&s| {
                noisy_psnr_stats(&params, &ds, &NoiseSpec::new(family, s, 7), 20)
                    .unwrap()
                    .mean_db
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{family}: {means:?}");
    }
}

#[test]
fn file_to_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let source = scene_rgb(12, 10);
    let input = save_reconstruction(&source.targets, &source.shape, source.modality, &dir.path().join("in")).unwrap();
    let ds = load_signal(&input).unwrap();
    assert_eq!(ds, source);

    let model = SirenConfig {
        out_dim: 3,
        ..small_model()
    };
    let cfg = TrainConfig {
        epochs: 50,
        loss: LossSpec::robust(0.1),
        ..TrainConfig::default()
    };
    let (params, report) = train(&ds, model, &cfg).unwrap();
    let weights = dir.path().join("w.inr");
    save_weights(&params, &weights, WeightDtype::F64).unwrap();
    let loaded = load_weights(&weights).unwrap();
    assert_eq!(clean_psnr(&loaded, &ds).unwrap(), report.final_psnr_db);
}
