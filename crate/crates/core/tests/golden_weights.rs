use std::path::PathBuf;

use csi_ppp_core::denoisers::{denoise_cnn, load_weights, read_weights, write_weights, NoiseLevel};
use csi_ppp_core::linalg::RealTensor3;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn floats(name: &str) -> Vec<f64> {
    std::fs::read_to_string(data(name))
        .unwrap()
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

#[test]
fn golden_model_reproduces_reference_output() {
    let model = load_weights(data("golden_small.pppw1")).unwrap();
    assert_eq!(model.layers().len(), 8);
    assert_eq!(model.parameter_count(), 16392);

    let input = RealTensor3::from_vec([32, 32, 2], floats("golden_input.txt")).unwrap();
    let want = floats("golden_output.txt");
    let got = denoise_cnn(&model, &input, NoiseLevel::new(0.1).unwrap()).unwrap();
    let worst = got
        .as_slice()
        .iter()
        .zip(&want)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst < 1e-5, "max deviation {worst}");
}

#[test]
fn golden_file_reserializes_identically() {
    let bytes = std::fs::read(data("golden_small.pppw1")).unwrap();
    let model = read_weights(&bytes).unwrap();
    let mut again = Vec::new();
    write_weights(&model, &mut again).unwrap();
    assert_eq!(again, bytes);
}
