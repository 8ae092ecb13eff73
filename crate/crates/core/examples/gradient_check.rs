// Compares backpropagated gradients with central finite differences for
// each architecture.

use caption_forge::dataset::TrainingExample;
use caption_forge::embedding::{mock_embed, EmbeddingStore};
use caption_forge::neural::{ArchitectureKind, ArchitectureSpec, ModelParameters, NeuralModel};
use caption_forge::text::EncodedCaption;
use caption_forge::Result;

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)` over
/// every parameter.
pub fn max_relative_error(model: &NeuralModel, batch: &[TrainingExample], store: &EmbeddingStore) -> Result<(f64, &'static str)> {
    let (_, grad) = model.gradient(batch, store)?;
    let h = 1e-4;
    let mut worst = (0.0, "none");
    let mut probe = model.clone();
    for (t, name) in ModelParameters::TENSOR_NAMES.iter().enumerate() {
        for i in 0..grad.tensors()[t].len() {
            let orig = model.params.tensors()[t][i];
            probe.params.tensors_mut()[t][i] = orig + h;
            let up = probe.loss(batch, store)?;
            probe.params.tensors_mut()[t][i] = orig - h;
            let down = probe.loss(batch, store)?;
            probe.params.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.tensors()[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            // NaN counts as a failure
            if !(rel <= worst.0) {
                worst = (rel, name);
            }
        }
    }
    Ok(worst)
}

pub fn toy_batch(vocab_size: usize, max_len: usize, store: &mut EmbeddingStore) -> Result<Vec<TrainingExample>> {
    let mut batch = Vec::new();
    for (n, prefix) in [&[1usize, 4, 7][..], &[1, 9], &[1, 5, 6, 11]].iter().enumerate() {
        let id = format!("toy{n}");
        store.insert(id.clone(), mock_embed(&id, store.dim(), 1))?;
        batch.push(TrainingExample {
            photo_id: id,
            prefix: EncodedCaption::from_indices(prefix, max_len),
            target: [2, 7, vocab_size - 1][n],
        });
    }
    Ok(batch)
}

pub fn run_example() -> Result<()> {
    let (vocab_size, hidden, max_len, image_dim) = (12, 8, 5, 6);
    for kind in ArchitectureKind::ALL {
        let spec = ArchitectureSpec {
            max_len,
            ..ArchitectureSpec::uniform(kind, hidden, vocab_size, image_dim)
        };
        let model = NeuralModel::build(spec, 5)?;
        let mut store = EmbeddingStore::new(image_dim);
        let batch = toy_batch(vocab_size, max_len, &mut store)?;
        let (err, at) = max_relative_error(&model, &batch, &store)?;
        println!("{:>13}: {} parameters, max relative error {err:.2e} ({at})", kind.to_string(), model.params.num_parameters());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
