// Deterministic stand-in image embeddings and the binary store format.

use caption_forge::embedding::{mock_embed, EmbeddingStore};
use caption_forge::Result;

pub fn run_example() -> Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut store = EmbeddingStore::new(8);
    for id in ["photo-a", "photo-b", "photo-c"] {
        store.insert(id, mock_embed(id, 8, 42))?;
    }
    // same id and seed, same vector
    assert_eq!(mock_embed("photo-a", 8, 42), *store.require("photo-a")?);

    let path = dir.path().join("images.nice");
    store.save(&path)?;
    let back = EmbeddingStore::load(&path)?;
    assert_eq!(back, store);
    println!("{} vectors, {} bytes on disk", back.len(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));

    let csv = dir.path().join("vectors.csv");
    std::fs::write(&csv, "menu1,0.5,0.25,1\nmenu2,-1,0,2\n").expect("write csv");
    let imported = EmbeddingStore::from_csv(&csv)?;
    for (id, e) in imported.iter() {
        println!("{id}: {:?}", e.values());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
