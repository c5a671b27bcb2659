//! Writes and reads the binary tensor container and a sidecar index.

use stylevar::dataset::StyleId;
use stylevar::tensor::{IndexEntry, Tensor, TensorIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    let features = Tensor::from_f64(vec![2, 2, 2], &[1.0, 0.0, 0.5, 0.2, 0.3, 0.9, 0.1, 0.4])?;
    let bytes = features.to_bytes();
    println!(
        "{} bytes; header {:?}",
        bytes.len(),
        String::from_utf8_lossy(&bytes[..8])
    );
    features.write(dir.path().join("features.tns"))?;

    let emb = Tensor::from_f64(vec![3], &[1.0, 2.0, 2.0])?;
    for name in ["source.tns", "result.tns", "image.tns", "style.tns"] {
        emb.write(dir.path().join(name))?;
    }
    let mut index = TensorIndex::default();
    index.entries.push(IndexEntry {
        record_id: "img-0001".into(),
        input_style: StyleId::Photo,
        target_style: StyleId::Anime,
        method: "Ours".into(),
        features: "features.tns".into(),
        source_text: "source.tns".into(),
        result_text: "result.tns".into(),
        image: "image.tns".into(),
    });
    index.style_text.insert(StyleId::Anime, "style.tns".into());
    index.style_corpus.insert(StyleId::Anime, vec!["features.tns".into()]);
    let path = dir.path().join("index.json");
    index.save(&path)?;

    let loaded = TensorIndex::load(&path)?;
    let entry = loaded.entry("img-0001", StyleId::Anime, "Ours").expect("entry");
    let gram = loaded.read(&entry.features)?.to_gram()?;
    println!("gram from container:\n{}", gram.matrix());
    println!("corpus styles: {:?}", loaded.corpus_grams()?.keys().collect::<Vec<_>>());
    Ok(())
}
