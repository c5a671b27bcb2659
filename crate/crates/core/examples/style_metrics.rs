//! Gram-based style loss, content similarity and the style/image score on
//! small hand-made inputs.

use stylevar::metrics::{clips, cms, gram, sml, EmbeddingVec, FeatureMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 2 channels on a 2x2 grid
    let result = FeatureMap::new(2, 2, 2, vec![1.0, 0.0, 0.5, 0.2, 0.3, 0.9, 0.1, 0.4])?;
    let g = gram(&result);
    println!("gram of the result:\n{}", g.matrix());

    let corpus: Vec<_> = [
        vec![0.9, 0.1, 0.4, 0.3, 0.2, 0.8, 0.2, 0.5],
        vec![1.1, 0.0, 0.6, 0.1, 0.4, 1.0, 0.0, 0.3],
        vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
    ]
    .into_iter()
    .map(|v| FeatureMap::new(2, 2, 2, v).map(|fm| gram(&fm)))
    .collect::<Result<_, _>>()?;
    println!("sml against a 3-image corpus: {:.6}", sml(&g, &corpus)?);
    println!("sml against itself: {}", sml(&g, std::slice::from_ref(&g))?);

    let source = EmbeddingVec::new(vec![1.0, 2.0, 2.0])?;
    let output = EmbeddingVec::new(vec![2.0, 1.0, 2.0])?;
    println!(
        "cms([1,2,2], [2,1,2]) = {:.6} (8/9 = {:.6})",
        cms(&source, &output)?,
        8.0 / 9.0
    );

    let image = EmbeddingVec::new(vec![0.3, -0.2, 0.9, 0.1])?;
    let style_text = EmbeddingVec::new(vec![0.1, -0.4, 0.7, 0.4])?;
    println!("clips = {:.4}", clips(&image, &style_text)?);
    let opposite = EmbeddingVec::new(vec![-0.3, 0.2, -0.9, -0.1])?;
    println!(
        "clips of an opposite embedding is clamped: {}",
        clips(&image, &opposite)?
    );
    Ok(())
}
